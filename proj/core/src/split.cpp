#include "tomosim/split.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "tomosim/rng.hpp"

namespace tomosim {

void PercentMatrix::validate() const {
  if (items == 0 || defects == 0) throw data_error("percent matrix: empty");
  if (shares.size() != items * defects) throw data_error("percent matrix: shape mismatch");
  if (item_ids.size() != items || defect_names.size() != defects)
    throw data_error("percent matrix: name lists do not match shape");
  for (double v : shares)
    if (!(v >= 0.0) || !(v <= 1.0)) throw data_error("percent matrix: share outside [0, 1]");
  for (std::size_t j = 0; j < defects; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < items; ++i) sum += share(i, j);
    if (std::abs(sum - 1.0) > 1e-12)
      throw data_error("percent matrix: column '" + defect_names[j] + "' does not sum to 1");
  }
}

PercentMatrix normalize_table(const DefectTable& table) {
  PercentMatrix m;
  m.items = table.item_ids.size();
  m.defects = table.defect_names.size();
  m.item_ids = table.item_ids;
  m.defect_names = table.defect_names;
  m.shares.resize(m.items * m.defects);

  for (std::size_t j = 0; j < m.defects; ++j) {
    long long total = 0;
    for (std::size_t i = 0; i < m.items; ++i) total += table.count(i, j);
    if (total <= 0)
      throw data_error("normalize_table: defect '" + table.defect_names[j] +
                       "' has zero total count");
    for (std::size_t i = 0; i < m.items; ++i)
      m.shares[i * m.defects + j] =
          static_cast<double>(table.count(i, j)) / static_cast<double>(total);
  }
  m.validate();
  return m;
}

std::vector<double> subset_shares(const PercentMatrix& m, const std::vector<int>& items) {
  std::vector<double> achieved(m.defects, 0.0);
  for (int i : items) {
    if (i < 0 || static_cast<std::size_t>(i) >= m.items)
      throw data_error("subset_shares: item index out of range");
    for (std::size_t j = 0; j < m.defects; ++j)
      achieved[j] += m.share(static_cast<std::size_t>(i), j);
  }
  return achieved;
}

namespace {

std::vector<double> achieved_of_selection(const PercentMatrix& m,
                                          const std::vector<std::uint8_t>& sel) {
  std::vector<double> achieved(m.defects, 0.0);
  for (std::size_t i = 0; i < m.items; ++i)
    if (sel[i])
      for (std::size_t j = 0; j < m.defects; ++j) achieved[j] += m.share(i, j);
  return achieved;
}

double objective_of(const std::vector<double>& achieved, const std::vector<double>& targets) {
  double obj = 0.0;
  for (std::size_t j = 0; j < achieved.size(); ++j) {
    const double d = achieved[j] - targets[j];
    obj += d * d;
  }
  return obj;
}

}  // namespace

EmpiricalOutcome empirical_split(const PercentMatrix& m, double target, int n_subset,
                                 const EmpiricalOptions& opts) {
  m.validate();
  if (!(target >= 0.0 && target <= 1.0))
    throw data_error("empirical_split: target must be in [0, 1]");
  if (n_subset < 1 || static_cast<std::size_t>(n_subset) > m.items)
    throw data_error("empirical_split: n_subset out of range");
  if (opts.samples < 1) throw data_error("empirical_split: need at least one sample");
  if (opts.tolerance < 0.0) throw data_error("empirical_split: negative tolerance");

  const auto primary_it =
      std::find(m.defect_names.begin(), m.defect_names.end(), opts.primary_defect);
  if (primary_it == m.defect_names.end())
    throw data_error("empirical_split: unknown primary defect '" + opts.primary_defect + "'");
  const std::size_t primary = static_cast<std::size_t>(primary_it - m.defect_names.begin());

  Rng rng(opts.seed);
  std::vector<int> pool(m.items);
  std::vector<int> candidate(n_subset);

  EmpiricalOutcome outcome;
  double best_l1 = std::numeric_limits<double>::infinity();
  std::vector<int> best_candidate;
  std::vector<double> best_achieved;

  for (long long s = 0; s < opts.samples; ++s) {
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < n_subset; ++k) {
      const auto j = k + static_cast<int>(rng.uniform_int(m.items - k));
      std::swap(pool[k], pool[j]);
    }
    std::copy(pool.begin(), pool.begin() + n_subset, candidate.begin());
    std::sort(candidate.begin(), candidate.end());

    double primary_share = 0.0;
    for (int i : candidate) primary_share += m.share(static_cast<std::size_t>(i), primary);
    if (std::abs(primary_share - target) > opts.tolerance) continue;

    ++outcome.successes;
    if (opts.record_success_sets) outcome.success_sets.push_back(candidate);

    const auto achieved = subset_shares(m, candidate);
    double l1 = 0.0;
    for (double a : achieved) l1 += std::abs(a - target);
    if (l1 < best_l1) {
      best_l1 = l1;
      best_candidate = candidate;
      best_achieved = achieved;
    }
  }

  if (outcome.successes > 0) {
    SplitResult r;
    r.selection.assign(m.items, 0);
    for (int i : best_candidate) r.selection[static_cast<std::size_t>(i)] = 1;
    r.subset_size = n_subset;
    r.targets.assign(m.defects, target);
    r.achieved = best_achieved;
    r.objective = objective_of(best_achieved, r.targets);
    r.method = "empirical";
    r.samples = opts.samples;
    r.successes = outcome.successes;
    outcome.best = std::move(r);
  }
  return outcome;
}

// ---- branch and bound -------------------------------------------------

namespace {

// projection of y onto { x : sum x = s, lo <= x <= hi } by an exact sweep
// over the breakpoints of the monotone map lambda -> sum clamp(y - lambda)
void project_capped_simplex(std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& lo, const std::vector<double>& hi,
                            double s) {
  const std::size_t n = y.size();
  double sum_hi = 0.0, sum_lo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_hi += hi[i];
    sum_lo += lo[i];
  }
  if (s <= sum_lo) {
    x = lo;
    return;
  }
  if (s >= sum_hi) {
    x = hi;
    return;
  }

  struct Breakpoint {
    double lambda;
    int slope_change;  // +1 when a coordinate starts moving, -1 when it pins at lo
  };
  std::vector<Breakpoint> bps;
  bps.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (hi[i] > lo[i]) {
      bps.push_back({y[i] - hi[i], +1});
      bps.push_back({y[i] - lo[i], -1});
    }
  }
  std::sort(bps.begin(), bps.end(),
            [](const Breakpoint& a, const Breakpoint& b) { return a.lambda < b.lambda; });

  double sum = sum_hi;
  double active = 0.0;
  double prev = bps.front().lambda;
  double lambda = bps.back().lambda;
  for (const auto& bp : bps) {
    const double next_sum = sum - active * (bp.lambda - prev);
    if (active > 0.0 && next_sum <= s) {
      lambda = prev + (sum - s) / active;
      sum = s;
      break;
    }
    sum = next_sum;
    prev = bp.lambda;
    active += bp.slope_change;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(y[i] - lambda, lo[i], hi[i]);
}

struct Workspace {
  const PercentMatrix* m;
  const std::vector<double>* targets;
  double step;  // 1 / L

  std::vector<double> z, g, y, xn, lin;

  double value(const std::vector<double>& x) {
    const std::size_t d = m->defects;
    z.assign(d, 0.0);
    for (std::size_t i = 0; i < m->items; ++i) {
      const double xi = x[i];
      if (xi != 0.0)
        for (std::size_t j = 0; j < d; ++j) z[j] += xi * m->share(i, j);
    }
    double f = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = z[j] - (*targets)[j];
      f += e * e;
    }
    return f;
  }

  // gradient 2 C (C^T x - b); fills g, returns f(x)
  double value_grad(const std::vector<double>& x) {
    const double f = value(x);
    const std::size_t d = m->defects;
    g.resize(m->items);
    for (std::size_t j = 0; j < d; ++j) z[j] -= (*targets)[j];
    for (std::size_t i = 0; i < m->items; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < d; ++j) gi += m->share(i, j) * z[j];
      g[i] = 2.0 * gi;
    }
    return f;
  }
};

// accelerated projected gradient on the node relaxation; returns the final
// iterate (feasible), stopping at a 1e-10 prox-step residual
void solve_relaxation(Workspace& w, std::vector<double>& x, const std::vector<double>& lo,
                      const std::vector<double>& hi, double s, int max_iters) {
  const std::size_t n = x.size();
  project_capped_simplex(x, x, lo, hi, s);
  std::vector<double>& y = w.y;
  std::vector<double>& xn = w.xn;
  y = x;
  double tau = 1.0;
  double fx = w.value(x);

  for (int it = 0; it < max_iters; ++it) {
    w.value_grad(y);
    for (std::size_t i = 0; i < n; ++i) y[i] -= w.step * w.g[i];
    xn.resize(n);
    project_capped_simplex(xn, y, lo, hi, s);

    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(xn[i] - x[i]));

    const double fn = w.value(xn);
    if (fn > fx) {  // restart the momentum from the last monotone iterate
      y = x;
      tau = 1.0;
      if (delta <= 1e-12) break;
      continue;
    }
    const double tau_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
    const double mom = (tau - 1.0) / tau_next;
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = xn[i] + mom * (xn[i] - x[i]);
    x.swap(xn);
    fx = fn;
    tau = tau_next;
    if (delta <= 1e-10) break;
  }
}

// certified lower bound on the node: f(x) + min over the feasible set of
// the linearised model, exact by a greedy fill of the cheapest gradients
double linearized_bound(Workspace& w, const std::vector<double>& x,
                        const std::vector<int8_t>& state, double ones_needed) {
  const double fx = w.value_grad(x);
  auto& lin = w.lin;
  lin.clear();
  double base = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (state[i] != -1) continue;  // fixed coordinates contribute zero offset
    base -= w.g[i] * x[i];
    lin.push_back(w.g[i]);
  }
  std::sort(lin.begin(), lin.end());
  double take = ones_needed;
  double min_lin = 0.0;
  for (double gi : lin) {
    if (take <= 0.0) break;
    const double amount = std::min(take, 1.0);
    min_lin += gi * amount;
    take -= amount;
  }
  return std::max(fx + base + min_lin, 0.0);
}

struct Incumbent {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> selection;
  std::vector<double> achieved;

  void offer(const PercentMatrix& m, const std::vector<double>& targets,
             const std::vector<std::uint8_t>& sel) {
    const auto achieved_now = achieved_of_selection(m, sel);
    const double obj = objective_of(achieved_now, targets);
    if (obj < objective ||
        (obj == objective &&
         std::lexicographical_compare(sel.begin(), sel.end(), selection.begin(),
                                      selection.end()))) {
      objective = obj;
      selection = sel;
      achieved = achieved_now;
    }
  }
};

// best-improvement 1-swap descent on the exact objective
void polish(const PercentMatrix& m, const std::vector<double>& targets,
            std::vector<std::uint8_t>& sel, const std::vector<int8_t>& state) {
  const std::size_t d = m.defects;
  std::vector<double> z = achieved_of_selection(m, sel);
  double current = objective_of(z, targets);

  for (int sweep = 0; sweep < 200; ++sweep) {
    double best_gain = 1e-18;
    std::size_t best_in = m.items, best_out = m.items;
    for (std::size_t out = 0; out < m.items; ++out) {
      if (!sel[out] || state[out] != -1) continue;
      for (std::size_t in = 0; in < m.items; ++in) {
        if (sel[in] || state[in] != -1) continue;
        double obj = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double e = z[j] - m.share(out, j) + m.share(in, j) - targets[j];
          obj += e * e;
        }
        if (current - obj > best_gain) {
          best_gain = current - obj;
          best_in = in;
          best_out = out;
        }
      }
    }
    if (best_in == m.items) break;
    sel[best_out] = 0;
    sel[best_in] = 1;
    for (std::size_t j = 0; j < d; ++j)
      z[j] += m.share(best_in, j) - m.share(best_out, j);
    current = objective_of(z, targets);
  }
}

// one first-improvement 2-swap step; returns whether it improved
bool two_swap_step(const PercentMatrix& m, const std::vector<double>& targets,
                   std::vector<std::uint8_t>& sel, const std::vector<int8_t>& state) {
  const std::size_t d = m.defects;
  std::vector<std::size_t> ins, outs;
  for (std::size_t i = 0; i < m.items; ++i) {
    if (state[i] != -1) continue;
    (sel[i] ? outs : ins).push_back(i);
  }
  if (outs.size() < 2 || ins.size() < 2) return false;
  std::vector<double> z = achieved_of_selection(m, sel);
  const double current = objective_of(z, targets);

  std::vector<double> zt(d);
  for (std::size_t a = 0; a + 1 < outs.size(); ++a)
    for (std::size_t b = a + 1; b < outs.size(); ++b) {
      for (std::size_t j = 0; j < d; ++j)
        zt[j] = z[j] - m.share(outs[a], j) - m.share(outs[b], j);
      for (std::size_t p = 0; p + 1 < ins.size(); ++p)
        for (std::size_t q = p + 1; q < ins.size(); ++q) {
          double obj = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double e = zt[j] + m.share(ins[p], j) + m.share(ins[q], j) - targets[j];
            obj += e * e;
          }
          if (current - obj > 1e-18) {
            sel[outs[a]] = 0;
            sel[outs[b]] = 0;
            sel[ins[p]] = 1;
            sel[ins[q]] = 1;
            return true;
          }
        }
    }
  return false;
}

// 1-swap descent with 2-swap escalation, iterated to a joint local minimum
void deep_polish(const PercentMatrix& m, const std::vector<double>& targets,
                 std::vector<std::uint8_t>& sel, const std::vector<int8_t>& state) {
  for (int round = 0; round < 400; ++round) {
    polish(m, targets, sel, state);
    if (!two_swap_step(m, targets, sel, state)) break;
  }
}

struct Node {
  std::vector<int8_t> state;  // -1 free, 0 fixed out, 1 fixed in
  std::vector<double> warm;
  double bound = 0.0;
  int fixed_ones = 0;
  int fixed_count = 0;
};

}  // namespace

SplitResult miqp_split(const PercentMatrix& m, const std::vector<double>& targets,
                       int n_subset, const MiqpOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  m.validate();
  if (targets.size() != m.defects)
    throw data_error("miqp_split: one target per defect column required");
  for (double t : targets)
    if (!(t >= 0.0 && t <= 1.0)) throw data_error("miqp_split: targets must be in [0, 1]");
  if (n_subset < 1 || static_cast<std::size_t>(n_subset) > m.items)
    throw data_error("miqp_split: n_subset out of range");
  if (opts.gap < 0.0) throw data_error("miqp_split: negative gap");
  if (opts.node_limit < 1) throw data_error("miqp_split: node limit must be positive");

  const std::size_t n = m.items;
  const std::size_t d = m.defects;

  // Lipschitz constant 2 lambda_max(C^T C) via power iteration on the
  // d x d Gram matrix
  std::vector<double> gram(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) gram[j * d + k] += m.share(i, j) * m.share(i, k);
  std::vector<double> v(d, 1.0), gv(d);
  double lambda_max = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += gram[j * d + k] * v[k];
      gv[j] = s;
    }
    double norm = 0.0;
    for (double x : gv) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda_max = norm;
    for (std::size_t j = 0; j < d; ++j) v[j] = gv[j] / norm;
  }
  const double L = std::max(2.0 * lambda_max * 1.0001, 1e-12);

  Workspace w;
  w.m = &m;
  w.targets = &targets;
  w.step = 1.0 / L;

  Incumbent incumbent;
  incumbent.selection.assign(n, 1);  // placeholder; replaced by the first offer

  std::vector<double> lo(n), hi(n);
  auto bounds_of = [&](const std::vector<int8_t>& state) {
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = state[i] == 1 ? 1.0 : 0.0;
      hi[i] = state[i] == 0 ? 0.0 : 1.0;
    }
  };

  auto candidate_from = [&](const std::vector<double>& x, const std::vector<int8_t>& state) {
    // fixed ones stay, then the largest relaxed values fill the quota
    std::vector<std::uint8_t> sel(n, 0);
    int needed = n_subset;
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 1) {
        sel[i] = 1;
        --needed;
      } else if (state[i] == -1) {
        free_idx.push_back(i);
      }
    }
    std::stable_sort(free_idx.begin(), free_idx.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    for (std::size_t k = 0; k < free_idx.size() && needed > 0; ++k, --needed)
      sel[free_idx[k]] = 1;
    return sel;
  };

  SplitResult result;
  result.method = "branch-and-bound";

  std::vector<Node> stack;
  {
    Node root;
    root.state.assign(n, -1);
    root.warm.assign(n, static_cast<double>(n_subset) / static_cast<double>(n));
    root.bound = 0.0;
    stack.push_back(std::move(root));
  }

  double pruned_min = std::numeric_limits<double>::infinity();
  bool done = false;

  while (!stack.empty() && !done) {
    Node node = std::move(stack.back());
    stack.pop_back();
    ++result.nodes;

    if (node.bound >= incumbent.objective - opts.gap) {
      pruned_min = std::min(pruned_min, node.bound);
      continue;
    }

    const int free_count = static_cast<int>(n) - node.fixed_count;
    const int needed = n_subset - node.fixed_ones;
    if (needed < 0 || needed > free_count) continue;  // infeasible branch

    if (needed == 0 || needed == free_count) {
      // every free variable is forced; evaluate the leaf exactly
      std::vector<std::uint8_t> sel(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        sel[i] = node.state[i] == 1 || (node.state[i] == -1 && needed == free_count);
      incumbent.offer(m, targets, sel);
      if (incumbent.objective <= opts.gap) done = true;
      continue;
    }

    bounds_of(node.state);
    const int iters = result.nodes == 1 ? 4000 : 600;
    solve_relaxation(w, node.warm, lo, hi, static_cast<double>(n_subset), iters);
    const double bound =
        linearized_bound(w, node.warm, node.state, static_cast<double>(needed));

    if (bound >= incumbent.objective - opts.gap) {
      pruned_min = std::min(pruned_min, bound);
      continue;
    }

    auto sel = candidate_from(node.warm, node.state);
    if (result.nodes == 1) {
      // intensive root search: deep descent plus deterministic restart kicks,
      // so an optimum at or under the gap certifies immediately
      deep_polish(m, targets, sel, node.state);
      incumbent.offer(m, targets, sel);
      Rng kick_rng(0x5bd1e995u);
      for (int kick = 0; kick < 24 && incumbent.objective > opts.gap; ++kick) {
        auto cand = incumbent.selection;
        std::vector<std::size_t> ins, outs;
        for (std::size_t i = 0; i < n; ++i) (cand[i] ? outs : ins).push_back(i);
        for (int sw = 0; sw < 3 && !ins.empty() && !outs.empty(); ++sw) {
          const auto a = kick_rng.uniform_int(outs.size());
          const auto b = kick_rng.uniform_int(ins.size());
          std::swap(cand[outs[a]], cand[ins[b]]);
          std::swap(outs[a], ins[b]);
        }
        deep_polish(m, targets, cand, node.state);
        incumbent.offer(m, targets, cand);
      }
    } else {
      polish(m, targets, sel, node.state);
      incumbent.offer(m, targets, sel);
    }
    if (incumbent.objective <= opts.gap) {
      done = true;
      continue;
    }
    if (bound >= incumbent.objective - opts.gap) {
      pruned_min = std::min(pruned_min, bound);
      continue;
    }

    if (result.nodes >= opts.node_limit) {
      result.hit_node_limit = true;
      pruned_min = std::min(pruned_min, bound);  // this subtree stays unexplored
      break;
    }

    // branch on the most fractional free variable
    std::size_t branch = n;
    double best_frac = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (node.state[i] != -1) continue;
      const double frac = std::min(node.warm[i], 1.0 - node.warm[i]);
      if (frac > best_frac) {
        best_frac = frac;
        branch = i;
      }
    }

    const int preferred = node.warm[branch] >= 0.5 ? 1 : 0;
    for (int value : {1 - preferred, preferred}) {  // preferred child popped first
      Node child;
      child.state = node.state;
      child.state[branch] = static_cast<int8_t>(value);
      child.warm = node.warm;
      child.warm[branch] = value;
      child.bound = bound;
      child.fixed_ones = node.fixed_ones + value;
      child.fixed_count = node.fixed_count + 1;
      stack.push_back(std::move(child));
    }
  }

  double lower = std::min(pruned_min, incumbent.objective);
  if (done) lower = 0.0;  // stopped because the incumbent already met the gap
  if (result.hit_node_limit)
    for (const auto& open : stack) lower = std::min(lower, open.bound);
  lower = std::max(lower, 0.0);

  result.selection = incumbent.selection;
  result.subset_size = n_subset;
  result.targets = targets;
  result.achieved = incumbent.achieved;
  result.objective = incumbent.objective;
  result.lower_bound = lower;
  result.certified_gap = incumbent.objective - lower;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

SplitResult complement(const SplitResult& r, const PercentMatrix& m) {
  m.validate();
  if (r.selection.size() != m.items)
    throw data_error("complement: selection does not match the matrix");
  SplitResult out = r;
  out.selection.resize(m.items);
  for (std::size_t i = 0; i < m.items; ++i) out.selection[i] = r.selection[i] ? 0 : 1;
  out.subset_size = static_cast<int>(m.items) - r.subset_size;
  out.targets.resize(r.targets.size());
  for (std::size_t j = 0; j < r.targets.size(); ++j) out.targets[j] = 1.0 - r.targets[j];
  out.achieved = achieved_of_selection(m, out.selection);
  out.objective = objective_of(out.achieved, out.targets);
  return out;
}

}
