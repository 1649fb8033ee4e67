#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "tomosim/rng.hpp"
#include "tomosim/split.hpp"

using namespace tomosim;

namespace {

DefectTable random_table(int items, int defects, std::uint64_t seed) {
  DefectTable t;
  Rng rng(seed);
  t.defect_names.resize(defects);
  for (int j = 0; j < defects; ++j) t.defect_names[j] = "d" + std::to_string(j);
  t.item_ids.resize(items);
  t.counts.resize(static_cast<std::size_t>(items) * defects);
  for (int i = 0; i < items; ++i) {
    t.item_ids[i] = std::to_string(i + 1);
    for (int j = 0; j < defects; ++j)
      t.counts[static_cast<std::size_t>(i) * defects + j] =
          static_cast<long long>(rng.uniform_int(500));
  }
  // no zero columns: give the first item a floor count everywhere
  for (int j = 0; j < defects; ++j)
    t.counts[j] = std::max(t.counts[j], 1LL);
  return t;
}

// every size-n subset, reported as the minimal objective
double brute_force_optimum(const PercentMatrix& m, const std::vector<double>& targets, int n) {
  std::vector<int> pick(n);
  std::iota(pick.begin(), pick.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  const int items = static_cast<int>(m.items);
  while (true) {
    auto shares = subset_shares(m, pick);
    double obj = 0;
    for (std::size_t j = 0; j < shares.size(); ++j) {
      const double d = shares[j] - targets[j];
      obj += d * d;
    }
    best = std::min(best, obj);
    int k = n - 1;
    while (k >= 0 && pick[k] == items - n + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int l = k + 1; l < n; ++l) pick[l] = pick[l - 1] + 1;
  }
  return best;
}

}  // namespace

TEST_SUITE("split") {

TEST_CASE("normalize_table produces per-column shares that sum to one") {
  auto t = random_table(12, 3, 5);
  auto m = normalize_table(t);
  m.validate();
  REQUIRE(m.items == 12);
  REQUIRE(m.defects == 3);
  for (std::size_t j = 0; j < m.defects; ++j) {
    long long total = 0;
    for (std::size_t i = 0; i < m.items; ++i) total += t.count(i, j);
    double sum = 0;
    for (std::size_t i = 0; i < m.items; ++i) {
      CHECK(m.share(i, j) ==
            doctest::Approx(double(t.count(i, j)) / double(total)).epsilon(1e-15));
      sum += m.share(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("a defect class nobody has cannot be normalized") {
  auto t = random_table(5, 2, 9);
  for (int i = 0; i < 5; ++i) t.counts[static_cast<std::size_t>(i) * 2 + 1] = 0;
  CHECK_THROWS_AS(normalize_table(t), data_error);
}

TEST_CASE("percent matrix validation catches shape and value violations") {
  auto m = normalize_table(random_table(6, 2, 14));
  auto bad = m;
  bad.shares[0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), data_error);
  bad = m;
  bad.shares[0] += 0.1;  // column no longer sums to 1
  CHECK_THROWS_AS(bad.validate(), data_error);
  bad = m;
  bad.item_ids.pop_back();
  CHECK_THROWS_AS(bad.validate(), data_error);
}

TEST_CASE("subset_shares is the plain column sum over the chosen items") {
  auto m = normalize_table(random_table(9, 4, 21));
  std::vector<int> pick = {1, 4, 8};
  auto shares = subset_shares(m, pick);
  REQUIRE(shares.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    double want = m.share(1, j) + m.share(4, j) + m.share(8, j);
    CHECK(shares[j] == doctest::Approx(want).epsilon(1e-15));
  }
  CHECK_THROWS_AS(subset_shares(m, {0, 9}), data_error);
}

TEST_CASE("empirical search replays by seed and respects its tolerance") {
  auto m = normalize_table(random_table(30, 4, 33));
  EmpiricalOptions opts;
  opts.samples = 4000;
  opts.tolerance = 0.01;
  opts.primary_defect = "d3";
  opts.seed = 17;
  auto a = empirical_split(m, 0.25, 8, opts);
  auto b = empirical_split(m, 0.25, 8, opts);
  CHECK(a.successes == b.successes);
  REQUIRE(a.best.has_value() == b.best.has_value());
  if (a.best) {
    CHECK(a.best->selection == b.best->selection);
    CHECK(a.best->objective == b.best->objective);
    CHECK(a.best->samples == 4000);
    CHECK(a.best->successes == a.successes);
    CHECK(a.best->subset_size == 8);
    // the primary share must sit inside the tolerance window
    CHECK(std::abs(a.best->achieved[3] - 0.25) <= 0.01 + 1e-15);
  }

  opts.tolerance = 1.0;  // everything passes
  auto all = empirical_split(m, 0.25, 8, opts);
  CHECK(all.successes == opts.samples);
}

TEST_CASE("recorded success sets are real subsets satisfying the predicate") {
  auto m = normalize_table(random_table(6, 2, 8));
  EmpiricalOptions opts;
  opts.samples = 3000;
  opts.tolerance = 0.04;
  opts.primary_defect = "d1";
  opts.seed = 4;
  opts.record_success_sets = true;
  const double target = 0.5;
  auto out = empirical_split(m, target, 3, opts);
  CHECK(out.success_sets.size() == static_cast<std::size_t>(out.successes));

  // oracle: every recorded set passes the predicate when re-evaluated
  std::set<std::vector<int>> unique;
  for (const auto& s : out.success_sets) {
    REQUIRE(s.size() == 3);
    CHECK(std::is_sorted(s.begin(), s.end()));
    auto shares = subset_shares(m, s);
    CHECK(std::abs(shares[1] - target) <= opts.tolerance + 1e-15);
    unique.insert(s);
  }
  // and the draw really explores: with C(6,3) = 20 possible subsets and
  // thousands of samples, several distinct successes should show up
  if (out.successes > 10) CHECK(unique.size() > 1);

  // the winner has the smallest summed absolute deviation of any success
  if (out.best) {
    double best_l1 = 0;
    for (std::size_t j = 0; j < m.defects; ++j)
      best_l1 += std::abs(out.best->achieved[j] - target);
    for (const auto& s : unique) {
      auto shares = subset_shares(m, s);
      double l1 = 0;
      for (std::size_t j = 0; j < m.defects; ++j) l1 += std::abs(shares[j] - target);
      CHECK(best_l1 <= l1 + 1e-12);
    }
  }
}

TEST_CASE("an impossible tolerance yields zero successes and no best") {
  auto m = normalize_table(random_table(10, 2, 2));
  EmpiricalOptions opts;
  opts.samples = 200;
  opts.tolerance = 0.0;
  opts.primary_defect = "d0";
  auto out = empirical_split(m, 0.987654321, 3, opts);
  CHECK(out.successes == 0);
  CHECK(!out.best.has_value());
}

TEST_CASE("empirical argument validation") {
  auto m = normalize_table(random_table(5, 2, 3));
  EmpiricalOptions opts;
  opts.primary_defect = "d0";
  opts.samples = 10;
  CHECK_THROWS_AS(empirical_split(m, -0.1, 2, opts), data_error);
  CHECK_THROWS_AS(empirical_split(m, 0.2, 0, opts), data_error);
  CHECK_THROWS_AS(empirical_split(m, 0.2, 6, opts), data_error);
  CHECK_NOTHROW(empirical_split(m, 0.2, 5, opts));  // n == items is degenerate but legal
  opts.primary_defect = "mould";
  CHECK_THROWS_AS(empirical_split(m, 0.2, 2, opts), data_error);
}

TEST_CASE("the exact solver matches brute force on small instances") {
  Rng rng(77);
  for (int inst = 0; inst < 60; ++inst) {
    const int items = 6 + int(rng.uniform_int(7));     // 6..12
    const int n = 2 + int(rng.uniform_int(std::uint64_t(items - 3)));
    auto m = normalize_table(random_table(items, 4, 1000 + inst));
    std::vector<double> targets(4);
    for (auto& t : targets) t = rng.uniform(0.05, 0.6);
    MiqpOptions opts;
    opts.gap = 1e-12;
    auto got = miqp_split(m, targets, n, opts);
    const double want = brute_force_optimum(m, targets, n);
    CHECK(std::abs(got.objective - want) <= 1e-9);
    CHECK(got.subset_size == n);
    CHECK(std::count(got.selection.begin(), got.selection.end(), 1) == n);
    CHECK(!got.hit_node_limit);
    CHECK(got.certified_gap <= opts.gap + 1e-15);
    CHECK(got.lower_bound <= got.objective + 1e-15);
    // achieved shares recompute from the selection
    std::vector<int> pick;
    for (std::size_t i = 0; i < got.selection.size(); ++i)
      if (got.selection[i]) pick.push_back(int(i));
    auto shares = subset_shares(m, pick);
    for (std::size_t j = 0; j < shares.size(); ++j)
      CHECK(got.achieved[j] == doctest::Approx(shares[j]).epsilon(1e-12));
  }
}

TEST_CASE("the solver is deterministic") {
  auto m = normalize_table(random_table(25, 4, 6));
  std::vector<double> targets = {0.2, 0.2, 0.2, 0.2};
  auto a = miqp_split(m, targets, 5);
  auto b = miqp_split(m, targets, 5);
  CHECK(a.selection == b.selection);
  CHECK(a.objective == b.objective);
  CHECK(a.nodes == b.nodes);
}

TEST_CASE("a node budget of one still returns a feasible incumbent") {
  auto m = normalize_table(random_table(40, 4, 15));
  std::vector<double> targets = {0.3, 0.3, 0.3, 0.3};
  MiqpOptions opts;
  opts.gap = 0.0;  // unreachable, forces the budget to bind
  opts.node_limit = 1;
  auto got = miqp_split(m, targets, 10, opts);
  CHECK(got.hit_node_limit);
  CHECK(std::count(got.selection.begin(), got.selection.end(), 1) == 10);
  CHECK(got.lower_bound <= got.objective);
  CHECK(got.nodes == 1);
}

TEST_CASE("solver argument validation") {
  auto m = normalize_table(random_table(6, 3, 44));
  CHECK_THROWS_AS(miqp_split(m, {0.2, 0.2}, 2), data_error);
  CHECK_THROWS_AS(miqp_split(m, {0.2, 0.2, 1.4}, 2), data_error);
  CHECK_THROWS_AS(miqp_split(m, {0.2, 0.2, 0.2}, 0), data_error);
  CHECK_THROWS_AS(miqp_split(m, {0.2, 0.2, 0.2}, 7), data_error);
  CHECK_NOTHROW(miqp_split(m, {0.2, 0.2, 0.2}, 6));  // n == items is degenerate but legal
  MiqpOptions opts;
  opts.node_limit = 0;
  CHECK_THROWS_AS(miqp_split(m, {0.2, 0.2, 0.2}, 2, opts), data_error);
}

TEST_CASE("complement flips the selection and the share bookkeeping") {
  auto m = normalize_table(random_table(14, 4, 27));
  std::vector<double> targets = {0.25, 0.25, 0.25, 0.25};
  auto train = miqp_split(m, targets, 4);
  auto test = complement(train, m);
  REQUIRE(test.selection.size() == train.selection.size());
  for (std::size_t i = 0; i < train.selection.size(); ++i)
    CHECK(int(train.selection[i]) + int(test.selection[i]) == 1);
  CHECK(test.subset_size == 10);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(test.targets[j] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(test.achieved[j] == doctest::Approx(1.0 - train.achieved[j]).epsilon(1e-12));
  }
  // complement of the complement lands back on the original subset
  auto back = complement(test, m);
  CHECK(back.selection == train.selection);
}

}  // TEST_SUITE
