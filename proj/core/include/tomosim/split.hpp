#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomosim/grid.hpp"

// Label-share-balanced dataset splitting. Both methods pick N of the m
// items so each defect class's share of the total labelled pixels matches
// a target fraction: an empirical permutation search, and an exact
// cardinality-constrained 0-1 quadratic program solved by branch and
// bound with a certified optimality gap.

namespace tomosim {

struct PercentMatrix {
  std::size_t items = 0;
  std::size_t defects = 0;
  std::vector<double> shares;  // row-major item x defect, columns sum to 1
  std::vector<std::string> item_ids;
  std::vector<std::string> defect_names;

  double share(std::size_t i, std::size_t j) const { return shares[i * defects + j]; }
  void validate() const;
};

// counts to per-column shares; a zero column total is an error
PercentMatrix normalize_table(const DefectTable& table);

// per-defect share of the given item subset (ascending index order)
std::vector<double> subset_shares(const PercentMatrix& m, const std::vector<int>& items);

struct SplitResult {
  std::vector<std::uint8_t> selection;  // one flag per item
  int subset_size = 0;
  std::vector<double> targets;          // one per defect column
  std::vector<double> achieved;
  double objective = 0.0;               // sum_j (achieved_j - target_j)^2
  std::string method;

  // empirical statistics
  long long samples = 0;
  long long successes = 0;

  // solver statistics
  long long nodes = 0;
  double lower_bound = 0.0;
  double certified_gap = 0.0;
  bool hit_node_limit = false;
  double wall_seconds = 0.0;
};

struct EmpiricalOptions {
  long long samples = 10000;
  double tolerance = 0.005;             // on the primary defect share
  std::string primary_defect = "browning";
  std::uint64_t seed = 0;
  bool record_success_sets = false;     // for exhaustive checks in tests
};

struct EmpiricalOutcome {
  std::optional<SplitResult> best;      // empty when nothing succeeded
  long long successes = 0;
  std::vector<std::vector<int>> success_sets;  // sorted, only when recorded
};

// draws `samples` uniform permutation prefixes of size n_subset; a draw
// succeeds when the primary defect share is within tolerance of target;
// the best success minimises the summed absolute share deviation
EmpiricalOutcome empirical_split(const PercentMatrix& m, double target, int n_subset,
                                 const EmpiricalOptions& opts);

struct MiqpOptions {
  double gap = 2.22e-8;                 // absolute certified objective gap
  long long node_limit = 1'000'000;
};

// exact minimiser of ||sum_i shares_i x_i - targets||^2 over binary x with
// sum x = n_subset; ties break toward the lexicographically smallest
// selection among the candidates the search evaluates
SplitResult miqp_split(const PercentMatrix& m, const std::vector<double>& targets,
                       int n_subset, const MiqpOptions& opts = {});

// the complementary subset, with targets and achieved shares flipped
SplitResult complement(const SplitResult& r, const PercentMatrix& m);

}
