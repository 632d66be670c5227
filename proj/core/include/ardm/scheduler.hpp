#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ardm {

// Transition costs between generation states. State t means "t variables
// generated", so the matrix is (D+1) x (D+1); entry [s][t] for t > s is the
// cost in bits of generating variables s+1..t in one parallel step,
// (t - s) * L[s], and entries on or below the diagonal are zero.
struct CostMatrix {
  size_t dims = 0;  // D
  std::vector<double> at;  // row-major (D+1) x (D+1)

  double operator()(size_t s, size_t t) const { return at[s * (dims + 1) + t]; }
  double& operator()(size_t s, size_t t) { return at[s * (dims + 1) + t]; }
};

// A budgeted generation plan: after step i, steps[i] variables exist.
// Positions are strictly increasing and end at D.
struct Schedule {
  std::vector<uint32_t> steps;
  double total_bits = 0.0;

  size_t budget() const { return steps.size(); }
  // Width of step i, i.e. how many variables it generates at once.
  uint32_t width(size_t i) const {
    return i == 0 ? steps[0] : steps[i] - steps[i - 1];
  }
};

// Cost and predecessor tables from the dynamic program.
// costs[k][t] = minimal bits to reach state t in exactly k steps (row 0 is
// 0 at state 0 and infinity elsewhere); dims[k][t] = the predecessor state
// achieving it, with ties broken toward the smaller state, -1 where unset.
struct DpTables {
  size_t dims_count = 0;   // D
  size_t max_budget = 0;
  std::vector<double> costs;     // (max_budget+1) x (D+1)
  std::vector<int32_t> dims;     // same shape

  double cost(size_t k, size_t t) const { return costs[k * (dims_count + 1) + t]; }
  int32_t dim(size_t k, size_t t) const { return dims[k * (dims_count + 1) + t]; }
};

CostMatrix build_cost_matrix(std::span<const double> loss_components);

DpTables dp_solve(const CostMatrix& cm, size_t max_budget);

Schedule extract_path(size_t budget, const DpTables& tables);

// Stable descending sort within each of `stage_count` equal segments.
// Loss components are expected to decrease over steps; sorting denoises the
// running averages before they reach the dynamic program.
std::vector<double> sort_components(std::span<const double> loss_components,
                                    size_t stage_count = 1);

// Exhaustive minimum over all C(D-1, budget-1) paths. Oracle for the
// dynamic program; summation order matches dp_solve so optimal costs tie
// exactly in floating point.
Schedule brute_force_schedule(std::span<const double> loss_components,
                              size_t budget);

// Convenience: sort (single stage), solve, extract.
Schedule plan_schedule(std::span<const double> loss_components, size_t budget);

}  // namespace ardm
