#include "ardm/scheduler.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>

namespace ardm {

namespace {

constexpr double kInf = std::numeric_limits<double>::max();

// Addition that keeps saturating at the maximum instead of producing inf/NaN.
double sat_add(double a, double b) {
  if (a >= kInf || b >= kInf) return kInf;
  double s = a + b;
  return s >= kInf ? kInf : s;
}

}  // namespace

CostMatrix build_cost_matrix(std::span<const double> loss_components) {
  for (double l : loss_components) {
    if (!(l >= 0.0)) {
      throw std::invalid_argument("loss components must be nonnegative");
    }
  }
  size_t d = loss_components.size();
  CostMatrix cm;
  cm.dims = d;
  cm.at.assign((d + 1) * (d + 1), 0.0);
  // Entry [s][t] is the single product (t - s) * L[s], never a running sum:
  // the exhaustive oracle prices steps the same way, so equal paths produce
  // bit-identical totals. Everything at or below the diagonal stays zero.
  for (size_t s = 0; s < d; ++s) {
    for (size_t t = s + 1; t <= d; ++t) {
      cm(s, t) = static_cast<double>(t - s) * loss_components[s];
    }
  }
  return cm;
}

DpTables dp_solve(const CostMatrix& cm, size_t max_budget) {
  size_t d = cm.dims;
  if (max_budget > d) max_budget = d;

  DpTables tb;
  tb.dims_count = d;
  tb.max_budget = max_budget;
  tb.costs.assign((max_budget + 1) * (d + 1), kInf);
  tb.dims.assign((max_budget + 1) * (d + 1), -1);
  tb.costs[0] = 0.0;  // state 0 in zero steps

  for (size_t k = 1; k <= max_budget; ++k) {
    const double* prev = &tb.costs[(k - 1) * (d + 1)];
    double* cur = &tb.costs[k * (d + 1)];
    int32_t* dim = &tb.dims[k * (d + 1)];
    for (size_t t = 1; t <= d; ++t) {
      // A step always generates at least one variable, so the predecessor
      // state is strictly smaller; zeros below the cost-matrix diagonal are
      // not transitions.
      double best = kInf;
      int32_t best_s = -1;
      for (size_t s = 0; s < t; ++s) {
        double c = sat_add(prev[s], cm(s, t));
        if (c < best) {
          best = c;
          best_s = static_cast<int32_t>(s);
        }
      }
      cur[t] = best;
      dim[t] = best_s;
    }
  }
  return tb;
}

Schedule extract_path(size_t budget, const DpTables& tables) {
  size_t d = tables.dims_count;
  if (budget < 1 || budget > tables.max_budget) {
    throw std::invalid_argument("budget outside the solved range");
  }
  if (tables.cost(budget, d) >= kInf) {
    throw std::invalid_argument("no path reaches the end in this budget");
  }
  Schedule sched;
  sched.total_bits = tables.cost(budget, d);
  sched.steps.assign(budget, 0);
  size_t t = d;
  for (size_t k = budget; k >= 1; --k) {
    sched.steps[k - 1] = static_cast<uint32_t>(t);
    t = static_cast<size_t>(tables.dim(k, t));
  }
  return sched;
}

std::vector<double> sort_components(std::span<const double> loss_components,
                                    size_t stage_count) {
  if (stage_count == 0 || loss_components.size() % stage_count != 0) {
    throw std::invalid_argument("components must split into equal stages");
  }
  std::vector<double> out(loss_components.begin(), loss_components.end());
  size_t seg = out.size() / stage_count;
  for (size_t s = 0; s < stage_count; ++s) {
    auto begin = out.begin() + static_cast<ptrdiff_t>(s * seg);
    std::stable_sort(begin, begin + static_cast<ptrdiff_t>(seg),
                     std::greater<double>());
  }
  return out;
}

Schedule brute_force_schedule(std::span<const double> loss_components,
                              size_t budget) {
  size_t d = loss_components.size();
  if (d > 16) {
    throw std::invalid_argument("exhaustive search is limited to 16 dims");
  }
  if (budget < 1 || budget > d) {
    throw std::invalid_argument("budget must be in 1..D");
  }

  Schedule best;
  best.total_bits = kInf;
  std::vector<uint32_t> steps(budget, 0);

  // Depth-first over strictly increasing interior positions; the running
  // cost is accumulated left to right exactly as dp_solve does, so equal
  // paths produce bit-identical totals.
  std::function<void(size_t, size_t, double)> walk = [&](size_t idx, size_t prev,
                                                         double cost) {
    if (idx + 1 == budget) {
      steps[idx] = static_cast<uint32_t>(d);
      double total =
          sat_add(cost, static_cast<double>(d - prev) * loss_components[prev]);
      if (total < best.total_bits) {
        best.total_bits = total;
        best.steps = steps;
      }
      return;
    }
    // Leave room for the remaining steps, one position each.
    size_t remaining = budget - idx - 1;
    for (size_t t = prev + 1; t + remaining <= d; ++t) {
      steps[idx] = static_cast<uint32_t>(t);
      walk(idx + 1, t,
           sat_add(cost, static_cast<double>(t - prev) * loss_components[prev]));
    }
  };
  walk(0, 0, 0.0);
  return best;
}

Schedule plan_schedule(std::span<const double> loss_components, size_t budget) {
  std::vector<double> sorted = sort_components(loss_components);
  CostMatrix cm = build_cost_matrix(sorted);
  DpTables tb = dp_solve(cm, budget);
  return extract_path(budget, tb);
}

}  // namespace ardm
