#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/ordering.hpp"
#include "ardm/rng.hpp"
#include "ardm/scheduler.hpp"
#include "ardm/transitions.hpp"

namespace ardm {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kProbFloor = 1e-10;

// One training-step estimate of the likelihood bound. value_bits estimates
// log2 p(x) (negative); l_t_bits is the per-variable cost at the sampled
// step, which is what the loss ledger tracks; ce_bits is the plain
// cross-entropy sum over the dimensions generated at this step.
struct ElboEstimate {
  double value_bits = 0.0;
  uint32_t stage = 1;
  uint32_t t = 1;
  double l_t_bits = 0.0;
  double ce_bits = 0.0;
};

enum class Objective { oa, upscale };

// Deterministic part of a training step: which stage, step, and order the
// estimator was given.
struct StepAssignment {
  uint32_t stage = 1;
  uint32_t t = 1;
  Permutation sigma;
};

struct LossBreakdown {
  double loss_bits = 0.0;           // optimized scalar, bits per dimension
  double nelbo_bits_per_dim = 0.0;  // batch mean of stages * l_t_bits
  double ce_bits_per_dim = 0.0;
  std::vector<ElboEstimate> per_example;
};

// A single dimension's predictive distribution, as parallel arrays of
// probabilities and the class values they correspond to. For full-alphabet
// heads values are 0..K-1; for branch heads they are the children of the
// dimension's current stage value.
struct Conditional {
  std::vector<double> probs;
  std::vector<uint32_t> values;
};

namespace detail {

inline std::vector<double> softmax(std::span<const double> z) {
  double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

template <typename T>
std::vector<double> logits_row(std::span<const T> logits, size_t d, size_t o) {
  std::vector<double> row(o);
  for (size_t k = 0; k < o; ++k) row[k] = double(logits[d * o + k]);
  return row;
}

// Negative log likelihood (nats) of one dimension's target under the row of
// logits, plus optionally its gradient (accumulated into dlogits_row with
// the given scale). Handles all three head/stage combinations.
inline double dim_nll(const ModelConfig& cfg, const TransitionSet* ts,
                      std::span<const double> row, uint32_t stage,
                      uint32_t x_target, uint32_t x_prev,
                      double* dlogits_row = nullptr, double scale = 1.0) {
  if (cfg.parametrization == Parametrization::direct) {
    if (!ts) throw std::invalid_argument("branch head needs a transition set");
    std::vector<uint32_t> kids = ts->children(stage, x_prev);
    size_t nc = kids.size();
    std::vector<double> branch(row.begin(), row.begin() + nc);
    std::vector<double> p = softmax(branch);
    uint32_t target = ts->branch_index(x_target, stage);
    double nll = -std::log(p[target]);
    if (dlogits_row) {
      for (size_t j = 0; j < nc; ++j) {
        dlogits_row[j] += scale * (p[j] - (j == target ? 1.0 : 0.0));
      }
    }
    return nll;
  }

  std::vector<double> p = softmax(row);
  if (cfg.stages == 1 || stage == 0) {
    // Plain categorical cross-entropy over the full alphabet.
    double nll = -std::log(p[x_target]);
    if (dlogits_row) {
      for (size_t j = 0; j < p.size(); ++j) {
        dlogits_row[j] += scale * (p[j] - (j == x_target ? 1.0 : 0.0));
      }
    }
    return nll;
  }

  // Data parametrization: the coded event is "the branch child containing
  // x_target", whose probability is a ratio of pooled masses. The same
  // floor as data_parametrization keeps the ratio defined.
  if (!ts) throw std::invalid_argument("staged loss needs a transition set");
  uint64_t step = ts->stage_step(stage);
  uint32_t k_count = cfg.num_classes;
  uint64_t a_lo = x_target, a_hi = std::min<uint64_t>(a_lo + step, k_count);
  uint64_t b_lo = x_prev,
           b_hi = std::min<uint64_t>(b_lo + step * ts->branching(), k_count);
  double mass_a = 0.0, act_a = 0.0, mass_b = 0.0, act_b = 0.0;
  for (uint64_t i = b_lo; i < b_hi; ++i) {
    bool active = p[i] > kProbFloor;
    double contrib = active ? p[i] : kProbFloor;
    mass_b += contrib;
    if (active) act_b += p[i];
    if (i >= a_lo && i < a_hi) {
      mass_a += contrib;
      if (active) act_a += p[i];
    }
  }
  double nll = std::log(mass_b) - std::log(mass_a);
  if (dlogits_row) {
    double base = act_a / mass_a - act_b / mass_b;
    for (size_t j = 0; j < p.size(); ++j) {
      double ind = base;
      if (p[j] > kProbFloor) {
        if (j >= b_lo && j < b_hi) ind += 1.0 / mass_b;
        if (j >= a_lo && j < a_hi) ind -= 1.0 / mass_a;
      }
      dlogits_row[j] += scale * p[j] * ind;
    }
  }
  return nll;
}

}  // namespace detail

// Predictive distribution of one dimension given its logits row. x_prev is
// the dimension's current (stage s-1) value; ignored for single-stage
// models.
inline Conditional conditional_distribution(const ModelConfig& cfg,
                                            const TransitionSet* ts,
                                            std::span<const double> row,
                                            uint32_t stage, uint32_t x_prev) {
  Conditional out;
  if (cfg.parametrization == Parametrization::direct) {
    out.values = ts->children(stage, x_prev);
    std::vector<double> branch(row.begin(), row.begin() + out.values.size());
    out.probs = detail::softmax(branch);
    return out;
  }
  std::vector<double> theta = detail::softmax(row);
  if (cfg.stages == 1) {
    out.probs = std::move(theta);
  } else {
    out.probs = data_parametrization(theta, x_prev, stage, *ts, kProbFloor);
  }
  out.values.resize(cfg.num_classes);
  std::iota(out.values.begin(), out.values.end(), 0u);
  return out;
}

// ---------------------------------------------------------------------------
// Training estimators

// Estimator at a fixed (stage, t, sigma). For single-stage models pass
// ts = nullptr and stage = 1; the input is x with masked dimensions
// absorbed to 0. For upscale models masked dimensions hold the coarser
// stage value instead.
template <typename T>
ElboEstimate elbo_step_at(const Network<T>& net, const TransitionSet* ts,
                          std::span<const uint32_t> x,
                          const StepAssignment& at) {
  const ModelConfig& cfg = net.config();
  uint32_t d_count = cfg.dims;
  if (x.size() != d_count) throw std::invalid_argument("dims mismatch");
  uint32_t stages = cfg.stages;
  uint32_t s = at.stage, t = at.t;
  if (s < 1 || s > stages || t < 1 || t > d_count) {
    throw std::out_of_range("stage or step out of range");
  }
  if (stages > 1 && ts == nullptr) {
    throw std::invalid_argument("multi-stage model needs a transition set");
  }

  Mask m = mask_lt(at.sigma, t);
  std::vector<uint32_t> x_s, x_prev, input(d_count);
  if (stages <= 1 || ts == nullptr) {
    x_s.assign(x.begin(), x.end());
    x_prev.assign(d_count, 0);
  } else {
    x_s = ts->downscale(x, s);
    x_prev = ts->downscale(x, s - 1);
  }
  for (uint32_t d = 0; d < d_count; ++d) {
    input[d] = m.bits[d] ? x_s[d] : x_prev[d];
  }

  std::vector<T> logits = net.forward(input, m.bits, s, t);
  size_t o = cfg.output_width();
  double sum_nats = 0.0;
  for (uint32_t d = 0; d < d_count; ++d) {
    if (m.bits[d]) continue;
    std::vector<double> row = detail::logits_row<T>(logits, d, o);
    sum_nats += detail::dim_nll(cfg, ts, row, s, x_s[d], x_prev[d]);
  }

  uint32_t remaining = d_count - t + 1;
  ElboEstimate est;
  est.stage = s;
  est.t = t;
  est.l_t_bits = sum_nats / kLn2 / remaining;
  est.value_bits = -double(stages) * d_count * est.l_t_bits;
  est.ce_bits = sum_nats / kLn2;
  return est;
}

template <typename T>
ElboEstimate elbo_step(const Network<T>& net, std::span<const uint32_t> x,
                       Rng& rng) {
  StepAssignment at;
  at.stage = 1;
  at.t = 1 + static_cast<uint32_t>(rng.bounded(net.config().dims));
  at.sigma = sample_permutation(rng, net.config().dims);
  return elbo_step_at(net, nullptr, x, at);
}

template <typename T>
ElboEstimate upscale_elbo_step(const Network<T>& net, const TransitionSet& ts,
                               std::span<const uint32_t> x, Rng& rng) {
  StepAssignment at;
  at.stage = 1 + static_cast<uint32_t>(rng.bounded(net.config().stages));
  at.t = 1 + static_cast<uint32_t>(rng.bounded(net.config().dims));
  at.sigma = sample_permutation(rng, net.config().dims);
  return elbo_step_at(net, &ts, x, at);
}

// Batch objective with exact reverse-mode gradients. The optimized scalar
// is the batch-mean estimate of bits per dimension plus ce_weight times the
// auxiliary cross-entropy (also per dimension). Gradients accumulate into
// the network's grad buffer when accumulate is set.
template <typename T>
LossBreakdown loss_and_grad_at(Network<T>& net,
                               std::span<const std::vector<uint32_t>> batch,
                               std::span<const StepAssignment> assignments,
                               const TransitionSet* ts, double ce_weight,
                               bool accumulate) {
  const ModelConfig& cfg = net.config();
  uint32_t d_count = cfg.dims;
  uint32_t stages = cfg.stages;
  size_t o = cfg.output_width();
  size_t b_size = batch.size();
  if (assignments.size() != b_size) {
    throw std::invalid_argument("one assignment per example required");
  }
  if (stages > 1 && ts == nullptr) {
    throw std::invalid_argument("multi-stage model needs a transition set");
  }

  LossBreakdown out;
  Activations<T> acts;
  for (size_t n = 0; n < b_size; ++n) {
    const std::vector<uint32_t>& x = batch[n];
    const StepAssignment& at = assignments[n];
    uint32_t s = at.stage, t = at.t;

    Mask m = mask_lt(at.sigma, t);
    std::vector<uint32_t> x_s, x_prev, input(d_count);
    if (stages <= 1 || ts == nullptr) {
      x_s = x;
      x_prev.assign(d_count, 0);
    } else {
      x_s = ts->downscale(x, s);
      x_prev = ts->downscale(x, s - 1);
    }
    for (uint32_t d = 0; d < d_count; ++d) {
      input[d] = m.bits[d] ? x_s[d] : x_prev[d];
    }

    std::vector<T> logits =
        net.forward(input, m.bits, s, t, accumulate ? &acts : nullptr);

    uint32_t remaining = d_count - t + 1;
    // d(objective)/d(per-dim nll in nats), including the batch mean.
    double scale = (double(stages) / remaining + ce_weight / d_count) / kLn2 /
                   double(b_size);
    std::vector<double> dlogits(d_count * o, 0.0);
    double sum_nats = 0.0;
    for (uint32_t d = 0; d < d_count; ++d) {
      if (m.bits[d]) continue;
      std::vector<double> row = detail::logits_row<T>(logits, d, o);
      sum_nats += detail::dim_nll(cfg, ts, row, s, x_s[d], x_prev[d],
                                  accumulate ? &dlogits[d * o] : nullptr, scale);
    }
    if (!std::isfinite(sum_nats)) {
      throw std::domain_error("non-finite loss at batch index " +
                              std::to_string(n));
    }

    ElboEstimate est;
    est.stage = s;
    est.t = t;
    est.l_t_bits = sum_nats / kLn2 / remaining;
    est.value_bits = -double(stages) * d_count * est.l_t_bits;
    est.ce_bits = sum_nats / kLn2;
    out.per_example.push_back(est);
    out.nelbo_bits_per_dim += stages * est.l_t_bits / double(b_size);
    out.ce_bits_per_dim += est.ce_bits / d_count / double(b_size);

    if (accumulate) {
      std::vector<T> dl(d_count * o);
      for (size_t i = 0; i < dl.size(); ++i) dl[i] = static_cast<T>(dlogits[i]);
      net.accumulate_grad(input, acts, dl);
    }
  }
  out.loss_bits = out.nelbo_bits_per_dim + ce_weight * out.ce_bits_per_dim;
  return out;
}

template <typename T>
LossBreakdown loss_and_grad(Network<T>& net,
                            std::span<const std::vector<uint32_t>> batch,
                            Objective objective, const TransitionSet* ts,
                            double ce_weight, Rng& rng) {
  if (objective == Objective::upscale && ts == nullptr) {
    throw std::invalid_argument("upscale objective needs a transition set");
  }
  const ModelConfig& cfg = net.config();
  std::vector<StepAssignment> assignments(batch.size());
  for (StepAssignment& at : assignments) {
    at.stage = objective == Objective::upscale
                   ? 1 + static_cast<uint32_t>(rng.bounded(cfg.stages))
                   : 1;
    at.t = 1 + static_cast<uint32_t>(rng.bounded(cfg.dims));
    at.sigma = sample_permutation(rng, cfg.dims);
  }
  return loss_and_grad_at(net, batch, assignments,
                          objective == Objective::oa ? nullptr : ts, ce_weight,
                          true);
}

// ---------------------------------------------------------------------------
// Sampling

// Generates under a fixed order with a parallel step plan: each schedule
// step runs one network call and fills every dimension whose rank lies in
// that step's span, independently. The full-budget schedule is ordinary
// one-variable-at-a-time generation.
template <typename T>
std::vector<uint32_t> sample_with_schedule(const Network<T>& net,
                                           const Permutation& sigma,
                                           const Schedule& schedule, Rng& rng) {
  const ModelConfig& cfg = net.config();
  uint32_t d_count = cfg.dims;
  if (cfg.stages != 1) {
    throw std::invalid_argument("single-stage sampler on a multi-stage model");
  }
  if (sigma.dims() != d_count) throw std::invalid_argument("order dims mismatch");
  if (schedule.steps.empty() || schedule.steps.back() != d_count) {
    throw std::invalid_argument("schedule must end at the last dimension");
  }
  size_t o = cfg.output_width();
  std::vector<uint32_t> x(d_count, 0);
  uint32_t prev = 0;
  for (uint32_t next : schedule.steps) {
    Mask m = mask_lt(sigma, prev + 1);
    std::vector<uint32_t> input =
        absorb_input(x, m, AbsorbingState::broadcast(0));
    std::vector<T> logits = net.forward(input, m.bits, 1, prev + 1);
    for (uint32_t d = 0; d < d_count; ++d) {
      uint32_t rank = sigma.ranks[d];
      if (rank <= prev || rank > next) continue;
      std::vector<double> row = detail::logits_row<T>(logits, d, o);
      Conditional cond = conditional_distribution(cfg, nullptr, row, 1, 0);
      x[d] = cond.values[rng.categorical<double>(cond.probs)];
    }
    prev = next;
  }
  return x;
}

template <typename T>
std::vector<uint32_t> sample(const Network<T>& net, Rng& rng,
                             const Permutation* sigma = nullptr) {
  uint32_t d_count = net.config().dims;
  Permutation order =
      sigma ? *sigma : sample_permutation(rng, d_count);
  Schedule full;
  full.steps.resize(d_count);
  std::iota(full.steps.begin(), full.steps.end(), 1u);
  return sample_with_schedule(net, order, full, rng);
}

// Stage-by-stage generation. Every stage refines the previous one under its
// own order (and optional per-stage step plan); the running vector is always
// a valid stage vector.
template <typename T>
std::vector<uint32_t> upscale_sample(const Network<T>& net,
                                     const TransitionSet& ts, Rng& rng,
                                     std::span<const Permutation> sigmas = {},
                                     std::span<const Schedule> schedules = {}) {
  const ModelConfig& cfg = net.config();
  uint32_t d_count = cfg.dims;
  uint32_t stages = cfg.stages;
  size_t o = cfg.output_width();
  if (!sigmas.empty() && sigmas.size() != stages) {
    throw std::invalid_argument("need one order per stage");
  }
  if (!schedules.empty() && schedules.size() != stages) {
    throw std::invalid_argument("need one schedule per stage");
  }

  std::vector<uint32_t> x(d_count, 0);
  for (uint32_t s = 1; s <= stages; ++s) {
    Permutation sigma =
        sigmas.empty() ? sample_permutation(rng, d_count) : sigmas[s - 1];
    Schedule plan;
    if (schedules.empty()) {
      plan.steps.resize(d_count);
      std::iota(plan.steps.begin(), plan.steps.end(), 1u);
    } else {
      plan = schedules[s - 1];
    }
    uint32_t prev = 0;
    for (uint32_t next : plan.steps) {
      Mask m = mask_lt(sigma, prev + 1);
      // Filled dimensions already hold stage-s values, the rest still hold
      // stage-(s-1) values, which is exactly the conditioning input.
      std::vector<T> logits = net.forward(x, m.bits, s, prev + 1);
      for (uint32_t d = 0; d < d_count; ++d) {
        uint32_t rank = sigma.ranks[d];
        if (rank <= prev || rank > next) continue;
        std::vector<double> row = detail::logits_row<T>(logits, d, o);
        Conditional cond = conditional_distribution(cfg, &ts, row, s, x[d]);
        x[d] = cond.values[rng.categorical<double>(cond.probs)];
      }
      prev = next;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Exact likelihood oracles

// log2 p(x | sigma): one variable per step, D network calls.
template <typename T>
double exact_order_loglik(const Network<T>& net, std::span<const uint32_t> x,
                          const Permutation& sigma) {
  const ModelConfig& cfg = net.config();
  if (cfg.stages != 1) {
    throw std::invalid_argument("single-stage oracle on a multi-stage model");
  }
  uint32_t d_count = cfg.dims;
  size_t o = cfg.output_width();
  std::vector<uint32_t> order = sigma.to_order();
  double total_bits = 0.0;
  for (uint32_t t = 1; t <= d_count; ++t) {
    Mask m = mask_lt(sigma, t);
    std::vector<uint32_t> input =
        absorb_input(x, m, AbsorbingState::broadcast(0));
    std::vector<T> logits = net.forward(input, m.bits, 1, t);
    uint32_t d = order[t - 1];
    std::vector<double> row = detail::logits_row<T>(logits, d, o);
    total_bits -= detail::dim_nll(cfg, nullptr, row, 1, x[d], 0) / kLn2;
  }
  return total_bits;
}

// Same under the stage structure, one shared order across stages.
template <typename T>
double upscale_exact_order_loglik(const Network<T>& net,
                                  const TransitionSet& ts,
                                  std::span<const uint32_t> x,
                                  const Permutation& sigma) {
  const ModelConfig& cfg = net.config();
  uint32_t d_count = cfg.dims;
  size_t o = cfg.output_width();
  std::vector<uint32_t> order = sigma.to_order();
  double total_bits = 0.0;
  for (uint32_t s = 1; s <= cfg.stages; ++s) {
    std::vector<uint32_t> x_s = ts.downscale(x, s);
    std::vector<uint32_t> x_prev = ts.downscale(x, s - 1);
    for (uint32_t t = 1; t <= d_count; ++t) {
      Mask m = mask_lt(sigma, t);
      std::vector<uint32_t> input(d_count);
      for (uint32_t d = 0; d < d_count; ++d) {
        input[d] = m.bits[d] ? x_s[d] : x_prev[d];
      }
      std::vector<T> logits = net.forward(input, m.bits, s, t);
      uint32_t d = order[t - 1];
      std::vector<double> row = detail::logits_row<T>(logits, d, o);
      total_bits -= detail::dim_nll(cfg, &ts, row, s, x_s[d], x_prev[d]) / kLn2;
    }
  }
  return total_bits;
}

// The exact order-agnostic bound: the mean of log2 p(x | sigma) over every
// permutation. Factorially many orders, so this is an oracle for tiny D.
template <typename T>
double exact_oa_loglik(const Network<T>& net, std::span<const uint32_t> x) {
  uint32_t d_count = net.config().dims;
  if (d_count > 6) {
    throw std::invalid_argument("exhaustive order average is limited to 6 dims");
  }
  std::vector<uint32_t> order(d_count);
  std::iota(order.begin(), order.end(), 0u);
  double total = 0.0;
  size_t count = 0;
  do {
    total += exact_order_loglik(net, x, Permutation::from_order(order));
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return total / double(count);
}

template <typename T>
double upscale_exact_oa_loglik(const Network<T>& net, const TransitionSet& ts,
                               std::span<const uint32_t> x) {
  uint32_t d_count = net.config().dims;
  if (d_count > 6) {
    throw std::invalid_argument("exhaustive order average is limited to 6 dims");
  }
  std::vector<uint32_t> order(d_count);
  std::iota(order.begin(), order.end(), 0u);
  double total = 0.0;
  size_t count = 0;
  do {
    total +=
        upscale_exact_order_loglik(net, ts, x, Permutation::from_order(order));
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return total / double(count);
}

}  // namespace ardm
