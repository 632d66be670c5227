#include "ardm/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ardm {

TransitionSet::TransitionSet(uint32_t num_classes, uint32_t branching)
    : num_classes_(num_classes), branching_(branching) {
  if (num_classes < 2) {
    throw std::invalid_argument("transition set needs at least 2 classes");
  }
  if (branching < 2) {
    throw std::invalid_argument("branching factor must be at least 2");
  }
  pow_.push_back(1);
  while (pow_.back() < num_classes) {
    pow_.push_back(pow_.back() * branching);
  }
  stages_ = static_cast<uint32_t>(pow_.size() - 1);
}

void TransitionSet::check_stage(uint32_t s, uint32_t lo) const {
  if (s < lo || s > stages_) {
    throw std::out_of_range("stage index out of range");
  }
}

uint64_t TransitionSet::stage_step(uint32_t s) const {
  check_stage(s, 0);
  return pow_[stages_ - s];
}

uint32_t TransitionSet::stage_map(uint32_t s, uint32_t k) const {
  check_stage(s, 1);
  uint64_t step = pow_[stages_ - s + 1];
  return static_cast<uint32_t>(k / step * step);
}

uint32_t TransitionSet::downscale_value(uint32_t k, uint32_t s) const {
  check_stage(s, 0);
  if (k >= num_classes_) {
    throw std::out_of_range("class value out of range");
  }
  uint64_t step = pow_[stages_ - s];
  return static_cast<uint32_t>(k / step * step);
}

std::vector<uint32_t> TransitionSet::downscale(std::span<const uint32_t> x,
                                               uint32_t s) const {
  std::vector<uint32_t> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = downscale_value(x[i], s);
  return out;
}

std::vector<uint32_t> TransitionSet::stage_support(uint32_t s) const {
  check_stage(s, 0);
  uint64_t step = pow_[stages_ - s];
  std::vector<uint32_t> out;
  for (uint64_t k = 0; k < num_classes_; k += step) {
    out.push_back(static_cast<uint32_t>(k));
  }
  return out;
}

std::vector<uint32_t> TransitionSet::children(uint32_t s, uint32_t parent) const {
  check_stage(s, 1);
  if (!in_stage_support(parent, s - 1)) {
    throw std::invalid_argument("parent is not a valid stage value");
  }
  uint64_t step = pow_[stages_ - s];
  std::vector<uint32_t> out;
  for (uint32_t i = 0; i < branching_; ++i) {
    uint64_t child = parent + i * step;
    if (child >= num_classes_) break;
    out.push_back(static_cast<uint32_t>(child));
  }
  return out;
}

uint32_t TransitionSet::branch_index(uint32_t x_s, uint32_t s) const {
  check_stage(s, 1);
  if (x_s >= num_classes_) {
    throw std::out_of_range("class value out of range");
  }
  return static_cast<uint32_t>(x_s / pow_[stages_ - s] % branching_);
}

bool TransitionSet::in_stage_support(uint32_t k, uint32_t s) const {
  check_stage(s, 0);
  return k < num_classes_ && k % pow_[stages_ - s] == 0;
}

std::vector<double> data_parametrization(std::span<const double> theta,
                                         uint32_t x_prev, uint32_t s,
                                         const TransitionSet& T,
                                         double prob_floor) {
  uint32_t K = T.num_classes();
  if (theta.size() != K) {
    throw std::invalid_argument("theta length must equal the class count");
  }
  if (s < 1 || s > T.stages()) {
    throw std::out_of_range("stage index out of range");
  }
  // Prefix sums of the floored vector make each pooled mass one subtraction.
  std::vector<double> prefix(K + 1, 0.0);
  for (uint32_t k = 0; k < K; ++k) {
    prefix[k + 1] = prefix[k] + std::max(theta[k], prob_floor);
  }
  auto range_mass = [&](uint64_t lo, uint64_t hi) {
    hi = std::min<uint64_t>(hi, K);
    return prefix[hi] - prefix[lo];
  };

  uint64_t step = T.stage_step(s);
  double denom = range_mass(x_prev, x_prev + step * T.branching());
  if (denom <= 0.0) {
    throw std::domain_error("branch has zero probability mass");
  }
  std::vector<double> out(K, 0.0);
  for (uint32_t child : T.children(s, x_prev)) {
    out[child] = range_mass(child, child + step) / denom;
  }
  return out;
}

std::vector<double> direct_parametrization(std::span<const double> logits,
                                           uint32_t x_prev, uint32_t s,
                                           const TransitionSet& T) {
  std::vector<uint32_t> kids = T.children(s, x_prev);
  if (logits.size() < kids.size()) {
    throw std::invalid_argument("fewer logits than branch children");
  }
  double max_logit = logits[0];
  for (size_t i = 1; i < kids.size(); ++i) max_logit = std::max(max_logit, logits[i]);
  double z = 0.0;
  for (size_t i = 0; i < kids.size(); ++i) z += std::exp(logits[i] - max_logit);

  std::vector<double> out(T.num_classes(), 0.0);
  for (size_t i = 0; i < kids.size(); ++i) {
    out[kids[i]] = std::exp(logits[i] - max_logit) / z;
  }
  return out;
}

}  // namespace ardm
