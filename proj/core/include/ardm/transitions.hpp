#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ardm {

// Stage structure for depth upscaling. A value with K classes is generated
// coarse-to-fine over S = ceil(log_b K) stages; stage s keeps the top s
// base-b digits and zeroes the rest, so stage 0 is the absorbing state 0 and
// stage S is the raw value. The downscaling matrices are deterministic
// column maps, so we store the integer maps and never materialize K x K
// matrices (K can be 2^16).
class TransitionSet {
 public:
  TransitionSet(uint32_t num_classes, uint32_t branching);

  uint32_t num_classes() const { return num_classes_; }
  uint32_t branching() const { return branching_; }
  uint32_t stages() const { return stages_; }

  // b^(S - s): spacing between stage-s support values.
  uint64_t stage_step(uint32_t s) const;

  // Column map of the matrix that takes stage s to stage s-1
  // (P with index s in 1..S): k -> floor(k / b^(S-s+1)) * b^(S-s+1).
  uint32_t stage_map(uint32_t s, uint32_t k) const;

  // Cumulative map taking a raw class to its stage-s representative
  // (the product of the maps for stages s+1 .. S applied to k).
  uint32_t downscale_value(uint32_t k, uint32_t s) const;
  std::vector<uint32_t> downscale(std::span<const uint32_t> x, uint32_t s) const;

  // All classes representable at stage s: multiples of b^(S-s) below K.
  std::vector<uint32_t> stage_support(uint32_t s) const;

  // Children of a stage-(s-1) value at stage s, in increasing order.
  // Fewer than b children can exist near the top when K is not a power of b.
  std::vector<uint32_t> children(uint32_t s, uint32_t parent) const;

  // Index of x_s among the children of its stage-(s-1) parent.
  uint32_t branch_index(uint32_t x_s, uint32_t s) const;

  bool in_stage_support(uint32_t k, uint32_t s) const;

 private:
  void check_stage(uint32_t s, uint32_t lo) const;

  uint32_t num_classes_;
  uint32_t branching_;
  uint32_t stages_;
  std::vector<uint64_t> pow_;  // pow_[i] = b^i, i in 0..S
};

// Restriction of a full K-class probability vector to the branch selected by
// the stage-(s-1) value x_prev: mass is pooled over each child's preimage
// and renormalized over the branch. Entries of theta are floored at
// `prob_floor` before pooling so the branch mass is never zero.
std::vector<double> data_parametrization(std::span<const double> theta,
                                         uint32_t x_prev, uint32_t s,
                                         const TransitionSet& T,
                                         double prob_floor = 1e-10);

// Softmax over one logit per child of x_prev, scattered onto those child
// classes; zero elsewhere. logits must provide at least as many entries as
// x_prev has children (extras are ignored).
std::vector<double> direct_parametrization(std::span<const double> logits,
                                           uint32_t x_prev, uint32_t s,
                                           const TransitionSet& T);

}  // namespace ardm
