#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ardm/rng.hpp"

namespace ardm {

// A generation order over D dimensions, stored in rank form:
// ranks[i] = step (1-based) at which dimension i is generated.
// The order-list form (step -> dimension) is the inverse and is used only at
// CLI boundaries; rank form makes the `rank < t` mask comparisons O(D).
struct Permutation {
  std::vector<uint32_t> ranks;

  size_t dims() const { return ranks.size(); }
  bool valid() const;

  // Inverse view: order[t-1] = dimension generated at step t.
  std::vector<uint32_t> to_order() const;
  static Permutation from_order(std::span<const uint32_t> order);
  // Identity order: dimension i generated at step i+1.
  static Permutation identity(size_t dims);
};

struct Mask {
  std::vector<uint8_t> bits;

  size_t dims() const { return bits.size(); }
  bool all() const;
  bool none() const;
  size_t popcount() const;
};

// Absorbing input value, either one shared class index or one per dimension.
struct AbsorbingState {
  std::vector<uint32_t> values;  // size 1 (broadcast) or D

  static AbsorbingState broadcast(uint32_t value) { return AbsorbingState{{value}}; }
  uint32_t at(size_t dim) const { return values.size() == 1 ? values[0] : values[dim]; }
};

// Uniform draw over all D! orders, Fisher-Yates on the order list.
Permutation sample_permutation(Rng& rng, size_t dims);

// bits[i] = (ranks[i] < t), valid for t in [1, D+1].
Mask mask_lt(const Permutation& sigma, uint32_t t);

// output[i] = x[i] where mask is set, absorbing value elsewhere.
std::vector<uint32_t> absorb_input(std::span<const uint32_t> x, const Mask& m,
                                   const AbsorbingState& a);

}  // namespace ardm
