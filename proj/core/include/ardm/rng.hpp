#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ardm {

// Counter-style splitmix64 generator. The full generator state is a single
// u64, which is what the checkpoint format stores; advancing by the golden
// gamma and mixing gives a stream that is identical on every platform.
// All stochastic operations in the library take one of these explicitly.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n) by rejection.
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::bounded: n must be positive");
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, one value per call so the generator
  // state stays a single word.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Draw from a categorical distribution given probabilities (assumed to sum
  // to ~1; the final bucket absorbs rounding slack).
  template <typename T>
  size_t categorical(std::span<const T> probs) {
    double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += static_cast<double>(probs[i]);
      if (u < acc) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace ardm
