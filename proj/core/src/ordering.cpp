#include "ardm/ordering.hpp"

#include <numeric>
#include <stdexcept>

namespace ardm {

bool Permutation::valid() const {
  const size_t d = ranks.size();
  std::vector<uint8_t> seen(d, 0);
  for (uint32_t r : ranks) {
    if (r < 1 || r > d || seen[r - 1]) return false;
    seen[r - 1] = 1;
  }
  return true;
}

std::vector<uint32_t> Permutation::to_order() const {
  std::vector<uint32_t> order(ranks.size());
  for (size_t i = 0; i < ranks.size(); ++i) order[ranks[i] - 1] = static_cast<uint32_t>(i);
  return order;
}

Permutation Permutation::from_order(std::span<const uint32_t> order) {
  Permutation p;
  p.ranks.assign(order.size(), 0);
  for (size_t t = 0; t < order.size(); ++t) {
    if (order[t] >= order.size()) throw std::invalid_argument("order entry out of range");
    p.ranks[order[t]] = static_cast<uint32_t>(t + 1);
  }
  if (!p.valid()) throw std::invalid_argument("order list is not a permutation");
  return p;
}

Permutation Permutation::identity(size_t dims) {
  Permutation p;
  p.ranks.resize(dims);
  std::iota(p.ranks.begin(), p.ranks.end(), 1u);
  return p;
}

bool Mask::all() const {
  for (uint8_t b : bits)
    if (!b) return false;
  return true;
}

bool Mask::none() const {
  for (uint8_t b : bits)
    if (b) return false;
  return true;
}

size_t Mask::popcount() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b ? 1 : 0;
  return n;
}

Permutation sample_permutation(Rng& rng, size_t dims) {
  if (dims == 0) throw std::invalid_argument("sample_permutation: dims must be >= 1");
  std::vector<uint32_t> order(dims);
  std::iota(order.begin(), order.end(), 0u);
  for (size_t i = dims - 1; i > 0; --i) {
    size_t j = static_cast<size_t>(rng.bounded(i + 1));
    std::swap(order[i], order[j]);
  }
  return Permutation::from_order(order);
}

Mask mask_lt(const Permutation& sigma, uint32_t t) {
  const size_t d = sigma.dims();
  if (t < 1 || t > d + 1) throw std::out_of_range("mask_lt: t out of range");
  Mask m;
  m.bits.resize(d);
  for (size_t i = 0; i < d; ++i) m.bits[i] = sigma.ranks[i] < t ? 1 : 0;
  return m;
}

std::vector<uint32_t> absorb_input(std::span<const uint32_t> x, const Mask& m,
                                   const AbsorbingState& a) {
  if (x.size() != m.bits.size()) throw std::invalid_argument("absorb_input: shape mismatch");
  if (a.values.size() != 1 && a.values.size() != x.size())
    throw std::invalid_argument("absorb_input: absorbing state shape mismatch");
  std::vector<uint32_t> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = m.bits[i] ? x[i] : a.at(i);
  return out;
}

}  // namespace ardm
