#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

namespace ardm {

// EMA-smoothed per-step loss components, in bits per generated variable.
// Entry (s, t) tracks the expected cost of generating one variable at step t
// of stage s; the scheduler consumes these as its transition costs. A single
// stage (S = 1) is the order-agnostic case.
//
// The first observation at a step initializes the entry; later observations
// blend as momentum * old + (1 - momentum) * new. Stored in doubles so a
// checkpoint round-trip restores the ledger bit-exactly.
class LossLedger {
 public:
  LossLedger() = default;
  LossLedger(size_t stages, size_t dims, double momentum = 0.99);

  size_t stages() const { return stages_; }
  size_t dims() const { return dims_; }
  double momentum() const { return momentum_; }

  // stage and t are 1-based, matching the generation process.
  void update(size_t stage, size_t t, double observed_bits);
  void update(size_t t, double observed_bits) { update(1, t, observed_bits); }

  double component(size_t stage, size_t t) const;
  uint64_t count(size_t stage, size_t t) const;

  // Components of one stage as a contiguous D-vector (t = 1..D).
  std::vector<double> stage_components(size_t stage) const;
  // Replace a stage's components wholesale (used by the eval-time refresh).
  void set_stage_components(size_t stage, const std::vector<double>& comps,
                            const std::vector<uint64_t>& counts);

  // True once every (stage, t) entry has at least one observation.
  bool complete() const;
  // Mean of all components = estimated NLL in bits/dim (per stage summed).
  double total_bits() const;

  void save(std::ostream& os) const;
  static LossLedger load(std::istream& is);

  bool operator==(const LossLedger& other) const;

 private:
  size_t index(size_t stage, size_t t) const;

  size_t stages_ = 0;
  size_t dims_ = 0;
  double momentum_ = 0.99;
  std::vector<double> components_;
  std::vector<uint64_t> counts_;
};

}  // namespace ardm
