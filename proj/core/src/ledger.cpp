#include "ardm/ledger.hpp"

#include <cmath>
#include <stdexcept>

#include "ardm/serialize.hpp"

namespace ardm {

LossLedger::LossLedger(size_t stages, size_t dims, double momentum)
    : stages_(stages),
      dims_(dims),
      momentum_(momentum),
      components_(stages * dims, 0.0),
      counts_(stages * dims, 0) {
  if (stages == 0 || dims == 0) {
    throw std::invalid_argument("ledger needs at least one stage and one dim");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("ledger momentum must be in [0, 1)");
  }
}

size_t LossLedger::index(size_t stage, size_t t) const {
  if (stage < 1 || stage > stages_ || t < 1 || t > dims_) {
    throw std::out_of_range("ledger entry out of range");
  }
  return (stage - 1) * dims_ + (t - 1);
}

void LossLedger::update(size_t stage, size_t t, double observed_bits) {
  if (!std::isfinite(observed_bits) || observed_bits < 0.0) {
    throw std::invalid_argument(
        "ledger observation must be a finite nonnegative bit count");
  }
  size_t i = index(stage, t);
  if (counts_[i] == 0) {
    components_[i] = observed_bits;
  } else {
    components_[i] = momentum_ * components_[i] + (1.0 - momentum_) * observed_bits;
  }
  counts_[i] += 1;
}

double LossLedger::component(size_t stage, size_t t) const {
  return components_[index(stage, t)];
}

uint64_t LossLedger::count(size_t stage, size_t t) const {
  return counts_[index(stage, t)];
}

std::vector<double> LossLedger::stage_components(size_t stage) const {
  size_t base = index(stage, 1);
  return std::vector<double>(components_.begin() + base,
                             components_.begin() + base + dims_);
}

void LossLedger::set_stage_components(size_t stage,
                                      const std::vector<double>& comps,
                                      const std::vector<uint64_t>& counts) {
  if (comps.size() != dims_ || counts.size() != dims_) {
    throw std::invalid_argument("stage component vector has wrong length");
  }
  size_t base = index(stage, 1);
  for (size_t i = 0; i < dims_; ++i) {
    components_[base + i] = comps[i];
    counts_[base + i] = counts[i];
  }
}

bool LossLedger::complete() const {
  for (uint64_t c : counts_) {
    if (c == 0) return false;
  }
  return true;
}

double LossLedger::total_bits() const {
  double sum = 0.0;
  for (double c : components_) sum += c;
  return dims_ == 0 ? 0.0 : sum / static_cast<double>(dims_);
}

void LossLedger::save(std::ostream& os) const {
  io::write_le<uint32_t>(os, static_cast<uint32_t>(stages_));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(dims_));
  io::write_f64(os, momentum_);
  for (double c : components_) io::write_f64(os, c);
  for (uint64_t c : counts_) io::write_le<uint64_t>(os, c);
}

LossLedger LossLedger::load(std::istream& is) {
  uint32_t stages = io::read_le<uint32_t>(is);
  uint32_t dims = io::read_le<uint32_t>(is);
  double momentum = io::read_f64(is);
  LossLedger out(stages, dims, momentum);
  for (double& c : out.components_) c = io::read_f64(is);
  for (uint64_t& c : out.counts_) c = io::read_le<uint64_t>(is);
  return out;
}

bool LossLedger::operator==(const LossLedger& other) const {
  return stages_ == other.stages_ && dims_ == other.dims_ &&
         momentum_ == other.momentum_ && components_ == other.components_ &&
         counts_ == other.counts_;
}

}  // namespace ardm
