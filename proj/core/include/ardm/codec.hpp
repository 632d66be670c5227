#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/ordering.hpp"
#include "ardm/rng.hpp"
#include "ardm/scheduler.hpp"
#include "ardm/transitions.hpp"

namespace ardm {

// Self-contained compressed record. Layout (little-endian): magic "ARDC",
// u16 version, u32 D, u32 K, u16 b, u16 S, u16 precision_bits, u64 model
// hash, u32 step count followed by that many u32 step positions (one block
// per stage, each ending at D), D u32 permutation ranks, u64 payload byte
// length, payload.
struct CompressedFile {
  static constexpr uint16_t kVersion = 1;

  uint32_t dims = 0;
  uint32_t num_classes = 0;
  uint16_t branching = 0;
  uint16_t stages = 1;
  uint16_t precision_bits = 12;
  uint64_t model_hash = 0;
  std::vector<uint32_t> schedule_steps;  // stage blocks concatenated
  std::vector<uint32_t> ranks;           // shared order, all stages
  std::vector<uint8_t> payload;

  void save(std::ostream& os) const;
  static CompressedFile load(std::istream& is);
  void save_file(const std::string& path) const;
  static CompressedFile load_file(const std::string& path);

  // Per-stage schedules reconstructed from the concatenated blocks.
  std::vector<Schedule> stage_schedules() const;
};

// Everything the coding side needs. Coding always runs the network in
// 64-bit arithmetic on the 32-bit checkpoint parameters, so encoder and
// decoder tables are bit-identical no matter which precision trained.
struct CodecModel {
  const Network<double>* net = nullptr;
  const TransitionSet* transitions = nullptr;  // required when stages > 1
  uint64_t model_hash = 0;
  uint16_t precision_bits = 12;
};

struct CodecStats {
  size_t net_calls = 0;
  // Sum of -log2 of the model probability of each coded symbol, conditioned
  // step-parallel exactly as coded: the payload can only be longer.
  double ideal_bits = 0.0;
};

// One network call per schedule step (per stage); each step's dimensions
// are coded against tables quantized from the model's conditionals.
CompressedFile compress(const CodecModel& model, std::span<const uint32_t> x,
                        const Permutation& sigma,
                        std::span<const Schedule> stage_schedules,
                        CodecStats* stats = nullptr);

std::vector<uint32_t> decompress(const CodecModel& model,
                                 const CompressedFile& file,
                                 CodecStats* stats = nullptr);

// Whole-corpus coding through one shared coder state, so the 32-bit flush
// is paid once rather than per record. Used for rate measurements.
struct DatasetCodingResult {
  std::vector<uint8_t> payload;
  double ideal_bits = 0.0;
  size_t symbols = 0;
};
DatasetCodingResult compress_dataset(
    const CodecModel& model, std::span<const std::vector<uint32_t>> records,
    const Permutation& sigma, std::span<const Schedule> stage_schedules);
std::vector<std::vector<uint32_t>> decompress_dataset(
    const CodecModel& model, std::span<const uint8_t> payload, size_t count,
    const Permutation& sigma, std::span<const Schedule> stage_schedules);

// Scores a handful of random orders by exact log-likelihood on a sample
// batch and keeps the best; ties go to the earliest candidate.
struct OrderCandidate {
  Permutation sigma;
  double mean_bits_per_dim = 0.0;  // negative log-likelihood
};
std::vector<OrderCandidate> score_orders(
    const CodecModel& model, std::span<const std::vector<uint32_t>> batch,
    size_t n_candidates, Rng& rng);
Permutation select_order(const CodecModel& model,
                         std::span<const std::vector<uint32_t>> batch,
                         size_t n_candidates, Rng& rng);

}  // namespace ardm
