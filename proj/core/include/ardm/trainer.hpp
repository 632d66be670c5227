#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/checkpoint.hpp"
#include "ardm/config.hpp"
#include "ardm/dataset.hpp"
#include "ardm/ledger.hpp"
#include "ardm/model_ops.hpp"
#include "ardm/scheduler.hpp"
#include "ardm/transitions.hpp"

namespace ardm {

// Keys the training config may contain; anything else is rejected by name.
const std::vector<std::string>& train_config_keys();

// Builds the architecture from config keys plus the data shape.
ModelConfig model_config_from(const Config& cfg, uint32_t dims,
                              uint32_t num_classes);

struct TrainResult {
  Checkpoint checkpoint;
  double final_loss_bits = 0.0;
  double ledger_bits_per_dim = 0.0;
};

// Full training run driven by a flat config; writes nothing, the caller
// persists the returned checkpoint. Deterministic given the config.
TrainResult run_training(const Config& cfg, std::ostream& log);

// A checkpoint rehydrated for inference. Coding and evaluation run in
// 64-bit arithmetic on the stored 32-bit parameters; use_ema selects the
// averaged weights.
struct LoadedModel {
  Config config;
  ModelConfig model_config;
  Objective objective = Objective::oa;
  std::unique_ptr<TransitionSet> transitions;
  std::unique_ptr<Network<double>> net;
  LossLedger ledger;
  uint64_t model_hash = 0;

  const TransitionSet* transitions_ptr() const { return transitions.get(); }
};

LoadedModel load_model(const Checkpoint& ckpt, bool use_ema = true);

// Per-stage plans from the ledger: components sorted descending within the
// stage, then the exact dynamic program at the given per-stage budget.
std::vector<Schedule> plan_stage_schedules(const LossLedger& ledger,
                                           size_t budget);

struct EvalReport {
  double mean_bits_per_dim = 0.0;
  double stderr_bits_per_dim = 0.0;
  size_t estimates = 0;
};

// Stochastic bound estimate: `passes` sweeps of one-step estimates over the
// dataset. With exact = true (tiny D only) the factorial enumeration runs
// instead and the stderr is zero.
EvalReport evaluate(const LoadedModel& model, const Dataset& data,
                    size_t passes, uint64_t seed, bool exact = false);

}  // namespace ardm
