#include "ardm/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace ardm {

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "train_data", "val_data", "checkpoint_out", "resume",
      "mode", "branching", "parametrization",
      "embed_width", "hidden_width", "depth", "time_input", "positional",
      "model_dims", "model_classes",
      "steps", "batch_size", "lr", "beta1", "beta2", "eps", "warmup", "clip",
      "ce_weight", "ema_momentum", "ledger_momentum",
      "eval_every", "eval_batch", "ledger_refresh_samples",
      "seed", "precision"};
  return keys;
}

ModelConfig model_config_from(const Config& cfg, uint32_t dims,
                              uint32_t num_classes) {
  ModelConfig mc;
  mc.dims = dims;
  mc.num_classes = num_classes;
  std::string mode = cfg.get_string("mode", "oa");
  if (mode == "upscale") {
    mc.branching = static_cast<uint32_t>(cfg.get_int("branching", 2));
    mc.stages = TransitionSet(num_classes, mc.branching).stages();
  } else if (mode == "oa") {
    mc.stages = 1;
  } else {
    throw std::invalid_argument("mode must be 'oa' or 'upscale'");
  }
  std::string param = cfg.get_string("parametrization", "data");
  if (param == "data") {
    mc.parametrization = Parametrization::data;
  } else if (param == "direct") {
    mc.parametrization = Parametrization::direct;
  } else {
    throw std::invalid_argument("parametrization must be 'data' or 'direct'");
  }
  mc.embed_width = static_cast<uint32_t>(cfg.get_int("embed_width", 8));
  mc.hidden_width = static_cast<uint32_t>(cfg.get_int("hidden_width", 48));
  mc.depth = static_cast<uint32_t>(cfg.get_int("depth", 2));
  mc.time_input = cfg.get_bool("time_input", true);
  mc.positional = cfg.get_bool("positional", true);
  mc.validate();
  return mc;
}

namespace {

AdamConfig adam_from(const Config& cfg) {
  AdamConfig opt;
  opt.lr = cfg.get_double("lr", 2e-3);
  opt.beta1 = cfg.get_double("beta1", 0.9);
  opt.beta2 = cfg.get_double("beta2", 0.999);
  opt.eps = cfg.get_double("eps", 1e-8);
  opt.warmup_steps = static_cast<uint64_t>(cfg.get_int("warmup", 100));
  opt.clip_norm = cfg.get_double("clip", 100.0);
  return opt;
}

// Replaces each ledger entry with a plain average of fresh one-step
// estimates under the averaged parameters. The running EMA from training
// lags behind the final weights; schedules and size predictions should
// reflect the model that will actually code.
template <typename T>
void refresh_ledger(Network<T>& net, const TransitionSet* ts,
                    const Dataset& data, LossLedger& ledger, uint64_t samples,
                    Rng& rng) {
  net.swap_ema();
  uint32_t d_count = net.config().dims;
  for (uint32_t s = 1; s <= net.config().stages; ++s) {
    std::vector<double> comps(d_count, 0.0);
    std::vector<uint64_t> counts(d_count, samples);
    for (uint32_t t = 1; t <= d_count; ++t) {
      double acc = 0.0;
      for (uint64_t n = 0; n < samples; ++n) {
        const auto& x = data.records[rng.bounded(data.records.size())];
        StepAssignment at;
        at.stage = s;
        at.t = t;
        at.sigma = sample_permutation(rng, d_count);
        acc += elbo_step_at(net, ts, x, at).l_t_bits;
      }
      comps[t - 1] = acc / double(samples);
    }
    ledger.set_stage_components(s, comps, counts);
  }
  net.swap_ema();
}

template <typename T>
TrainResult run_training_impl(const Config& cfg, std::ostream& log) {
  Dataset train = Dataset::load_file(cfg.get_string("train_data"));
  if (train.records.empty()) throw std::runtime_error("training set is empty");

  ModelConfig mc = model_config_from(cfg, train.dims, train.num_classes);
  Objective objective =
      mc.stages > 1 ? Objective::upscale : Objective::oa;
  std::unique_ptr<TransitionSet> ts;
  if (mc.stages > 1) {
    ts = std::make_unique<TransitionSet>(mc.num_classes, mc.branching);
  }

  uint64_t steps = static_cast<uint64_t>(cfg.get_int("steps", 1000));
  uint64_t batch_size = static_cast<uint64_t>(cfg.get_int("batch_size", 16));
  uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  uint64_t eval_every = static_cast<uint64_t>(cfg.get_int("eval_every", 200));
  uint64_t refresh_samples =
      static_cast<uint64_t>(cfg.get_int("ledger_refresh_samples", 64));
  double ce_weight = cfg.get_double("ce_weight", 0.001);
  double ema_momentum = cfg.get_double("ema_momentum", 0.999);
  double ledger_momentum = cfg.get_double("ledger_momentum", 0.99);
  AdamConfig opt = adam_from(cfg);

  Network<T> net(mc);
  Rng rng(seed);
  LossLedger ledger(mc.stages, mc.dims, ledger_momentum);

  if (cfg.has("resume")) {
    Checkpoint prev = Checkpoint::load_file(cfg.get_string("resume"));
    load_params(net, prev);
    ledger = prev.ledger;
    rng.set_state(prev.rng_state);
  } else {
    net.init_params(rng);
  }

  double last_loss = 0.0;
  std::vector<std::vector<uint32_t>> batch(batch_size);
  while (net.store().step < steps) {
    for (auto& x : batch) {
      x = train.records[rng.bounded(train.records.size())];
    }
    net.zero_grads();
    LossBreakdown lb =
        loss_and_grad(net, batch, objective, ts.get(), ce_weight, rng);
    net.adam_step(opt);
    net.ema_update(ema_momentum);
    for (const ElboEstimate& est : lb.per_example) {
      ledger.update(est.stage, est.t, est.l_t_bits);
    }
    last_loss = lb.loss_bits;

    uint64_t done = net.store().step;
    if (eval_every > 0 && (done % eval_every == 0 || done == steps)) {
      log << "step " << done << "/" << steps << "  loss "
          << std::fixed << std::setprecision(4) << lb.loss_bits
          << " bits/dim  (bound " << lb.nelbo_bits_per_dim << ", ce "
          << lb.ce_bits_per_dim << ")  ledger "
          << ledger.total_bits() << " bits/dim\n";
    }
  }

  if (refresh_samples > 0) {
    // Independent stream so the refresh does not perturb resume behavior.
    Rng refresh_rng(seed ^ 0x6c65646765725f72ull);
    refresh_ledger(net, ts.get(), train, ledger, refresh_samples, refresh_rng);
    log << "ledger refreshed: " << std::fixed << std::setprecision(4)
        << ledger.total_bits() << " bits/dim predicted\n";
  }

  // The stored config must rebuild this exact model without the dataset.
  Config stored = cfg;
  stored.set("model_dims", std::to_string(mc.dims));
  stored.set("model_classes", std::to_string(mc.num_classes));

  TrainResult result;
  result.checkpoint =
      make_checkpoint(net, stored.to_text(), ledger, rng.state());
  result.final_loss_bits = last_loss;
  result.ledger_bits_per_dim = ledger.total_bits();
  return result;
}

}  // namespace

TrainResult run_training(const Config& cfg, std::ostream& log) {
  int64_t precision = cfg.get_int("precision", 32);
  if (precision == 32) return run_training_impl<float>(cfg, log);
  if (precision == 64) return run_training_impl<double>(cfg, log);
  throw std::invalid_argument("precision must be 32 or 64");
}

LoadedModel load_model(const Checkpoint& ckpt, bool use_ema) {
  LoadedModel out;
  out.config = Config::parse(ckpt.config_text);
  uint32_t dims =
      static_cast<uint32_t>(out.config.get_int("model_dims"));
  uint32_t classes =
      static_cast<uint32_t>(out.config.get_int("model_classes"));
  out.model_config = model_config_from(out.config, dims, classes);
  out.objective =
      out.model_config.stages > 1 ? Objective::upscale : Objective::oa;
  if (out.model_config.stages > 1) {
    out.transitions = std::make_unique<TransitionSet>(
        out.model_config.num_classes, out.model_config.branching);
  }
  out.net = std::make_unique<Network<double>>(out.model_config);
  load_params(*out.net, ckpt);
  if (use_ema) out.net->swap_ema();
  out.ledger = ckpt.ledger;
  out.model_hash = checkpoint_hash(ckpt);
  return out;
}

std::vector<Schedule> plan_stage_schedules(const LossLedger& ledger,
                                           size_t budget) {
  if (budget < 1 || budget > ledger.dims()) {
    throw std::invalid_argument("budget must be in 1..D");
  }
  std::vector<Schedule> plans;
  for (uint32_t s = 1; s <= ledger.stages(); ++s) {
    std::vector<double> comps = ledger.stage_components(s);
    std::vector<double> sorted = sort_components(comps);
    CostMatrix cm = build_cost_matrix(sorted);
    DpTables tables = dp_solve(cm, budget);
    plans.push_back(extract_path(budget, tables));
  }
  return plans;
}

EvalReport evaluate(const LoadedModel& model, const Dataset& data,
                    size_t passes, uint64_t seed, bool exact) {
  if (data.dims != model.model_config.dims ||
      data.num_classes != model.model_config.num_classes) {
    throw std::runtime_error("dataset shape does not match the model");
  }
  if (data.records.empty()) throw std::runtime_error("empty dataset");
  const Network<double>& net = *model.net;
  const TransitionSet* ts = model.transitions_ptr();

  std::vector<double> values;
  if (exact) {
    values.reserve(data.records.size());
    for (const auto& x : data.records) {
      double loglik = ts ? upscale_exact_oa_loglik(net, *ts, x)
                         : exact_oa_loglik(net, x);
      values.push_back(-loglik / data.dims);
    }
  } else {
    Rng rng(seed);
    values.reserve(passes * data.records.size());
    for (size_t p = 0; p < passes; ++p) {
      for (const auto& x : data.records) {
        ElboEstimate est = ts ? upscale_elbo_step(net, *ts, x, rng)
                              : elbo_step(net, x, rng);
        values.push_back(-est.value_bits / data.dims);
      }
    }
  }

  size_t n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = sum / double(n);
  // Centered two-pass variance over the stochastic estimates: a batch of
  // identical values must report exactly zero spread.  Exact enumeration is
  // deterministic, so it carries no estimator uncertainty at all.
  double spread = 0.0;
  if (!exact && n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    spread = std::sqrt(sq / double(n - 1) / double(n));
  }

  EvalReport report;
  report.estimates = n;
  report.mean_bits_per_dim = mean;
  report.stderr_bits_per_dim = spread;
  return report;
}

}  // namespace ardm
