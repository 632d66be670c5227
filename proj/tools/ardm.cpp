// Command-line front end: training, evaluation, sampling, scheduling,
// compression, and dataset generation over the core library.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ardm/checkpoint.hpp"
#include "ardm/codec.hpp"
#include "ardm/config.hpp"
#include "ardm/dataset.hpp"
#include "ardm/model_ops.hpp"
#include "ardm/serialize.hpp"
#include "ardm/trainer.hpp"

namespace {

// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
// domain_error marks numeric failures and derives from logic_error, so it
// must be tested first; remaining logic_errors are caller mistakes and
// runtime_errors are bad files or streams.
int failure_code(const std::exception& e) {
  if (dynamic_cast<const std::domain_error*>(&e) != nullptr) return 3;
  if (dynamic_cast<const std::logic_error*>(&e) != nullptr) return 1;
  return 2;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure_code(e);
  }
}

struct GlobalArgs {
  uint64_t seed = 0;
  std::string config_path;
  std::string checkpoint_path;
  int precision = 0;  // 0 = take the config's value
  bool seed_given = false;
};

ardm::Config load_config(const GlobalArgs& g) {
  if (g.config_path.empty()) {
    throw std::invalid_argument("this command needs --config <file>");
  }
  return ardm::Config::load_file(g.config_path);
}

ardm::LoadedModel load_checkpoint_model(const GlobalArgs& g,
                                        bool use_ema = true) {
  if (g.checkpoint_path.empty()) {
    throw std::invalid_argument("this command needs --checkpoint <file>");
  }
  ardm::Checkpoint ckpt = ardm::Checkpoint::load_file(g.checkpoint_path);
  return ardm::load_model(ckpt, use_ema);
}

ardm::CodecModel codec_model(const ardm::LoadedModel& m,
                             uint16_t precision_bits) {
  ardm::CodecModel cm;
  cm.net = m.net.get();
  cm.transitions = m.transitions_ptr();
  cm.model_hash = m.model_hash;
  cm.precision_bits = precision_bits;
  return cm;
}

size_t effective_budget(size_t budget, size_t dims) {
  if (budget == 0) return dims;
  if (budget > dims) {
    throw std::invalid_argument("budget " + std::to_string(budget) +
                                " exceeds the " + std::to_string(dims) +
                                "-dimensional model");
  }
  return budget;
}

int cmd_train(const GlobalArgs& g) {
  ardm::Config cfg = load_config(g);
  std::vector<std::string> unknown = cfg.unknown_keys(ardm::train_config_keys());
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  if (g.seed_given) cfg.set("seed", std::to_string(g.seed));
  if (g.precision != 0) cfg.set("precision", std::to_string(g.precision));

  std::string out_path = !g.checkpoint_path.empty()
                             ? g.checkpoint_path
                             : cfg.get_string("checkpoint_out", "");
  if (out_path.empty()) {
    throw std::invalid_argument(
        "no output path: pass --checkpoint or set checkpoint_out");
  }

  ardm::TrainResult res = ardm::run_training(cfg, std::cout);
  res.checkpoint.save_file(out_path);
  std::cout << "checkpoint written to " << out_path << " (hash "
            << std::hex << ardm::checkpoint_hash(res.checkpoint) << std::dec
            << ")\n";

  if (cfg.has("val_data")) {
    ardm::LoadedModel model = ardm::load_model(res.checkpoint);
    ardm::Dataset val = ardm::Dataset::load_file(cfg.get_string("val_data"));
    ardm::EvalReport rep = ardm::evaluate(model, val, 4, g.seed + 1);
    std::cout << "validation bound: " << std::fixed << std::setprecision(4)
              << rep.mean_bits_per_dim << " +/- " << rep.stderr_bits_per_dim
              << " bits/dim (" << rep.estimates << " estimates)\n";
  }
  return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& data_path, size_t passes,
             bool exact) {
  ardm::LoadedModel model = load_checkpoint_model(g);
  ardm::Dataset data = ardm::Dataset::load_file(data_path);
  ardm::EvalReport rep = ardm::evaluate(model, data, passes, g.seed, exact);
  std::cout << (exact ? "exact" : "bound") << ": " << std::fixed
            << std::setprecision(6) << rep.mean_bits_per_dim << " +/- "
            << rep.stderr_bits_per_dim << " bits/dim (" << rep.estimates
            << " estimates, EMA parameters)\n";
  return 0;
}

int cmd_sample(const GlobalArgs& g, size_t count, size_t budget,
               const std::string& out_path) {
  ardm::LoadedModel model = load_checkpoint_model(g);
  const ardm::Network<double>& net = *model.net;
  size_t d_count = model.model_config.dims;
  budget = effective_budget(budget, d_count);
  std::vector<ardm::Schedule> plans =
      ardm::plan_stage_schedules(model.ledger, budget);

  ardm::Rng rng(g.seed);
  ardm::Dataset out;
  out.dims = net.config().dims;
  out.num_classes = net.config().num_classes;
  for (size_t n = 0; n < count; ++n) {
    std::vector<uint32_t> x;
    if (model.transitions) {
      x = ardm::upscale_sample(net, *model.transitions, rng, {}, plans);
    } else {
      ardm::Permutation sigma = ardm::sample_permutation(rng, d_count);
      x = ardm::sample_with_schedule(net, sigma, plans[0], rng);
    }
    for (size_t d = 0; d < x.size(); ++d) {
      std::cout << (d ? " " : "") << x[d];
    }
    std::cout << "\n";
    out.records.push_back(std::move(x));
  }
  if (!out_path.empty()) {
    out.save_file(out_path);
    std::cout << count << " samples written to " << out_path << "\n";
  }
  return 0;
}

int cmd_schedule(const GlobalArgs& g, size_t budget,
                 const std::string& out_path) {
  ardm::LoadedModel model = load_checkpoint_model(g);
  size_t d_count = model.model_config.dims;
  budget = effective_budget(budget, d_count);
  std::vector<ardm::Schedule> plans =
      ardm::plan_stage_schedules(model.ledger, budget);

  std::ostringstream table;
  table << "budget " << budget << " of " << d_count << " steps per stage\n";
  double total_bits = 0.0;
  size_t calls = 0;
  for (size_t s = 0; s < plans.size(); ++s) {
    const ardm::Schedule& plan = plans[s];
    table << "stage " << (s + 1) << " widths:";
    for (size_t i = 0; i < plan.steps.size(); ++i) {
      table << " " << plan.width(i);
    }
    table << "\nstage " << (s + 1) << " predicted "
          << std::fixed << std::setprecision(6)
          << plan.total_bits / double(d_count) << " bits/dim over "
          << plan.steps.size() << " network calls\n";
    total_bits += plan.total_bits;
    calls += plan.steps.size();
  }
  table << "total predicted " << std::fixed << std::setprecision(6)
        << total_bits / double(d_count) << " bits/dim, " << calls
        << " network calls\n";
  std::cout << table.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << table.str();
    std::cout << "schedule table written to " << out_path << "\n";
  }
  return 0;
}

int cmd_compress(const GlobalArgs& g, const std::string& in_path,
                 const std::string& out_path, size_t budget,
                 uint16_t precision_bits, size_t order_candidates) {
  ardm::LoadedModel model = load_checkpoint_model(g);
  ardm::Dataset data = ardm::Dataset::load_file(in_path);
  if (data.dims != model.model_config.dims ||
      data.num_classes != model.model_config.num_classes) {
    throw std::runtime_error("dataset shape does not match the model");
  }
  size_t d_count = model.model_config.dims;
  budget = effective_budget(budget, d_count);
  std::vector<ardm::Schedule> plans =
      ardm::plan_stage_schedules(model.ledger, budget);
  ardm::CodecModel cm = codec_model(model, precision_bits);

  ardm::Permutation sigma = ardm::Permutation::identity(d_count);
  if (order_candidates > 0) {
    ardm::Rng rng(g.seed);
    size_t probe = std::min<size_t>(data.records.size(), 16);
    std::vector<std::vector<uint32_t>> batch(data.records.begin(),
                                             data.records.begin() + probe);
    sigma = ardm::select_order(cm, batch, order_candidates, rng);
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  ardm::io::write_le<uint32_t>(out, static_cast<uint32_t>(data.records.size()));
  uint64_t payload_bytes = 0;
  double ideal_bits = 0.0;
  size_t calls = 0;
  for (const auto& record : data.records) {
    ardm::CodecStats stats;
    ardm::CompressedFile f =
        ardm::compress(cm, record, sigma, plans, &stats);
    f.save(out);
    payload_bytes += f.payload.size();
    ideal_bits += stats.ideal_bits;
    calls += stats.net_calls;
  }
  out.flush();
  if (!out) throw std::runtime_error("write to " + out_path + " failed");

  double symbols = double(data.records.size()) * double(d_count);
  std::cout << data.records.size() << " records compressed to " << out_path
            << "\n"
            << "payload " << std::fixed << std::setprecision(6)
            << double(payload_bytes) * 8.0 / symbols
            << " bits/dim, model ideal " << ideal_bits / symbols
            << " bits/dim, " << calls << " network calls ("
            << calls / data.records.size() << " per record)\n";
  return 0;
}

int cmd_decompress(const GlobalArgs& g, const std::string& in_path,
                   const std::string& out_path) {
  ardm::LoadedModel model = load_checkpoint_model(g);
  ardm::CodecModel cm = codec_model(model, 12);

  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  uint32_t count = ardm::io::read_le<uint32_t>(in);
  ardm::Dataset data;
  data.dims = model.model_config.dims;
  data.num_classes = model.model_config.num_classes;
  for (uint32_t n = 0; n < count; ++n) {
    ardm::CompressedFile f = ardm::CompressedFile::load(in);
    data.records.push_back(ardm::decompress(cm, f));
  }
  data.save_file(out_path);
  std::cout << count << " records decompressed to " << out_path << "\n";
  return 0;
}

int cmd_gen_data(const GlobalArgs& g, uint64_t train_count, uint64_t val_count,
                 uint64_t test_count, const std::string& out_prefix) {
  ardm::Config cfg = load_config(g);
  static const std::vector<std::string> keys = {
      "data_kind", "data_dims",       "data_classes", "data_probs",
      "data_flip", "data_image_side", "data_path",    "seed"};
  std::vector<std::string> unknown = cfg.unknown_keys(keys);
  std::erase_if(unknown, [](const std::string& k) {
    return k.rfind("data_row_", 0) == 0;
  });
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }

  ardm::DatasetSpec spec = ardm::DatasetSpec::from_config(cfg);
  uint64_t seed = g.seed_given
                      ? g.seed
                      : static_cast<uint64_t>(cfg.get_int("seed", 0));

  if (spec.kind != ardm::DataKind::raw_bytes_file) {
    std::cout << "entropy rate " << std::fixed << std::setprecision(6)
              << spec.entropy_rate_bits_per_dim() << " bits/dim, per-record "
              << spec.record_entropy_bits_per_dim() << " bits/dim\n";
  }

  const struct {
    const char* name;
    uint64_t count;
    uint64_t seed_offset;
  } splits[] = {{"train", train_count, 0},
                {"val", val_count, 1},
                {"test", test_count, 2}};
  for (const auto& split : splits) {
    if (split.count == 0) continue;
    ardm::Dataset data =
        ardm::generate_dataset(spec, split.count, seed + split.seed_offset);
    std::string path = out_prefix + "." + split.name + ".bin";
    data.save_file(path);
    std::cout << split.name << ": " << split.count << " records, D="
              << data.dims << ", K=" << data.num_classes << " -> " << path
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autoregressive-diffusion toolkit: order-agnostic training, "
               "budgeted parallel generation, and lossless compression"};
  app.require_subcommand(1);

  GlobalArgs g;
  auto* seed_opt =
      app.add_option("--seed", g.seed, "RNG seed (default 0)");
  app.add_option("--config", g.config_path, "flat key=value config file");
  app.add_option("--checkpoint", g.checkpoint_path, "checkpoint file");
  app.add_option("--precision", g.precision, "training arithmetic width")
      ->check(CLI::IsMember({32, 64}));

  auto* train = app.add_subcommand("train", "train a model from --config");
  auto* eval = app.add_subcommand("eval", "estimate bits/dim on a dataset");
  std::string eval_data;
  size_t eval_passes = 1;
  bool eval_exact = false;
  eval->add_option("--data", eval_data, "dataset file")->required();
  eval->add_option("--passes", eval_passes, "dataset passes (default 1)");
  eval->add_flag("--exact", eval_exact, "factorial enumeration, D <= 6 only");

  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  size_t sample_count = 4, sample_budget = 0;
  std::string sample_out;
  sample->add_option("--count", sample_count, "number of samples (default 4)");
  sample->add_option("--budget", sample_budget,
                     "network calls per stage (default D)");
  sample->add_option("--out", sample_out, "also write samples as a dataset");

  auto* schedule =
      app.add_subcommand("schedule", "plan budgeted generation step widths");
  size_t schedule_budget = 0;
  std::string schedule_out;
  schedule->add_option("--budget", schedule_budget,
                       "network calls per stage (default D)");
  schedule->add_option("--out", schedule_out, "write the table to a file");

  auto* compress = app.add_subcommand("compress", "compress a dataset file");
  std::string comp_in, comp_out;
  size_t comp_budget = 0, comp_orders = 0;
  uint16_t comp_bits = 12;
  compress->add_option("--input", comp_in, "dataset file")->required();
  compress->add_option("--output", comp_out, "compressed output")->required();
  compress->add_option("--budget", comp_budget,
                       "network calls per stage (default D)");
  compress->add_option("--precision-bits", comp_bits,
                       "coder table precision (8-16, default 12)");
  compress->add_option("--order-candidates", comp_orders,
                       "pick the best of N random orders (default: identity)");

  auto* decompress =
      app.add_subcommand("decompress", "restore a dataset file");
  std::string dec_in, dec_out;
  decompress->add_option("--input", dec_in, "compressed file")->required();
  decompress->add_option("--output", dec_out, "dataset output")->required();

  auto* gen = app.add_subcommand("gen-data",
                              "generate train/val/test splits from --config");
  uint64_t gen_train = 2000, gen_val = 500, gen_test = 500;
  std::string gen_out;
  gen->add_option("--train-count", gen_train, "train records (default 2000)");
  gen->add_option("--val-count", gen_val, "val records (default 500)");
  gen->add_option("--test-count", gen_test, "test records (default 500)");
  gen->add_option("--out", gen_out, "output path prefix")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  g.seed_given = seed_opt->count() > 0;

  if (*train) return guarded([&] { return cmd_train(g); });
  if (*eval) {
    return guarded([&] { return cmd_eval(g, eval_data, eval_passes, eval_exact); });
  }
  if (*sample) {
    return guarded(
        [&] { return cmd_sample(g, sample_count, sample_budget, sample_out); });
  }
  if (*schedule) {
    return guarded([&] { return cmd_schedule(g, schedule_budget, schedule_out); });
  }
  if (*compress) {
    return guarded([&] {
      return cmd_compress(g, comp_in, comp_out, comp_budget, comp_bits,
                          comp_orders);
    });
  }
  if (*decompress) {
    return guarded([&] { return cmd_decompress(g, dec_in, dec_out); });
  }
  if (*gen) {
    return guarded(
        [&] { return cmd_gen_data(g, gen_train, gen_val, gen_test, gen_out); });
  }
  return 1;
}
