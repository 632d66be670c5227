#include "ardm/codec.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ardm/model_ops.hpp"
#include "ardm/rans.hpp"
#include "ardm/serialize.hpp"

namespace ardm {

namespace {

void validate_model(const CodecModel& model) {
  if (!model.net) throw std::invalid_argument("codec needs a network");
  const ModelConfig& cfg = model.net->config();
  if (cfg.stages > 1 && !model.transitions) {
    throw std::invalid_argument("multi-stage codec needs a transition set");
  }
  if (model.transitions &&
      (model.transitions->num_classes() != cfg.num_classes ||
       model.transitions->stages() != cfg.stages)) {
    throw std::invalid_argument("transition set does not match the model");
  }
}

void validate_schedules(std::span<const Schedule> plans, uint32_t stages,
                        uint32_t dims) {
  if (plans.size() != stages) {
    throw std::invalid_argument("need one schedule per stage");
  }
  for (const Schedule& plan : plans) {
    if (plan.steps.empty() || plan.steps.back() != dims) {
      throw std::invalid_argument("schedule must end at the last dimension");
    }
    uint32_t prev = 0;
    for (uint32_t s : plan.steps) {
      if (s <= prev || s > dims) {
        throw std::invalid_argument("schedule positions must increase");
      }
      prev = s;
    }
  }
}

// Shared generation walk for coding. At each schedule step it runs the
// network once and visits the step's dimensions in rank order, handing each
// dimension's conditional to the callback, which returns the class value to
// commit (the true one when encoding, the decoded one when decoding).
template <typename Visit>
void coding_walk(const CodecModel& model, const Permutation& sigma,
                 std::span<const Schedule> plans, CodecStats* stats,
                 Visit&& visit) {
  const Network<double>& net = *model.net;
  const ModelConfig& cfg = net.config();
  const TransitionSet* ts = model.transitions;
  uint32_t d_count = cfg.dims;
  size_t o = cfg.output_width();
  std::vector<uint32_t> order = sigma.to_order();

  std::vector<uint32_t> cur(d_count, 0);
  if (cfg.stages > 1) {
    // Stage-0 values are the absorbing state, which is 0 for every class.
    cur.assign(d_count, 0);
  }
  for (uint32_t s = 1; s <= cfg.stages; ++s) {
    const Schedule& plan = plans[s - 1];
    uint32_t prev = 0;
    for (uint32_t next : plan.steps) {
      Mask m = mask_lt(sigma, prev + 1);
      std::vector<uint32_t> input = cur;
      if (cfg.stages == 1) {
        // Ungenerated dimensions are absorbed to 0.
        for (uint32_t d = 0; d < d_count; ++d) {
          if (!m.bits[d]) input[d] = 0;
        }
      }
      std::vector<double> logits = net.forward(input, m.bits, s, prev + 1);
      if (stats) stats->net_calls += 1;
      for (uint32_t rank = prev + 1; rank <= next; ++rank) {
        uint32_t d = order[rank - 1];
        std::vector<double> row = detail::logits_row<double>(logits, d, o);
        Conditional cond =
            conditional_distribution(cfg, ts, row, s, cur[d]);
        cur[d] = visit(s, d, cond, stats);
      }
      prev = next;
    }
  }
}

uint32_t symbol_of_value(const Conditional& cond, uint32_t value) {
  for (size_t i = 0; i < cond.values.size(); ++i) {
    if (cond.values[i] == value) return static_cast<uint32_t>(i);
  }
  throw std::logic_error("value not reachable from the current stage");
}

void check_header_against_model(const CodecModel& model,
                                const CompressedFile& file) {
  const ModelConfig& cfg = model.net->config();
  if (file.model_hash != model.model_hash) {
    throw std::runtime_error("model hash mismatch: refusing to decode");
  }
  if (file.dims != cfg.dims || file.num_classes != cfg.num_classes ||
      file.stages != cfg.stages ||
      (cfg.stages > 1 && file.branching != cfg.branching)) {
    throw std::runtime_error("compressed header does not match the model");
  }
  if (file.precision_bits != model.precision_bits) {
    throw std::runtime_error("precision mismatch between file and codec");
  }
}

}  // namespace

void CompressedFile::save(std::ostream& os) const {
  io::write_magic(os, "ARDC");
  io::write_le<uint16_t>(os, kVersion);
  io::write_le<uint32_t>(os, dims);
  io::write_le<uint32_t>(os, num_classes);
  io::write_le<uint16_t>(os, branching);
  io::write_le<uint16_t>(os, stages);
  io::write_le<uint16_t>(os, precision_bits);
  io::write_le<uint64_t>(os, model_hash);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(schedule_steps.size()));
  for (uint32_t s : schedule_steps) io::write_le<uint32_t>(os, s);
  if (ranks.size() != dims) {
    throw std::logic_error("rank array does not match dims");
  }
  for (uint32_t r : ranks) io::write_le<uint32_t>(os, r);
  io::write_le<uint64_t>(os, payload.size());
  io::put_bytes(os, payload.data(), payload.size());
}

CompressedFile CompressedFile::load(std::istream& is) {
  io::check_magic(is, "ARDC", "compressed file");
  uint16_t version = io::read_le<uint16_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported compressed-file version " +
                             std::to_string(version));
  }
  CompressedFile f;
  f.dims = io::read_le<uint32_t>(is);
  f.num_classes = io::read_le<uint32_t>(is);
  f.branching = io::read_le<uint16_t>(is);
  f.stages = io::read_le<uint16_t>(is);
  f.precision_bits = io::read_le<uint16_t>(is);
  f.model_hash = io::read_le<uint64_t>(is);
  uint32_t budget = io::read_le<uint32_t>(is);
  f.schedule_steps.resize(budget);
  for (uint32_t& s : f.schedule_steps) s = io::read_le<uint32_t>(is);
  f.ranks.resize(f.dims);
  for (uint32_t& r : f.ranks) r = io::read_le<uint32_t>(is);
  uint64_t len = io::read_le<uint64_t>(is);
  f.payload.resize(len);
  if (len > 0) io::get_bytes(is, f.payload.data(), len);
  return f;
}

void CompressedFile::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write compressed file " + path);
  save(out);
}

CompressedFile CompressedFile::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open compressed file " + path);
  return load(in);
}

std::vector<Schedule> CompressedFile::stage_schedules() const {
  std::vector<Schedule> out;
  Schedule cur;
  for (uint32_t s : schedule_steps) {
    cur.steps.push_back(s);
    if (s == dims) {
      out.push_back(std::move(cur));
      cur = Schedule{};
    }
  }
  if (!cur.steps.empty() || out.size() != stages) {
    throw std::runtime_error("schedule blocks do not match the stage count");
  }
  return out;
}

CompressedFile compress(const CodecModel& model, std::span<const uint32_t> x,
                        const Permutation& sigma,
                        std::span<const Schedule> stage_schedules,
                        CodecStats* stats) {
  validate_model(model);
  const ModelConfig& cfg = model.net->config();
  validate_schedules(stage_schedules, cfg.stages, cfg.dims);
  if (x.size() != cfg.dims) {
    throw std::invalid_argument("input length does not match the model");
  }
  if (sigma.dims() != cfg.dims || !sigma.valid()) {
    throw std::invalid_argument("invalid permutation");
  }
  for (uint32_t v : x) {
    if (v >= cfg.num_classes) {
      throw std::invalid_argument("class value out of range");
    }
  }

  // Stage-s target values of every dimension, looked up during the walk.
  std::vector<std::vector<uint32_t>> targets;
  for (uint32_t s = 1; s <= cfg.stages; ++s) {
    targets.push_back(cfg.stages == 1
                          ? std::vector<uint32_t>(x.begin(), x.end())
                          : model.transitions->downscale(x, s));
  }

  RansEncoder enc;
  coding_walk(model, sigma, stage_schedules, stats,
              [&](uint32_t s, uint32_t d, const Conditional& cond,
                  CodecStats* st) -> uint32_t {
                uint32_t value = targets[s - 1][d];
                uint32_t symbol = symbol_of_value(cond, value);
                if (st) st->ideal_bits -= std::log2(cond.probs[symbol]);
                enc.put(symbol, quantize(cond.probs, model.precision_bits));
                return value;
              });

  CompressedFile file;
  file.dims = cfg.dims;
  file.num_classes = cfg.num_classes;
  file.branching = static_cast<uint16_t>(cfg.stages > 1 ? cfg.branching : 0);
  file.stages = static_cast<uint16_t>(cfg.stages);
  file.precision_bits = model.precision_bits;
  file.model_hash = model.model_hash;
  for (const Schedule& plan : stage_schedules) {
    file.schedule_steps.insert(file.schedule_steps.end(), plan.steps.begin(),
                               plan.steps.end());
  }
  file.ranks = sigma.ranks;
  file.payload = enc.finish();
  return file;
}

std::vector<uint32_t> decompress(const CodecModel& model,
                                 const CompressedFile& file,
                                 CodecStats* stats) {
  validate_model(model);
  check_header_against_model(model, file);
  std::vector<Schedule> plans = file.stage_schedules();
  Permutation sigma;
  sigma.ranks = file.ranks;
  if (!sigma.valid()) throw std::runtime_error("header permutation invalid");

  RansDecoder dec(file.payload);
  std::vector<uint32_t> result(file.dims, 0);
  coding_walk(model, sigma, plans, stats,
              [&](uint32_t s, uint32_t d, const Conditional& cond,
                  CodecStats* st) -> uint32_t {
                uint32_t symbol = dec.get(quantize(cond.probs, model.precision_bits));
                if (st) st->ideal_bits -= std::log2(cond.probs[symbol]);
                uint32_t value = cond.values[symbol];
                if (s == model.net->config().stages) result[d] = value;
                return value;
              });
  dec.finish();
  return result;
}

DatasetCodingResult compress_dataset(
    const CodecModel& model, std::span<const std::vector<uint32_t>> records,
    const Permutation& sigma, std::span<const Schedule> stage_schedules) {
  validate_model(model);
  const ModelConfig& cfg = model.net->config();
  validate_schedules(stage_schedules, cfg.stages, cfg.dims);

  DatasetCodingResult out;
  RansEncoder enc;
  CodecStats stats;
  for (const std::vector<uint32_t>& x : records) {
    std::vector<std::vector<uint32_t>> targets;
    for (uint32_t s = 1; s <= cfg.stages; ++s) {
      targets.push_back(cfg.stages == 1
                            ? x
                            : model.transitions->downscale(x, s));
    }
    coding_walk(model, sigma, stage_schedules, &stats,
                [&](uint32_t s, uint32_t d, const Conditional& cond,
                    CodecStats* st) -> uint32_t {
                  uint32_t value = targets[s - 1][d];
                  uint32_t symbol = symbol_of_value(cond, value);
                  st->ideal_bits -= std::log2(cond.probs[symbol]);
                  enc.put(symbol, quantize(cond.probs, model.precision_bits));
                  out.symbols += 1;
                  return value;
                });
  }
  out.payload = enc.finish();
  out.ideal_bits = stats.ideal_bits;
  return out;
}

std::vector<std::vector<uint32_t>> decompress_dataset(
    const CodecModel& model, std::span<const uint8_t> payload, size_t count,
    const Permutation& sigma, std::span<const Schedule> stage_schedules) {
  validate_model(model);
  const ModelConfig& cfg = model.net->config();
  validate_schedules(stage_schedules, cfg.stages, cfg.dims);

  RansDecoder dec(payload);
  std::vector<std::vector<uint32_t>> out;
  for (size_t n = 0; n < count; ++n) {
    std::vector<uint32_t> rec(cfg.dims, 0);
    coding_walk(model, sigma, stage_schedules, nullptr,
                [&](uint32_t s, uint32_t d, const Conditional& cond,
                    CodecStats*) -> uint32_t {
                  uint32_t symbol =
                      dec.get(quantize(cond.probs, model.precision_bits));
                  uint32_t value = cond.values[symbol];
                  if (s == cfg.stages) rec[d] = value;
                  return value;
                });
    out.push_back(std::move(rec));
  }
  dec.finish();
  return out;
}

std::vector<OrderCandidate> score_orders(
    const CodecModel& model, std::span<const std::vector<uint32_t>> batch,
    size_t n_candidates, Rng& rng) {
  validate_model(model);
  if (n_candidates == 0) {
    throw std::invalid_argument("need at least one candidate order");
  }
  if (batch.empty()) throw std::invalid_argument("empty scoring batch");
  const ModelConfig& cfg = model.net->config();

  std::vector<OrderCandidate> out;
  for (size_t c = 0; c < n_candidates; ++c) {
    OrderCandidate cand;
    cand.sigma = sample_permutation(rng, cfg.dims);
    double total_bits = 0.0;
    for (const std::vector<uint32_t>& x : batch) {
      total_bits -= cfg.stages == 1
                        ? exact_order_loglik(*model.net, x, cand.sigma)
                        : upscale_exact_order_loglik(
                              *model.net, *model.transitions, x, cand.sigma);
    }
    cand.mean_bits_per_dim = total_bits / double(batch.size()) / cfg.dims;
    out.push_back(std::move(cand));
  }
  return out;
}

Permutation select_order(const CodecModel& model,
                         std::span<const std::vector<uint32_t>> batch,
                         size_t n_candidates, Rng& rng) {
  std::vector<OrderCandidate> cands = score_orders(model, batch, n_candidates, rng);
  size_t best = 0;
  for (size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].mean_bits_per_dim < cands[best].mean_bits_per_dim) best = i;
  }
  return cands[best].sigma;
}

}  // namespace ardm
