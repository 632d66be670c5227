#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/codec.hpp"
#include "ardm/model_ops.hpp"
#include "ardm/ordering.hpp"
#include "ardm/rng.hpp"
#include "ardm/scheduler.hpp"
#include "ardm/transitions.hpp"

using namespace ardm;

namespace {

template <typename T>
void randomize(Network<T>& net, Rng& rng, double scale = 0.4) {
  for (T& v : net.store().params) {
    v = static_cast<T>(rng.normal() * scale);
  }
}

Network<double> oa_net(uint32_t dims, uint32_t num_classes, uint64_t seed) {
  ModelConfig cfg;
  cfg.dims = dims;
  cfg.num_classes = num_classes;
  cfg.embed_width = 3;
  cfg.hidden_width = 5;
  cfg.depth = 1;
  Network<double> net(cfg);
  Rng rng(seed);
  net.init_params(rng);
  randomize(net, rng);
  return net;
}

Network<double> upscale_net(uint32_t dims, uint32_t num_classes,
                            uint32_t branching, Parametrization par,
                            uint64_t seed) {
  TransitionSet ts(num_classes, branching);
  ModelConfig cfg;
  cfg.dims = dims;
  cfg.num_classes = num_classes;
  cfg.stages = ts.stages();
  cfg.branching = branching;
  cfg.embed_width = 3;
  cfg.hidden_width = 5;
  cfg.depth = 1;
  cfg.parametrization = par;
  Network<double> net(cfg);
  Rng rng(seed);
  net.init_params(rng);
  randomize(net, rng);
  return net;
}

// Evenly spaced k-step plan over D dimensions, ending at D.
Schedule even_schedule(uint32_t dims, uint32_t budget) {
  Schedule plan;
  for (uint32_t i = 1; i <= budget; ++i) {
    plan.steps.push_back(i * dims / budget);
  }
  plan.steps.back() = dims;
  return plan;
}

std::vector<Schedule> per_stage(const Schedule& plan, uint32_t stages) {
  return std::vector<Schedule>(stages, plan);
}

}  // namespace

TEST_CASE("single-stage coding is lossless across budgets") {
  uint32_t d_count = 6, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 101);
  CodecModel model{&net, nullptr, 0x1234, 12};

  Rng rng(55);
  for (uint32_t budget : {1u, 2u, 6u}) {
    std::vector<Schedule> plan{even_schedule(d_count, budget)};
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<uint32_t> x(d_count);
      for (uint32_t& v : x) v = rng.bounded(k_count);
      Permutation sigma = sample_permutation(rng, d_count);
      CompressedFile file = compress(model, x, sigma, plan);
      std::vector<uint32_t> back = decompress(model, file);
      CHECK(back == x);
    }
  }
}

TEST_CASE("upscale coding is lossless for both head types") {
  uint32_t d_count = 4, k_count = 8, branching = 2;
  Rng rng(77);
  for (Parametrization par : {Parametrization::data, Parametrization::direct}) {
    Network<double> net = upscale_net(d_count, k_count, branching, par, 202);
    TransitionSet ts(k_count, branching);
    CodecModel model{&net, &ts, 0x77, 12};

    for (uint32_t budget : {1u, 2u, 4u}) {
      std::vector<Schedule> plan =
          per_stage(even_schedule(d_count, budget), ts.stages());
      for (int trial = 0; trial < 15; ++trial) {
        std::vector<uint32_t> x(d_count);
        for (uint32_t& v : x) v = rng.bounded(k_count);
        Permutation sigma = sample_permutation(rng, d_count);
        CompressedFile file = compress(model, x, sigma, plan);
        std::vector<uint32_t> back = decompress(model, file);
        CHECK(back == x);
      }
    }
  }
}

TEST_CASE("sequential ideal bits equal the exact chain likelihood") {
  uint32_t d_count = 5, k_count = 4;
  Network<double> net = oa_net(d_count, k_count, 303);
  CodecModel model{&net, nullptr, 1, 12};
  Rng rng(9);
  std::vector<uint32_t> x{3, 0, 2, 1, 1};
  Permutation sigma = sample_permutation(rng, d_count);
  std::vector<Schedule> plan{even_schedule(d_count, d_count)};

  CodecStats stats;
  compress(model, x, sigma, plan, &stats);
  CHECK(std::abs(stats.ideal_bits + exact_order_loglik(net, x, sigma)) < 1e-9);

  Network<double> up = upscale_net(4, 8, 2, Parametrization::data, 404);
  TransitionSet ts(8, 2);
  CodecModel umodel{&up, &ts, 2, 12};
  std::vector<uint32_t> ux{7, 0, 3, 5};
  Permutation usigma = sample_permutation(rng, 4);
  std::vector<Schedule> uplan = per_stage(even_schedule(4, 4), ts.stages());
  CodecStats ustats;
  compress(umodel, ux, usigma, uplan, &ustats);
  CHECK(std::abs(ustats.ideal_bits +
                 upscale_exact_order_loglik(up, ts, ux, usigma)) < 1e-9);
}

TEST_CASE("payload length stays near the ideal") {
  uint32_t d_count = 12, k_count = 4;
  Network<double> net = oa_net(d_count, k_count, 505);
  CodecModel model{&net, nullptr, 3, 12};
  Rng rng(21);
  std::vector<Schedule> plan{even_schedule(d_count, 3)};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<uint32_t> x(d_count);
    for (uint32_t& v : x) v = rng.bounded(k_count);
    Permutation sigma = sample_permutation(rng, d_count);
    CodecStats stats;
    CompressedFile file = compress(model, x, sigma, plan, &stats);
    double payload_bits = 8.0 * double(file.payload.size());
    // Quantization shifts each symbol by a hair; the flush adds 32 bits and
    // byte renormalization rounds up.
    CHECK(payload_bits >= stats.ideal_bits - 0.05 * d_count - 8.0);
    CHECK(payload_bits <= stats.ideal_bits + 0.05 * d_count + 40.0);
  }
}

TEST_CASE("network call count follows the schedule budget") {
  uint32_t d_count = 8, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 606);
  CodecModel model{&net, nullptr, 4, 12};
  Rng rng(31);
  std::vector<uint32_t> x(d_count);
  for (uint32_t& v : x) v = rng.bounded(k_count);
  Permutation sigma = sample_permutation(rng, d_count);

  for (uint32_t budget : {1u, 3u, 8u}) {
    std::vector<Schedule> plan{even_schedule(d_count, budget)};
    CodecStats enc_stats, dec_stats;
    CompressedFile file = compress(model, x, sigma, plan, &enc_stats);
    decompress(model, file, &dec_stats);
    CHECK(enc_stats.net_calls == budget);
    CHECK(dec_stats.net_calls == budget);
  }

  Network<double> up = upscale_net(4, 8, 2, Parametrization::data, 707);
  TransitionSet ts(8, 2);
  CodecModel umodel{&up, &ts, 5, 12};
  std::vector<uint32_t> ux{1, 6, 2, 7};
  Permutation usigma = sample_permutation(rng, 4);
  std::vector<Schedule> uplan = per_stage(even_schedule(4, 2), ts.stages());
  CodecStats ustats;
  compress(umodel, ux, usigma, uplan, &ustats);
  CHECK(ustats.net_calls == size_t(2) * ts.stages());
}

TEST_CASE("compression is deterministic") {
  uint32_t d_count = 6, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 808);
  CodecModel model{&net, nullptr, 6, 12};
  std::vector<uint32_t> x{0, 2, 1, 1, 0, 2};
  Permutation sigma = Permutation::from_order(std::vector<uint32_t>{3, 1, 5, 0, 2, 4});
  std::vector<Schedule> plan{even_schedule(d_count, 2)};
  CompressedFile a = compress(model, x, sigma, plan);
  CompressedFile b = compress(model, x, sigma, plan);
  CHECK(a.payload == b.payload);
  std::ostringstream sa, sb;
  a.save(sa);
  b.save(sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("compressed file header round trips") {
  CompressedFile file;
  file.dims = 6;
  file.num_classes = 8;
  file.branching = 2;
  file.stages = 3;
  file.precision_bits = 14;
  file.model_hash = 0xdeadbeefcafe1234ull;
  file.schedule_steps = {3, 6, 6, 2, 4, 6};  // blocks split at each 6
  file.ranks = {1, 3, 2, 6, 5, 4};
  file.payload = {0x01, 0x02, 0x03};

  std::ostringstream os;
  file.save(os);
  std::istringstream is(os.str());
  CompressedFile back = CompressedFile::load(is);
  CHECK(back.dims == file.dims);
  CHECK(back.num_classes == file.num_classes);
  CHECK(back.branching == file.branching);
  CHECK(back.stages == file.stages);
  CHECK(back.precision_bits == file.precision_bits);
  CHECK(back.model_hash == file.model_hash);
  CHECK(back.schedule_steps == file.schedule_steps);
  CHECK(back.ranks == file.ranks);
  CHECK(back.payload == file.payload);

  std::vector<Schedule> plans = back.stage_schedules();
  REQUIRE(plans.size() == 3);
  CHECK(plans[0].steps == std::vector<uint32_t>{3, 6});
  CHECK(plans[1].steps == std::vector<uint32_t>{6});
  CHECK(plans[2].steps == std::vector<uint32_t>{2, 4, 6});

  std::string bytes = os.str();
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  CHECK_THROWS_AS(CompressedFile::load(bad), std::runtime_error);

  CompressedFile mismatched = file;
  mismatched.stages = 4;  // blocks no longer split into this many stages
  CHECK_THROWS_AS(mismatched.stage_schedules(), std::runtime_error);
}

TEST_CASE("decoder refuses the wrong model or tampered headers") {
  uint32_t d_count = 4, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 909);
  CodecModel model{&net, nullptr, 0xaa, 12};
  std::vector<uint32_t> x{0, 1, 2, 1};
  Permutation sigma = Permutation::identity(d_count);
  std::vector<Schedule> plan{even_schedule(d_count, 2)};
  CompressedFile file = compress(model, x, sigma, plan);

  CompressedFile wrong_hash = file;
  wrong_hash.model_hash ^= 1;
  CHECK_THROWS_WITH_AS(decompress(model, wrong_hash),
                       "model hash mismatch: refusing to decode",
                       std::runtime_error);

  CompressedFile wrong_dims = file;
  wrong_dims.dims = 5;
  CHECK_THROWS_AS(decompress(model, wrong_dims), std::runtime_error);

  CompressedFile wrong_precision = file;
  wrong_precision.precision_bits = 10;
  CHECK_THROWS_AS(decompress(model, wrong_precision), std::runtime_error);

  CompressedFile bad_ranks = file;
  bad_ranks.ranks.assign(d_count, 1);
  CHECK_THROWS_AS(decompress(model, bad_ranks), std::runtime_error);

  CompressedFile bad_plan = file;
  bad_plan.schedule_steps = {2, 3};  // does not end at D
  CHECK_THROWS_AS(decompress(model, bad_plan), std::exception);
}

TEST_CASE("codec model validation") {
  uint32_t d_count = 4, k_count = 8;
  Network<double> up = upscale_net(d_count, k_count, 2, Parametrization::data, 111);
  TransitionSet right(8, 2), wrong(8, 4);
  std::vector<uint32_t> x{0, 1, 2, 3};
  Permutation sigma = Permutation::identity(d_count);
  std::vector<Schedule> plan = per_stage(even_schedule(d_count, 1), right.stages());

  CodecModel no_net{nullptr, &right, 0, 12};
  CHECK_THROWS_AS(compress(no_net, x, sigma, plan), std::invalid_argument);
  CodecModel no_ts{&up, nullptr, 0, 12};
  CHECK_THROWS_AS(compress(no_ts, x, sigma, plan), std::invalid_argument);
  CodecModel bad_ts{&up, &wrong, 0, 12};
  CHECK_THROWS_AS(compress(bad_ts, x, sigma, plan), std::invalid_argument);

  CodecModel ok{&up, &right, 0, 12};
  std::vector<uint32_t> short_x{0, 1};
  CHECK_THROWS_AS(compress(ok, short_x, sigma, plan), std::invalid_argument);
  std::vector<Schedule> missing = {plan[0]};
  CHECK_THROWS_AS(compress(ok, x, sigma, missing), std::invalid_argument);
  std::vector<uint32_t> big{0, 1, 2, 99};
  CHECK_THROWS_AS(compress(ok, big, sigma, plan), std::invalid_argument);
}

TEST_CASE("shared-stream dataset coding round trips and amortizes the flush") {
  uint32_t d_count = 6, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 121);
  CodecModel model{&net, nullptr, 7, 12};
  Rng rng(41);
  std::vector<std::vector<uint32_t>> records;
  for (int n = 0; n < 40; ++n) {
    std::vector<uint32_t> x(d_count);
    for (uint32_t& v : x) v = rng.bounded(k_count);
    records.push_back(x);
  }
  Permutation sigma = sample_permutation(rng, d_count);
  std::vector<Schedule> plan{even_schedule(d_count, 2)};

  DatasetCodingResult result = compress_dataset(model, records, sigma, plan);
  CHECK(result.symbols == records.size() * d_count);

  std::vector<std::vector<uint32_t>> back =
      decompress_dataset(model, result.payload, records.size(), sigma, plan);
  CHECK(back == records);

  // One shared flush against forty per-record flushes.
  double individual = 0.0;
  double ideal_sum = 0.0;
  for (const auto& x : records) {
    CodecStats stats;
    CompressedFile file = compress(model, x, sigma, plan, &stats);
    individual += double(file.payload.size());
    ideal_sum += stats.ideal_bits;
  }
  CHECK(result.ideal_bits == doctest::Approx(ideal_sum).epsilon(1e-9));
  CHECK(8.0 * double(result.payload.size()) <
        8.0 * individual - 30.0 * 32.0);
}

TEST_CASE("order selection keeps the first of tied candidates") {
  // Input-independent model: every order scores identically.
  ModelConfig cfg;
  cfg.dims = 5;
  cfg.num_classes = 2;
  cfg.embed_width = 2;
  cfg.hidden_width = 3;
  cfg.depth = 1;
  Network<double> net(cfg);  // all-zero parameters: uniform everywhere
  CodecModel model{&net, nullptr, 8, 12};

  std::vector<std::vector<uint32_t>> batch{{0, 1, 0, 1, 1}, {1, 1, 0, 0, 0}};
  Rng r1(99);
  std::vector<OrderCandidate> cands = score_orders(model, batch, 4, r1);
  REQUIRE(cands.size() == 4);
  for (const OrderCandidate& cand : cands) {
    CHECK(cand.mean_bits_per_dim == doctest::Approx(1.0).epsilon(1e-12));
  }
  Rng r2(99);
  Permutation chosen = select_order(model, batch, 4, r2);
  CHECK(chosen.ranks == cands[0].sigma.ranks);

  Rng r3(99);
  CHECK_THROWS_AS(select_order(model, batch, 0, r3), std::invalid_argument);
  std::vector<std::vector<uint32_t>> empty;
  CHECK_THROWS_AS(select_order(model, empty, 2, r3), std::invalid_argument);
}

TEST_CASE("compressed file disk round trip") {
  uint32_t d_count = 4, k_count = 3;
  Network<double> net = oa_net(d_count, k_count, 131);
  CodecModel model{&net, nullptr, 9, 12};
  std::vector<uint32_t> x{2, 0, 1, 2};
  Permutation sigma = Permutation::identity(d_count);
  std::vector<Schedule> plan{even_schedule(d_count, 4)};
  CompressedFile file = compress(model, x, sigma, plan);

  std::string path = "/tmp/ardm_codec_test.ardc";
  file.save_file(path);
  CompressedFile back = CompressedFile::load_file(path);
  CHECK(decompress(model, back) == x);
  std::remove(path.c_str());
  CHECK_THROWS_AS(CompressedFile::load_file("/nonexistent/file.ardc"),
                  std::runtime_error);
}
