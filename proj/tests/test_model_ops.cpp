#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ardm/backbone.hpp"
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

ModelConfig oa_config(uint32_t dims, uint32_t num_classes) {
  ModelConfig cfg;
  cfg.dims = dims;
  cfg.num_classes = num_classes;
  cfg.embed_width = 3;
  cfg.hidden_width = 5;
  cfg.depth = 1;
  return cfg;
}

// Input-independent head: every forward pass yields exactly these logits.
Network<double> fixed_head_net(uint32_t dims, std::vector<double> logits) {
  ModelConfig cfg = oa_config(dims, static_cast<uint32_t>(logits.size()));
  Network<double> net(cfg);
  const ParamLayout& lay = net.layout();
  for (size_t k = 0; k < logits.size(); ++k) {
    net.store().params[lay.b_out + k] = logits[k];
  }
  return net;
}

std::vector<Permutation> all_permutations(uint32_t dims) {
  std::vector<uint32_t> order(dims);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation::from_order(order));
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

}  // namespace

TEST_CASE("uniform network estimates are the uniform code length everywhere") {
  uint32_t d_count = 4, k_count = 3;
  Network<double> net(oa_config(d_count, k_count));
  Rng rng(1);
  net.init_params(rng);  // zero head: exactly uniform
  std::vector<uint32_t> x{0, 2, 1, 2};
  double lg_k = std::log2(double(k_count));

  for (const Permutation& sigma : all_permutations(d_count)) {
    for (uint32_t t = 1; t <= d_count; ++t) {
      StepAssignment at;
      at.stage = 1;
      at.t = t;
      at.sigma = sigma;
      ElboEstimate est = elbo_step_at(net, nullptr, x, at);
      CHECK(est.l_t_bits == doctest::Approx(lg_k).epsilon(1e-12));
      CHECK(est.value_bits ==
            doctest::Approx(-double(d_count) * lg_k).epsilon(1e-12));
      CHECK(est.ce_bits ==
            doctest::Approx((d_count - t + 1) * lg_k).epsilon(1e-12));
    }
  }
  CHECK(exact_oa_loglik(net, x) ==
        doctest::Approx(-double(d_count) * lg_k).epsilon(1e-12));
}

TEST_CASE("fixed head with known probabilities matches hand arithmetic") {
  // Head logits log(3/4), log(1/4): every conditional is (0.75, 0.25).
  Network<double> net =
      fixed_head_net(2, {std::log(0.75), std::log(0.25)});
  std::vector<uint32_t> x{0, 0};
  double expected = 2.0 * std::log2(0.75);  // -0.8300749985576876

  for (const Permutation& sigma : all_permutations(2)) {
    CHECK(exact_order_loglik(net, x, sigma) ==
          doctest::Approx(expected).epsilon(1e-12));
    for (uint32_t t = 1; t <= 2; ++t) {
      StepAssignment at{1, t, sigma};
      ElboEstimate est = elbo_step_at(net, nullptr, x, at);
      CHECK(est.value_bits == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK(exact_oa_loglik(net, x) == doctest::Approx(expected).epsilon(1e-12));

  std::vector<uint32_t> mixed{0, 1};
  CHECK(exact_oa_loglik(net, mixed) ==
        doctest::Approx(std::log2(0.75) + std::log2(0.25)).epsilon(1e-12));
}

TEST_CASE("last step estimate equals its own cross entropy") {
  Network<double> net(oa_config(5, 4));
  Rng rng(3);
  net.init_params(rng);
  randomize(net, rng);
  std::vector<uint32_t> x{3, 1, 0, 2, 2};
  StepAssignment at;
  at.stage = 1;
  at.t = 5;
  at.sigma = sample_permutation(rng, 5);
  ElboEstimate est = elbo_step_at(net, nullptr, x, at);
  CHECK(est.l_t_bits == est.ce_bits);
  CHECK(est.ce_bits > 0.0);
}

TEST_CASE("order-agnostic estimator is unbiased over the full grid") {
  uint32_t d_count = 3, k_count = 3;
  Network<double> net(oa_config(d_count, k_count));
  Rng rng(7);
  net.init_params(rng);
  randomize(net, rng);

  for (std::vector<uint32_t> x :
       {std::vector<uint32_t>{0, 1, 2}, std::vector<uint32_t>{2, 2, 0}}) {
    double exact = exact_oa_loglik(net, x);
    double mean = 0.0;
    size_t n = 0;
    for (const Permutation& sigma : all_permutations(d_count)) {
      for (uint32_t t = 1; t <= d_count; ++t) {
        StepAssignment at{1, t, sigma};
        mean += elbo_step_at(net, nullptr, x, at).value_bits;
        ++n;
      }
    }
    mean /= double(n);
    CHECK(std::abs(mean - exact) < 1e-9);
  }
}

TEST_CASE("upscale estimator is unbiased over the full grid") {
  uint32_t d_count = 2, k_count = 4;
  TransitionSet ts(k_count, 2);
  REQUIRE(ts.stages() == 2);

  for (Parametrization par : {Parametrization::data, Parametrization::direct}) {
    ModelConfig cfg = oa_config(d_count, k_count);
    cfg.stages = 2;
    cfg.branching = 2;
    cfg.parametrization = par;
    Network<double> net(cfg);
    Rng rng(11);
    net.init_params(rng);
    randomize(net, rng);

    for (std::vector<uint32_t> x :
         {std::vector<uint32_t>{0, 3}, std::vector<uint32_t>{2, 1}}) {
      double exact = upscale_exact_oa_loglik(net, ts, x);
      double mean = 0.0;
      size_t n = 0;
      for (const Permutation& sigma : all_permutations(d_count)) {
        for (uint32_t s = 1; s <= 2; ++s) {
          for (uint32_t t = 1; t <= d_count; ++t) {
            StepAssignment at{s, t, sigma};
            mean += elbo_step_at(net, &ts, x, at).value_bits;
            ++n;
          }
        }
      }
      mean /= double(n);
      CHECK(std::abs(mean - exact) < 1e-9);
    }
  }
}

TEST_CASE("estimator validates its inputs") {
  Network<double> net(oa_config(3, 3));
  Rng rng(13);
  net.init_params(rng);
  std::vector<uint32_t> x{0, 1, 2};
  StepAssignment at{1, 1, Permutation::identity(3)};

  std::vector<uint32_t> short_x{0, 1};
  CHECK_THROWS_AS(elbo_step_at(net, nullptr, short_x, at),
                  std::invalid_argument);
  at.t = 0;
  CHECK_THROWS_AS(elbo_step_at(net, nullptr, x, at), std::out_of_range);
  at.t = 4;
  CHECK_THROWS_AS(elbo_step_at(net, nullptr, x, at), std::out_of_range);
  at.t = 1;
  at.stage = 2;
  CHECK_THROWS_AS(elbo_step_at(net, nullptr, x, at), std::out_of_range);

  ModelConfig staged = oa_config(2, 4);
  staged.stages = 2;
  Network<double> up(staged);
  Rng rng2(14);
  up.init_params(rng2);
  std::vector<uint32_t> x2{0, 1};
  StepAssignment at2{1, 1, Permutation::identity(2)};
  CHECK_THROWS_AS(elbo_step_at(up, nullptr, x2, at2), std::invalid_argument);
}

TEST_CASE("exhaustive order average refuses large dimension counts") {
  Network<double> net(oa_config(7, 2));
  Rng rng(15);
  net.init_params(rng);
  std::vector<uint32_t> x(7, 0);
  CHECK_THROWS_AS(exact_oa_loglik(net, x), std::invalid_argument);
}

TEST_CASE("batch objective matches central differences for every head type") {
  Rng rng(1234);
  struct Setup {
    Parametrization par;
    uint32_t stages;
  };
  for (Setup setup : {Setup{Parametrization::data, 1},
                      Setup{Parametrization::data, 2},
                      Setup{Parametrization::direct, 2}}) {
    uint32_t d_count = 2, k_count = 4;
    TransitionSet ts(k_count, 2);
    ModelConfig cfg = oa_config(d_count, k_count);
    cfg.stages = setup.stages;
    cfg.branching = 2;
    cfg.parametrization = setup.par;
    Network<double> net(cfg);
    net.init_params(rng);
    randomize(net, rng);
    const TransitionSet* ts_ptr = setup.stages > 1 ? &ts : nullptr;

    std::vector<std::vector<uint32_t>> batch{{0, 3}, {2, 1}, {1, 1}};
    std::vector<StepAssignment> assignments;
    for (size_t n = 0; n < batch.size(); ++n) {
      StepAssignment at;
      at.stage = 1 + rng.bounded(setup.stages);
      at.t = 1 + rng.bounded(d_count);
      at.sigma = sample_permutation(rng, d_count);
      assignments.push_back(at);
    }
    double ce_weight = 0.3;

    net.zero_grads();
    LossBreakdown base = loss_and_grad_at(
        net, batch, assignments, ts_ptr, ce_weight, true);
    CHECK(base.loss_bits ==
          doctest::Approx(base.nelbo_bits_per_dim +
                          ce_weight * base.ce_bits_per_dim)
              .epsilon(1e-12));
    CHECK(base.per_example.size() == batch.size());

    double max_rel = 0.0;
    for (int probe = 0; probe < 30; ++probe) {
      size_t i = rng.bounded(net.param_count());
      double saved = net.store().params[i];
      double eps = 1e-6;
      net.store().params[i] = saved + eps;
      double up = loss_and_grad_at(net, batch, assignments, ts_ptr, ce_weight,
                                   false)
                      .loss_bits;
      net.store().params[i] = saved - eps;
      double down = loss_and_grad_at(net, batch, assignments, ts_ptr,
                                     ce_weight, false)
                        .loss_bits;
      net.store().params[i] = saved;
      double numeric = (up - down) / (2 * eps);
      double analytic = net.store().grads[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({1.0, std::abs(analytic), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-5);
  }
}

TEST_CASE("batch objective validates the assignment count") {
  Network<double> net(oa_config(2, 3));
  Rng rng(19);
  net.init_params(rng);
  std::vector<std::vector<uint32_t>> batch{{0, 1}, {1, 2}};
  std::vector<StepAssignment> one{{1, 1, Permutation::identity(2)}};
  CHECK_THROWS_AS(loss_and_grad_at(net, batch, one, nullptr, 0.0, false),
                  std::invalid_argument);
}

TEST_CASE("point-mass head samples a constant") {
  Network<double> net = fixed_head_net(4, {50.0, -50.0, -50.0});
  Rng rng(21);
  std::vector<uint32_t> x = sample(net, rng);
  CHECK(x == std::vector<uint32_t>(4, 0));
}

TEST_CASE("full-budget schedule reproduces sequential sampling") {
  ModelConfig cfg = oa_config(4, 3);
  Network<double> net(cfg);
  Rng init(23);
  net.init_params(init);
  randomize(net, init);

  Permutation sigma = Permutation::from_order(std::vector<uint32_t>{2, 0, 3, 1});
  Schedule full;
  full.steps = {1, 2, 3, 4};
  Rng r1(5), r2(5);
  std::vector<uint32_t> a = sample(net, r1, &sigma);
  std::vector<uint32_t> b = sample_with_schedule(net, sigma, full, r2);
  CHECK(a == b);

  Rng r3(5);
  std::vector<uint32_t> c = sample_with_schedule(net, sigma, full, r3);
  CHECK(b == c);
}

TEST_CASE("parallel steps fill exactly the scheduled ranks") {
  // Input-independent biased head; the sample distribution is the same for
  // any schedule, and every dimension must land in the alphabet.
  Network<double> net = fixed_head_net(6, {1.0, 0.0, -1.0});
  Rng order_rng(3);
  Permutation sigma = sample_permutation(order_rng, 6);
  Schedule two;
  two.steps = {2, 6};
  Rng rng(9);
  std::vector<uint32_t> x = sample_with_schedule(net, sigma, two, rng);
  CHECK(x.size() == 6);
  for (uint32_t v : x) CHECK(v < 3);
}

TEST_CASE("samplers validate schedules and orders") {
  Network<double> net(oa_config(3, 3));
  Rng rng(27);
  net.init_params(rng);
  Permutation sigma = Permutation::identity(3);

  Schedule bad_end;
  bad_end.steps = {1, 2};
  CHECK_THROWS_AS(sample_with_schedule(net, sigma, bad_end, rng),
                  std::invalid_argument);
  Schedule empty;
  CHECK_THROWS_AS(sample_with_schedule(net, sigma, empty, rng),
                  std::invalid_argument);
  Permutation wrong = Permutation::identity(4);
  Schedule full;
  full.steps = {1, 2, 3};
  CHECK_THROWS_AS(sample_with_schedule(net, wrong, full, rng),
                  std::invalid_argument);

  ModelConfig staged = oa_config(2, 4);
  staged.stages = 2;
  Network<double> up(staged);
  Rng rng2(28);
  up.init_params(rng2);
  Schedule full2;
  full2.steps = {1, 2};
  CHECK_THROWS_AS(sample_with_schedule(up, Permutation::identity(2), full2, rng2),
                  std::invalid_argument);
}

TEST_CASE("upscale sampling yields valid symbols and is seed deterministic") {
  uint32_t k_count = 8;
  TransitionSet ts(k_count, 2);
  ModelConfig cfg = oa_config(4, k_count);
  cfg.stages = ts.stages();
  cfg.branching = 2;
  Network<double> net(cfg);
  Rng init(31);
  net.init_params(init);
  randomize(net, init);

  Rng r1(7), r2(7), r3(8);
  std::vector<uint32_t> a = upscale_sample(net, ts, r1);
  std::vector<uint32_t> b = upscale_sample(net, ts, r2);
  std::vector<uint32_t> c = upscale_sample(net, ts, r3);
  CHECK(a == b);
  CHECK(a.size() == 4);
  for (uint32_t v : a) CHECK(v < k_count);
  CHECK((a != c || upscale_sample(net, ts, r3) != c));

  std::vector<Permutation> sigmas{Permutation::identity(4)};
  CHECK_THROWS_AS(upscale_sample(net, ts, r1, sigmas), std::invalid_argument);
}

TEST_CASE("conditional distributions follow the head and stage structure") {
  ModelConfig cfg = oa_config(2, 4);
  std::vector<double> row{std::log(0.1), std::log(0.2), std::log(0.3),
                          std::log(0.4)};

  Conditional plain = conditional_distribution(cfg, nullptr, row, 1, 0);
  CHECK(plain.values == std::vector<uint32_t>{0, 1, 2, 3});
  CHECK(plain.probs[2] == doctest::Approx(0.3).epsilon(1e-12));

  TransitionSet ts(4, 2);
  cfg.stages = 2;
  Conditional staged = conditional_distribution(cfg, &ts, row, 2, 2);
  CHECK(staged.probs[0] == doctest::Approx(0.0));
  CHECK(staged.probs[2] == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
  CHECK(staged.probs[3] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));

  cfg.parametrization = Parametrization::direct;
  std::vector<double> branch_row{0.0, 0.0, 99.0, 99.0};
  Conditional direct = conditional_distribution(cfg, &ts, branch_row, 2, 2);
  CHECK(direct.values == std::vector<uint32_t>{2, 3});
  CHECK(direct.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("exact likelihood is order independent for an input-independent net") {
  Network<double> net = fixed_head_net(4, {0.3, -0.2, 0.1});
  std::vector<uint32_t> x{2, 0, 1, 1};
  Rng rng(35);
  double first = exact_order_loglik(net, x, sample_permutation(rng, 4));
  for (int i = 0; i < 5; ++i) {
    double again = exact_order_loglik(net, x, sample_permutation(rng, 4));
    CHECK(again == doctest::Approx(first).epsilon(1e-12));
  }
}
