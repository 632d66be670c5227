#include <doctest.h>

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/checkpoint.hpp"
#include "ardm/ledger.hpp"
#include "ardm/rng.hpp"

using namespace ardm;

namespace {

Checkpoint sample_checkpoint() {
  ModelConfig cfg;
  cfg.dims = 3;
  cfg.num_classes = 4;
  cfg.embed_width = 3;
  cfg.hidden_width = 4;
  cfg.depth = 1;
  Network<double> net(cfg);
  Rng rng(5);
  net.init_params(rng);
  net.store().step = 17;

  LossLedger ledger(1, 3, 0.9);
  ledger.update(1, 1, 2.0);
  ledger.update(1, 2, 1.5);
  ledger.update(1, 3, 1.0);
  return make_checkpoint(net, "mode = oa\nsteps = 17\n", ledger, 0xabcdef12ull);
}

}  // namespace

TEST_CASE("checkpoint stream round trip is byte identical") {
  Checkpoint ckpt = sample_checkpoint();
  std::ostringstream first;
  ckpt.save(first);

  std::istringstream in(first.str());
  Checkpoint back = Checkpoint::load(in);
  CHECK(back.config_text == ckpt.config_text);
  CHECK(back.params == ckpt.params);
  CHECK(back.ema == ckpt.ema);
  CHECK(back.adam_m == ckpt.adam_m);
  CHECK(back.adam_v == ckpt.adam_v);
  CHECK(back.ledger == ckpt.ledger);
  CHECK(back.rng_state == ckpt.rng_state);
  CHECK(back.step_count == ckpt.step_count);

  std::ostringstream second;
  back.save(second);
  CHECK(second.str() == first.str());
}

TEST_CASE("checkpoint file round trip") {
  Checkpoint ckpt = sample_checkpoint();
  std::string path = "/tmp/ardm_checkpoint_test.bin";
  ckpt.save_file(path);
  Checkpoint back = Checkpoint::load_file(path);
  CHECK(checkpoint_hash(back) == checkpoint_hash(ckpt));
  std::remove(path.c_str());
  CHECK_THROWS_AS(Checkpoint::load_file("/nonexistent/ckpt.bin"),
                  std::runtime_error);
}

TEST_CASE("magic and version are enforced") {
  Checkpoint ckpt = sample_checkpoint();
  std::ostringstream os;
  ckpt.save(os);
  std::string bytes = os.str();

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  std::istringstream m(wrong_magic);
  CHECK_THROWS_AS(Checkpoint::load(m), std::runtime_error);

  std::string wrong_version = bytes;
  wrong_version[4] = 9;  // little-endian u16 version right after the magic
  std::istringstream v(wrong_version);
  CHECK_THROWS_AS(Checkpoint::load(v), std::runtime_error);

  std::string cut = bytes.substr(0, bytes.size() / 2);
  std::istringstream t(cut);
  CHECK_THROWS_AS(Checkpoint::load(t), std::runtime_error);
}

TEST_CASE("hash changes with any field") {
  Checkpoint ckpt = sample_checkpoint();
  uint64_t base = checkpoint_hash(ckpt);

  Checkpoint p = ckpt;
  p.params[0] += 1.0f;
  CHECK(checkpoint_hash(p) != base);

  Checkpoint e = ckpt;
  e.ema[0] += 1.0f;
  CHECK(checkpoint_hash(e) != base);

  Checkpoint c = ckpt;
  c.config_text += "extra = 1\n";
  CHECK(checkpoint_hash(c) != base);

  Checkpoint s = ckpt;
  s.step_count += 1;
  CHECK(checkpoint_hash(s) != base);

  CHECK(checkpoint_hash(ckpt) == base);  // hashing is pure
}

TEST_CASE("load_params restores the store in both precisions") {
  ModelConfig cfg;
  cfg.dims = 3;
  cfg.num_classes = 4;
  cfg.embed_width = 3;
  cfg.hidden_width = 4;
  cfg.depth = 1;

  Checkpoint ckpt = sample_checkpoint();

  Network<double> net64(cfg);
  load_params(net64, ckpt);
  CHECK(net64.store().step == 17);
  CHECK(double(ckpt.params[0]) == net64.store().params[0]);

  Network<float> net32(cfg);
  load_params(net32, ckpt);
  CHECK(net32.store().params[0] == ckpt.params[0]);

  // Round trip through a checkpoint reproduces the 32-bit values exactly.
  Checkpoint again = make_checkpoint(net64, "x = 1\n", ckpt.ledger, 0);
  CHECK(again.params == ckpt.params);

  ModelConfig bigger = cfg;
  bigger.hidden_width = 8;
  Network<double> mismatched(bigger);
  CHECK_THROWS_AS(load_params(mismatched, ckpt), std::invalid_argument);
}

TEST_CASE("array length disagreement is rejected at save time") {
  Checkpoint ckpt = sample_checkpoint();
  ckpt.ema.pop_back();
  std::ostringstream os;
  CHECK_THROWS_AS(ckpt.save(os), std::logic_error);
}
