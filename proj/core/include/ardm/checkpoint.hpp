#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ardm/backbone.hpp"
#include "ardm/ledger.hpp"

namespace ardm {

// Serialized training state. Layout (little-endian throughout): magic
// "ARDM", u16 version, u32 config byte length + UTF-8 key-value text,
// u64 param count, parameters as 32-bit floats, EMA shadow, loss ledger,
// Adam first and second moments, u64 rng state, u64 step count.
// Parameters are stored in 32 bits regardless of training precision, so
// coding-side arithmetic is identical whichever precision trained them.
struct Checkpoint {
  static constexpr uint16_t kVersion = 1;

  std::string config_text;
  std::vector<float> params;
  std::vector<float> ema;
  LossLedger ledger;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  uint64_t rng_state = 0;
  uint64_t step_count = 0;

  void save(std::ostream& os) const;
  static Checkpoint load(std::istream& is);
  void save_file(const std::string& path) const;
  static Checkpoint load_file(const std::string& path);
};

// FNV-1a 64 over the serialized bytes; identifies the model inside
// compressed files so a decoder never runs with the wrong weights.
uint64_t checkpoint_hash(const Checkpoint& ckpt);

template <typename T>
void load_params(Network<T>& net, const Checkpoint& ckpt) {
  ParamStore<T>& store = net.store();
  if (ckpt.params.size() != store.params.size()) {
    throw std::invalid_argument("checkpoint parameter count does not match");
  }
  auto copy = [](const std::vector<float>& src, std::vector<T>& dst) {
    for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
  };
  copy(ckpt.params, store.params);
  copy(ckpt.ema, store.ema);
  copy(ckpt.adam_m, store.adam_m);
  copy(ckpt.adam_v, store.adam_v);
  store.step = ckpt.step_count;
}

template <typename T>
Checkpoint make_checkpoint(const Network<T>& net, std::string config_text,
                           LossLedger ledger, uint64_t rng_state) {
  const ParamStore<T>& store = net.store();
  Checkpoint ckpt;
  ckpt.config_text = std::move(config_text);
  ckpt.ledger = std::move(ledger);
  auto copy = [](const std::vector<T>& src) {
    std::vector<float> out(src.size());
    for (size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i]);
    return out;
  };
  ckpt.params = copy(store.params);
  ckpt.ema = copy(store.ema);
  ckpt.adam_m = copy(store.adam_m);
  ckpt.adam_v = copy(store.adam_v);
  ckpt.rng_state = rng_state;
  ckpt.step_count = store.step;
  return ckpt;
}

}  // namespace ardm
