#include "ardm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ardm/serialize.hpp"

namespace ardm {

void Checkpoint::save(std::ostream& os) const {
  io::write_magic(os, "ARDM");
  io::write_le<uint16_t>(os, kVersion);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(config_text.size()));
  os.write(config_text.data(),
           static_cast<std::streamsize>(config_text.size()));
  if (params.size() != ema.size() || params.size() != adam_m.size() ||
      params.size() != adam_v.size()) {
    throw std::logic_error("checkpoint arrays disagree on parameter count");
  }
  io::write_le<uint64_t>(os, params.size());
  for (float v : params) io::write_f32(os, v);
  for (float v : ema) io::write_f32(os, v);
  ledger.save(os);
  for (float v : adam_m) io::write_f32(os, v);
  for (float v : adam_v) io::write_f32(os, v);
  io::write_le<uint64_t>(os, rng_state);
  io::write_le<uint64_t>(os, step_count);
}

Checkpoint Checkpoint::load(std::istream& is) {
  io::check_magic(is, "ARDM", "checkpoint");
  uint16_t version = io::read_le<uint16_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  uint32_t cfg_len = io::read_le<uint32_t>(is);
  ckpt.config_text.resize(cfg_len);
  if (cfg_len > 0) {
    is.read(ckpt.config_text.data(), cfg_len);
    if (!is) throw std::runtime_error("unexpected end of stream");
  }
  uint64_t count = io::read_le<uint64_t>(is);
  ckpt.params.resize(count);
  ckpt.ema.resize(count);
  ckpt.adam_m.resize(count);
  ckpt.adam_v.resize(count);
  for (float& v : ckpt.params) v = io::read_f32(is);
  for (float& v : ckpt.ema) v = io::read_f32(is);
  ckpt.ledger = LossLedger::load(is);
  for (float& v : ckpt.adam_m) v = io::read_f32(is);
  for (float& v : ckpt.adam_v) v = io::read_f32(is);
  ckpt.rng_state = io::read_le<uint64_t>(is);
  ckpt.step_count = io::read_le<uint64_t>(is);
  return ckpt;
}

void Checkpoint::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint file " + path);
  save(out);
}

Checkpoint Checkpoint::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file " + path);
  return load(in);
}

uint64_t checkpoint_hash(const Checkpoint& ckpt) {
  std::ostringstream buf(std::ios::binary);
  ckpt.save(buf);
  std::string bytes = buf.str();
  uint64_t hash = 14695981039346656037ull;
  for (char c : bytes) {
    hash ^= static_cast<uint8_t>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace ardm
