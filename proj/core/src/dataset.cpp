#include "ardm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ardm/serialize.hpp"

namespace ardm {

double entropy_bits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

namespace {

void check_distribution(std::span<const double> probs, const std::string& what) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument(what + " has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(what + " does not sum to 1");
  }
}

size_t symbol_width(uint32_t num_classes) {
  if (num_classes <= 256) return 1;
  if (num_classes <= 65536) return 2;
  return 4;
}

}  // namespace

void DatasetSpec::validate() const {
  if (dims == 0) throw std::invalid_argument("dataset dims must be positive");
  if (num_classes < 2) {
    throw std::invalid_argument("dataset needs at least 2 classes");
  }
  switch (kind) {
    case DataKind::iid_categorical:
      if (probs.size() != num_classes) {
        throw std::invalid_argument("probs must have one entry per class");
      }
      check_distribution(probs, "class distribution");
      break;
    case DataKind::markov_chain:
      if (rows.size() != num_classes) {
        throw std::invalid_argument("need one transition row per class");
      }
      for (const auto& row : rows) {
        if (row.size() != num_classes) {
          throw std::invalid_argument("transition rows must be square");
        }
        check_distribution(row, "transition row");
      }
      break;
    case DataKind::toy_images:
      if (image_side < 2 || uint64_t(image_side) * image_side != dims) {
        throw std::invalid_argument("image side must square to dims");
      }
      break;
    case DataKind::raw_bytes_file:
      if (num_classes != 256) {
        throw std::invalid_argument("raw byte data has 256 classes");
      }
      if (path.empty()) throw std::invalid_argument("raw data needs a path");
      break;
  }
}

std::vector<double> DatasetSpec::stationary() const {
  if (kind != DataKind::markov_chain) {
    throw std::logic_error("stationary distribution is a markov property");
  }
  size_t k = num_classes;
  std::vector<double> pi(k, 1.0 / double(k)), next(k);
  for (int iter = 0; iter < 20000; ++iter) {
    double diff = 0.0;
    for (size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (size_t i = 0; i < k; ++i) acc += pi[i] * rows[i][j];
      next[j] = acc;
    }
    for (size_t j = 0; j < k; ++j) diff += std::abs(next[j] - pi[j]);
    pi.swap(next);
    if (diff < 1e-15) break;
  }
  return pi;
}

double DatasetSpec::entropy_rate_bits_per_dim() const {
  switch (kind) {
    case DataKind::iid_categorical:
      return entropy_bits(probs);
    case DataKind::markov_chain: {
      std::vector<double> pi = stationary();
      double rate = 0.0;
      for (size_t i = 0; i < pi.size(); ++i) {
        rate += pi[i] * entropy_bits(rows[i]);
      }
      return rate;
    }
    case DataKind::toy_images:
      return record_entropy_bits_per_dim();
    case DataKind::raw_bytes_file:
      throw std::logic_error("raw byte data has no closed-form entropy");
  }
  throw std::logic_error("unreachable");
}

double DatasetSpec::record_entropy_bits_per_dim() const {
  switch (kind) {
    case DataKind::iid_categorical:
      return entropy_bits(probs);
    case DataKind::markov_chain: {
      std::vector<double> pi = stationary();
      double rate = 0.0;
      for (size_t i = 0; i < pi.size(); ++i) {
        rate += pi[i] * entropy_bits(rows[i]);
      }
      return (entropy_bits(pi) + (dims - 1) * rate) / dims;
    }
    case DataKind::toy_images: {
      // One record encodes an independent (row, column, level) triple.
      double states = double(image_side) * image_side * (num_classes - 1);
      return std::log2(states) / dims;
    }
    case DataKind::raw_bytes_file:
      throw std::logic_error("raw byte data has no closed-form entropy");
  }
  throw std::logic_error("unreachable");
}

DatasetSpec DatasetSpec::from_config(const Config& cfg) {
  DatasetSpec spec;
  std::string kind = cfg.get_string("data_kind");
  if (kind == "iid-categorical") {
    spec.kind = DataKind::iid_categorical;
  } else if (kind == "markov-chain") {
    spec.kind = DataKind::markov_chain;
  } else if (kind == "toy-images") {
    spec.kind = DataKind::toy_images;
  } else if (kind == "raw-bytes-file") {
    spec.kind = DataKind::raw_bytes_file;
  } else {
    throw std::invalid_argument("unknown data_kind '" + kind + "'");
  }

  auto parse_list = [](const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      out.push_back(std::stod(item));
    }
    return out;
  };

  spec.num_classes = static_cast<uint32_t>(cfg.get_int("data_classes", 2));
  switch (spec.kind) {
    case DataKind::iid_categorical:
      spec.dims = static_cast<uint32_t>(cfg.get_int("data_dims"));
      spec.probs = parse_list(cfg.get_string("data_probs"));
      break;
    case DataKind::markov_chain: {
      spec.dims = static_cast<uint32_t>(cfg.get_int("data_dims"));
      if (cfg.has("data_flip")) {
        // Symmetric two-state chain with the given flip probability.
        double flip = cfg.get_double("data_flip");
        spec.num_classes = 2;
        spec.rows = {{1.0 - flip, flip}, {flip, 1.0 - flip}};
      } else {
        // One row per class: data_row_0, data_row_1, ...
        for (uint32_t i = 0; i < spec.num_classes; ++i) {
          spec.rows.push_back(
              parse_list(cfg.get_string("data_row_" + std::to_string(i))));
        }
      }
      break;
    }
    case DataKind::toy_images:
      spec.image_side = static_cast<uint32_t>(cfg.get_int("data_image_side"));
      spec.dims = spec.image_side * spec.image_side;
      break;
    case DataKind::raw_bytes_file:
      spec.dims = static_cast<uint32_t>(cfg.get_int("data_dims"));
      spec.num_classes = 256;
      spec.path = cfg.get_string("data_path");
      break;
  }
  spec.validate();
  return spec;
}

Dataset generate_dataset(const DatasetSpec& spec, uint64_t count, uint64_t seed) {
  spec.validate();
  Dataset out;
  out.dims = spec.dims;
  out.num_classes = spec.num_classes;
  Rng rng(seed);

  switch (spec.kind) {
    case DataKind::iid_categorical: {
      for (uint64_t n = 0; n < count; ++n) {
        std::vector<uint32_t> rec(spec.dims);
        for (uint32_t d = 0; d < spec.dims; ++d) {
          rec[d] = static_cast<uint32_t>(rng.categorical<double>(spec.probs));
        }
        out.records.push_back(std::move(rec));
      }
      break;
    }
    case DataKind::markov_chain: {
      std::vector<double> pi = spec.stationary();
      for (uint64_t n = 0; n < count; ++n) {
        std::vector<uint32_t> rec(spec.dims);
        rec[0] = static_cast<uint32_t>(rng.categorical<double>(pi));
        for (uint32_t d = 1; d < spec.dims; ++d) {
          rec[d] = static_cast<uint32_t>(
              rng.categorical<double>(spec.rows[rec[d - 1]]));
        }
        out.records.push_back(std::move(rec));
      }
      break;
    }
    case DataKind::toy_images: {
      uint32_t side = spec.image_side;
      for (uint64_t n = 0; n < count; ++n) {
        uint32_t r = static_cast<uint32_t>(rng.bounded(side));
        uint32_t c = static_cast<uint32_t>(rng.bounded(side));
        uint32_t level = 1 + static_cast<uint32_t>(rng.bounded(spec.num_classes - 1));
        std::vector<uint32_t> rec(spec.dims, 0);
        for (uint32_t i = r; i < side; ++i) {
          for (uint32_t j = c; j < side; ++j) rec[i * side + j] = level;
        }
        out.records.push_back(std::move(rec));
      }
      break;
    }
    case DataKind::raw_bytes_file: {
      std::ifstream in(spec.path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open data file " + spec.path);
      std::vector<char> buf(spec.dims);
      while (out.records.size() < count &&
             in.read(buf.data(), static_cast<std::streamsize>(spec.dims))) {
        std::vector<uint32_t> rec(spec.dims);
        for (uint32_t d = 0; d < spec.dims; ++d) {
          rec[d] = static_cast<uint8_t>(buf[d]);
        }
        out.records.push_back(std::move(rec));
      }
      break;
    }
  }
  return out;
}

void Dataset::save_file(const std::string& path) const {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw std::runtime_error("cannot write dataset file " + path);
  io::write_le<uint32_t>(outf, dims);
  io::write_le<uint32_t>(outf, num_classes);
  io::write_le<uint64_t>(outf, records.size());
  size_t width = symbol_width(num_classes);
  for (const auto& rec : records) {
    if (rec.size() != dims) throw std::logic_error("ragged dataset record");
    for (uint32_t v : rec) {
      if (v >= num_classes) throw std::logic_error("symbol out of range");
      if (width == 1) {
        io::write_le<uint8_t>(outf, static_cast<uint8_t>(v));
      } else if (width == 2) {
        io::write_le<uint16_t>(outf, static_cast<uint16_t>(v));
      } else {
        io::write_le<uint32_t>(outf, v);
      }
    }
  }
}

Dataset Dataset::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  Dataset out;
  out.dims = io::read_le<uint32_t>(in);
  out.num_classes = io::read_le<uint32_t>(in);
  uint64_t count = io::read_le<uint64_t>(in);
  if (out.dims == 0 || out.num_classes < 2) {
    throw std::runtime_error("dataset header is invalid");
  }
  size_t width = symbol_width(out.num_classes);
  out.records.reserve(count);
  for (uint64_t n = 0; n < count; ++n) {
    std::vector<uint32_t> rec(out.dims);
    for (uint32_t d = 0; d < out.dims; ++d) {
      uint32_t v;
      if (width == 1) {
        v = io::read_le<uint8_t>(in);
      } else if (width == 2) {
        v = io::read_le<uint16_t>(in);
      } else {
        v = io::read_le<uint32_t>(in);
      }
      if (v >= out.num_classes) {
        throw std::runtime_error("dataset symbol out of range");
      }
      rec[d] = v;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ardm
