#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ardm/config.hpp"
#include "ardm/rng.hpp"

namespace ardm {

enum class DataKind { iid_categorical, markov_chain, toy_images, raw_bytes_file };

// Description of a data source. The synthetic kinds have closed-form
// entropies so model quality can be judged against ground truth; raw byte
// files are chunked into fixed-length records with the tail dropped.
struct DatasetSpec {
  DataKind kind = DataKind::iid_categorical;
  uint32_t dims = 0;
  uint32_t num_classes = 0;
  std::vector<double> probs;              // iid: K entries
  std::vector<std::vector<double>> rows;  // markov: K rows of K
  uint32_t image_side = 0;                // toy images: dims = side^2
  std::string path;                       // raw bytes source

  void validate() const;

  // Asymptotic entropy in bits per symbol (the chain's rate for markov,
  // the per-dimension entropy otherwise). Raw files have no closed form.
  double entropy_rate_bits_per_dim() const;
  // Exact entropy of one D-dimensional record divided by D. For a Markov
  // record started from the stationary distribution this is
  // (H(pi) + (D-1) * rate) / D, which exceeds the rate for finite D.
  double record_entropy_bits_per_dim() const;

  // Reads data_* keys from a flat config.
  static DatasetSpec from_config(const Config& cfg);

  // Stationary distribution of the markov rows (power iteration).
  std::vector<double> stationary() const;
};

struct Dataset {
  uint32_t dims = 0;
  uint32_t num_classes = 0;
  std::vector<std::vector<uint32_t>> records;

  void save_file(const std::string& path) const;
  static Dataset load_file(const std::string& path);
};

// Deterministic given (spec, count, seed).
Dataset generate_dataset(const DatasetSpec& spec, uint64_t count, uint64_t seed);

double entropy_bits(std::span<const double> probs);

}  // namespace ardm
