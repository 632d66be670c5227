#include "ardm/rans.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ardm {

namespace {

constexpr uint32_t kStateLow = 1u << 16;

void check_precision(uint32_t precision_bits) {
  if (precision_bits < 8 || precision_bits > 16) {
    throw std::invalid_argument("precision_bits must be in 8..16");
  }
}

}  // namespace

FrequencyTable quantize(std::span<const double> probs, uint32_t precision_bits) {
  check_precision(precision_bits);
  size_t k = probs.size();
  uint32_t target = 1u << precision_bits;
  if (k == 0) throw std::invalid_argument("empty probability vector");
  if (k > target) {
    throw std::invalid_argument("alphabet larger than 2^precision_bits");
  }

  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("probability mass is zero");

  FrequencyTable table;
  table.precision_bits = precision_bits;
  table.freqs.assign(k, 0);
  std::vector<double> remainder(k, 0.0);
  uint64_t sum = 0;
  for (size_t i = 0; i < k; ++i) {
    double ideal = probs[i] / total * target;
    uint32_t f = static_cast<uint32_t>(ideal);
    double rem = ideal - f;
    if (f == 0) {
      f = 1;
      rem = 0.0;  // the floor already over-allocates this symbol
    }
    table.freqs[i] = f;
    remainder[i] = rem;
    sum += f;
  }

  if (sum < target) {
    // Hand out the deficit by largest fractional remainder.
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return remainder[a] > remainder[b];
    });
    uint64_t deficit = target - sum;
    for (size_t i = 0; deficit > 0; i = (i + 1) % k, --deficit) {
      table.freqs[order[i]] += 1;
    }
  } else if (sum > target) {
    // The unit floors overshot; take back from the largest frequencies.
    uint64_t excess = sum - target;
    while (excess > 0) {
      size_t biggest = 0;
      for (size_t i = 1; i < k; ++i) {
        if (table.freqs[i] > table.freqs[biggest]) biggest = i;
      }
      uint32_t take = static_cast<uint32_t>(
          std::min<uint64_t>(excess, table.freqs[biggest] - 1));
      if (take == 0) throw std::logic_error("cannot reduce frequencies further");
      table.freqs[biggest] -= take;
      excess -= take;
    }
  }

  table.cumulative.assign(k + 1, 0);
  for (size_t i = 0; i < k; ++i) {
    table.cumulative[i + 1] = table.cumulative[i] + table.freqs[i];
  }
  return table;
}

void RansEncoder::put(uint32_t symbol, const FrequencyTable& table) {
  check_precision(table.precision_bits);
  if (symbol >= table.size()) {
    throw std::invalid_argument("symbol outside table alphabet");
  }
  uint32_t freq = table.freqs[symbol];
  if (freq == 0) throw std::invalid_argument("symbol has zero frequency");
  symbols_.push_back(
      {symbol, freq, table.cumulative[symbol], table.precision_bits});
}

std::vector<uint8_t> RansEncoder::finish() {
  std::vector<uint8_t> out;
  uint32_t x = kStateLow;
  // Last symbol goes in first so the decoder pops them in forward order.
  for (size_t i = symbols_.size(); i-- > 0;) {
    const Slot& s = symbols_[i];
    uint32_t x_max = ((kStateLow >> s.precision_bits) << 8) * s.freq;
    while (x >= x_max) {
      out.push_back(static_cast<uint8_t>(x & 0xff));
      x >>= 8;
    }
    x = ((x / s.freq) << s.precision_bits) + (x % s.freq) + s.start;
  }
  out.push_back(static_cast<uint8_t>(x & 0xff));
  out.push_back(static_cast<uint8_t>((x >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((x >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((x >> 24) & 0xff));
  std::reverse(out.begin(), out.end());
  symbols_.clear();
  return out;
}

RansDecoder::RansDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  state_ = 0;
  for (int i = 0; i < 4; ++i) {
    state_ = (state_ << 8) | next_byte();
  }
}

uint8_t RansDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw std::runtime_error("compressed stream truncated");
  }
  return bytes_[pos_++];
}

uint32_t RansDecoder::get(const FrequencyTable& table) {
  check_precision(table.precision_bits);
  uint32_t mask = (1u << table.precision_bits) - 1;
  uint32_t cum = state_ & mask;
  // cumulative is strictly increasing on in-use symbols; find the bucket.
  auto it = std::upper_bound(table.cumulative.begin(), table.cumulative.end(), cum);
  if (it == table.cumulative.begin() || it == table.cumulative.end()) {
    throw std::runtime_error("compressed stream corrupt");
  }
  uint32_t symbol = static_cast<uint32_t>(it - table.cumulative.begin() - 1);
  uint32_t freq = table.freqs[symbol];
  state_ = freq * (state_ >> table.precision_bits) + cum -
           table.cumulative[symbol];
  while (state_ < kStateLow) {
    state_ = (state_ << 8) | next_byte();
  }
  return symbol;
}

void RansDecoder::finish() const {
  if (state_ != kStateLow || pos_ != bytes_.size()) {
    throw std::runtime_error("compressed stream corrupt");
  }
}

std::vector<uint8_t> rans_encode(std::span<const uint32_t> symbols,
                                 std::span<const FrequencyTable> tables) {
  if (symbols.size() != tables.size()) {
    throw std::invalid_argument("one table per symbol required");
  }
  RansEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) enc.put(symbols[i], tables[i]);
  return enc.finish();
}

std::vector<uint32_t> rans_decode(std::span<const uint8_t> bytes, size_t count,
                                  const TableProvider& provider) {
  RansDecoder dec(bytes);
  std::vector<uint32_t> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    FrequencyTable table = provider(i, out);
    out.push_back(dec.get(table));
  }
  dec.finish();
  return out;
}

}  // namespace ardm
