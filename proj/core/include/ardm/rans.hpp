#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ardm {

// Quantized symbol frequencies for range coding. Frequencies sum to
// 2^precision_bits and every symbol in the table has frequency >= 1, so any
// symbol the model can emit is codable.
struct FrequencyTable {
  std::vector<uint32_t> freqs;
  std::vector<uint32_t> cumulative;  // size freqs.size()+1, cumulative[0]=0
  uint32_t precision_bits = 12;

  size_t size() const { return freqs.size(); }
};

// Largest-remainder quantization of a probability vector to total
// 2^precision_bits, flooring every symbol at 1. Deficits go to the largest
// fractional remainders, excess is taken from the largest frequencies; ties
// resolve toward the smaller symbol, so the table is deterministic.
FrequencyTable quantize(std::span<const double> probs, uint32_t precision_bits);

// Streaming rANS: 32-bit state, lower bound 2^16, byte renormalization.
// Symbols are buffered and encoded back to front on finish, and the byte
// stream is reversed, so the decoder consumes symbols in the order they
// were put. finish() appends the 4-byte final state.
class RansEncoder {
 public:
  void put(uint32_t symbol, const FrequencyTable& table);
  std::vector<uint8_t> finish();

  size_t pending() const { return symbols_.size(); }

 private:
  struct Slot {
    uint32_t symbol;
    uint32_t freq;
    uint32_t start;
    uint32_t precision_bits;
  };
  std::vector<Slot> symbols_;
};

class RansDecoder {
 public:
  explicit RansDecoder(std::span<const uint8_t> bytes);

  uint32_t get(const FrequencyTable& table);

  // Verifies the stream was consumed exactly and the state returned to its
  // initial value; throws otherwise. Call after the last symbol.
  void finish() const;

 private:
  uint8_t next_byte();

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t state_ = 0;
};

std::vector<uint8_t> rans_encode(std::span<const uint32_t> symbols,
                                 std::span<const FrequencyTable> tables);

// Decodes `count` symbols; the provider is called once per position, in
// forward order, and sees everything decoded so far, so tables may depend
// on earlier symbols.
using TableProvider =
    std::function<FrequencyTable(size_t position, std::span<const uint32_t> decoded)>;
std::vector<uint32_t> rans_decode(std::span<const uint8_t> bytes, size_t count,
                                  const TableProvider& provider);

}  // namespace ardm
