// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Static range coder over a 16-bit quantized frequency table.
//
// 32-bit range, 33-bit low with carry propagation through a cached byte and a
// run of pending 0xFF bytes, byte-wise renormalization. Only integer
// arithmetic is used, so payloads are identical on every platform. The final
// symbol of the alphabet absorbs the truncation slack of each interval split.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace softvq {

inline constexpr unsigned kFrequencyBits = 16;
inline constexpr std::uint32_t kTotalFrequency = 1u << kFrequencyBits;

class FrequencyTable {
 public:
  // Throws ContractError unless every freq >= 1 and they sum to kTotalFrequency.
  static FrequencyTable from_frequencies(std::vector<std::uint32_t> freq);

  std::size_t size() const { return freq_.size(); }
  std::uint32_t frequency(std::size_t symbol) const { return freq_[symbol]; }
  std::uint32_t cumulative(std::size_t symbol) const { return cum_[symbol]; }
  std::span<const std::uint32_t> frequencies() const { return freq_; }
  // Symbol s with cumulative(s) <= target < cumulative(s + 1).
  std::uint32_t symbol_for(std::uint32_t target) const;

  bool operator==(const FrequencyTable&) const = default;

 private:
  std::vector<std::uint32_t> freq_;
  std::vector<std::uint32_t> cum_;
};

// freq_a = floor(q_a * (65536 - k)) + 1, then the remaining units go one each
// to the most probable symbols (ties to the lower index).
FrequencyTable quantize_model(std::span<const double> q);

class RangeEncoder {
 public:
  void encode(std::uint32_t symbol, const FrequencyTable& table);
  // Emits the final 4 bytes and returns the payload.
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
  bool first_ = true;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws FormatError if the payload is shorter than 4 bytes.
  explicit RangeDecoder(std::span<const std::uint8_t> payload);
  std::uint32_t decode(const FrequencyTable& table);

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

std::vector<std::uint8_t> range_encode(std::span<const std::uint32_t> symbols,
                                       const FrequencyTable& table);
std::vector<std::uint32_t> range_decode(std::span<const std::uint8_t> payload,
                                        const FrequencyTable& table, std::size_t count);

// Ideal code length in bits: sum of -log2(freq / 65536).
double codelength_bound(std::span<const std::uint32_t> symbols, const FrequencyTable& table);

}  // namespace softvq
