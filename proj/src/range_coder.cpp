// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softvq/error.hpp"

namespace softvq {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

FrequencyTable FrequencyTable::from_frequencies(std::vector<std::uint32_t> freq) {
  if (freq.size() < 2 || freq.size() > kTotalFrequency) {
    throw ContractError("frequency table needs 2 <= k <= 65536 symbols");
  }
  FrequencyTable t;
  t.cum_.assign(freq.size() + 1, 0);
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < freq.size(); ++a) {
    if (freq[a] == 0) throw ContractError("zero frequency for symbol " + std::to_string(a));
    total += freq[a];
    if (total > kTotalFrequency) break;
    t.cum_[a + 1] = static_cast<std::uint32_t>(total);
  }
  if (total != kTotalFrequency) {
    throw ContractError("frequencies must sum to 65536, got " + std::to_string(total));
  }
  t.freq_ = std::move(freq);
  return t;
}

std::uint32_t FrequencyTable::symbol_for(std::uint32_t target) const {
  auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), target);
  return static_cast<std::uint32_t>(it - cum_.begin() - 1);
}

FrequencyTable quantize_model(std::span<const double> q) {
  const std::size_t k = q.size();
  if (k > kTotalFrequency) throw ContractError("k > 65536 is unsupported");
  if (k < 2) throw ContractError("quantize_model needs k >= 2");
  for (double v : q) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError("probabilities must be positive");
  }
  const double budget = static_cast<double>(kTotalFrequency - k);
  std::vector<std::uint32_t> freq(k);
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < k; ++a) {
    const double scaled = std::floor(std::min(q[a], 1.0) * budget);
    freq[a] = static_cast<std::uint32_t>(scaled) + 1;
    total += freq[a];
  }
  if (total > kTotalFrequency) {
    throw ContractError("probabilities sum to more than 1");
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  std::uint64_t residual = kTotalFrequency - total;
  for (std::size_t i = 0; residual > 0; i = (i + 1) % k, --residual) ++freq[order[i]];
  return FrequencyTable::from_frequencies(std::move(freq));
}

void RangeEncoder::encode(std::uint32_t symbol, const FrequencyTable& table) {
  if (symbol >= table.size()) {
    throw ContractError("symbol " + std::to_string(symbol) + " outside alphabet of " +
                        std::to_string(table.size()));
  }
  const std::uint32_t r = range_ >> kFrequencyBits;
  const std::uint32_t start = table.cumulative(symbol);
  low_ += static_cast<std::uint64_t>(r) * start;
  if (symbol + 1 == table.size()) {
    range_ -= r * start;
  } else {
    range_ = r * table.frequency(symbol);
  }
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t byte = cache_;
    do {
      // The very first cached byte is always zero and is not transmitted.
      if (!first_) out_.push_back(static_cast<std::uint8_t>(byte + carry));
      first_ = false;
      byte = 0xFF;
    } while (--pending_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++pending_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload) : in_(payload) {
  if (payload.size() < 4) throw FormatError("range payload shorter than 4 bytes");
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw FormatError("range payload truncated");
  return in_[pos_++];
}

std::uint32_t RangeDecoder::decode(const FrequencyTable& table) {
  const std::uint32_t r = range_ >> kFrequencyBits;
  const std::uint32_t target = std::min<std::uint32_t>(code_ / r, kTotalFrequency - 1);
  const std::uint32_t symbol = table.symbol_for(target);
  const std::uint32_t start = table.cumulative(symbol);
  code_ -= r * start;
  if (symbol + 1 == table.size()) {
    range_ -= r * start;
  } else {
    range_ = r * table.frequency(symbol);
  }
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

std::vector<std::uint8_t> range_encode(std::span<const std::uint32_t> symbols,
                                       const FrequencyTable& table) {
  RangeEncoder enc;
  for (auto s : symbols) enc.encode(s, table);
  return enc.finish();
}

std::vector<std::uint32_t> range_decode(std::span<const std::uint8_t> payload,
                                        const FrequencyTable& table, std::size_t count) {
  RangeDecoder dec(payload);
  std::vector<std::uint32_t> out(count);
  for (auto& s : out) s = dec.decode(table);
  return out;
}

double codelength_bound(std::span<const std::uint32_t> symbols, const FrequencyTable& table) {
  double bits = 0.0;
  for (auto s : symbols) {
    if (s >= table.size()) throw ContractError("symbol outside alphabet");
    bits -= std::log2(static_cast<double>(table.frequency(s)) / kTotalFrequency);
  }
  return bits;
}

}  // namespace softvq
