// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Image <-> bitstream compression with a trained model.
//
// Bitstream layout, little-endian:
//   "SVQ1" | version u8 | k u16 | m u16 | H u16 | W u16 | C u8 |
//   latent H' u16 | latent W' u16 | latent channels u8 | code count u32 |
//   model checksum u64 | frequency table k x u16 | payload bytes u32 |
//   payload | CRC-32 u32 over everything before it
//
// Inference runs in 32-bit with a fixed evaluation order, so a model
// reproduces its reconstructions exactly on one platform. The code path
// (quantization indices and range coding) is integer-exact everywhere.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "softvq/image_io.hpp"
#include "softvq/model.hpp"
#include "softvq/range_coder.hpp"

namespace softvq {

inline constexpr std::uint8_t kBitstreamVersion = 1;
// Header bytes before the frequency table and after it (payload length).
inline constexpr std::size_t kBitstreamFixedHeaderBytes = 35;
inline constexpr std::size_t kBitstreamCrcBytes = 4;

// Bytes of a bitstream that are not payload, for alphabet size k.
inline constexpr std::size_t bitstream_overhead_bytes(std::size_t k) {
  return kBitstreamFixedHeaderBytes + 2 * k + kBitstreamCrcBytes;
}

struct BitstreamHeader {
  std::uint16_t k = 0;
  std::uint16_t m = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint8_t channels = 0;
  std::uint16_t latent_height = 0;
  std::uint16_t latent_width = 0;
  std::uint8_t latent_channels = 0;
  std::uint32_t code_count = 0;
  std::uint64_t model_checksum = 0;
  std::vector<std::uint16_t> frequencies;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs);
// Throws VersionError, CrcError or FormatError for malformed input.
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

struct EncodedImage {
  std::vector<std::uint8_t> bytes;
  CodeVector codes;
};

struct DecodedImage {
  Image image;
  FloatTensor reconstruction;  // C x H x W in [-1, 1] before rounding to 8 bits
  CodeVector codes;
  BitstreamHeader header;
};

class Codec {
 public:
  // Parameters are rounded to float32, exactly as a checkpoint stores them.
  explicit Codec(Model model);

  const Model& model() const { return model_; }
  std::uint64_t checksum() const { return checksum_; }
  const FrequencyTable& table() const { return table_; }
  const std::vector<double>& probabilities() const { return probabilities_; }

  CodeVector encode_codes(const Image& image) const;
  // decoder(dequantize(codes)) in 32-bit.
  FloatTensor reconstruct(std::span<const std::uint32_t> codes) const;

  EncodedImage compress(const Image& image) const;
  // Throws CrcError / VersionError / FormatError / ModelMismatchError.
  DecodedImage decompress(std::span<const std::uint8_t> bytes) const;

  // Sum of -log2 q(c) over the codes, q the model's own probabilities.
  double model_bits(std::span<const std::uint32_t> codes) const;

 private:
  Model model_;
  FloatParamStore float_params_;
  FloatTensor codebook_;
  Encoder encoder_;
  Decoder decoder_;
  std::vector<double> probabilities_;
  FrequencyTable table_;
  std::uint64_t checksum_ = 0;
};

struct EvalRow {
  std::size_t index = 0;
  std::size_t bits = 0;
  double bpp = 0.0;
  double mse = 0.0;  // 8-bit pixel units
  double hard_xent_bpp = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double bpp = 0.0;
  double mse = 0.0;
  double hard_xent_bpp = 0.0;
  double model_entropy_bits = 0.0;
};

// Compresses and decompresses every image; bpp is the real bitstream size.
EvalReport evaluate(const Codec& codec, const Dataset& data, int threads = 1);

void write_eval_csv(std::ostream& os, const EvalReport& report);

}  // namespace softvq
