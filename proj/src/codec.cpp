// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/codec.hpp"

#include <zlib.h>

#include <cmath>
#include <limits>
#include <ostream>

#include "softvq/bytes.hpp"
#include "softvq/error.hpp"
#include "softvq/parallel.hpp"

namespace softvq {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs) {
  const auto& h = bs.header;
  if (h.frequencies.size() != h.k) throw ContractError("bitstream: frequency table size != k");
  ByteWriter w;
  w.text("SVQ1");
  w.u8(kBitstreamVersion);
  w.u16(h.k);
  w.u16(h.m);
  w.u16(h.height);
  w.u16(h.width);
  w.u8(h.channels);
  w.u16(h.latent_height);
  w.u16(h.latent_width);
  w.u8(h.latent_channels);
  w.u32(h.code_count);
  w.u64(h.model_checksum);
  for (auto f : h.frequencies) w.u16(f);
  w.u32(static_cast<std::uint32_t>(bs.payload.size()));
  w.bytes(bs.payload);
  w.u32(crc32(w.data()));
  return w.take();
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::string(bytes.begin(), bytes.begin() + 4) != "SVQ1") {
    throw VersionError("not a softvq bitstream (bad magic)");
  }
  if (bytes[4] != kBitstreamVersion) {
    throw VersionError("unsupported bitstream version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kBitstreamFixedHeaderBytes + kBitstreamCrcBytes) {
    throw FormatError("bitstream truncated");
  }
  const auto body = bytes.first(bytes.size() - kBitstreamCrcBytes);
  ByteReader tail(bytes.last(kBitstreamCrcBytes), "bitstream");
  if (tail.u32() != crc32(body)) throw CrcError("bitstream CRC mismatch");

  ByteReader r(body, "bitstream");
  r.bytes(5);
  Bitstream bs;
  auto& h = bs.header;
  h.k = r.u16();
  h.m = r.u16();
  h.height = r.u16();
  h.width = r.u16();
  h.channels = r.u8();
  h.latent_height = r.u16();
  h.latent_width = r.u16();
  h.latent_channels = r.u8();
  h.code_count = r.u32();
  h.model_checksum = r.u64();
  h.frequencies.resize(h.k);
  for (auto& f : h.frequencies) f = r.u16();
  const auto payload_size = r.u32();
  auto payload = r.bytes(payload_size);
  bs.payload.assign(payload.begin(), payload.end());
  if (!r.done()) throw FormatError("bitstream: trailing bytes before CRC");
  return bs;
}

namespace {

FloatTensor codebook_as_float(const Tensor& e) {
  FloatTensor out{e.shape(), std::vector<float>(e.numel())};
  for (std::size_t i = 0; i < e.numel(); ++i) out.data[i] = static_cast<float>(e[i]);
  return out;
}

Model rounded(Model model) {
  round_to_float(model.params);
  return model;
}

}  // namespace

Codec::Codec(Model model)
    : model_(rounded(std::move(model))),
      float_params_(model_.params),
      codebook_(codebook_as_float(model_.codebook())),
      encoder_(model_.config.net),
      decoder_(model_.config.net),
      probabilities_(model_.entropy_model().probabilities()),
      table_(quantize_model(probabilities_)),
      checksum_(model_checksum(model_)) {
  model_.config.validate();
  const auto& n = model_.config.net;
  if (model_.config.k > std::numeric_limits<std::uint16_t>::max() ||
      n.height > 65535 || n.width > 65535 || n.channels > 255 || n.latent_channels > 255 ||
      model_.config.m > 65535) {
    throw ConfigError("model dimensions exceed the bitstream header fields");
  }
}

CodeVector Codec::encode_codes(const Image& image) const {
  const auto& n = model_.config.net;
  if (image.height != n.height || image.width != n.width || image.channels != n.channels) {
    throw DimensionError("image " + std::to_string(image.height) + "x" +
                         std::to_string(image.width) + "x" + std::to_string(image.channels) +
                         " does not match model input " + std::to_string(n.height) + "x" +
                         std::to_string(n.width) + "x" + std::to_string(n.channels));
  }
  const FloatTensor latent = encoder_.infer(float_params_, image_to_float(image));
  return quantize_hard(channels_to_columns(latent, model_.config.m), codebook_);
}

FloatTensor Codec::reconstruct(std::span<const std::uint32_t> codes) const {
  const auto& n = model_.config.net;
  if (codes.size() != model_.config.code_count()) {
    throw DimensionError("expected " + std::to_string(model_.config.code_count()) + " codes, got " +
                         std::to_string(codes.size()));
  }
  const FloatTensor z = dequantize(codes, codebook_);
  return decoder_.infer(float_params_,
                        columns_to_channels(z, n.latent_channels, n.latent_height(),
                                            n.latent_width()));
}

EncodedImage Codec::compress(const Image& image) const {
  EncodedImage out;
  out.codes = encode_codes(image);
  const auto& n = model_.config.net;
  Bitstream bs;
  auto& h = bs.header;
  h.k = static_cast<std::uint16_t>(model_.config.k);
  h.m = static_cast<std::uint16_t>(model_.config.m);
  h.height = static_cast<std::uint16_t>(n.height);
  h.width = static_cast<std::uint16_t>(n.width);
  h.channels = static_cast<std::uint8_t>(n.channels);
  h.latent_height = static_cast<std::uint16_t>(n.latent_height());
  h.latent_width = static_cast<std::uint16_t>(n.latent_width());
  h.latent_channels = static_cast<std::uint8_t>(n.latent_channels);
  h.code_count = static_cast<std::uint32_t>(out.codes.size());
  h.model_checksum = checksum_;
  for (auto f : table_.frequencies()) h.frequencies.push_back(static_cast<std::uint16_t>(f));
  bs.payload = range_encode(out.codes, table_);
  out.bytes = serialize_bitstream(bs);
  return out;
}

DecodedImage Codec::decompress(std::span<const std::uint8_t> bytes) const {
  Bitstream bs = parse_bitstream(bytes);
  const auto& h = bs.header;
  if (h.model_checksum != checksum_) {
    throw ModelMismatchError("bitstream was produced by a different model checkpoint");
  }
  const auto& n = model_.config.net;
  if (h.k != model_.config.k || h.m != model_.config.m || h.height != n.height ||
      h.width != n.width || h.channels != n.channels || h.latent_height != n.latent_height() ||
      h.latent_width != n.latent_width() || h.latent_channels != n.latent_channels ||
      h.code_count != model_.config.code_count()) {
    throw FormatError("bitstream header disagrees with the model configuration");
  }
  std::vector<std::uint32_t> freq(h.frequencies.begin(), h.frequencies.end());
  FrequencyTable table = [&] {
    try {
      return FrequencyTable::from_frequencies(std::move(freq));
    } catch (const ContractError& e) {
      throw FormatError(std::string("bitstream frequency table invalid: ") + e.what());
    }
  }();
  DecodedImage out;
  out.header = h;
  out.codes = range_decode(bs.payload, table, h.code_count);
  out.reconstruction = reconstruct(out.codes);
  out.image = float_to_image(out.reconstruction);
  return out;
}

double Codec::model_bits(std::span<const std::uint32_t> codes) const {
  double bits = 0.0;
  for (auto c : codes) bits -= std::log2(probabilities_.at(c));
  return bits;
}

EvalReport evaluate(const Codec& codec, const Dataset& data, int threads) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  EvalReport report;
  report.rows.resize(data.size());
  parallel_for(data.size(), worker_count(threads), [&](std::size_t i) {
    const Image& img = data.images[i];
    const EncodedImage enc = codec.compress(img);
    const DecodedImage dec = codec.decompress(enc.bytes);
    EvalRow& row = report.rows[i];
    const double pixels = static_cast<double>(img.pixel_count());
    row.index = i;
    row.bits = enc.bytes.size() * 8;
    row.bpp = static_cast<double>(row.bits) / pixels;
    row.mse = mse_8bit(img, dec.image);
    row.hard_xent_bpp = codec.model_bits(enc.codes) / pixels;
  });
  for (const auto& row : report.rows) {
    report.bpp += row.bpp;
    report.mse += row.mse;
    report.hard_xent_bpp += row.hard_xent_bpp;
  }
  const double n = static_cast<double>(report.rows.size());
  report.bpp /= n;
  report.mse /= n;
  report.hard_xent_bpp /= n;
  report.model_entropy_bits = nats_to_bits(entropy(codec.probabilities()));
  return report;
}

void write_eval_csv(std::ostream& os, const EvalReport& report) {
  const auto old_precision = os.precision(10);
  os << "image,bits,bpp,mse,hard_xent_bpp,model_entropy_bits\n";
  for (const auto& r : report.rows) {
    os << r.index << ',' << r.bits << ',' << r.bpp << ',' << r.mse << ',' << r.hard_xent_bpp
       << ',' << report.model_entropy_bits << '\n';
  }
  os << "mean,," << report.bpp << ',' << report.mse << ',' << report.hard_xent_bpp << ','
     << report.model_entropy_bits << '\n';
  os.precision(old_precision);
}

}  // namespace softvq
