// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "softvq/bytes.hpp"
#include "softvq/error.hpp"
#include "softvq/random.hpp"

namespace softvq {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> files_with_extensions(const std::string& dir,
                                               std::initializer_list<std::string_view> exts) {
  if (!fs::is_directory(dir)) throw FormatError("'" + dir + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("'" + source + "': size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  Dataset ds{source, {}};
  const std::size_t plane = 32 * 32;
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecordBytes) {
    Image img{32, 32, 3, std::vector<std::uint8_t>(plane * 3)};
    const auto* rec = bytes.data() + off + 1;  // skip the label
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) img.pixels[p * 3 + c] = rec[c * plane + p];
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset load_cifar10(const std::string& path) {
  if (!fs::is_directory(path)) return parse_cifar10(read_file(path), path);
  Dataset ds{path, {}};
  for (const auto& file : files_with_extensions(path, {".bin"})) {
    auto part = parse_cifar10(read_file(file), file);
    std::move(part.images.begin(), part.images.end(), std::back_inserter(ds.images));
  }
  return ds;
}

Image parse_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space_and_comments();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) throw FormatError("pnm: header number too large");
    }
    if (digits == 0) throw FormatError("pnm: malformed header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("pnm: only binary P5/P6 files are supported");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0) throw FormatError("pnm: non-positive dimensions");
  if (maxval != 255) throw FormatError("pnm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("pnm: malformed header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < n) throw FormatError("pnm: pixel data truncated");
  Image img{static_cast<int>(height), static_cast<int>(width), channels,
            std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + n)};
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw FormatError("pnm: only 1 or 3 channel images can be written");
  }
  ByteWriter w;
  w.text(std::string(image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
         std::to_string(image.height) + "\n255\n");
  w.bytes(image.pixels);
  return w.take();
}

Image load_pnm(const std::string& path) {
  try {
    return parse_pnm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

void save_pnm(const std::string& path, const Image& image) { write_file(path, encode_pnm(image)); }

Dataset load_pnm_dir(const std::string& dir) {
  Dataset ds{dir, {}};
  for (const auto& file : files_with_extensions(dir, {".pgm", ".ppm", ".pnm"})) {
    ds.images.push_back(load_pnm(file));
  }
  return ds;
}

Dataset synthetic_textures(std::size_t count, int height, int width, int channels,
                           std::uint64_t seed) {
  if (height <= 0 || width <= 0 || channels <= 0) throw ConfigError("bad synthetic image shape");
  Dataset ds{"synthetic:" + std::to_string(seed), {}};
  Rng rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < count; ++i) {
    struct Grating {
      double fx, fy, phase, amp;
    };
    const int gratings = 1 + static_cast<int>(rng.below(3));
    std::vector<Grating> g(gratings);
    for (auto& gr : g) {
      const double period = rng.uniform(4.0, 16.0);
      const double angle = rng.uniform(0.0, std::numbers::pi);
      gr.fx = std::cos(angle) / period;
      gr.fy = std::sin(angle) / period;
      gr.phase = rng.uniform(0.0, kTwoPi);
      gr.amp = rng.uniform(20.0, 60.0);
    }
    std::vector<double> base(channels), tint(channels), slope_x(channels), slope_y(channels);
    for (int c = 0; c < channels; ++c) {
      base[c] = rng.uniform(60.0, 190.0);
      tint[c] = rng.uniform(0.4, 1.0);
      slope_x[c] = rng.uniform(-40.0, 40.0);
      slope_y[c] = rng.uniform(-40.0, 40.0);
    }
    const double noise = rng.uniform(0.0, 6.0);
    Image img{height, width, channels,
              std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width * channels)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double pattern = 0.0;
        for (const auto& gr : g) pattern += gr.amp * std::sin(kTwoPi * (gr.fx * x + gr.fy * y) + gr.phase);
        const double u = static_cast<double>(x) / width - 0.5;
        const double v = static_cast<double>(y) / height - 0.5;
        for (int c = 0; c < channels; ++c) {
          const double value = base[c] + slope_x[c] * u + slope_y[c] * v + tint[c] * pattern +
                               noise * rng.normal();
          img.pixels[(static_cast<std::size_t>(y) * width + x) * channels + c] =
              static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        }
      }
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw DimensionError("images_to_tensor: no images");
  const auto& first = images.front();
  const std::size_t c = first.channels, h = first.height, w = first.width;
  std::vector<double> out(images.size() * c * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
      throw DimensionError("images_to_tensor: images differ in shape");
    }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < h * w; ++p)
        out[((n * c) + ch) * h * w + p] = img.pixels[p * c + ch] / kPixelScale - 1.0;
  }
  return Tensor({images.size(), c, h, w}, std::move(out));
}

FloatTensor image_to_float(const Image& image) {
  const std::size_t c = image.channels, hw = image.pixel_count();
  FloatTensor out{{c, static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width)},
                  std::vector<float>(c * hw)};
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      out.data[ch * hw + p] = static_cast<float>(image.pixels[p * c + ch]) / 127.5f - 1.0f;
  return out;
}

Image float_to_image(const FloatTensor& chw) {
  if (chw.shape.size() != 3) throw DimensionError("float_to_image expects C x H x W");
  const int c = static_cast<int>(chw.shape[0]);
  Image img{static_cast<int>(chw.shape[1]), static_cast<int>(chw.shape[2]), c,
            std::vector<std::uint8_t>(chw.data.size())};
  const std::size_t hw = img.pixel_count();
  for (std::size_t ch = 0; ch < static_cast<std::size_t>(c); ++ch) {
    for (std::size_t p = 0; p < hw; ++p) {
      const float v = (chw.data[ch * hw + p] + 1.0f) * 127.5f;
      img.pixels[p * c + ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

double mse_8bit(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw DimensionError("mse_8bit: image shapes differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

}  // namespace softvq
