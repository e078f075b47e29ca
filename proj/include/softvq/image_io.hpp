// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// 8-bit images, datasets and their conversion to network tensors.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softvq/nets.hpp"
#include "softvq/tensor.hpp"

namespace softvq {

struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  // Interleaved H x W x C.
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const Image&) const = default;
};

struct Dataset {
  std::string source;
  std::vector<Image> images;

  bool empty() const { return images.empty(); }
  std::size_t size() const { return images.size(); }
};

inline constexpr std::size_t kCifarRecordBytes = 3073;

// CIFAR-10 binary batches: 1 label byte + 1024 R + 1024 G + 1024 B per record.
// `path` is one batch file or a directory whose *.bin files are read in name order.
Dataset load_cifar10(const std::string& path);
Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& source);

// Binary PGM (P5) / PPM (P6) with maxval 255.
Image parse_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& image);
Image load_pnm(const std::string& path);
void save_pnm(const std::string& path, const Image& image);
// All *.pgm / *.ppm / *.pnm files of a directory in name order.
Dataset load_pnm_dir(const std::string& dir);

// Seeded procedural textures (oriented gratings over smooth color fields).
Dataset synthetic_textures(std::size_t count, int height, int width, int channels,
                           std::uint64_t seed);

// Pixels scaled to [-1, 1], N x C x H x W.
Tensor images_to_tensor(std::span<const Image> images);
FloatTensor image_to_float(const Image& image);
// Inverse scaling with rounding and clamping to [0, 255].
Image float_to_image(const FloatTensor& chw);

// Mean squared error in 8-bit pixel units.
double mse_8bit(const Image& a, const Image& b);

// Squared-error unit conversion from the [-1, 1] network range to [0, 255].
inline constexpr double kPixelScale = 127.5;

}  // namespace softvq
