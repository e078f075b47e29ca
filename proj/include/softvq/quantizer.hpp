// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Vector quantization of latent columns against a learned codebook.
//
// A latent z of size d is viewed as an m x (d/m) matrix Z whose columns are
// quantized to the nearest of the k codebook columns of E (m x k). Training
// uses the hard value in the forward pass and the softmax-weighted soft value
// for gradients.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "softvq/nets.hpp"
#include "softvq/random.hpp"
#include "softvq/tensor.hpp"

namespace softvq {

using CodeVector = std::vector<std::uint32_t>;

enum class DistanceKind {
  // sqrt(||z - e||^2 + eps), eps = kNormEpsilon.
  kEuclidean,
  kSquared,
};

inline constexpr double kNormEpsilon = 1e-12;

std::string to_string(DistanceKind kind);
DistanceKind parse_distance(std::string_view text);

// [d] (or any shape with d elements) -> m x d/m; column i holds z[i*m .. i*m+m-1].
Tensor reshape_latent(const Tensor& z, std::size_t m);
// Inverse of reshape_latent: m x n -> [m*n].
Tensor flatten_latent(const Tensor& z);

struct HardQuantization {
  CodeVector codes;
  // m x n, constant (carries no gradient).
  Tensor quantized;
};

// Nearest codebook column per column of Z; ties go to the lowest index.
// Distances are compared squared, which orders columns the same way as any
// monotone norm.
HardQuantization quantize_hard(const Tensor& z, const Tensor& codebook);

// n x k matrix of per-column distances under `kind`.
Tensor code_distances(const Tensor& z, const Tensor& codebook, DistanceKind kind);

// Rows softmax(-sigma * distance) over the k codes; n x k.
Tensor soft_assignment(const Tensor& z, const Tensor& codebook, double sigma,
                       DistanceKind kind = DistanceKind::kEuclidean);

// Softmax-weighted combination of codebook columns, m x n.
Tensor quantize_soft(const Tensor& z, const Tensor& codebook, double sigma,
                     DistanceKind kind = DistanceKind::kEuclidean);
// Same, reusing a soft assignment computed for the same z and codebook.
Tensor quantize_soft(const Tensor& assignment, const Tensor& codebook);

// One-hot n x k matrix of the given codes.
Tensor hard_assignment(std::span<const std::uint32_t> codes, std::size_t k);

// Column i = codebook[:, codes[i]].
Tensor dequantize(std::span<const std::uint32_t> codes, const Tensor& codebook);

// k columns drawn from `samples` (m x N): the first uniformly, each next with
// probability proportional to its squared distance to the closest pick.
Tensor seed_codebook(const Tensor& samples, std::size_t k, Rng& rng);

// 32-bit inference counterparts. z and codebook are m x n / m x k.
CodeVector quantize_hard(const FloatTensor& z, const FloatTensor& codebook);
FloatTensor dequantize(std::span<const std::uint32_t> codes, const FloatTensor& codebook);
// C x H x W latent <-> m x (H*W*C/m) with the channel grouping of channels_to_columns.
FloatTensor channels_to_columns(const FloatTensor& latent, std::size_t m);
FloatTensor columns_to_channels(const FloatTensor& z, std::size_t channels, std::size_t height,
                                std::size_t width);

}  // namespace softvq
