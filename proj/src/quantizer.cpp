// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/quantizer.hpp"

#include <limits>

#include "softvq/error.hpp"

namespace softvq {

std::string to_string(DistanceKind kind) {
  return kind == DistanceKind::kSquared ? "squared" : "euclidean";
}

DistanceKind parse_distance(std::string_view text) {
  if (text == "euclidean") return DistanceKind::kEuclidean;
  if (text == "squared") return DistanceKind::kSquared;
  throw ConfigError("unknown distance kind '" + std::string(text) + "'");
}

Tensor reshape_latent(const Tensor& z, std::size_t m) {
  if (m == 0 || z.numel() % m != 0) {
    throw ConfigError("latent size " + std::to_string(z.numel()) + " not divisible by m=" +
                      std::to_string(m));
  }
  return transpose(reshape(z, {z.numel() / m, m}));
}

Tensor flatten_latent(const Tensor& z) {
  if (z.rank() != 2) throw DimensionError("flatten_latent expects an m x n matrix");
  return reshape(transpose(z), {z.numel()});
}

namespace {

void check_pair(const Tensor& z, const Tensor& codebook) {
  if (z.rank() != 2 || codebook.rank() != 2 || z.dim(0) != codebook.dim(0)) {
    throw DimensionError("quantizer: latent " + shape_str(z.shape()) + " vs codebook " +
                         shape_str(codebook.shape()));
  }
  if (codebook.dim(1) < 2) throw ConfigError("codebook needs at least 2 columns");
}

template <class T>
std::uint32_t nearest(const T* z, std::size_t n, std::size_t i, const T* e, std::size_t m,
                      std::size_t k) {
  std::uint32_t best = 0;
  T best_dist = std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    T acc = 0;
    for (std::size_t r = 0; r < m; ++r) {
      const T diff = z[r * n + i] - e[r * k + j];
      acc += diff * diff;
    }
    if (acc < best_dist) {
      best_dist = acc;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return best;
}

}  // namespace

HardQuantization quantize_hard(const Tensor& z, const Tensor& codebook) {
  check_pair(z, codebook);
  const std::size_t m = z.dim(0), n = z.dim(1), k = codebook.dim(1);
  HardQuantization out;
  out.codes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.codes[i] = nearest(z.data().data(), n, i, codebook.data().data(), m, k);
  }
  out.quantized = dequantize(out.codes, stop_gradient(codebook));
  return out;
}

Tensor code_distances(const Tensor& z, const Tensor& codebook, DistanceKind kind) {
  check_pair(z, codebook);
  Tensor sq = pairwise_sq_dist(z, codebook);
  if (kind == DistanceKind::kSquared) return sq;
  return sqrt(add_scalar(sq, kNormEpsilon));
}

Tensor soft_assignment(const Tensor& z, const Tensor& codebook, double sigma, DistanceKind kind) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  return softmax(scale(code_distances(z, codebook, kind), -sigma), 1);
}

Tensor quantize_soft(const Tensor& z, const Tensor& codebook, double sigma, DistanceKind kind) {
  return quantize_soft(soft_assignment(z, codebook, sigma, kind), codebook);
}

Tensor quantize_soft(const Tensor& assignment, const Tensor& codebook) {
  if (assignment.rank() != 2 || codebook.rank() != 2 || assignment.dim(1) != codebook.dim(1)) {
    throw DimensionError("quantize_soft: assignment " + shape_str(assignment.shape()) +
                         " vs codebook " + shape_str(codebook.shape()));
  }
  return matmul(codebook, transpose(assignment));
}

Tensor hard_assignment(std::span<const std::uint32_t> codes, std::size_t k) {
  if (codes.empty()) throw DimensionError("hard_assignment: empty code vector");
  std::vector<double> onehot(codes.size() * k, 0.0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= k) {
      throw ContractError("code " + std::to_string(codes[i]) + " out of range for k=" +
                          std::to_string(k));
    }
    onehot[i * k + codes[i]] = 1.0;
  }
  return Tensor({codes.size(), k}, std::move(onehot));
}

Tensor dequantize(std::span<const std::uint32_t> codes, const Tensor& codebook) {
  if (codebook.rank() != 2) throw DimensionError("dequantize: codebook must be m x k");
  if (codes.empty()) throw DimensionError("dequantize: empty code vector");
  const std::size_t m = codebook.dim(0), k = codebook.dim(1), n = codes.size();
  const auto e = codebook.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (codes[i] >= k) {
      throw ContractError("code " + std::to_string(codes[i]) + " out of range for k=" +
                          std::to_string(k));
    }
    for (std::size_t r = 0; r < m; ++r) out[r * n + i] = e[r * k + codes[i]];
  }
  return Tensor({m, n}, std::move(out));
}

Tensor seed_codebook(const Tensor& samples, std::size_t k, Rng& rng) {
  if (samples.rank() != 2 || samples.dim(1) == 0) {
    throw DimensionError("seed_codebook: samples must be m x N");
  }
  if (k < 2) throw ConfigError("codebook needs at least 2 columns");
  const std::size_t m = samples.dim(0), count = samples.dim(1);
  const auto s = samples.data();
  std::vector<double> best(count, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> picks;
  picks.reserve(k);
  auto update = [&](std::size_t pick) {
    for (std::size_t i = 0; i < count; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        const double diff = s[r * count + i] - s[r * count + pick];
        acc += diff * diff;
      }
      best[i] = std::min(best[i], acc);
    }
  };
  picks.push_back(rng.below(count));
  update(picks.back());
  while (picks.size() < k) {
    double total = 0.0;
    for (double b : best) total += b;
    std::size_t pick = count - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < count; ++i) {
        target -= best[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(count);
    }
    picks.push_back(pick);
    update(pick);
  }
  std::vector<double> e(m * k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < m; ++r) e[r * k + j] = s[r * count + picks[j]];
  return Tensor({m, k}, std::move(e), true);
}

CodeVector quantize_hard(const FloatTensor& z, const FloatTensor& codebook) {
  if (z.shape.size() != 2 || codebook.shape.size() != 2 || z.shape[0] != codebook.shape[0]) {
    throw DimensionError("quantize_hard: latent " + shape_str(z.shape) + " vs codebook " +
                         shape_str(codebook.shape));
  }
  const std::size_t m = z.shape[0], n = z.shape[1], k = codebook.shape[1];
  CodeVector codes(n);
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = nearest(z.data.data(), n, i, codebook.data.data(), m, k);
  }
  return codes;
}

FloatTensor dequantize(std::span<const std::uint32_t> codes, const FloatTensor& codebook) {
  if (codebook.shape.size() != 2) throw DimensionError("dequantize: codebook must be m x k");
  const std::size_t m = codebook.shape[0], k = codebook.shape[1], n = codes.size();
  FloatTensor out{{m, n}, std::vector<float>(m * n)};
  for (std::size_t i = 0; i < n; ++i) {
    if (codes[i] >= k) throw ContractError("code out of range");
    for (std::size_t r = 0; r < m; ++r) out.data[r * n + i] = codebook.data[r * k + codes[i]];
  }
  return out;
}

FloatTensor channels_to_columns(const FloatTensor& latent, std::size_t m) {
  if (latent.shape.size() != 3) throw DimensionError("channels_to_columns expects C x H x W");
  const std::size_t c = latent.shape[0], hw = latent.shape[1] * latent.shape[2];
  if (m == 0 || c % m != 0) throw ConfigError("latent channels not divisible by m");
  const std::size_t groups = c / m, columns = hw * groups;
  FloatTensor out{{m, columns}, std::vector<float>(latent.data.size())};
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      out.data[(ch % m) * columns + p * groups + ch / m] = latent.data[ch * hw + p];
  return out;
}

FloatTensor columns_to_channels(const FloatTensor& z, std::size_t channels, std::size_t height,
                                std::size_t width) {
  if (z.shape.size() != 2 || z.data.size() != channels * height * width ||
      channels % z.shape[0] != 0) {
    throw DimensionError("columns_to_channels: shape mismatch");
  }
  const std::size_t m = z.shape[0], hw = height * width, groups = channels / m,
                    columns = hw * groups;
  FloatTensor out{{channels, height, width}, std::vector<float>(z.data.size())};
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      out.data[ch * hw + p] = z.data[(ch % m) * columns + p * groups + ch / m];
  return out;
}

}  // namespace softvq
