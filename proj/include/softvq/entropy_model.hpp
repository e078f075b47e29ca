// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Factorized categorical model q = softmax(logits) over the k codes, shared
// by every position of a code vector. All quantities are in nats.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "softvq/quantizer.hpp"
#include "softvq/tensor.hpp"

namespace softvq {

struct CategoricalModel {
  // Trainable logits of shape {k}.
  Tensor logits;

  std::size_t size() const { return logits.numel(); }
  // softmax(logits) evaluated in 64-bit.
  std::vector<double> probabilities() const;
};

CategoricalModel uniform_model(std::size_t k);

// Mean over code positions of -log q(c_j). Differentiable in the logits only.
Tensor hard_xent(std::span<const std::uint32_t> codes, const CategoricalModel& model);

// Mean over rows of -sum_a P[j, a] log sg(q(a)). Differentiable in P only.
Tensor soft_xent(const Tensor& assignment, const CategoricalModel& model);

// -sum q log q with 0 log 0 = 0.
double entropy(std::span<const double> p);
double model_entropy(const CategoricalModel& model);

struct XentDecomposition {
  double entropy = 0.0;        // H(p)
  double kl = 0.0;             // KL(p || q)
  double cross_entropy = 0.0;  // H(p, q)
};

// The three terms, each evaluated directly from p and q.
XentDecomposition xent_decomposition(std::span<const double> p, std::span<const double> q);

// Normalized code histogram over all vectors.
std::vector<double> fit_histogram(std::span<const CodeVector> codes, std::size_t k);

// Trains the logits alone by Adam on the hard cross-entropy of codes drawn
// from `histogram` (the empirical negative log-likelihood).
void fit_entropy_model(CategoricalModel& model, std::span<const double> histogram, int steps,
                       double lr);

struct RateReport {
  double hard_xent = 0.0;
  double soft_xent = 0.0;
  double model_entropy = 0.0;
  double empirical_code_entropy = 0.0;
  double kl_estimate = 0.0;
};

inline double nats_to_bits(double nats) { return nats / 0.69314718055994530942; }

}  // namespace softvq
