// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// End-to-end training of encoder, decoder, codebook and entropy model.
//
// Per sample the loss is
//   distortion(x, decoder(straight_through(hard, soft))) + alpha * s(c) + beta * h(c)
// where s is the soft cross-entropy (gradient into encoder and codebook, entropy
// model frozen) and h the hard cross-entropy (gradient into the entropy model only).

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "softvq/image_io.hpp"
#include "softvq/model.hpp"
#include "softvq/quantizer.hpp"
#include "softvq/tensor.hpp"

namespace softvq {

struct LossWeights {
  double alpha = 0.0;
  double beta = 1.0;
  double sigma = 1.0;
};

struct LossTerms {
  // Means over the batch.
  Tensor total;
  Tensor distortion;  // mse in [-1, 1] pixel space
  Tensor soft_xent;   // nats per code
  Tensor hard_xent;   // nats per code
  std::vector<CodeVector> codes;
};

// Batch N x C x H x W in [-1, 1].
LossTerms total_loss(const Tensor& batch, const ParamStore& params, const ModelConfig& cfg,
                     const LossWeights& weights);

struct TrainConfig {
  ModelConfig model;
  double alpha = 0.0;
  double beta = 1.0;
  // When set, sigma moves linearly from model.sigma to this value over training.
  std::optional<double> sigma_final;
  int epochs = 15;
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  // Learning-rate multiplier for the entropy model logits.
  double entropy_lr_scale = 1.0;
  std::uint64_t seed = 0;
  // Only "mse" is supported.
  std::string distortion = "mse";
  // Entropy-model-only Adam steps on the final training-set code histogram.
  int entropy_refit_steps = 2000;
  double entropy_refit_lr = 0.05;
  // Worker threads for per-sample gradients; <= 0 uses all hardware threads.
  int threads = 1;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double distortion = 0.0;
  double soft_xent = 0.0;
  double hard_xent = 0.0;
  double model_entropy_bits = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

// Deterministic for a given seed regardless of thread count: per-sample
// gradients are reduced in sample order.
TrainResult train(const Dataset& data, const TrainConfig& cfg);

// Codes of every image under the 32-bit inference path.
std::vector<CodeVector> dataset_codes(const Model& model, const Dataset& data, int threads = 1);

void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& log);

}  // namespace softvq
