// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Rate-distortion sweeps: train one model per grid point and measure it.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "softvq/image_io.hpp"
#include "softvq/trainer.hpp"

namespace softvq {

struct SweepGrid {
  std::vector<std::size_t> ks;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
};

struct RDPoint {
  std::size_t k = 0;
  std::size_t m = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double bpp = 0.0;            // actual bitstream bits per pixel
  double mse = 0.0;            // 8-bit pixel units
  double hard_xent_bpp = 0.0;  // model cross-entropy per pixel
  double model_entropy = 0.0;  // H(q) in nats
};

// Called after each point with its index in the grid order.
using SweepProgress = std::function<void(std::size_t, const RDPoint&)>;

// Grid order: k outer, then alpha, then seed.
std::vector<RDPoint> rd_sweep(const Dataset& train_data, const Dataset& eval_data,
                              const TrainConfig& base, const SweepGrid& grid,
                              const SweepProgress& progress = {});

RDPoint measure_point(const Model& model, const Dataset& eval_data, double alpha,
                      std::uint64_t seed, int threads = 1);

void write_rd_csv(std::ostream& os, const std::vector<RDPoint>& points);

}  // namespace softvq
