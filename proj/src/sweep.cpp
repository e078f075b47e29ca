// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/sweep.hpp"

#include <ostream>

#include "softvq/codec.hpp"
#include "softvq/error.hpp"

namespace softvq {

RDPoint measure_point(const Model& model, const Dataset& eval_data, double alpha,
                      std::uint64_t seed, int threads) {
  const Codec codec(model);
  const EvalReport report = evaluate(codec, eval_data, threads);
  RDPoint p;
  p.k = model.config.k;
  p.m = model.config.m;
  p.alpha = alpha;
  p.seed = seed;
  p.bpp = report.bpp;
  p.mse = report.mse;
  p.hard_xent_bpp = report.hard_xent_bpp;
  p.model_entropy = entropy(codec.probabilities());
  return p;
}

std::vector<RDPoint> rd_sweep(const Dataset& train_data, const Dataset& eval_data,
                              const TrainConfig& base, const SweepGrid& grid,
                              const SweepProgress& progress) {
  if (grid.ks.empty() || grid.alphas.empty() || grid.seeds.empty()) {
    throw ConfigError("sweep grid needs at least one k, alpha and seed");
  }
  std::vector<RDPoint> points;
  for (auto k : grid.ks) {
    for (auto alpha : grid.alphas) {
      for (auto seed : grid.seeds) {
        TrainConfig cfg = base;
        cfg.model.k = k;
        cfg.alpha = alpha;
        cfg.seed = seed;
        const TrainResult trained = train(train_data, cfg);
        points.push_back(measure_point(trained.model, eval_data, alpha, seed, cfg.threads));
        if (progress) progress(points.size() - 1, points.back());
      }
    }
  }
  return points;
}

void write_rd_csv(std::ostream& os, const std::vector<RDPoint>& points) {
  const auto old_precision = os.precision(10);
  os << "k,m,alpha,seed,bpp,mse,hard_xent_bpp,model_entropy\n";
  for (const auto& p : points) {
    os << p.k << ',' << p.m << ',' << p.alpha << ',' << p.seed << ',' << p.bpp << ',' << p.mse
       << ',' << p.hard_xent_bpp << ',' << p.model_entropy << '\n';
  }
  os.precision(old_precision);
}

}  // namespace softvq
