// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/entropy_model.hpp"

#include <cmath>

#include "softvq/error.hpp"
#include "softvq/optimizer.hpp"

namespace softvq {

std::vector<double> CategoricalModel::probabilities() const {
  const Tensor q = softmax(logits.clone(false));
  return {q.data().begin(), q.data().end()};
}

CategoricalModel uniform_model(std::size_t k) {
  if (k < 2) throw ConfigError("categorical model needs k >= 2");
  return {Tensor::zeros({k}, true)};
}

namespace {

Tensor log_probs_column(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("logits must be a vector");
  return reshape(log_softmax(logits), {logits.numel(), 1});
}

}  // namespace

Tensor hard_xent(std::span<const std::uint32_t> codes, const CategoricalModel& model) {
  const Tensor onehot = hard_assignment(codes, model.size());
  return scale(mean(matmul(onehot, log_probs_column(model.logits))), -1.0);
}

Tensor soft_xent(const Tensor& assignment, const CategoricalModel& model) {
  if (assignment.rank() != 2 || assignment.dim(1) != model.size()) {
    throw DimensionError("soft_xent: assignment " + shape_str(assignment.shape()) +
                         " does not match k=" + std::to_string(model.size()));
  }
  const Tensor frozen = stop_gradient(log_probs_column(model.logits));
  return scale(mean(matmul(assignment, frozen)), -1.0);
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double model_entropy(const CategoricalModel& model) { return entropy(model.probabilities()); }

XentDecomposition xent_decomposition(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("xent_decomposition: size mismatch");
  XentDecomposition out;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] <= 0.0) continue;
    if (q[a] <= 0.0) throw ContractError("q must be positive where p is");
    out.entropy -= p[a] * std::log(p[a]);
    out.kl += p[a] * std::log(p[a] / q[a]);
    out.cross_entropy -= p[a] * std::log(q[a]);
  }
  return out;
}

std::vector<double> fit_histogram(std::span<const CodeVector> codes, std::size_t k) {
  std::vector<double> counts(k, 0.0);
  double total = 0.0;
  for (const auto& vec : codes) {
    for (auto c : vec) {
      if (c >= k) throw ContractError("code out of range in fit_histogram");
      counts[c] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw ContractError("fit_histogram: no codes");
  for (double& c : counts) c /= total;
  return counts;
}

void fit_entropy_model(CategoricalModel& model, std::span<const double> histogram, int steps,
                       double lr) {
  if (histogram.size() != model.size()) throw DimensionError("histogram size mismatch");
  const Tensor target({1, histogram.size()},
                      std::vector<double>(histogram.begin(), histogram.end()));
  AdamState state;
  for (int s = 0; s < steps; ++s) {
    model.logits.zero_grad();
    // Expected NLL under the histogram == mean hard cross-entropy over the codes it summarizes.
    const Tensor nll = scale(sum(matmul(target, log_probs_column(model.logits))), -1.0);
    backward(nll);
    adam_step(model.logits.mutable_data(), model.logits.grad(), state, lr);
  }
  model.logits.zero_grad();
}

}  // namespace softvq
