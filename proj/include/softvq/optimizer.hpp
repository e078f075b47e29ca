// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "softvq/nets.hpp"

namespace softvq {

// PyTorch defaults.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

// Adam over every tensor of a ParamStore, gradients supplied flattened in store order.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& params, std::span<const double> flat_grads, double lr);
  // Uses the gradients accumulated on the tensors themselves (missing = zero).
  void step(ParamStore& params, double lr);
  // The named tensor steps with lr * scale.
  void set_lr_scale(const std::string& name, double scale) { lr_scale_[name] = scale; }

 private:
  AdamConfig cfg_;
  std::map<std::string, AdamState, std::less<>> states_;
  std::map<std::string, double, std::less<>> lr_scale_;
};

// Gradients of every tensor in store order; tensors without a gradient contribute zeros.
std::vector<double> flatten_grads(const ParamStore& params);

inline constexpr double kOneCycleWarmupFraction = 0.3;
inline constexpr double kOneCycleDivFactor = 25.0;

// Cosine ramp from base_lr/25 to base_lr over the first 30% of steps, then
// cosine decay back to base_lr/25 at the last step.
double one_cycle_lr(std::size_t step, std::size_t total_steps, double base_lr);

}  // namespace softvq
