// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "softvq/error.hpp"

namespace softvq {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void Adam::step(ParamStore& params, std::span<const double> flat_grads, double lr) {
  if (flat_grads.size() != params.total_elements()) {
    throw DimensionError("Adam::step: expected " + std::to_string(params.total_elements()) +
                         " gradient entries, got " + std::to_string(flat_grads.size()));
  }
  std::size_t offset = 0;
  for (auto& [name, tensor] : params) {
    const std::size_t n = tensor.numel();
    const auto scale = lr_scale_.find(name);
    const double tensor_lr = scale == lr_scale_.end() ? lr : lr * scale->second;
    adam_step(tensor.mutable_data(), flat_grads.subspan(offset, n), states_[name], tensor_lr, cfg_);
    offset += n;
  }
}

void Adam::step(ParamStore& params, double lr) {
  const auto grads = flatten_grads(params);
  step(params, grads, lr);
}

std::vector<double> flatten_grads(const ParamStore& params) {
  std::vector<double> out;
  out.reserve(params.total_elements());
  for (const auto& [name, tensor] : params) {
    const auto g = tensor.grad();
    if (g.empty()) {
      out.insert(out.end(), tensor.numel(), 0.0);
    } else {
      out.insert(out.end(), g.begin(), g.end());
    }
  }
  return out;
}

double one_cycle_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps == 0 || !(base_lr > 0.0)) {
    throw ConfigError("one_cycle_lr needs total_steps > 0 and base_lr > 0");
  }
  const double floor_lr = base_lr / kOneCycleDivFactor;
  const double last = static_cast<double>(total_steps > 1 ? total_steps - 1 : 1);
  const double warmup = kOneCycleWarmupFraction * last;
  const double s = std::min(static_cast<double>(step), last);
  auto cosine = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (s < warmup) return cosine(floor_lr, base_lr, s / warmup);
  return cosine(base_lr, floor_lr, (s - warmup) / (last - warmup));
}

}  // namespace softvq
