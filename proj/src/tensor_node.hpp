// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "softvq/tensor.hpp"

namespace softvq {

struct Tensor::Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Accumulates this node's gradient into its inputs. Empty for leaves.
  std::function<void(Node&)> backward_fn;

  bool leaf() const { return !backward_fn; }

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace softvq
