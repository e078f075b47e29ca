// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Dense 64-bit tensors with a dynamic reverse-mode tape.
//
// Every op returns a new Tensor that remembers its inputs when any of them
// requires a gradient; backward() walks that graph once in reverse topological
// order. Leaf gradients accumulate across backward() calls until zero_grad();
// gradients of intermediate nodes are reset at the start of every backward().
//
// Broadcasting is limited to same-shape operands or a single-element operand.

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace softvq {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  struct Node;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view for leaves (parameter updates, test perturbations).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  bool all_finite() const;

  // Deep copy of the values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Back-propagates d(loss)/d(leaf) into every requires_grad leaf reachable from
// `loss`. Throws ContractError when loss is not a single element or does not
// depend on any trainable tensor.
void backward(const Tensor& loss);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Convolutions on N x C x H x W inputs. conv2d weights are F x C x kh x kw;
// conv2d_transpose uses the same layout and maps F channels back to C.
// `bias` may be an undefined Tensor.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                        int pad);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);

// Softmax along `axis` (negative counts from the back), max-shifted.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);

// Identity forward, zero gradient backward.
Tensor stop_gradient(const Tensor& x);

// Forward value of `value`, gradient routed entirely to `gradient_path`:
// the composition sg(value - gradient_path) + gradient_path without the
// rounding of the subtraction and re-addition. Shapes must match.
Tensor straight_through(const Tensor& value, const Tensor& gradient_path);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Per-column squared L2 norms of an m x n matrix, shape {n}.
Tensor sq_norm_cols(const Tensor& z);
// D[i, j] = ||z_i - e_j||^2 for columns z_i of Z (m x n) and e_j of E (m x k); shape n x k.
Tensor pairwise_sq_dist(const Tensor& z, const Tensor& e);

// Picks sample `index` of an N x ... batch, keeping a leading extent of 1.
Tensor batch_item(const Tensor& x, std::size_t index);

// Latent layout changes between a 1 x C x H x W feature map and the m x (H*W*C/m)
// matrix whose rows are channels: column (y*W + x)*(C/m) + g holds channels
// g*m .. g*m+m-1 at pixel (y, x).
Tensor channels_to_columns(const Tensor& latent, std::size_t m);
Tensor columns_to_channels(const Tensor& z, std::size_t channels, std::size_t height,
                           std::size_t width);

}  // namespace softvq
