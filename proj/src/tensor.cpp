// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "softvq/error.hpp"
#include "softvq/kernels.hpp"
#include "tensor_node.hpp"

namespace softvq {

using NodePtr = std::shared_ptr<Tensor::Node>;
using Node = Tensor::Node;

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<std::size_t>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape kEmpty;
  return node_ ? node_->shape : kEmpty;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
  return node_ ? std::span<const double>(node_->value) : std::span<const double>();
}

std::span<double> Tensor::mutable_data() {
  return node_ ? std::span<double>(node_->value) : std::span<double>();
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_ || node_->leaf(); }

std::span<const double> Tensor::grad() const {
  if (!node_ || node_->grad.size() != node_->value.size()) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

bool Tensor::all_finite() const {
  return std::all_of(data().begin(), data().end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(shape(), std::vector<double>(data().begin(), data().end()), requires_grad);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a single-element loss, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward(): loss does not depend on any trainable tensor");
  }

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->leaf()) (*it)->backward_fn(**it);
  }
}

namespace {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                    [](const NodePtr& n) { return n && n->requires_grad; });
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of an input, or nullptr when it does not need one.
double* grad_of(const NodePtr& n) {
  return (n && n->requires_grad) ? n->grad_buffer().data() : nullptr;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

void require_rank(const Tensor& t, std::size_t r, const char* op) {
  require_defined(t, op);
  if (t.rank() != r) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(t.shape()));
  }
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& a, Forward f, Derivative df) {
  require_defined(a, "unary op");
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), {a.node()}, [df](Node& self) {
    const auto& x = self.inputs[0];
    double* gx = grad_of(x);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      gx[i] += self.grad[i] * df(x->value[i], self.value[i]);
    }
  });
}

enum class Broadcast { kNone, kScalarA, kScalarB };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.numel() == 1) return Broadcast::kScalarB;
  if (a.numel() == 1) return Broadcast::kScalarA;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

// f(x, y) with partial derivatives dfa(x, y) and dfb(x, y).
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA dfa, DB dfb) {
  const Broadcast mode = broadcast_mode(a, b, op);
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto av = a.data(), bv = b.data();
  auto ia = [mode](std::size_t i) { return mode == Broadcast::kScalarA ? 0 : i; };
  auto ib = [mode](std::size_t i) { return mode == Broadcast::kScalarB ? 0 : i; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ia(i)], bv[ib(i)]);
  return make_result(shape, std::move(out), {a.node(), b.node()},
                     [ia, ib, dfa, dfb](Node& self) {
                       const auto& na = self.inputs[0];
                       const auto& nb = self.inputs[1];
                       double* ga = grad_of(na);
                       double* gb = grad_of(nb);
                       for (std::size_t i = 0; i < self.value.size(); ++i) {
                         const double x = na->value[ia(i)], y = nb->value[ib(i)];
                         if (ga) ga[ia(i)] += self.grad[i] * dfa(x, y);
                         if (gb) gb[ib(i)] += self.grad[i] * dfb(x, y);
                       }
                     });
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  const int r = static_cast<int>(shape.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw DimensionError(std::string(op) + ": axis out of range");
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (int i = axis + 1; i < r; ++i) s.inner *= shape[i];
  return s;
}

kernels::ConvGeometry conv_geometry(std::size_t channels, std::size_t height, std::size_t width,
                                    const Tensor& w, int stride, int pad) {
  kernels::ConvGeometry g;
  g.channels = static_cast<int>(channels);
  g.height = static_cast<int>(height);
  g.width = static_cast<int>(width);
  g.filters = static_cast<int>(w.dim(0));
  g.kernel_h = static_cast<int>(w.dim(2));
  g.kernel_w = static_cast<int>(w.dim(3));
  g.stride = stride;
  g.pad = pad;
  return g;
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw DimensionError(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(channels) + " channels");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto p = a.dim(0), q = a.dim(1), r = b.dim(1);
  if (b.dim(0) != q) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(p * r);
  kernels::gemm<double>(false, false, p, r, q, a.data().data(), b.data().data(), out.data(),
                        false);
  return make_result({p, r}, std::move(out), {a.node(), b.node()}, [p, q, r](Node& self) {
    const auto& na = self.inputs[0];
    const auto& nb = self.inputs[1];
    if (double* ga = grad_of(na)) {
      kernels::gemm<double>(false, true, p, q, r, self.grad.data(), nb->value.data(), ga, true);
    }
    if (double* gb = grad_of(nb)) {
      kernels::gemm<double>(true, false, q, r, p, na->value.data(), self.grad.data(), gb, true);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(rows * cols);
  const auto in = a.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
  return make_result({cols, rows}, std::move(out), {a.node()}, [rows, cols](Node& self) {
    double* ga = grad_of(self.inputs[0]);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += self.grad[j * rows + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    double* ga = grad_of(self.inputs[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  if (w.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  if (stride < 1 || pad < 0) throw DimensionError("conv2d: stride must be >= 1, pad >= 0");
  check_bias(bias, w.dim(0), "conv2d");
  const auto g = conv_geometry(x.dim(1), x.dim(2), x.dim(3), w, stride, pad);
  if (g.height + 2 * pad < g.kernel_h || g.width + 2 * pad < g.kernel_w) {
    throw DimensionError("conv2d: non-positive output size for input " + shape_str(x.shape()) +
                         " and kernel " + shape_str(w.shape()));
  }
  const std::size_t batch = x.dim(0);
  std::vector<double> out(batch * g.out_size());
  std::vector<double> col(g.patch_size() * g.out_pixels());
  const double* b = bias.defined() ? bias.data().data() : nullptr;
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::conv2d_forward<double>(g, x.data().data() + n * g.in_size(), w.data().data(), b,
                                    out.data() + n * g.out_size(), col);
  }
  std::vector<NodePtr> inputs{x.node(), w.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result(
      {batch, static_cast<std::size_t>(g.filters), static_cast<std::size_t>(g.out_h()),
       static_cast<std::size_t>(g.out_w())},
      std::move(out), std::move(inputs), [g, batch](Node& self) {
        const auto& nx = self.inputs[0];
        const auto& nw = self.inputs[1];
        double* gx = grad_of(nx);
        double* gw = grad_of(nw);
        double* gb = self.inputs.size() > 2 ? grad_of(self.inputs[2]) : nullptr;
        std::vector<double> col(g.patch_size() * g.out_pixels());
        for (std::size_t n = 0; n < batch; ++n) {
          kernels::conv2d_backward<double>(g, nx->value.data() + n * g.in_size(),
                                           nw->value.data(), self.grad.data() + n * g.out_size(),
                                           gx ? gx + n * g.in_size() : nullptr, gw, gb, col);
        }
      });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                        int pad) {
  require_rank(x, 4, "conv2d_transpose");
  require_rank(w, 4, "conv2d_transpose");
  if (w.dim(0) != x.dim(1)) {
    throw DimensionError("conv2d_transpose: weight " + shape_str(w.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  if (stride < 1 || pad < 0) {
    throw DimensionError("conv2d_transpose: stride must be >= 1, pad >= 0");
  }
  const long out_h = (static_cast<long>(x.dim(2)) - 1) * stride - 2L * pad +
                     static_cast<long>(w.dim(2));
  const long out_w = (static_cast<long>(x.dim(3)) - 1) * stride - 2L * pad +
                     static_cast<long>(w.dim(3));
  if (out_h <= 0 || out_w <= 0) {
    throw DimensionError("conv2d_transpose: non-positive output size for input " +
                         shape_str(x.shape()) + " and kernel " + shape_str(w.shape()));
  }
  check_bias(bias, w.dim(1), "conv2d_transpose");
  const auto g = conv_geometry(w.dim(1), out_h, out_w, w, stride, pad);
  const std::size_t batch = x.dim(0);
  std::vector<double> out(batch * g.in_size());
  std::vector<double> col(g.patch_size() * g.out_pixels());
  const double* b = bias.defined() ? bias.data().data() : nullptr;
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::conv_transpose_forward<double>(g, x.data().data() + n * g.out_size(),
                                            w.data().data(), b, out.data() + n * g.in_size(), col);
  }
  std::vector<NodePtr> inputs{x.node(), w.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result(
      {batch, static_cast<std::size_t>(g.channels), static_cast<std::size_t>(out_h),
       static_cast<std::size_t>(out_w)},
      std::move(out), std::move(inputs), [g, batch](Node& self) {
        const auto& nx = self.inputs[0];
        const auto& nw = self.inputs[1];
        double* gx = grad_of(nx);
        double* gw = grad_of(nw);
        double* gb = self.inputs.size() > 2 ? grad_of(self.inputs[2]) : nullptr;
        std::vector<double> col(g.patch_size() * g.out_pixels());
        for (std::size_t n = 0; n < batch; ++n) {
          kernels::conv_transpose_backward<double>(
              g, nx->value.data() + n * g.out_size(), nw->value.data(),
              self.grad.data() + n * g.in_size(), gx ? gx + n * g.out_size() : nullptr, gw, gb,
              col);
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax(const Tensor& x, int axis) {
  require_defined(x, "softmax");
  const auto s = split_axis(x.shape(), axis, "softmax");
  const auto in = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = in[base];
      for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, in[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) {
        const double e = std::exp(in[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.len; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [s](Node& self) {
    double* gx = grad_of(self.inputs[0]);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) {
          dot += self.grad[base + j * s.inner] * self.value[base + j * s.inner];
        }
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += self.value[at] * (self.grad[at] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  require_defined(x, "log_softmax");
  const auto s = split_axis(x.shape(), axis, "log_softmax");
  const auto in = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = in[base];
      for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, in[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) total += std::exp(in[base + j * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t j = 0; j < s.len; ++j) {
        out[base + j * s.inner] = in[base + j * s.inner] - lse;
      }
    }
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [s](Node& self) {
    double* gx = grad_of(self.inputs[0]);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double gsum = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) gsum += self.grad[base + j * s.inner];
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += self.grad[at] - std::exp(self.value[at]) * gsum;
        }
      }
    }
  });
}

Tensor stop_gradient(const Tensor& x) {
  require_defined(x, "stop_gradient");
  return x.clone(false);
}

Tensor straight_through(const Tensor& value, const Tensor& gradient_path) {
  require_defined(value, "straight_through");
  require_defined(gradient_path, "straight_through");
  if (value.shape() != gradient_path.shape()) {
    throw DimensionError("straight_through: shapes differ " + shape_str(value.shape()) + " vs " +
                         shape_str(gradient_path.shape()));
  }
  std::vector<double> out(value.data().begin(), value.data().end());
  return make_result(value.shape(), std::move(out), {gradient_path.node()}, [](Node& self) {
    double* g = grad_of(self.inputs[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({}, {total}, {a.node()}, [](Node& self) {
    double* ga = grad_of(self.inputs[0]);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sq_norm_cols(const Tensor& z) {
  require_rank(z, 2, "sq_norm_cols");
  const auto m = z.dim(0), n = z.dim(1);
  const auto in = z.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = 0; i < n; ++i) out[i] += in[r * n + i] * in[r * n + i];
  return make_result({n}, std::move(out), {z.node()}, [m, n](Node& self) {
    const auto& nz = self.inputs[0];
    double* gz = grad_of(nz);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t i = 0; i < n; ++i) gz[r * n + i] += 2.0 * nz->value[r * n + i] * self.grad[i];
  });
}

Tensor pairwise_sq_dist(const Tensor& z, const Tensor& e) {
  require_rank(z, 2, "pairwise_sq_dist");
  require_rank(e, 2, "pairwise_sq_dist");
  if (z.dim(0) != e.dim(0)) {
    throw DimensionError("pairwise_sq_dist: row counts differ " + shape_str(z.shape()) + " vs " +
                         shape_str(e.shape()));
  }
  const auto m = z.dim(0), n = z.dim(1), k = e.dim(1);
  const auto zv = z.data(), ev = e.data();
  std::vector<double> out(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        const double diff = zv[r * n + i] - ev[r * k + j];
        acc += diff * diff;
      }
      out[i * k + j] = acc;
    }
  }
  return make_result({n, k}, std::move(out), {z.node(), e.node()}, [m, n, k](Node& self) {
    const auto& nz = self.inputs[0];
    const auto& ne = self.inputs[1];
    double* gz = grad_of(nz);
    double* ge = grad_of(ne);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double g = self.grad[i * k + j];
        if (g == 0.0) continue;
        for (std::size_t r = 0; r < m; ++r) {
          const double d = 2.0 * (nz->value[r * n + i] - ne->value[r * k + j]) * g;
          if (gz) gz[r * n + i] += d;
          if (ge) ge[r * k + j] -= d;
        }
      }
    }
  });
}

Tensor batch_item(const Tensor& x, std::size_t index) {
  require_defined(x, "batch_item");
  if (x.rank() < 1 || index >= x.dim(0)) {
    throw DimensionError("batch_item: index " + std::to_string(index) + " out of range for " +
                         shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = 1;
  const std::size_t stride = shape_numel(shape);
  const auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(index * stride);
  std::vector<double> out(begin, begin + static_cast<std::ptrdiff_t>(stride));
  return make_result(std::move(shape), std::move(out), {x.node()}, [index, stride](Node& self) {
    double* gx = grad_of(self.inputs[0]) + index * stride;
    for (std::size_t i = 0; i < stride; ++i) gx[i] += self.grad[i];
  });
}

namespace {

// Flat index pairs (latent offset, matrix offset) for the channel grouping.
template <class Visit>
void for_each_latent_entry(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t m, Visit visit) {
  const std::size_t groups = channels / m;
  const std::size_t columns = height * width * groups;
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t g = c / m, r = c % m;
    for (std::size_t p = 0; p < height * width; ++p) {
      visit(c * height * width + p, r * columns + p * groups + g);
    }
  }
}

}  // namespace

Tensor channels_to_columns(const Tensor& latent, std::size_t m) {
  require_rank(latent, 4, "channels_to_columns");
  if (latent.dim(0) != 1) throw DimensionError("channels_to_columns: expects a single sample");
  const std::size_t c = latent.dim(1), h = latent.dim(2), w = latent.dim(3);
  if (m == 0 || c % m != 0) {
    throw ConfigError("latent channels " + std::to_string(c) + " not divisible by m=" +
                      std::to_string(m));
  }
  const auto in = latent.data();
  std::vector<double> out(in.size());
  for_each_latent_entry(c, h, w, m, [&](std::size_t li, std::size_t zi) { out[zi] = in[li]; });
  return make_result({m, in.size() / m}, std::move(out), {latent.node()},
                     [c, h, w, m](Node& self) {
                       double* g = grad_of(self.inputs[0]);
                       for_each_latent_entry(c, h, w, m, [&](std::size_t li, std::size_t zi) {
                         g[li] += self.grad[zi];
                       });
                     });
}

Tensor columns_to_channels(const Tensor& z, std::size_t channels, std::size_t height,
                           std::size_t width) {
  require_rank(z, 2, "columns_to_channels");
  const std::size_t m = z.dim(0);
  if (channels % m != 0 || z.numel() != channels * height * width) {
    throw DimensionError("columns_to_channels: " + shape_str(z.shape()) + " cannot form " +
                         std::to_string(channels) + "x" + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  const auto in = z.data();
  std::vector<double> out(in.size());
  for_each_latent_entry(channels, height, width, m,
                        [&](std::size_t li, std::size_t zi) { out[li] = in[zi]; });
  return make_result({1, channels, height, width}, std::move(out), {z.node()},
                     [channels, height, width, m](Node& self) {
                       double* g = grad_of(self.inputs[0]);
                       for_each_latent_entry(channels, height, width, m,
                                             [&](std::size_t li, std::size_t zi) {
                                               g[zi] += self.grad[li];
                                             });
                     });
}

}  // namespace softvq
