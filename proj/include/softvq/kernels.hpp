// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Precision-generic numeric kernels shared by the 64-bit autodiff ops and the
// 32-bit inference path. All buffers are dense row-major, one image at a time.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <span>

namespace softvq::kernels {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[MxN] (+)= op(A) * op(B). A is MxK (or KxM when trans_a), B is KxN (or NxK when trans_b).
template <class T>
void gemm(bool trans_a, bool trans_b, std::ptrdiff_t M, std::ptrdiff_t N, std::ptrdiff_t K,
          const T* a, const T* b, T* c, bool accumulate) {
  using ConstMap = Eigen::Map<const RowMatrix<T>>;
  Eigen::Map<RowMatrix<T>> out(c, M, N);
  ConstMap a_map(a, trans_a ? K : M, trans_a ? M : K);
  ConstMap b_map(b, trans_b ? N : K, trans_b ? K : N);
  if (!accumulate) out.setZero();
  if (!trans_a && !trans_b) {
    out.noalias() += a_map * b_map;
  } else if (trans_a && !trans_b) {
    out.noalias() += a_map.transpose() * b_map;
  } else if (!trans_a && trans_b) {
    out.noalias() += a_map * b_map.transpose();
  } else {
    out.noalias() += a_map.transpose() * b_map.transpose();
  }
}

// Geometry of a 2-D cross-correlation over a single C x H x W image with F filters.
struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  int out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
  std::ptrdiff_t patch_size() const {
    return static_cast<std::ptrdiff_t>(channels) * kernel_h * kernel_w;
  }
  std::ptrdiff_t out_pixels() const { return static_cast<std::ptrdiff_t>(out_h()) * out_w(); }
  std::ptrdiff_t in_size() const { return static_cast<std::ptrdiff_t>(channels) * height * width; }
  std::ptrdiff_t out_size() const { return filters * out_pixels(); }
  std::ptrdiff_t weight_size() const { return filters * patch_size(); }
};

// col[(c*kh + i)*kw + j, oy*Wo + ox] = x[c, oy*s - p + i, ox*s - p + j] (zero outside).
template <class T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < g.kernel_h; ++i) {
      for (int j = 0; j < g.kernel_w; ++j) {
        T* row = col + ((static_cast<std::ptrdiff_t>(c) * g.kernel_h + i) * g.kernel_w + j) *
                           oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.stride - g.pad + i;
          T* dst = row + static_cast<std::ptrdiff_t>(oy) * ow;
          if (y < 0 || y >= g.height) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::ptrdiff_t>(c) * g.height + y) * g.width;
          for (int ox = 0; ox < ow; ++ox) {
            const int xx = ox * g.stride - g.pad + j;
            dst[ox] = (xx >= 0 && xx < g.width) ? src[xx] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds patch columns back into x.
template <class T>
void col2im(const ConvGeometry& g, const T* col, T* x) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < g.kernel_h; ++i) {
      for (int j = 0; j < g.kernel_w; ++j) {
        const T* row = col + ((static_cast<std::ptrdiff_t>(c) * g.kernel_h + i) * g.kernel_w +
                              j) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.stride - g.pad + i;
          if (y < 0 || y >= g.height) continue;
          const T* src = row + static_cast<std::ptrdiff_t>(oy) * ow;
          T* dst = x + (static_cast<std::ptrdiff_t>(c) * g.height + y) * g.width;
          for (int ox = 0; ox < ow; ++ox) {
            const int xx = ox * g.stride - g.pad + j;
            if (xx >= 0 && xx < g.width) dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

// out[F, Ho*Wo] = w[F, C*kh*kw] * im2col(x) + bias. `col` is scratch of patch_size*out_pixels.
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out,
                    std::span<T> col) {
  im2col(g, x, col.data());
  gemm<T>(false, false, g.filters, g.out_pixels(), g.patch_size(), w, col.data(), out, false);
  if (bias != nullptr) {
    const auto p = g.out_pixels();
    for (int f = 0; f < g.filters; ++f) {
      T* o = out + f * p;
      for (std::ptrdiff_t q = 0; q < p; ++q) o[q] += bias[f];
    }
  }
}

// Accumulates gradients of conv2d_forward into dx, dw and dbias (any may be null).
template <class T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw,
                     T* dbias, std::span<T> col) {
  const auto p = g.out_pixels();
  if (dw != nullptr) {
    im2col(g, x, col.data());
    gemm<T>(false, true, g.filters, g.patch_size(), p, dout, col.data(), dw, true);
  }
  if (dbias != nullptr) {
    for (int f = 0; f < g.filters; ++f) {
      const T* d = dout + f * p;
      T acc = 0;
      for (std::ptrdiff_t q = 0; q < p; ++q) acc += d[q];
      dbias[f] += acc;
    }
  }
  if (dx != nullptr) {
    gemm<T>(true, false, g.patch_size(), p, g.filters, w, dout, col.data(), false);
    col2im(g, col.data(), dx);
  }
}

// Transposed convolution: the adjoint of conv2d with geometry g. Maps y[F, Ho*Wo] to
// out[C, H*W]; bias has C entries.
template <class T>
void conv_transpose_forward(const ConvGeometry& g, const T* y, const T* w, const T* bias, T* out,
                            std::span<T> col) {
  gemm<T>(true, false, g.patch_size(), g.out_pixels(), g.filters, w, y, col.data(), false);
  std::fill(out, out + g.in_size(), T(0));
  col2im(g, col.data(), out);
  if (bias != nullptr) {
    const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(g.height) * g.width;
    for (int c = 0; c < g.channels; ++c) {
      T* o = out + c * hw;
      for (std::ptrdiff_t q = 0; q < hw; ++q) o[q] += bias[c];
    }
  }
}

template <class T>
void conv_transpose_backward(const ConvGeometry& g, const T* y, const T* w, const T* dout, T* dy,
                             T* dw, T* dbias, std::span<T> col) {
  im2col(g, dout, col.data());
  if (dy != nullptr) {
    gemm<T>(false, false, g.filters, g.out_pixels(), g.patch_size(), w, col.data(), dy, true);
  }
  if (dw != nullptr) {
    gemm<T>(false, true, g.filters, g.patch_size(), g.out_pixels(), y, col.data(), dw, true);
  }
  if (dbias != nullptr) {
    const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(g.height) * g.width;
    for (int c = 0; c < g.channels; ++c) {
      const T* d = dout + c * hw;
      T acc = 0;
      for (std::ptrdiff_t q = 0; q < hw; ++q) acc += d[q];
      dbias[c] += acc;
    }
  }
}

}  // namespace softvq::kernels
