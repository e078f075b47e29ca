#include <doctest.h>

#include <cmath>
#include <limits>

#include "softvq/error.hpp"
#include "softvq/tensor.hpp"
#include "test_support.hpp"

using namespace softvq;
using namespace softvq::testing;

namespace {

// Direct nested-loop cross-correlation, N x C x H x W input, F x C x kh x kw weights.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, int stride, int pad) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n) * f * oh * ow, 0.0);
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < f; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int iy = y * stride - pad + i, ix = xx * stride - pad + j;
                if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
                acc += x[((b * c + ci) * h + iy) * wd + ix] * w[((o * c + ci) * kh + i) * kw + j];
              }
          out[((b * f + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("matmul values and errors") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor p = matmul(eye, a);
  CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK(matmul(Tensor({1, 2}, {1, 0}), Tensor({2, 1}, {0, 5})).item() == 0.0);
  CHECK_THROWS_AS(matmul(a, Tensor({3, 1}, {1, 2, 3})), DimensionError);
}

TEST_CASE("matmul gradient") {
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(matmul(t[0], t[1])); }, {a, b}) <= 1e-6);
}

TEST_CASE("transpose and reshape gradients") {
  Rng rng(2);
  const Tensor a = random_tensor({3, 5}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(transpose(t[0])); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(reshape(t[0], {5, 3})); }, {a}) <= 1e-6);
  CHECK_THROWS_AS(reshape(a, {4, 4}), DimensionError);
}

TEST_CASE("conv2d examples") {
  const Tensor ones = Tensor::full({1, 1, 4, 4}, 1.0);
  const Tensor k = Tensor::full({1, 1, 2, 2}, 1.0);
  const Tensor y = conv2d(ones, k, Tensor(), 2, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.data()) CHECK(v == 4.0);

  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);
  std::vector<double> id(3 * 3, 0.0);
  for (int c = 0; c < 3; ++c) id[c * 3 + c] = 1.0;
  const Tensor same = conv2d(x, Tensor({3, 3, 1, 1}, id), Tensor(), 1, 0);
  CHECK(max_abs_diff(same.data(), x.data()) == 0.0);

  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 0),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 1),
                  DimensionError);
}

TEST_CASE("conv2d matches direct loops") {
  Rng rng(4);
  for (auto [stride, pad, k] : {std::tuple<int, int, std::size_t>{1, 0, 3}, {1, 1, 3}, {2, 1, 4}, {2, 0, 2}, {3, 2, 5}}) {
    const Tensor x = random_tensor({2, 3, 9, 8}, rng), w = random_tensor({4, 3, k, k}, rng);
    const Tensor y = conv2d(x, w, Tensor(), stride, pad);
    CHECK(max_abs_diff(y.data(), naive_conv(x, w, stride, pad)) <= 1e-12);
  }
}

TEST_CASE("conv2d gradient") {
  Rng rng(5);
  const Tensor x = random_tensor({2, 3, 8, 8}, rng), w = random_tensor({4, 3, 4, 4}, rng),
               b = random_tensor({4}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(conv2d(t[0], t[1], t[2], 2, 1)); },
                  {x, w, b}) <= 1e-5);
  const Tensor w3 = random_tensor({2, 3, 3, 3}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(conv2d(t[0], t[1], Tensor(), 1, 1)); },
                  {x, w3}) <= 1e-5);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  Rng rng(6);
  for (auto [stride, pad, k, h] : {std::tuple<int, int, std::size_t, std::size_t>{1, 1, 3, 6}, {2, 1, 4, 8}, {2, 0, 2, 6}, {3, 1, 3, 7}}) {
    const Tensor x = random_tensor({2, 3, h, h}, rng, -1, 1, false);
    const Tensor w = random_tensor({4, 3, k, k}, rng, -1, 1, false);
    const Tensor y_shape_probe = conv2d(x, w, Tensor(), stride, pad);
    const Tensor y = random_tensor(y_shape_probe.shape(), rng, -1, 1, false);
    const Tensor xt = conv2d_transpose(y, w, Tensor(), stride, pad);
    REQUIRE(xt.shape() == x.shape());
    const double lhs = dot(y_shape_probe.data(), y.data());
    const double rhs = dot(x.data(), xt.data());
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  }
}

TEST_CASE("conv2d_transpose spreads a single pixel") {
  const Tensor v({1, 1, 1, 1}, {0.75});
  const Tensor y = conv2d_transpose(v, Tensor::full({1, 1, 2, 2}, 1.0), Tensor(), 2, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double e : y.data()) CHECK(e == 0.75);
}

TEST_CASE("conv2d_transpose gradient") {
  Rng rng(7);
  const Tensor x = random_tensor({2, 4, 4, 4}, rng), w = random_tensor({4, 3, 4, 4}, rng),
               b = random_tensor({3}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(conv2d_transpose(t[0], t[1], t[2], 2, 1)); },
                  {x, w, b}) <= 1e-5);
}

TEST_CASE("elementwise ops") {
  const Tensor r = relu(Tensor({3}, {-1, 0, 2}));
  CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{0, 0, 2});
  Rng rng(8);
  const Tensor x = random_tensor({2, 3}, rng, -1, 1, false);
  CHECK(max_abs_diff(add(x, Tensor::scalar(0.0)).data(), x.data()) == 0.0);
  CHECK_THROWS_AS(add(x, Tensor::zeros({3, 2})), DimensionError);

  const Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
  const Tensor s = random_tensor({1}, rng);
  const Tensor pos = random_tensor({2, 3}, rng, 0.5, 2.0);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(mul(t[0], t[1])); }, {a, b}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(add(t[0], t[1])); }, {a, b}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(sub(t[0], t[1])); }, {a, b}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(mul(t[0], t[1])); }, {a, s}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(sub(t[1], t[0])); }, {a, s}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(scale(t[0], -2.5)); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(add_scalar(t[0], 3.0)); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(relu(t[0])); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(leaky_relu(t[0], 0.2)); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(sqrt(t[0])); }, {pos}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(log(t[0])); }, {pos}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(exp(t[0])); }, {a}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(square(t[0])); }, {a}) <= 1e-6);
}

TEST_CASE("relu passes gradient only where input is positive") {
  const Tensor x({3}, {-1, 0, 2}, true);
  backward(sum(relu(x)));
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0, 0, 1});
}

TEST_CASE("softmax") {
  const Tensor u = softmax(Tensor({3}, {0, 0, 0}));
  for (double v : u.data()) CHECK(std::abs(v - 1.0 / 3.0) <= 1e-15);
  const Tensor sat = softmax(Tensor({2}, {1000, 0}));
  CHECK(std::abs(sat[0] - 1.0) <= 1e-12);
  CHECK(std::abs(sat[1]) <= 1e-12);
  const Tensor ls = log_softmax(Tensor({2}, {1000, 0}));
  CHECK(std::isfinite(ls[1]));
  CHECK(std::abs(ls[1] + 1000.0) <= 1e-9);

  Rng rng(9);
  const Tensor x = random_tensor({3, 4}, rng, -2, 2);
  const Tensor rows = softmax(x);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += rows[i * 4 + j];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  for (int axis : {0, 1, -1}) {
    CHECK(gradcheck([axis](const auto& t) { return weighted_sum(softmax(t[0], axis)); }, {x}) <= 1e-6);
    CHECK(gradcheck([axis](const auto& t) { return weighted_sum(log_softmax(t[0], axis)); }, {x}) <= 1e-6);
  }
}

TEST_CASE("stop_gradient") {
  Rng rng(10);
  const Tensor x = random_tensor({4}, rng);
  const Tensor y = stop_gradient(x);
  CHECK(max_abs_diff(y.data(), x.data()) == 0.0);
  backward(sum(add(stop_gradient(x), mul(x, Tensor::scalar(0.0)))));
  for (double g : x.grad()) CHECK(g == 0.0);

  // d/dx sum(sg(a - b) + b) == d/dx sum(b)
  const Tensor x2 = random_tensor({5}, rng, 0.5, 1.5);
  const Tensor a = square(x2), b = exp(x2);
  backward(sum(add(stop_gradient(sub(a, b)), b)));
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(x2.grad()[i] - std::exp(x2[i])) <= 1e-12);
}

TEST_CASE("straight_through forward and gradient routing") {
  Rng rng(11);
  const Tensor value = random_tensor({3, 4}, rng, -1, 1, false);
  const Tensor path = random_tensor({3, 4}, rng);
  const Tensor st = straight_through(value, path);
  CHECK(max_abs_diff(st.data(), value.data()) == 0.0);
  Tensor(path).zero_grad();
  backward(weighted_sum(straight_through(value, path)));
  const std::vector<double> via_st(path.grad().begin(), path.grad().end());
  Tensor(path).zero_grad();
  backward(weighted_sum(path));
  CHECK(max_abs_diff(via_st, path.grad()) == 0.0);
}

TEST_CASE("reductions and distances") {
  CHECK(sq_norm_cols(Tensor({2, 1}, {3, 4})).item() == 25.0);
  CHECK(mean(Tensor::full({7}, 2.5)).item() == 2.5);
  const Tensor zero({2, 1}, {0, 0}, true);
  backward(sum(sqrt(add_scalar(sq_norm_cols(zero), 1e-12))));
  for (double g : zero.grad()) CHECK(std::isfinite(g));

  Rng rng(12);
  const Tensor z = random_tensor({3, 5}, rng), e = random_tensor({3, 4}, rng);
  const Tensor d = pairwise_sq_dist(z, e);
  REQUIRE(d.shape() == Shape{5, 4});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int r = 0; r < 3; ++r) s += (z[r * 5 + i] - e[r * 4 + j]) * (z[r * 5 + i] - e[r * 4 + j]);
      CHECK(std::abs(d[i * 4 + j] - s) <= 1e-12);
    }
  CHECK(gradcheck([](const auto& t) { return weighted_sum(pairwise_sq_dist(t[0], t[1])); }, {z, e}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(sq_norm_cols(t[0])); }, {z}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return sum(t[0]); }, {z}) <= 1e-6);
  CHECK(gradcheck([](const auto& t) { return mean(square(t[0])); }, {z}) <= 1e-6);
}

TEST_CASE("batch and latent layout") {
  Rng rng(13);
  const Tensor x = random_tensor({3, 2, 2, 2}, rng);
  const Tensor item = batch_item(x, 1);
  CHECK(item.shape() == Shape{1, 2, 2, 2});
  CHECK(item[0] == x[8]);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(batch_item(t[0], 2)); }, {x}) <= 1e-6);

  // 1 x 4 x 1 x 2 latent, m = 2: pixel 0 gives columns 0,1; pixel 1 gives 2,3.
  std::vector<double> v(8);
  for (int i = 0; i < 8; ++i) v[i] = i;  // channel c at pixel p = 2c + p
  const Tensor latent({1, 4, 1, 2}, v, true);
  const Tensor z = channels_to_columns(latent, 2);
  REQUIRE(z.shape() == Shape{2, 4});
  // column (p * 2 + g) holds channels 2g, 2g+1 at pixel p.
  CHECK(z[0 * 4 + 0] == 0.0);  // c0 p0
  CHECK(z[1 * 4 + 0] == 2.0);  // c1 p0
  CHECK(z[0 * 4 + 1] == 4.0);  // c2 p0
  CHECK(z[1 * 4 + 3] == 7.0);  // c3 p1
  const Tensor back = columns_to_channels(z, 4, 1, 2);
  CHECK(max_abs_diff(back.data(), latent.data()) == 0.0);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(channels_to_columns(t[0], 2)); }, {latent}) <= 1e-6);
  const Tensor zc = random_tensor({2, 4}, rng);
  CHECK(gradcheck([](const auto& t) { return weighted_sum(columns_to_channels(t[0], 4, 1, 2)); }, {zc}) <= 1e-6);
}

TEST_CASE("backward contract") {
  const Tensor x({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
  CHECK_THROWS_AS(backward(sum(Tensor({2}, {1, 2}))), ContractError);

  // Fan-out accumulates within one pass, leaves accumulate across passes.
  backward(sum(add(x, x)));
  CHECK(x.grad()[0] == 2.0);
  backward(sum(x));
  CHECK(x.grad()[0] == 3.0);
  Tensor(x).zero_grad();
  CHECK(x.grad().empty());
}

TEST_CASE("tensor construction checks") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK(Tensor({2}, {1, std::numeric_limits<double>::quiet_NaN()}).all_finite() == false);
  CHECK(Tensor({2}, {1, 2}).all_finite());
}
