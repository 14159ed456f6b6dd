#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles/nn_oracle.hpp"
#include "soymat/neural/ops.hpp"

using namespace soymat::nn;

namespace {

Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(shape);
  for (double& v : t.data) v = u(rng);
  return t;
}

std::vector<double> as_vector(const Tensor<double>& t) { return {t.data.begin(), t.data.end()}; }

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("conv2d matches a direct-loop convolution") {
    std::mt19937_64 rng(3);
    for (const auto& [h, w] : std::vector<std::pair<int, int>>{{9, 7}, {8, 8}, {5, 2}, {1, 1}}) {
      CAPTURE(h);
      CAPTURE(w);
      const Tensor<double> x = random_tensor({2, h, w, 3}, rng);
      const Tensor<double> k = random_tensor({3, 3, 3, 4}, rng);
      const Tensor<double> b = random_tensor({4}, rng);
      const Tensor<double> y = conv2d(x, k, b, 2, Padding::Same);
      int oh = 0, ow = 0;
      const auto ref = oracle::conv2d_same(as_vector(x), 2, h, w, 3, as_vector(k), 3, 4, as_vector(b), 2, oh, ow);
      REQUIRE(y.shape == Shape{2, oh, ow, 4});
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("conv2d output extents are ceil(H/2) x ceil(W/2)") {
    Tensor<float> x({5, 256, 64, 3});
    Tensor<float> k({3, 3, 3, 32});
    Tensor<float> b({32});
    CHECK(conv2d(x, k, b, 2, Padding::Same).shape == Shape{5, 128, 32, 32});
  }

  TEST_CASE("zero kernel gives the bias everywhere") {
    std::mt19937_64 rng(1);
    const Tensor<double> x = random_tensor({1, 6, 5, 2}, rng);
    Tensor<double> k({3, 3, 2, 3});
    Tensor<double> b({3});
    b.data = {0.5, -1.0, 2.0};
    const Tensor<double> y = conv2d(x, k, b, 2, Padding::Same);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == b.data[i % 3]);
  }

  TEST_CASE("1x1 input sees only the centre tap") {
    Tensor<double> x({1, 1, 1, 1});
    x.data = {2.0};
    Tensor<double> k({3, 3, 1, 1});
    for (std::size_t i = 0; i < 9; ++i) k.data[i] = static_cast<double>(i + 1);  // centre tap = 5
    Tensor<double> b({1});
    b.data = {0.25};
    const Tensor<double> y = conv2d(x, k, b, 2, Padding::Same);
    REQUIRE(y.shape == Shape{1, 1, 1, 1});
    CHECK(y.data[0] == 5.0 * 2.0 + 0.25);
  }

  TEST_CASE("conv is applied to each frame independently") {
    std::mt19937_64 rng(5);
    const Tensor<double> x = random_tensor({3, 6, 6, 2}, rng);
    const Tensor<double> k = random_tensor({3, 3, 2, 2}, rng);
    const Tensor<double> b = random_tensor({2}, rng);
    const Tensor<double> all = conv2d(x, k, b, 2, Padding::Same);
    const std::size_t frame_in = 6 * 6 * 2, frame_out = 3 * 3 * 2;
    for (int t = 0; t < 3; ++t) {
      Tensor<double> one({1, 6, 6, 2});
      std::copy(x.data.begin() + t * frame_in, x.data.begin() + (t + 1) * frame_in, one.data.begin());
      const Tensor<double> y = conv2d(one, k, b, 2, Padding::Same);
      for (std::size_t i = 0; i < frame_out; ++i) CHECK(std::abs(y.data[i] - all.data[t * frame_out + i]) <= 1e-12);
    }
  }

  TEST_CASE("max pooling picks the maximum and routes the gradient to it") {
    Tensor<double> x({1, 2, 2, 1});
    x.data = {1, 2, 3, 4};
    const MaxPoolResult<double> r = maxpool2d(x, 2);
    REQUIRE(r.output.shape == Shape{1, 1, 1, 1});
    CHECK(r.output.data[0] == 4.0);
    Tensor<double> g({1, 1, 1, 1});
    g.data = {1.5};
    const Tensor<double> gin = maxpool2d_backward(x.shape, r.argmax, g);
    CHECK(gin.data == AlignedVector<double>{0, 0, 0, 1.5} );
  }

  TEST_CASE("max pooling ties go to the first maximum in scan order") {
    Tensor<double> x({1, 2, 2, 1}, 7.0);
    const MaxPoolResult<double> r = maxpool2d(x, 2);
    CHECK(r.output.data[0] == 7.0);
    CHECK(r.argmax[0] == 0u);
  }

  TEST_CASE("max pooling floors odd extents and keeps constants") {
    Tensor<double> x({5, 64, 16, 32}, 3.0);
    const MaxPoolResult<double> r = maxpool2d(x, 2);
    CHECK(r.output.shape == Shape{5, 32, 8, 32});
    for (double v : r.output.data) CHECK(v == 3.0);
    Tensor<double> odd({1, 5, 3, 1}, 1.0);
    CHECK(maxpool2d(odd, 2).output.shape == Shape{1, 2, 1, 1});
  }

  TEST_CASE("relu and its mask") {
    Tensor<double> x({3});
    x.data = {-1.0, 0.0, 2.0};
    const Tensor<double> y = relu(x);
    CHECK(y.data == AlignedVector<double>{0.0, 0.0, 2.0});
    Tensor<double> g({3}, 1.0);
    CHECK(relu_backward(y, g).data == AlignedVector<double>{0.0, 0.0, 1.0});
  }

  TEST_CASE("LSTM matches a scalar-loop recurrence") {
    std::mt19937_64 rng(9);
    const int T = 4, D = 3, U = 5;
    const Tensor<double> x = random_tensor({T, D}, rng);
    const Tensor<double> wx = random_tensor({D, 4 * U}, rng);
    const Tensor<double> wh = random_tensor({U, 4 * U}, rng);
    const Tensor<double> b = random_tensor({4 * U}, rng);
    const auto ref = oracle::lstm(as_vector(x), T, D, as_vector(wx), as_vector(wh), as_vector(b), U);
    const Tensor<double> seq = lstm(x, LstmWeights<double>{wx, wh, b}, true);
    REQUIRE(seq.shape == Shape{T, U});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(seq.data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    const Tensor<double> last = lstm(x, LstmWeights<double>{wx, wh, b}, false);
    REQUIRE(last.shape == Shape{U});
    for (int u = 0; u < U; ++u) CHECK(last.data[u] == seq.data[(T - 1) * U + u]);
  }

  TEST_CASE("LSTM with zero parameters outputs zeros") {
    Tensor<double> x({5, 128}, 0.7);
    Tensor<double> wx({128, 1024}), wh({256, 1024}), b({1024});
    const Tensor<double> y = lstm(x, LstmWeights<double>{wx, wh, b}, true);
    CHECK(y.shape == Shape{5, 256});
    for (double v : y.data) CHECK(v == 0.0);
  }

  TEST_CASE("single-step scalar LSTM by hand") {
    // i = s(0.5), f irrelevant (c0 = 0), g = tanh(-0.3), o = s(1.2); x = 2
    Tensor<double> x({1, 1});
    x.data = {2.0};
    Tensor<double> wx({1, 4}), wh({1, 4}), b({4});
    wx.data = {0.25, 0.0, -0.15, 0.6};
    wh.data = {9.0, 9.0, 9.0, 9.0};  // h0 = 0, so never used
    const Tensor<double> h = lstm(x, LstmWeights<double>{wx, wh, b}, false);
    const double i = 1.0 / (1.0 + std::exp(-0.5));
    const double g = std::tanh(-0.3);
    const double o = 1.0 / (1.0 + std::exp(-1.2));
    CHECK(h.data[0] == doctest::Approx(o * std::tanh(i * g)).epsilon(1e-15));
  }

  TEST_CASE("dense layer") {
    Tensor<double> x({2});
    x.data = {1.0, 2.0};
    Tensor<double> w({2, 1});
    w.data = {0.5, -1.0};
    Tensor<double> b({1});
    b.data = {0.25};
    CHECK(dense(x, w, b).data[0] == -1.25);

    Tensor<double> zero_w({2, 1});
    CHECK(dense(x, zero_w, b).data[0] == 0.25);

    Tensor<double> unit({3});
    unit.data = {0.0, 1.0, 0.0};
    Tensor<double> w3({3, 1});
    w3.data = {4.0, 5.0, 6.0};
    CHECK(dense(unit, w3, b).data[0] == 5.25);
  }

  TEST_CASE("Huber loss worked values") {
    const HuberValue zero = huber_loss(3.0, 3.0, 1.0);
    CHECK(zero.loss == 0.0);
    CHECK(zero.grad == 0.0);
    const HuberValue half = huber_loss(1.0, 1.5, 1.0);
    CHECK(half.loss == 0.125);
    CHECK(half.grad == 0.5);
    const HuberValue three = huber_loss(4.0, 1.0, 1.0);
    CHECK(three.loss == 2.5);
    CHECK(three.grad == -1.0);
  }

  TEST_CASE("Huber branches agree at |e| = delta") {
    for (double delta : {0.5, 1.0, 2.0, 3.7}) {
      CAPTURE(delta);
      const double quad = 0.5 * delta * delta;
      const double lin = delta * delta - 0.5 * delta * delta;
      CHECK(std::abs(quad - lin) <= 1e-12);
      const HuberValue at = huber_loss(0.0, delta, delta);
      CHECK(std::abs(at.loss - quad) <= 1e-12);
      const HuberValue below = huber_loss(0.0, delta * (1 - 1e-9), delta);
      const HuberValue above = huber_loss(0.0, delta * (1 + 1e-9), delta);
      CHECK(std::abs(below.loss - at.loss) <= 2e-9 * delta * delta);
      CHECK(std::abs(above.loss - at.loss) <= 2e-9 * delta * delta);
      CHECK(std::abs(below.grad - above.grad) <= 1e-8);
    }
  }

  TEST_CASE("Huber loss is convex in the prediction") {
    for (double p = -5.0; p <= 5.0; p += 0.25) {
      const double mid = huber_loss(0.3, p, 1.0).loss;
      const double lo = huber_loss(0.3, p - 0.1, 1.0).loss;
      const double hi = huber_loss(0.3, p + 0.1, 1.0).loss;
      CHECK(mid <= 0.5 * (lo + hi) + 1e-15);
    }
  }

  TEST_CASE("batch Huber loss is the mean") {
    const HuberBatch b = huber_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{0.5, 3.0}, 1.0);
    CHECK(b.loss == doctest::Approx((0.125 + 2.5) / 2).epsilon(1e-15));
    REQUIRE(b.grads.size() == 2);
    CHECK(b.grads[0] == doctest::Approx(0.25));
    CHECK(b.grads[1] == doctest::Approx(0.5));
  }
}
