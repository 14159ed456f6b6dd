#include <benchmark/benchmark.h>

#include <cmath>

#include "soymat/augment.hpp"
#include "soymat/baseline_loess.hpp"
#include "soymat/ingest.hpp"
#include "soymat/neural/network.hpp"
#include "soymat/neural/ops.hpp"
#include "soymat/neural/optim.hpp"
#include "soymat/rng.hpp"

using namespace soymat;

namespace {

template <typename T>
nn::Tensor<T> random_tensor(const nn::Shape& shape, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  nn::Tensor<T> t(shape);
  for (T& v : t.data) v = static_cast<T>(uniform01(rng) - 0.5);
  return t;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Image img(w, h);
  for (float& v : img.data()) v = static_cast<float>(uniform_int(rng, 0, 255));
  return img;
}

// First layer of the default network: 5 frames of 256x64x3, 32 filters, stride 2.
void BM_Conv2dForward(benchmark::State& state) {
  const auto x = random_tensor<float>({5, 256, 64, 3}, 1);
  const auto k = random_tensor<float>({3, 3, 3, 32}, 2);
  const auto b = random_tensor<float>({32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, k, b, 2, nn::Padding::Same));
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto x = random_tensor<float>({5, 128, 32, 32}, 1);
  const auto k = random_tensor<float>({3, 3, 32, 32}, 2);
  const auto g = random_tensor<float>({5, 64, 16, 32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, k, g, 2, nn::Padding::Same));
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMicrosecond);

void BM_LstmForward(benchmark::State& state) {
  const int units = static_cast<int>(state.range(0));
  const auto x = random_tensor<float>({5, 128}, 1);
  const auto wi = random_tensor<float>({128, 4 * units}, 2);
  const auto wr = random_tensor<float>({units, 4 * units}, 3);
  const auto b = random_tensor<float>({4 * units}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::lstm(x, nn::LstmWeights<float>{wi, wr, b}, true));
}
BENCHMARK(BM_LstmForward)->Arg(16)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_LstmBackward(benchmark::State& state) {
  const auto x = random_tensor<float>({5, 128}, 1);
  const auto wi = random_tensor<float>({128, 1024}, 2);
  const auto wr = random_tensor<float>({256, 1024}, 3);
  const auto b = random_tensor<float>({1024}, 4);
  const nn::LstmWeights<float> w{wi, wr, b};
  nn::LstmCache<float> cache;
  const auto y = nn::lstm(x, w, true, &cache);
  const auto g = random_tensor<float>(y.shape, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nn::lstm_backward(x, w, cache, g, true));
}
BENCHMARK(BM_LstmBackward)->Unit(benchmark::kMicrosecond);

// One training sample through the full default network.
void BM_NetworkStep(benchmark::State& state) {
  nn::Network<float> net(nn::NetworkConfig::cnn_lstm());
  net.init_xavier(1);
  const auto x = random_tensor<float>({5, 256, 64, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.accumulate_gradients(x, 20.0, 1.0, 1.0));
}
BENCHMARK(BM_NetworkStep)->Unit(benchmark::kMillisecond);

void BM_Lowess(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng = make_rng(3);
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = i;
    y[i] = std::sin(i * 0.2) + 0.1 * standard_normal(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(lowess(x, y));
}
BENCHMARK(BM_Lowess)->Arg(5)->Arg(50)->Arg(500);

void BM_GaussianBlur(benchmark::State& state) {
  const Image img = random_image(256, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(img, 1.5));
}
BENCHMARK(BM_GaussianBlur)->Unit(benchmark::kMicrosecond);

void BM_Resize(benchmark::State& state) {
  const Image img = random_image(128, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(resize(img));
}
BENCHMARK(BM_Resize)->Unit(benchmark::kMicrosecond);

void BM_ExtractRotatedPlot(benchmark::State& state) {
  const Orthomosaic o{"e", 6, random_image(400, 400, 6)};
  const double a = 0.3;
  const auto at = [&](double u, double v) {
    return Point2{200 + std::cos(a) * u - std::sin(a) * v, 200 + std::sin(a) * u + std::cos(a) * v};
  };
  const PlotBoundary b = make_boundary("p", "e", {at(-64, -16), at(64, -16), at(64, 16), at(-64, 16)});
  for (auto _ : state) benchmark::DoNotOptimize(resize(extract_plot(o, b)));
}
BENCHMARK(BM_ExtractRotatedPlot)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
