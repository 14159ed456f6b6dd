#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "soymat/error.hpp"
#include "soymat/neural/grad_check.hpp"
#include "soymat/neural/network.hpp"
#include "soymat/neural/optim.hpp"
#include "soymat/neural/serialize.hpp"
#include "soymat/rng.hpp"

using namespace soymat;
using namespace soymat::nn;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("soymat_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

Tensor<double> random_input(const Shape& shape, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Tensor<double> t(shape);
  for (double& v : t.data) v = uniform01(rng);
  return t;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("Xavier samples stay within the bound and are reproducible") {
    Rng a = make_rng(11), b = make_rng(11);
    const double bound = xavier_bound(128, 128);
    CHECK(bound == doctest::Approx(std::sqrt(6.0 / 256.0)).epsilon(1e-15));
    std::vector<double> x(100000), y(100000);
    xavier_uniform<double>(x, 128, 128, a);
    xavier_uniform<double>(y, 128, 128, b);
    CHECK(x == y);
    double mean = 0.0;
    for (double v : x) {
      CHECK_MESSAGE(std::abs(v) <= bound, "sample outside bound");
      mean += v;
    }
    mean /= static_cast<double>(x.size());
    CHECK(std::abs(mean) <= 0.002);
  }

  TEST_CASE("Xavier fans follow the tensor shape") {
    Rng rng = make_rng(2);
    const Tensor<double> k = xavier_init<double>({3, 3, 32, 32}, rng);
    const double kb = std::sqrt(6.0 / (9 * 32 + 9 * 32));
    for (double v : k.data) CHECK(std::abs(v) <= kb);
    const Tensor<double> m = xavier_init<double>({256, 1}, rng);
    const double mb = std::sqrt(6.0 / 257.0);
    double maxabs = 0.0;
    for (double v : m.data) maxabs = std::max(maxabs, std::abs(v));
    CHECK(maxabs <= mb);
    CHECK(maxabs > 0.5 * mb);
  }

  TEST_CASE("network initialisation zeroes biases and is seeded") {
    const NetworkConfig cfg = NetworkConfig::cnn_lstm(3, 64, 40, 3, 4, 8);
    Network<float> a(cfg), b(cfg), c(cfg);
    a.init_xavier(5);
    b.init_xavier(5);
    c.init_xavier(6);
    bool differs = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
      const Param<float>* p = a.params()[i];
      CHECK(p->value == b.params()[i]->value);
      if (p->is_bias)
        for (float v : p->value.data) CHECK(v == 0.0f);
      else if (!(p->value == c.params()[i]->value))
        differs = true;
    }
    CHECK(differs);
  }

  TEST_CASE("Adam first step moves by the learning rate") {
    AdamConfig cfg;
    std::vector<double> value{1.0}, grad{1.0}, m{0.0}, v{0.0};
    const double lr = decayed_learning_rate(cfg, 0);
    CHECK(lr == 1e-3);
    adam_update<double>(value, grad, m, v, 1, lr, cfg);
    CHECK(m[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(v[0] == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(1.0 - value[0] == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }

  TEST_CASE("Adam with zero gradient keeps parameters and decays moments") {
    AdamConfig cfg;
    std::vector<double> value{0.5}, grad{0.0}, m{0.2}, v{0.04};
    adam_update<double>(value, grad, m, v, 3, 1e-3, cfg);
    CHECK(m[0] == doctest::Approx(0.18).epsilon(1e-15));
    CHECK(v[0] == doctest::Approx(0.04 * 0.999).epsilon(1e-15));
    CHECK(value[0] != 0.5);  // the existing moment still moves it
    std::vector<double> fresh{0.5}, m0{0.0}, v0{0.0};
    adam_update<double>(fresh, grad, m0, v0, 1, 1e-3, cfg);
    CHECK(fresh[0] == 0.5);
  }

  TEST_CASE("inverse-time decay counts updates") {
    AdamConfig cfg;
    CHECK(decayed_learning_rate(cfg, 0) == 1e-3);
    CHECK(decayed_learning_rate(cfg, 10) == doctest::Approx(1e-3 / 2.0));
    CHECK(decayed_learning_rate(cfg, 90) == doctest::Approx(1e-4));
  }

  TEST_CASE("zero parameters predict the output bias") {
    Network<double> net(NetworkConfig::cnn_lstm(3, 64, 40, 3, 4, 8));
    net.zero_params();
    net.params().back()->value.data[0] = 17.5;
    CHECK(net.predict(random_input({3, 64, 40, 3}, 1)) == 17.5);
    CHECK(net.predict(random_input({3, 64, 40, 3}, 2)) == 17.5);
  }

  TEST_CASE("predictions do not depend on what was evaluated before") {
    Network<double> net(NetworkConfig::cnn_lstm(3, 64, 40, 3, 4, 8));
    net.init_xavier(3);
    const auto a = random_input({3, 64, 40, 3}, 1);
    const auto b = random_input({3, 64, 40, 3}, 2);
    const double ya = net.predict(a);
    const double yb = net.predict(b);
    CHECK(net.predict(a) == ya);
    CHECK(net.predict(b) == yb);
  }

  TEST_CASE("weights round-trip bit-exactly") {
    Network<float> net(NetworkConfig::cnn_lstm(3, 64, 40, 3, 4, 8));
    net.init_xavier(4);
    net.output_scaling = {21.5, 5.25};
    const auto dir = scratch_dir("weights");
    save_weights(dir, net);
    Network<float> back = load_weights(dir);
    REQUIRE(back.params().size() == net.params().size());
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      CHECK(back.params()[i]->name == net.params()[i]->name);
      CHECK(back.params()[i]->value == net.params()[i]->value);
    }
    CHECK(back.output_scaling.offset == 21.5);
    CHECK(back.output_scaling.scale == 5.25);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("loading from a missing directory is a data error") {
    CHECK_THROWS_AS(load_weights(scratch_dir("missing")), DataError);
  }

  TEST_CASE("gradient check on a linear-only network is exact") {
    Network<double> net(NetworkConfig{{6}, {LayerSpec::dense("dense", 1)}});
    net.init_xavier(8);
    std::vector<Tensor<double>> batch{random_input({6}, 1), random_input({6}, 2)};
    std::vector<double> targets{net.predict(batch[0]) + 0.3, net.predict(batch[1]) - 0.2};
    const GradCheckReport r = grad_check(net, batch, targets);
    CHECK(r.checked == 7u);
    CHECK(r.max_rel_error < 1e-10);
  }

  TEST_CASE("gradient check on the reduced CNN-LSTM") {
    const GradCheckReport r = run_reduced_grad_check({}, {});
    CHECK(r.passed());
    CHECK(r.max_rel_error < 1e-4);
    const auto layers = r.per_layer();
    std::vector<std::string> names;
    for (const auto& [name, err] : layers) names.push_back(name);
    CHECK(names == std::vector<std::string>{"conv2d_1", "conv2d_2", "conv2d_3", "conv2d_4", "lstm_1", "lstm_2",
                                            "dense"});
  }

  TEST_CASE("a planted gradient fault is detected") {
    GradCheckOptions opts;
    opts.fault_scale = 2.0;
    const GradCheckReport r = run_reduced_grad_check({}, opts);
    CHECK_FALSE(r.passed());
    CHECK(r.max_rel_error == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("relative error definition") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == 0.5);
    CHECK(relative_error(0.0, 1e-12) == doctest::Approx(1e-4));
  }
}
