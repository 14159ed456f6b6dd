#include <doctest.h>

#include <cmath>
#include <set>

#include "soymat/augment.hpp"
#include "soymat/error.hpp"

using namespace soymat;

namespace {

std::vector<PlotSeries> dataset(int plots, int snips_per_plot) {
  std::vector<PlotSeries> out;
  for (int p = 0; p < plots; ++p) {
    PlotSeries s{"p" + std::to_string(p), "e", {}, 20};
    for (int t = 0; t < snips_per_plot; ++t)
      s.snips.push_back({s.plot_id, "e", 6 + 7 * t, Image(6, 4, {150.0f, 200.0f, 120.0f})});
    // Distinct content so blurs are visible.
    s.snips.back().image.set_pixel(2, 2, {0.0f, 0.0f, 0.0f});
    for (auto& sn : s.snips) sn.image.set_pixel(1, 1, {255.0f, 30.0f, 0.0f});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("brightness shift clamps at zero") {
    Image img(1, 1);
    img.set_pixel(0, 0, {150.0f, 200.0f, 90.0f});
    CHECK(adjust_brightness(img, -100.0).pixel(0, 0) == Rgb{50.0f, 100.0f, 0.0f});
    CHECK(adjust_brightness(img, 100.0).pixel(0, 0) == Rgb{250.0f, 255.0f, 190.0f});
  }

  TEST_CASE("contrast scale rounds and clamps") {
    Image img(1, 1);
    img.set_pixel(0, 0, {100.0f, 180.0f, 40.0f});
    CHECK(adjust_contrast(img, 1.5).pixel(0, 0) == Rgb{150.0f, 255.0f, 60.0f});
    img.set_pixel(0, 0, {1.0f, 3.0f, 5.0f});
    CHECK(adjust_contrast(img, 0.5).pixel(0, 0) == Rgb{1.0f, 2.0f, 3.0f});
  }

  TEST_CASE("Gaussian kernel") {
    const auto k = gaussian_kernel(1.5);
    REQUIRE(k.size() == 11u);
    double sum = 0.0, ref_sum = 0.0;
    for (int i = -5; i <= 5; ++i) ref_sum += std::exp(-i * i / (2 * 1.5 * 1.5));
    for (int i = -5; i <= 5; ++i) {
      CHECK(k[i + 5] == doctest::Approx(std::exp(-i * i / (2 * 1.5 * 1.5)) / ref_sum).epsilon(1e-14));
      CHECK(k[i + 5] == k[5 - i]);
      sum += k[i + 5];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
  }

  TEST_CASE("blurring an impulse reproduces the kernel") {
    Image img(21, 21);
    img.set_pixel(10, 10, {1000.0f, 0.0f, 0.0f});
    const Image out = gaussian_blur(img, 1.5);
    const auto k = gaussian_kernel(1.5);
    for (int dy = -5; dy <= 5; ++dy)
      for (int dx = -5; dx <= 5; ++dx)
        CHECK(out.at(10 + dx, 10 + dy, 0) == doctest::Approx(1000.0 * k[dx + 5] * k[dy + 5]).epsilon(1e-5));
    CHECK(out.at(10, 10, 1) == 0.0f);
  }

  TEST_CASE("blur keeps flat images flat and edges mirrored") {
    const Image flat(9, 5, {80.0f, 90.0f, 100.0f});
    const Image out = gaussian_blur(flat, 1.5);
    for (float v : out.data()) CHECK((v == doctest::Approx(80.0f) || v == doctest::Approx(90.0f) ||
                                      v == doctest::Approx(100.0f)));
    // A ramp along x keeps its interior mean under a symmetric kernel.
    Image ramp(31, 3);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 31; ++x) ramp.set_pixel(x, y, {static_cast<float>(x), 0.0f, 0.0f});
    CHECK(gaussian_blur(ramp, 1.0).at(15, 1, 0) == doctest::Approx(15.0f).epsilon(1e-5));
    // Mirror edge: left edge of a ramp is pulled up, not down towards zero.
    CHECK(gaussian_blur(ramp, 1.0).at(0, 1, 0) > 0.0f);
  }

  TEST_CASE("exactly the requested fraction of images is perturbed") {
    AugmentPlan plan;
    plan.seed = 5;
    const auto data = dataset(20, 5);
    const AugmentResult r = augment_dataset(data, plan);
    CHECK(r.applied.size() == 20u);
    std::set<std::pair<std::size_t, std::size_t>> touched;
    for (const auto& a : r.applied) touched.insert({a.series_index, a.snip_index});
    CHECK(touched.size() == 20u);
    std::size_t changed = 0;
    for (std::size_t s = 0; s < data.size(); ++s)
      for (std::size_t t = 0; t < data[s].snips.size(); ++t) {
        const bool differs = !(r.series[s].snips[t].image == data[s].snips[t].image);
        CHECK(differs == static_cast<bool>(touched.count({s, t})));
        changed += differs;
      }
    CHECK(changed == 20u);
    for (const auto& a : r.applied) {
      const Image expect = apply_perturbation(data[a.series_index].snips[a.snip_index].image, a.kind, plan);
      CHECK(r.series[a.series_index].snips[a.snip_index].image == expect);
    }
  }

  TEST_CASE("selection depends only on seed and shape") {
    AugmentPlan plan;
    plan.seed = 8;
    const AugmentResult a = augment_dataset(dataset(30, 5), plan);
    const AugmentResult b = augment_dataset(dataset(30, 5), plan);
    REQUIRE(a.applied.size() == b.applied.size());
    for (std::size_t i = 0; i < a.applied.size(); ++i) {
      CHECK(a.applied[i].series_index == b.applied[i].series_index);
      CHECK(a.applied[i].snip_index == b.applied[i].snip_index);
      CHECK(a.applied[i].kind == b.applied[i].kind);
    }
    std::set<Perturbation> kinds;
    for (const auto& x : a.applied) kinds.insert(x.kind);
    CHECK(kinds.size() == 3u);
  }

  TEST_CASE("fractions zero and one") {
    AugmentPlan plan;
    plan.fraction = 0.0;
    CHECK(augment_dataset(dataset(10, 5), plan).applied.empty());
    plan.fraction = 1.0;
    CHECK(augment_dataset(dataset(10, 5), plan).applied.size() == 50u);
    plan.fraction = 0.33;
    CHECK(augment_dataset(dataset(10, 3), plan).applied.size() == 9u);
    plan.fraction = 1.5;
    CHECK_THROWS_AS(plan.validate(), ConfigError);
  }
}
