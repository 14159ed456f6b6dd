#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "soymat/error.hpp"
#include "soymat/image.hpp"
#include "soymat/rng.hpp"
#include "support/scratch.hpp"

using namespace soymat;

TEST_SUITE("image") {
  TEST_CASE("pixels are stored interleaved, row-major") {
    Image img(3, 2);
    img.set_pixel(2, 1, {1.0f, 2.0f, 3.0f});
    CHECK(img.data()[(1 * 3 + 2) * 3 + 1] == 2.0f);
    CHECK(img.pixel(2, 1) == Rgb{1.0f, 2.0f, 3.0f});
    CHECK(img.pixel_count() == 6u);
  }

  TEST_CASE("channel means") {
    Image img(2, 1);
    img.set_pixel(0, 0, {10.0f, 20.0f, 30.0f});
    img.set_pixel(1, 0, {20.0f, 40.0f, 0.0f});
    const Rgb m = img.channel_means();
    CHECK(m[0] == 15.0f);
    CHECK(m[1] == 30.0f);
    CHECK(m[2] == 15.0f);
  }

  TEST_CASE("quantize rounds and clamps") {
    Image img(1, 1);
    img.set_pixel(0, 0, {-3.2f, 127.5f, 300.0f});
    quantize(img);
    CHECK(img.pixel(0, 0) == Rgb{0.0f, 128.0f, 255.0f});
  }

  TEST_CASE("PNG round trip of 8-bit levels is exact") {
    const auto dir = testing::scratch_dir("png");
    Image img(17, 5);
    Rng rng = make_rng(3);
    for (float& v : img.data()) v = static_cast<float>(uniform_int(rng, 0, 255));
    write_png(dir / "a.png", img);
    CHECK(read_png(dir / "a.png") == img);
  }

  TEST_CASE("reading a missing PNG is a data error") {
    const auto dir = testing::scratch_dir("png_missing");
    CHECK_THROWS_AS(read_png(dir / "nope.png"), DataError);
  }

  TEST_CASE("negative dimensions are rejected") { CHECK_THROWS_AS(Image(-1, 2), ConfigError); }
}

TEST_SUITE("rng") {
  TEST_CASE("derived seeds are deterministic and tag-sensitive") {
    CHECK(derive_seed(42, "split") == derive_seed(42, "split"));
    CHECK(derive_seed(42, "split") != derive_seed(42, "train"));
    CHECK(derive_seed(42, "split") != derive_seed(43, "split"));
    CHECK(derive_seed(42, 1, 2) != derive_seed(42, 2, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(7, "plot-noise", k));
    CHECK(seen.size() == 1000u);
  }

  TEST_CASE("uniform01 stays in [0, 1) with the right mean") {
    Rng rng = make_rng(1);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double u = uniform01(rng);
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.005);
  }

  TEST_CASE("uniform_int covers the closed range") {
    Rng rng = make_rng(2);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = uniform_int(rng, -3, 3);
      REQUIRE(v >= -3);
      REQUIRE(v <= 3);
      seen.insert(v);
    }
    CHECK(seen.size() == 7u);
    CHECK(uniform_int(rng, 5, 5) == 5);
  }

  TEST_CASE("standard_normal moments") {
    Rng rng = make_rng(3);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = standard_normal(rng);
      s += z;
      s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
  }
}
