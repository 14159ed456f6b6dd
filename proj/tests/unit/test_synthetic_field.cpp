#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "soymat/error.hpp"
#include "soymat/ingest.hpp"
#include "soymat/synthetic_field.hpp"
#include "support/scratch.hpp"

using namespace soymat;

namespace {

double gli_of(const Rgb& c) { return (2.0 * c[1] - c[0] - c[2]) / (2.0 * c[1] + c[0] + c[2]); }

// Colour at the plot centre, read straight from the canvas.
Rgb centre_colour(const Orthomosaic& o, const PlotBoundary& b) {
  double cx = 0.0, cy = 0.0;
  for (const Point2& p : b.corners) {
    cx += p.x / 4.0;
    cy += p.y / 4.0;
  }
  return o.image.pixel(static_cast<int>(std::floor(cx)), static_cast<int>(std::floor(cy)));
}

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_plots = 23;
  cfg.plot_rows = 3;
  cfg.plot_cols = 10;
  cfg.plot_px_w = 40;
  cfg.plot_px_h = 12;
  cfg.gutter_px = 4;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_SUITE("synthetic_field") {
  TEST_CASE("trajectory value two slopes after maturity") {
    // g_brown + (g_green - g_brown) * sigma(-2), sigma(-2) = 0.1192029220221175559...
    CHECK(greenness_trajectory(20.0, 28.0, Trajectory{}) ==
          doctest::Approx(-0.155166655869825914113761317255).epsilon(1e-14));
    CHECK(greenness_trajectory(20.0, 20.0, Trajectory{}) == doctest::Approx(0.02).epsilon(1e-14));
  }

  TEST_CASE("logistic is stable for large arguments") {
    CHECK(logistic(-800.0) == 0.0);
    CHECK(logistic(800.0) == 1.0);
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(-2.0) == doctest::Approx(0.11920292202211755).epsilon(1e-15));
  }

  TEST_CASE("trajectory inverse") {
    const Trajectory t;
    for (double day : {8.0, 17.5, 25.0, 33.0}) {
      const double g = greenness_trajectory(21.0, day, t);
      CHECK(trajectory_day_for(g, 21.0, t) == doctest::Approx(day).epsilon(1e-9));
    }
    CHECK_THROWS_AS(trajectory_day_for(0.3, 21.0, t), DataError);
  }

  TEST_CASE("plot colours invert the index in G") {
    CHECK(plot_color(0.02).rgb == Rgb{100.0f, 104.0f, 100.0f});
    CHECK(plot_color(0.3).rgb == Rgb{100.0f, 186.0f, 100.0f});
    CHECK(plot_color(0.0).rgb == Rgb{100.0f, 100.0f, 100.0f});
    CHECK_FALSE(plot_color(0.43).clamped);
    const PlotColor hi = plot_color(0.9);
    CHECK(hi.clamped);
    CHECK(hi.rgb[1] <= 255.0f);
    CHECK(plot_color(-0.5).clamped);
  }

  TEST_CASE("noiseless render is flat") {
    Rng rng = make_rng(1);
    const RenderedPlot r = render_plot(0.1, 8, 4, 0.0, rng);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 8; ++x) CHECK(r.image.pixel(x, y) == plot_color(0.1).rgb);
  }

  TEST_CASE("noisy render stays on integer levels in range") {
    Rng rng = make_rng(2);
    const RenderedPlot r = render_plot(0.4, 64, 16, 40.0, rng);
    for (float v : r.image.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 255.0f);
      CHECK(v == std::round(v));
    }
  }

  TEST_CASE("same seed, same field; other seed, other field") {
    const SynthConfig cfg = small_config();
    const Environment a = generate_environment(cfg);
    const Environment b = generate_environment(cfg);
    REQUIRE(a.orthomosaics.size() == 5u);
    for (std::size_t i = 0; i < a.orthomosaics.size(); ++i) CHECK(a.orthomosaics[i].image == b.orthomosaics[i].image);
    SynthConfig other = cfg;
    other.seed = 10;
    CHECK_FALSE(generate_environment(other).orthomosaics[0].image == a.orthomosaics[0].image);
  }

  TEST_CASE("ground truth within range and ids are sequential") {
    const Environment e = generate_environment(small_config());
    REQUIRE(e.ground_truth.size() == 23u);
    CHECK(e.ground_truth.front().plot_id == "p0001");
    CHECK(e.ground_truth.back().plot_id == "p0023");
    for (const GroundTruth& g : e.ground_truth) {
      CHECK(g.rm_day >= 10);
      CHECK(g.rm_day <= 30);
    }
    CHECK(e.boundaries.size() == 23u);
  }

  TEST_CASE("noiseless plots lose greenness monotonically") {
    SynthConfig cfg = small_config();
    cfg.noise_sigma = 0.0;
    cfg.rotation_deg = 12.0;
    const Environment e = generate_environment(cfg);
    for (const PlotBoundary& b : e.boundaries) {
      double prev = 1.0;
      for (const Orthomosaic& o : e.orthomosaics) {
        const double g = gli_of(centre_colour(o, b));
        CHECK(g <= prev);
        prev = g;
      }
    }
  }

  TEST_CASE("maturity is recoverable from noiseless colours") {
    SynthConfig cfg = small_config();
    cfg.noise_sigma = 0.0;
    const Environment e = generate_environment(cfg);
    const Trajectory t = cfg.trajectory;
    for (std::size_t k = 0; k < e.boundaries.size(); ++k) {
      const int truth = e.ground_truth[k].rm_day;
      // Flight nearest the maturity day, where the logistic is steepest.
      std::size_t best = 0;
      for (std::size_t f = 1; f < cfg.flight_days.size(); ++f)
        if (std::abs(cfg.flight_days[f] - truth) < std::abs(cfg.flight_days[best] - truth)) best = f;
      const double g = gli_of(centre_colour(e.orthomosaics[best], e.boundaries[k]));
      const double p = (g - t.g_brown) / (t.g_green - t.g_brown);
      const double recovered = cfg.flight_days[best] + t.slope_days * std::log(p / (1.0 - p));
      CAPTURE(k);
      CHECK(std::abs(recovered - truth) <= 0.5);
    }
  }

  TEST_CASE("soil between plots keeps the soil colour") {
    const Environment e = generate_environment(small_config());
    CHECK(e.orthomosaics[0].image.pixel(0, 0) == kSoilColor);
    CHECK(e.orthomosaics[0].image.pixel(2, 30) == kSoilColor);
  }

  TEST_CASE("a canvas too small for the grid is a config error") {
    SynthConfig cfg = small_config();
    cfg.canvas_w = 100;
    cfg.canvas_h = 100;
    CHECK_THROWS_AS(generate_environment(cfg), ConfigError);
    cfg.canvas_w = 1000;
    cfg.canvas_h = 200;
    CHECK(generate_environment(cfg).orthomosaics[0].image.width() == 1000);
  }

  TEST_CASE("invalid configurations are rejected") {
    SynthConfig cfg = small_config();
    cfg.n_plots = 31;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.n_plots = 20;  // leaves the whole last row empty
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.flight_days = {6, 6, 20};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.trajectory.g_brown = 0.05;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.trajectory.slope_days = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.maturity_hi = 60;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.noise_sigma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("config JSON round trip") {
    SynthConfig cfg = small_config();
    cfg.environment_id = "envX";
    cfg.rotation_deg = 7.5;
    cfg.flight_days = {3, 9, 15, 21, 30};
    cfg.maturity_lo = 12;
    cfg.maturity_hi = 22;
    cfg.trajectory = {0.3, -0.1, 3.0};
    cfg.noise_sigma = 2.5;
    const SynthConfig back = synth_config_from_json(synth_config_to_json(cfg));
    CHECK(synth_config_to_json(back) == synth_config_to_json(cfg));
    CHECK(back.rotation_deg == 7.5);
    CHECK(back.trajectory.g_green == 0.3);
    CHECK(back.flight_days == cfg.flight_days);
    CHECK_THROWS_AS(synth_config_from_json("{not json"), ConfigError);
  }

  TEST_CASE("field-trial preset") {
    const auto preset = field_trial_preset(42);
    REQUIRE(preset.size() == 6u);
    const std::vector<int> counts = {874, 796, 1686, 688, 896, 1410};
    for (std::size_t e = 0; e < 6; ++e) {
      CHECK(preset[e].n_plots == counts[e]);
      CHECK(preset[e].flight_days.size() == 5u);
      CHECK_NOTHROW(preset[e].validate());
    }
    CHECK(preset[0].flight_days == std::vector<int>{6, 13, 20, 27, 38});
    CHECK(preset[0].seed != preset[1].seed);
  }

  TEST_CASE("writing environments merges their files") {
    const auto dir = testing::scratch_dir("synth_merge");
    SynthConfig a = small_config();
    a.environment_id = "envB";
    SynthConfig b = small_config();
    b.environment_id = "envA";
    b.n_plots = 21;
    write_environment(dir, generate_environment(a));
    write_environment(dir, generate_environment(b));
    write_environment(dir, generate_environment(a));
    const auto bounds = read_plot_boundaries(dir / kBoundaryFile);
    const auto truth = read_ground_truth(dir / kGroundTruthFile);
    CHECK(bounds.size() == 44u);
    CHECK(truth.size() == 44u);
    CHECK(truth.front().environment_id == "envA");
    CHECK(truth.back().environment_id == "envB");
    CHECK(std::filesystem::exists(dir / "envA_37.png"));
    CHECK(std::filesystem::exists(dir / "envB_6.png"));
  }
}
