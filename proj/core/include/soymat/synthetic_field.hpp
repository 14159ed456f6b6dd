#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "soymat/image.hpp"
#include "soymat/ingest.hpp"
#include "soymat/rng.hpp"

namespace soymat {

// Logistic greenness decay from g_green to g_brown centred on the maturity day.
struct Trajectory {
  double g_green = 0.25;
  double g_brown = -0.21;
  double slope_days = 4.0;
};

// GLI level the baseline treats as "mature" by default.
inline constexpr double kDefaultGliThreshold = 0.02;

// R = B = 100 and G solves GLI(R, G, B) = g, so GLI is invertible in G.
inline constexpr double kMinRenderableGli = -0.33;
inline constexpr double kMaxRenderableGli = 0.43;
inline constexpr Rgb kSoilColor = {120.0f, 100.0f, 80.0f};

struct SynthConfig {
  std::string environment_id = "env1";
  // Plots fill the grid row-major; the last row may be partial.
  int n_plots = 200;
  int plot_rows = 10;
  int plot_cols = 20;
  int plot_px_w = 128;  // along the plot's long axis
  int plot_px_h = 32;
  int gutter_px = 6;
  // Whole-layout rotation about the field centre, degrees.
  double rotation_deg = 0.0;
  // Optional fixed canvas; 0 means sized to fit the layout.
  int canvas_w = 0;
  int canvas_h = 0;
  std::vector<int> flight_days = {6, 13, 20, 27, 37};
  int maturity_lo = 10;
  int maturity_hi = 30;
  Trajectory trajectory;
  double noise_sigma = 8.0;
  std::uint64_t seed = 42;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;
};

struct Environment {
  std::string environment_id;
  std::vector<Orthomosaic> orthomosaics;
  std::vector<PlotBoundary> boundaries;
  std::vector<GroundTruth> ground_truth;
};

double logistic(double v);

// g(t) = g_brown + (g_green - g_brown) * logistic((m - t) / s)
double greenness_trajectory(double maturity_day, double day, const Trajectory& traj);

// Day at which the trajectory takes value g (inverse in t).
double trajectory_day_for(double g, double maturity_day, const Trajectory& traj);

// Plot colour for a target GLI before noise: (100, round(100(1+g)/(1-g)), 100).
struct PlotColor {
  Rgb rgb;
  bool clamped = false;
};
PlotColor plot_color(double gli);

struct RenderedPlot {
  Image image;
  bool clamped = false;
};
RenderedPlot render_plot(double gli, int width, int height, double noise_sigma, Rng& rng);

Environment generate_environment(const SynthConfig& cfg);

// Writes <env>_<day>.png per flight plus boundaries.json and ground_truth.csv.
// Existing boundary and ground-truth files are merged: rows of other
// environments are kept, rows of this environment are replaced.
void write_environment(const std::filesystem::path& dir, const Environment& env);

// Six environments mirroring the field-trial layout: plot counts
// 874/796/1686/688/896/1410 and each environment's five weekly flight dates.
std::vector<SynthConfig> field_trial_preset(std::uint64_t seed, int plot_px_w = 96, int plot_px_h = 24);

// Flight dates per environment as days after Aug 31.
const std::vector<std::vector<int>>& field_trial_flight_days();
const std::vector<int>& field_trial_plot_counts();

std::string synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const std::string& text);

}  // namespace soymat
