#pragma once

#include <span>
#include <string>
#include <vector>

#include "soymat/image.hpp"
#include "soymat/ingest.hpp"
#include "soymat/metrics.hpp"

namespace soymat {

// Green leaf index of the channel means: (2G - R - B) / (2G + R + B).
struct GliValue {
  double value = 0.0;
  bool degenerate = false;  // zero denominator (all-black image); value is 0
};
GliValue gli_of_means(const Rgb& means);
GliValue gli(const Image& image);

struct LowessOptions {
  double frac = 0.67;
  int robust_iters = 3;
};

// Robust locally weighted linear regression evaluated at each x. Each local fit
// uses the ceil(frac * n) nearest points with tricube weights; every robustness
// round reweights by the bisquare of residuals over 6 * median |residual|.
std::vector<double> lowess(std::span<const double> xs, std::span<const double> ys, const LowessOptions& opts = {});

struct GliSeries {
  std::string plot_id;
  std::string environment_id;
  std::vector<int> days;  // strictly increasing
  std::vector<double> gli;
};
GliSeries gli_series(const PlotSeries& series);

// Piecewise-linear values at every integer day from days.front() to days.back().
std::vector<double> interpolate_daily(std::span<const int> days, std::span<const double> values);

struct LoessFit {
  GliSeries source;
  LowessOptions options;
  std::vector<double> smoothed;  // at the flight days
  int first_day = 0;
  std::vector<double> daily;  // first_day, first_day + 1, ...
};
LoessFit fit_loess(const GliSeries& series, const LowessOptions& opts = {});

struct MaturityPrediction {
  int rm_day = 0;
  // The closest approach sits on the first or last grid day without the curve
  // crossing the threshold.
  bool censored = false;
};

// Day whose smoothed GLI is closest to the threshold; ties go to the earlier day.
MaturityPrediction predict_from_fit(const LoessFit& fit, double threshold);
MaturityPrediction predict_maturity_loess(const PlotSeries& series, double threshold, const LowessOptions& opts = {});

std::vector<double> default_thresholds();  // 0.01, 0.02, ..., 0.09

struct EnvironmentGrid {
  std::string environment_id;
  std::vector<RegressionMetrics> by_threshold;
  // Index of the best threshold per metric; ties keep the lower threshold.
  std::size_t best_r2 = 0;
  std::size_t best_mae = 0;
  std::size_t best_mse = 0;
};

struct ThresholdGrid {
  std::vector<double> thresholds;
  std::vector<EnvironmentGrid> environments;  // ascending environment_id
};

// Every series needs ground truth.
ThresholdGrid threshold_grid_search(const std::vector<PlotSeries>& series, const std::vector<double>& thresholds,
                                    const LowessOptions& opts = {});

// environment,metric,<threshold>... with the best cell of each row suffixed '*'.
std::string grid_to_csv(const ThresholdGrid& grid);

}  // namespace soymat
