#include "soymat/baseline_loess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "soymat/error.hpp"

namespace soymat {

GliValue gli_of_means(const Rgb& means) {
  const double r = means[0];
  const double g = means[1];
  const double b = means[2];
  const double denom = 2.0 * g + r + b;
  if (!(denom != 0.0)) return {0.0, true};
  return {(2.0 * g - r - b) / denom, false};
}

GliValue gli(const Image& image) {
  if (image.empty()) throw DataError("GLI of an empty image");
  return gli_of_means(image.channel_means());
}

namespace {

double tricube(double u) {
  if (u >= 1.0) return 0.0;
  const double t = 1.0 - u * u * u;
  return t * t * t;
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> lowess(std::span<const double> xs, std::span<const double> ys, const LowessOptions& opts) {
  const std::size_t n = xs.size();
  if (ys.size() != n) throw ConfigError("lowess: xs and ys differ in length");
  if (!(opts.frac > 0.0 && opts.frac <= 1.0)) throw ConfigError("lowess: frac must lie in (0, 1]");
  if (opts.robust_iters < 0) throw ConfigError("lowess: robust_iters must be >= 0");
  if (n < 2 || std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; }))
    throw ConfigError("lowess: needs at least two distinct x values");

  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(opts.frac * n)), 1, n);
  std::vector<double> robustness(n, 1.0);
  std::vector<double> fitted(n, 0.0);
  std::vector<double> dist(n);
  std::vector<double> w(n);

  for (int round = 0; round <= opts.robust_iters; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) dist[j] = std::abs(xs[j] - xs[i]);
      std::vector<double> sorted = dist;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
      const double h = sorted[k - 1];
      double sw = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double base = h > 0.0 ? tricube(dist[j] / h) : (dist[j] == 0.0 ? 1.0 : 0.0);
        w[j] = base * robustness[j];
        sw += w[j];
      }
      if (!(sw > 0.0)) {
        // Every neighbour was rejected as an outlier: fall back to the plain window.
        for (std::size_t j = 0; j < n; ++j) {
          w[j] = h > 0.0 ? tricube(dist[j] / h) : (dist[j] == 0.0 ? 1.0 : 0.0);
          sw += w[j];
        }
      }
      double xm = 0.0, ym = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        xm += w[j] * xs[j];
        ym += w[j] * ys[j];
      }
      xm /= sw;
      ym /= sw;
      double sxx = 0.0, sxy = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sxx += w[j] * (xs[j] - xm) * (xs[j] - xm);
        sxy += w[j] * (xs[j] - xm) * (ys[j] - ym);
        scale += w[j] * xs[j] * xs[j];
      }
      // A window with fewer than two distinct weighted x values gets the weighted mean.
      if (sxx <= 1e-12 * std::max(1.0, scale))
        fitted[i] = ym;
      else
        fitted[i] = ym + sxy / sxx * (xs[i] - xm);
    }
    if (round == opts.robust_iters) break;

    std::vector<double> abs_res(n);
    for (std::size_t j = 0; j < n; ++j) abs_res[j] = std::abs(ys[j] - fitted[j]);
    const double s = median(abs_res);
    if (!(s > 0.0)) break;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = (ys[j] - fitted[j]) / (6.0 * s);
      robustness[j] = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
    }
  }
  return fitted;
}

GliSeries gli_series(const PlotSeries& series) {
  GliSeries out;
  out.plot_id = series.plot_id;
  out.environment_id = series.environment_id;
  for (const PlotSnip& s : series.snips) {
    if (!out.days.empty() && s.flight_day <= out.days.back())
      throw DataError("plot '" + series.plot_id + "': flight days are not strictly increasing");
    out.days.push_back(s.flight_day);
    out.gli.push_back(gli(s.image).value);
  }
  return out;
}

std::vector<double> interpolate_daily(std::span<const int> days, std::span<const double> values) {
  if (days.size() != values.size()) throw ConfigError("interpolate_daily: days and values differ in length");
  if (days.size() < 2) throw ConfigError("interpolate_daily: needs at least two flight days");
  for (std::size_t i = 1; i < days.size(); ++i)
    if (days[i] <= days[i - 1]) throw ConfigError("interpolate_daily: days must be strictly increasing");

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(days.back() - days.front() + 1));
  std::size_t seg = 0;
  for (int d = days.front(); d <= days.back(); ++d) {
    while (seg + 2 < days.size() && d > days[seg + 1]) ++seg;
    const int d0 = days[seg];
    const int d1 = days[seg + 1];
    if (d == d0) {
      out.push_back(values[seg]);
    } else if (d == d1) {
      out.push_back(values[seg + 1]);
    } else {
      const double t = static_cast<double>(d - d0) / (d1 - d0);
      out.push_back(values[seg] + t * (values[seg + 1] - values[seg]));
    }
  }
  return out;
}

LoessFit fit_loess(const GliSeries& series, const LowessOptions& opts) {
  LoessFit fit;
  fit.source = series;
  fit.options = opts;
  std::vector<double> xs(series.days.begin(), series.days.end());
  fit.smoothed = lowess(xs, series.gli, opts);
  fit.first_day = series.days.front();
  fit.daily = interpolate_daily(series.days, fit.smoothed);
  return fit;
}

MaturityPrediction predict_from_fit(const LoessFit& fit, double threshold) {
  const std::vector<double>& v = fit.daily;
  std::size_t best = 0;
  double best_gap = std::abs(v[0] - threshold);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double gap = std::abs(v[i] - threshold);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  bool crosses = false;
  for (std::size_t i = 0; i < v.size() && !crosses; ++i)
    crosses = (v[i] - threshold) * (v[0] - threshold) <= 0.0;
  MaturityPrediction p;
  p.rm_day = fit.first_day + static_cast<int>(best);
  p.censored = !crosses && (best == 0 || best + 1 == v.size());
  return p;
}

MaturityPrediction predict_maturity_loess(const PlotSeries& series, double threshold, const LowessOptions& opts) {
  if (series.snips.size() < 2) throw DataError("plot '" + series.plot_id + "' needs at least two flights");
  return predict_from_fit(fit_loess(gli_series(series), opts), threshold);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 9; ++i) t.push_back(i / 100.0);
  return t;
}

ThresholdGrid threshold_grid_search(const std::vector<PlotSeries>& series, const std::vector<double>& thresholds,
                                    const LowessOptions& opts) {
  if (thresholds.empty()) throw ConfigError("threshold grid is empty");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1])) throw ConfigError("thresholds must be strictly increasing");

  std::map<std::string, std::vector<const PlotSeries*>> by_env;
  for (const PlotSeries& s : series) {
    if (!s.rm_day) throw DataError("plot '" + s.plot_id + "' in '" + s.environment_id + "' has no ground truth");
    by_env[s.environment_id].push_back(&s);
  }

  ThresholdGrid grid;
  grid.thresholds = thresholds;
  for (const auto& [env, plots] : by_env) {
    std::vector<LoessFit> fits;
    std::vector<double> truth;
    for (const PlotSeries* s : plots) {
      if (s->snips.size() < 2) throw DataError("plot '" + s->plot_id + "' needs at least two flights");
      fits.push_back(fit_loess(gli_series(*s), opts));
      truth.push_back(static_cast<double>(*s->rm_day));
    }
    EnvironmentGrid eg;
    eg.environment_id = env;
    for (double t : thresholds) {
      std::vector<double> pred;
      for (const LoessFit& f : fits) pred.push_back(predict_from_fit(f, t).rm_day);
      eg.by_threshold.push_back(regression_metrics(pred, truth));
    }
    bool have_r2 = false;
    for (std::size_t i = 0; i < eg.by_threshold.size(); ++i) {
      const RegressionMetrics& m = eg.by_threshold[i];
      if (m.r2_defined && (!have_r2 || m.r2 > eg.by_threshold[eg.best_r2].r2)) {
        eg.best_r2 = i;
        have_r2 = true;
      }
      if (m.mae < eg.by_threshold[eg.best_mae].mae) eg.best_mae = i;
      if (m.mse < eg.by_threshold[eg.best_mse].mse) eg.best_mse = i;
    }
    grid.environments.push_back(std::move(eg));
  }
  return grid;
}

std::string grid_to_csv(const ThresholdGrid& grid) {
  std::ostringstream os;
  char buf[64];
  os << "environment,metric";
  for (double t : grid.thresholds) {
    std::snprintf(buf, sizeof buf, ",%.2f", t);
    os << buf;
  }
  os << '\n';
  for (const EnvironmentGrid& eg : grid.environments) {
    const auto row = [&](const char* name, std::size_t best, auto value, bool check_r2) {
      os << eg.environment_id << ',' << name;
      for (std::size_t i = 0; i < eg.by_threshold.size(); ++i) {
        const RegressionMetrics& m = eg.by_threshold[i];
        if (check_r2 && !m.r2_defined) {
          os << ",NA";
          continue;
        }
        std::snprintf(buf, sizeof buf, ",%.3f", value(m));
        os << buf;
        if (i == best && (!check_r2 || eg.by_threshold[best].r2_defined)) os << '*';
      }
      os << '\n';
    };
    row("r2", eg.best_r2, [](const RegressionMetrics& m) { return m.r2; }, true);
    row("MAE", eg.best_mae, [](const RegressionMetrics& m) { return m.mae; }, false);
    row("MSE", eg.best_mse, [](const RegressionMetrics& m) { return m.mse; }, false);
  }
  return os.str();
}

}  // namespace soymat
