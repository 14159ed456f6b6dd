#include "soymat/metrics.hpp"

#include <cmath>
#include <string>

#include "soymat/error.hpp"

namespace soymat {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw ConfigError("metric inputs differ in length (" + std::to_string(pred.size()) + " vs " +
                      std::to_string(truth.size()) + ")");
  if (pred.empty()) throw ConfigError("metric inputs are empty");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

R2 r2(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  if (truth.size() < 2) return {};
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (!(ss_tot > 0.0)) return {};
  return {1.0 - ss_res / ss_tot, true};
}

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth) {
  RegressionMetrics m;
  m.n = pred.size();
  m.mae = mae(pred, truth);
  m.mse = mse(pred, truth);
  const R2 r = r2(pred, truth);
  m.r2 = r.value;
  m.r2_defined = r.defined;
  return m;
}

}  // namespace soymat
