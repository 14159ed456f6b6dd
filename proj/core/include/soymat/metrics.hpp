#pragma once

#include <cstddef>
#include <span>

namespace soymat {

struct RegressionMetrics {
  std::size_t n = 0;
  double mae = 0.0;  // days
  double mse = 0.0;  // days^2
  double r2 = 0.0;
  bool r2_defined = false;  // false for n < 2 or zero-variance ground truth
};

double mae(std::span<const double> pred, std::span<const double> truth);
double mse(std::span<const double> pred, std::span<const double> truth);

struct R2 {
  double value = 0.0;
  bool defined = false;
};
// 1 - SS_res / SS_tot; may be negative.
R2 r2(std::span<const double> pred, std::span<const double> truth);

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth);

}  // namespace soymat
