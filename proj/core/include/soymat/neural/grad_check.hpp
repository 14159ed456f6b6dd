#pragma once

#include <string>
#include <vector>

#include "soymat/neural/network.hpp"

namespace soymat::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double huber_delta = 1.0;
  // Multiplies the analytic gradient before comparison; 2.0 plants a fault
  // that the check must report as a relative error of 0.5.
  double fault_scale = 1.0;
};

struct GradCheckEntry {
  std::string name;  // parameter tensor, e.g. "lstm_1.recurrent_kernel"
  std::string layer;
  std::size_t checked = 0;
  // Elements whose +/- epsilon probes fall on different sides of a ReLU,
  // pooling or Huber kink; finite differences are not defined there.
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;

  // Worst relative error per layer, in network order.
  std::vector<std::pair<std::string, double>> per_layer() const;
  bool passed(double tolerance = 1e-4) const { return max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Central finite differences of the mean Huber loss over the batch against
// the hand-derived gradients, for every scalar parameter.
GradCheckReport grad_check(Network<double>& net, const std::vector<Tensor<double>>& batch,
                           const std::vector<double>& targets, const GradCheckOptions& options = {});

// Gradient check on a small CNN-LSTM built from a fixed seed: random weights,
// random inputs and targets. Used by the CLI and the acceptance suite.
struct ReducedCheckSetup {
  int time_steps = 3;
  int height = 64;
  int width = 40;
  int filters = 8;
  int lstm_units = 16;
  int batch = 2;
  std::uint64_t seed = 7;
};
NetworkConfig reduced_check_config(const ReducedCheckSetup& setup);
GradCheckReport run_reduced_grad_check(const ReducedCheckSetup& setup, const GradCheckOptions& options);

}  // namespace soymat::nn
