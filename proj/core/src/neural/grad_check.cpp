#include "soymat/neural/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "soymat/error.hpp"
#include "soymat/rng.hpp"

namespace soymat::nn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

std::vector<std::pair<std::string, double>> GradCheckReport::per_layer() const {
  std::vector<std::pair<std::string, double>> out;
  for (const GradCheckEntry& e : params) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == e.layer; });
    if (it == out.end()) {
      out.emplace_back(e.layer, e.max_rel_error);
    } else {
      it->second = std::max(it->second, e.max_rel_error);
    }
  }
  return out;
}

namespace {

struct Probe {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

Probe probe(Network<double>& net, const std::vector<Tensor<double>>& batch,
            const std::vector<double>& targets, double delta) {
  Probe p;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double y = net.predict(batch[i]);
    p.loss += huber_loss(targets[i], y, delta).loss;
    const bool quadratic = std::abs(y - targets[i]) <= delta;
    p.signature = p.signature * 0x9e3779b97f4a7c15ULL + net.branch_signature() + (quadratic ? 1 : 0);
  }
  p.loss /= static_cast<double>(batch.size());
  return p;
}

}  // namespace

GradCheckReport grad_check(Network<double>& net, const std::vector<Tensor<double>>& batch,
                           const std::vector<double>& targets, const GradCheckOptions& options) {
  if (batch.empty() || batch.size() != targets.size())
    throw ConfigError("grad_check: batch and targets must be non-empty and equal length");
  const double weight = 1.0 / static_cast<double>(batch.size());

  net.zero_grads();
  for (std::size_t i = 0; i < batch.size(); ++i)
    net.accumulate_gradients(batch[i], targets[i], options.huber_delta, weight);

  const Probe base = probe(net, batch, targets, options.huber_delta);

  GradCheckReport report;
  for (Param<double>* p : net.params()) {
    GradCheckEntry entry;
    entry.name = p->name;
    entry.layer = p->name.substr(0, p->name.find('.'));
    const std::vector<double> analytic(p->grad.data.begin(), p->grad.data.end());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + options.epsilon;
      const Probe plus = probe(net, batch, targets, options.huber_delta);
      p->value.data[i] = saved - options.epsilon;
      const Probe minus = probe(net, batch, targets, options.huber_delta);
      p->value.data[i] = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++entry.skipped_kinks;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
      const double a = analytic[i] * options.fault_scale;
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(a, numeric));
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.checked += entry.checked;
    report.skipped_kinks += entry.skipped_kinks;
    report.params.push_back(std::move(entry));
  }
  return report;
}

NetworkConfig reduced_check_config(const ReducedCheckSetup& setup) {
  return NetworkConfig::cnn_lstm(setup.time_steps, setup.height, setup.width, 3, setup.filters,
                                 setup.lstm_units);
}

GradCheckReport run_reduced_grad_check(const ReducedCheckSetup& setup, const GradCheckOptions& options) {
  Network<double> net(reduced_check_config(setup));
  net.init_xavier(setup.seed);
  // Non-zero biases so every bias path carries gradient signal.
  Rng rng = make_rng(derive_seed(setup.seed, "gradcheck-bias"));
  for (Param<double>* p : net.params()) {
    if (!p->is_bias) continue;
    for (double& v : p->value.data) v = 0.1 * (2.0 * uniform01(rng) - 1.0);
  }
  std::vector<Tensor<double>> batch;
  std::vector<double> targets;
  for (int b = 0; b < setup.batch; ++b) {
    Tensor<double> x(net.config().input);
    for (double& v : x.data) v = uniform01(rng);
    // Targets sit just off the prediction, inside the quadratic zone: the
    // finite-difference round-off scales with |prediction - target| and must
    // stay well under the 1e-8 relative-error floor times epsilon.
    const double y = net.predict(x);
    targets.push_back(y + (b % 2 == 0 ? 0.05 : -0.03));
    batch.push_back(std::move(x));
  }
  return grad_check(net, batch, targets, options);
}

}  // namespace soymat::nn
