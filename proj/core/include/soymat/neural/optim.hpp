#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "soymat/neural/layers.hpp"
#include "soymat/rng.hpp"

namespace soymat::nn {

// Glorot/Xavier uniform bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(int fan_in, int fan_out);

template <typename T>
void xavier_uniform(std::span<T> out, int fan_in, int fan_out, Rng& rng);

// Fans derived from the shape: (k, k, in, out) kernels use the receptive
// field, (in, out) matrices use their extents.
template <typename T>
Tensor<T> xavier_init(const Shape& shape, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Inverse-time decay applied per update: lr / (1 + decay * updates_so_far).
  double decay = 0.1;
};

double decayed_learning_rate(const AdamConfig& cfg, std::int64_t updates_so_far);

// One bias-corrected Adam update of a single tensor; step is 1-based.
template <typename T>
void adam_update(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step, double lr, const AdamConfig& cfg);

// Adam state (first/second moments and the update counter) for a fixed list
// of parameters.
template <typename T>
class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<Param<T>*>& params);

  // Applies one update from the accumulated Param::grad values.
  void step(const std::vector<Param<T>*>& params);

  std::int64_t updates() const { return updates_; }
  double current_learning_rate() const { return decayed_learning_rate(cfg_, updates_); }
  const AdamConfig& config() const { return cfg_; }

  const std::vector<AlignedVector<T>>& first_moments() const { return m_; }
  const std::vector<AlignedVector<T>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::int64_t updates_ = 0;
  std::vector<AlignedVector<T>> m_;
  std::vector<AlignedVector<T>> v_;
};

}  // namespace soymat::nn
