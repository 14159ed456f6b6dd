#include "soymat/neural/optim.hpp"

#include <cmath>

#include "soymat/error.hpp"

namespace soymat::nn {

double xavier_bound(int fan_in, int fan_out) {
  if (fan_in + fan_out <= 0) throw ConfigError("xavier: fans must be positive");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename T>
void xavier_uniform(std::span<T> out, int fan_in, int fan_out, Rng& rng) {
  const double bound = xavier_bound(fan_in, fan_out);
  for (T& v : out) v = static_cast<T>(bound * (2.0 * uniform01(rng) - 1.0));
}

template <typename T>
Tensor<T> xavier_init(const Shape& shape, Rng& rng) {
  int fan_in = 0;
  int fan_out = 0;
  if (shape.size() == 4) {
    const int receptive = shape[0] * shape[1];
    fan_in = receptive * shape[2];
    fan_out = receptive * shape[3];
  } else if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  } else {
    throw ConfigError("xavier_init: cannot derive fans from shape " + shape_string(shape));
  }
  Tensor<T> t(shape);
  xavier_uniform<T>(t.data, fan_in, fan_out, rng);
  return t;
}

double decayed_learning_rate(const AdamConfig& cfg, std::int64_t updates_so_far) {
  return cfg.learning_rate / (1.0 + cfg.decay * static_cast<double>(updates_so_far));
}

template <typename T>
void adam_update(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step, double lr, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T one_b1 = static_cast<T>(1.0 - cfg.beta1);
  const T one_b2 = static_cast<T>(1.0 - cfg.beta2);
  const T inv_c1 = static_cast<T>(1.0 / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg.epsilon);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + one_b1 * g;
    v[i] = b2 * v[i] + one_b2 * g * g;
    const T m_hat = m[i] * inv_c1;
    const T v_hat = v[i] * inv_c2;
    value[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
Adam<T>::Adam(AdamConfig cfg, const std::vector<Param<T>*>& params) : cfg_(cfg) {
  if (!(cfg.learning_rate >= 0.0) || !(cfg.decay >= 0.0) || !(cfg.epsilon > 0.0))
    throw ConfigError("adam: learning rate and decay must be non-negative, epsilon positive");
  for (const Param<T>* p : params) {
    m_.emplace_back(p->value.size(), T(0));
    v_.emplace_back(p->value.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (params.size() != m_.size()) throw ConfigError("adam: parameter list changed between steps");
  const double lr = decayed_learning_rate(cfg_, updates_);
  ++updates_;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k];
    if (p.value.size() != m_[k].size()) throw ConfigError("adam: state shape mismatch for " + p.name);
    adam_update<T>(p.value.data, p.grad.data, m_[k], v_[k], updates_, lr, cfg_);
  }
}

template void xavier_uniform<float>(std::span<float>, int, int, Rng&);
template void xavier_uniform<double>(std::span<double>, int, int, Rng&);
template Tensor<float> xavier_init<float>(const Shape&, Rng&);
template Tensor<double> xavier_init<double>(const Shape&, Rng&);
template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, std::int64_t, double, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, std::int64_t, double, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace soymat::nn
