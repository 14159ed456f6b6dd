#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "soymat/neural/config.hpp"
#include "soymat/neural/layers.hpp"
#include "soymat/neural/tensor.hpp"

namespace soymat::nn {

// Fixed affine map from the raw network output to days:
// prediction = offset + scale * raw. Not trainable.
struct OutputScaling {
  double offset = 0.0;
  double scale = 1.0;
};

template <typename T>
class Network {
 public:
  explicit Network(NetworkConfig config);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const NetworkConfig& config() const { return config_; }
  const std::vector<LayerTrace>& trace() const { return trace_; }

  std::vector<Param<T>*> params();
  std::vector<const Param<T>*> params() const;
  std::size_t param_count() const;

  // Xavier-uniform weights, zero biases. Each tensor draws from its own
  // stream derived from the seed and its position.
  void init_xavier(std::uint64_t seed);
  void zero_params();
  void zero_grads();

  // Forward pass for one sample shaped like config().input. Activations are
  // kept for a following backward().
  double predict(const Tensor<T>& sample);

  // Forward and backward for one sample; adds weight * dHuber/dparam into the
  // parameter gradients and returns the unweighted Huber loss.
  double accumulate_gradients(const Tensor<T>& sample, double target, double huber_delta,
                              double weight);

  // Backward from an explicit d(loss)/d(prediction) after predict().
  void backward(double grad_prediction);

  // Fingerprint of the ReLU masks and pooling winners from the last forward
  // pass. A change between two parameter values means a kink lies between.
  std::uint64_t branch_signature() const;

  // Shapes of every activation from the last forward pass (input first).
  std::vector<Shape> activation_shapes() const;

  // Copy with parameters converted to another working precision.
  template <typename U>
  Network<U> cast() const;

  OutputScaling output_scaling;

 private:
  NetworkConfig config_;
  std::vector<LayerTrace> trace_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Tensor<T>> activations_;
  Tensor<T> grad_a_;
  Tensor<T> grad_b_;
};

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(config_);
  out.output_scaling = output_scaling;
  auto dst = out.params();
  auto src = params();
  for (std::size_t k = 0; k < src.size(); ++k) {
    for (std::size_t i = 0; i < src[k]->value.size(); ++i)
      dst[k]->value.data[i] = static_cast<U>(src[k]->value.data[i]);
  }
  return out;
}

}  // namespace soymat::nn
