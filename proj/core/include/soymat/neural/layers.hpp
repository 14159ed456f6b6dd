#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "soymat/neural/config.hpp"
#include "soymat/neural/ops.hpp"
#include "soymat/neural/tensor.hpp"

namespace soymat::nn {

// A trainable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  int fan_in = 0;
  int fan_out = 0;
  bool is_bias = false;

  Param() = default;
  Param(std::string n, Shape shape, int fin, int fout, bool bias)
      : name(std::move(n)), value(shape), grad(shape), fan_in(fin), fan_out(fout), is_bias(bias) {}
};

template <typename T>
class Layer {
 public:
  Layer(LayerSpec spec, Shape in, Shape out)
      : spec_(std::move(spec)), input_shape_(std::move(in)), output_shape_(std::move(out)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  virtual void forward(const Tensor<T>& in, Tensor<T>& out) = 0;

  // Adds parameter gradients into Param::grad. grad_in may be null when the
  // caller does not need the input gradient (first layer).
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                        Tensor<T>* grad_in) = 0;

  virtual std::vector<Param<T>*> params() { return {}; }

  // Fingerprint of the piecewise-linear branch taken in the last forward
  // pass (ReLU masks, pooling winners); 0 for smooth layers.
  virtual std::uint64_t branch_signature(const Tensor<T>& /*out*/) const { return 0; }

 protected:
  LayerSpec spec_;
  Shape input_shape_;
  Shape output_shape_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out);

}  // namespace soymat::nn
