#pragma once

#include <vector>

#include "soymat/neural/config.hpp"
#include "soymat/neural/tensor.hpp"

// Layer kernels with hand-derived gradients. Spatial tensors are laid out
// (time, height, width, channels); every kernel is applied to each time step
// independently.
namespace soymat::nn {

// ---- convolution ---------------------------------------------------------

// weights: (kernel, kernel, in_channels, filters); bias: (filters).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias, int stride,
                 Padding padding);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weights,
                               const Tensor<T>& grad_out, int stride, Padding padding,
                               bool want_input_grad = true);

// ---- pooling -------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  // Flat input index of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

// Non-overlapping window x window pooling; ties pick the first maximum in
// row-major scan order.
template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor<T>& x, int window = 2);

template <typename T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                             const Tensor<T>& grad_out);

// ---- activations ---------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Masks grad by (output > 0); the derivative at exactly zero is taken as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

// ---- recurrent -----------------------------------------------------------

// Gate blocks along the 4*units axis are ordered input, forget, cell, output.
template <typename T>
struct LstmWeights {
  const Tensor<T>& input_kernel;      // (features, 4*units)
  const Tensor<T>& recurrent_kernel;  // (units, 4*units)
  const Tensor<T>& bias;              // (4*units)
};

template <typename T>
struct LstmCache {
  int steps = 0;
  int units = 0;
  // Post-activation gates, (steps, 4*units).
  AlignedVector<T> gates;
  // Cell state and its tanh, (steps, units).
  AlignedVector<T> cell;
  AlignedVector<T> cell_tanh;
  // Hidden states, (steps, units).
  AlignedVector<T> hidden;
};

template <typename T>
Tensor<T> lstm(const Tensor<T>& x, const LstmWeights<T>& w, bool return_sequences,
               LstmCache<T>* cache = nullptr);

template <typename T>
struct LstmGrads {
  Tensor<T> input;
  Tensor<T> input_kernel;
  Tensor<T> recurrent_kernel;
  Tensor<T> bias;
};

// Backpropagation through time from h0 = c0 = 0. grad_out has the shape of
// the forward output.
template <typename T>
LstmGrads<T> lstm_backward(const Tensor<T>& x, const LstmWeights<T>& w, const LstmCache<T>& cache,
                           const Tensor<T>& grad_out, bool return_sequences);

// ---- dense ---------------------------------------------------------------

// Applies y = x W + b over the last axis.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights,
                             const Tensor<T>& grad_out);

// ---- loss ----------------------------------------------------------------

struct HuberValue {
  double loss = 0.0;
  double grad = 0.0;  // dL / d(prediction)
};

// 0.5 e^2 for |e| <= delta, delta |e| - 0.5 delta^2 otherwise, e = y - prediction.
HuberValue huber_loss(double target, double prediction, double delta = 1.0);

// Batch mean of the per-item losses; grads are d(mean)/d(prediction_i).
struct HuberBatch {
  double loss = 0.0;
  std::vector<double> grads;
};
HuberBatch huber_loss(const std::vector<double>& targets, const std::vector<double>& predictions,
                      double delta = 1.0);

}  // namespace soymat::nn
