#include "soymat/neural/network.hpp"

#include <cmath>

#include "soymat/error.hpp"
#include "soymat/neural/optim.hpp"
#include "soymat/rng.hpp"

namespace soymat::nn {

template <typename T>
Network<T>::Network(NetworkConfig config) : config_(std::move(config)), trace_(shape_trace(config_)) {
  if (trace_.empty()) throw ConfigError("network has no layers");
  if (shape_size(trace_.back().output) != 1)
    throw ConfigError("network must end in a single output, got " + shape_string(trace_.back().output));
  for (std::size_t i = 0; i < trace_.size(); ++i)
    layers_.push_back(make_layer<T>(config_.layers[i], trace_[i].input, trace_[i].output));
  activations_.resize(layers_.size() + 1);
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_) {
    for (Param<T>* p : layer->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> Network<T>::params() const {
  std::vector<const Param<T>*> out;
  for (auto& layer : layers_) {
    for (Param<T>* p : layer->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::size_t Network<T>::param_count() const {
  std::size_t n = 0;
  for (const Param<T>* p : params()) n += p->value.size();
  return n;
}

template <typename T>
void Network<T>::init_xavier(std::uint64_t seed) {
  std::uint64_t index = 0;
  for (Param<T>* p : params()) {
    if (p->is_bias) {
      p->value.fill(T(0));
    } else {
      Rng rng = make_rng(derive_seed(seed, "xavier", index));
      xavier_uniform<T>(p->value.data, p->fan_in, p->fan_out, rng);
    }
    ++index;
  }
}

template <typename T>
void Network<T>::zero_params() {
  for (Param<T>* p : params()) p->value.fill(T(0));
}

template <typename T>
void Network<T>::zero_grads() {
  for (Param<T>* p : params()) p->grad.fill(T(0));
}

template <typename T>
double Network<T>::predict(const Tensor<T>& sample) {
  if (sample.shape != config_.input)
    throw ConfigError("network input must be " + shape_string(config_.input) + ", got " +
                      shape_string(sample.shape));
  activations_[0] = sample;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(activations_[i], activations_[i + 1]);
  const double raw = static_cast<double>(activations_.back().data[0]);
  return output_scaling.offset + output_scaling.scale * raw;
}

template <typename T>
void Network<T>::backward(double grad_prediction) {
  grad_a_ = Tensor<T>(activations_.back().shape);
  grad_a_.data[0] = static_cast<T>(grad_prediction * output_scaling.scale);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    layers_[i]->backward(activations_[i], activations_[i + 1], grad_a_, i > 0 ? &grad_b_ : nullptr);
    if (i > 0) std::swap(grad_a_, grad_b_);
  }
}

template <typename T>
double Network<T>::accumulate_gradients(const Tensor<T>& sample, double target, double huber_delta,
                                        double weight) {
  const double y = predict(sample);
  const HuberValue h = huber_loss(target, y, huber_delta);
  backward(weight * h.grad);
  return h.loss;
}

template <typename T>
std::uint64_t Network<T>::branch_signature() const {
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    h = h * 0x9e3779b97f4a7c15ULL + layers_[i]->branch_signature(activations_[i + 1]);
  return h;
}

template <typename T>
std::vector<Shape> Network<T>::activation_shapes() const {
  std::vector<Shape> shapes;
  for (const Tensor<T>& a : activations_) shapes.push_back(a.shape);
  return shapes;
}

template class Network<float>;
template class Network<double>;

}  // namespace soymat::nn
