#include "soymat/neural/layers.hpp"

#include <algorithm>

#include "soymat/error.hpp"

namespace soymat::nn {

namespace {

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& delta) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += delta.data[i];
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t relu_mask_signature(const Tensor<T>& out) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::uint64_t word = 0;
  int bits = 0;
  for (const T v : out.data) {
    word = (word << 1) | (v > T(0) ? 1u : 0u);
    if (++bits == 64) {
      h = fnv_mix(h, word);
      word = 0;
      bits = 0;
    }
  }
  return fnv_mix(h, word);
}

template <typename T>
void check_input(const LayerSpec& spec, const Shape& expected, const Tensor<T>& in) {
  if (in.shape != expected)
    throw ConfigError("layer '" + spec.name + "': expected input " + shape_string(expected) +
                      ", got " + shape_string(in.shape));
}

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(const LayerSpec& spec, const Shape& in, const Shape& out)
      : Layer<T>(spec, in, out),
        kernel_(spec.name + ".kernel", {spec.kernel, spec.kernel, in[3], spec.filters},
                spec.kernel * spec.kernel * in[3], spec.kernel * spec.kernel * spec.filters, false),
        bias_(spec.name + ".bias", {spec.filters}, spec.filters, spec.filters, true) {}

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    check_input(this->spec_, this->input_shape_, in);
    out = conv2d(in, kernel_.value, bias_.value, this->spec_.stride, this->spec_.padding);
    if (this->spec_.activation == Activation::Relu) {
      for (T& v : out.data) v = v > T(0) ? v : T(0);
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    const Tensor<T> g =
        this->spec_.activation == Activation::Relu ? relu_backward(out, grad_out) : grad_out;
    Conv2dGrads<T> grads = conv2d_backward(in, kernel_.value, g, this->spec_.stride,
                                           this->spec_.padding, grad_in != nullptr);
    add_into(kernel_.grad, grads.weights);
    add_into(bias_.grad, grads.bias);
    if (grad_in) *grad_in = std::move(grads.input);
  }

  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }

  std::uint64_t branch_signature(const Tensor<T>& out) const override {
    return this->spec_.activation == Activation::Relu ? relu_mask_signature(out) : 0;
  }

 private:
  Param<T> kernel_;
  Param<T> bias_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    check_input(this->spec_, this->input_shape_, in);
    MaxPoolResult<T> r = maxpool2d(in, this->spec_.window);
    out = std::move(r.output);
    argmax_ = std::move(r.argmax);
  }

  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    if (grad_in) *grad_in = maxpool2d_backward(this->input_shape_, argmax_, grad_out);
  }

  std::uint64_t branch_signature(const Tensor<T>&) const override {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::size_t i : argmax_) h = fnv_mix(h, i);
    return h;
  }

 private:
  std::vector<std::size_t> argmax_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    check_input(this->spec_, this->input_shape_, in);
    out.shape = this->output_shape_;
    out.data = in.data;
  }

  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    if (!grad_in) return;
    grad_in->shape = this->input_shape_;
    grad_in->data = grad_out.data;
  }
};

template <typename T>
class LstmLayer final : public Layer<T> {
 public:
  LstmLayer(const LayerSpec& spec, const Shape& in, const Shape& out)
      : Layer<T>(spec, in, out),
        input_kernel_(spec.name + ".kernel", {in[1], 4 * spec.units}, in[1], 4 * spec.units, false),
        recurrent_kernel_(spec.name + ".recurrent_kernel", {spec.units, 4 * spec.units}, spec.units,
                          4 * spec.units, false),
        bias_(spec.name + ".bias", {4 * spec.units}, 4 * spec.units, 4 * spec.units, true) {}

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    check_input(this->spec_, this->input_shape_, in);
    out = lstm(in, weights(), this->spec_.return_sequences, &cache_);
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    LstmGrads<T> g = lstm_backward(in, weights(), cache_, grad_out, this->spec_.return_sequences);
    add_into(input_kernel_.grad, g.input_kernel);
    add_into(recurrent_kernel_.grad, g.recurrent_kernel);
    add_into(bias_.grad, g.bias);
    if (grad_in) *grad_in = std::move(g.input);
  }

  std::vector<Param<T>*> params() override { return {&input_kernel_, &recurrent_kernel_, &bias_}; }

 private:
  LstmWeights<T> weights() const { return {input_kernel_.value, recurrent_kernel_.value, bias_.value}; }

  Param<T> input_kernel_;
  Param<T> recurrent_kernel_;
  Param<T> bias_;
  LstmCache<T> cache_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(const LayerSpec& spec, const Shape& in, const Shape& out)
      : Layer<T>(spec, in, out),
        kernel_(spec.name + ".kernel", {in.back(), spec.units}, in.back(), spec.units, false),
        bias_(spec.name + ".bias", {spec.units}, spec.units, spec.units, true) {}

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    check_input(this->spec_, this->input_shape_, in);
    out = dense(in, kernel_.value, bias_.value);
    if (this->spec_.activation == Activation::Relu) {
      for (T& v : out.data) v = v > T(0) ? v : T(0);
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) override {
    const Tensor<T> g =
        this->spec_.activation == Activation::Relu ? relu_backward(out, grad_out) : grad_out;
    DenseGrads<T> d = dense_backward(in, kernel_.value, g);
    add_into(kernel_.grad, d.weights);
    add_into(bias_.grad, d.bias);
    if (grad_in) *grad_in = std::move(d.input);
  }

  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }

  std::uint64_t branch_signature(const Tensor<T>& out) const override {
    return this->spec_.activation == Activation::Relu ? relu_mask_signature(out) : 0;
  }

 private:
  Param<T> kernel_;
  Param<T> bias_;
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out) {
  switch (spec.kind) {
    case LayerKind::Conv2d: return std::make_unique<Conv2dLayer<T>>(spec, in, out);
    case LayerKind::MaxPool2d: return std::make_unique<MaxPoolLayer<T>>(spec, in, out);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer<T>>(spec, in, out);
    case LayerKind::Lstm: return std::make_unique<LstmLayer<T>>(spec, in, out);
    case LayerKind::Dense: return std::make_unique<DenseLayer<T>>(spec, in, out);
  }
  throw ConfigError("unknown layer kind for '" + spec.name + "'");
}

template std::unique_ptr<Layer<float>> make_layer(const LayerSpec&, const Shape&, const Shape&);
template std::unique_ptr<Layer<double>> make_layer(const LayerSpec&, const Shape&, const Shape&);

}  // namespace soymat::nn
