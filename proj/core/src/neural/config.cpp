#include "soymat/neural/config.hpp"

#include <algorithm>
#include <sstream>

#include "soymat/error.hpp"

namespace soymat::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Lstm: return "lstm";
    case LayerKind::Dense: return "dense";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(std::string name, int filters, int kernel, int stride, Padding padding,
                            Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.name = std::move(name);
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::maxpool2d(std::string name, int window) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2d;
  s.name = std::move(name);
  s.window = window;
  s.stride = window;
  return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::lstm(std::string name, int units, bool return_sequences) {
  LayerSpec s;
  s.kind = LayerKind::Lstm;
  s.name = std::move(name);
  s.units = units;
  s.return_sequences = return_sequences;
  return s;
}

LayerSpec LayerSpec::dense(std::string name, int units, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.name = std::move(name);
  s.units = units;
  s.activation = act;
  return s;
}

NetworkConfig NetworkConfig::cnn_lstm(int time_steps, int height, int width, int channels,
                                      int filters, int lstm_units) {
  NetworkConfig cfg;
  cfg.input = {time_steps, height, width, channels};
  cfg.layers = {
      LayerSpec::conv2d("conv2d_1", filters),
      LayerSpec::conv2d("conv2d_2", filters),
      LayerSpec::maxpool2d("max_pooling2d_1"),
      LayerSpec::conv2d("conv2d_3", filters),
      LayerSpec::conv2d("conv2d_4", filters),
      LayerSpec::maxpool2d("max_pooling2d_2"),
      LayerSpec::flatten("flatten"),
      LayerSpec::lstm("lstm_1", lstm_units, true),
      LayerSpec::lstm("lstm_2", lstm_units, false),
      LayerSpec::dense("dense", 1),
  };
  return cfg;
}

SamePad same_padding(int in, int kernel, int stride) {
  SamePad p;
  p.out = (in + stride - 1) / stride;
  const int total = std::max((p.out - 1) * stride + kernel - in, 0);
  p.before = total / 2;
  p.after = total - p.before;
  return p;
}

namespace {

[[noreturn]] void shape_error(const LayerSpec& spec, const Shape& in, const std::string& what) {
  throw ConfigError("layer '" + spec.name + "' (" + to_string(spec.kind) + "): " + what +
                    "; input shape " + shape_string(in));
}

}  // namespace

std::vector<LayerTrace> shape_trace(const NetworkConfig& config) {
  std::vector<LayerTrace> trace;
  Shape shape = config.input;
  for (const int d : shape) {
    if (d < 1) throw ConfigError("network input extents must be positive: " + shape_string(shape));
  }
  for (const LayerSpec& spec : config.layers) {
    LayerTrace t{spec.name, spec.kind, shape, {}, 0};
    switch (spec.kind) {
      case LayerKind::Conv2d: {
        if (shape.size() != 4) shape_error(spec, shape, "expects (time, height, width, channels)");
        if (spec.kernel < 1 || spec.stride < 1 || spec.filters < 1)
          shape_error(spec, shape, "kernel, stride and filters must be positive");
        int oh = 0;
        int ow = 0;
        if (spec.padding == Padding::Same) {
          oh = same_padding(shape[1], spec.kernel, spec.stride).out;
          ow = same_padding(shape[2], spec.kernel, spec.stride).out;
        } else {
          oh = shape[1] >= spec.kernel ? (shape[1] - spec.kernel) / spec.stride + 1 : 0;
          ow = shape[2] >= spec.kernel ? (shape[2] - spec.kernel) / spec.stride + 1 : 0;
        }
        if (oh < 1 || ow < 1) shape_error(spec, shape, "output would be empty");
        t.output = {shape[0], oh, ow, spec.filters};
        t.params = static_cast<std::size_t>(spec.kernel) * spec.kernel * shape[3] * spec.filters +
                   spec.filters;
        break;
      }
      case LayerKind::MaxPool2d: {
        if (shape.size() != 4) shape_error(spec, shape, "expects (time, height, width, channels)");
        const int oh = shape[1] / spec.window;
        const int ow = shape[2] / spec.window;
        if (oh < 1 || ow < 1) shape_error(spec, shape, "output would be empty");
        t.output = {shape[0], oh, ow, shape[3]};
        break;
      }
      case LayerKind::Flatten: {
        if (shape.size() < 2) shape_error(spec, shape, "expects a leading time axis");
        int features = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) features *= shape[i];
        t.output = {shape[0], features};
        break;
      }
      case LayerKind::Lstm: {
        if (shape.size() != 2) shape_error(spec, shape, "expects (time, features)");
        if (spec.units < 1) shape_error(spec, shape, "units must be positive");
        const std::size_t d = static_cast<std::size_t>(shape[1]);
        const std::size_t u = static_cast<std::size_t>(spec.units);
        t.params = 4 * u * (d + u + 1);
        t.output = spec.return_sequences ? Shape{shape[0], spec.units} : Shape{spec.units};
        break;
      }
      case LayerKind::Dense: {
        if (shape.empty()) shape_error(spec, shape, "expects at least one axis");
        if (spec.units < 1) shape_error(spec, shape, "units must be positive");
        t.params = static_cast<std::size_t>(shape.back()) * spec.units + spec.units;
        t.output = shape;
        t.output.back() = spec.units;
        break;
      }
    }
    shape = t.output;
    trace.push_back(std::move(t));
  }
  return trace;
}

std::size_t param_count(const NetworkConfig& config) {
  std::size_t total = 0;
  for (const auto& t : shape_trace(config)) total += t.params;
  return total;
}

}  // namespace soymat::nn
