#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "soymat/neural/tensor.hpp"

namespace soymat::nn {

enum class LayerKind { Conv2d, MaxPool2d, Flatten, Lstm, Dense };
enum class Padding { Same, Valid };
enum class Activation { Linear, Relu };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::string name;

  // Conv2d
  int filters = 0;
  int kernel = 3;
  int stride = 1;
  Padding padding = Padding::Same;
  Activation activation = Activation::Linear;

  // MaxPool2d
  int window = 2;

  // Lstm / Dense
  int units = 0;
  bool return_sequences = false;

  static LayerSpec conv2d(std::string name, int filters, int kernel = 3, int stride = 2,
                          Padding padding = Padding::Same, Activation act = Activation::Relu);
  static LayerSpec maxpool2d(std::string name, int window = 2);
  static LayerSpec flatten(std::string name);
  static LayerSpec lstm(std::string name, int units, bool return_sequences);
  static LayerSpec dense(std::string name, int units, Activation act = Activation::Linear);
};

// Network input is a sequence of frames, (time, height, width, channels).
struct NetworkConfig {
  Shape input;
  std::vector<LayerSpec> layers;

  int time_steps() const { return input.empty() ? 0 : input[0]; }

  // Four time-distributed 3x3/32/stride-2 convolutions with 2x2 pooling after
  // the second and fourth, two 256-unit LSTMs and a single linear output.
  static NetworkConfig cnn_lstm(int time_steps = 5, int height = 256, int width = 64,
                                int channels = 3, int filters = 32, int lstm_units = 256);
};

struct LayerTrace {
  std::string name;
  LayerKind kind;
  Shape input;
  Shape output;
  std::size_t params = 0;
};

// Shape inference over the whole network. Throws ConfigError naming the
// offending layer when shapes are not conformant.
std::vector<LayerTrace> shape_trace(const NetworkConfig& config);

// Trainable weights plus biases over all layers.
std::size_t param_count(const NetworkConfig& config);

// "Same" padding split for one spatial axis; the odd extra pixel goes after.
struct SamePad {
  int out = 0;
  int before = 0;
  int after = 0;
};
SamePad same_padding(int in, int kernel, int stride);

}  // namespace soymat::nn
