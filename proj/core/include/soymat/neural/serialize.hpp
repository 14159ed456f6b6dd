#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "soymat/neural/network.hpp"

namespace soymat::nn {

std::string config_to_json(const NetworkConfig& config);
NetworkConfig config_from_json(std::string_view json);

// Writes <dir>/manifest.json (config, output scaling, tensor names and
// shapes) and one little-endian float32 blob <dir>/<tensor>.bin per tensor.
void save_weights(const std::filesystem::path& dir, const Network<float>& net);
Network<float> load_weights(const std::filesystem::path& dir);

}  // namespace soymat::nn
