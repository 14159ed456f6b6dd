#include "soymat/neural/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "soymat/error.hpp"

namespace soymat::nn {

using nlohmann::json;

namespace {

std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }
std::string activation_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

LayerKind kind_from(const std::string& s) {
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "maxpool2d") return LayerKind::MaxPool2d;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "lstm") return LayerKind::Lstm;
  if (s == "dense") return LayerKind::Dense;
  throw DataError("unknown layer kind '" + s + "'");
}

json config_json(const NetworkConfig& config) {
  json j;
  j["input"] = config.input;
  j["layers"] = json::array();
  for (const LayerSpec& s : config.layers) {
    json l;
    l["kind"] = to_string(s.kind);
    l["name"] = s.name;
    switch (s.kind) {
      case LayerKind::Conv2d:
        l["filters"] = s.filters;
        l["kernel"] = s.kernel;
        l["stride"] = s.stride;
        l["padding"] = padding_name(s.padding);
        l["activation"] = activation_name(s.activation);
        break;
      case LayerKind::MaxPool2d:
        l["window"] = s.window;
        break;
      case LayerKind::Flatten:
        break;
      case LayerKind::Lstm:
        l["units"] = s.units;
        l["return_sequences"] = s.return_sequences;
        break;
      case LayerKind::Dense:
        l["units"] = s.units;
        l["activation"] = activation_name(s.activation);
        break;
    }
    j["layers"].push_back(std::move(l));
  }
  return j;
}

NetworkConfig config_from(const json& j) {
  NetworkConfig cfg;
  cfg.input = j.at("input").get<Shape>();
  for (const json& l : j.at("layers")) {
    const LayerKind kind = kind_from(l.at("kind").get<std::string>());
    const std::string name = l.at("name").get<std::string>();
    const Activation act =
        l.value("activation", std::string("linear")) == "relu" ? Activation::Relu : Activation::Linear;
    switch (kind) {
      case LayerKind::Conv2d:
        cfg.layers.push_back(LayerSpec::conv2d(
            name, l.at("filters").get<int>(), l.value("kernel", 3), l.value("stride", 2),
            l.value("padding", std::string("same")) == "same" ? Padding::Same : Padding::Valid, act));
        break;
      case LayerKind::MaxPool2d:
        cfg.layers.push_back(LayerSpec::maxpool2d(name, l.value("window", 2)));
        break;
      case LayerKind::Flatten:
        cfg.layers.push_back(LayerSpec::flatten(name));
        break;
      case LayerKind::Lstm:
        cfg.layers.push_back(LayerSpec::lstm(name, l.at("units").get<int>(), l.at("return_sequences").get<bool>()));
        break;
      case LayerKind::Dense:
        cfg.layers.push_back(LayerSpec::dense(name, l.at("units").get<int>(), act));
        break;
    }
  }
  return cfg;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

std::string config_to_json(const NetworkConfig& config) { return config_json(config).dump(2); }

NetworkConfig config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid network config: ") + e.what());
  }
}

void save_weights(const std::filesystem::path& dir, const Network<float>& net) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "soymat-weights/1";
  manifest["dtype"] = "float32-le";
  manifest["config"] = config_json(net.config());
  manifest["output_scaling"] = {{"offset", net.output_scaling.offset}, {"scale", net.output_scaling.scale}};
  manifest["tensors"] = json::array();
  for (const Param<float>* p : net.params()) {
    const std::string file = p->name + ".bin";
    manifest["tensors"].push_back({{"name", p->name}, {"shape", p->value.shape}, {"file", file}});
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / file).string());
    for (const float v : p->value.data) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  std::ofstream m(dir / "manifest.json");
  if (!m) throw DataError("cannot write " + (dir / "manifest.json").string());
  m << manifest.dump(2) << '\n';
}

Network<float> load_weights(const std::filesystem::path& dir) {
  std::ifstream m(dir / "manifest.json");
  if (!m) throw DataError("missing weights manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(m);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid weights manifest: ") + e.what());
  }
  Network<float> net(config_from(manifest.at("config")));
  net.output_scaling.offset = manifest.at("output_scaling").at("offset").get<double>();
  net.output_scaling.scale = manifest.at("output_scaling").at("scale").get<double>();
  auto params = net.params();
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) throw DataError("weights manifest tensor count does not match config");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const json& t = tensors[k];
    if (t.at("name").get<std::string>() != params[k]->name || t.at("shape").get<Shape>() != params[k]->value.shape)
      throw DataError("weights manifest entry " + std::to_string(k) + " does not match layer " + params[k]->name);
    const auto path = dir / t.at("file").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing weights blob " + path.string());
    for (float& v : params[k]->value.data) {
      std::uint32_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw DataError("truncated weights blob " + path.string());
      v = std::bit_cast<float>(to_little_endian(bits));
    }
  }
  return net;
}

}  // namespace soymat::nn
