#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace soymat {

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);
std::string hash_file(const std::filesystem::path& path);

struct ScatterPoint {
  double truth = 0.0;
  double predicted = 0.0;
};

// Predicted-vs-truth scatter: one <circle> per point and the x = y line.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title);

// Everything needed to repeat a command: its options, inputs, seed and the
// hashes of what it wrote.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_json;  // command options as a JSON object
  std::vector<std::string> inputs;
  std::map<std::string, std::string> outputs;  // file name -> FNV-1a hash

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

inline constexpr const char* kManifestFile = "manifest.json";

// Hashes the listed files (relative to dir) into the manifest and writes it.
void finish_manifest(RunManifest& manifest, const std::filesystem::path& dir, const std::vector<std::string>& files);

}  // namespace soymat
