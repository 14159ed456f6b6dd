#include "soymat/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "soymat/error.hpp"

namespace soymat {

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const std::filesystem::path& path) { return hash_hex(fnv1a64(read_text_file(path))); }

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title) {
  constexpr double kSize = 400.0;
  constexpr double kMargin = 50.0;
  double lo = 0.0, hi = 1.0;
  if (!points.empty()) {
    lo = hi = points.front().truth;
    for (const ScatterPoint& p : points) {
      for (double v : {p.truth, p.predicted}) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  lo = std::floor(lo) - 1.0;
  hi = std::ceil(hi) + 1.0;
  const double span = hi - lo;
  const auto sx = [&](double v) { return kMargin + (v - lo) / span * kSize; };
  const auto sy = [&](double v) { return kMargin + kSize - (v - lo) / span * kSize; };

  std::ostringstream os;
  const double total = kSize + 2 * kMargin;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total << "\" viewBox=\"0 0 "
     << total << ' ' << total << "\">\n"
     << "<title>" << xml_escape(title) << "</title>\n"
     << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" fill=\"white\" stroke=\"#444\"/>\n"
     << "<line x1=\"" << num(sx(lo)) << "\" y1=\"" << num(sy(lo)) << "\" x2=\"" << num(sx(hi)) << "\" y2=\"" << num(sy(hi))
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
     << "<text x=\"" << total / 2 << "\" y=\"" << kMargin / 2 << "\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n"
     << "<text x=\"" << total / 2 << "\" y=\"" << total - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << "ground truth (days after Aug 31) " << num(lo) << " to " << num(hi) << "</text>\n"
     << "<text x=\"14\" y=\"" << total / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
     << total / 2 << ")\">predicted</text>\n"
     << "<g fill=\"#2a7\" fill-opacity=\"0.6\">\n";
  for (const ScatterPoint& p : points) {
    const double x = std::isfinite(p.truth) ? p.truth : lo;
    const double y = std::isfinite(p.predicted) ? p.predicted : lo;
    os << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_json = j.at("config").dump();
    m.inputs = j.value("inputs", std::vector<std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid run manifest: ") + e.what());
  }
  return m;
}

void finish_manifest(RunManifest& manifest, const std::filesystem::path& dir, const std::vector<std::string>& files) {
  for (const std::string& f : files) manifest.outputs[f] = hash_file(dir / f);
  write_text_file(dir / kManifestFile, manifest.to_json());
}

}  // namespace soymat
