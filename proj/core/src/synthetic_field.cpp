#include "soymat/synthetic_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "soymat/error.hpp"

namespace soymat {

using nlohmann::json;

void SynthConfig::validate() const {
  if (environment_id.empty()) throw ConfigError("environment_id must not be empty");
  if (environment_id.find_first_of("/\\ ,") != std::string::npos)
    throw ConfigError("environment_id '" + environment_id + "' contains a separator character");
  if (n_plots < 1) throw ConfigError("n_plots must be at least 1");
  if (plot_rows < 1 || plot_cols < 1) throw ConfigError("plot_rows and plot_cols must be at least 1");
  const long long cells = static_cast<long long>(plot_rows) * plot_cols;
  if (n_plots > cells || n_plots <= cells - plot_cols)
    throw ConfigError("n_plots " + std::to_string(n_plots) + " does not fill a " + std::to_string(plot_rows) +
                      "x" + std::to_string(plot_cols) + " grid (only the last row may be partial)");
  if (plot_px_w < 1 || plot_px_h < 1) throw ConfigError("plot pixel dimensions must be positive");
  if (gutter_px < 0) throw ConfigError("gutter_px must not be negative");
  if (!std::isfinite(rotation_deg)) throw ConfigError("rotation_deg must be finite");
  if (canvas_w < 0 || canvas_h < 0) throw ConfigError("canvas size must not be negative");
  if (!(trajectory.g_brown < kDefaultGliThreshold && kDefaultGliThreshold < trajectory.g_green))
    throw ConfigError("trajectory must satisfy g_brown < 0.02 < g_green");
  if (trajectory.g_green > kMaxRenderableGli || trajectory.g_brown < kMinRenderableGli)
    throw ConfigError("trajectory end points must lie in the renderable GLI range [-0.33, 0.43]");
  if (!(trajectory.slope_days > 0.0)) throw ConfigError("trajectory slope s must be positive");
  if (flight_days.empty()) throw ConfigError("flight_days must not be empty");
  for (std::size_t i = 1; i < flight_days.size(); ++i) {
    if (flight_days[i] <= flight_days[i - 1]) throw ConfigError("flight_days must be strictly increasing");
  }
  if (maturity_lo > maturity_hi) throw ConfigError("maturity range is empty");
  if (maturity_lo < flight_days.front() - 10 || maturity_hi > flight_days.back() + 10)
    throw ConfigError("maturity range must lie within 10 days of the first and last flight");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
}

double logistic(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double greenness_trajectory(double maturity_day, double day, const Trajectory& traj) {
  return traj.g_brown + (traj.g_green - traj.g_brown) * logistic((maturity_day - day) / traj.slope_days);
}

double trajectory_day_for(double g, double maturity_day, const Trajectory& traj) {
  const double p = (g - traj.g_brown) / (traj.g_green - traj.g_brown);
  if (!(p > 0.0 && p < 1.0)) throw DataError("GLI value lies outside the open trajectory range");
  return maturity_day - traj.slope_days * std::log(p / (1.0 - p));
}

PlotColor plot_color(double gli) {
  PlotColor out;
  double g = gli;
  if (!(g >= kMinRenderableGli && g <= kMaxRenderableGli)) {
    out.clamped = true;
    g = std::isnan(g) ? 0.0 : std::clamp(g, kMinRenderableGli, kMaxRenderableGli);
  }
  const double green = std::min(255.0, std::round(100.0 * (1.0 + g) / (1.0 - g)));
  out.rgb = {100.0f, static_cast<float>(green), 100.0f};
  return out;
}

namespace {

float noisy_level(float base, double sigma, Rng& rng) {
  if (sigma == 0.0) return base;
  return static_cast<float>(std::clamp(std::round(base + sigma * standard_normal(rng)), 0.0, 255.0));
}

Rgb noisy_pixel(const Rgb& base, double sigma, Rng& rng) {
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = noisy_level(base[c], sigma, rng);
  return out;
}

}  // namespace

RenderedPlot render_plot(double gli, int width, int height, double noise_sigma, Rng& rng) {
  if (width < 1 || height < 1) throw ConfigError("render_plot needs positive dimensions");
  const PlotColor color = plot_color(gli);
  RenderedPlot out{Image(width, height), color.clamped};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.image.set_pixel(x, y, noisy_pixel(color.rgb, noise_sigma, rng));
  }
  return out;
}

namespace {

struct Layout {
  int canvas_w = 0;
  int canvas_h = 0;
  double cos_a = 1.0;
  double sin_a = 0.0;
  Point2 field_centre;   // in unrotated field coordinates
  Point2 canvas_centre;  // where the field centre lands on the canvas
  std::vector<Quad> plot_rects;  // unrotated field coordinates
  std::vector<Quad> plot_quads;  // canvas coordinates

  Point2 to_canvas(Point2 p) const {
    const Point2 d = p - field_centre;
    return Point2{cos_a * d.x - sin_a * d.y, sin_a * d.x + cos_a * d.y} + canvas_centre;
  }
  Point2 to_field(Point2 q) const {
    const Point2 d = q - canvas_centre;
    return Point2{cos_a * d.x + sin_a * d.y, -sin_a * d.x + cos_a * d.y} + field_centre;
  }
};

Layout make_layout(const SynthConfig& cfg) {
  Layout L;
  const double pitch_x = cfg.plot_px_w + cfg.gutter_px;
  const double pitch_y = cfg.plot_px_h + cfg.gutter_px;
  const double field_w = cfg.plot_cols * pitch_x + cfg.gutter_px;
  const double field_h = cfg.plot_rows * pitch_y + cfg.gutter_px;
  L.field_centre = {field_w / 2.0, field_h / 2.0};

  if (cfg.rotation_deg != 0.0) {
    const double a = cfg.rotation_deg * std::numbers::pi / 180.0;
    L.cos_a = std::cos(a);
    L.sin_a = std::sin(a);
  }
  // Rotated field extent relative to its centre.
  const double half_w = 0.5 * (std::abs(L.cos_a) * field_w + std::abs(L.sin_a) * field_h);
  const double half_h = 0.5 * (std::abs(L.sin_a) * field_w + std::abs(L.cos_a) * field_h);
  const int need_w = static_cast<int>(std::ceil(2.0 * half_w - 1e-9));
  const int need_h = static_cast<int>(std::ceil(2.0 * half_h - 1e-9));
  L.canvas_w = cfg.canvas_w > 0 ? cfg.canvas_w : need_w;
  L.canvas_h = cfg.canvas_h > 0 ? cfg.canvas_h : need_h;
  if (need_w > L.canvas_w || need_h > L.canvas_h)
    throw ConfigError("plot grid needs a " + std::to_string(need_w) + "x" + std::to_string(need_h) +
                      " canvas but " + std::to_string(L.canvas_w) + "x" + std::to_string(L.canvas_h) +
                      " was requested");
  // Integer offset keeps an unrotated grid on whole pixels.
  L.canvas_centre = {std::floor((L.canvas_w - need_w) / 2.0) + need_w / 2.0,
                     std::floor((L.canvas_h - need_h) / 2.0) + need_h / 2.0};

  for (int k = 0; k < cfg.n_plots; ++k) {
    const int r = k / cfg.plot_cols;
    const int c = k % cfg.plot_cols;
    const double x0 = cfg.gutter_px + c * pitch_x;
    const double y0 = cfg.gutter_px + r * pitch_y;
    const double x1 = x0 + cfg.plot_px_w;
    const double y1 = y0 + cfg.plot_px_h;
    const Quad rect = {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}};
    Quad quad;
    for (int i = 0; i < 4; ++i) quad[i] = L.to_canvas(rect[i]);
    L.plot_rects.push_back(rect);
    L.plot_quads.push_back(quad);
  }
  return L;
}

std::string plot_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%04d", k + 1);
  return buf;
}

}  // namespace

Environment generate_environment(const SynthConfig& cfg) {
  cfg.validate();
  const Layout L = make_layout(cfg);

  Environment env;
  env.environment_id = cfg.environment_id;

  Rng maturity_rng = make_rng(derive_seed(cfg.seed, "maturity"));
  std::vector<int> maturity(static_cast<std::size_t>(cfg.n_plots));
  for (int k = 0; k < cfg.n_plots; ++k) {
    maturity[k] = static_cast<int>(uniform_int(maturity_rng, cfg.maturity_lo, cfg.maturity_hi));
    env.ground_truth.push_back({plot_name(k), cfg.environment_id, maturity[k]});
    env.boundaries.push_back(make_boundary(plot_name(k), cfg.environment_id, L.plot_quads[k]));
  }

  for (const int day : cfg.flight_days) {
    Image canvas(L.canvas_w, L.canvas_h, kSoilColor);
    for (int k = 0; k < cfg.n_plots; ++k) {
      const double g = greenness_trajectory(maturity[k], day, cfg.trajectory);
      const Rgb base = plot_color(g).rgb;
      Rng rng = make_rng(derive_seed(derive_seed(cfg.seed, "plot-noise", static_cast<std::uint64_t>(k)),
                                     static_cast<std::uint64_t>(day)));
      const Quad& q = L.plot_quads[k];
      const Quad& rect = L.plot_rects[k];
      double min_x = q[0].x, max_x = q[0].x, min_y = q[0].y, max_y = q[0].y;
      for (const Point2& p : q) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
      }
      const int x_begin = std::max(0, static_cast<int>(std::floor(min_x)));
      const int x_end = std::min(L.canvas_w, static_cast<int>(std::ceil(max_x)));
      const int y_begin = std::max(0, static_cast<int>(std::floor(min_y)));
      const int y_end = std::min(L.canvas_h, static_cast<int>(std::ceil(max_y)));
      for (int y = y_begin; y < y_end; ++y) {
        for (int x = x_begin; x < x_end; ++x) {
          const Point2 f = L.to_field({x + 0.5, y + 0.5});
          if (f.x < rect[0].x || f.x >= rect[2].x || f.y < rect[0].y || f.y >= rect[2].y) continue;
          canvas.set_pixel(x, y, noisy_pixel(base, cfg.noise_sigma, rng));
        }
      }
    }
    env.orthomosaics.push_back({cfg.environment_id, day, std::move(canvas)});
  }
  return env;
}

void write_environment(const std::filesystem::path& dir, const Environment& env) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");

  for (const Orthomosaic& o : env.orthomosaics)
    write_png(dir / (o.environment_id + "_" + std::to_string(o.flight_day) + ".png"), o.image);

  std::vector<PlotBoundary> boundaries;
  if (fs::exists(dir / kBoundaryFile)) {
    for (PlotBoundary& b : read_plot_boundaries(dir / kBoundaryFile))
      if (b.environment_id != env.environment_id) boundaries.push_back(std::move(b));
  }
  boundaries.insert(boundaries.end(), env.boundaries.begin(), env.boundaries.end());

  std::vector<GroundTruth> truth;
  if (fs::exists(dir / kGroundTruthFile)) {
    for (GroundTruth& g : read_ground_truth(dir / kGroundTruthFile))
      if (g.environment_id != env.environment_id) truth.push_back(std::move(g));
  }
  truth.insert(truth.end(), env.ground_truth.begin(), env.ground_truth.end());
  // Environment order keeps the files independent of the order environments were written in.
  std::stable_sort(boundaries.begin(), boundaries.end(),
                   [](const PlotBoundary& a, const PlotBoundary& b) { return a.environment_id < b.environment_id; });
  std::stable_sort(truth.begin(), truth.end(),
                   [](const GroundTruth& a, const GroundTruth& b) { return a.environment_id < b.environment_id; });

  const auto write_text = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write '" + path.string() + "'");
  };
  write_text(dir / kBoundaryFile, plot_boundaries_to_json(boundaries));
  write_text(dir / kGroundTruthFile, ground_truth_to_csv(truth));
}

const std::vector<std::vector<int>>& field_trial_flight_days() {
  static const std::vector<std::vector<int>> days = {
      {6, 13, 20, 27, 38}, {5, 14, 17, 25, 34}, {7, 13, 20, 26, 33},
      {6, 14, 21, 27, 37}, {6, 14, 18, 25, 34}, {6, 13, 20, 27, 37},
  };
  return days;
}

const std::vector<int>& field_trial_plot_counts() {
  static const std::vector<int> counts = {874, 796, 1686, 688, 896, 1410};
  return counts;
}

std::vector<SynthConfig> field_trial_preset(std::uint64_t seed, int plot_px_w, int plot_px_h) {
  // Observed median maturity days per environment; ground truth spans +-8 days.
  static const int kMedians[] = {20, 24, 15, 25, 26, 27};
  constexpr int kCols = 40;
  std::vector<SynthConfig> out;
  for (std::size_t e = 0; e < field_trial_plot_counts().size(); ++e) {
    SynthConfig cfg;
    cfg.environment_id = "env" + std::to_string(e + 1);
    cfg.n_plots = field_trial_plot_counts()[e];
    cfg.plot_cols = kCols;
    cfg.plot_rows = (cfg.n_plots + kCols - 1) / kCols;
    cfg.plot_px_w = plot_px_w;
    cfg.plot_px_h = plot_px_h;
    cfg.flight_days = field_trial_flight_days()[e];
    cfg.maturity_lo = kMedians[e] - 8;
    cfg.maturity_hi = kMedians[e] + 8;
    cfg.seed = derive_seed(seed, cfg.environment_id);
    out.push_back(cfg);
  }
  return out;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
  json j = {
      {"environment_id", cfg.environment_id},
      {"n_plots", cfg.n_plots},
      {"plot_rows", cfg.plot_rows},
      {"plot_cols", cfg.plot_cols},
      {"plot_px_w", cfg.plot_px_w},
      {"plot_px_h", cfg.plot_px_h},
      {"gutter_px", cfg.gutter_px},
      {"rotation_deg", cfg.rotation_deg},
      {"canvas_w", cfg.canvas_w},
      {"canvas_h", cfg.canvas_h},
      {"flight_days", cfg.flight_days},
      {"maturity_range", {cfg.maturity_lo, cfg.maturity_hi}},
      {"trajectory", {{"g_green", cfg.trajectory.g_green}, {"g_brown", cfg.trajectory.g_brown},
                      {"s", cfg.trajectory.slope_days}}},
      {"noise_sigma", cfg.noise_sigma},
      {"seed", cfg.seed},
  };
  return j.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("environment_id", cfg.environment_id);
    get("n_plots", cfg.n_plots);
    get("plot_rows", cfg.plot_rows);
    get("plot_cols", cfg.plot_cols);
    get("plot_px_w", cfg.plot_px_w);
    get("plot_px_h", cfg.plot_px_h);
    get("gutter_px", cfg.gutter_px);
    get("rotation_deg", cfg.rotation_deg);
    get("canvas_w", cfg.canvas_w);
    get("canvas_h", cfg.canvas_h);
    get("flight_days", cfg.flight_days);
    get("noise_sigma", cfg.noise_sigma);
    get("seed", cfg.seed);
    if (j.contains("maturity_range")) {
      const auto range = j.at("maturity_range").get<std::vector<int>>();
      if (range.size() != 2) throw ConfigError("maturity_range must be [lo, hi]");
      cfg.maturity_lo = range[0];
      cfg.maturity_hi = range[1];
    }
    if (j.contains("trajectory")) {
      const json& t = j.at("trajectory");
      if (t.contains("g_green")) cfg.trajectory.g_green = t.at("g_green").get<double>();
      if (t.contains("g_brown")) cfg.trajectory.g_brown = t.at("g_brown").get<double>();
      if (t.contains("s")) cfg.trajectory.slope_days = t.at("s").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid synthetic config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace soymat
