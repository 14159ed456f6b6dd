#include "soymat/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "soymat/error.hpp"

namespace soymat {

using nlohmann::json;

std::vector<int> PlotSeries::flight_days() const {
  std::vector<int> days;
  days.reserve(snips.size());
  for (const PlotSnip& s : snips) days.push_back(s.flight_day);
  return days;
}

std::string to_string(Schedule s) { return s == Schedule::Weekly ? "weekly" : "biweekly"; }

Schedule schedule_from_string(const std::string& s) {
  if (s == "weekly") return Schedule::Weekly;
  if (s == "biweekly" || s == "bi-weekly") return Schedule::Biweekly;
  throw ConfigError("unknown schedule '" + s + "' (expected weekly or biweekly)");
}

int schedule_length(Schedule s) { return s == Schedule::Weekly ? 5 : 3; }

// ---- boundaries ------------------------------------------------------------

PlotBoundary make_boundary(std::string plot_id, std::string environment_id, Quad corners) {
  for (const Point2& p : corners) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw DataError("plot '" + plot_id + "': non-finite corner coordinate");
  }
  double area = signed_area(corners);
  if (!(std::abs(area) > 1e-9)) throw DataError("plot '" + plot_id + "': degenerate boundary (zero area)");
  if (area < 0) std::swap(corners[1], corners[3]);
  area = signed_area(corners);
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2 a = corners[(i + 1) % 4] - corners[i];
    const Point2 b = corners[(i + 2) % 4] - corners[(i + 1) % 4];
    if (!(cross(a, b) > 0.0))
      throw DataError("plot '" + plot_id + "': boundary is not a convex quadrilateral");
  }
  return PlotBoundary{std::move(plot_id), std::move(environment_id), corners};
}

std::vector<PlotBoundary> parse_plot_boundaries(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("boundary file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("boundary file must hold a JSON array");

  std::vector<PlotBoundary> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    const std::string where = "boundary record " + std::to_string(i);
    if (!rec.is_object() || !rec.contains("plot_id") || !rec.contains("environment_id") ||
        !rec.contains("corners"))
      throw DataError(where + ": expected keys plot_id, environment_id, corners");
    if (!rec["plot_id"].is_string() || !rec["environment_id"].is_string())
      throw DataError(where + ": plot_id and environment_id must be strings");
    const json& c = rec["corners"];
    if (!c.is_array() || c.size() != 4) throw DataError(where + ": corners must hold exactly 4 points");
    Quad q;
    for (std::size_t k = 0; k < 4; ++k) {
      if (!c[k].is_array() || c[k].size() != 2 || !c[k][0].is_number() || !c[k][1].is_number())
        throw DataError(where + ": corner " + std::to_string(k) + " must be [x, y]");
      q[k] = {c[k][0].get<double>(), c[k][1].get<double>()};
    }
    std::string plot = rec["plot_id"].get<std::string>();
    std::string env = rec["environment_id"].get<std::string>();
    if (!seen.emplace(env, plot).second)
      throw DataError(where + ": duplicate plot_id '" + plot + "' in environment '" + env + "'");
    out.push_back(make_boundary(std::move(plot), std::move(env), q));
  }
  return out;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<PlotBoundary> read_plot_boundaries(const std::filesystem::path& path) {
  return parse_plot_boundaries(read_text(path));
}

std::string plot_boundaries_to_json(const std::vector<PlotBoundary>& boundaries) {
  json doc = json::array();
  for (const PlotBoundary& b : boundaries) {
    json corners = json::array();
    for (const Point2& p : b.corners) corners.push_back({p.x, p.y});
    doc.push_back({{"plot_id", b.plot_id}, {"environment_id", b.environment_id}, {"corners", corners}});
  }
  return doc.dump(1) + "\n";
}

// ---- ground truth ----------------------------------------------------------

std::vector<GroundTruth> parse_ground_truth(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "plot_id,environment_id,rm_day")
    throw DataError("ground truth CSV must start with header plot_id,environment_id,rm_day");
  std::vector<GroundTruth> rows;
  std::set<std::pair<std::string, std::string>> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 3) throw DataError("ground truth line " + std::to_string(line_no) + ": expected 3 fields");
    GroundTruth g;
    g.plot_id = fields[0];
    g.environment_id = fields[1];
    try {
      std::size_t used = 0;
      g.rm_day = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError("ground truth line " + std::to_string(line_no) + ": rm_day '" + fields[2] +
                      "' is not an integer");
    }
    if (!seen.emplace(g.environment_id, g.plot_id).second)
      throw DataError("ground truth line " + std::to_string(line_no) + ": duplicate plot '" + g.plot_id + "'");
    rows.push_back(std::move(g));
  }
  return rows;
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_text(path));
}

std::string ground_truth_to_csv(const std::vector<GroundTruth>& rows) {
  std::ostringstream os;
  os << "plot_id,environment_id,rm_day\n";
  for (const GroundTruth& g : rows) os << g.plot_id << ',' << g.environment_id << ',' << g.rm_day << '\n';
  return os.str();
}

// ---- rasters ---------------------------------------------------------------

namespace {

// Bilinear sample at continuous pixel-index coordinates, clamped to the edge.
Rgb sample_bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
    const double bottom = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
    out[c] = static_cast<float>(top * (1.0 - fy) + bottom * fy);
  }
  return out;
}

}  // namespace

Image extract_plot(const Orthomosaic& ortho, const PlotBoundary& boundary) {
  const Image& img = ortho.image;
  if (img.empty()) throw DataError("orthomosaic for " + ortho.environment_id + " is empty");
  const Quad& q = boundary.corners;

  const Point2 e0 = q[1] - q[0];
  const Point2 e1 = q[2] - q[1];
  const Point2 e2 = q[3] - q[2];
  const Point2 e3 = q[0] - q[3];
  Point2 dir = (norm(e0) + norm(e2) >= norm(e1) + norm(e3)) ? e0 : e1;
  dir = (1.0 / norm(dir)) * dir;
  if (dir.x < -1e-12 || (std::abs(dir.x) <= 1e-12 && dir.y < 0)) dir = -1.0 * dir;
  const Point2 across{-dir.y, dir.x};

  double min_u = dot(q[0], dir), max_u = min_u;
  double min_v = dot(q[0], across), max_v = min_v;
  for (const Point2& p : q) {
    min_u = std::min(min_u, dot(p, dir));
    max_u = std::max(max_u, dot(p, dir));
    min_v = std::min(min_v, dot(p, across));
    max_v = std::max(max_v, dot(p, across));
  }
  const double length = max_u - min_u;
  const double width = max_v - min_v;
  const int out_w = std::max(1, static_cast<int>(std::lround(length)));
  const int out_h = std::max(1, static_cast<int>(std::lround(width)));
  const double step_u = length / out_w;
  const double step_v = width / out_h;

  const auto position = [&](int i, int j) {
    return (min_u + (i + 0.5) * step_u) * dir + (min_v + (j + 0.5) * step_v) * across;
  };

  constexpr double kTolerance = 2.0;
  bool outside = false;
  for (const Point2& p : q) {
    if (p.x < -kTolerance || p.y < -kTolerance || p.x > img.width() + kTolerance ||
        p.y > img.height() + kTolerance)
      outside = true;
  }
  if (outside) {
    std::size_t inside = 0;
    for (int j = 0; j < out_h; ++j) {
      for (int i = 0; i < out_w; ++i) {
        const Point2 p = position(i, j);
        if (p.x >= 0 && p.y >= 0 && p.x < img.width() && p.y < img.height()) ++inside;
      }
    }
    std::ostringstream msg;
    msg << "plot '" << boundary.plot_id << "' lies outside orthomosaic " << ortho.environment_id << " day "
        << ortho.flight_day << " (overlap fraction "
        << static_cast<double>(inside) / (static_cast<double>(out_w) * out_h) << ")";
    throw DataError(msg.str());
  }

  Image out(out_w, out_h);
  for (int j = 0; j < out_h; ++j) {
    for (int i = 0; i < out_w; ++i) {
      const Point2 p = position(i, j);
      out.set_pixel(i, j, sample_bilinear(img, p.x - 0.5, p.y - 0.5));
    }
  }
  return out;
}

Image resize(const Image& src, int target_len, int target_w) {
  if (src.empty()) throw DataError("resize: empty source image");
  if (target_len < 1 || target_w < 1) throw ConfigError("resize: target extents must be positive");
  if (src.width() == target_len && src.height() == target_w) return src;
  Image out(target_len, target_w);
  const double sx = static_cast<double>(src.width()) / target_len;
  const double sy = static_cast<double>(src.height()) / target_w;
  for (int j = 0; j < target_w; ++j) {
    const double y = (j + 0.5) * sy - 0.5;
    for (int i = 0; i < target_len; ++i) {
      const double x = (i + 0.5) * sx - 0.5;
      out.set_pixel(i, j, sample_bilinear(src, x, y));
    }
  }
  return out;
}

// ---- series ----------------------------------------------------------------

std::vector<PlotSeries> assemble_series(std::vector<PlotSnip> snips, const std::vector<GroundTruth>& gt) {
  std::map<std::pair<std::string, std::string>, std::vector<PlotSnip>> groups;
  for (PlotSnip& s : snips) {
    auto key = std::make_pair(s.environment_id, s.plot_id);
    groups[key].push_back(std::move(s));
  }
  std::map<std::pair<std::string, std::string>, int> truth;
  for (const GroundTruth& g : gt) truth[{g.environment_id, g.plot_id}] = g.rm_day;

  std::vector<PlotSeries> out;
  out.reserve(groups.size());
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(),
              [](const PlotSnip& a, const PlotSnip& b) { return a.flight_day < b.flight_day; });
    for (std::size_t i = 1; i < group.size(); ++i) {
      if (group[i].flight_day == group[i - 1].flight_day)
        throw DataError("duplicate snip for plot '" + key.second + "' in '" + key.first + "' on day " +
                        std::to_string(group[i].flight_day));
    }
    PlotSeries series;
    series.environment_id = key.first;
    series.plot_id = key.second;
    series.snips = std::move(group);
    if (auto it = truth.find(key); it != truth.end()) series.rm_day = it->second;
    out.push_back(std::move(series));
  }
  return out;
}

PlotSeries select_flights(const PlotSeries& series, Schedule schedule) {
  const std::size_t needed = static_cast<std::size_t>(schedule_length(schedule));
  if (series.snips.size() < needed) {
    std::ostringstream msg;
    msg << "plot '" << series.plot_id << "' in '" << series.environment_id << "' has "
        << series.snips.size() << " flights, " << to_string(schedule) << " needs " << needed
        << "; available days:";
    for (const PlotSnip& s : series.snips) msg << ' ' << s.flight_day;
    throw DataError(msg.str());
  }
  PlotSeries out;
  out.plot_id = series.plot_id;
  out.environment_id = series.environment_id;
  out.rm_day = series.rm_day;
  const std::size_t base = std::min<std::size_t>(series.snips.size(), 5);
  if (schedule == Schedule::Weekly) {
    out.snips.assign(series.snips.begin(), series.snips.begin() + static_cast<std::ptrdiff_t>(base));
  } else {
    for (const std::size_t i : {std::size_t{0}, (base - 1) / 2, base - 1}) out.snips.push_back(series.snips[i]);
  }
  return out;
}

std::vector<PlotSnip> extract_snips(const std::vector<Orthomosaic>& orthos,
                                    const std::vector<PlotBoundary>& boundaries) {
  std::vector<PlotSnip> snips;
  for (const Orthomosaic& o : orthos) {
    for (const PlotBoundary& b : boundaries) {
      if (b.environment_id != o.environment_id) continue;
      snips.push_back({b.plot_id, b.environment_id, o.flight_day, resize(extract_plot(o, b))});
    }
  }
  return snips;
}

// ---- dataset directories ---------------------------------------------------

FieldData read_field_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  FieldData data;
  data.boundaries = read_plot_boundaries(dir / kBoundaryFile);
  data.ground_truth = read_ground_truth(dir / kGroundTruthFile);

  std::set<std::string> envs;
  for (const PlotBoundary& b : data.boundaries) envs.insert(b.environment_id);

  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const std::string stem = f.stem().string();
    const std::size_t cut = stem.rfind('_');
    if (cut == std::string::npos || cut == 0 || cut + 1 == stem.size()) continue;
    const std::string env = stem.substr(0, cut);
    const std::string day_text = stem.substr(cut + 1);
    if (!envs.count(env) || !std::all_of(day_text.begin(), day_text.end(), ::isdigit)) continue;
    data.orthomosaics.push_back({env, std::stoi(day_text), read_png(f)});
  }
  std::sort(data.orthomosaics.begin(), data.orthomosaics.end(), [](const Orthomosaic& a, const Orthomosaic& b) {
    return std::tie(a.environment_id, a.flight_day) < std::tie(b.environment_id, b.flight_day);
  });
  if (data.orthomosaics.empty()) throw DataError("no orthomosaics found in '" + dir.string() + "'");
  return data;
}

// ---- calendar --------------------------------------------------------------

namespace {

constexpr const char* kMonthNames[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

}  // namespace

int rm_day_encode(CalendarDate date) {
  switch (date.month) {
    case 8:
      if (date.day == 31) return 0;
      break;
    case 9:
      if (date.day >= 1 && date.day <= 30) return date.day;
      break;
    case 10:
      if (date.day >= 1 && date.day <= 31) return 30 + date.day;
      break;
    case 11:
      if (date.day >= 1 && date.day <= 30) return 61 + date.day;
      break;
    default:
      break;
  }
  throw DataError("date " + std::to_string(date.month) + "/" + std::to_string(date.day) +
                  " is outside the Aug 31 - Nov 30 season");
}

CalendarDate rm_day_decode(int rm_day) {
  if (rm_day == 0) return {8, 31};
  if (rm_day >= 1 && rm_day <= 30) return {9, rm_day};
  if (rm_day >= 31 && rm_day <= 61) return {10, rm_day - 30};
  if (rm_day >= 62 && rm_day <= 91) return {11, rm_day - 61};
  throw DataError("relative maturity day " + std::to_string(rm_day) + " is outside the season (0..91)");
}

std::string format_date(CalendarDate date) {
  return std::string(kMonthNames[date.month - 1]) + " " + std::to_string(date.day);
}

}  // namespace soymat
