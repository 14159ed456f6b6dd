#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "soymat/geometry.hpp"
#include "soymat/image.hpp"

namespace soymat {

// Network input frame size: 256 pixels along the plot, 64 across.
inline constexpr int kSnipLength = 256;
inline constexpr int kSnipWidth = 64;

struct Orthomosaic {
  std::string environment_id;
  int flight_day = 0;  // days after Aug 31
  Image image;
};

// Oriented plot rectangle in orthomosaic pixel coordinates.
struct PlotBoundary {
  std::string plot_id;
  std::string environment_id;
  Quad corners;

  double area() const { return std::abs(signed_area(corners)); }
};

struct GroundTruth {
  std::string plot_id;
  std::string environment_id;
  int rm_day = 0;
};

struct PlotSnip {
  std::string plot_id;
  std::string environment_id;
  int flight_day = 0;
  Image image;  // kSnipLength wide, kSnipWidth tall
};

struct PlotSeries {
  std::string plot_id;
  std::string environment_id;
  std::vector<PlotSnip> snips;  // strictly increasing flight_day
  std::optional<int> rm_day;

  std::vector<int> flight_days() const;
};

enum class Schedule { Weekly, Biweekly };

std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);
int schedule_length(Schedule s);

// ---- boundaries ------------------------------------------------------------

// Validates a quadrilateral (convex, non-degenerate) and normalises the winding
// so the shoelace area is positive. Throws DataError naming the plot.
PlotBoundary make_boundary(std::string plot_id, std::string environment_id, Quad corners);

// JSON array of {"plot_id", "environment_id", "corners": [[x, y] x 4]}.
std::vector<PlotBoundary> parse_plot_boundaries(const std::string& json_text);
std::vector<PlotBoundary> read_plot_boundaries(const std::filesystem::path& path);
std::string plot_boundaries_to_json(const std::vector<PlotBoundary>& boundaries);

// ---- ground truth ----------------------------------------------------------

// CSV with header plot_id,environment_id,rm_day.
std::vector<GroundTruth> parse_ground_truth(const std::string& csv_text);
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);
std::string ground_truth_to_csv(const std::vector<GroundTruth>& rows);

// ---- rasters ---------------------------------------------------------------

// Rectified crop of an oriented rectangle with its long edge horizontal,
// sampled bilinearly at pixel centres. Output size is the rectangle's own
// rounded pixel extent. Throws DataError (with the overlap fraction) when the
// boundary leaves the raster by more than 2 px.
Image extract_plot(const Orthomosaic& ortho, const PlotBoundary& boundary);

// Bilinear resize with half-pixel centres; same-size input is returned as is.
Image resize(const Image& src, int target_len = kSnipLength, int target_w = kSnipWidth);

// ---- series ----------------------------------------------------------------

// Groups snips by (environment, plot), sorts by day and joins ground truth.
// Output is ordered by (environment_id, plot_id). Throws DataError on a
// duplicate (environment, plot, day).
std::vector<PlotSeries> assemble_series(std::vector<PlotSnip> snips, const std::vector<GroundTruth>& gt);

// Weekly keeps the first five flights; bi-weekly keeps the first, middle and
// last of those five.
PlotSeries select_flights(const PlotSeries& series, Schedule schedule);

// Extracts and resizes every boundary from every orthomosaic of its environment.
std::vector<PlotSnip> extract_snips(const std::vector<Orthomosaic>& orthos,
                                    const std::vector<PlotBoundary>& boundaries);

// ---- dataset directories ---------------------------------------------------

inline constexpr const char* kBoundaryFile = "boundaries.json";
inline constexpr const char* kGroundTruthFile = "ground_truth.csv";

struct FieldData {
  std::vector<Orthomosaic> orthomosaics;
  std::vector<PlotBoundary> boundaries;
  std::vector<GroundTruth> ground_truth;
};

// Reads <env>_<day>.png orthomosaics (for environments named in the boundary
// file), boundaries.json and ground_truth.csv from one directory.
FieldData read_field_directory(const std::filesystem::path& dir);

// ---- calendar --------------------------------------------------------------

struct CalendarDate {
  int month = 9;  // 8..11
  int day = 1;
  friend bool operator==(CalendarDate, CalendarDate) = default;
};

// Days after Aug 31 for dates Aug 31 .. Nov 30.
int rm_day_encode(CalendarDate date);
CalendarDate rm_day_decode(int rm_day);
std::string format_date(CalendarDate date);  // e.g. "Oct 7"

}  // namespace soymat
