#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "soymat/augment.hpp"
#include "soymat/baseline_loess.hpp"
#include "soymat/neural/grad_check.hpp"
#include "soymat/report.hpp"
#include "soymat/synthetic_field.hpp"
#include "soymat/train_eval.hpp"

// Library side of the soymat command-line tool. Each command writes its
// outputs plus a RunManifest into the output directory.
namespace soymat {

using LogFn = std::function<void(const std::string&)>;

// ---- synth -----------------------------------------------------------------

struct SynthOptions {
  std::filesystem::path out_dir;
  std::vector<SynthConfig> environments;
};

// Parses a config file holding one SynthConfig object or an array of them.
std::vector<SynthConfig> read_synth_configs(const std::filesystem::path& path);

RunManifest synth_command(const SynthOptions& opts, const LogFn& log = {});

// ---- run -------------------------------------------------------------------

enum class Method { Cnn, Loess, Both };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct RunOptions {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::vector<Schedule> schedules = {Schedule::Weekly};
  Method method = Method::Both;
  double threshold = kDefaultGliThreshold;
  bool grid = false;
  LowessOptions lowess;
  double test_fraction = 0.15;
  double val_fraction = 0.10;
  std::map<std::string, int> test_counts;
  int epochs = 300;
  int max_updates = 0;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double decay = 0.1;
  double huber_delta = 1.0;
  int filters = 32;
  int lstm_units = 256;
  int precision = 32;
  bool deterministic = false;
  // Augmentation of training snips; a zero fraction disables it.
  double augment_fraction = 0.0;
  double brightness_delta = -100.0;
  double contrast_factor = 1.5;
  double blur_sigma = 1.5;
  int confidence_window = 2;
  double schedule_tolerance_pp = 5.0;
  std::uint64_t seed = 42;

  void validate() const;
  std::string to_json() const;
  static RunOptions from_json(const std::string& text);
};

struct ScheduleOutcome {
  Schedule schedule = Schedule::Weekly;
  LossTrace trace;
  MetricsReport cnn;    // train and test rows
  MetricsReport loess;  // test partition
  std::optional<ThresholdGrid> grid;
  std::optional<DecisionReport> decisions;
  std::size_t augmented_images = 0;
};

struct RunSummary {
  Split split;
  std::vector<ScheduleOutcome> outcomes;
  MetricsReport metrics;  // every row written to metrics.csv
  RunManifest manifest;
};

RunSummary run_command(const RunOptions& opts, const LogFn& log = {});

// ---- baseline --------------------------------------------------------------

struct BaselineOptions {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  Schedule schedule = Schedule::Weekly;
  double threshold = kDefaultGliThreshold;
  bool grid = false;
  LowessOptions lowess;

  std::string to_json() const;
  static BaselineOptions from_json(const std::string& text);
};

struct BaselineSummary {
  MetricsReport metrics;
  std::optional<ThresholdGrid> grid;
  RunManifest manifest;
};

// LOESS on every plot of the dataset, no split.
BaselineSummary baseline_command(const BaselineOptions& opts, const LogFn& log = {});

// ---- gradcheck -------------------------------------------------------------

struct GradCheckCommandOptions {
  nn::ReducedCheckSetup setup;
  nn::GradCheckOptions check;
  double tolerance = 1e-4;
  std::optional<std::filesystem::path> out_dir;
};

std::string grad_check_summary(const nn::GradCheckReport& report, double tolerance);
nn::GradCheckReport gradcheck_command(const GradCheckCommandOptions& opts, const LogFn& log = {});

// ---- rerun -----------------------------------------------------------------

struct RerunResult {
  std::vector<std::string> matched;
  std::vector<std::string> mismatched;  // includes files missing after the rerun
  bool identical() const { return mismatched.empty(); }
};

// Repeats the command recorded in a manifest (into out_dir when given, else
// into the manifest's own directory) and compares output hashes.
RerunResult rerun_command(const std::filesystem::path& manifest_path,
                          const std::optional<std::filesystem::path>& out_dir, const LogFn& log = {});

// ---- dataset helpers -------------------------------------------------------

// Reads a dataset directory into per-plot series sorted by (environment, plot).
std::vector<PlotSeries> load_series(const std::filesystem::path& data_dir);

// Schedule selection over a whole dataset.
std::vector<PlotSeries> select_schedule(const std::vector<PlotSeries>& series, Schedule schedule);

}  // namespace soymat
