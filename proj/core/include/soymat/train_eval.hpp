#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "soymat/baseline_loess.hpp"
#include "soymat/ingest.hpp"
#include "soymat/metrics.hpp"
#include "soymat/neural/config.hpp"
#include "soymat/neural/network.hpp"
#include "soymat/neural/optim.hpp"

namespace soymat {

// ---- splitting -------------------------------------------------------------

struct PlotKey {
  std::string environment_id;
  std::string plot_id;
  friend auto operator<=>(const PlotKey&, const PlotKey&) = default;
};

struct SplitConfig {
  double test_fraction = 0.15;
  double val_fraction = 0.10;  // of the remaining input plots
  // Exact per-environment test sizes; environments not listed use test_fraction.
  std::map<std::string, int> test_counts;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<PlotKey> train;
  std::vector<PlotKey> val;
  std::vector<PlotKey> test;
};

// Per-environment random partition. Throws DataError for an environment with
// fewer than 10 plots or a plot without ground truth.
Split split(const std::vector<PlotSeries>& series, const SplitConfig& cfg);

// Series whose keys appear in `keys`, in the order of `keys`.
std::vector<PlotSeries> select_series(const std::vector<PlotSeries>& series, const std::vector<PlotKey>& keys);

// ---- training --------------------------------------------------------------

// (T, kSnipLength, kSnipWidth, 3) tensor: the long image axis maps to the
// second dimension, levels are scaled to [0, 1].
template <typename T>
nn::Tensor<T> series_tensor(const PlotSeries& series);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double learning_rate = 0.0;  // at the end of the epoch
};

struct LossTrace {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;  // epoch,train_loss,val_loss
};

struct TrainConfig {
  int epochs = 300;
  // Stop after this many mini-batch updates when positive (counting
  // iterations as batches instead of epochs).
  int max_updates = 0;
  int batch_size = 64;
  double huber_delta = 1.0;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  // Centre and scale the network output on the training targets.
  bool scale_output = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

template <typename T>
struct TrainResult {
  nn::Network<T> network;
  LossTrace trace;
};

// Mini-batch Adam on the Huber loss with a seeded shuffle per epoch. The
// training loss of an epoch is the mean per-sample loss seen during it.
// Throws NumericError naming the epoch when the loss stops being finite.
template <typename T>
TrainResult<T> train(const nn::NetworkConfig& config, const std::vector<PlotSeries>& train_data,
                     const std::vector<PlotSeries>& val_data, const TrainConfig& cfg);

template <typename T>
std::vector<double> predict_all(nn::Network<T>& network, const std::vector<PlotSeries>& series);

// ---- reporting -------------------------------------------------------------

struct ReportRow {
  std::string environment_id;  // "ALL" for the pooled row
  std::string schedule;
  std::string method;     // "cnn-lstm" or "loess"
  std::string partition;  // "train", "test" or "all"
  RegressionMetrics metrics;
};

struct MetricsReport {
  std::vector<ReportRow> rows;

  void append(const MetricsReport& other);
  std::string to_csv() const;
  std::string to_json() const;
};

// One row per environment (ascending) plus a pooled "ALL" row. Series need
// ground truth; predictions align with series.
MetricsReport evaluate_predictions(const std::vector<PlotSeries>& series, const std::vector<double>& predictions,
                                   const std::string& schedule, const std::string& method,
                                   const std::string& partition);

template <typename T>
MetricsReport evaluate(nn::Network<T>& network, const std::vector<PlotSeries>& series, const std::string& schedule,
                       const std::string& partition);

// LOESS rows built from a threshold grid, taking each metric from its own best
// threshold (r2 from the best-r2 cell, MAE from the best-MAE cell, ...).
MetricsReport grid_best_report(const ThresholdGrid& grid, const std::string& schedule, const std::string& partition);

// Side-by-side table: one row per (environment, metric), columns per schedule
// for CNN-LSTM train, CNN-LSTM test and LOESS.
struct ComparisonRow {
  std::string environment_id;
  std::string metric;  // r2, MAE, MSE
  std::vector<std::optional<double>> values;  // aligned with ComparisonTable::columns
};

struct ComparisonTable {
  std::vector<std::string> columns;  // e.g. weekly/cnn-lstm/train
  std::vector<ComparisonRow> rows;
  std::string to_csv() const;
};

// Throws DataError when the CNN and LOESS reports do not cover the same
// environments and schedules or a CNN train/test partition is missing. The
// pooled ALL row is optional on either side.
ComparisonTable compare(const MetricsReport& cnn, const MetricsReport& loess);

// ---- decisions -------------------------------------------------------------

struct PlotDecision {
  PlotKey key;
  double predicted = 0.0;
  int predicted_day = 0;  // rounded and limited to the season
  CalendarDate date;
  std::optional<int> truth;
  std::optional<bool> confident;  // |predicted_day - truth| <= window
};

struct EnvironmentDecision {
  std::string environment_id;
  std::size_t n_plots = 0;
  std::size_t n_with_truth = 0;
  std::optional<double> within_window;  // fraction of plots with truth
};

struct DecisionReport {
  int window = 2;
  std::vector<PlotDecision> plots;
  std::vector<EnvironmentDecision> environments;
  std::string to_csv() const;
};

DecisionReport decision_report(const std::vector<PlotSeries>& series, const std::vector<double>& predictions,
                               int window = 2);

struct ScheduleRecommendation {
  std::string environment_id;
  double weekly_within = 0.0;
  double biweekly_within = 0.0;
  bool biweekly_sufficient = false;
};

// Bi-weekly suffices where its within-window fraction is at least the weekly
// fraction minus `tolerance_pp` percentage points.
std::vector<ScheduleRecommendation> recommend_schedule(const DecisionReport& weekly, const DecisionReport& biweekly,
                                                       double tolerance_pp = 5.0);
std::string recommendations_to_csv(const std::vector<ScheduleRecommendation>& recs);

}  // namespace soymat
