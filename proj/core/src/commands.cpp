#include "soymat/commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "soymat/error.hpp"
#include "soymat/neural/serialize.hpp"

namespace soymat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void emit(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

// ---- dataset helpers -------------------------------------------------------

std::vector<PlotSeries> load_series(const fs::path& data_dir) {
  FieldData data = read_field_directory(data_dir);
  std::vector<PlotSnip> snips = extract_snips(data.orthomosaics, data.boundaries);
  data.orthomosaics.clear();
  return assemble_series(std::move(snips), data.ground_truth);
}

std::vector<PlotSeries> select_schedule(const std::vector<PlotSeries>& series, Schedule schedule) {
  std::vector<PlotSeries> out;
  out.reserve(series.size());
  for (const PlotSeries& s : series) out.push_back(select_flights(s, schedule));
  return out;
}

// ---- synth -----------------------------------------------------------------

std::vector<SynthConfig> read_synth_configs(const fs::path& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  std::vector<SynthConfig> out;
  if (doc.is_array()) {
    for (const json& item : doc) out.push_back(synth_config_from_json(item.dump()));
  } else {
    out.push_back(synth_config_from_json(doc.dump()));
  }
  if (out.empty()) throw ConfigError("config '" + path.string() + "' holds no environments");
  return out;
}

RunManifest synth_command(const SynthOptions& opts, const LogFn& log) {
  if (opts.environments.empty()) throw ConfigError("no environments to generate");
  for (const SynthConfig& c : opts.environments) c.validate();
  ensure_dir(opts.out_dir);

  RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = opts.environments.front().seed;
  json cfg = json::array();
  for (const SynthConfig& c : opts.environments) cfg.push_back(json::parse(synth_config_to_json(c)));
  manifest.config_json = json{{"environments", cfg}, {"out_dir", opts.out_dir.string()}}.dump();

  std::vector<std::string> files;
  for (const SynthConfig& c : opts.environments) {
    emit(log, "generating " + c.environment_id + " (" + std::to_string(c.n_plots) + " plots, " +
                  std::to_string(c.flight_days.size()) + " flights)");
    const Environment env = generate_environment(c);
    write_environment(opts.out_dir, env);
    for (const Orthomosaic& o : env.orthomosaics)
      files.push_back(o.environment_id + "_" + std::to_string(o.flight_day) + ".png");
  }
  files.push_back(kBoundaryFile);
  files.push_back(kGroundTruthFile);
  finish_manifest(manifest, opts.out_dir, files);
  return manifest;
}

// ---- run -------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::Cnn:
      return "cnn";
    case Method::Loess:
      return "loess";
    case Method::Both:
      return "both";
  }
  return "both";
}

Method method_from_string(const std::string& s) {
  if (s == "cnn") return Method::Cnn;
  if (s == "loess") return Method::Loess;
  if (s == "both") return Method::Both;
  throw ConfigError("unknown method '" + s + "' (expected cnn, loess or both)");
}

void RunOptions::validate() const {
  if (schedules.empty()) throw ConfigError("at least one schedule is required");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(decay >= 0.0)) throw ConfigError("decay must be >= 0");
  if (filters < 1 || lstm_units < 1) throw ConfigError("filters and LSTM units must be positive");
  if (!(threshold > -1.0 && threshold < 1.0)) throw ConfigError("GLI threshold must lie in (-1, 1)");
  AugmentPlan{augment_fraction, brightness_delta, contrast_factor, blur_sigma, 0}.validate();
}

std::string RunOptions::to_json() const {
  json sched = json::array();
  for (Schedule s : schedules) sched.push_back(to_string(s));
  const json j = {
      {"data_dir", data_dir.string()},
      {"out_dir", out_dir.string()},
      {"schedules", sched},
      {"method", to_string(method)},
      {"threshold", threshold},
      {"grid", grid},
      {"lowess_frac", lowess.frac},
      {"lowess_robust_iters", lowess.robust_iters},
      {"test_fraction", test_fraction},
      {"val_fraction", val_fraction},
      {"test_counts", test_counts},
      {"epochs", epochs},
      {"max_updates", max_updates},
      {"batch_size", batch_size},
      {"learning_rate", learning_rate},
      {"decay", decay},
      {"huber_delta", huber_delta},
      {"filters", filters},
      {"lstm_units", lstm_units},
      {"precision", precision},
      {"deterministic", deterministic},
      {"augment_fraction", augment_fraction},
      {"brightness_delta", brightness_delta},
      {"contrast_factor", contrast_factor},
      {"blur_sigma", blur_sigma},
      {"confidence_window", confidence_window},
      {"schedule_tolerance_pp", schedule_tolerance_pp},
      {"seed", seed},
  };
  return j.dump(2) + "\n";
}

RunOptions RunOptions::from_json(const std::string& text) {
  RunOptions o;
  try {
    const json j = json::parse(text);
    o.data_dir = j.at("data_dir").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    o.schedules.clear();
    for (const json& s : j.at("schedules")) o.schedules.push_back(schedule_from_string(s.get<std::string>()));
    o.method = method_from_string(j.at("method").get<std::string>());
    o.threshold = j.at("threshold").get<double>();
    o.grid = j.at("grid").get<bool>();
    o.lowess.frac = j.at("lowess_frac").get<double>();
    o.lowess.robust_iters = j.at("lowess_robust_iters").get<int>();
    o.test_fraction = j.at("test_fraction").get<double>();
    o.val_fraction = j.at("val_fraction").get<double>();
    o.test_counts = j.at("test_counts").get<std::map<std::string, int>>();
    o.epochs = j.at("epochs").get<int>();
    o.max_updates = j.at("max_updates").get<int>();
    o.batch_size = j.at("batch_size").get<int>();
    o.learning_rate = j.at("learning_rate").get<double>();
    o.decay = j.at("decay").get<double>();
    o.huber_delta = j.at("huber_delta").get<double>();
    o.filters = j.at("filters").get<int>();
    o.lstm_units = j.at("lstm_units").get<int>();
    o.precision = j.at("precision").get<int>();
    o.deterministic = j.at("deterministic").get<bool>();
    o.augment_fraction = j.at("augment_fraction").get<double>();
    o.brightness_delta = j.at("brightness_delta").get<double>();
    o.contrast_factor = j.at("contrast_factor").get<double>();
    o.blur_sigma = j.at("blur_sigma").get<double>();
    o.confidence_window = j.at("confidence_window").get<int>();
    o.schedule_tolerance_pp = j.at("schedule_tolerance_pp").get<double>();
    o.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run options: ") + e.what());
  }
  return o;
}

namespace {

struct CnnOutcome {
  LossTrace trace;
  std::vector<double> train_pred;
  std::vector<double> test_pred;
  nn::Network<float> weights;
};

template <typename T>
CnnOutcome train_and_predict(const nn::NetworkConfig& config, const std::vector<PlotSeries>& train_fit,
                             const std::vector<PlotSeries>& val, const std::vector<PlotSeries>& train_eval,
                             const std::vector<PlotSeries>& test, const TrainConfig& tc) {
  TrainResult<T> r = train<T>(config, train_fit, val, tc);
  CnnOutcome out{std::move(r.trace), predict_all(r.network, train_eval), predict_all(r.network, test),
                 nn::Network<float>(config)};
  if constexpr (std::is_same_v<T, float>)
    out.weights = std::move(r.network);
  else
    out.weights = r.network.template cast<float>();
  return out;
}

void write_scatters(const fs::path& dir, const std::string& prefix, const std::vector<PlotSeries>& series,
                    const std::vector<double>& pred, const std::string& title, std::vector<std::string>& files) {
  std::map<std::string, std::vector<ScatterPoint>> by_env;
  for (std::size_t i = 0; i < series.size(); ++i)
    by_env[series[i].environment_id].push_back({static_cast<double>(series[i].rm_day.value_or(0)), pred[i]});
  for (const auto& [env, points] : by_env) {
    const std::string name = prefix + "_" + env + ".svg";
    write_text_file(dir / name, scatter_svg(points, title + " " + env));
    files.push_back(name);
  }
}

}  // namespace

RunSummary run_command(const RunOptions& opts, const LogFn& log) {
  opts.validate();
  if (opts.deterministic) Eigen::setNbThreads(1);
  ensure_dir(opts.out_dir);

  emit(log, "loading " + opts.data_dir.string());
  const std::vector<PlotSeries> all = load_series(opts.data_dir);
  if (all.empty()) throw DataError("dataset holds no plots");

  RunSummary summary;
  summary.split = split(all, {opts.test_fraction, opts.val_fraction, opts.test_counts, derive_seed(opts.seed, "split")});
  emit(log, "split: " + std::to_string(summary.split.train.size()) + " train, " +
                std::to_string(summary.split.val.size()) + " validation, " + std::to_string(summary.split.test.size()) +
                " test");

  const bool run_cnn = opts.method != Method::Loess;
  const bool run_loess = opts.method != Method::Cnn;
  std::vector<std::string> files;
  MetricsReport cnn_all, loess_all, loess_compare;
  std::map<Schedule, DecisionReport> decisions;

  for (Schedule schedule : opts.schedules) {
    const std::string name = to_string(schedule);
    const std::vector<PlotSeries> series = select_schedule(all, schedule);
    const std::vector<PlotSeries> train_set = select_series(series, summary.split.train);
    const std::vector<PlotSeries> val_set = select_series(series, summary.split.val);
    const std::vector<PlotSeries> test_set = select_series(series, summary.split.test);
    ScheduleOutcome outcome;
    outcome.schedule = schedule;

    if (run_cnn) {
      std::vector<PlotSeries> fit_set = train_set;
      if (opts.augment_fraction > 0.0) {
        AugmentResult aug = augment_dataset(std::move(fit_set), {opts.augment_fraction, opts.brightness_delta,
                                                                 opts.contrast_factor, opts.blur_sigma,
                                                                 derive_seed(opts.seed, "augment")});
        fit_set = std::move(aug.series);
        outcome.augmented_images = aug.applied.size();
        emit(log, name + ": augmented " + std::to_string(aug.applied.size()) + " training images");
      }
      TrainConfig tc;
      tc.epochs = opts.epochs;
      tc.max_updates = opts.max_updates;
      tc.batch_size = opts.batch_size;
      tc.huber_delta = opts.huber_delta;
      tc.adam.learning_rate = opts.learning_rate;
      tc.adam.decay = opts.decay;
      tc.seed = derive_seed(opts.seed, "train");
      tc.on_epoch = [&](const EpochRecord& e) {
        emit(log, name + " epoch " + std::to_string(e.epoch) + ": train " + fmt("%.4f", e.train_loss) + ", val " +
                      fmt("%.4f", e.val_loss));
      };
      const nn::NetworkConfig config = nn::NetworkConfig::cnn_lstm(schedule_length(schedule), kSnipLength, kSnipWidth,
                                                                   3, opts.filters, opts.lstm_units);
      CnnOutcome cnn = opts.precision == 64
                           ? train_and_predict<double>(config, fit_set, val_set, train_set, test_set, tc)
                           : train_and_predict<float>(config, fit_set, val_set, train_set, test_set, tc);
      outcome.trace = cnn.trace;
      outcome.cnn = evaluate_predictions(train_set, cnn.train_pred, name, "cnn-lstm", "train");
      outcome.cnn.append(evaluate_predictions(test_set, cnn.test_pred, name, "cnn-lstm", "test"));
      outcome.decisions = decision_report(test_set, cnn.test_pred, opts.confidence_window);
      decisions.emplace(schedule, *outcome.decisions);

      write_text_file(opts.out_dir / ("loss_" + name + ".csv"), outcome.trace.to_csv());
      files.push_back("loss_" + name + ".csv");
      write_text_file(opts.out_dir / ("decisions_" + name + ".csv"), outcome.decisions->to_csv());
      files.push_back("decisions_" + name + ".csv");
      write_scatters(opts.out_dir, "scatter_cnn_" + name, test_set, cnn.test_pred, "CNN-LSTM test (" + name + ")",
                     files);
      const std::string weights_dir = "weights_" + name;
      nn::save_weights(opts.out_dir / weights_dir, cnn.weights);
      for (const fs::directory_entry& e : fs::directory_iterator(opts.out_dir / weights_dir))
        files.push_back(weights_dir + "/" + e.path().filename().string());
      cnn_all.append(outcome.cnn);
    }

    if (run_loess) {
      std::vector<double> pred;
      for (const PlotSeries& s : test_set) pred.push_back(predict_maturity_loess(s, opts.threshold, opts.lowess).rm_day);
      outcome.loess = evaluate_predictions(test_set, pred, name, "loess", "test");
      write_scatters(opts.out_dir, "scatter_loess_" + name, test_set, pred, "LOESS test (" + name + ")", files);
      loess_all.append(outcome.loess);
      if (opts.grid) {
        outcome.grid = threshold_grid_search(test_set, default_thresholds(), opts.lowess);
        write_text_file(opts.out_dir / ("grid_" + name + ".csv"), grid_to_csv(*outcome.grid));
        files.push_back("grid_" + name + ".csv");
        loess_compare.append(grid_best_report(*outcome.grid, name, "test"));
      } else {
        loess_compare.append(outcome.loess);
      }
    }
    summary.outcomes.push_back(std::move(outcome));
  }

  summary.metrics.append(cnn_all);
  summary.metrics.append(loess_all);
  write_text_file(opts.out_dir / "metrics.csv", summary.metrics.to_csv());
  write_text_file(opts.out_dir / "metrics.json", summary.metrics.to_json());
  files.push_back("metrics.csv");
  files.push_back("metrics.json");

  if (run_cnn && run_loess) {
    write_text_file(opts.out_dir / "comparison.csv", compare(cnn_all, loess_compare).to_csv());
    files.push_back("comparison.csv");
  }
  if (decisions.count(Schedule::Weekly) && decisions.count(Schedule::Biweekly)) {
    const auto recs =
        recommend_schedule(decisions.at(Schedule::Weekly), decisions.at(Schedule::Biweekly), opts.schedule_tolerance_pp);
    write_text_file(opts.out_dir / "schedule_recommendation.csv", recommendations_to_csv(recs));
    files.push_back("schedule_recommendation.csv");
  }

  summary.manifest.command = "run";
  summary.manifest.seed = opts.seed;
  summary.manifest.config_json = opts.to_json();
  summary.manifest.inputs = {opts.data_dir.string()};
  finish_manifest(summary.manifest, opts.out_dir, files);
  return summary;
}

// ---- baseline --------------------------------------------------------------

std::string BaselineOptions::to_json() const {
  const json j = {{"data_dir", data_dir.string()},      {"out_dir", out_dir.string()},
                  {"schedule", soymat::to_string(schedule)}, {"threshold", threshold},
                  {"grid", grid},                       {"lowess_frac", lowess.frac},
                  {"lowess_robust_iters", lowess.robust_iters}};
  return j.dump(2) + "\n";
}

BaselineOptions BaselineOptions::from_json(const std::string& text) {
  BaselineOptions o;
  try {
    const json j = json::parse(text);
    o.data_dir = j.at("data_dir").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    o.schedule = schedule_from_string(j.at("schedule").get<std::string>());
    o.threshold = j.at("threshold").get<double>();
    o.grid = j.at("grid").get<bool>();
    o.lowess.frac = j.at("lowess_frac").get<double>();
    o.lowess.robust_iters = j.at("lowess_robust_iters").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid baseline options: ") + e.what());
  }
  return o;
}

BaselineSummary baseline_command(const BaselineOptions& opts, const LogFn& log) {
  ensure_dir(opts.out_dir);
  emit(log, "loading " + opts.data_dir.string());
  const std::vector<PlotSeries> series = select_schedule(load_series(opts.data_dir), opts.schedule);
  const std::string name = to_string(opts.schedule);

  BaselineSummary summary;
  std::vector<std::string> files;
  std::vector<double> pred;
  for (const PlotSeries& s : series) pred.push_back(predict_maturity_loess(s, opts.threshold, opts.lowess).rm_day);
  summary.metrics = evaluate_predictions(series, pred, name, "loess", "all");
  write_text_file(opts.out_dir / "metrics.csv", summary.metrics.to_csv());
  files.push_back("metrics.csv");
  write_text_file(opts.out_dir / ("decisions_" + name + ".csv"), decision_report(series, pred).to_csv());
  files.push_back("decisions_" + name + ".csv");
  write_scatters(opts.out_dir, "scatter_loess_" + name, series, pred, "LOESS (" + name + ")", files);
  if (opts.grid) {
    summary.grid = threshold_grid_search(series, default_thresholds(), opts.lowess);
    write_text_file(opts.out_dir / ("grid_" + name + ".csv"), grid_to_csv(*summary.grid));
    files.push_back("grid_" + name + ".csv");
  }
  summary.manifest.command = "baseline";
  summary.manifest.config_json = opts.to_json();
  summary.manifest.inputs = {opts.data_dir.string()};
  finish_manifest(summary.manifest, opts.out_dir, files);
  return summary;
}

// ---- gradcheck -------------------------------------------------------------

std::string grad_check_summary(const nn::GradCheckReport& report, double tolerance) {
  std::ostringstream os;
  os << (report.passed(tolerance) ? "PASS" : "FAIL") << " gradient check: max relative error "
     << fmt("%.3e", report.max_rel_error) << " (tolerance " << fmt("%.0e", tolerance) << "), " << report.checked
     << " parameters checked, " << report.skipped_kinks << " skipped at kinks\n";
  for (const auto& [layer, err] : report.per_layer()) os << "  " << layer << ": " << fmt("%.3e", err) << '\n';
  return os.str();
}

nn::GradCheckReport gradcheck_command(const GradCheckCommandOptions& opts, const LogFn& log) {
  emit(log, "checking gradients on the reduced network");
  const nn::GradCheckReport report = nn::run_reduced_grad_check(opts.setup, opts.check);
  if (opts.out_dir) {
    ensure_dir(*opts.out_dir);
    write_text_file(*opts.out_dir / "gradcheck.txt", grad_check_summary(report, opts.tolerance));
    RunManifest m;
    m.command = "gradcheck";
    m.seed = opts.setup.seed;
    m.config_json = json{{"epsilon", opts.check.epsilon},
                         {"fault_scale", opts.check.fault_scale},
                         {"tolerance", opts.tolerance},
                         {"seed", opts.setup.seed},
                         {"out_dir", opts.out_dir->string()}}
                        .dump();
    finish_manifest(m, *opts.out_dir, {"gradcheck.txt"});
  }
  return report;
}

// ---- rerun -----------------------------------------------------------------

RerunResult rerun_command(const fs::path& manifest_path, const std::optional<fs::path>& out_dir, const LogFn& log) {
  const RunManifest recorded = RunManifest::from_json(read_text_file(manifest_path));
  const fs::path target = out_dir ? *out_dir : manifest_path.parent_path();
  emit(log, "repeating '" + recorded.command + "' into " + target.string());

  if (recorded.command == "run") {
    RunOptions o = RunOptions::from_json(recorded.config_json);
    o.out_dir = target;
    run_command(o, log);
  } else if (recorded.command == "baseline") {
    BaselineOptions o = BaselineOptions::from_json(recorded.config_json);
    o.out_dir = target;
    baseline_command(o, log);
  } else if (recorded.command == "synth") {
    SynthOptions o;
    o.out_dir = target;
    try {
      const json cfg = json::parse(recorded.config_json);
      for (const json& c : cfg.at("environments"))
        o.environments.push_back(synth_config_from_json(c.dump()));
    } catch (const json::exception& e) {
      throw DataError(std::string("invalid synth manifest: ") + e.what());
    }
    synth_command(o, log);
  } else if (recorded.command == "gradcheck") {
    GradCheckCommandOptions o;
    try {
      const json j = json::parse(recorded.config_json);
      o.check.epsilon = j.at("epsilon").get<double>();
      o.check.fault_scale = j.at("fault_scale").get<double>();
      o.tolerance = j.at("tolerance").get<double>();
      o.setup.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw DataError(std::string("invalid gradcheck manifest: ") + e.what());
    }
    o.out_dir = target;
    gradcheck_command(o, log);
  } else {
    throw DataError("manifest names unknown command '" + recorded.command + "'");
  }

  RerunResult result;
  for (const auto& [file, hash] : recorded.outputs) {
    const fs::path p = target / file;
    if (fs::exists(p) && hash_file(p) == hash)
      result.matched.push_back(file);
    else
      result.mismatched.push_back(file);
  }
  return result;
}

}  // namespace soymat
