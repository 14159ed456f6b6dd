// soymat: synthetic field generation, maturity prediction runs, LOESS
// baselines, gradient checks and manifest reruns.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "soymat/commands.hpp"
#include "soymat/error.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw soymat::ConfigError("'" + text + "' is not a comma-separated list of integers");
    }
  }
  return out;
}

std::vector<soymat::Schedule> parse_schedules(const std::string& s) {
  if (s == "both") return {soymat::Schedule::Weekly, soymat::Schedule::Biweekly};
  return {soymat::schedule_from_string(s)};
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soybean relative-maturity estimation from drone image time series"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  // synth
  soymat::SynthConfig synth_cfg;
  std::string synth_out, synth_config_path, synth_preset, flight_days_text, maturity_text;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", synth_config_path, "JSON config (one object or an array)")->check(CLI::ExistingFile);
  synth->add_option("--preset", synth_preset, "Built-in multi-environment layout")->check(CLI::IsMember({"field-trial"}));
  synth->add_option("--seed", synth_seed, "Root seed");
  synth->add_option("--env", synth_cfg.environment_id, "Environment id");
  synth->add_option("--plots", synth_cfg.n_plots, "Number of plots");
  synth->add_option("--rows", synth_cfg.plot_rows, "Grid rows");
  synth->add_option("--cols", synth_cfg.plot_cols, "Grid columns");
  synth->add_option("--plot-width", synth_cfg.plot_px_w, "Plot length in pixels");
  synth->add_option("--plot-height", synth_cfg.plot_px_h, "Plot width in pixels");
  synth->add_option("--gutter", synth_cfg.gutter_px, "Soil gap in pixels");
  synth->add_option("--rotation", synth_cfg.rotation_deg, "Layout rotation in degrees");
  synth->add_option("--noise", synth_cfg.noise_sigma, "Pixel noise standard deviation (0-255 scale)");
  synth->add_option("--flight-days", flight_days_text, "Comma-separated days after Aug 31");
  synth->add_option("--maturity-range", maturity_text, "lo,hi maturity days");
  synth->add_option("--slope", synth_cfg.trajectory.slope_days, "Greenness decay slope in days");

  // run
  soymat::RunOptions run_opts;
  std::string run_schedule = "weekly", run_method = "both";
  auto* run = app.add_subcommand("run", "Split, train the CNN-LSTM and/or run LOESS, write reports");
  run->add_option("--data", run_opts.data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--out", run_opts.out_dir, "Output directory")->required();
  run->add_option("--schedule", run_schedule, "weekly, biweekly or both")
      ->check(CLI::IsMember({"weekly", "biweekly", "both"}));
  run->add_option("--method", run_method, "cnn, loess or both")->check(CLI::IsMember({"cnn", "loess", "both"}));
  run->add_option("--threshold", run_opts.threshold, "LOESS GLI threshold");
  run->add_flag("--grid", run_opts.grid, "Also run the LOESS threshold grid search");
  run->add_option("--lowess-frac", run_opts.lowess.frac, "LOESS smoothing fraction");
  run->add_option("--lowess-iters", run_opts.lowess.robust_iters, "LOESS robustness iterations");
  run->add_option("--epochs", run_opts.epochs, "Training epochs");
  run->add_option("--max-updates", run_opts.max_updates, "Stop after this many mini-batch updates (0: no limit)");
  run->add_option("--batch-size", run_opts.batch_size, "Mini-batch size");
  run->add_option("--lr", run_opts.learning_rate, "Adam learning rate");
  run->add_option("--decay", run_opts.decay, "Learning-rate decay per update");
  run->add_option("--huber-delta", run_opts.huber_delta, "Huber loss delta");
  run->add_option("--filters", run_opts.filters, "Convolution filters");
  run->add_option("--lstm-units", run_opts.lstm_units, "LSTM units");
  run->add_option("--precision", run_opts.precision, "Working precision: 32 or 64")->check(CLI::IsMember({32, 64}));
  run->add_flag("--deterministic", run_opts.deterministic, "Single-threaded, bit-reproducible numerics");
  run->add_option("--test-fraction", run_opts.test_fraction, "Per-environment test fraction");
  run->add_option("--val-fraction", run_opts.val_fraction, "Validation fraction of the input plots");
  std::vector<std::string> test_count_items;
  run->add_option("--test-count", test_count_items, "Fixed test size for one environment, env=N (repeatable)");
  run->add_option("--augment-fraction", run_opts.augment_fraction, "Fraction of training images to perturb");
  run->add_option("--brightness", run_opts.brightness_delta, "Brightness offset for augmentation");
  run->add_option("--contrast", run_opts.contrast_factor, "Contrast factor for augmentation");
  run->add_option("--blur-sigma", run_opts.blur_sigma, "Gaussian blur sigma for augmentation");
  run->add_option("--window", run_opts.confidence_window, "Confidence window in days");
  run->add_option("--seed", run_opts.seed, "Root seed");

  // baseline
  soymat::BaselineOptions base_opts;
  std::string base_schedule = "weekly";
  std::optional<double> base_threshold;
  auto* baseline = app.add_subcommand("baseline", "LOESS threshold baseline on every plot");
  baseline->add_option("--data", base_opts.data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  baseline->add_option("--out", base_opts.out_dir, "Output directory")->required();
  baseline->add_option("--schedule", base_schedule, "weekly or biweekly")->check(CLI::IsMember({"weekly", "biweekly"}));
  auto* thr = baseline->add_option("--threshold", base_threshold, "GLI threshold");
  baseline->add_flag("--grid", base_opts.grid, "Threshold grid search 0.01..0.09")->excludes(thr);
  baseline->add_option("--lowess-frac", base_opts.lowess.frac, "LOESS smoothing fraction");
  baseline->add_option("--lowess-iters", base_opts.lowess.robust_iters, "LOESS robustness iterations");

  // gradcheck
  soymat::GradCheckCommandOptions gc_opts;
  bool inject_fault = false;
  std::string gc_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the hand-written gradients");
  gradcheck->add_flag("--inject-fault", inject_fault, "Scale analytic gradients by 2 to prove the check fails");
  gradcheck->add_option("--epsilon", gc_opts.check.epsilon, "Finite-difference step");
  gradcheck->add_option("--tolerance", gc_opts.tolerance, "Maximum accepted relative error");
  gradcheck->add_option("--seed", gc_opts.setup.seed, "Seed for weights and inputs");
  gradcheck->add_option("--out", gc_out, "Optional output directory for the report and manifest");

  // rerun
  std::string manifest_path, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "Repeat a command from its manifest and compare output hashes");
  rerun->add_option("--manifest", manifest_path, "manifest.json written by an earlier command")
      ->required()
      ->check(CLI::ExistingFile);
  rerun->add_option("--out", rerun_out, "Output directory (default: the manifest's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const soymat::LogFn log = quiet ? soymat::LogFn{} : soymat::LogFn{log_line};

  try {
    if (*synth) {
      soymat::SynthOptions opts;
      opts.out_dir = synth_out;
      if (!flight_days_text.empty()) synth_cfg.flight_days = parse_int_list(flight_days_text);
      if (!maturity_text.empty()) {
        const std::vector<int> range = parse_int_list(maturity_text);
        if (range.size() != 2) throw soymat::ConfigError("--maturity-range needs lo,hi");
        synth_cfg.maturity_lo = range[0];
        synth_cfg.maturity_hi = range[1];
      }
      if (!synth_config_path.empty()) {
        opts.environments = soymat::read_synth_configs(synth_config_path);
        if (synth_seed)
          for (auto& c : opts.environments) c.seed = soymat::derive_seed(*synth_seed, c.environment_id);
      } else if (synth_preset == "field-trial") {
        opts.environments = soymat::field_trial_preset(synth_seed.value_or(42));
      } else {
        if (synth_seed) synth_cfg.seed = *synth_seed;
        opts.environments = {synth_cfg};
      }
      const soymat::RunManifest m = soymat::synth_command(opts, log);
      std::cout << "wrote " << m.outputs.size() << " files to " << synth_out << '\n';
    } else if (*run) {
      run_opts.schedules = parse_schedules(run_schedule);
      run_opts.method = soymat::method_from_string(run_method);
      for (const std::string& item : test_count_items) {
        const auto eq = item.rfind('=');
        if (eq == std::string::npos || eq == 0) throw soymat::ConfigError("--test-count expects env=N, got '" + item + "'");
        const std::vector<int> n = parse_int_list(item.substr(eq + 1));
        if (n.size() != 1) throw soymat::ConfigError("--test-count expects env=N, got '" + item + "'");
        run_opts.test_counts[item.substr(0, eq)] = n[0];
      }
      const soymat::RunSummary s = soymat::run_command(run_opts, log);
      std::cout << s.metrics.to_csv();
    } else if (*baseline) {
      base_opts.schedule = soymat::schedule_from_string(base_schedule);
      if (base_threshold) base_opts.threshold = *base_threshold;
      const soymat::BaselineSummary s = soymat::baseline_command(base_opts, log);
      if (s.grid)
        std::cout << soymat::grid_to_csv(*s.grid);
      else
        std::cout << s.metrics.to_csv();
    } else if (*gradcheck) {
      if (inject_fault) gc_opts.check.fault_scale = 2.0;
      if (!gc_out.empty()) gc_opts.out_dir = gc_out;
      const soymat::nn::GradCheckReport r = soymat::gradcheck_command(gc_opts, log);
      std::cout << soymat::grad_check_summary(r, gc_opts.tolerance);
      return r.passed(gc_opts.tolerance) ? kExitOk : kExitCheck;
    } else if (*rerun) {
      std::optional<std::filesystem::path> out;
      if (!rerun_out.empty()) out = rerun_out;
      const soymat::RerunResult r = soymat::rerun_command(manifest_path, out, log);
      for (const std::string& f : r.mismatched) std::cout << "MISMATCH " << f << '\n';
      std::cout << (r.identical() ? "identical" : "differs") << ": " << r.matched.size() << " of "
                << r.matched.size() + r.mismatched.size() << " outputs reproduced\n";
      return r.identical() ? kExitOk : kExitCheck;
    }
  } catch (const soymat::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const soymat::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const soymat::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
