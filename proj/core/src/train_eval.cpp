#include "soymat/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "soymat/error.hpp"
#include "soymat/rng.hpp"

namespace soymat {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

template <class V>
void shuffle_in_place(std::vector<V>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

// ---- splitting -------------------------------------------------------------

Split split(const std::vector<PlotSeries>& series, const SplitConfig& cfg) {
  if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");

  std::map<std::string, std::vector<PlotKey>> by_env;
  for (const PlotSeries& s : series) {
    if (!s.rm_day) throw DataError("plot '" + s.plot_id + "' in '" + s.environment_id + "' has no ground truth");
    by_env[s.environment_id].push_back({s.environment_id, s.plot_id});
  }
  for (const auto& [env, count] : cfg.test_counts) {
    if (!by_env.count(env)) throw ConfigError("test count given for unknown environment '" + env + "'");
    (void)count;
  }

  Split out;
  for (auto& [env, keys] : by_env) {
    if (keys.size() < 10)
      throw DataError("environment '" + env + "' has " + std::to_string(keys.size()) + " plots; at least 10 are needed");
    std::sort(keys.begin(), keys.end());
    Rng rng = make_rng(derive_seed(cfg.seed, "split:" + env));
    shuffle_in_place(keys, rng);

    const std::size_t n = keys.size();
    std::size_t n_test = static_cast<std::size_t>(std::lround(cfg.test_fraction * static_cast<double>(n)));
    if (auto it = cfg.test_counts.find(env); it != cfg.test_counts.end()) {
      if (it->second < 0 || static_cast<std::size_t>(it->second) >= n)
        throw ConfigError("test count for '" + env + "' must lie in [0, " + std::to_string(n) + ")");
      n_test = static_cast<std::size_t>(it->second);
    }
    const std::size_t n_input = n - n_test;
    const std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(n_input)));

    std::vector<PlotKey> test(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<PlotKey> val(keys.begin() + static_cast<std::ptrdiff_t>(n_test),
                             keys.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    std::vector<PlotKey> train(keys.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), keys.end());
    for (auto* part : {&test, &val, &train}) std::sort(part->begin(), part->end());
    out.test.insert(out.test.end(), test.begin(), test.end());
    out.val.insert(out.val.end(), val.begin(), val.end());
    out.train.insert(out.train.end(), train.begin(), train.end());
  }
  return out;
}

std::vector<PlotSeries> select_series(const std::vector<PlotSeries>& series, const std::vector<PlotKey>& keys) {
  std::map<PlotKey, const PlotSeries*> index;
  for (const PlotSeries& s : series) index[{s.environment_id, s.plot_id}] = &s;
  std::vector<PlotSeries> out;
  out.reserve(keys.size());
  for (const PlotKey& k : keys) {
    auto it = index.find(k);
    if (it == index.end()) throw DataError("plot '" + k.plot_id + "' in '" + k.environment_id + "' not found");
    out.push_back(*it->second);
  }
  return out;
}

// ---- training --------------------------------------------------------------

template <typename T>
nn::Tensor<T> series_tensor(const PlotSeries& series) {
  const int steps = static_cast<int>(series.snips.size());
  nn::Tensor<T> t({steps, kSnipLength, kSnipWidth, 3});
  std::size_t i = 0;
  for (const PlotSnip& s : series.snips) {
    if (s.image.width() != kSnipLength || s.image.height() != kSnipWidth)
      throw DataError("snip of plot '" + series.plot_id + "' is " + std::to_string(s.image.width()) + "x" +
                      std::to_string(s.image.height()) + ", expected " + std::to_string(kSnipLength) + "x" +
                      std::to_string(kSnipWidth));
    for (int x = 0; x < kSnipLength; ++x)
      for (int y = 0; y < kSnipWidth; ++y)
        for (int c = 0; c < 3; ++c) t.data[i++] = static_cast<T>(s.image.at(x, y, c) / 255.0);
  }
  return t;
}

std::string LossTrace::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (const EpochRecord& e : epochs)
    os << e.epoch << ',' << fmt("%.10g", e.train_loss) << ',' << (std::isnan(e.val_loss) ? "NA" : fmt("%.10g", e.val_loss))
       << '\n';
  return os.str();
}

namespace {

template <typename T>
std::vector<nn::Tensor<T>> to_tensors(const std::vector<PlotSeries>& series, const nn::Shape& input) {
  std::vector<nn::Tensor<T>> out;
  out.reserve(series.size());
  for (const PlotSeries& s : series) {
    out.push_back(series_tensor<T>(s));
    if (out.back().shape != input)
      throw DataError("plot '" + s.plot_id + "' gives input " + nn::shape_string(out.back().shape) +
                      " but the network expects " + nn::shape_string(input));
  }
  return out;
}

std::vector<double> targets_of(const std::vector<PlotSeries>& series) {
  std::vector<double> y;
  for (const PlotSeries& s : series) {
    if (!s.rm_day) throw DataError("plot '" + s.plot_id + "' has no ground truth");
    y.push_back(static_cast<double>(*s.rm_day));
  }
  return y;
}

}  // namespace

template <typename T>
TrainResult<T> train(const nn::NetworkConfig& config, const std::vector<PlotSeries>& train_data,
                     const std::vector<PlotSeries>& val_data, const TrainConfig& cfg) {
  if (train_data.empty()) throw DataError("training set is empty");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(cfg.huber_delta > 0.0)) throw ConfigError("Huber delta must be positive");

  const std::vector<nn::Tensor<T>> xs = to_tensors<T>(train_data, config.input);
  const std::vector<double> ys = targets_of(train_data);
  const std::vector<nn::Tensor<T>> val_xs = to_tensors<T>(val_data, config.input);
  const std::vector<double> val_ys = targets_of(val_data);

  TrainResult<T> result{nn::Network<T>(config), {}};
  nn::Network<T>& net = result.network;
  net.init_xavier(derive_seed(cfg.seed, "init"));
  if (cfg.scale_output) {
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / static_cast<double>(ys.size()));
    net.output_scaling = {mean, sd > 0.0 ? sd : 1.0};
  }

  auto params = net.params();
  nn::Adam<T> adam(cfg.adam, params);
  std::vector<std::size_t> order(xs.size());
  std::vector<double> sample_loss(xs.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = make_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(order, rng);

    std::fill(sample_loss.begin(), sample_loss.end(), 0.0);
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_updates > 0 && adam.updates() >= cfg.max_updates) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      net.zero_grads();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        sample_loss[i] = net.accumulate_gradients(xs[i], ys[i], cfg.huber_delta, weight);
        if (!std::isfinite(sample_loss[i]))
          throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": non-finite loss");
        ++seen;
      }
      adam.step(params);
    }
    if (seen == 0) break;

    EpochRecord rec;
    rec.epoch = epoch;
    double total = 0.0;
    for (double l : sample_loss) total += l;
    rec.train_loss = total / static_cast<double>(seen);
    rec.val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val_xs.empty()) {
      double vl = 0.0;
      for (std::size_t i = 0; i < val_xs.size(); ++i) vl += nn::huber_loss(val_ys[i], net.predict(val_xs[i]), cfg.huber_delta).loss;
      rec.val_loss = vl / static_cast<double>(val_xs.size());
    }
    if (!std::isfinite(rec.train_loss) || (!val_xs.empty() && !std::isfinite(rec.val_loss)))
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": non-finite loss");
    rec.learning_rate = adam.current_learning_rate();
    result.trace.epochs.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
  }
  return result;
}

template <typename T>
std::vector<double> predict_all(nn::Network<T>& network, const std::vector<PlotSeries>& series) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const PlotSeries& s : series) {
    const nn::Tensor<T> x = series_tensor<T>(s);
    if (x.shape != network.config().input)
      throw DataError("plot '" + s.plot_id + "' gives input " + nn::shape_string(x.shape) + " but the network expects " +
                      nn::shape_string(network.config().input));
    out.push_back(network.predict(x));
  }
  return out;
}

// ---- reporting -------------------------------------------------------------

void MetricsReport::append(const MetricsReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "environment,schedule,method,partition,n,r2,mae,mse\n";
  for (const ReportRow& r : rows) {
    os << r.environment_id << ',' << r.schedule << ',' << r.method << ',' << r.partition << ',' << r.metrics.n << ','
       << (r.metrics.r2_defined ? fmt("%.6f", r.metrics.r2) : "NA") << ',' << fmt("%.6f", r.metrics.mae) << ','
       << fmt("%.6f", r.metrics.mse) << '\n';
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const ReportRow& r : rows) {
    nlohmann::json row = {{"environment", r.environment_id}, {"schedule", r.schedule},   {"method", r.method},
                          {"partition", r.partition},        {"n", r.metrics.n},         {"mae", r.metrics.mae},
                          {"mse", r.metrics.mse}};
    row["r2"] = r.metrics.r2_defined ? nlohmann::json(r.metrics.r2) : nlohmann::json(nullptr);
    doc.push_back(row);
  }
  return doc.dump(2) + "\n";
}

MetricsReport evaluate_predictions(const std::vector<PlotSeries>& series, const std::vector<double>& predictions,
                                   const std::string& schedule, const std::string& method,
                                   const std::string& partition) {
  if (series.size() != predictions.size()) throw ConfigError("predictions do not align with the series");
  if (series.empty()) throw DataError("nothing to evaluate");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_env;
  std::vector<double> all_pred, all_truth;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!series[i].rm_day) throw DataError("plot '" + series[i].plot_id + "' has no ground truth");
    auto& [p, t] = by_env[series[i].environment_id];
    p.push_back(predictions[i]);
    t.push_back(*series[i].rm_day);
    all_pred.push_back(predictions[i]);
    all_truth.push_back(*series[i].rm_day);
  }
  MetricsReport report;
  for (const auto& [env, pt] : by_env)
    report.rows.push_back({env, schedule, method, partition, regression_metrics(pt.first, pt.second)});
  report.rows.push_back({"ALL", schedule, method, partition, regression_metrics(all_pred, all_truth)});
  return report;
}

template <typename T>
MetricsReport evaluate(nn::Network<T>& network, const std::vector<PlotSeries>& series, const std::string& schedule,
                       const std::string& partition) {
  return evaluate_predictions(series, predict_all(network, series), schedule, "cnn-lstm", partition);
}

MetricsReport grid_best_report(const ThresholdGrid& grid, const std::string& schedule, const std::string& partition) {
  MetricsReport report;
  for (const EnvironmentGrid& eg : grid.environments) {
    RegressionMetrics m;
    m.n = eg.by_threshold[eg.best_mae].n;
    m.r2 = eg.by_threshold[eg.best_r2].r2;
    m.r2_defined = eg.by_threshold[eg.best_r2].r2_defined;
    m.mae = eg.by_threshold[eg.best_mae].mae;
    m.mse = eg.by_threshold[eg.best_mse].mse;
    report.rows.push_back({eg.environment_id, schedule, "loess", partition, m});
  }
  return report;
}

namespace {

int schedule_rank(const std::string& s) { return s == "weekly" ? 0 : s == "biweekly" ? 1 : 2; }

bool env_less(const std::string& a, const std::string& b) {
  if ((a == "ALL") != (b == "ALL")) return b == "ALL";
  return a < b;
}

}  // namespace

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "environment,metric";
  for (const std::string& c : columns) os << ',' << c;
  os << '\n';
  for (const ComparisonRow& r : rows) {
    os << r.environment_id << ',' << r.metric;
    for (const auto& v : r.values) os << ',' << (v ? fmt("%.3f", *v) : "NA");
    os << '\n';
  }
  return os.str();
}

ComparisonTable compare(const MetricsReport& cnn, const MetricsReport& loess) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;  // schedule, env, method, partition
  std::map<Key, const ReportRow*> index;
  std::set<std::string, decltype(&env_less)> envs(&env_less);
  std::vector<std::string> schedules;
  for (const ReportRow& r : cnn.rows) {
    if (r.method != "cnn-lstm") throw DataError("CNN report holds a row for method '" + r.method + "'");
    index[{r.schedule, r.environment_id, "cnn", r.partition}] = &r;
    envs.insert(r.environment_id);
    if (std::find(schedules.begin(), schedules.end(), r.schedule) == schedules.end()) schedules.push_back(r.schedule);
  }
  for (const ReportRow& r : loess.rows) {
    if (r.method != "loess") throw DataError("LOESS report holds a row for method '" + r.method + "'");
    index[{r.schedule, r.environment_id, "loess", ""}] = &r;
  }
  std::stable_sort(schedules.begin(), schedules.end(),
                   [](const std::string& a, const std::string& b) { return schedule_rank(a) < schedule_rank(b); });

  std::set<std::pair<std::string, std::string>> cnn_cells, loess_cells;
  for (const ReportRow& r : cnn.rows)
    if (r.environment_id != "ALL") cnn_cells.insert({r.schedule, r.environment_id});
  for (const ReportRow& r : loess.rows)
    if (r.environment_id != "ALL") loess_cells.insert({r.schedule, r.environment_id});
  if (cnn_cells != loess_cells)
    throw DataError("CNN-LSTM and LOESS reports cover different environments or schedules");

  ComparisonTable table;
  for (const std::string& s : schedules) {
    for (const std::string& env : envs) {
      if (env == "ALL" || !cnn_cells.count({s, env})) continue;
      for (const char* part : {"train", "test"})
        if (!index.count({s, env, "cnn", part}))
          throw DataError("CNN-LSTM report lacks the " + std::string(part) + " partition for " + env + " (" + s + ")");
    }
    table.columns.push_back(s + "/cnn-lstm/train");
    table.columns.push_back(s + "/cnn-lstm/test");
    table.columns.push_back(s + "/loess");
  }

  for (const std::string& env : envs) {
    for (const char* metric : {"r2", "MAE", "MSE"}) {
      ComparisonRow row{env, metric, {}};
      const auto value = [&](const ReportRow* r) -> std::optional<double> {
        if (!r) return std::nullopt;
        const std::string m = metric;
        if (m == "r2") return r->metrics.r2_defined ? std::optional<double>(r->metrics.r2) : std::nullopt;
        return m == "MAE" ? r->metrics.mae : r->metrics.mse;
      };
      const auto find = [&](const Key& k) -> const ReportRow* {
        auto it = index.find(k);
        return it == index.end() ? nullptr : it->second;
      };
      for (const std::string& s : schedules) {
        row.values.push_back(value(find({s, env, "cnn", "train"})));
        row.values.push_back(value(find({s, env, "cnn", "test"})));
        row.values.push_back(value(find({s, env, "loess", ""})));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// ---- decisions -------------------------------------------------------------

std::string DecisionReport::to_csv() const {
  std::ostringstream os;
  os << "environment,plot_id,predicted,predicted_day,date,rm_day,confident\n";
  for (const PlotDecision& p : plots) {
    os << p.key.environment_id << ',' << p.key.plot_id << ',' << fmt("%.3f", p.predicted) << ',' << p.predicted_day << ','
       << format_date(p.date) << ',' << (p.truth ? std::to_string(*p.truth) : "") << ','
       << (p.confident ? (*p.confident ? "yes" : "no") : "") << '\n';
  }
  return os.str();
}

DecisionReport decision_report(const std::vector<PlotSeries>& series, const std::vector<double>& predictions,
                               int window) {
  if (series.size() != predictions.size()) throw ConfigError("predictions do not align with the series");
  if (window < 0) throw ConfigError("confidence window must not be negative");
  DecisionReport report;
  report.window = window;
  std::map<std::string, std::pair<std::size_t, std::size_t>> hits;  // env -> (with truth, within)
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < series.size(); ++i) {
    PlotDecision d;
    d.key = {series[i].environment_id, series[i].plot_id};
    d.predicted = predictions[i];
    const double limited = std::isfinite(predictions[i]) ? std::clamp(predictions[i], 0.0, 91.0) : 0.0;
    d.predicted_day = static_cast<int>(std::lround(limited));
    d.date = rm_day_decode(d.predicted_day);
    d.truth = series[i].rm_day;
    ++counts[d.key.environment_id];
    if (d.truth) {
      d.confident = std::abs(d.predicted_day - *d.truth) <= window;
      auto& h = hits[d.key.environment_id];
      ++h.first;
      if (*d.confident) ++h.second;
    }
    report.plots.push_back(std::move(d));
  }
  for (const auto& [env, n] : counts) {
    EnvironmentDecision e;
    e.environment_id = env;
    e.n_plots = n;
    if (auto it = hits.find(env); it != hits.end()) {
      e.n_with_truth = it->second.first;
      e.within_window = static_cast<double>(it->second.second) / static_cast<double>(it->second.first);
    }
    report.environments.push_back(e);
  }
  return report;
}

std::vector<ScheduleRecommendation> recommend_schedule(const DecisionReport& weekly, const DecisionReport& biweekly,
                                                       double tolerance_pp) {
  std::map<std::string, double> bi;
  for (const EnvironmentDecision& e : biweekly.environments)
    if (e.within_window) bi[e.environment_id] = *e.within_window;
  std::vector<ScheduleRecommendation> out;
  for (const EnvironmentDecision& e : weekly.environments) {
    auto it = bi.find(e.environment_id);
    if (!e.within_window || it == bi.end()) continue;
    ScheduleRecommendation r;
    r.environment_id = e.environment_id;
    r.weekly_within = *e.within_window;
    r.biweekly_within = it->second;
    r.biweekly_sufficient = r.biweekly_within >= r.weekly_within - tolerance_pp / 100.0 - 1e-12;
    out.push_back(r);
  }
  return out;
}

std::string recommendations_to_csv(const std::vector<ScheduleRecommendation>& recs) {
  std::ostringstream os;
  os << "environment,weekly_within,biweekly_within,recommended_schedule\n";
  for (const ScheduleRecommendation& r : recs)
    os << r.environment_id << ',' << fmt("%.4f", r.weekly_within) << ',' << fmt("%.4f", r.biweekly_within) << ','
       << (r.biweekly_sufficient ? "biweekly" : "weekly") << '\n';
  return os.str();
}

template nn::Tensor<float> series_tensor<float>(const PlotSeries&);
template nn::Tensor<double> series_tensor<double>(const PlotSeries&);
template TrainResult<float> train<float>(const nn::NetworkConfig&, const std::vector<PlotSeries>&,
                                         const std::vector<PlotSeries>&, const TrainConfig&);
template TrainResult<double> train<double>(const nn::NetworkConfig&, const std::vector<PlotSeries>&,
                                           const std::vector<PlotSeries>&, const TrainConfig&);
template std::vector<double> predict_all<float>(nn::Network<float>&, const std::vector<PlotSeries>&);
template std::vector<double> predict_all<double>(nn::Network<double>&, const std::vector<PlotSeries>&);
template MetricsReport evaluate<float>(nn::Network<float>&, const std::vector<PlotSeries>&, const std::string&,
                                       const std::string&);
template MetricsReport evaluate<double>(nn::Network<double>&, const std::vector<PlotSeries>&, const std::string&,
                                        const std::string&);

}  // namespace soymat
