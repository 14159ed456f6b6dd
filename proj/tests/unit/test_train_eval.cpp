#include <doctest.h>

#include <cmath>
#include <set>

#include "soymat/error.hpp"
#include "soymat/rng.hpp"
#include "soymat/train_eval.hpp"

using namespace soymat;

namespace {

// Series without images; enough for splitting and reporting.
std::vector<PlotSeries> keys_only(const std::string& env, int n, int first_day = 10) {
  std::vector<PlotSeries> out;
  for (int i = 0; i < n; ++i) out.push_back({"p" + std::to_string(1000 + i), env, {}, first_day + i % 20});
  return out;
}

PlotSeries image_series(const std::string& plot, int rm_day, std::uint64_t seed) {
  PlotSeries s{plot, "e", {}, rm_day};
  Rng rng = make_rng(seed);
  for (int t = 0; t < 3; ++t) {
    Image img(kSnipLength, kSnipWidth);
    for (float& v : img.data()) v = static_cast<float>(uniform_int(rng, 0, 255));
    s.snips.push_back({plot, "e", 6 + 7 * t, std::move(img)});
  }
  return s;
}

nn::NetworkConfig tiny_net() { return nn::NetworkConfig::cnn_lstm(3, kSnipLength, kSnipWidth, 3, 4, 8); }

MetricsReport report_for(const std::vector<std::string>& envs, const std::string& method,
                         const std::vector<std::string>& partitions) {
  MetricsReport r;
  for (const auto& part : partitions)
    for (const auto& env : envs) r.rows.push_back({env, "weekly", method, part, {5, 1.0, 2.0, 0.9, true}});
  return r;
}

}  // namespace

TEST_SUITE("train_eval") {
  TEST_CASE("split sizes and disjointness") {
    auto series = keys_only("a", 100);
    const auto b = keys_only("b", 40);
    series.insert(series.end(), b.begin(), b.end());
    const Split s = split(series, {0.15, 0.10, {}, 1});
    CHECK(s.test.size() == 15u + 6u);
    CHECK(s.val.size() == 9u + 3u);
    CHECK(s.train.size() == 76u + 31u);
    std::set<PlotKey> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 140u);
  }

  TEST_CASE("split depends only on the seed") {
    const auto series = keys_only("a", 60);
    const Split a = split(series, {0.15, 0.10, {}, 5});
    const Split b = split(series, {0.15, 0.10, {}, 5});
    const Split c = split(series, {0.15, 0.10, {}, 6});
    CHECK(a.test == b.test);
    CHECK(a.train == b.train);
    CHECK_FALSE(a.test == c.test);
    auto reversed = series;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(split(reversed, {0.15, 0.10, {}, 5}).test == a.test);
  }

  TEST_CASE("fixed test counts per environment") {
    const std::vector<int> plots = {874, 796, 1686, 688, 896, 1410};
    const std::vector<int> tests = {117, 112, 260, 104, 134, 226};
    std::vector<PlotSeries> series;
    SplitConfig cfg;
    cfg.seed = 42;
    for (std::size_t e = 0; e < plots.size(); ++e) {
      const std::string env = "env" + std::to_string(e + 1);
      const auto part = keys_only(env, plots[e]);
      series.insert(series.end(), part.begin(), part.end());
      cfg.test_counts[env] = tests[e];
    }
    const Split s = split(series, cfg);
    std::map<std::string, int> per_env;
    for (const PlotKey& k : s.test) ++per_env[k.environment_id];
    for (std::size_t e = 0; e < plots.size(); ++e) CHECK(per_env["env" + std::to_string(e + 1)] == tests[e]);
    cfg.test_counts["env9"] = 3;
    CHECK_THROWS_AS(split(series, cfg), ConfigError);
  }

  TEST_CASE("small environments and missing truth are data errors") {
    CHECK_THROWS_AS(split(keys_only("a", 9), {}), DataError);
    auto series = keys_only("a", 20);
    series[3].rm_day.reset();
    CHECK_THROWS_AS(split(series, {}), DataError);
  }

  TEST_CASE("select_series follows key order") {
    const auto series = keys_only("a", 12);
    const auto picked = select_series(series, {{"a", "p1005"}, {"a", "p1001"}});
    REQUIRE(picked.size() == 2u);
    CHECK(picked[0].plot_id == "p1005");
    CHECK(picked[1].plot_id == "p1001");
    CHECK_THROWS(select_series(series, {{"a", "nope"}}));
  }

  TEST_CASE("series tensor layout") {
    const PlotSeries s = image_series("p", 20, 1);
    const auto t = series_tensor<double>(s);
    CHECK(t.shape == nn::Shape{3, kSnipLength, kSnipWidth, 3});
    const std::size_t idx = ((2u * kSnipLength + 100u) * kSnipWidth + 7u) * 3u + 1u;
    CHECK(t.data[idx] == doctest::Approx(s.snips[2].image.at(100, 7, 1) / 255.0));
  }

  TEST_CASE("zero learning rate keeps the training loss constant") {
    std::vector<PlotSeries> data;
    for (int i = 0; i < 4; ++i) data.push_back(image_series("p" + std::to_string(i), 15 + 3 * i, 10 + i));
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.adam.learning_rate = 0.0;
    cfg.seed = 3;
    const auto r = train<float>(tiny_net(), data, {}, cfg);
    REQUIRE(r.trace.epochs.size() == 3u);
    CHECK(r.trace.epochs[1].train_loss == r.trace.epochs[0].train_loss);
    CHECK(r.trace.epochs[2].train_loss == r.trace.epochs[0].train_loss);
    CHECK(std::isnan(r.trace.epochs[0].val_loss));
    CHECK(r.trace.to_csv().find("NA") != std::string::npos);
  }

  TEST_CASE("a single sample is memorised") {
    const std::vector<PlotSeries> data = {image_series("p", 3, 4)};
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 1;
    cfg.scale_output = false;
    cfg.adam.learning_rate = 1e-2;
    cfg.adam.decay = 0.0;
    cfg.seed = 2;
    auto r = train<float>(tiny_net(), data, data, cfg);
    CHECK(r.trace.epochs.back().train_loss < 1e-3);
    CHECK(r.trace.epochs.back().train_loss < r.trace.epochs.front().train_loss);
    CHECK(predict_all(r.network, data)[0] == doctest::Approx(3.0).epsilon(0.02));
  }

  TEST_CASE("training is reproducible and update-capped") {
    std::vector<PlotSeries> data;
    for (int i = 0; i < 5; ++i) data.push_back(image_series("p" + std::to_string(i), 12 + 2 * i, 20 + i));
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 2;
    cfg.seed = 9;
    auto a = train<float>(tiny_net(), data, {}, cfg);
    auto b = train<float>(tiny_net(), data, {}, cfg);
    CHECK(a.trace.to_csv() == b.trace.to_csv());
    CHECK(predict_all(a.network, data) == predict_all(b.network, data));
    cfg.max_updates = 4;  // 3 batches per epoch
    CHECK(train<float>(tiny_net(), data, {}, cfg).trace.epochs.size() == 2u);
  }

  TEST_CASE("evaluation rows per environment plus ALL") {
    std::vector<PlotSeries> series = {{"p1", "b", {}, 10}, {"p2", "b", {}, 12}, {"p1", "a", {}, 20},
                                      {"p2", "a", {}, 24}};
    const std::vector<double> pred = {11, 12, 20, 21};
    const MetricsReport r = evaluate_predictions(series, pred, "weekly", "cnn-lstm", "test");
    REQUIRE(r.rows.size() == 3u);
    CHECK(r.rows[0].environment_id == "a");
    CHECK(r.rows[0].metrics.mae == doctest::Approx(1.5));
    CHECK(r.rows[1].environment_id == "b");
    CHECK(r.rows[1].metrics.mse == doctest::Approx(0.5));
    CHECK(r.rows[2].environment_id == "ALL");
    CHECK(r.rows[2].metrics.n == 4u);
    CHECK(r.rows[2].metrics.mae == doctest::Approx(1.0));
    CHECK(r.to_csv().rfind("environment,schedule,method,partition,n,r2,mae,mse\n", 0) == 0);
    CHECK(r.to_json().find("\"ALL\"") != std::string::npos);
  }

  TEST_CASE("comparison table") {
    const MetricsReport cnn = report_for({"a", "b"}, "cnn-lstm", {"train", "test"});
    const MetricsReport loess = report_for({"a", "b"}, "loess", {"test"});
    const ComparisonTable t = compare(cnn, loess);
    CHECK(t.columns == std::vector<std::string>{"weekly/cnn-lstm/train", "weekly/cnn-lstm/test", "weekly/loess"});
    CHECK(t.rows.size() == 6u);
    CHECK(t.to_csv().find("a,MAE") != std::string::npos);
    CHECK_THROWS_AS(compare(report_for({"a"}, "cnn-lstm", {"train", "test"}), loess), DataError);
    CHECK_THROWS_AS(compare(report_for({"a", "b"}, "cnn-lstm", {"test"}), loess), DataError);
    CHECK_THROWS_AS(compare(loess, loess), DataError);
  }

  TEST_CASE("decisions use a two-day window") {
    std::vector<PlotSeries> series = {{"p1", "a", {}, 22}, {"p2", "a", {}, 22}, {"p3", "a", {}, std::nullopt},
                                      {"p4", "a", {}, 0}, {"p5", "a", {}, 91}};
    const DecisionReport d = decision_report(series, {19.6, 19.4, 37.0, -5.0, 140.0});
    CHECK(d.plots[0].predicted_day == 20);
    CHECK(*d.plots[0].confident);
    CHECK(d.plots[1].predicted_day == 19);
    CHECK_FALSE(*d.plots[1].confident);
    CHECK_FALSE(d.plots[2].confident.has_value());
    CHECK(d.plots[2].date == CalendarDate{10, 7});
    CHECK(d.plots[3].predicted_day == 0);
    CHECK(d.plots[4].predicted_day == 91);
    REQUIRE(d.environments.size() == 1u);
    CHECK(d.environments[0].n_plots == 5u);
    CHECK(d.environments[0].n_with_truth == 4u);
    CHECK(*d.environments[0].within_window == doctest::Approx(0.75));
    CHECK(d.to_csv().find("Oct 7") != std::string::npos);
  }

  TEST_CASE("bi-weekly is recommended within five points") {
    const auto report = [](double within) {
      DecisionReport r;
      r.environments.push_back({"a", 100, 100, within});
      return r;
    };
    CHECK(recommend_schedule(report(0.90), report(0.85))[0].biweekly_sufficient);
    CHECK_FALSE(recommend_schedule(report(0.90), report(0.849))[0].biweekly_sufficient);
    CHECK(recommend_schedule(report(0.80), report(0.95))[0].biweekly_sufficient);
    CHECK(recommendations_to_csv(recommend_schedule(report(0.9), report(0.7))).find("a,0.9000,0.7000,weekly") !=
          std::string::npos);
  }
}
