#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fractal/metrics.hpp"
#include "fractal/priors.hpp"
#include "fractal/rng.hpp"
#include "testutil.hpp"

#include "doctest.h"

using namespace fractal;

namespace {

// O(n^2) reference: fraction of (positive, negative) pairs ranked correctly,
// ties worth one half.
double pairwise_auc(std::span<const double> s, std::span<const int> y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("roc auc oracles") {
  const std::vector<double> s{0.8, 0.6, 0.4};
  const std::vector<int> y{1, 0, 1};
  CHECK(auc_roc(s, y) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> labels{1, 1, 0, 0};
  CHECK(auc_roc(perfect, labels) == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<double> anti{0.1, 0.2, 0.8, 0.9};
  CHECK(auc_roc(anti, labels) == doctest::Approx(0.0).epsilon(1e-15));

  const std::vector<double> ties{0.5, 0.5, 0.5, 0.5};
  CHECK(auc_roc(ties, labels) == 0.5);
}

TEST_CASE("roc auc equals the pairwise count on random data") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + std::size_t(rng.uniform_int(0, 10));
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid forces frequent ties.
      s[i] = double(rng.uniform_int(0, 4)) / 4.0;
      y[i] = int(rng.uniform_int(0, 1));
      (y[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(auc_roc(s, y) == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("roc auc properties") {
  Rng rng(72);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = i < 20 ? 1 : 0;
  }
  const double base = auc_roc(s, y);

  // Complemented scores invert the ranking.
  std::vector<double> comp(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) comp[i] = 1.0 - s[i];
  CHECK(auc_roc(comp, y) == doctest::Approx(1.0 - base).epsilon(1e-12));

  // Strictly monotone transforms preserve it.
  std::vector<double> warped(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    warped[i] = std::exp(3.0 * s[i]) - 7.0;
  CHECK(auc_roc(warped, y) == doctest::Approx(base).epsilon(1e-12));

  // Random scores hover near chance.
  double acc = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    for (double& v : s) v = rng.uniform();
    acc += auc_roc(s, y);
  }
  CHECK(acc / 50.0 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("pr auc oracle") {
  const std::vector<double> s{0.9, 0.8, 0.7};
  const std::vector<int> y{1, 0, 1};
  // Precision at the positives: 1/1 and 2/3; AP = (1 + 2/3) / 2.
  CHECK(auc_pr(s, y) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));

  const std::vector<int> all_first{1, 1, 0};
  CHECK(auc_pr(s, all_first) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("auc inputs are validated") {
  const std::vector<double> s{0.5, 0.6};
  const std::vector<int> pos{1, 1}, neg{0, 0};
  CHECK_THROWS_AS((void)auc_roc(s, pos), std::invalid_argument);
  CHECK_THROWS_AS((void)auc_roc(s, neg), std::invalid_argument);
  CHECK_THROWS_AS((void)auc_pr(s, neg), std::invalid_argument);
  const std::vector<int> short_y{1};
  CHECK_THROWS_AS((void)auc_roc(s, short_y), std::invalid_argument);
  CHECK_THROWS_AS((void)auc_roc(std::vector<double>{}, std::vector<int>{}),
                  std::invalid_argument);
}

TEST_CASE("threshold metrics oracle") {
  const std::vector<double> s{0.9, 0.6, 0.4, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  const ThresholdMetrics tm = threshold_metrics(s, y);
  CHECK(tm.accuracy == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tm.precision == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tm.recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tm.f1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_FALSE(tm.no_positive_predictions);

  // Exactly at the threshold predicts negative.
  const std::vector<double> at{0.5, 0.5};
  const std::vector<int> y2{1, 0};
  const ThresholdMetrics border = threshold_metrics(at, y2);
  CHECK(border.accuracy == 0.5);
  CHECK(border.recall == 0.0);
  CHECK(border.no_positive_predictions);
  CHECK(border.precision == 0.0);
  CHECK(border.f1 == 0.0);
}

TEST_CASE("regression metrics oracle") {
  const std::vector<double> p{1.0, 2.0, 4.0};
  const std::vector<double> t{1.0, 3.0, 2.0};
  const RegressionMetrics rm = regression_metrics(p, t);
  CHECK(rm.mae == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rm.mse == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(rm.mae * rm.mae <= rm.mse + 1e-12);
  CHECK_THROWS_AS(
      (void)regression_metrics(p, std::vector<double>{1.0}),
      std::invalid_argument);
}

TEST_CASE("instance evaluation fills the binary block") {
  SyntheticConfig cfg;
  cfg.seed = 13;
  cfg.n_bags = 30;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 5;
  cfg.d = 6;
  const Dataset ds = generate_synthetic(cfg);

  // Scoring by the gold label itself separates the classes perfectly.
  const ScoreFn oracle = [](const Instance& x, const Bag&) {
    return *x.gold_label == 1.0 ? 0.9 : 0.1;
  };
  const EvalReport r = evaluate_instances(ds, oracle);
  CHECK(r.instances_scored == ds.instance_count());
  REQUIRE(r.instance_auc_roc.has_value());
  CHECK(*r.instance_auc_roc == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(r.instance_auc_pr.has_value());
  CHECK(*r.instance_auc_pr == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(r.instance_threshold.has_value());
  CHECK(r.instance_threshold->accuracy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(r.instance_regression.has_value());
}

TEST_CASE("instance evaluation fills the regression block for integer data") {
  SyntheticConfig cfg;
  cfg.seed = 14;
  cfg.n_bags = 10;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 4;
  cfg.d = 4;
  cfg.label_kind = LabelKind::Integer;
  cfg.max_label = 3;
  const Dataset ds = generate_synthetic(cfg);
  const EvalReport r = evaluate_instances(
      ds, [](const Instance& x, const Bag&) { return *x.gold_label; });
  CHECK_FALSE(r.instance_auc_roc.has_value());
  REQUIRE(r.instance_regression.has_value());
  CHECK(r.instance_regression->mae == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.instance_regression->mse == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("instance evaluation requires gold labels") {
  const Dataset ds = testutil::tiny_dataset(1, AggKind::Min, {{{0.5}}});
  CHECK_THROWS_AS(
      (void)evaluate_instances(
          ds, [](const Instance&, const Bag&) { return 0.5; }),
      std::runtime_error);
}

TEST_CASE("single-class datasets skip the auc block") {
  const Dataset ds = testutil::tiny_dataset(
      1, AggKind::Min, {{{0.5}, {0.6}}}, {{1.0, 1.0}});
  const EvalReport r = evaluate_instances(
      ds, [](const Instance&, const Bag&) { return 0.5; });
  CHECK_FALSE(r.instance_auc_roc.has_value());
  CHECK(r.instance_threshold.has_value());
}

TEST_CASE("dataset evaluation adds bag metrics and preference accuracy") {
  SyntheticConfig cfg;
  cfg.seed = 15;
  cfg.n_bags = 40;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 5;
  cfg.d = 6;
  Dataset ds = generate_synthetic(cfg);
  ds.preferences = sample_preferences(ds, 25, 4);

  const ScoreFn oracle = [](const Instance& x, const Bag&) {
    return *x.gold_label == 1.0 ? 0.9 : 0.1;
  };
  const EvalReport r = evaluate_dataset(ds, oracle);
  CHECK(r.bags_scored == 40);
  REQUIRE(r.bag_auc_roc.has_value());
  CHECK(*r.bag_auc_roc == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(r.preference.has_value());
  CHECK(r.preference->total == 25);
  CHECK(r.preference->ties == 0);
  CHECK(r.preference->accuracy == doctest::Approx(1.0).epsilon(1e-12));

  // A constant scorer ties every pair; ties count as wrong.
  const EvalReport flat = evaluate_dataset(
      ds, [](const Instance&, const Bag&) { return 0.5; });
  REQUIRE(flat.preference.has_value());
  CHECK(flat.preference->ties == 25);
  CHECK(flat.preference->accuracy == 0.0);

  ds.preferences.clear();
  const EvalReport bare = evaluate_dataset(ds, oracle);
  CHECK_FALSE(bare.preference.has_value());
}

TEST_CASE("avg bags report bag regression instead of bag auc") {
  SyntheticConfig cfg;
  cfg.seed = 16;
  cfg.n_bags = 12;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 4;
  cfg.d = 4;
  cfg.agg = AggKind::Avg;
  const Dataset ds = generate_synthetic(cfg);
  const EvalReport r = evaluate_dataset(
      ds, [](const Instance& x, const Bag&) { return *x.gold_label; });
  CHECK_FALSE(r.bag_auc_roc.has_value());
  REQUIRE(r.bag_regression.has_value());
  CHECK(r.bag_regression->mse == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("model and cosine scorers plug into evaluation") {
  SyntheticConfig cfg;
  cfg.seed = 17;
  cfg.n_bags = 20;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 4;
  cfg.d = 5;
  const Dataset ds = generate_synthetic(cfg);

  const ScorerModel m = ScorerModel::init(1, 5, 6, 3);
  const EvalReport rm = evaluate_dataset(ds, model_scorer(m));
  CHECK(rm.instances_scored == ds.instance_count());

  // Positives sit along the context direction, negatives orthogonal, so the
  // cosine baseline ranks them perfectly.
  Dataset toy = testutil::tiny_dataset(
      2, AggKind::Min,
      {{{2.0, 0.0}, {0.0, 3.0}}, {{1.0, 0.2}, {-1.0, 0.1}}},
      {{1.0, 0.0}, {1.0, 0.0}});
  for (auto& b : toy.bags) b.context_embedding = std::vector<double>{1.0, 0.0};
  const EvalReport rc = evaluate_dataset(toy, cosine_scorer(toy));
  CHECK(rc.instances_scored == 4);
  REQUIRE(rc.instance_auc_roc.has_value());
  CHECK(*rc.instance_auc_roc == doctest::Approx(1.0).epsilon(1e-12));

  Dataset no_ctx = toy;
  no_ctx.bags[0].context_embedding.reset();
  CHECK_THROWS_AS((void)cosine_scorer(no_ctx), std::runtime_error);
}

TEST_CASE("report json mirrors the filled blocks") {
  EvalReport r;
  r.instance_auc_roc = 0.75;
  r.instances_scored = 10;
  r.bags_scored = 3;
  const auto j = report_to_json(r);
  CHECK(j.at("instances_scored").get<std::size_t>() == 10);
  CHECK(j.at("instance").at("auc_roc").get<double>() == 0.75);
  CHECK_FALSE(j.contains("preference"));
  CHECK_FALSE(j.at("instance").contains("auc_pr"));

  r.preference = PreferenceAccuracy{0.8, 2, 20};
  const auto j2 = report_to_json(r);
  CHECK(j2.at("preference").at("accuracy").get<double>() == 0.8);
  CHECK(j2.at("preference").at("ties").get<std::size_t>() == 2);
}

TEST_CASE("report rows align with the header") {
  const std::string header = report_row_header();
  const auto count_tabs = [](const std::string& s) {
    return std::count(s.begin(), s.end(), '\t');
  };
  EvalReport r;
  r.instance_auc_roc = 0.75;
  CHECK(count_tabs(report_to_row(r)) == count_tabs(header));
  EvalReport full;
  full.instance_auc_roc = 0.1;
  full.instance_auc_pr = 0.2;
  full.instance_threshold = ThresholdMetrics{0.3, 0.4, 0.5, 0.6, false};
  full.instance_regression = RegressionMetrics{0.7, 0.8};
  full.bag_auc_roc = 0.9;
  full.bag_regression = RegressionMetrics{1.0, 1.1};
  full.preference = PreferenceAccuracy{0.5, 1, 2};
  CHECK(count_tabs(report_to_row(full)) == count_tabs(header));
}

}  // TEST_SUITE
