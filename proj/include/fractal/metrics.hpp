#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fractal/dataset.hpp"
#include "fractal/model.hpp"

#include "json.hpp"

namespace fractal {

// Mann-Whitney AUC with average ranks, so ties contribute 1/2. Requires at
// least one positive and one negative label.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision: step-interpolated area under precision-recall, summing
// precision at each positive in descending score order. Ties are broken by
// input position, matching the step construction.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

struct ThresholdMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool no_positive_predictions = false;  // precision reported as 0
};

// Binary metrics with prediction = score > threshold.
ThresholdMetrics threshold_metrics(std::span<const double> scores,
                                   std::span<const int> labels,
                                   double threshold = 0.5);

struct RegressionMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

RegressionMetrics regression_metrics(std::span<const double> predictions,
                                     std::span<const double> targets);

struct PreferenceAccuracy {
  double accuracy = 0.0;  // ties count as wrong
  std::size_t ties = 0;
  std::size_t total = 0;
};

struct EvalReport {
  std::optional<double> instance_auc_roc;
  std::optional<double> instance_auc_pr;
  std::optional<ThresholdMetrics> instance_threshold;
  std::optional<RegressionMetrics> instance_regression;
  std::optional<double> bag_auc_roc;
  std::optional<RegressionMetrics> bag_regression;
  std::optional<PreferenceAccuracy> preference;
  std::size_t instances_scored = 0;
  std::size_t bags_scored = 0;
};

nlohmann::ordered_json report_to_json(const EvalReport& r);

// Tab-separated row for experiment aggregation; absent metrics stay empty.
std::string report_row_header();
std::string report_to_row(const EvalReport& r);

// Scores every instance with `score` (model or a baseline) and fills the
// instance-level block; gold labels must be present. Binary datasets get
// AUCs and threshold metrics; integer datasets get MAE/MSE on the raw
// score against the gold value.
using ScoreFn = std::function<double(const Instance&, const Bag&)>;

EvalReport evaluate_instances(const Dataset& ds, const ScoreFn& score);

// Adds bag-level metrics (exact aggregate of instance scores against bag
// labels) and preference accuracy over ds.preferences when present.
EvalReport evaluate_dataset(const Dataset& ds, const ScoreFn& score);

ScoreFn model_scorer(const ScorerModel& m);

// Cosine-similarity baseline: the instance's cosine prior against the bag
// context, rescaled by the label scale for integer datasets.
ScoreFn cosine_scorer(const Dataset& ds);

}  // namespace fractal
