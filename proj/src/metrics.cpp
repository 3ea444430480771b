#include "fractal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fractal/priors.hpp"

namespace fractal {
namespace {

void check_binary_labels(std::span<const int> labels) {
  for (int y : labels)
    if (y != 0 && y != 1)
      throw std::invalid_argument("labels must be 0 or 1");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += std::size_t(y);
  return {pos, labels.size() - pos};
}

int binary_gold(const Instance& x) {
  const double g = *x.gold_label;
  if (g != 0.0 && g != 1.0)
    throw std::runtime_error("instance \"" + x.id +
                             "\" has a non-binary gold label");
  return int(g);
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc_roc: size mismatch");
  check_binary_labels(labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("auc_roc: needs both classes");

  // Mann-Whitney with average ranks, so score ties contribute one half.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (double(i + 1) + double(j));  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = double(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * double(neg));
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc_pr: size mismatch");
  check_binary_labels(labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0) throw std::invalid_argument("auc_pr: needs a positive label");

  // Average precision: step construction in descending score order, ties
  // kept in input order.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) {
      ++tp;
      ap += double(tp) / double(k + 1);
    }
  }
  return ap / double(pos);
}

ThresholdMetrics threshold_metrics(std::span<const double> scores,
                                   std::span<const int> labels,
                                   double threshold) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("threshold_metrics: size mismatch");
  if (scores.empty())
    throw std::invalid_argument("threshold_metrics: empty input");
  check_binary_labels(labels);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (pred && labels[i] == 1) ++tp;
    else if (pred) ++fp;
    else if (labels[i] == 1) ++fn;
    else ++tn;
  }
  ThresholdMetrics m;
  m.accuracy = double(tp + tn) / double(scores.size());
  if (tp + fp == 0) {
    m.precision = 0.0;
    m.no_positive_predictions = true;
  } else {
    m.precision = double(tp) / double(tp + fp);
  }
  m.recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

RegressionMetrics regression_metrics(std::span<const double> predictions,
                                     std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("regression_metrics: size mismatch");
  if (predictions.empty())
    throw std::invalid_argument("regression_metrics: empty input");
  RegressionMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - targets[i];
    m.mae += std::abs(e);
    m.mse += e * e;
  }
  m.mae /= double(predictions.size());
  m.mse /= double(predictions.size());
  return m;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["instances_scored"] = r.instances_scored;
  j["bags_scored"] = r.bags_scored;
  ordered_json inst;
  if (r.instance_auc_roc) inst["auc_roc"] = *r.instance_auc_roc;
  if (r.instance_auc_pr) inst["auc_pr"] = *r.instance_auc_pr;
  if (r.instance_threshold) {
    const ThresholdMetrics& t = *r.instance_threshold;
    inst["accuracy"] = t.accuracy;
    inst["precision"] = t.precision;
    inst["recall"] = t.recall;
    inst["f1"] = t.f1;
    inst["no_positive_predictions"] = t.no_positive_predictions;
  }
  if (r.instance_regression) {
    inst["mae"] = r.instance_regression->mae;
    inst["mse"] = r.instance_regression->mse;
  }
  j["instance"] = std::move(inst);
  if (r.bag_auc_roc || r.bag_regression) {
    ordered_json bag;
    if (r.bag_auc_roc) bag["auc_roc"] = *r.bag_auc_roc;
    if (r.bag_regression) {
      bag["mae"] = r.bag_regression->mae;
      bag["mse"] = r.bag_regression->mse;
    }
    j["bag"] = std::move(bag);
  }
  if (r.preference) {
    ordered_json p;
    p["accuracy"] = r.preference->accuracy;
    p["ties"] = r.preference->ties;
    p["total"] = r.preference->total;
    j["preference"] = std::move(p);
  }
  return j;
}

std::string report_row_header() {
  return "instances\tbags\tinstance_auc_roc\tinstance_auc_pr\t"
         "instance_accuracy\tinstance_precision\tinstance_recall\t"
         "instance_f1\tinstance_mae\tinstance_mse\tbag_auc_roc\tbag_mae\t"
         "bag_mse\tpreference_accuracy\tpreference_ties\tpreference_total";
}

std::string report_to_row(const EvalReport& r) {
  const auto num = [](double v) { return nlohmann::json(v).dump(); };
  std::vector<std::string> cells(16);
  cells[0] = std::to_string(r.instances_scored);
  cells[1] = std::to_string(r.bags_scored);
  if (r.instance_auc_roc) cells[2] = num(*r.instance_auc_roc);
  if (r.instance_auc_pr) cells[3] = num(*r.instance_auc_pr);
  if (r.instance_threshold) {
    cells[4] = num(r.instance_threshold->accuracy);
    cells[5] = num(r.instance_threshold->precision);
    cells[6] = num(r.instance_threshold->recall);
    cells[7] = num(r.instance_threshold->f1);
  }
  if (r.instance_regression) {
    cells[8] = num(r.instance_regression->mae);
    cells[9] = num(r.instance_regression->mse);
  }
  if (r.bag_auc_roc) cells[10] = num(*r.bag_auc_roc);
  if (r.bag_regression) {
    cells[11] = num(r.bag_regression->mae);
    cells[12] = num(r.bag_regression->mse);
  }
  if (r.preference) {
    cells[13] = num(r.preference->accuracy);
    cells[14] = std::to_string(r.preference->ties);
    cells[15] = std::to_string(r.preference->total);
  }
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += '\t';
    row += cells[i];
  }
  return row;
}

EvalReport evaluate_instances(const Dataset& ds, const ScoreFn& score) {
  EvalReport r;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> targets;
  for (const Bag& b : ds.bags)
    for (const Instance& x : b.instances) {
      if (!x.gold_label)
        throw std::runtime_error("instance \"" + x.id +
                                 "\" has no gold label");
      const double s = score(x, b);
      scores.push_back(s);
      if (ds.label_kind == LabelKind::Binary)
        labels.push_back(binary_gold(x));
      else
        targets.push_back(*x.gold_label);
    }
  r.instances_scored = scores.size();
  if (scores.empty()) return r;

  if (ds.label_kind == LabelKind::Binary) {
    const auto [pos, neg] = class_counts(labels);
    if (pos > 0 && neg > 0) {
      r.instance_auc_roc = auc_roc(scores, labels);
      r.instance_auc_pr = auc_pr(scores, labels);
    }
    r.instance_threshold = threshold_metrics(scores, labels, 0.5);
  } else {
    r.instance_regression = regression_metrics(scores, targets);
  }
  return r;
}

EvalReport evaluate_dataset(const Dataset& ds, const ScoreFn& score) {
  EvalReport r = evaluate_instances(ds, score);

  std::vector<double> bag_scores(ds.bags.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    std::vector<double> s;
    s.reserve(ds.bags[i].instances.size());
    for (const Instance& x : ds.bags[i].instances)
      s.push_back(score(x, ds.bags[i]));
    bag_scores[i] = exact_aggregate(ds.bags[i].agg, s);
  }

  std::vector<double> labeled_scores;
  std::vector<double> labeled_targets;
  for (std::size_t i = 0; i < ds.bags.size(); ++i)
    if (ds.bags[i].bag_label) {
      labeled_scores.push_back(bag_scores[i]);
      labeled_targets.push_back(*ds.bags[i].bag_label);
    }
  r.bags_scored = labeled_scores.size();
  if (!labeled_scores.empty()) {
    const bool hard_binary = ds.label_kind == LabelKind::Binary &&
                             ds.agg() != AggKind::Avg;
    if (hard_binary) {
      std::vector<int> lab(labeled_targets.size());
      for (std::size_t i = 0; i < labeled_targets.size(); ++i)
        lab[i] = int(labeled_targets[i]);
      const auto [pos, neg] = class_counts(lab);
      if (pos > 0 && neg > 0) r.bag_auc_roc = auc_roc(labeled_scores, lab);
    } else {
      r.bag_regression = regression_metrics(labeled_scores, labeled_targets);
    }
  }

  if (!ds.preferences.empty()) {
    const BagIndex index = build_bag_index(ds);
    PreferenceAccuracy pa;
    std::size_t correct = 0;
    for (const PreferencePair& p : ds.preferences) {
      const double sa = bag_scores[index.at(p.bag_a)];
      const double sb = bag_scores[index.at(p.bag_b)];
      ++pa.total;
      if (sa == sb) {
        ++pa.ties;  // a tie never matches a strict preference
      } else {
        const int pred = sa > sb ? 1 : -1;
        correct += std::size_t(pred == p.label);
      }
    }
    pa.accuracy = pa.total ? double(correct) / double(pa.total) : 0.0;
    r.preference = pa;
  }
  return r;
}

ScoreFn model_scorer(const ScorerModel& m) {
  return [model = m](const Instance& x, const Bag&) {
    return model.forward(x.embedding);
  };
}

ScoreFn cosine_scorer(const Dataset& ds) {
  for (const Bag& b : ds.bags)
    if (!b.context_embedding)
      throw std::runtime_error("bag \"" + b.id +
                               "\" has no context embedding");
  const double scale = ds.label_scale();
  return [scale](const Instance& x, const Bag& b) {
    return scale * cos_prior(x.embedding, *b.context_embedding);
  };
}

}  // namespace fractal
