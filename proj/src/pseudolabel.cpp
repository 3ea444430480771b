#include "fractal/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fractal {
namespace {

double likelihood_of(std::span<const double> scores,
                     const std::vector<int>& labels) {
  double lik = 1.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    lik *= labels[i] ? scores[i] : 1.0 - scores[i];
  return lik;
}

int bag_label_bit(double y) {
  if (y == 0.0) return 0;
  if (y == 1.0) return 1;
  throw std::invalid_argument("bag label must be 0 or 1 for pseudo-labeling");
}

}  // namespace

BagLabeling pslab_bag(std::span<const double> scores, int bag_label,
                      AggKind agg) {
  if (scores.empty())
    throw std::invalid_argument("pslab_bag: empty score vector");
  if (bag_label != 0 && bag_label != 1)
    throw std::invalid_argument("pslab_bag: bag label must be 0 or 1");
  if (agg == AggKind::Avg)
    throw std::invalid_argument("pslab_bag: AVG bags are not supported");

  BagLabeling out;
  out.labels.resize(scores.size());

  if (agg == AggKind::Min) {
    if (bag_label == 1) {
      // min = 1 forces every instance positive.
      std::fill(out.labels.begin(), out.labels.end(), 1);
    } else {
      // Free choice maximizes likelihood per instance; at least one zero is
      // required, so failing that the weakest instance flips.
      for (std::size_t i = 0; i < scores.size(); ++i)
        out.labels[i] = scores[i] >= 0.5 ? 1 : 0;
      if (std::find(out.labels.begin(), out.labels.end(), 0) ==
          out.labels.end()) {
        const auto lo = std::min_element(scores.begin(), scores.end());
        out.labels[std::size_t(lo - scores.begin())] = 0;
        out.flipped = true;
      }
    }
  } else {
    if (bag_label == 0) {
      std::fill(out.labels.begin(), out.labels.end(), 0);
    } else {
      for (std::size_t i = 0; i < scores.size(); ++i)
        out.labels[i] = scores[i] > 0.5 ? 1 : 0;
      if (std::find(out.labels.begin(), out.labels.end(), 1) ==
          out.labels.end()) {
        const auto hi = std::max_element(scores.begin(), scores.end());
        out.labels[std::size_t(hi - scores.begin())] = 1;
        out.flipped = true;
      }
    }
  }
  out.likelihood = likelihood_of(scores, out.labels);
  return out;
}

Applicability pslab_applicability(const Dataset& ds) {
  Applicability a;
  if (ds.bags.empty()) {
    a.reason = "dataset has no bags";
    return a;
  }
  if (ds.label_kind != LabelKind::Binary) {
    a.reason = "labels take values in [0, L]; label probabilities are only "
               "available for binary labels";
    return a;
  }
  const AggKind agg = ds.agg();
  if (agg == AggKind::Avg) {
    a.reason = "AVG bag labels do not determine a consistent 0/1 labeling";
    return a;
  }
  for (const Bag& b : ds.bags)
    if (!b.bag_label) {
      a.reason = "bag \"" + b.id + "\" has no label";
      return a;
    }
  a.ok = true;
  return a;
}

Dataset pslab_dataset(const Dataset& ds, const ScorerModel& m,
                      PslabAudit* audit) {
  const Applicability a = pslab_applicability(ds);
  if (!a.ok) throw std::runtime_error("pseudo-labeling not applicable: " + a.reason);

  Dataset out = ds;
  PslabAudit tally;
  for (Bag& b : out.bags) {
    std::vector<double> scores;
    scores.reserve(b.instances.size());
    for (const Instance& x : b.instances)
      scores.push_back(m.forward(x.embedding));
    const int y = bag_label_bit(*b.bag_label);
    const BagLabeling lab = pslab_bag(scores, y, b.agg);

    ++tally.bags;
    const bool forced =
        (b.agg == AggKind::Min && y == 1) || (b.agg == AggKind::Max && y == 0);
    if (forced) ++tally.forced_bags;
    if (lab.flipped) ++tally.flipped_bags;
    for (std::size_t i = 0; i < b.instances.size(); ++i) {
      b.instances[i].gold_label = double(lab.labels[i]);
      ++tally.instances;
      tally.positive_labels += std::size_t(lab.labels[i]);
    }
  }
  if (audit) *audit = tally;
  return out;
}

}  // namespace fractal
