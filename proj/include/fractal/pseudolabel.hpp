#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fractal/dataset.hpp"
#include "fractal/model.hpp"

namespace fractal {

// Maximum-likelihood binary labeling of one bag given instance scores and
// the bag label.
struct BagLabeling {
  std::vector<int> labels;   // 0/1 per instance
  double likelihood = 0.0;   // prod(labels[i] ? s[i] : 1-s[i])
  bool flipped = false;      // a forced flip was needed to satisfy the bag
};

// PsLab for one bag. MIN with y=1 forces all-ones. MIN with y=0 labels each
// instance by thresholding its score at 0.5 (ties up); if that yields
// all-ones, the first lowest-scoring instance is flipped to 0. MAX is the
// mirror image (complement scores, complement bag label).
BagLabeling pslab_bag(std::span<const double> scores, int bag_label,
                      AggKind agg);

struct PslabAudit {
  std::size_t bags = 0;
  std::size_t forced_bags = 0;      // all-one labels from y=1 (or mirror)
  std::size_t flipped_bags = 0;     // needed the argmin/argmax flip
  std::size_t instances = 0;
  std::size_t positive_labels = 0;
};

// Why PsLab does or does not apply to a dataset.
struct Applicability {
  bool ok = false;
  std::string reason;  // empty when ok
};

// PsLab needs binary labels and MIN or MAX bags; AVG, integer regression,
// and preference-only supervision are out of scope.
Applicability pslab_applicability(const Dataset& ds);

// Scores every instance with the model and replaces gold labels with the
// pseudo labels; bag labels are kept. Throws when not applicable.
Dataset pslab_dataset(const Dataset& ds, const ScorerModel& m,
                      PslabAudit* audit = nullptr);

}  // namespace fractal
