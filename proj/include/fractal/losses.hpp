#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fractal/aggregation.hpp"
#include "fractal/dataset.hpp"
#include "fractal/model.hpp"
#include "fractal/priors.hpp"

namespace fractal {

// Mixture weights over the loss terms. bag doubles as the preference-loss
// weight when training on preference pairs.
struct LossWeights {
  double bag = 1.0;
  double cosine = 0.0;       // instance prior from context similarity
  double correlation = 0.0;  // pairwise prior
  double external = 0.0;     // instance prior from the dataset file

  // Each weight in [0,1], summing to 1 within 1e-9.
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double bag = 0.0;         // bag or preference term, unweighted
  double cosine = 0.0;      // unweighted term values
  double correlation = 0.0;
  double external = 0.0;
};

// A minibatch view into a dataset: bag indices, plus resolved preference
// pairs (bag-index pairs with their labels) when training on preferences.
struct Batch {
  const Dataset* dataset = nullptr;
  std::vector<std::size_t> bags;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<int> pair_labels;  // aligned with pairs, each +1 or -1
};

// Fills `bags` with the union of the pairs' bags so prior terms cover every
// instance in the minibatch.
Batch make_preference_batch(const Dataset& ds,
                            std::span<const std::size_t> pair_indices,
                            const BagIndex& index);

// Predictions are clamped into [kScoreClampEps, 1-kScoreClampEps] before any
// cross-entropy or probability aggregation; gradients pass straight through
// the clamp.
double clamp_unit(double p);

// Soft-target cross-entropy -(p ln q + (1-p) ln(1-q)) with q clamped.
double cross_entropy(double target, double pred);

// Mean over the batch of L_bag(y_B, probAGG(M(x))): cross-entropy for
// classification, squared error for regression. Each bag must be labeled.
// When `tape` is given, grad_scale * d(loss)/d(theta) is accumulated.
double bag_loss(const Batch& batch, const ScorerModel& m, const AggConfig& cfg,
                GradientTape* tape = nullptr, double grad_scale = 1.0);

// Mean over instances in the batch of L_prior(p_x, M(x)). Regression scales
// the prior target by L.
double prior_loss_instance(const Batch& batch, const ScorerModel& m,
                           const InstancePriors& priors,
                           GradientTape* tape = nullptr,
                           double grad_scale = 1.0);

// Mean over within-bag ordered pairs (x != z) of L_prior(p_xz, M(x)M(z)).
// Regression scales the pairwise target by L^2. Singleton bags contribute
// no pairs.
double prior_loss_pairwise(const Batch& batch, const ScorerModel& m,
                           const PairwisePriors& priors,
                           GradientTape* tape = nullptr,
                           double grad_scale = 1.0);

// Bradley-Terry bag comparison, mean over pairs of y * ln(y2~/y1~) with the
// aggregate predictions clamped to [1e-6, 1-1e-6].
double preference_loss(const Batch& batch, const ScorerModel& m,
                       const AggConfig& cfg, GradientTape* tape = nullptr,
                       double grad_scale = 1.0);

// Weighted sum of the enabled terms; the bag weight applies to the
// preference term instead when the batch carries pairs. Throws when a
// nonzero weight has no backing term (missing prior, unlabeled bags).
LossBreakdown total_loss(const Batch& batch, const ScorerModel& m,
                         const LossWeights& weights, const PriorSet& priors,
                         const AggConfig& cfg, GradientTape* tape = nullptr);

}  // namespace fractal
