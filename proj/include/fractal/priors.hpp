#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fractal/dataset.hpp"

namespace fractal {

enum class PriorKind { CosineContext, PairwiseCorrelation, ExternalFile };

// Cosine similarity between an instance embedding and its bag's context
// embedding, rescaled from [-1,1] to [0,1].
double cos_prior(std::span<const double> x, std::span<const double> context);

// Pearson correlation of the two embeddings' coordinates, rescaled to [0,1].
// Throws on constant vectors (the correlation is undefined there).
double corr_prior(std::span<const double> x, std::span<const double> z);

// Per-instance prior values, aligned with Dataset bag/instance order.
struct InstancePriors {
  PriorKind kind = PriorKind::ExternalFile;
  std::vector<std::vector<double>> values;  // [bag][instance]
};

// Within-bag pairwise priors; one row-major k x k symmetric matrix with unit
// diagonal per bag.
struct PairwisePriors {
  PriorKind kind = PriorKind::PairwiseCorrelation;
  std::vector<std::vector<double>> matrices;  // [bag][i*k + j]
};

// Requires a context embedding on every bag.
InstancePriors build_cosine_priors(const Dataset& ds);

PairwisePriors build_correlation_priors(const Dataset& ds);

// Requires an external_prior value on every instance; the error names the
// first instance missing one.
InstancePriors load_external_priors(const Dataset& ds);

struct PriorSet {
  std::optional<InstancePriors> cosine;
  std::optional<InstancePriors> external;
  std::optional<PairwisePriors> correlation;
};

PriorSet build_priors(const Dataset& ds, bool need_cosine,
                      bool need_correlation, bool need_external);

}  // namespace fractal
