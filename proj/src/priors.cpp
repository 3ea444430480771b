#include "fractal/priors.hpp"

#include <cmath>
#include <stdexcept>

namespace fractal {

double cos_prior(std::span<const double> x, std::span<const double> context) {
  if (x.size() != context.size())
    throw std::invalid_argument("cos_prior: dimension mismatch");
  if (x.empty()) throw std::invalid_argument("cos_prior: empty vectors");
  double dot = 0.0, nx = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * context[i];
    nx += x[i] * x[i];
    nc += context[i] * context[i];
  }
  if (nx == 0.0 || nc == 0.0)
    throw std::invalid_argument("cos_prior: zero-norm vector");
  return 0.5 * (1.0 + dot / (std::sqrt(nx) * std::sqrt(nc)));
}

double corr_prior(std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size())
    throw std::invalid_argument("corr_prior: dimension mismatch");
  const std::size_t n = x.size();
  if (n < 2)
    throw std::invalid_argument("corr_prior: needs at least two coordinates");
  double mx = 0.0, mz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    mz += z[i];
  }
  mx /= double(n);
  mz /= double(n);
  double sxz = 0.0, sxx = 0.0, szz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - mx;
    const double b = z[i] - mz;
    sxz += a * b;
    sxx += a * a;
    szz += b * b;
  }
  if (sxx == 0.0 || szz == 0.0)
    throw std::invalid_argument(
        "corr_prior: correlation undefined for a constant vector");
  return 0.5 * (1.0 + sxz / (std::sqrt(sxx) * std::sqrt(szz)));
}

InstancePriors build_cosine_priors(const Dataset& ds) {
  InstancePriors priors;
  priors.kind = PriorKind::CosineContext;
  priors.values.reserve(ds.bags.size());
  for (const Bag& b : ds.bags) {
    if (!b.context_embedding)
      throw std::runtime_error("bag \"" + b.id +
                               "\" has no context embedding");
    std::vector<double> row;
    row.reserve(b.instances.size());
    for (const Instance& x : b.instances)
      row.push_back(cos_prior(x.embedding, *b.context_embedding));
    priors.values.push_back(std::move(row));
  }
  return priors;
}

PairwisePriors build_correlation_priors(const Dataset& ds) {
  PairwisePriors priors;
  priors.kind = PriorKind::PairwiseCorrelation;
  priors.matrices.reserve(ds.bags.size());
  for (const Bag& b : ds.bags) {
    const std::size_t k = b.instances.size();
    std::vector<double> mat(k * k, 1.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double v =
            corr_prior(b.instances[i].embedding, b.instances[j].embedding);
        mat[i * k + j] = v;
        mat[j * k + i] = v;
      }
    priors.matrices.push_back(std::move(mat));
  }
  return priors;
}

InstancePriors load_external_priors(const Dataset& ds) {
  InstancePriors priors;
  priors.kind = PriorKind::ExternalFile;
  priors.values.reserve(ds.bags.size());
  for (const Bag& b : ds.bags) {
    std::vector<double> row;
    row.reserve(b.instances.size());
    for (const Instance& x : b.instances) {
      if (!x.external_prior)
        throw std::runtime_error("instance \"" + x.id +
                                 "\" has no external prior");
      row.push_back(*x.external_prior);
    }
    priors.values.push_back(std::move(row));
  }
  return priors;
}

PriorSet build_priors(const Dataset& ds, bool need_cosine,
                      bool need_correlation, bool need_external) {
  PriorSet set;
  if (need_cosine) set.cosine = build_cosine_priors(ds);
  if (need_correlation) set.correlation = build_correlation_priors(ds);
  if (need_external) set.external = load_external_priors(ds);
  return set;
}

}  // namespace fractal
