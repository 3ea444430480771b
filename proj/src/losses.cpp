#include "fractal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fractal {
namespace {

using Caches = std::vector<std::vector<ForwardCache>>;
using PosMap = std::unordered_map<std::size_t, std::size_t>;

void check_batch(const Batch& batch) {
  if (!batch.dataset) throw std::invalid_argument("batch has no dataset");
  for (std::size_t b : batch.bags)
    if (b >= batch.dataset->bags.size())
      throw std::out_of_range("batch bag index out of range");
  if (batch.pairs.size() != batch.pair_labels.size())
    throw std::invalid_argument("pair labels misaligned with pairs");
}

// One forward pass per instance, shared by every loss term.
Caches eval_bags(const Batch& batch, const ScorerModel& m) {
  Caches caches(batch.bags.size());
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi) {
    const Bag& bag = batch.dataset->bags[batch.bags[bi]];
    caches[bi].reserve(bag.instances.size());
    for (const Instance& x : bag.instances)
      caches[bi].push_back(m.forward_cached(x.embedding));
  }
  return caches;
}

PosMap position_map(const Batch& batch) {
  PosMap pos;
  pos.reserve(batch.bags.size());
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi)
    pos[batch.bags[bi]] = bi;
  return pos;
}

// d(CE)/d(pred) at the clamped prediction; the clamp is straight-through.
double ce_grad(double target, double pred) {
  const double q = clamp_unit(pred);
  return -target / q + (1.0 - target) / (1.0 - q);
}

double bag_loss_impl(const Batch& batch, const ScorerModel& m,
                     const AggConfig& cfg, const Caches& caches,
                     GradientTape* tape, double grad_scale) {
  if (batch.bags.empty()) return 0.0;
  const Dataset& ds = *batch.dataset;
  const double scale = ds.label_scale();
  const bool regression = ds.label_kind == LabelKind::Integer;
  const double inv_n = 1.0 / double(batch.bags.size());

  double total = 0.0;
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi) {
    const Bag& bag = ds.bags[batch.bags[bi]];
    if (!bag.bag_label)
      throw std::runtime_error("bag \"" + bag.id + "\" has no label");
    std::vector<double> scores(caches[bi].size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      scores[i] = caches[bi][i].score / scale;
    const AggResult ar = aggregate(scores, cfg);
    const double pred = scale * ar.value;
    const double y = *bag.bag_label;
    double dpred;
    if (regression) {
      total += (y - pred) * (y - pred);
      dpred = 2.0 * (pred - y);
    } else {
      total += cross_entropy(y, pred);
      dpred = ce_grad(y, pred);
    }
    if (tape) {
      // d(pred)/d(score_i): the two scale factors cancel.
      for (std::size_t i = 0; i < scores.size(); ++i)
        m.backward(*tape, dpred * ar.gradient[i] * grad_scale * inv_n,
                   caches[bi][i]);
    }
  }
  return total * inv_n;
}

double prior_loss_instance_impl(const Batch& batch, const ScorerModel& m,
                                const InstancePriors& priors,
                                const Caches& caches, GradientTape* tape,
                                double grad_scale) {
  const Dataset& ds = *batch.dataset;
  if (priors.values.size() != ds.bags.size())
    throw std::invalid_argument("priors not aligned with dataset");
  const double scale = ds.label_scale();
  const bool regression = ds.label_kind == LabelKind::Integer;

  std::size_t n = 0;
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi)
    n += caches[bi].size();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / double(n);

  double total = 0.0;
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi) {
    const auto& row = priors.values[batch.bags[bi]];
    if (row.size() != caches[bi].size())
      throw std::invalid_argument("priors not aligned with bag");
    for (std::size_t i = 0; i < caches[bi].size(); ++i) {
      const double s = caches[bi][i].score;
      const double target = regression ? scale * row[i] : row[i];
      double ds_up;
      if (regression) {
        total += (target - s) * (target - s);
        ds_up = 2.0 * (s - target);
      } else {
        total += cross_entropy(target, s);
        ds_up = ce_grad(target, s);
      }
      if (tape) m.backward(*tape, ds_up * grad_scale * inv_n, caches[bi][i]);
    }
  }
  return total * inv_n;
}

double prior_loss_pairwise_impl(const Batch& batch, const ScorerModel& m,
                                const PairwisePriors& priors,
                                const Caches& caches, GradientTape* tape,
                                double grad_scale) {
  const Dataset& ds = *batch.dataset;
  if (priors.matrices.size() != ds.bags.size())
    throw std::invalid_argument("priors not aligned with dataset");
  const double scale = ds.label_scale();
  const bool regression = ds.label_kind == LabelKind::Integer;

  std::size_t n_pairs = 0;
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi) {
    const std::size_t k = caches[bi].size();
    n_pairs += k * (k - 1);
  }
  if (n_pairs == 0) return 0.0;
  const double inv_n = 1.0 / double(n_pairs);

  double total = 0.0;
  for (std::size_t bi = 0; bi < batch.bags.size(); ++bi) {
    const std::size_t k = caches[bi].size();
    const auto& mat = priors.matrices[batch.bags[bi]];
    if (mat.size() != k * k)
      throw std::invalid_argument("priors not aligned with bag");
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        const double si = caches[bi][i].score;
        const double sj = caches[bi][j].score;
        const double prod = si * sj;
        const double target =
            regression ? scale * scale * mat[i * k + j] : mat[i * k + j];
        double dprod;
        if (regression) {
          total += (target - prod) * (target - prod);
          dprod = 2.0 * (prod - target);
        } else {
          total += cross_entropy(target, prod);
          dprod = ce_grad(target, prod);
        }
        if (tape) {
          m.backward(*tape, dprod * sj * grad_scale * inv_n, caches[bi][i]);
          m.backward(*tape, dprod * si * grad_scale * inv_n, caches[bi][j]);
        }
      }
  }
  return total * inv_n;
}

double preference_loss_impl(const Batch& batch, const ScorerModel& m,
                            const AggConfig& cfg, const Caches& caches,
                            const PosMap& pos, GradientTape* tape,
                            double grad_scale) {
  if (batch.pairs.empty()) return 0.0;
  const Dataset& ds = *batch.dataset;
  const double scale = ds.label_scale();
  const double inv_n = 1.0 / double(batch.pairs.size());

  const auto eval_bag = [&](std::size_t bag_idx) {
    const auto it = pos.find(bag_idx);
    if (it == pos.end())
      throw std::invalid_argument(
          "preference pair references a bag outside the batch");
    const std::size_t bi = it->second;
    std::vector<double> scores(caches[bi].size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      scores[i] = caches[bi][i].score / scale;
    return std::make_pair(bi, aggregate(scores, cfg));
  };

  double total = 0.0;
  for (std::size_t pi = 0; pi < batch.pairs.size(); ++pi) {
    const auto [bi_a, agg_a] = eval_bag(batch.pairs[pi].first);
    const auto [bi_b, agg_b] = eval_bag(batch.pairs[pi].second);
    const double y = double(batch.pair_labels[pi]);
    const double qa = clamp_unit(agg_a.value);
    const double qb = clamp_unit(agg_b.value);
    total += y * (std::log(qb) - std::log(qa));
    if (tape) {
      const double da = -y / qa * grad_scale * inv_n;
      const double db = y / qb * grad_scale * inv_n;
      for (std::size_t i = 0; i < caches[bi_a].size(); ++i)
        m.backward(*tape, da * agg_a.gradient[i] / scale, caches[bi_a][i]);
      for (std::size_t i = 0; i < caches[bi_b].size(); ++i)
        m.backward(*tape, db * agg_b.gradient[i] / scale, caches[bi_b][i]);
    }
  }
  return total * inv_n;
}

}  // namespace

void LossWeights::validate() const {
  const double ws[] = {bag, cosine, correlation, external};
  double sum = 0.0;
  for (double w : ws) {
    if (!(w >= 0.0 && w <= 1.0))
      throw std::invalid_argument("loss weights must lie in [0, 1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("loss weights must sum to 1");
}

Batch make_preference_batch(const Dataset& ds,
                            std::span<const std::size_t> pair_indices,
                            const BagIndex& index) {
  Batch batch;
  batch.dataset = &ds;
  for (std::size_t pi : pair_indices) {
    if (pi >= ds.preferences.size())
      throw std::out_of_range("preference index out of range");
    const PreferencePair& p = ds.preferences[pi];
    const auto ia = index.find(p.bag_a);
    const auto ib = index.find(p.bag_b);
    if (ia == index.end() || ib == index.end())
      throw std::runtime_error("preference pair references an unknown bag");
    batch.pairs.emplace_back(ia->second, ib->second);
    batch.pair_labels.push_back(p.label);
    batch.bags.push_back(ia->second);
    batch.bags.push_back(ib->second);
  }
  std::sort(batch.bags.begin(), batch.bags.end());
  batch.bags.erase(std::unique(batch.bags.begin(), batch.bags.end()),
                   batch.bags.end());
  return batch;
}

double clamp_unit(double p) {
  return std::min(std::max(p, kScoreClampEps), 1.0 - kScoreClampEps);
}

double cross_entropy(double target, double pred) {
  const double q = clamp_unit(pred);
  return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

double bag_loss(const Batch& batch, const ScorerModel& m, const AggConfig& cfg,
                GradientTape* tape, double grad_scale) {
  check_batch(batch);
  return bag_loss_impl(batch, m, cfg, eval_bags(batch, m), tape, grad_scale);
}

double prior_loss_instance(const Batch& batch, const ScorerModel& m,
                           const InstancePriors& priors, GradientTape* tape,
                           double grad_scale) {
  check_batch(batch);
  return prior_loss_instance_impl(batch, m, priors, eval_bags(batch, m), tape,
                                  grad_scale);
}

double prior_loss_pairwise(const Batch& batch, const ScorerModel& m,
                           const PairwisePriors& priors, GradientTape* tape,
                           double grad_scale) {
  check_batch(batch);
  return prior_loss_pairwise_impl(batch, m, priors, eval_bags(batch, m), tape,
                                  grad_scale);
}

double preference_loss(const Batch& batch, const ScorerModel& m,
                       const AggConfig& cfg, GradientTape* tape,
                       double grad_scale) {
  check_batch(batch);
  return preference_loss_impl(batch, m, cfg, eval_bags(batch, m),
                              position_map(batch), tape, grad_scale);
}

LossBreakdown total_loss(const Batch& batch, const ScorerModel& m,
                         const LossWeights& weights, const PriorSet& priors,
                         const AggConfig& cfg, GradientTape* tape) {
  check_batch(batch);
  weights.validate();
  const Caches caches = eval_bags(batch, m);

  LossBreakdown out;
  if (weights.bag > 0.0) {
    out.bag = batch.pairs.empty()
                  ? bag_loss_impl(batch, m, cfg, caches, tape, weights.bag)
                  : preference_loss_impl(batch, m, cfg, caches,
                                         position_map(batch), tape,
                                         weights.bag);
  }
  if (weights.cosine > 0.0) {
    if (!priors.cosine)
      throw std::runtime_error("cosine weight set but no cosine priors built");
    out.cosine = prior_loss_instance_impl(batch, m, *priors.cosine, caches,
                                          tape, weights.cosine);
  }
  if (weights.correlation > 0.0) {
    if (!priors.correlation)
      throw std::runtime_error(
          "correlation weight set but no correlation priors built");
    out.correlation = prior_loss_pairwise_impl(
        batch, m, *priors.correlation, caches, tape, weights.correlation);
  }
  if (weights.external > 0.0) {
    if (!priors.external)
      throw std::runtime_error(
          "external weight set but no external priors loaded");
    out.external = prior_loss_instance_impl(batch, m, *priors.external, caches,
                                            tape, weights.external);
  }
  out.total = weights.bag * out.bag + weights.cosine * out.cosine +
              weights.correlation * out.correlation +
              weights.external * out.external;
  return out;
}

}  // namespace fractal
