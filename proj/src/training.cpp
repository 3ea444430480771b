#include "fractal/training.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "fractal/priors.hpp"

#include "json.hpp"

namespace fractal {
namespace {

HeadKind head_for(const Dataset& ds) {
  return ds.label_kind == LabelKind::Integer ? HeadKind::ScaledSigmoid
                                             : HeadKind::Sigmoid;
}

// Shared epoch/step loop: the step callback scores one index chunk with the
// current model and fills the tape with the weighted gradient.
using StepFn = std::function<LossBreakdown(
    const ScorerModel&, std::span<const std::size_t>, GradientTape&)>;

TrainResult run_loop(ScorerModel model, std::size_t n_items,
                     const TrainConfig& cfg, const StepFn& step_fn) {
  BatchSampler sampler(n_items, cfg.batch_size, Rng(cfg.seed).fork(1).seed());
  Optimizer opt(cfg.optimizer, model.parameter_count());
  GradientTape tape(model);
  std::vector<StepRecord> log;
  const std::size_t steps = cfg.steps_per_epoch ? cfg.steps_per_epoch
                                                : sampler.batches_per_epoch();
  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = 0; k < steps; ++k) {
      tape.reset();
      const LossBreakdown lb = step_fn(model, sampler.next(), tape);
      ++global;
      if (!std::isfinite(lb.total))
        throw NumericalFailure("non-finite loss at step " +
                               std::to_string(global));
      opt.step(model.parameters(), tape.grads(), cfg.learning_rate);
      log.push_back({epoch, global, lb});
    }
  }
  return {std::move(model), std::move(log)};
}

// Per-item supervised loss on (embedding, target) pairs: cross-entropy for
// binary targets, squared error otherwise.
LossBreakdown supervised_step(const ScorerModel& m,
                              std::span<const std::size_t> idxs,
                              const std::vector<std::vector<double>>& inputs,
                              const std::vector<double>& targets,
                              bool regression, GradientTape& tape) {
  double total = 0.0;
  const double inv_n = 1.0 / double(idxs.size());
  for (std::size_t i : idxs) {
    const ForwardCache cache = m.forward_cached(inputs[i]);
    const double s = cache.score;
    const double y = targets[i];
    double up;
    if (regression) {
      total += (y - s) * (y - s);
      up = 2.0 * (s - y);
    } else {
      total += cross_entropy(y, s);
      const double q = clamp_unit(s);
      up = -y / q + (1.0 - y) / (1.0 - q);
    }
    m.backward(tape, up * inv_n, cache);
  }
  LossBreakdown lb;
  lb.total = lb.bag = total * inv_n;
  return lb;
}

}  // namespace

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Bag: return "bag";
    case TrainMode::Preference: return "preference";
    case TrainMode::ResponseLevel: return "response_level";
    case TrainMode::Supervised: return "supervised";
  }
  throw std::logic_error("unknown TrainMode");
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "bag") return TrainMode::Bag;
  if (s == "preference") return TrainMode::Preference;
  if (s == "response_level") return TrainMode::ResponseLevel;
  if (s == "supervised") return TrainMode::Supervised;
  throw std::invalid_argument("unknown train mode: " + s);
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
  }
  throw std::logic_error("unknown OptimizerKind");
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer: " + s);
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t n_params)
    : cfg_(cfg) {
  if (cfg.kind == OptimizerKind::Adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads,
                     double learning_rate) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: gradient size mismatch");
  ++t_;
  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i] -= learning_rate * grads[i];
    return;
  }
  if (params.size() != m_.size())
    throw std::invalid_argument("optimizer: parameter size mismatch");
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  if (hidden1 < 1 || hidden2 < 1)
    throw std::invalid_argument("hidden sizes must be >= 1");
  if (!(sharpness > 0.0) || !std::isfinite(sharpness))
    throw std::invalid_argument("sharpness must be positive and finite");
  weights.validate();
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size,
                           std::uint64_t seed)
    : batch_size_(std::min(batch_size, n)), rng_(seed) {
  if (n == 0) throw std::invalid_argument("sampler over an empty set");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  per_epoch_ = std::max<std::size_t>(1, n / batch_size_);
  cursor_ = per_epoch_;  // shuffle on first use
}

std::span<const std::size_t> BatchSampler::next() {
  if (cursor_ == per_epoch_) {
    rng_.shuffle(order_);
    cursor_ = 0;
  }
  const std::size_t off = cursor_ * batch_size_;
  ++cursor_;
  return {order_.data() + off, batch_size_};
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.mode == TrainMode::ResponseLevel)
    return train_response_level(ds, cfg);
  if (ds.bags.empty()) throw std::runtime_error("dataset has no bags");

  ScorerModel model =
      ScorerModel::init(cfg.seed, ds.d, int(cfg.hidden1), int(cfg.hidden2),
                        head_for(ds), ds.label_scale());
  const AggConfig agg{ds.agg(), cfg.approx, cfg.sharpness};

  if (cfg.mode == TrainMode::Supervised) {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    for (const Bag& b : ds.bags)
      for (const Instance& x : b.instances)
        if (x.gold_label) {
          inputs.push_back(x.embedding);
          targets.push_back(*x.gold_label);
        }
    if (inputs.empty())
      throw std::runtime_error("supervised training needs gold labels");
    const bool regression = ds.label_kind == LabelKind::Integer;
    return run_loop(std::move(model), inputs.size(), cfg,
                    [&, regression](const ScorerModel& m,
                                    std::span<const std::size_t> idxs,
                                    GradientTape& t) {
                      return supervised_step(m, idxs, inputs, targets,
                                             regression, t);
                    });
  }

  const PriorSet priors =
      build_priors(ds, cfg.weights.cosine > 0.0, cfg.weights.correlation > 0.0,
                   cfg.weights.external > 0.0);

  if (cfg.mode == TrainMode::Preference) {
    if (ds.preferences.empty())
      throw std::runtime_error("preference training needs preference pairs");
    const BagIndex index = build_bag_index(ds);
    return run_loop(std::move(model), ds.preferences.size(), cfg,
                    [&](const ScorerModel& m,
                        std::span<const std::size_t> idxs, GradientTape& t) {
                      const Batch batch =
                          make_preference_batch(ds, idxs, index);
                      return total_loss(batch, m, cfg.weights, priors, agg,
                                        &t);
                    });
  }

  return run_loop(std::move(model), ds.bags.size(), cfg,
                  [&](const ScorerModel& m, std::span<const std::size_t> idxs,
                      GradientTape& t) {
                    Batch batch;
                    batch.dataset = &ds;
                    batch.bags.assign(idxs.begin(), idxs.end());
                    return total_loss(batch, m, cfg.weights, priors, agg, &t);
                  });
}

TrainResult train_response_level(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.bags.empty()) throw std::runtime_error("dataset has no bags");
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  for (const Bag& b : ds.bags) {
    if (!b.bag_label)
      throw std::runtime_error("bag \"" + b.id + "\" has no label");
    std::vector<double> mean(ds.d, 0.0);
    for (const Instance& x : b.instances)
      for (int k = 0; k < ds.d; ++k) mean[k] += x.embedding[k];
    for (double& v : mean) v /= double(b.instances.size());
    inputs.push_back(std::move(mean));
    targets.push_back(*b.bag_label);
  }
  ScorerModel model =
      ScorerModel::init(cfg.seed, ds.d, int(cfg.hidden1), int(cfg.hidden2),
                        head_for(ds), ds.label_scale());
  const bool regression = ds.label_kind == LabelKind::Integer;
  return run_loop(std::move(model), inputs.size(), cfg,
                  [&, regression](const ScorerModel& m,
                                  std::span<const std::size_t> idxs,
                                  GradientTape& t) {
                    return supervised_step(m, idxs, inputs, targets,
                                           regression, t);
                  });
}

void save_train_log(const std::string& path,
                    const std::vector<StepRecord>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const StepRecord& r : log) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["step"] = r.step;
    j["total"] = r.loss.total;
    j["bag"] = r.loss.bag;
    j["cosine"] = r.loss.cosine;
    j["correlation"] = r.loss.correlation;
    j["external"] = r.loss.external;
    os << j.dump() << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace fractal
