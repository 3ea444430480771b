#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fractal/aggregation.hpp"
#include "fractal/dataset.hpp"
#include "fractal/losses.hpp"
#include "fractal/model.hpp"
#include "fractal/rng.hpp"

namespace fractal {

// Raised when optimization produces a non-finite loss.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TrainMode {
  Bag,            // bag labels through a differentiable aggregate
  Preference,     // Bradley-Terry over bag pairs
  ResponseLevel,  // bag label regressed on the mean bag embedding
  Supervised,     // per-instance gold labels (oracle ceiling)
};

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order update rule over a flat parameter vector. Adam keeps
// bias-corrected first/second moment estimates; SGD is plain descent.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t n_params);

  // params -= lr * update(grads)
  void step(std::span<double> params, std::span<const double> grads,
            double learning_rate);

  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct TrainConfig {
  TrainMode mode = TrainMode::Bag;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  // 0 means one pass per epoch: floor(n / batch_size) full batches.
  std::size_t steps_per_epoch = 0;
  double learning_rate = 1e-3;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  LossWeights weights;
  Approx approx = Approx::Mult;
  double sharpness = 10.0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;

  void validate() const;
};

// One optimizer step's loss terms, for the training log.
struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step, 1-based
  LossBreakdown loss;
};

struct TrainResult {
  ScorerModel model;
  std::vector<StepRecord> log;
};

// Yields minibatches as index chunks: reshuffles the index set each epoch,
// walks it in consecutive chunks of batch_size, drops the remainder.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  // Next chunk, reshuffling when the epoch is exhausted. n < batch_size
  // degrades to one whole-set batch per epoch.
  std::span<const std::size_t> next();

  std::size_t batches_per_epoch() const { return per_epoch_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t per_epoch_;
  std::size_t cursor_;  // batch index within the epoch
  Rng rng_;
};

// Trains a fresh scorer on the dataset per cfg.mode. Bag mode samples bags;
// Preference mode samples preference pairs (ds.preferences must be
// nonempty); Supervised mode samples labeled instances. Throws on NaN loss.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

// Baseline: fits the scorer on mean bag embeddings against bag labels, then
// scores instances individually at eval time.
TrainResult train_response_level(const Dataset& ds, const TrainConfig& cfg);

void save_train_log(const std::string& path,
                    const std::vector<StepRecord>& log);

}  // namespace fractal
