#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fractal {

enum class HeadKind { Sigmoid, ScaledSigmoid };

const char* to_string(HeadKind head);
HeadKind head_kind_from_string(const std::string& s);

// Activations kept from a forward pass so backward can replay the chain rule.
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> pre1, act1;  // hidden layer 1
  std::vector<double> pre2, act2;  // hidden layer 2
  double pre_out = 0.0;
  double score = 0.0;
  bool valid = false;
};

class GradientTape;

// Instance scorer: 2-hidden-layer MLP with ReLU activations and a sigmoid
// head, optionally scaled to [0, L] for integer-label regression. Parameters
// live in one flat array (w1,b1,w2,b2,w3,b3) so the optimizer and the
// checkpoint format can treat the model as a vector.
class ScorerModel {
 public:
  ScorerModel(int d, int h1, int h2, HeadKind head, double label_scale);

  // Weights uniform in ±1/sqrt(fan_in) from the seeded generator, biases 0.
  static ScorerModel init(std::uint64_t seed, int d, int h1, int h2,
                          HeadKind head = HeadKind::Sigmoid,
                          double label_scale = 1.0);

  double forward(std::span<const double> x) const;
  ForwardCache forward_cached(std::span<const double> x) const;

  // Accumulates upstream * d(score)/d(theta) into the tape. Requires a cache
  // produced by forward_cached on this model.
  void backward(GradientTape& tape, double upstream,
                const ForwardCache& cache) const;

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  int input_dim() const { return d_; }
  int hidden1() const { return h1_; }
  int hidden2() const { return h2_; }
  HeadKind head() const { return head_; }
  double label_scale() const { return label_scale_; }
  std::uint64_t init_seed() const { return init_seed_; }

  // Checkpoint: one JSON header line, then the flat parameter array as
  // little-endian 64-bit floats. Round-trips exactly.
  void save(const std::string& path) const;
  static ScorerModel load(const std::string& path);

  bool operator==(const ScorerModel&) const = default;

 private:
  int d_ = 0, h1_ = 0, h2_ = 0;
  HeadKind head_ = HeadKind::Sigmoid;
  double label_scale_ = 1.0;
  std::uint64_t init_seed_ = 0;
  std::vector<double> params_;

  // Flat-array layout.
  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return off_w1() + std::size_t(h1_) * d_; }
  std::size_t off_w2() const { return off_b1() + h1_; }
  std::size_t off_b2() const { return off_w2() + std::size_t(h2_) * h1_; }
  std::size_t off_w3() const { return off_b2() + h2_; }
  std::size_t off_b3() const { return off_w3() + h2_; }
};

// Per-parameter gradient accumulator shaped exactly like a model.
class GradientTape {
 public:
  explicit GradientTape(const ScorerModel& m) : grads_(m.parameter_count()) {}

  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  void reset() { std::fill(grads_.begin(), grads_.end(), 0.0); }
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<double> grads_;
};

}  // namespace fractal
