#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fractal {

enum class AggKind { Min, Max, Avg };
enum class LabelKind { Binary, Integer };

const char* to_string(AggKind kind);
const char* to_string(LabelKind kind);
AggKind agg_kind_from_string(const std::string& s);
LabelKind label_kind_from_string(const std::string& s);

// One sentence / reasoning step: a precomputed embedding plus optional
// held-out gold label and optional externally supplied prior score.
struct Instance {
  std::string id;
  std::vector<double> embedding;
  std::optional<double> gold_label;
  std::optional<double> external_prior;  // in [0, 1]

  bool operator==(const Instance&) const = default;
};

// One response: an ordered set of instances sharing a single aggregate label.
struct Bag {
  std::string id;
  std::vector<Instance> instances;
  AggKind agg = AggKind::Min;
  std::optional<double> bag_label;  // in [0,1] or [0,L]; absent at inference
  std::optional<std::vector<double>> context_embedding;

  bool operator==(const Bag&) const = default;
};

// label = +1 when bag_a carries the higher label, -1 otherwise.
struct PreferencePair {
  std::string bag_a;
  std::string bag_b;
  int label = 1;

  bool operator==(const PreferencePair&) const = default;
};

struct Dataset {
  int d = 0;  // embedding dimension shared by every instance
  LabelKind label_kind = LabelKind::Binary;
  int max_label = 1;  // L; 1 for binary
  std::vector<Bag> bags;
  std::vector<PreferencePair> preferences;

  bool operator==(const Dataset&) const = default;

  // Width of the bag label range: 1 for binary, L for integer labels.
  double label_scale() const {
    return label_kind == LabelKind::Binary ? 1.0
                                           : static_cast<double>(max_label);
  }
  std::size_t instance_count() const;
  AggKind agg() const;  // shared aggregation kind; throws on empty dataset
};

using BagIndex = std::unordered_map<std::string, std::size_t>;
BagIndex build_bag_index(const Dataset& ds);

// Line-delimited records: a header line declaring {d, label_kind, L},
// then one bag object per line. Throws std::runtime_error with the line
// number on malformed input or any invariant violation.
Dataset load_dataset(const std::string& path,
                     std::optional<LabelKind> expected = std::nullopt);
void save_dataset(const Dataset& ds, const std::string& path);

// Preference pairs ride in their own file, one {bag_a, bag_b, label} per
// line. Ids are resolved against `ds` at load time.
std::vector<PreferencePair> load_preferences(const std::string& path,
                                             const Dataset& ds);
void save_preferences(std::span<const PreferencePair> pairs,
                      const std::string& path);

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int n_bags = 1;
  int bag_size_min = 1;
  int bag_size_max = 1;
  int d = 2;
  AggKind agg = AggKind::Min;
  LabelKind label_kind = LabelKind::Binary;
  int max_label = 1;         // L, used when label_kind == Integer
  double noise = 0.0;        // label-flip probability
  double prior_quality = 1.0;  // 1 → external prior equals the gold label
};

// Plants instance labels with a hidden linear rule on the embeddings, flips
// them with probability `noise`, then derives every bag label by the exact
// aggregation so the dataset is consistent by construction. Deterministic
// for a fixed seed.
Dataset generate_synthetic(const SyntheticConfig& cfg);

// Splits off the first `n_train` bags. Both halves keep the header fields;
// preferences are not carried over (sample them per split).
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          std::size_t n_train);

// Random distinct-bag pairs labeled by the gold bag labels.
std::vector<PreferencePair> sample_preferences(const Dataset& ds, int count,
                                               std::uint64_t seed);

struct ConsistencyIssue {
  std::string bag_id;
  double expected;  // agg over gold labels
  double actual;    // stored bag label
};

// Requires gold labels on every instance; reports every bag whose stored
// label differs from the aggregation of its gold labels.
std::vector<ConsistencyIssue> validate_consistency(const Dataset& ds);

double exact_aggregate(AggKind kind, std::span<const double> values);

}  // namespace fractal
