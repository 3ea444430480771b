#include "fractal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "fractal/rng.hpp"

#include "json.hpp"

namespace fractal {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail_at(const std::string& path, std::size_t line,
                          const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-9; }

json parse_line(const std::string& path, std::size_t line_no,
                const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    fail_at(path, line_no, std::string("malformed JSON: ") + e.what());
  }
}

std::vector<double> read_vector(const json& j, int d, const std::string& path,
                                std::size_t line_no, const std::string& what) {
  if (!j.is_array()) fail_at(path, line_no, what + " must be an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) fail_at(path, line_no, what + " must be numeric");
    v.push_back(e.get<double>());
  }
  if (int(v.size()) != d)
    fail_at(path, line_no,
            what + " has dimension " + std::to_string(v.size()) +
                ", expected " + std::to_string(d));
  return v;
}

ordered_json instance_to_json(const Instance& x) {
  ordered_json j;
  j["id"] = x.id;
  j["embedding"] = x.embedding;
  j["gold_label"] = x.gold_label ? json(*x.gold_label) : json(nullptr);
  j["external_prior"] =
      x.external_prior ? json(*x.external_prior) : json(nullptr);
  return j;
}

ordered_json bag_to_json(const Bag& b) {
  ordered_json j;
  j["id"] = b.id;
  j["agg"] = to_string(b.agg);
  j["label"] = b.bag_label ? json(*b.bag_label) : json(nullptr);
  j["context_embedding"] =
      b.context_embedding ? json(*b.context_embedding) : json(nullptr);
  ordered_json insts = ordered_json::array();
  for (const Instance& x : b.instances) insts.push_back(instance_to_json(x));
  j["instances"] = std::move(insts);
  return j;
}

void check_label_value(double v, const Dataset& ds, AggKind agg,
                       bool is_instance, const std::string& path,
                       std::size_t line_no, const std::string& what) {
  const double scale = ds.label_scale();
  if (!(v >= 0.0 && v <= scale))
    fail_at(path, line_no, what + " out of range [0, " +
                               std::to_string(scale) + "]");
  if (ds.label_kind == LabelKind::Integer && !is_integral(v) && is_instance)
    fail_at(path, line_no, what + " must be an integer");
  if (ds.label_kind == LabelKind::Binary &&
      (is_instance || agg != AggKind::Avg) && v != 0.0 && v != 1.0)
    fail_at(path, line_no, what + " must be 0 or 1");
}

}  // namespace

const char* to_string(AggKind kind) {
  switch (kind) {
    case AggKind::Min: return "min";
    case AggKind::Max: return "max";
    case AggKind::Avg: return "avg";
  }
  throw std::logic_error("unknown AggKind");
}

const char* to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::Binary: return "binary";
    case LabelKind::Integer: return "integer";
  }
  throw std::logic_error("unknown LabelKind");
}

AggKind agg_kind_from_string(const std::string& s) {
  if (s == "min") return AggKind::Min;
  if (s == "max") return AggKind::Max;
  if (s == "avg") return AggKind::Avg;
  throw std::invalid_argument("unknown aggregation kind: " + s);
}

LabelKind label_kind_from_string(const std::string& s) {
  if (s == "binary") return LabelKind::Binary;
  if (s == "integer") return LabelKind::Integer;
  throw std::invalid_argument("unknown label kind: " + s);
}

std::size_t Dataset::instance_count() const {
  std::size_t n = 0;
  for (const Bag& b : bags) n += b.instances.size();
  return n;
}

AggKind Dataset::agg() const {
  if (bags.empty()) throw std::runtime_error("dataset has no bags");
  return bags.front().agg;
}

BagIndex build_bag_index(const Dataset& ds) {
  BagIndex index;
  index.reserve(ds.bags.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) index[ds.bags[i].id] = i;
  return index;
}

Dataset load_dataset(const std::string& path,
                     std::optional<LabelKind> expected) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> bag_ids;
  std::unordered_set<std::string> instance_ids;

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(path, line_no, line);

    if (!have_header) {
      if (!j.contains("d") || !j.contains("label_kind"))
        fail_at(path, line_no, "header must declare d and label_kind");
      if (!j["d"].is_number_integer() || j["d"].get<int>() < 1)
        fail_at(path, line_no, "d must be a positive integer");
      ds.d = j["d"].get<int>();
      ds.label_kind = label_kind_from_string(j["label_kind"].get<std::string>());
      if (ds.label_kind == LabelKind::Integer) {
        if (!j.contains("L") || !j["L"].is_number_integer() ||
            j["L"].get<int>() < 1)
          fail_at(path, line_no, "integer labels need a positive L");
        ds.max_label = j["L"].get<int>();
      } else {
        ds.max_label = 1;
        if (j.contains("L") && !j["L"].is_null() && j["L"].get<int>() != 1)
          fail_at(path, line_no, "binary labels admit only L = 1");
      }
      if (expected && ds.label_kind != *expected)
        fail_at(path, line_no,
                std::string("expected ") + to_string(*expected) +
                    " labels, file declares " + to_string(ds.label_kind));
      have_header = true;
      continue;
    }

    Bag b;
    try {
      b.id = j.at("id").get<std::string>();
      b.agg = agg_kind_from_string(j.at("agg").get<std::string>());
    } catch (const json::exception& e) {
      fail_at(path, line_no, std::string("bad bag record: ") + e.what());
    }
    if (!bag_ids.insert(b.id).second)
      fail_at(path, line_no, "duplicate bag id \"" + b.id + "\"");
    if (!ds.bags.empty() && b.agg != ds.bags.front().agg)
      fail_at(path, line_no, "aggregation kind differs from earlier bags");

    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_number())
        fail_at(path, line_no, "bag label must be numeric or null");
      const double v = j["label"].get<double>();
      b.bag_label = v;
    }
    if (j.contains("context_embedding") && !j["context_embedding"].is_null())
      b.context_embedding =
          read_vector(j["context_embedding"], ds.d, path, line_no,
                      "context_embedding");

    if (!j.contains("instances") || !j["instances"].is_array() ||
        j["instances"].empty())
      fail_at(path, line_no, "bag needs a non-empty instances array");
    for (const auto& ij : j["instances"]) {
      Instance x;
      try {
        x.id = ij.at("id").get<std::string>();
      } catch (const json::exception& e) {
        fail_at(path, line_no, std::string("bad instance record: ") + e.what());
      }
      if (!instance_ids.insert(x.id).second)
        fail_at(path, line_no, "duplicate instance id \"" + x.id + "\"");
      if (!ij.contains("embedding"))
        fail_at(path, line_no, "instance \"" + x.id + "\" has no embedding");
      x.embedding = read_vector(ij["embedding"], ds.d, path, line_no,
                                "embedding of \"" + x.id + "\"");
      if (ij.contains("gold_label") && !ij["gold_label"].is_null()) {
        const double v = ij["gold_label"].get<double>();
        check_label_value(v, ds, b.agg, true, path, line_no,
                          "gold label of \"" + x.id + "\"");
        x.gold_label = v;
      }
      if (ij.contains("external_prior") && !ij["external_prior"].is_null()) {
        const double v = ij["external_prior"].get<double>();
        if (!(v >= 0.0 && v <= 1.0))
          fail_at(path, line_no,
                  "external prior of \"" + x.id + "\" out of [0, 1]");
        x.external_prior = v;
      }
      b.instances.push_back(std::move(x));
    }
    if (b.bag_label)
      check_label_value(*b.bag_label, ds, b.agg, false, path, line_no,
                        "label of bag \"" + b.id + "\"");
    ds.bags.push_back(std::move(b));
  }
  if (!have_header) fail_at(path, line_no, "missing dataset header line");
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  ordered_json header;
  header["d"] = ds.d;
  header["label_kind"] = to_string(ds.label_kind);
  header["L"] = ds.label_kind == LabelKind::Integer ? json(ds.max_label)
                                                    : json(nullptr);
  os << header.dump() << '\n';
  for (const Bag& b : ds.bags) os << bag_to_json(b).dump() << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<PreferencePair> load_preferences(const std::string& path,
                                             const Dataset& ds) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  const BagIndex index = build_bag_index(ds);
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(path, line_no, line);
    PreferencePair p;
    try {
      p.bag_a = j.at("bag_a").get<std::string>();
      p.bag_b = j.at("bag_b").get<std::string>();
      p.label = j.at("label").get<int>();
    } catch (const json::exception& e) {
      fail_at(path, line_no, std::string("bad preference record: ") + e.what());
    }
    if (p.label != 1 && p.label != -1)
      fail_at(path, line_no, "preference label must be 1 or -1");
    if (!index.count(p.bag_a))
      fail_at(path, line_no, "unknown bag \"" + p.bag_a + "\"");
    if (!index.count(p.bag_b))
      fail_at(path, line_no, "unknown bag \"" + p.bag_b + "\"");
    if (p.bag_a == p.bag_b)
      fail_at(path, line_no, "preference pair repeats one bag");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_preferences(std::span<const PreferencePair> pairs,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const PreferencePair& p : pairs) {
    ordered_json j;
    j["bag_a"] = p.bag_a;
    j["bag_b"] = p.bag_b;
    j["label"] = p.label;
    os << j.dump() << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

double exact_aggregate(AggKind kind, std::span<const double> values) {
  if (values.empty())
    throw std::invalid_argument("exact_aggregate: empty value vector");
  switch (kind) {
    case AggKind::Min: return *std::min_element(values.begin(), values.end());
    case AggKind::Max: return *std::max_element(values.begin(), values.end());
    case AggKind::Avg: {
      double sum = 0.0;
      for (double v : values) sum += v;
      return sum / double(values.size());
    }
  }
  throw std::logic_error("unknown AggKind");
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_bags < 1) throw std::invalid_argument("n_bags must be positive");
  if (cfg.d < 1) throw std::invalid_argument("d must be positive");
  if (cfg.bag_size_min < 1 || cfg.bag_size_max < cfg.bag_size_min)
    throw std::invalid_argument("bad bag size range");
  if (cfg.noise < 0.0 || cfg.noise > 1.0)
    throw std::invalid_argument("noise must be in [0, 1]");
  if (cfg.prior_quality < 0.0 || cfg.prior_quality > 1.0)
    throw std::invalid_argument("prior_quality must be in [0, 1]");
  if (cfg.label_kind == LabelKind::Integer && cfg.max_label < 1)
    throw std::invalid_argument("integer labels need a positive L");

  Dataset ds;
  ds.d = cfg.d;
  ds.label_kind = cfg.label_kind;
  ds.max_label = cfg.label_kind == LabelKind::Integer ? cfg.max_label : 1;
  const double scale = ds.label_scale();

  const Rng root(cfg.seed);
  Rng wrng = root.fork(0);
  Rng srng = root.fork(1);
  Rng xrng = root.fork(2);
  Rng nrng = root.fork(3);
  Rng crng = root.fork(4);
  Rng prng = root.fork(5);

  // Hidden linear rule.
  std::vector<double> w(cfg.d);
  double wnorm = 0.0;
  for (double& v : w) {
    v = wrng.normal();
    wnorm += v * v;
  }
  wnorm = std::sqrt(wnorm);

  std::vector<int> sizes(cfg.n_bags);
  for (int& s : sizes)
    s = int(srng.uniform_int(cfg.bag_size_min, cfg.bag_size_max));

  std::vector<std::vector<std::vector<double>>> embeddings(cfg.n_bags);
  std::vector<double> dots;
  for (int b = 0; b < cfg.n_bags; ++b) {
    embeddings[b].resize(sizes[b]);
    for (int i = 0; i < sizes[b]; ++i) {
      auto& x = embeddings[b][i];
      x.resize(cfg.d);
      double dot = 0.0;
      for (int k = 0; k < cfg.d; ++k) {
        x[k] = xrng.normal();
        dot += w[k] * x[k];
      }
      dots.push_back(dot);
    }
  }

  // Threshold(s) from empirical quantiles so the instance positive rate puts
  // the bag labels near balance: MIN bags are positive only when every
  // instance is, so the rate must sit well above one half.
  std::vector<double> sorted = dots;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const auto idx = std::size_t(
        std::clamp(q * double(sorted.size()), 0.0, double(sorted.size() - 1)));
    return sorted[idx];
  };
  const double mean_size = 0.5 * (cfg.bag_size_min + cfg.bag_size_max);
  std::vector<double> edges;  // gold = count of edges strictly below dot
  if (cfg.label_kind == LabelKind::Binary) {
    double pos_rate = 0.5;
    if (cfg.agg == AggKind::Min)
      pos_rate = std::pow(0.5, 1.0 / mean_size);
    else if (cfg.agg == AggKind::Max)
      pos_rate = 1.0 - std::pow(0.5, 1.0 / mean_size);
    edges.push_back(quantile(1.0 - pos_rate));
  } else {
    for (int k = 1; k <= cfg.max_label; ++k)
      edges.push_back(quantile(double(k) / double(cfg.max_label + 1)));
  }

  const auto gold_of = [&](double dot) {
    int g = 0;
    for (double e : edges)
      if (dot > e) ++g;
    return double(g);
  };

  std::size_t inst_counter = 0;
  for (int b = 0; b < cfg.n_bags; ++b) {
    Bag bag;
    bag.id = "b" + std::to_string(b);
    bag.agg = cfg.agg;
    std::vector<double> golds(sizes[b]);
    for (int i = 0; i < sizes[b]; ++i) {
      Instance x;
      x.id = bag.id + "_s" + std::to_string(i);
      x.embedding = std::move(embeddings[b][i]);
      double gold = gold_of(dots[inst_counter++]);
      if (nrng.uniform() < cfg.noise) {
        gold = cfg.label_kind == LabelKind::Binary
                   ? 1.0 - gold
                   : double(nrng.uniform_int(0, cfg.max_label));
      }
      // Informative with probability prior_quality, pure noise otherwise;
      // both draws happen so the stream position is data-independent.
      const double coin = prng.uniform();
      const double u = prng.uniform();
      const double informative = 0.1 + 0.8 * (gold / scale);
      x.external_prior = coin < cfg.prior_quality ? informative : u;
      x.gold_label = gold;
      golds[i] = gold;
      bag.instances.push_back(std::move(x));
    }
    bag.bag_label = exact_aggregate(cfg.agg, golds);
    // Context points along the hidden rule, jittered per bag.
    std::vector<double> ctx(cfg.d);
    const double jitter = 0.3 / std::sqrt(double(cfg.d));
    for (int k = 0; k < cfg.d; ++k)
      ctx[k] = w[k] / wnorm + jitter * crng.normal();
    bag.context_embedding = std::move(ctx);
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          std::size_t n_train) {
  if (n_train > ds.bags.size())
    throw std::invalid_argument("split larger than dataset");
  Dataset train, test;
  train.d = test.d = ds.d;
  train.label_kind = test.label_kind = ds.label_kind;
  train.max_label = test.max_label = ds.max_label;
  train.bags.assign(ds.bags.begin(), ds.bags.begin() + n_train);
  test.bags.assign(ds.bags.begin() + n_train, ds.bags.end());
  return {std::move(train), std::move(test)};
}

std::vector<PreferencePair> sample_preferences(const Dataset& ds, int count,
                                               std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("negative pair count");
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < ds.bags.size(); ++i)
    if (ds.bags[i].bag_label) labeled.push_back(i);
  if (labeled.size() < 2)
    throw std::runtime_error("need at least two labeled bags to form pairs");

  Rng rng(seed);
  std::vector<PreferencePair> pairs;
  pairs.reserve(count);
  std::size_t stale = 0;
  while (int(pairs.size()) < count) {
    const auto hi = std::int64_t(labeled.size()) - 1;
    const auto a = labeled[rng.uniform_int(0, hi)];
    const auto b = labeled[rng.uniform_int(0, hi)];
    const double ya = *ds.bags[a].bag_label;
    const double yb = *ds.bags[b].bag_label;
    if (a == b || ya == yb) {
      if (++stale > 1000 * std::size_t(count) + 10000)
        throw std::runtime_error(
            "cannot sample preference pairs: bag labels lack contrast");
      continue;
    }
    pairs.push_back({ds.bags[a].id, ds.bags[b].id, ya > yb ? 1 : -1});
  }
  return pairs;
}

std::vector<ConsistencyIssue> validate_consistency(const Dataset& ds) {
  std::vector<ConsistencyIssue> issues;
  for (const Bag& b : ds.bags) {
    if (!b.bag_label)
      throw std::runtime_error("bag \"" + b.id + "\" has no label");
    std::vector<double> golds;
    golds.reserve(b.instances.size());
    for (const Instance& x : b.instances) {
      if (!x.gold_label)
        throw std::runtime_error("instance \"" + x.id + "\" has no gold label");
      golds.push_back(*x.gold_label);
    }
    const double expected = exact_aggregate(b.agg, golds);
    if (std::abs(expected - *b.bag_label) > 1e-9)
      issues.push_back({b.id, expected, *b.bag_label});
  }
  return issues;
}

}  // namespace fractal
