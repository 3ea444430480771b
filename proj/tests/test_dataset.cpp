#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fractal/dataset.hpp"
#include "testutil.hpp"

#include "doctest.h"

using namespace fractal;

namespace {

std::string temp_path(const char* stem) {
  return std::string("ds_test_") + stem + ".jsonl";
}

void write_lines(const std::string& path,
                 std::initializer_list<const char*> lines) {
  std::ofstream os(path);
  for (const char* l : lines) os << l << '\n';
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string load_error(const std::string& path) {
  try {
    (void)load_dataset(path);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

constexpr const char* kHeader = R"({"d": 2, "label_kind": "binary", "L": null})";
constexpr const char* kBag0 =
    R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": [{"id": "b0_s0", "embedding": [0.5, -1.0], "gold_label": 1, "external_prior": 0.8}]})";

SyntheticConfig synth_config(AggKind agg, LabelKind kind = LabelKind::Binary) {
  SyntheticConfig cfg;
  cfg.seed = 5;
  cfg.n_bags = 40;
  cfg.bag_size_min = 2;
  cfg.bag_size_max = 6;
  cfg.d = 8;
  cfg.agg = agg;
  cfg.label_kind = kind;
  cfg.max_label = kind == LabelKind::Integer ? 4 : 1;
  return cfg;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("exact aggregate oracles") {
  const std::vector<double> v{0.2, 0.8, 0.5};
  CHECK(exact_aggregate(AggKind::Min, v) == 0.2);
  CHECK(exact_aggregate(AggKind::Max, v) == 0.8);
  CHECK(exact_aggregate(AggKind::Avg, v) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS(exact_aggregate(AggKind::Min, std::vector<double>{}));
}

TEST_CASE("enum strings round-trip") {
  for (AggKind k : {AggKind::Min, AggKind::Max, AggKind::Avg})
    CHECK(agg_kind_from_string(to_string(k)) == k);
  for (LabelKind k : {LabelKind::Binary, LabelKind::Integer})
    CHECK(label_kind_from_string(to_string(k)) == k);
  CHECK_THROWS(agg_kind_from_string("median"));
  CHECK_THROWS(label_kind_from_string("real"));
}

TEST_CASE("synthetic generation is deterministic") {
  const SyntheticConfig cfg = synth_config(AggKind::Min);
  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(cfg);
  CHECK(a == b);

  const std::string pa = temp_path("det_a"), pb = temp_path("det_b");
  save_dataset(a, pa);
  save_dataset(b, pb);
  CHECK(slurp(pa) == slurp(pb));
  std::remove(pa.c_str());
  std::remove(pb.c_str());

  SyntheticConfig other = cfg;
  other.seed = 6;
  CHECK_FALSE(generate_synthetic(other) == a);
}

TEST_CASE("synthetic data is consistent for every aggregation and label kind") {
  for (AggKind agg : {AggKind::Min, AggKind::Max, AggKind::Avg}) {
    for (LabelKind kind : {LabelKind::Binary, LabelKind::Integer}) {
      SyntheticConfig cfg = synth_config(agg, kind);
      cfg.noise = 0.2;
      const Dataset ds = generate_synthetic(cfg);
      CHECK(validate_consistency(ds).empty());
      CHECK(ds.bags.size() == 40);
      CHECK(ds.d == 8);
      for (const Bag& b : ds.bags) {
        CHECK(b.agg == agg);
        CHECK(b.bag_label.has_value());
        CHECK(b.context_embedding.has_value());
        CHECK(b.instances.size() >= 2);
        CHECK(b.instances.size() <= 6);
      }
    }
  }
}

TEST_CASE("synthetic labels cover both classes") {
  const Dataset ds = generate_synthetic(synth_config(AggKind::Min));
  int pos_inst = 0, neg_inst = 0, pos_bag = 0, neg_bag = 0;
  for (const Bag& b : ds.bags) {
    (*b.bag_label == 1.0 ? pos_bag : neg_bag)++;
    for (const Instance& x : b.instances)
      (*x.gold_label == 1.0 ? pos_inst : neg_inst)++;
  }
  CHECK(pos_inst > 10);
  CHECK(neg_inst > 10);
  CHECK(pos_bag > 5);
  CHECK(neg_bag > 5);
}

TEST_CASE("perfect-quality priors sit at the calibrated anchors") {
  SyntheticConfig cfg = synth_config(AggKind::Min);
  cfg.prior_quality = 1.0;
  cfg.noise = 0.0;
  const Dataset ds = generate_synthetic(cfg);
  for (const Bag& b : ds.bags)
    for (const Instance& x : b.instances) {
      REQUIRE(x.external_prior.has_value());
      const double want = *x.gold_label == 1.0 ? 0.9 : 0.1;
      CHECK(*x.external_prior == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("integer synthetic labels are integral and in range") {
  const Dataset ds =
      generate_synthetic(synth_config(AggKind::Min, LabelKind::Integer));
  CHECK(ds.label_kind == LabelKind::Integer);
  CHECK(ds.max_label == 4);
  CHECK(ds.label_scale() == 4.0);
  for (const Bag& b : ds.bags) {
    double lo = 4.0;
    for (const Instance& x : b.instances) {
      const double g = *x.gold_label;
      CHECK(g >= 0.0);
      CHECK(g <= 4.0);
      CHECK(g == double(int(g)));
      lo = std::min(lo, g);
    }
    CHECK(*b.bag_label == lo);
  }
}

TEST_CASE("save and load round-trip the dataset") {
  SyntheticConfig cfg = synth_config(AggKind::Max);
  cfg.noise = 0.1;
  cfg.prior_quality = 0.7;
  const Dataset ds = generate_synthetic(cfg);
  const std::string path = temp_path("roundtrip");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(back == ds);
  CHECK_THROWS_AS((void)load_dataset(path, LabelKind::Integer),
                  std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("preference pairs round-trip and sample deterministically") {
  const Dataset ds = generate_synthetic(synth_config(AggKind::Min));
  const auto pairs = sample_preferences(ds, 30, 17);
  CHECK(pairs.size() == 30);
  CHECK(pairs == sample_preferences(ds, 30, 17));
  CHECK_FALSE(pairs == sample_preferences(ds, 30, 18));

  const BagIndex index = build_bag_index(ds);
  for (const PreferencePair& p : pairs) {
    CHECK(p.bag_a != p.bag_b);
    const double ya = *ds.bags[index.at(p.bag_a)].bag_label;
    const double yb = *ds.bags[index.at(p.bag_b)].bag_label;
    CHECK(ya != yb);
    CHECK(p.label == (ya > yb ? 1 : -1));
  }

  const std::string path = temp_path("pairs");
  save_preferences(pairs, path);
  CHECK(load_preferences(path, ds) == pairs);
  std::remove(path.c_str());
}

TEST_CASE("preference sampling needs label contrast") {
  Dataset ds = testutil::tiny_dataset(
      1, AggKind::Min, {{{0.1}}, {{0.2}}, {{0.3}}},
      {{1.0}, {1.0}, {1.0}});
  CHECK_THROWS_AS((void)sample_preferences(ds, 5, 1), std::runtime_error);
  ds.bags[0].bag_label = 0.0;
  ds.bags[0].instances[0].gold_label = 0.0;
  CHECK(sample_preferences(ds, 5, 1).size() == 5);
}

TEST_CASE("split keeps the header and partitions the bags") {
  const Dataset ds = generate_synthetic(synth_config(AggKind::Avg));
  const auto [train, test] = split_dataset(ds, 30);
  CHECK(train.bags.size() == 30);
  CHECK(test.bags.size() == 10);
  CHECK(train.d == ds.d);
  CHECK(test.label_kind == ds.label_kind);
  CHECK(train.bags[0] == ds.bags[0]);
  CHECK(test.bags[0] == ds.bags[30]);
  CHECK_THROWS_AS(split_dataset(ds, 41), std::invalid_argument);
}

TEST_CASE("consistency validation reports corrupted bags") {
  Dataset ds = generate_synthetic(synth_config(AggKind::Min));
  CHECK(validate_consistency(ds).empty());
  ds.bags[3].bag_label = 1.0 - *ds.bags[3].bag_label;
  const auto issues = validate_consistency(ds);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].bag_id == ds.bags[3].id);
  CHECK(issues[0].actual == *ds.bags[3].bag_label);

  ds.bags[3].instances[0].gold_label.reset();
  CHECK_THROWS_AS((void)validate_consistency(ds), std::runtime_error);
}

TEST_CASE("loader reports malformed input with line numbers") {
  const std::string path = temp_path("bad");

  write_lines(path, {});
  CHECK(load_error(path).find("missing dataset header") != std::string::npos);

  write_lines(path, {R"({"label_kind": "binary"})"});
  CHECK(load_error(path).find("header must declare") != std::string::npos);

  write_lines(path, {R"({"d": 0, "label_kind": "binary"})"});
  CHECK(load_error(path).find("positive integer") != std::string::npos);

  write_lines(path, {R"({"d": 2, "label_kind": "integer", "L": null})"});
  CHECK(load_error(path).find("positive L") != std::string::npos);

  write_lines(path, {R"({"d": 2, "label_kind": "binary", "L": 3})"});
  CHECK(load_error(path).find("L = 1") != std::string::npos);

  write_lines(path, {kHeader, "{not json"});
  CHECK(load_error(path).find(":2: malformed JSON") != std::string::npos);

  write_lines(path, {kHeader, kBag0, kBag0});
  CHECK(load_error(path).find(":3: duplicate bag id \"b0\"") !=
        std::string::npos);

  write_lines(
      path,
      {kHeader, kBag0,
       R"({"id": "b1", "agg": "max", "label": 0, "context_embedding": null, "instances": [{"id": "b1_s0", "embedding": [0, 0], "gold_label": 0, "external_prior": null}]})"});
  CHECK(load_error(path).find("aggregation kind differs") != std::string::npos);

  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5], "gold_label": 1, "external_prior": null}]})"});
  CHECK(load_error(path).find("dimension 1, expected 2") != std::string::npos);

  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": 0.5, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5, 1], "gold_label": 1, "external_prior": null}]})"});
  CHECK(load_error(path).find("must be 0 or 1") != std::string::npos);

  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5, 1], "gold_label": 2, "external_prior": null}]})"});
  CHECK(load_error(path).find("out of range") != std::string::npos);

  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5, 1], "gold_label": 1, "external_prior": 1.5}]})"});
  CHECK(load_error(path).find("out of [0, 1]") != std::string::npos);

  write_lines(path,
              {kHeader,
               R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": []})"});
  CHECK(load_error(path).find("non-empty instances") != std::string::npos);

  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": 1, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5, 1]}, {"id": "s", "embedding": [0.5, 1]}]})"});
  CHECK(load_error(path).find("duplicate instance id \"s\"") !=
        std::string::npos);

  std::remove(path.c_str());
  CHECK_THROWS_AS((void)load_dataset("no_such_file.jsonl"),
                  std::runtime_error);
}

TEST_CASE("lenient fields: missing label and context load as absent") {
  const std::string path = temp_path("lenient");
  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "min", "label": null, "context_embedding": null, "instances": [{"id": "s", "embedding": [0.5, 1], "gold_label": null, "external_prior": null}]})"});
  const Dataset ds = load_dataset(path);
  CHECK_FALSE(ds.bags[0].bag_label.has_value());
  CHECK_FALSE(ds.bags[0].context_embedding.has_value());
  CHECK_FALSE(ds.bags[0].instances[0].gold_label.has_value());
  CHECK_FALSE(ds.bags[0].instances[0].external_prior.has_value());
  std::remove(path.c_str());
}

TEST_CASE("avg bags admit fractional binary bag labels") {
  const std::string path = temp_path("avg");
  write_lines(
      path,
      {kHeader,
       R"({"id": "b0", "agg": "avg", "label": 0.5, "context_embedding": null, "instances": [{"id": "s0", "embedding": [0.5, 1], "gold_label": 0, "external_prior": null}, {"id": "s1", "embedding": [1, 0.5], "gold_label": 1, "external_prior": null}]})"});
  const Dataset ds = load_dataset(path);
  CHECK(*ds.bags[0].bag_label == 0.5);
  CHECK(validate_consistency(ds).empty());
  std::remove(path.c_str());
}

TEST_CASE("preference loader rejects bad records") {
  const Dataset ds = testutil::tiny_dataset(
      1, AggKind::Min, {{{0.1}}, {{0.2}}}, {{1.0}, {0.0}});
  const std::string path = temp_path("badpairs");

  write_lines(path, {R"({"bag_a": "b0", "bag_b": "zzz", "label": 1})"});
  CHECK_THROWS_AS((void)load_preferences(path, ds), std::runtime_error);

  write_lines(path, {R"({"bag_a": "b0", "bag_b": "b1", "label": 0})"});
  CHECK_THROWS_AS((void)load_preferences(path, ds), std::runtime_error);

  write_lines(path, {R"({"bag_a": "b0", "bag_b": "b0", "label": 1})"});
  CHECK_THROWS_AS((void)load_preferences(path, ds), std::runtime_error);

  write_lines(path, {R"({"bag_a": "b0", "bag_b": "b1", "label": -1})"});
  const auto pairs = load_preferences(path, ds);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].label == -1);
  std::remove(path.c_str());
}

TEST_CASE("dataset helpers") {
  const Dataset ds = testutil::tiny_dataset(
      1, AggKind::Max, {{{0.1}, {0.2}}, {{0.3}}});
  CHECK(ds.instance_count() == 3);
  CHECK(ds.agg() == AggKind::Max);
  const BagIndex index = build_bag_index(ds);
  CHECK(index.at("b0") == 0);
  CHECK(index.at("b1") == 1);
  CHECK(Dataset{}.label_scale() == 1.0);
  CHECK_THROWS_AS((void)Dataset{}.agg(), std::runtime_error);
}

}  // TEST_SUITE
