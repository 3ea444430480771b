#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fractal/priors.hpp"
#include "fractal/rng.hpp"
#include "testutil.hpp"

#include "doctest.h"

using namespace fractal;

namespace {

std::string thrown_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("priors") {

TEST_CASE("cosine prior oracles") {
  const std::vector<double> e1{1.0, 0.0};
  const std::vector<double> diag{1.0, 1.0};
  CHECK(cos_prior(e1, diag) == doctest::Approx(0.8535533905932737).epsilon(1e-14));

  const std::vector<double> tilted{std::sqrt(3.0), 1.0};
  CHECK(cos_prior(tilted, e1) == doctest::Approx(0.9330127018922193).epsilon(1e-14));

  CHECK(cos_prior(e1, e1) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> neg{-1.0, 0.0};
  CHECK(cos_prior(e1, neg) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> orth{0.0, 1.0};
  CHECK(cos_prior(e1, orth) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("cosine prior is scale invariant and stays in the unit interval") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(4), c(4);
    for (auto& v : x) v = rng.normal();
    for (auto& v : c) v = rng.normal();
    const double p = cos_prior(x, c);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    std::vector<double> x2(4);
    for (std::size_t i = 0; i < 4; ++i) x2[i] = 3.5 * x[i];
    CHECK(cos_prior(x2, c) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("correlation prior oracles") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 2.0, 4.0};
  CHECK(corr_prior(a, b) == doctest::Approx(0.9909902530309829).epsilon(1e-14));

  CHECK(corr_prior(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> rev{3.0, 2.0, 1.0};
  CHECK(corr_prior(a, rev) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("correlation prior ignores affine shifts") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(5), z(5);
    for (auto& v : x) v = rng.normal();
    for (auto& v : z) v = rng.normal();
    const double p = corr_prior(x, z);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    std::vector<double> shifted(5);
    for (std::size_t i = 0; i < 5; ++i) shifted[i] = 2.0 * x[i] + 7.0;
    CHECK(corr_prior(shifted, z) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("prior input validation") {
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<double> constant{3.0, 3.0};
  const std::vector<double> one{1.0};
  const std::vector<double> three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(cos_prior(x, zero), std::invalid_argument);
  CHECK_THROWS_AS(cos_prior(zero, x), std::invalid_argument);
  CHECK_THROWS_AS(cos_prior(x, three), std::invalid_argument);
  CHECK_THROWS_AS(corr_prior(x, constant), std::invalid_argument);
  CHECK_THROWS_AS(corr_prior(constant, x), std::invalid_argument);
  CHECK_THROWS_AS(corr_prior(one, one), std::invalid_argument);
  CHECK_THROWS_AS(corr_prior(x, three), std::invalid_argument);
}

TEST_CASE("cosine prior builder aligns with the dataset layout") {
  Dataset ds = testutil::tiny_dataset(
      2, AggKind::Min,
      {{{1.0, 0.0}, {0.0, 1.0}}, {{std::sqrt(3.0), 1.0}}});
  ds.bags[0].context_embedding = std::vector<double>{1.0, 1.0};
  ds.bags[1].context_embedding = std::vector<double>{1.0, 0.0};

  const InstancePriors priors = build_cosine_priors(ds);
  CHECK(priors.kind == PriorKind::CosineContext);
  REQUIRE(priors.values.size() == 2);
  REQUIRE(priors.values[0].size() == 2);
  REQUIRE(priors.values[1].size() == 1);
  CHECK(priors.values[0][0] == doctest::Approx(0.8535533905932737).epsilon(1e-14));
  CHECK(priors.values[0][1] == doctest::Approx(0.8535533905932737).epsilon(1e-14));
  CHECK(priors.values[1][0] == doctest::Approx(0.9330127018922193).epsilon(1e-14));

  ds.bags[1].context_embedding.reset();
  const std::string msg =
      thrown_message([&] { (void)build_cosine_priors(ds); });
  CHECK(msg.find("b1") != std::string::npos);
}

TEST_CASE("correlation prior builder emits symmetric unit-diagonal matrices") {
  const Dataset ds = testutil::tiny_dataset(
      3, AggKind::Min,
      {{{1.0, 2.0, 3.0}, {1.0, 2.0, 4.0}, {3.0, 2.0, 1.0}}});
  const PairwisePriors priors = build_correlation_priors(ds);
  REQUIRE(priors.matrices.size() == 1);
  const auto& m = priors.matrices[0];
  REQUIRE(m.size() == 9);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m[i * 3 + i] == 1.0);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(m[i * 3 + j] == doctest::Approx(m[j * 3 + i]).epsilon(1e-15));
  }
  CHECK(m[0 * 3 + 1] == doctest::Approx(0.9909902530309829).epsilon(1e-14));
  CHECK(m[0 * 3 + 2] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("external prior loader requires a value on every instance") {
  Dataset ds = testutil::tiny_dataset(
      2, AggKind::Min, {{{1.0, 0.0}, {0.0, 1.0}}});
  ds.bags[0].instances[0].external_prior = 0.9;
  ds.bags[0].instances[1].external_prior = 0.2;
  const InstancePriors priors = load_external_priors(ds);
  CHECK(priors.kind == PriorKind::ExternalFile);
  CHECK(priors.values[0] == std::vector<double>{0.9, 0.2});

  ds.bags[0].instances[1].external_prior.reset();
  const std::string msg =
      thrown_message([&] { (void)load_external_priors(ds); });
  CHECK(msg.find("b0_s1") != std::string::npos);
}

TEST_CASE("build_priors assembles only the requested blocks") {
  Dataset ds = testutil::tiny_dataset(
      2, AggKind::Min, {{{1.0, 0.0}, {0.0, 1.0}}});
  ds.bags[0].context_embedding = std::vector<double>{1.0, 1.0};
  const PriorSet none = build_priors(ds, false, false, false);
  CHECK_FALSE(none.cosine.has_value());
  CHECK_FALSE(none.correlation.has_value());
  CHECK_FALSE(none.external.has_value());
  const PriorSet some = build_priors(ds, true, true, false);
  CHECK(some.cosine.has_value());
  CHECK(some.correlation.has_value());
  CHECK_FALSE(some.external.has_value());
  CHECK_THROWS_AS(build_priors(ds, false, false, true), std::runtime_error);
}

}  // TEST_SUITE
