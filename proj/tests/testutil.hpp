#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fractal/dataset.hpp"
#include "fractal/model.hpp"

#include "doctest.h"

namespace testutil {

// Finite-difference agreement: relative 1e-4 or absolute 1e-7, whichever is
// looser, absorbing FD truncation error on steep coordinates.
inline bool grad_close(double analytic, double fd) {
  const double diff = std::abs(analytic - fd);
  return diff <= 1e-4 * std::max(std::abs(analytic), std::abs(fd)) ||
         diff <= 1e-7;
}

// Central differences over a scalar function of the model's parameters.
inline std::vector<double> fd_model_gradient(
    fractal::ScorerModel& m, const std::function<double()>& loss,
    double h = 1e-5) {
  std::vector<double> fd(m.parameter_count());
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    fd[i] = (up - down) / (2.0 * h);
  }
  return fd;
}

inline void check_gradient_matches_fd(fractal::ScorerModel& m,
                                      std::span<const double> analytic,
                                      const std::function<double()>& loss) {
  const std::vector<double> fd = fd_model_gradient(m, loss);
  REQUIRE(fd.size() == analytic.size());
  std::size_t bad = 0;
  for (std::size_t i = 0; i < fd.size(); ++i)
    if (!grad_close(analytic[i], fd[i])) {
      ++bad;
      CAPTURE(i);
      CHECK(grad_close(analytic[i], fd[i]));
    }
  CHECK(bad == 0);
}

// d-dimensional bag-of-embeddings dataset with given gold labels; bag labels
// derived by the exact aggregation.
inline fractal::Dataset tiny_dataset(
    int d, fractal::AggKind agg,
    const std::vector<std::vector<std::vector<double>>>& bag_embeddings,
    const std::vector<std::vector<double>>& bag_golds = {}) {
  fractal::Dataset ds;
  ds.d = d;
  for (std::size_t b = 0; b < bag_embeddings.size(); ++b) {
    fractal::Bag bag;
    bag.id = "b" + std::to_string(b);
    bag.agg = agg;
    for (std::size_t i = 0; i < bag_embeddings[b].size(); ++i) {
      fractal::Instance x;
      x.id = bag.id + "_s" + std::to_string(i);
      x.embedding = bag_embeddings[b][i];
      if (!bag_golds.empty()) x.gold_label = bag_golds[b][i];
      bag.instances.push_back(std::move(x));
    }
    if (!bag_golds.empty())
      bag.bag_label = fractal::exact_aggregate(agg, bag_golds[b]);
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

// All-zero weights with the head bias at logit(score): every input maps to
// `score` through the sigmoid head.
inline fractal::ScorerModel constant_model(int d, double score) {
  fractal::ScorerModel m(d, 2, 2, fractal::HeadKind::Sigmoid, 1.0);
  m.parameters().back() = std::log(score / (1.0 - score));
  return m;
}

// d=1 passthrough: score(x) = sigmoid(relu(x)), so positive logits survive.
inline fractal::ScorerModel passthrough_model() {
  fractal::ScorerModel m(1, 1, 1, fractal::HeadKind::Sigmoid, 1.0);
  auto p = m.parameters();
  p[0] = 1.0;  // w1
  p[2] = 1.0;  // w2
  p[4] = 1.0;  // w3
  return m;
}

}  // namespace testutil
