#pragma once

#include <span>
#include <string>
#include <vector>

#include "fractal/dataset.hpp"

namespace fractal {

// Differentiable stand-ins for MIN/MAX over instance scores.
//   Hard  - exact min/max; gradient mass only on the extremal coordinates,
//           split equally on ties. Valid for any real scores.
//   Mult  - product of probabilities (soft AND).
//   Lse   - 1/n-normalized log-sum-exp, exact on constant input. Valid for
//           any real scores.
//   Isr   - sum of odds ratios S/(1+S), applied through complements for min.
//   Nor   - noisy-OR 1-prod(1-q), applied through complements for min.
//   Gm    - generalized (power) mean, applied through complements for min.
// Mult/Isr/Nor/Gm require scores in (0,1).
enum class Approx { Hard, Mult, Lse, Isr, Nor, Gm };

const char* to_string(Approx a);
Approx approx_from_string(const std::string& s);

struct AggConfig {
  AggKind kind = AggKind::Min;
  Approx approx = Approx::Hard;
  double sharpness = 10.0;  // r, used by Lse and Gm; must be > 0

  void validate() const;
};

struct AggResult {
  double value = 0.0;
  std::vector<double> gradient;  // d(value)/d(score_i)
  bool clamped = false;  // a probability-family input sat within 1e-6 of 0/1
};

// Guard width applied before odds-ratio style transforms.
inline constexpr double kScoreClampEps = 1e-6;

AggResult soft_min(std::span<const double> scores, const AggConfig& cfg);
AggResult soft_max(std::span<const double> scores, const AggConfig& cfg);
AggResult avg(std::span<const double> scores);

// Dispatch on cfg.kind; Avg ignores the approximation.
AggResult aggregate(std::span<const double> scores, const AggConfig& cfg);

}  // namespace fractal
