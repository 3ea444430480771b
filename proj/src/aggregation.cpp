#include "fractal/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fractal {
namespace {

void check_nonempty(std::span<const double> scores) {
  if (scores.empty())
    throw std::invalid_argument("aggregate: empty score vector");
}

// Clamp into [eps, 1-eps]; gradients pass straight through.
std::vector<double> clamp_scores(std::span<const double> scores,
                                 bool& clamped) {
  std::vector<double> out(scores.begin(), scores.end());
  for (double& s : out) {
    const double c =
        std::min(std::max(s, kScoreClampEps), 1.0 - kScoreClampEps);
    if (c != s) clamped = true;
    s = c;
  }
  return out;
}

AggResult extremum(std::span<const double> scores, bool want_min) {
  AggResult r;
  r.value = scores[0];
  for (double s : scores)
    if (want_min ? s < r.value : s > r.value) r.value = s;
  r.gradient.assign(scores.size(), 0.0);
  std::size_t hits = 0;
  for (double s : scores)
    if (s == r.value) ++hits;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] == r.value) r.gradient[i] = 1.0 / double(hits);
  return r;
}

// prod(p), gradient via prefix/suffix products so zeros need no division.
AggResult product(std::span<const double> p) {
  const std::size_t n = p.size();
  AggResult r;
  r.gradient.assign(n, 0.0);
  std::vector<double> suffix(n + 1, 1.0);
  for (std::size_t i = n; i > 0; --i) suffix[i - 1] = suffix[i] * p[i - 1];
  r.value = suffix[0];
  double prefix = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.gradient[i] = prefix * suffix[i + 1];
    prefix *= p[i];
  }
  return r;
}

// -(1/r) ln((1/n) sum exp(-r p_i)), tared at the minimum. Exact on constant
// input because the normalization cancels the bag size.
AggResult lse_min(std::span<const double> p, double r_sharp) {
  const std::size_t n = p.size();
  double m = p[0];
  for (double s : p) m = std::min(m, s);
  double sum = 0.0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(-r_sharp * (p[i] - m));
    sum += w[i];
  }
  AggResult r;
  r.value = m - std::log(sum / double(n)) / r_sharp;
  r.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.gradient[i] = w[i] / sum;
  return r;
}

AggResult lse_max(std::span<const double> p, double r_sharp) {
  const std::size_t n = p.size();
  double m = p[0];
  for (double s : p) m = std::max(m, s);
  double sum = 0.0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(r_sharp * (p[i] - m));
    sum += w[i];
  }
  AggResult r;
  r.value = m + std::log(sum / double(n)) / r_sharp;
  r.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.gradient[i] = w[i] / sum;
  return r;
}

// S/(1+S) with S = sum q/(1-q).
AggResult isr_max(std::span<const double> q) {
  const std::size_t n = q.size();
  double s = 0.0;
  for (double v : q) s += v / (1.0 - v);
  AggResult r;
  r.value = s / (1.0 + s);
  const double dv_ds = 1.0 / ((1.0 + s) * (1.0 + s));
  r.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = 1.0 - q[i];
    r.gradient[i] = dv_ds / (c * c);
  }
  return r;
}

// Noisy-OR 1 - prod(1-q).
AggResult nor_max(std::span<const double> q) {
  std::vector<double> comp(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) comp[i] = 1.0 - q[i];
  AggResult r = product(comp);
  r.value = 1.0 - r.value;
  // d/dq_i (1 - prod(1-q)) = prod_{j != i} (1-q_j), already in gradient.
  return r;
}

// Power mean ((1/n) sum q^r)^(1/r).
AggResult gm_max(std::span<const double> q, double r_sharp) {
  const std::size_t n = q.size();
  double a = 0.0;
  for (double v : q) a += std::pow(v, r_sharp);
  a /= double(n);
  AggResult r;
  r.value = std::pow(a, 1.0 / r_sharp);
  const double outer = std::pow(a, 1.0 / r_sharp - 1.0) / double(n);
  r.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    r.gradient[i] = outer * std::pow(q[i], r_sharp - 1.0);
  return r;
}

// Each family has one direct orientation; the other is its complement
// 1 - f(1 - p), whose inner chain rule cancels the outer sign so the
// gradient carries over unchanged.
AggResult complement(AggResult r) {
  r.value = 1.0 - r.value;
  return r;
}

std::vector<double> one_minus(std::span<const double> p) {
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = 1.0 - p[i];
  return q;
}

}  // namespace

const char* to_string(Approx a) {
  switch (a) {
    case Approx::Hard: return "hard";
    case Approx::Mult: return "mult";
    case Approx::Lse: return "lse";
    case Approx::Isr: return "isr";
    case Approx::Nor: return "nor";
    case Approx::Gm: return "gm";
  }
  throw std::logic_error("unknown Approx");
}

Approx approx_from_string(const std::string& s) {
  if (s == "hard") return Approx::Hard;
  if (s == "mult") return Approx::Mult;
  if (s == "lse") return Approx::Lse;
  if (s == "isr") return Approx::Isr;
  if (s == "nor") return Approx::Nor;
  if (s == "gm") return Approx::Gm;
  throw std::invalid_argument("unknown approximation: " + s);
}

void AggConfig::validate() const {
  if (!(sharpness > 0.0) || !std::isfinite(sharpness))
    throw std::invalid_argument("sharpness must be positive and finite");
}

AggResult soft_min(std::span<const double> scores, const AggConfig& cfg) {
  check_nonempty(scores);
  cfg.validate();
  switch (cfg.approx) {
    case Approx::Hard:
      return extremum(scores, true);
    case Approx::Lse:
      return lse_min(scores, cfg.sharpness);
    default:
      break;
  }
  bool clamped = false;
  const std::vector<double> p = clamp_scores(scores, clamped);
  AggResult r;
  switch (cfg.approx) {
    case Approx::Mult: r = product(p); break;
    case Approx::Isr: r = complement(isr_max(one_minus(p))); break;
    case Approx::Nor: r = complement(nor_max(one_minus(p))); break;
    case Approx::Gm: r = complement(gm_max(one_minus(p), cfg.sharpness)); break;
    default: throw std::logic_error("unreachable");
  }
  r.clamped = clamped;
  return r;
}

AggResult soft_max(std::span<const double> scores, const AggConfig& cfg) {
  check_nonempty(scores);
  cfg.validate();
  switch (cfg.approx) {
    case Approx::Hard:
      return extremum(scores, false);
    case Approx::Lse:
      return lse_max(scores, cfg.sharpness);
    default:
      break;
  }
  bool clamped = false;
  const std::vector<double> p = clamp_scores(scores, clamped);
  AggResult r;
  switch (cfg.approx) {
    case Approx::Mult: r = complement(product(one_minus(p))); break;
    case Approx::Isr: r = isr_max(p); break;
    case Approx::Nor: r = nor_max(p); break;
    case Approx::Gm: r = gm_max(p, cfg.sharpness); break;
    default: throw std::logic_error("unreachable");
  }
  r.clamped = clamped;
  return r;
}

AggResult avg(std::span<const double> scores) {
  check_nonempty(scores);
  AggResult r;
  double sum = 0.0;
  for (double s : scores) sum += s;
  r.value = sum / double(scores.size());
  r.gradient.assign(scores.size(), 1.0 / double(scores.size()));
  return r;
}

AggResult aggregate(std::span<const double> scores, const AggConfig& cfg) {
  switch (cfg.kind) {
    case AggKind::Min: return soft_min(scores, cfg);
    case AggKind::Max: return soft_max(scores, cfg);
    case AggKind::Avg: return avg(scores);
  }
  throw std::logic_error("unknown AggKind");
}

}  // namespace fractal
