#include "fractal/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "fractal/rng.hpp"

#include "json.hpp"

namespace fractal {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void write_f64_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

double read_f64_le(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) throw std::runtime_error("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const char* to_string(HeadKind head) {
  switch (head) {
    case HeadKind::Sigmoid: return "sigmoid";
    case HeadKind::ScaledSigmoid: return "scaled_sigmoid";
  }
  throw std::logic_error("unknown HeadKind");
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sigmoid") return HeadKind::Sigmoid;
  if (s == "scaled_sigmoid") return HeadKind::ScaledSigmoid;
  throw std::invalid_argument("unknown head kind: " + s);
}

ScorerModel::ScorerModel(int d, int h1, int h2, HeadKind head,
                         double label_scale)
    : d_(d), h1_(h1), h2_(h2), head_(head), label_scale_(label_scale) {
  if (d < 1 || h1 < 1 || h2 < 1)
    throw std::invalid_argument("model dimensions must be positive");
  if (!(label_scale > 0.0))
    throw std::invalid_argument("label scale must be positive");
  params_.assign(off_b3() + 1, 0.0);
}

ScorerModel ScorerModel::init(std::uint64_t seed, int d, int h1, int h2,
                              HeadKind head, double label_scale) {
  ScorerModel m(d, h1, h2, head, label_scale);
  m.init_seed_ = seed;
  Rng rng(seed);
  const auto fill = [&](std::size_t off, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (std::size_t i = 0; i < count; ++i)
      m.params_[off + i] = rng.uniform(-bound, bound);
  };
  fill(m.off_w1(), std::size_t(h1) * d, d);
  fill(m.off_w2(), std::size_t(h2) * h1, h1);
  fill(m.off_w3(), std::size_t(h2), h2);
  return m;
}

double ScorerModel::forward(std::span<const double> x) const {
  return forward_cached(x).score;
}

ForwardCache ScorerModel::forward_cached(std::span<const double> x) const {
  if (int(x.size()) != d_)
    throw std::invalid_argument("input dimension mismatch");
  ForwardCache c;
  c.input.assign(x.begin(), x.end());
  c.pre1.resize(h1_);
  c.act1.resize(h1_);
  const double* w1 = params_.data() + off_w1();
  const double* b1 = params_.data() + off_b1();
  for (int j = 0; j < h1_; ++j) {
    double z = b1[j];
    const double* row = w1 + std::size_t(j) * d_;
    for (int k = 0; k < d_; ++k) z += row[k] * x[k];
    c.pre1[j] = z;
    c.act1[j] = z > 0.0 ? z : 0.0;
  }
  c.pre2.resize(h2_);
  c.act2.resize(h2_);
  const double* w2 = params_.data() + off_w2();
  const double* b2 = params_.data() + off_b2();
  for (int j = 0; j < h2_; ++j) {
    double z = b2[j];
    const double* row = w2 + std::size_t(j) * h1_;
    for (int k = 0; k < h1_; ++k) z += row[k] * c.act1[k];
    c.pre2[j] = z;
    c.act2[j] = z > 0.0 ? z : 0.0;
  }
  const double* w3 = params_.data() + off_w3();
  double z = params_[off_b3()];
  for (int k = 0; k < h2_; ++k) z += w3[k] * c.act2[k];
  c.pre_out = z;
  const double scale =
      head_ == HeadKind::ScaledSigmoid ? label_scale_ : 1.0;
  c.score = scale * sigmoid(z);
  c.valid = true;
  return c;
}

void ScorerModel::backward(GradientTape& tape, double upstream,
                           const ForwardCache& cache) const {
  if (!cache.valid || int(cache.input.size()) != d_ ||
      int(cache.act1.size()) != h1_ || int(cache.act2.size()) != h2_)
    throw std::invalid_argument("backward: cache does not match model");
  if (tape.size() != parameter_count())
    throw std::invalid_argument("backward: tape size mismatch");

  double* g = tape.grads().data();
  const double scale =
      head_ == HeadKind::ScaledSigmoid ? label_scale_ : 1.0;
  const double sig = sigmoid(cache.pre_out);
  const double dz3 = upstream * scale * sig * (1.0 - sig);

  const double* w3 = params_.data() + off_w3();
  double* gw3 = g + off_w3();
  g[off_b3()] += dz3;
  std::vector<double> da2(h2_);
  for (int j = 0; j < h2_; ++j) {
    gw3[j] += dz3 * cache.act2[j];
    da2[j] = dz3 * w3[j];
  }

  const double* w2 = params_.data() + off_w2();
  double* gw2 = g + off_w2();
  double* gb2 = g + off_b2();
  std::vector<double> da1(h1_, 0.0);
  for (int j = 0; j < h2_; ++j) {
    const double dz2 = cache.pre2[j] > 0.0 ? da2[j] : 0.0;
    if (dz2 == 0.0) continue;
    gb2[j] += dz2;
    double* grow = gw2 + std::size_t(j) * h1_;
    const double* row = w2 + std::size_t(j) * h1_;
    for (int k = 0; k < h1_; ++k) {
      grow[k] += dz2 * cache.act1[k];
      da1[k] += dz2 * row[k];
    }
  }

  double* gw1 = g + off_w1();
  double* gb1 = g + off_b1();
  for (int j = 0; j < h1_; ++j) {
    const double dz1 = cache.pre1[j] > 0.0 ? da1[j] : 0.0;
    if (dz1 == 0.0) continue;
    gb1[j] += dz1;
    double* grow = gw1 + std::size_t(j) * d_;
    for (int k = 0; k < d_; ++k) grow[k] += dz1 * cache.input[k];
  }
}

void ScorerModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  nlohmann::ordered_json header = {
      {"format", "fractal-scorer"}, {"version", 1},
      {"d", d_},                    {"h1", h1_},
      {"h2", h2_},                  {"head", to_string(head_)},
      {"label_scale", label_scale_}, {"init_seed", init_seed_},
      {"params", params_.size()},
  };
  os << header.dump() << '\n';
  for (double v : params_) write_f64_le(os, v);
  if (!os) throw std::runtime_error("write failed: " + path);
}

ScorerModel ScorerModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("checkpoint missing header: " + path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad checkpoint header in " + path + ": " +
                             e.what());
  }
  if (h.value("format", "") != "fractal-scorer")
    throw std::runtime_error("not a scorer checkpoint: " + path);
  ScorerModel m(h.at("d").get<int>(), h.at("h1").get<int>(),
                h.at("h2").get<int>(),
                head_kind_from_string(h.at("head").get<std::string>()),
                h.at("label_scale").get<double>());
  m.init_seed_ = h.at("init_seed").get<std::uint64_t>();
  const auto n = h.at("params").get<std::size_t>();
  if (n != m.params_.size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < n; ++i) m.params_[i] = read_f64_le(is);
  return m;
}

}  // namespace fractal
