#include "fbmlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <set>

#include "fbmlab/quadrature.hpp"

namespace fbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

int total_order(const int* counts, int d) {
  int s = 0;
  for (int c = 0; c < d; ++c) s += counts[c];
  return s;
}

// Single-axis derivative: nonzero only if every other count vanishes.
int single_axis(const int* counts, int d, int r) {
  for (int c = 0; c < d; ++c)
    if (c != r && counts[c] != 0) return -1;
  return counts[r];
}

double sin_derivative(double x, int j) {
  switch (j % 4) {
    case 0: return std::sin(x);
    case 1: return std::cos(x);
    case 2: return -std::sin(x);
    default: return -std::cos(x);
  }
}

double tanh_derivative(double x, int j) {
  const double T = std::tanh(x), S = 1.0 - T * T;
  switch (j) {
    case 0: return T;
    case 1: return S;
    case 2: return -2.0 * T * S;
    case 3: return S * (6.0 * T * T - 2.0);
    default: throw ValidationError("tanh drift: derivative order above 3");
  }
}

// d^j/du^j exp(-u^2/2) = (-1)^j He_j(u) exp(-u^2/2).
double gauss_derivative(double u, int j) {
  const double g = std::exp(-0.5 * u * u);
  switch (j) {
    case 0: return g;
    case 1: return -u * g;
    case 2: return (u * u - 1.0) * g;
    case 3: return -(u * u * u - 3.0 * u) * g;
    default: throw ValidationError("gauss_bump drift: derivative order above 3");
  }
}

double ball_volume(int d) { return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

// ---------------------------------------------------------------- smooth

class SmoothDrift final : public Drift {
 public:
  enum Type { Zero, Constant, Linear, Sine, Tanh, GaussBump, SineTime };

  SmoothDrift(const std::string& name, Type type, int d, double a, double c, double lambda, double sup, double l1)
      : Drift(name, d, DriftKind::Smooth, DriftShape::General, sup, l1, kMaxDriftOrder, {}, kInf),
        type_(type), a_(a), c_(c), lambda_(lambda) {}

  void eval(double t, const double* x, double* out) const override {
    std::vector<int> zero(dim(), 0);
    partial(t, x, zero.data(), out);
  }

  void partial(double t, const double* x, const int* counts, double* out) const override {
    const int d = dim();
    const int k = total_order(counts, d);
    for (int r = 0; r < d; ++r) out[r] = 0.0;
    switch (type_) {
      case Zero: return;
      case Constant:
        if (k == 0)
          for (int r = 0; r < d; ++r) out[r] = c_;
        return;
      case Linear:
        for (int r = 0; r < d; ++r) {
          const int j = single_axis(counts, d, r);
          if (j == 0) out[r] = lambda_ * x[r];
          if (j == 1) out[r] = lambda_;
        }
        return;
      case Sine:
      case SineTime: {
        const double tf = type_ == SineTime ? std::cos(2.0 * kPi * t) : 1.0;
        for (int r = 0; r < d; ++r) {
          const int j = single_axis(counts, d, r);
          if (j >= 0) out[r] = a_ * tf * sin_derivative(x[r], j);
        }
        return;
      }
      case Tanh:
        for (int r = 0; r < d; ++r) {
          const int j = single_axis(counts, d, r);
          if (j >= 0) out[r] = a_ * tanh_derivative(x[r], j);
        }
        return;
      case GaussBump: {
        double g = a_;
        for (int c = 0; c < d; ++c) g *= gauss_derivative(x[c], counts[c]);
        for (int r = 0; r < d; ++r) out[r] = g;
        return;
      }
    }
  }

 private:
  Type type_;
  double a_, c_, lambda_;
};

// ---------------------------------------------------------------- singular

struct Piece {
  double lo, hi, value;
};

std::vector<double> piece_breaks(const std::vector<Piece>& pieces) {
  std::set<double> s;
  for (const auto& p : pieces) {
    s.insert(p.lo);
    s.insert(p.hi);
  }
  return {s.begin(), s.end()};
}

double piece_value(const std::vector<Piece>& pieces, double u) {
  for (const auto& p : pieces)
    if (u >= p.lo && u < p.hi) return p.value;
  if (!pieces.empty() && u == pieces.back().hi) return pieces.back().value;
  return 0.0;
}

// b_r(x) = e_r prod_c P(x_c) with P piecewise constant.
class SeparableStepDrift final : public Drift {
 public:
  SeparableStepDrift(const std::string& name, int d, std::vector<Piece> pieces, std::vector<double> e, double sup,
                     double l1)
      : Drift(name, d, DriftKind::Singular, DriftShape::Separable, sup, l1, 0, piece_breaks(pieces), 1.0),
        pieces_(std::move(pieces)), e_(std::move(e)) {}

  void eval(double, const double* x, double* out) const override {
    double p = 1.0;
    for (int c = 0; c < dim(); ++c) p *= piece_value(pieces_, x[c]);
    for (int r = 0; r < dim(); ++r) out[r] = e_[r] * p;
  }

  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<double>& direction() const { return e_; }

 private:
  std::vector<Piece> pieces_;
  std::vector<double> e_;
};

class RadialJumpDrift final : public Drift {
 public:
  explicit RadialJumpDrift(int d)
      : Drift("radial_jump", d, DriftKind::Singular, DriftShape::Radial, 1.0, ball_volume(d), 0, {-1.0, 1.0}, 1.0),
        e_(d, 1.0 / std::sqrt(static_cast<double>(d))) {}

  void eval(double, const double* x, double* out) const override {
    double r2 = 0.0;
    for (int c = 0; c < dim(); ++c) r2 += x[c] * x[c];
    const double v = r2 <= 1.0 ? 1.0 : 0.0;
    for (int r = 0; r < dim(); ++r) out[r] = e_[r] * v;
  }

 private:
  std::vector<double> e_;
};

// ---------------------------------------------------------------- mollified

// chi(u) = F(3 - 2|u|/n): 1 on [-n,n], 0 outside [-2n,2n].
double cutoff_derivative(double u, int n, int j) {
  const double y = std::abs(u) / n;
  if (j == 0) {
    if (y <= 1.0) return 1.0;
    if (y >= 2.0) return 0.0;
    return quad::mollifier::cdf(3.0 - 2.0 * y);
  }
  if (y <= 1.0 || y >= 2.0) return 0.0;
  const double sgn = u > 0 ? 1.0 : -1.0;
  return std::pow(-2.0 * sgn / n, j) * quad::mollifier::density(3.0 - 2.0 * y, j - 1);
}

double binom_small(int n, int k) {
  static const int table[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  return table[n][k];
}

// Multi-index Leibniz rule for (prod_c chi(x_c)) * M(x); M_partial fills the
// vector-valued partial of M for a given count vector.
template <class F>
void leibniz_with_cutoff(int d, int n, const double* x, const int* counts, double* out, F&& M_partial) {
  for (int r = 0; r < d; ++r) out[r] = 0.0;
  std::vector<int> beta(d, 0), rest(d);
  std::vector<double> m(d);
  while (true) {
    double coef = 1.0;
    for (int c = 0; c < d && coef != 0.0; ++c)
      coef *= binom_small(counts[c], beta[c]) * cutoff_derivative(x[c], n, beta[c]);
    if (coef != 0.0) {
      for (int c = 0; c < d; ++c) rest[c] = counts[c] - beta[c];
      M_partial(rest.data(), m.data());
      for (int r = 0; r < d; ++r) out[r] += coef * m[r];
    }
    int c = 0;
    while (c < d && beta[c] == counts[c]) beta[c++] = 0;
    if (c == d) break;
    ++beta[c];
  }
}

std::vector<double> mollified_breaks(const std::vector<double>& base, int n, double support) {
  std::set<double> s;
  const double h = 1.0 / n;
  for (double b : base) {
    s.insert(b - h);
    s.insert(b + h);
  }
  for (double c : {-2.0 * n, -1.0 * n, 1.0 * n, 2.0 * n})
    if (std::abs(c) < support) s.insert(c);
  return {s.begin(), s.end()};
}

class MollifiedSeparable final : public Drift {
 public:
  MollifiedSeparable(const SeparableStepDrift& base, int n)
      : Drift(base.name() + "@" + std::to_string(n), base.dim(), DriftKind::Mollified, DriftShape::Separable,
              base.sup_norm(), base.l1_norm(), kMaxDriftOrder,
              mollified_breaks(base.breakpoints(), n, std::min(1.0 + 1.0 / n, 2.0 * n)),
              std::min(1.0 + 1.0 / n, 2.0 * n)),
        pieces_(base.pieces()), e_(base.direction()), n_(n) {}

  void eval(double t, const double* x, double* out) const override {
    std::vector<int> zero(dim(), 0);
    partial(t, x, zero.data(), out);
  }

  void partial(double, const double* x, const int* counts, double* out) const override {
    double p = 1.0;
    for (int c = 0; c < dim() && p != 0.0; ++c) p *= profile(x[c], counts[c]);
    for (int r = 0; r < dim(); ++r) out[r] = e_[r] * p;
  }

  const std::vector<double>& direction() const { return e_; }

 private:
  // j-th derivative of the mollified profile before the cutoff.
  double smoothed(double u, int j) const {
    const double n = n_;
    double s = 0.0;
    for (const auto& pc : pieces_) {
      const double a = n * (u - pc.lo), b = n * (u - pc.hi);
      if (j == 0)
        s += pc.value * (quad::mollifier::cdf(a) - quad::mollifier::cdf(b));
      else
        s += pc.value * std::pow(n, j) * (quad::mollifier::density(a, j - 1) - quad::mollifier::density(b, j - 1));
    }
    return s;
  }

  double profile(double u, int j) const {
    if (j > kMaxDriftOrder) throw ValidationError("mollified drift: derivative order above 3");
    double s = 0.0;
    for (int i = 0; i <= j; ++i) {
      const double c = cutoff_derivative(u, n_, j - i);
      if (c != 0.0) s += binom_small(j, i) * smoothed(u, i) * c;
    }
    return s;
  }

  std::vector<Piece> pieces_;
  std::vector<double> e_;
  int n_;
};

// Disk indicator in d=2 convolved with the product bump: the x2 direction is
// integrated exactly through the mollifier CDF, x1 by Gauss-Legendre split at
// the kinks of the disk boundary.
class MollifiedRadial2 final : public Drift {
 public:
  explicit MollifiedRadial2(int n)
      : Drift("radial_jump@" + std::to_string(n), 2, DriftKind::Mollified, DriftShape::General, 1.0, kPi, 1,
              mollified_breaks({-1.0, 1.0}, n, std::min(1.0 + 1.0 / n, 2.0 * n)), std::min(1.0 + 1.0 / n, 2.0 * n)),
        n_(n), e_(1.0 / std::sqrt(2.0)) {}

  void eval(double t, const double* x, double* out) const override {
    const int zero[2] = {0, 0};
    partial(t, x, zero, out);
  }

  void partial(double, const double* x, const int* counts, double* out) const override {
    if (counts[0] + counts[1] > 1) throw ValidationError("radial_jump mollified in d=2: derivatives above order 1");
    leibniz_with_cutoff(2, n_, x, counts, out, [&](const int* k, double* m) {
      const double v = e_ * raw(x[0], x[1], k[0], k[1]);
      m[0] = v;
      m[1] = v;
    });
  }

 private:
  // Slice of the mollified disk at abscissa u in the x2 direction.
  double slice(double u, double x2, int j2) const {
    if (std::abs(u) >= 1.0) return 0.0;
    const double w = std::sqrt((1.0 - u) * (1.0 + u));
    const double n = n_;
    if (j2 == 0) return quad::mollifier::cdf(n * (x2 + w)) - quad::mollifier::cdf(n * (x2 - w));
    return n * (quad::mollifier::density(n * (x2 + w)) - quad::mollifier::density(n * (x2 - w)));
  }

  double raw(double x1, double x2, int j1, int j2) const {
    // u = x1 - y/n with y in [-1,1]; kinks where u = +-1.
    std::vector<double> cuts{-1.0, 1.0};
    for (double edge : {-1.0, 1.0}) {
      const double y = n_ * (x1 - edge);
      if (y > -1.0 && y < 1.0) cuts.push_back(y);
    }
    std::sort(cuts.begin(), cuts.end());
    const quad::Rule& g = quad::gauss_legendre01(24);
    double s = 0.0, mass = 0.0;
    for (size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double lo = cuts[k], hi = cuts[k + 1];
      for (size_t q = 0; q < g.x.size(); ++q) {
        const double y = lo + (hi - lo) * g.x[q];
        const double kern = j1 == 0 ? quad::mollifier::density(y) : n_ * quad::mollifier::density(y, 1);
        s += (hi - lo) * g.w[q] * kern * slice(x1 - y / n_, x2, j2);
        mass += (hi - lo) * g.w[q] * quad::mollifier::density(y);
      }
    }
    // Dividing by the rule's own mass keeps |value| <= 1.
    return s / mass;
  }

  int n_;
  double e_;
};

// Generic mollification for smooth bases (d <= 2) by tensor Gauss-Legendre
// over the bump support; derivatives are convolutions of base derivatives.
class MollifiedGeneric final : public Drift {
 public:
  MollifiedGeneric(DriftPtr base, int n)
      : Drift(base->name() + "@" + std::to_string(n), base->dim(), DriftKind::Mollified, DriftShape::General,
              base->sup_norm(), base->l1_norm(), std::min(base->max_order(), kMaxDriftOrder),
              mollified_breaks(base->breakpoints(), n, std::min(base->support_radius() + 1.0 / n, 2.0 * n)),
              std::min(base->support_radius() + 1.0 / n, 2.0 * n)),
        base_(std::move(base)), n_(n) {
    if (dim() > 2) throw ValidationError("mollify: generic mollification supports d <= 2");
    const quad::Rule& g = quad::gauss_legendre01(kNodes);
    for (int k = 0; k < kNodes; ++k) {
      const double y = -1.0 + 2.0 * g.x[k];
      y_.push_back(y);
      w_.push_back(2.0 * g.w[k] * quad::mollifier::density(y));
    }
    // Unit mass keeps the discrete convolution a probability average.
    double mass = 0.0;
    for (double w : w_) mass += w;
    for (double& w : w_) w /= mass;
  }

  void eval(double t, const double* x, double* out) const override {
    std::vector<int> zero(dim(), 0);
    partial(t, x, zero.data(), out);
  }

  void partial(double t, const double* x, const int* counts, double* out) const override {
    leibniz_with_cutoff(dim(), n_, x, counts, out, [&](const int* k, double* m) { convolve(t, x, k, m); });
  }

 private:
  static constexpr int kNodes = 32;

  void convolve(double t, const double* x, const int* k, double* m) const {
    const int d = dim();
    for (int r = 0; r < d; ++r) m[r] = 0.0;
    double z[2], v[2];
    if (d == 1) {
      for (int a = 0; a < kNodes; ++a) {
        z[0] = x[0] - y_[a] / n_;
        base_->partial(t, z, k, v);
        m[0] += w_[a] * v[0];
      }
      return;
    }
    for (int a = 0; a < kNodes; ++a)
      for (int b = 0; b < kNodes; ++b) {
        z[0] = x[0] - y_[a] / n_;
        z[1] = x[1] - y_[b] / n_;
        base_->partial(t, z, k, v);
        const double w = w_[a] * w_[b];
        m[0] += w * v[0];
        m[1] += w * v[1];
      }
  }

  DriftPtr base_;
  int n_;
  std::vector<double> y_, w_;
};

// ---------------------------------------------------------------- numerics

double direction_norm(const Drift& b) {
  const std::vector<double>* e = nullptr;
  if (auto s = dynamic_cast<const SeparableStepDrift*>(&b)) e = &s->direction();
  if (auto m = dynamic_cast<const MollifiedSeparable*>(&b)) e = &m->direction();
  if (!e) throw ValidationError("numeric_norms: separable shape without a direction vector");
  double s = 0.0;
  for (double v : *e) s += v * v;
  return std::sqrt(s);
}

std::vector<double> panel_nodes(std::vector<double> breaks, double L, int per_unit, std::vector<double>* weights) {
  breaks.push_back(-L);
  breaks.push_back(L);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const quad::Rule& g = quad::gauss_legendre01(8);
  std::vector<double> x;
  weights->clear();
  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = std::max(breaks[k], -L), hi = std::min(breaks[k + 1], L);
    if (!(hi > lo)) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) * per_unit)));
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p)
      for (size_t q = 0; q < g.x.size(); ++q) {
        x.push_back(lo + h * (p + g.x[q]));
        weights->push_back(h * g.w[q]);
      }
  }
  return x;
}

double euclid(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

void verify_registration(const Drift& b) {
  static std::set<std::pair<std::string, int>> verified;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (verified.count({b.name(), b.dim()})) return;
  }
  if (b.dim() <= 3) {
    const NumericNorms n = numeric_norms(b);
    if (std::abs(n.sup - b.sup_norm()) > 1e-4 * std::max(1.0, b.sup_norm()) ||
        std::abs(n.l1 - b.l1_norm()) > 1e-4 * std::max(1.0, b.l1_norm()))
      throw NumericError("drift " + b.name() + ": declared norms disagree with numerical integration");
  }
  std::lock_guard<std::mutex> lock(mu);
  verified.insert({b.name(), b.dim()});
}

}  // namespace

// ---------------------------------------------------------------- Drift

Drift::Drift(std::string name, int d, DriftKind kind, DriftShape shape, double sup, double l1, int max_order,
             std::vector<double> breaks, double support)
    : name_(std::move(name)), d_(d), kind_(kind), shape_(shape), sup_(sup), l1_(l1), max_order_(max_order),
      breaks_(std::move(breaks)), support_(support) {}

bool Drift::bounded() const { return std::isfinite(sup_); }

void Drift::partial(double t, const double* x, const int* counts, double* out) const {
  if (total_order(counts, d_) == 0) {
    eval(t, x, out);
    return;
  }
  throw ValidationError("drift " + name_ + " has no spatial derivatives");
}

void Drift::derivative(double t, const double* x, int order, double* out) const {
  if (order < 1 || order > max_order_)
    throw ValidationError("drift " + name_ + ": derivative order " + std::to_string(order) + " unavailable");
  const int d = d_;
  std::vector<int> idx(order, 0), counts(d);
  std::vector<double> v(d);
  size_t stride = 1;
  for (int k = 0; k < order; ++k) stride *= d;
  while (true) {
    std::fill(counts.begin(), counts.end(), 0);
    size_t flat = 0;
    for (int k = 0; k < order; ++k) {
      ++counts[idx[k]];
      flat = flat * d + idx[k];
    }
    partial(t, x, counts.data(), v.data());
    for (int r = 0; r < d; ++r) out[r * stride + flat] = v[r];
    int k = order - 1;
    while (k >= 0 && idx[k] == d - 1) idx[k--] = 0;
    if (k < 0) break;
    ++idx[k];
  }
}

std::vector<std::string> smooth_catalog() {
  return {"zero", "constant", "linear", "sine", "tanh", "gauss_bump", "sine_time"};
}

std::vector<std::string> singular_catalog() { return {"sign_indicator", "radial_jump", "checkerboard"}; }

bool catalog_supports(const std::string& name, int d) {
  if (d < 1) return false;
  if (name == "sign_indicator") return d == 1;
  for (const auto& s : smooth_catalog())
    if (s == name) return true;
  return name == "radial_jump" || name == "checkerboard";
}

DriftPtr make_drift(const std::string& name, int d, const json& params) {
  if (!catalog_supports(name, d)) throw ValidationError("unknown drift '" + name + "' for d=" + std::to_string(d));
  auto param = [&](const char* key, double def) {
    if (!params.is_object() || !params.contains(key)) return def;
    if (!params[key].is_number()) throw ConfigError(std::string("drift parameter ") + key + " must be a number");
    return params[key].get<double>();
  };
  const double a = param("a", 1.0), c = param("c", 0.5), lambda = param("lambda", -1.0);
  const double rd = std::sqrt(static_cast<double>(d));
  using S = SmoothDrift;
  if (name == "zero") return std::make_shared<S>(name, S::Zero, d, a, c, lambda, 0.0, 0.0);
  if (name == "constant") return std::make_shared<S>(name, S::Constant, d, a, c, lambda, std::abs(c) * rd, c == 0 ? 0.0 : kInf);
  if (name == "linear")
    return std::make_shared<S>(name, S::Linear, d, a, c, lambda, lambda == 0 ? 0.0 : kInf, lambda == 0 ? 0.0 : kInf);
  if (name == "sine") return std::make_shared<S>(name, S::Sine, d, a, c, lambda, std::abs(a) * rd, a == 0 ? 0.0 : kInf);
  if (name == "tanh") return std::make_shared<S>(name, S::Tanh, d, a, c, lambda, std::abs(a) * rd, a == 0 ? 0.0 : kInf);
  if (name == "gauss_bump")
    return std::make_shared<S>(name, S::GaussBump, d, a, c, lambda, std::abs(a) * rd,
                               std::abs(a) * rd * std::pow(2.0 * kPi, 0.5 * d));
  if (name == "sine_time")
    return std::make_shared<S>(name, S::SineTime, d, a, c, lambda, std::abs(a) * rd, a == 0 ? 0.0 : kInf);

  DriftPtr b;
  if (name == "sign_indicator") {
    b = std::make_shared<SeparableStepDrift>(name, 1, std::vector<Piece>{{-1.0, 0.0, -1.0}, {0.0, 1.0, 1.0}},
                                             std::vector<double>{1.0}, 1.0, 2.0);
  } else if (name == "radial_jump") {
    if (d == 1)
      b = std::make_shared<SeparableStepDrift>(name, 1, std::vector<Piece>{{-1.0, 1.0, 1.0}}, std::vector<double>{1.0},
                                               1.0, 2.0);
    else
      b = std::make_shared<RadialJumpDrift>(d);
  } else {
    b = std::make_shared<SeparableStepDrift>(
        name, d, std::vector<Piece>{{-1.0, -0.5, 1.0}, {-0.5, 0.0, -1.0}, {0.0, 0.5, 1.0}, {0.5, 1.0, -1.0}},
        std::vector<double>(d, 1.0 / rd), 1.0, std::pow(2.0, d));
  }
  verify_registration(*b);
  return b;
}

DriftPtr mollify(const DriftPtr& b, int n) {
  if (n <= 0) throw ValidationError("mollify: level must be positive");
  if (b->kind() == DriftKind::Mollified) throw ValidationError("mollify: drift is already mollified");
  if (auto s = std::dynamic_pointer_cast<const SeparableStepDrift>(b)) return std::make_shared<MollifiedSeparable>(*s, n);
  if (std::dynamic_pointer_cast<const RadialJumpDrift>(b)) {
    if (b->dim() != 2) throw ValidationError("mollify: radial_jump supported for d <= 2");
    return std::make_shared<MollifiedRadial2>(n);
  }
  return std::make_shared<MollifiedGeneric>(b, n);
}

NumericNorms numeric_norms(const Drift& b, double t) {
  const int d = b.dim();
  NumericNorms out;
  const double L = std::isfinite(b.support_radius()) ? b.support_radius() : 10.0;
  std::vector<double> v(d), x(d);
  // Sup over a lattice.
  const int per_axis = d == 1 ? 20001 : d == 2 ? 401 : 41;
  std::vector<int> idx(d, 0);
  while (true) {
    for (int c = 0; c < d; ++c) x[c] = -L + 2.0 * L * idx[c] / (per_axis - 1);
    b.eval(t, x.data(), v.data());
    out.sup = std::max(out.sup, euclid(v));
    int c = 0;
    while (c < d && idx[c] == per_axis - 1) idx[c++] = 0;
    if (c == d) break;
    ++idx[c];
  }
  if (!std::isfinite(b.l1_norm())) {
    out.l1 = kInf;
    return out;
  }
  std::vector<double> w;
  if (b.shape() == DriftShape::Radial) {
    // |b| depends on |x| only: integrate along the first axis ray.
    const std::vector<double> r = panel_nodes(b.breakpoints(), L, 64, &w);
    const double area = 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
    double s = 0.0;
    for (size_t k = 0; k < r.size(); ++k) {
      if (r[k] <= 0.0) continue;
      std::fill(x.begin(), x.end(), 0.0);
      x[0] = r[k];
      b.eval(t, x.data(), v.data());
      s += w[k] * euclid(v) * std::pow(r[k], d - 1);
    }
    out.l1 = area * s;
    return out;
  }
  const std::vector<double> nodes = panel_nodes(b.breakpoints(), L, 64, &w);
  if (b.shape() == DriftShape::Separable) {
    // |b(x)| = |e| prod_c |P(x_c)|: one axis integral with the other
    // coordinates frozen at a reference point, raised to the power d.
    std::fill(x.begin(), x.end(), 0.25);
    b.eval(t, x.data(), v.data());
    const double ref = euclid(v);  // |e| |P(0.25)|^d
    if (ref == 0.0) throw NumericError("numeric_norms: separable profile vanishes at the reference point");
    double axis = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      x[0] = nodes[k];
      b.eval(t, x.data(), v.data());
      axis += w[k] * euclid(v);
    }
    // axis = ref * int|P| / |P(0.25)|; with |P(0.25)| = (ref/|e|)^(1/d).
    const double e = direction_norm(b);
    const double p_ref = std::pow(ref / e, 1.0 / d);
    out.l1 = e * std::pow(axis / ref * p_ref, d);
    return out;
  }
  if (d == 1) {
    for (size_t k = 0; k < nodes.size(); ++k) {
      x[0] = nodes[k];
      b.eval(t, x.data(), v.data());
      out.l1 += w[k] * euclid(v);
    }
    return out;
  }
  if (d == 2) {
    for (size_t i = 0; i < nodes.size(); ++i)
      for (size_t j = 0; j < nodes.size(); ++j) {
        x[0] = nodes[i];
        x[1] = nodes[j];
        b.eval(t, x.data(), v.data());
        out.l1 += w[i] * w[j] * euclid(v);
      }
    return out;
  }
  throw ValidationError("numeric_norms: L1 integration supports d <= 2 for general shapes");
}

double l1_distance(const Drift& a, const Drift& b, const std::vector<double>& times) {
  if (a.dim() != b.dim()) throw ValidationError("l1_distance: dimension mismatch");
  const int d = a.dim();
  if (d > 2) throw ValidationError("l1_distance: supports d <= 2");
  double L = std::max(a.support_radius(), b.support_radius());
  if (!std::isfinite(L)) {
    if (d == 2) throw ValidationError("l1_distance: d = 2 requires compactly supported drifts");
    L = 12.0;
  }
  std::vector<double> breaks = a.breakpoints();
  breaks.insert(breaks.end(), b.breakpoints().begin(), b.breakpoints().end());
  std::vector<double> w;
  const std::vector<double> nodes = panel_nodes(breaks, L, d == 1 ? 256 : 48, &w);
  std::vector<double> x(d), va(d), vb(d), diff(d);
  double worst = 0.0;
  for (double t : times) {
    double s = 0.0;
    if (d == 1) {
      for (size_t k = 0; k < nodes.size(); ++k) {
        x[0] = nodes[k];
        a.eval(t, x.data(), va.data());
        b.eval(t, x.data(), vb.data());
        s += w[k] * std::abs(va[0] - vb[0]);
      }
    } else {
      for (size_t i = 0; i < nodes.size(); ++i)
        for (size_t j = 0; j < nodes.size(); ++j) {
          x[0] = nodes[i];
          x[1] = nodes[j];
          a.eval(t, x.data(), va.data());
          b.eval(t, x.data(), vb.data());
          for (int c = 0; c < d; ++c) diff[c] = va[c] - vb[c];
          s += w[i] * w[j] * euclid(diff);
        }
    }
    worst = std::max(worst, s);
  }
  return worst;
}

// ---------------------------------------------------------------- Euler

void euler_solve_into(const Drift& b, const double* x0, const TimeGrid& g, const double* noise, double* out) {
  const int d = b.dim(), N = g.N;
  const double dt = g.dt();
  std::vector<double> v(d);
  for (int c = 0; c < d; ++c) out[c] = x0[c];
  for (int i = 0; i < N; ++i) {
    const double* X = out + static_cast<size_t>(i) * d;
    double* Y = out + static_cast<size_t>(i + 1) * d;
    b.eval(g.node(i), X, v.data());
    for (int c = 0; c < d; ++c)
      Y[c] = X[c] + v[c] * dt + (noise[static_cast<size_t>(i + 1) * d + c] - noise[static_cast<size_t>(i) * d + c]);
  }
}

SolutionPath euler_solve(const Drift& b, const std::vector<double>& x0, const TimeGrid& g, const double* noise,
                         std::string noise_label, int path_index) {
  if (static_cast<int>(x0.size()) != b.dim()) throw ValidationError("euler_solve: x0 dimension mismatch");
  SolutionPath s{g, b.dim(), x0, b.name(), std::move(noise_label), path_index, {}};
  s.values.resize(static_cast<size_t>(g.N + 1) * b.dim());
  euler_solve_into(b, x0.data(), g, noise, s.values.data());
  for (double v : s.values)
    if (!std::isfinite(v)) throw NumericError("euler_solve: non-finite state");
  return s;
}

ConvergenceTable strong_convergence_study(const DriftPtr& b, const std::vector<int>& levels,
                                          const FbmEnsemble& noise, const std::vector<double>& x0, int t_index,
                                          int workers) {
  if (noise.n_paths == 0) throw ValidationError("strong_convergence_study: empty ensemble");
  if (noise.d != b->dim() || static_cast<int>(x0.size()) != b->dim())
    throw ValidationError("strong_convergence_study: dimension mismatch");
  if (t_index < 0 || t_index > noise.grid.N) throw ValidationError("strong_convergence_study: t index out of range");
  const int L = static_cast<int>(levels.size());
  if (L < 2) throw ValidationError("strong_convergence_study: need at least two levels");
  std::vector<DriftPtr> drifts;
  for (int n : levels) drifts.push_back(mollify(b, n));
  const int d = b->dim(), N = noise.grid.N, P = noise.n_paths;
  std::vector<double> finals(static_cast<size_t>(P) * L * d);
  parallel_for(P, workers > 0 ? workers : default_workers(), [&](int p) {
    std::vector<double> X(static_cast<size_t>(N + 1) * d);
    for (int l = 0; l < L; ++l) {
      euler_solve_into(*drifts[l], x0.data(), noise.grid, noise.path(p), X.data());
      for (int c = 0; c < d; ++c) finals[(static_cast<size_t>(p) * L + l) * d + c] = X[static_cast<size_t>(t_index) * d + c];
    }
  });
  ConvergenceTable tab;
  tab.levels = levels;
  tab.mse.assign(static_cast<size_t>(L) * L, 0.0);
  tab.mse_se.assign(static_cast<size_t>(L) * L, 0.0);
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j) {
      MeanAccumulator acc;
      for (int p = 0; p < P; ++p) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
          const double diff = finals[(static_cast<size_t>(p) * L + i) * d + c] - finals[(static_cast<size_t>(p) * L + j) * d + c];
          s += diff * diff;
        }
        acc.push(s);
      }
      tab.mse[i * L + j] = tab.mse[j * L + i] = acc.mean;
      tab.mse_se[i * L + j] = tab.mse_se[j * L + i] = acc.se();
    }
  for (int i = 0; i + 1 < L; ++i) {
    int arg = i + 1;
    for (int j = i + 2; j < L; ++j)
      if (tab.mse[i * L + j] > tab.mse[i * L + arg]) arg = j;
    tab.cauchy.push_back(tab.mse[i * L + arg]);
    tab.cauchy_se.push_back(tab.mse_se[i * L + arg]);
  }
  return tab;
}

}  // namespace fbm
