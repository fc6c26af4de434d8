#include "fbmlab/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace fbm::quad {

namespace {

Rule fixed_rule(const gsl_integration_fixed_type* type, int n, double alpha, double beta) {
  gsl_set_error_handler_off();
  gsl_integration_fixed_workspace* ws = gsl_integration_fixed_alloc(type, n, 0.0, 1.0, alpha, beta);
  if (!ws) throw std::runtime_error("quadrature: GSL rule allocation failed");
  Rule r;
  r.x.assign(gsl_integration_fixed_nodes(ws), gsl_integration_fixed_nodes(ws) + n);
  r.w.assign(gsl_integration_fixed_weights(ws), gsl_integration_fixed_weights(ws) + n);
  gsl_integration_fixed_free(ws);
  return r;
}

std::mutex cache_mutex;

}  // namespace

const Rule& gauss_legendre01(int n) {
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, fixed_rule(gsl_integration_fixed_legendre, n, 0.0, 0.0)).first;
  return it->second;
}

const Rule& gauss_jacobi01(int n, double a, double b) {
  if (!(a > -1.0) || !(b > -1.0)) throw std::invalid_argument("gauss_jacobi01: exponents must exceed -1");
  static std::map<std::tuple<int, double, double>, Rule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  const auto key = std::make_tuple(n, a, b);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, fixed_rule(gsl_integration_fixed_jacobi, n, a, b)).first;
  return it->second;
}

Rule composite_legendre(double lo, double hi, int panels, int points_per_panel) {
  const Rule& g = gauss_legendre01(points_per_panel);
  Rule r;
  r.x.reserve(static_cast<size_t>(panels) * points_per_panel);
  r.w.reserve(r.x.capacity());
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (size_t k = 0; k < g.x.size(); ++k) {
      r.x.push_back(a + h * g.x[k]);
      r.w.push_back(h * g.w[k]);
    }
  }
  return r;
}

// ---------------------------------------------------------------- bump

namespace bump {
namespace {

using Poly = std::vector<double>;  // coefficients, lowest degree first

Poly mul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Poly add(Poly a, const Poly& b) {
  if (b.size() > a.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

Poly deriv(const Poly& a) {
  if (a.size() <= 1) return {0.0};
  Poly r(a.size() - 1);
  for (size_t i = 1; i < a.size(); ++i) r[i - 1] = a[i] * static_cast<double>(i);
  return r;
}

// The q-th derivative is P_q(x) (1-x^2)^(-2q) exp(-1/(1-x^2)) with
// P_{q+1} = P_q' Q^2 + 4 q x P_q Q - 2 x P_q,  Q = 1 - x^2.
const std::array<Poly, kMaxOrder + 1>& polys() {
  static const std::array<Poly, kMaxOrder + 1> table = [] {
    std::array<Poly, kMaxOrder + 1> p;
    const Poly Q{1.0, 0.0, -1.0};
    const Poly Q2 = mul(Q, Q);
    const Poly X{0.0, 1.0};
    p[0] = {1.0};
    for (int q = 0; q < kMaxOrder; ++q) {
      Poly t1 = mul(deriv(p[q]), Q2);
      Poly t2 = mul(mul(X, p[q]), Q);
      for (double& c : t2) c *= 4.0 * q;
      Poly t3 = mul(X, p[q]);
      for (double& c : t3) c *= -2.0;
      p[q + 1] = add(add(t1, t2), t3);
    }
    return p;
  }();
  return table;
}

double horner(const Poly& p, double x) {
  double r = 0.0;
  for (size_t i = p.size(); i-- > 0;) r = r * x + p[i];
  return r;
}

}  // namespace

double value(double x) { return derivative(x, 0); }

double derivative(double x, int order) {
  if (order < 0 || order > kMaxOrder) throw std::invalid_argument("bump::derivative: order out of range");
  if (!(std::abs(x) < 1.0)) return 0.0;
  const double Q = (1.0 - x) * (1.0 + x);
  return horner(polys()[order], x) * std::exp(-1.0 / Q - 2.0 * order * std::log(Q));
}

double integral() {
  static const double z = [] {
    const Rule r = composite_legendre(-1.0, 1.0, 256, 16);
    double s = 0.0;
    for (size_t k = 0; k < r.x.size(); ++k) s += r.w[k] * value(r.x[k]);
    return s;
  }();
  return z;
}

double abs_derivative_integral(int order) {
  static std::array<double, kMaxOrder + 1> cache{};
  static std::once_flag once;
  std::call_once(once, [] {
    const Rule r = composite_legendre(-1.0, 1.0, 2048, 8);
    for (int q = 0; q <= kMaxOrder; ++q) {
      double s = 0.0;
      for (size_t k = 0; k < r.x.size(); ++k) s += r.w[k] * std::abs(derivative(r.x[k], q));
      cache[q] = s;
    }
  });
  return cache.at(order);
}

}  // namespace bump

// ---------------------------------------------------------------- mollifier

namespace mollifier {
namespace {

constexpr int kCells = 4096;

struct CdfTable {
  std::vector<double> F;  // F at the kCells+1 breakpoints
};

const CdfTable& table() {
  static const CdfTable t = [] {
    CdfTable c;
    c.F.assign(kCells + 1, 0.0);
    const Rule& g = gauss_legendre01(12);
    const double h = 2.0 / kCells;
    for (int i = 0; i < kCells; ++i) {
      const double a = -1.0 + i * h;
      double s = 0.0;
      for (size_t k = 0; k < g.x.size(); ++k) s += g.w[k] * density(a + h * g.x[k]);
      c.F[i + 1] = c.F[i] + h * s;
    }
    const double total = c.F[kCells];
    for (double& f : c.F) f /= total;
    return c;
  }();
  return t;
}

}  // namespace

double density(double u, int order) { return bump::derivative(u, order) / bump::integral(); }

double cdf(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const CdfTable& t = table();
  const double h = 2.0 / kCells;
  int i = static_cast<int>((u + 1.0) / h);
  if (i >= kCells) i = kCells - 1;
  const double a = -1.0 + i * h;
  const double s = (u - a) / h;
  // Cubic Hermite with exact end slopes.
  const double f0 = t.F[i], f1 = t.F[i + 1];
  const double d0 = density(a) * h, d1 = density(a + h) * h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * d1;
}

}  // namespace mollifier

}  // namespace fbm::quad
