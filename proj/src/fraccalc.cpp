#include "fbmlab/fraccalc.hpp"

#include <algorithm>
#include <cmath>

namespace fbm {

namespace {

void check_interval(const GridFunction& f, const FracOrder& o) {
  validate(f);
  if (f.dim != 1) throw ValidationError("fraccalc: scalar grid function required");
  if (o.a != 0.0 || o.b != f.grid.T) throw ValidationError("fraccalc: interval does not match the grid");
}

// (k+1)^p - 2 k^p + (k-1)^p without cancellation for large k.
double second_difference(double k, double p) {
  if (k < 2.0) return std::pow(k + 1.0, p) - 2.0 * std::pow(k, p) + (k > 0 ? std::pow(k - 1.0, p) : 0.0);
  return std::pow(k, p) * (std::expm1(p * std::log1p(1.0 / k)) + std::expm1(p * std::log1p(-1.0 / k)));
}

std::vector<double> reversed(const std::vector<double>& v) { return {v.rbegin(), v.rend()}; }

}  // namespace

FracIntegralWeights::FracIntegralWeights(int N, double h, double alpha) : N_(N), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("frac_integral: alpha must lie in (0,1]");
  const double p = alpha + 1.0;
  scale_ = std::pow(h, alpha) / std::tgamma(alpha + 2.0);
  interior_.assign(N + 1, 0.0);
  first_.assign(N + 1, 0.0);
  for (int k = 1; k <= N; ++k) interior_[k] = second_difference(k, p);
  for (int n = 1; n <= N; ++n) {
    const double dn = n;
    // (n-1)^p - (n-alpha-1) n^alpha
    first_[n] = std::pow(dn, p) * std::expm1(p * std::log1p(-1.0 / dn)) + p * std::pow(dn, alpha);
  }
}

double FracIntegralWeights::at(const double* f, int n) const {
  if (n == 0) return 0.0;
  double s = first_[n] * f[0] + f[n];
  const double* c = interior_.data();
  for (int j = 1; j < n; ++j) s += c[n - j] * f[j];
  return scale_ * s;
}

void FracIntegralWeights::apply(const double* f, double* out) const {
  for (int n = 0; n <= N_; ++n) out[n] = at(f, n);
}

GridFunction frac_integral(const GridFunction& f, const FracOrder& o) {
  check_interval(f, o);
  const FracIntegralWeights w(f.grid.N, f.grid.dt(), o.alpha);
  std::vector<double> in = f.values;
  if (o.side == Side::Right) in = reversed(in);
  std::vector<double> out(in.size());
  w.apply(in.data(), out.data());
  if (o.side == Side::Right) out = reversed(out);
  return GridFunction(f.grid, std::move(out));
}

GridFunction frac_derivative(const GridFunction& f, const FracOrder& o) {
  check_interval(f, o);
  const double alpha = o.alpha;
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("frac_derivative: alpha must lie in (0,1)");
  const int N = f.grid.N;
  const double h = f.grid.dt();
  std::vector<double> v = f.values;
  if (o.side == Side::Right) v = reversed(v);

  // Moments of u^(-alpha-1) and u^(-alpha) over [(k-1)h, kh].
  std::vector<double> M0(N + 1, 0.0), M1(N + 1, 0.0);
  for (int k = 1; k <= N; ++k) {
    const double km = k - 1.0, kk = k;
    if (k >= 2) M0[k] = std::pow(h, -alpha) * (std::pow(km, -alpha) - std::pow(kk, -alpha)) / alpha;
    M1[k] = std::pow(h, 1.0 - alpha) * (std::pow(kk, 1.0 - alpha) - std::pow(km, 1.0 - alpha)) / (1.0 - alpha);
  }
  const double g = std::tgamma(1.0 - alpha);
  std::vector<double> out(N + 1, 0.0);
  out[0] = v[0] == 0.0 ? 0.0 : v[0] * std::pow(h, -alpha) / std::tgamma(2.0 - alpha);
  for (int n = 1; n <= N; ++n) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const int k = n - j;
      const double df = v[j + 1] - v[j];
      if (k >= 2) s += (v[n] - v[j] - df * k) * M0[k];
      s += (df / h) * M1[k];
    }
    out[n] = (v[n] * std::pow(n * h, -alpha) + alpha * s) / g;
  }
  if (o.side == Side::Right) out = reversed(out);
  return GridFunction(f.grid, std::move(out));
}

}  // namespace fbm
