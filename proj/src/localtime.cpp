#include "fbmlab/localtime.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "fbmlab/kernel.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/shuffle.hpp"

namespace fbm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

// (1 + x^2) exp(-2x^2) and its derivatives as P_q(x) exp(-2x^2) with
// P_{q+1} = P_q' - 4x P_q.
constexpr int kGaussPolyMaxOrder = 10;

const std::array<std::vector<double>, kGaussPolyMaxOrder + 1>& gauss_poly_table() {
  static const auto table = [] {
    std::array<std::vector<double>, kGaussPolyMaxOrder + 1> p;
    p[0] = {1.0, 0.0, 1.0};
    for (int q = 0; q < kGaussPolyMaxOrder; ++q) {
      std::vector<double> next(p[q].size() + 1, 0.0);
      for (size_t i = 1; i < p[q].size(); ++i) next[i - 1] += p[q][i] * static_cast<double>(i);
      for (size_t i = 0; i < p[q].size(); ++i) next[i + 1] -= 4.0 * p[q][i];
      p[q + 1] = next;
    }
    return p;
  }();
  return table;
}

double gauss_poly(double x, int order) {
  if (order < 0 || order > kGaussPolyMaxOrder) throw ValidationError("gauss_poly: derivative order out of range");
  const auto& P = gauss_poly_table()[order];
  double v = 0.0;
  for (size_t i = P.size(); i-- > 0;) v = v * x + P[i];
  return v * std::exp(-2.0 * x * x);
}

int node_index(const TimeGrid& g, double s, const char* what) {
  const double r = s / g.dt();
  const long k = std::lround(r);
  if (std::abs(r - static_cast<double>(k)) > 1e-9 || k < 0 || k > g.N)
    throw ValidationError(std::string("local-time field: ") + what + " must be a node of the path grid");
  return static_cast<int>(k);
}

std::vector<double> trapezoid_weights(const TimeGrid& g, int i0, int i1) {
  std::vector<double> w(i1 - i0 + 1, g.dt());
  w.front() *= 0.5;
  w.back() *= 0.5;
  if (i0 == i1) w[0] = 0.0;
  return w;
}

// Cumulative trapezoid integral of v over nodes i0..i, index i - i0.
void cumulative_trapezoid(const std::vector<std::complex<double>>& v, double dt, std::vector<std::complex<double>>& c) {
  c.assign(v.size(), 0.0);
  for (size_t i = 1; i < v.size(); ++i) c[i] = c[i - 1] + 0.5 * dt * (v[i - 1] + v[i]);
}

// Window (1/x factors) from sin x, cos x; Taylor series near 0.
inline double window_scaled(int alpha, double x, double sx, double cx) {
  const double x2 = x * x;
  if (std::abs(x) < 0.05) {
    switch (alpha) {
      case 0: return 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0;
      case 1: return x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0 + x2 * x2 * x2 / 45360.0);
      default: return -1.0 / 3.0 + x2 / 10.0 - x2 * x2 / 168.0 + x2 * x2 * x2 / 6480.0;
    }
  }
  switch (alpha) {
    case 0: return sx / x;
    case 1: return -(sx - x * cx) / x2;
    default: return -(sx / x + 2.0 * cx / x2 - 2.0 * sx / (x2 * x));
  }
}

void check_lambda_args(int m, int d, const MultiIndex& alpha, double theta, double t, const std::vector<double>& z,
                       double R, const GridFunction& path) {
  if (m < 1 || m > kLambdaMaxM || d < 1 || d > kLambdaMaxD)
    throw ValidationError("local-time field: requires m <= 2 and d <= 2");
  if (alpha.m != m || alpha.d != d) throw ValidationError("local-time field: multi-index shape differs from (m, d)");
  if (path.dim != d) throw ValidationError("local-time field: path dimension differs from d");
  if (static_cast<int>(z.size()) != m * d) throw ValidationError("local-time field: z must hold m*d coordinates");
  if (!(R > 0.0)) throw ValidationError("local-time field: truncation radius must be positive");
  if (!(theta < t)) throw ValidationError("local-time field: need theta < t");
}

// Gauss-Legendre nodes over the ball |u| < R in dimension n, as a flat list of
// points and weights.
void ball_rule(int n, double R, int nodes, std::vector<double>& pts, std::vector<double>& wts) {
  const quad::Rule& g = quad::gauss_legendre01(nodes);
  pts.clear();
  wts.clear();
  std::vector<double> u(n);
  std::function<void(int, double, double)> rec = [&](int k, double r2, double w) {
    const double r = std::sqrt(std::max(r2, 0.0));
    for (int q = 0; q < nodes; ++q) {
      u[k] = -r + 2.0 * r * g.x[q];
      const double wk = w * 2.0 * r * g.w[q];
      if (k + 1 == n) {
        pts.insert(pts.end(), u.begin(), u.end());
        wts.push_back(wk);
      } else {
        rec(k + 1, r2 - u[k] * u[k], wk);
      }
    }
  };
  rec(0, R * R, 1.0);
}

std::complex<double> ipow_neg_i(double u, int a) {
  // (-i u)^a
  std::complex<double> r = 1.0;
  const std::complex<double> f(0.0, -u);
  for (int k = 0; k < a; ++k) r *= f;
  return r;
}

}  // namespace

// ---------------------------------------------------------------- MultiIndex

MultiIndex::MultiIndex(int m_, int d_, std::vector<int> entries) : m(m_), d(d_), a(std::move(entries)) {
  if (m < 1 || d < 1) throw ValidationError("multi-index: need m >= 1 and d >= 1");
  if (static_cast<int>(a.size()) != m * d) throw ValidationError("multi-index: entry count differs from m*d");
  for (int v : a)
    if (v < 0) throw ValidationError("multi-index: negative entry");
}

int MultiIndex::total() const {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

int MultiIndex::max_entry() const { return *std::max_element(a.begin(), a.end()); }

// ---------------------------------------------------------------- TestFactor

TestFactor::TestFactor(std::string name, Profile profile, double time_slope, double coef)
    : name_(std::move(name)), profile_(profile), slope_(time_slope), coef_(coef) {}

TestFactor TestFactor::scaled(double lambda) const {
  TestFactor f = *this;
  f.coef_ *= lambda;
  return f;
}

double TestFactor::space(double x, int order) const {
  if (profile_ == Profile::Bump) return order == 0 ? quad::bump::value(x) : quad::bump::derivative(x, order);
  return gauss_poly(x, order);
}

double TestFactor::value(double s, const double* z, int d) const {
  double v = time(s);
  for (int c = 0; c < d && v != 0.0; ++c) v *= space(z[c], 0);
  return v;
}

double TestFactor::derivative(double s, const double* z, int d, const int* alpha_row) const {
  double v = time(s);
  for (int c = 0; c < d && v != 0.0; ++c) v *= space(z[c], alpha_row[c]);
  return v;
}

double TestFactor::declared_norm(double T, int d) const {
  const double a = std::max(1.0, std::abs(1.0 + slope_ * T)) * std::abs(coef_);
  const double one = profile_ == Profile::Bump ? quad::bump::integral() : 1.25 * std::sqrt(0.5 * kPi);
  return a * std::pow(one, d);
}

double TestFactor::support() const { return profile_ == Profile::Bump ? 1.0 : kInf; }

double TestFactor::effective_support() const { return profile_ == Profile::Bump ? 1.0 : 5.5; }

double TestFactor::profile_l1(int order) const {
  if (profile_ == Profile::Bump)
    return order == 0 ? quad::bump::integral() : quad::bump::abs_derivative_integral(order);
  const quad::Rule r = quad::composite_legendre(-effective_support(), effective_support(), 256, 8);
  double s = 0.0;
  for (size_t k = 0; k < r.x.size(); ++k) s += r.w[k] * std::abs(gauss_poly(r.x[k], order));
  return s;
}

double TestFactor::fourier_abs(double u) const {
  if (profile_ != Profile::GaussPoly) throw ValidationError("fourier_abs: closed form only for gauss_poly");
  return std::sqrt(0.5 * kPi) * std::exp(-u * u / 8.0) * std::abs(1.25 - u * u / 16.0);
}

std::vector<std::string> test_factor_catalog() { return {"bump", "gauss_poly"}; }

TestFactor make_test_factor(const std::string& name) {
  if (name == "bump") return TestFactor(name, TestFactor::Profile::Bump, 0.5);
  if (name == "gauss_poly") return TestFactor(name, TestFactor::Profile::GaussPoly, 0.0);
  throw ValidationError("unknown test factor '" + name + "'");
}

double numeric_factor_norm(const TestFactor& f, double T, int d) {
  if (d < 1 || d > 2) throw ValidationError("numeric_factor_norm: d must be 1 or 2");
  const double L = f.effective_support();
  const quad::Rule r = quad::composite_legendre(-L, L, 128, 8);
  double best = 0.0;
  for (int i = 0; i <= 64; ++i) {
    const double s = T * i / 64.0;
    double acc = 0.0;
    double z[2];
    if (d == 1) {
      for (size_t k = 0; k < r.x.size(); ++k) {
        z[0] = r.x[k];
        acc += r.w[k] * std::abs(f.value(s, z, 1));
      }
    } else {
      for (size_t k = 0; k < r.x.size(); ++k)
        for (size_t l = 0; l < r.x.size(); ++l) {
          z[0] = r.x[k];
          z[1] = r.x[l];
          acc += r.w[k] * r.w[l] * std::abs(f.value(s, z, 2));
        }
    }
    best = std::max(best, acc);
  }
  return best;
}

// ---------------------------------------------------------------- Lambda

double fourier_window(int alpha, double R, double b) {
  if (alpha < 0 || alpha > 2) throw ValidationError("fourier_window: alpha must be 0, 1 or 2");
  const double x = R * b;
  return 2.0 * std::pow(R, alpha + 1) * window_scaled(alpha, x, std::sin(x), std::cos(x));
}

std::complex<double> lambda_truncated(const FactorFn& f, int m, const MultiIndex& alpha, double theta, double t,
                                      const std::vector<double>& z, double R, const GridFunction& path,
                                      const LambdaOptions& opt) {
  const int d = path.dim;
  check_lambda_args(m, d, alpha, theta, t, z, R, path);
  const TimeGrid& g = path.grid;
  const int i0 = node_index(g, theta, "theta"), i1 = node_index(g, t, "t");
  const int ns = i1 - i0 + 1;
  const std::vector<double> w = trapezoid_weights(g, i0, i1);

  // Factor values at the nodes, f_j(s_i, z_j).
  std::vector<std::vector<double>> fv(m, std::vector<double>(ns));
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < ns; ++i) fv[j][i] = f(j, g.node(i0 + i), z.data() + static_cast<size_t>(j) * d);

  if (m == 1 && d == 1 && alpha.max_entry() <= 2 && !opt.force_quadrature) {
    const int a = alpha(0, 0);
    double s = 0.0;
    for (int i = 0; i < ns; ++i)
      if (fv[0][i] != 0.0) s += w[i] * fv[0][i] * fourier_window(a, R, path(i0 + i) - z[0]);
    return {s / (2.0 * kPi), 0.0};
  }

  const int n = m * d;
  const double work = std::pow(static_cast<double>(opt.u_nodes), n) * ns * m;
  if (work > kLambdaWorkBudget)
    throw ValidationError("local-time field: quadrature work exceeds the budget; lower u_nodes");
  std::vector<double> pts, wts;
  ball_rule(n, R, opt.u_nodes, pts, wts);

  std::complex<double> total = 0.0;
  std::vector<std::complex<double>> e2(ns), c2;
  for (size_t q = 0; q < wts.size(); ++q) {
    const double* u = &pts[q * n];
    std::complex<double> pre = wts[q];
    double phase = 0.0;
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < d; ++l) {
        pre *= ipow_neg_i(u[j * d + l], alpha(j, l));
        phase += u[j * d + l] * z[static_cast<size_t>(j) * d + l];
      }
    if (pre == 0.0) continue;
    pre *= std::polar(1.0, phase);
    auto expo = [&](int j, int i) {
      double p = 0.0;
      for (int l = 0; l < d; ++l) p += u[j * d + l] * path(i0 + i, l);
      return std::polar(1.0, -p);
    };
    std::complex<double> s = 0.0;
    if (m == 1) {
      for (int i = 0; i < ns; ++i)
        if (fv[0][i] != 0.0) s += w[i] * fv[0][i] * expo(0, i);
    } else {
      // theta < s_2 < s_1 < t: cumulative inner integral in s_2.
      for (int i = 0; i < ns; ++i) e2[i] = fv[1][i] == 0.0 ? 0.0 : fv[1][i] * expo(1, i);
      cumulative_trapezoid(e2, g.dt(), c2);
      for (int i = 1; i < ns; ++i)
        if (fv[0][i] != 0.0) s += w[i] * fv[0][i] * expo(0, i) * c2[i];
    }
    total += pre * s;
  }
  return total / std::pow(2.0 * kPi, n);
}

std::complex<double> lambda_truncated(const SeparableTestFunction& f, const MultiIndex& alpha, double theta,
                                      double t, const std::vector<double>& z, double R, const GridFunction& path,
                                      const LambdaOptions& opt) {
  if (f.d != path.dim) throw ValidationError("local-time field: test function dimension differs from the path");
  const int d = f.d;
  const FactorFn fn = [&](int j, double s, const double* zj) { return f.factors[j].value(s, zj, d); };
  return lambda_truncated(fn, f.m(), alpha, theta, t, z, R, path, opt);
}

Estimate lambda_l2_mc(const SeparableTestFunction& f, const MultiIndex& alpha, double theta, double t,
                      const std::vector<double>& z, double R, const FbmEnsemble& ens, int workers,
                      const LambdaOptions& opt) {
  if (ens.n_paths == 0) throw ValidationError("lambda_l2_mc: empty ensemble");
  std::vector<double> sq(ens.n_paths);
  parallel_for(ens.n_paths, workers > 0 ? workers : default_workers(), [&](int p) {
    const GridFunction path(ens.grid, std::vector<double>(ens.path(p), ens.path(p) + (ens.grid.N + 1) * ens.d), ens.d);
    sq[p] = std::norm(lambda_truncated(f, alpha, theta, t, z, R, path, opt));
  });
  MeanAccumulator acc;
  for (double v : sq) acc.push(v);
  return {acc.mean, acc.se()};
}

double occupation_density(const TestFactor& f, double theta, double t, double z, const GridFunction& path) {
  if (path.dim != 1) throw ValidationError("occupation_density: one-dimensional paths only");
  const TimeGrid& g = path.grid;
  const int i0 = node_index(g, theta, "theta"), i1 = node_index(g, t, "t");
  double s = 0.0;
  for (int i = i0; i < i1; ++i) {
    const double a = path(i), b = path(i + 1);
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(z >= lo && z < hi)) continue;
    const double tc = g.node(i) + g.dt() * (z - a) / (b - a);
    s += f.value(tc, &z, 1) * g.dt() / (hi - lo);
  }
  return s;
}

// ---------------------------------------------------------------- Psi

double iterated_singular_integral(const std::vector<std::function<double(double)>>& g,
                                  const std::vector<double>& e, const std::vector<double>& w, double theta, double t,
                                  int nodes) {
  const int n = static_cast<int>(g.size());
  if (n == 0 || static_cast<int>(e.size()) != n || static_cast<int>(w.size()) != n)
    throw ValidationError("iterated_singular_integral: factor, exponent and weight lists must have equal length");
  if (!(theta < t)) throw ValidationError("iterated_singular_integral: need theta < t");
  for (double wj : w)
    if (!(wj > -1.0)) return kInf;
  std::vector<double> P(n);
  P[0] = w[0] + e[0];
  for (int j = 1; j < n; ++j) P[j] = e[j] + w[j] + P[j - 1] + 1.0;
  for (double p : P)
    if (!(p > -1.0)) return kInf;
  std::vector<const quad::Rule*> rules(n);
  for (int j = 1; j < n; ++j) rules[j] = &quad::gauss_jacobi01(nodes, w[j], P[j - 1]);
  const quad::Rule& last = quad::gauss_jacobi01(nodes, 0.0, P[n - 1]);

  std::function<double(int, double)> h = [&](int j, double s) -> double {
    const double gv = g[j](s);
    if (gv == 0.0) return 0.0;
    const double smooth = gv * std::pow(s - theta, -e[j]);
    if (j == 0) return smooth;
    const quad::Rule& r = *rules[j];
    double acc = 0.0;
    for (int q = 0; q < nodes; ++q) acc += r.w[q] * h(j - 1, theta + (s - theta) * r.x[q]);
    return smooth * acc;
  };
  double acc = 0.0;
  for (int q = 0; q < nodes; ++q) acc += last.w[q] * h(n - 1, theta + (t - theta) * last.x[q]);
  return std::pow(t - theta, P[n - 1] + 1.0) * acc;
}

namespace {

// Sum over S(m,m) with slot sigma(j) carrying factor (j-1) mod m.
double psi_sum(int m, const std::vector<std::function<double(double)>>& factor, const std::vector<double>& e_factor,
               double w, double theta, double t, int nodes) {
  const shuffle::ShuffleSet S = shuffle::enumerate_shuffles(m, m);
  double total = 0.0;
  std::vector<std::function<double(double)>> g(2 * m);
  std::vector<double> e(2 * m), ws(2 * m, w);
  for (const auto& sigma : S.perms) {
    for (int j = 0; j < 2 * m; ++j) {
      g[sigma[j] - 1] = factor[j % m];
      e[sigma[j] - 1] = e_factor[j % m];
    }
    total += iterated_singular_integral(g, e, ws, theta, t, nodes);
  }
  return total;
}

}  // namespace

double psi_f(const SeparableTestFunction& f, int k, double theta, double t, const std::vector<double>& z, double H,
             int nodes) {
  const int m = f.m(), d = f.d;
  if (m < 1 || m > kLambdaMaxM) throw ValidationError("psi_f: requires 1 <= m <= 2");
  if (static_cast<int>(z.size()) != m * d) throw ValidationError("psi_f: z must hold m*d coordinates");
  if (k < 0) throw ValidationError("psi_f: k must be non-negative");
  const double w = d * H * (2 * k + 1);
  if (w >= 1.0) return kInf;
  std::vector<std::function<double(double)>> factor(m);
  for (int j = 0; j < m; ++j) {
    const double* zj = z.data() + static_cast<size_t>(j) * d;
    factor[j] = [&f, j, zj, d](double s) { return std::abs(f.factors[j].value(s, zj, d)); };
  }
  return psi_sum(m, factor, std::vector<double>(m, 0.0), -w, theta, t, nodes);
}

double psi_kappa(const WeightSpec& ws, int m, int d, int k, double theta, double t, double H, int nodes) {
  if (m < 1 || m > kLambdaMaxM) throw ValidationError("psi_kappa: requires 1 <= m <= 2");
  if (static_cast<int>(ws.eps.size()) != m) throw ValidationError("psi_kappa: eps must have m entries");
  if (k < 0 || d < 1) throw ValidationError("psi_kappa: need k >= 0 and d >= 1");
  const double w = d * H * (2 * k + 1);
  if (w >= 1.0) return kInf;
  const HurstParam h(H);
  std::vector<std::function<double(double)>> factor(m);
  std::vector<double> e(m, 0.0);
  for (int j = 0; j < m; ++j) {
    if (ws.eps[j] != 0 && ws.eps[j] != 1) throw ValidationError("psi_kappa: eps entries must be 0 or 1");
    if (ws.variant == WeightVariant::Unit || ws.eps[j] == 0) {
      factor[j] = [](double) { return 1.0; };
      continue;
    }
    if (!(theta > 0.0)) throw ValidationError("psi_kappa: kernel weights need theta > 0");
    e[j] = H - 0.5;
    if (ws.variant == WeightVariant::Kernel) {
      factor[j] = [h, theta](double s) { return kernel_kh(s, theta, h); };
    } else {
      const double tp = ws.theta_prime;
      if (!(tp > 0.0 && tp < theta)) throw ValidationError("psi_kappa: need 0 < theta' < theta");
      factor[j] = [h, theta, tp](double s) { return std::abs(kernel_kh(s, theta, h) - kernel_kh(s, tp, h)); };
    }
  }
  return psi_sum(m, factor, e, -w, theta, t, nodes);
}

// ---------------------------------------------------------------- IBP

double ibp_truncation_allowance(const TestFactor& f, int alpha, double theta, double t, double R) {
  if (alpha < 0 || alpha > 2) throw ValidationError("ibp: alpha must be 0, 1 or 2");
  // int_theta^t |a(s)| ds for the linear time factor (positive on [0, T]).
  const quad::Rule& gs = quad::gauss_legendre01(4);
  double a_int = 0.0;
  for (size_t q = 0; q < gs.x.size(); ++q) a_int += (t - theta) * gs.w[q] * std::abs(f.time(theta + (t - theta) * gs.x[q]));
  double tail;
  if (f.profile() == TestFactor::Profile::Bump) {
    // |phi^(u)| <= ||phi^(q)||_1 |u|^{-q}.
    tail = kInf;
    for (int q = alpha + 2; q <= quad::bump::kMaxOrder; ++q)
      tail = std::min(tail, 2.0 * f.profile_l1(q) * std::pow(R, alpha - q + 1) / (q - alpha - 1));
    tail *= std::abs(f.coef());
  } else {
    const quad::Rule r = quad::composite_legendre(R, R + 60.0, 240, 8);
    tail = 0.0;
    for (size_t k = 0; k < r.x.size(); ++k) tail += r.w[k] * std::pow(r.x[k], alpha) * f.fourier_abs(r.x[k]);
    tail *= 2.0 * std::abs(f.coef());
  }
  // f.time already carries coef, so divide it out of the spatial factor.
  return a_int * tail / (2.0 * kPi) / (f.coef() == 0.0 ? 1.0 : std::abs(f.coef()));
}

double ibp_oracle(const TestFactor& f, int alpha, double theta, double t, double H) {
  if (alpha < 0 || alpha > 2) throw ValidationError("ibp: alpha must be 0, 1 or 2");
  if (!(0.0 <= theta && theta < t)) throw ValidationError("ibp_oracle: need 0 <= theta < t");
  const quad::Rule y = quad::composite_legendre(-12.0, 12.0, 256, 8);
  std::vector<double> gauss(y.x.size());
  for (size_t k = 0; k < y.x.size(); ++k) gauss[k] = y.w[k] * std::exp(-0.5 * y.x[k] * y.x[k]) / std::sqrt(2.0 * kPi);
  auto inner = [&](double s) {
    const double v = std::pow(s, 2.0 * H), sv = std::sqrt(v);
    double acc = 0.0;
    for (size_t k = 0; k < y.x.size(); ++k) {
      const double phi = f.space(sv * y.x[k], 0);
      switch (alpha) {
        case 0: acc += gauss[k] * phi; break;
        case 1: acc += gauss[k] * phi * y.x[k]; break;
        default: acc += gauss[k] * phi * (y.x[k] * y.x[k] - 1.0); break;
      }
    }
    if (alpha == 1) acc /= sv;
    if (alpha == 2) acc /= v;
    return f.time(s) * acc;
  };
  // Geometric panels toward s = 0, uniform further out.
  std::vector<double> br{t};
  for (double b = t / 2; b > theta && b > t * 1e-12; b /= 2) br.push_back(b);
  br.push_back(theta);
  std::sort(br.begin(), br.end());
  const quad::Rule& g = quad::gauss_legendre01(16);
  double total = 0.0;
  for (size_t p = 0; p + 1 < br.size(); ++p) {
    const double lo = br[p], hi = br[p + 1];
    if (!(hi > lo)) continue;
    for (size_t q = 0; q < g.x.size(); ++q) total += (hi - lo) * g.w[q] * inner(lo + (hi - lo) * g.x[q]);
  }
  return total;
}

IbpResult ibp_check(const TestFactor& f, int alpha, double theta, double t, const FbmEnsemble& ens, double R,
                    const ZQuadrature& zq, int workers) {
  if (alpha < 0 || alpha > 2) throw ValidationError("ibp: alpha must be 0, 1 or 2");
  if (ens.d != 1) throw ValidationError("ibp: implemented for m = 1, d = 1");
  if (ens.n_paths == 0) throw ValidationError("ibp: empty ensemble");
  if (!(R > 0.0)) throw ValidationError("ibp: truncation radius must be positive");
  if (!(theta < t)) throw ValidationError("ibp: need theta < t");
  if (zq.points_per_panel < 2) throw ValidationError("ibp: at least two points per z panel");
  const TimeGrid& g = ens.grid;
  const int i0 = node_index(g, theta, "theta"), i1 = node_index(g, t, "t");
  const std::vector<double> w = trapezoid_weights(g, i0, i1);
  std::vector<double> a(i1 - i0 + 1);
  for (int i = i0; i <= i1; ++i) a[i - i0] = f.time(g.node(i));

  const double L = f.effective_support();
  const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * L * R / kPi)));
  const quad::Rule zr = quad::composite_legendre(-L, L, panels, zq.points_per_panel);
  const size_t nz = zr.x.size();
  std::vector<double> zw(nz), sz(nz), cz(nz), zx(nz);
  for (size_t k = 0; k < nz; ++k) {
    zx[k] = zr.x[k];
    zw[k] = zr.w[k] * f.space(zr.x[k], 0);
    sz[k] = std::sin(R * zr.x[k]);
    cz[k] = std::cos(R * zr.x[k]);
  }
  const double scale = 2.0 * std::pow(R, alpha + 1) / (2.0 * kPi);

  std::vector<double> lhs(ens.n_paths), rhs(ens.n_paths);
  parallel_for(ens.n_paths, workers > 0 ? workers : default_workers(), [&](int p) {
    double l = 0.0, r = 0.0;
    for (int i = i0; i <= i1; ++i) {
      const double B = ens.value(p, i);
      const double wi = w[i - i0] * a[i - i0];
      if (wi == 0.0) continue;
      l += wi * f.space(B, alpha);
      const double sB = std::sin(R * B), cB = std::cos(R * B);
      double acc = 0.0;
      for (size_t k = 0; k < nz; ++k) {
        if (zw[k] == 0.0) continue;
        const double x = R * (B - zx[k]);
        const double sx = sB * cz[k] - cB * sz[k];
        const double cx = cB * cz[k] + sB * sz[k];
        acc += zw[k] * window_scaled(alpha, x, sx, cx);
      }
      r += wi * scale * acc;
    }
    lhs[p] = l;
    rhs[p] = r;
  });
  MeanAccumulator la, ra, da;
  for (int p = 0; p < ens.n_paths; ++p) {
    la.push(lhs[p]);
    ra.push(rhs[p]);
    da.push(lhs[p] - rhs[p]);
  }
  IbpResult res;
  res.lhs = la.mean;
  res.lhs_se = la.se();
  res.rhs = ra.mean;
  res.rhs_se = ra.se();
  res.diff = la.mean - ra.mean;
  res.combined_se = std::sqrt(res.lhs_se * res.lhs_se + res.rhs_se * res.rhs_se);
  res.paired_se = da.se();
  res.allowance = ibp_truncation_allowance(f, alpha, theta, t, R);
  res.oracle = ibp_oracle(f, alpha, theta, t, ens.H);
  return res;
}

// ---------------------------------------------------------------- bounds

double admissibility_threshold(int k, int d, int S) {
  if (k < 0 || d < 1 || S < 0) throw ValidationError("admissibility_threshold: need k >= 0, d >= 1, S >= 0");
  const double c = d * (2.0 * k + 1.0);
  const int m0 = std::max(1, S);
  const double den = m0 * c - S;
  const double at_m0 = den > 0.0 ? (m0 - 0.5 * S) / den : kInf;
  return std::min(at_m0, 1.0 / c);
}

BoundResult bound_main_estimate(MainEstimate variant, int m, int k, int d, double H, double gamma,
                                const std::vector<int>& eps, const std::vector<double>& norms, double theta_prime,
                                double theta, double t, double C) {
  if (m < 1 || k < 0 || d < 1) throw ValidationError("bound_main_estimate: need m >= 1, k >= 0, d >= 1");
  if (!(H > 0.0 && H < 0.5)) throw ValidationError("bound_main_estimate: H must lie in (0, 1/2)");
  if (static_cast<int>(eps.size()) != m || static_cast<int>(norms.size()) != m)
    throw ValidationError("bound_main_estimate: eps and norms need m entries");
  if (!(theta < t)) throw ValidationError("bound_main_estimate: need theta < t");
  int S = 0;
  for (int e : eps) {
    if (e != 0 && e != 1) throw ValidationError("bound_main_estimate: eps entries must be 0 or 1");
    S += e;
  }
  if (variant == MainEstimate::KernelDifference) {
    if (!(gamma > 0.0 && gamma < H)) throw ValidationError("bound_main_estimate: gamma must lie in (0, H)");
    if (theta_prime > theta) throw ValidationError("bound_main_estimate: need theta' <= theta");
  } else {
    gamma = 0.0;
  }
  BoundResult r;
  r.threshold = admissibility_threshold(k, d, S);
  if (!(H < r.threshold)) {
    r.admissible = false;
    return r;
  }
  const double c = d * (2.0 * k + 1.0);
  const double expo_t = m * (1.0 - c * H) + (H - 0.5 - gamma) * S;
  const double garg = 2.0 * m * (1.0 - c * H) + 1.0 + 2.0 * (H - 0.5 - gamma) * S;
  if (!(garg > 0.0)) throw NumericError("bound_main_estimate: Gamma argument is not positive");
  double logv = m * std::log(C) - 0.5 * std::lgamma(garg) + expo_t * std::log(t - theta);
  for (double n : norms) {
    if (n < 0.0) throw ValidationError("bound_main_estimate: norms must be non-negative");
    if (n == 0.0) return r;  // value 0
    logv += std::log(n);
  }
  if (variant == MainEstimate::KernelDifference && S > 0) {
    const double gap = std::abs(theta - theta_prime);
    if (gap == 0.0) return r;
    logv += gamma * S * std::log(gap);
  }
  r.value = std::exp(logv);
  return r;
}

// ---------------------------------------------------------------- appendix

double appendix_double_integral(double H, double gamma, double t, int nodes) {
  if (!(H > 0.0 && H < 0.5)) throw ValidationError("appendix_double_integral: H must lie in (0, 1/2)");
  if (!(gamma > 0.0 && gamma < 2.0 * H + 1.0))
    throw ValidationError("appendix_double_integral: need 0 < gamma < 2H + 1 for a finite value");
  if (!(t > 0.0) || nodes < 2) throw ValidationError("appendix_double_integral: need t > 0 and nodes >= 2");
  const HurstParam h(H);
  const double half = 0.5 * t;
  const quad::Rule& rx = quad::gauss_jacobi01(nodes, 0.0, 2.0 * H - gamma);
  const quad::Rule& rw = quad::gauss_jacobi01(nodes, 2.0 * H - 1.0, 2.0 - gamma);
  const quad::Rule& rs = quad::gauss_jacobi01(nodes, 0.0, 2.0 * H - 1.0);
  auto K = [&](double s) { return kernel_kh(t, s, h); };

  std::vector<double> rowA(nodes), rowB(nodes), rowC(nodes);
  std::vector<double> Kc(nodes), Kd(nodes);
  for (int b = 0; b < nodes; ++b) {
    Kc[b] = K(half * rs.x[b]);          // theta near 0 in the cross region
    Kd[b] = K(t - half * rs.x[b]);      // theta' near t in the cross region
  }
  parallel_for(nodes, default_workers(), [&](int a) {
    const double x = rx.x[a], sc = half * x;
    // Near 0: theta' = u, theta = u(1-w).
    const double Ku = K(sc);
    // Near t: theta = t - v, theta' = t - v(1-w).
    const double Kv = K(t - sc);
    double sa = 0.0, sb = 0.0;
    for (int b = 0; b < nodes; ++b) {
      const double w = rw.x[b];
      const double weight = std::pow(x, 2.0 * H - gamma) * std::pow(w, 2.0 - gamma) * std::pow(1.0 - w, 2.0 * H - 1.0);
      const double dA = Ku - K(sc * (1.0 - w));
      const double dB = K(t - sc * (1.0 - w)) - Kv;
      const double jac = sc * half / std::pow(w * sc, gamma);
      sa += rw.w[b] * dA * dA * jac / weight;
      sb += rw.w[b] * dB * dB * jac / weight;
    }
    double scr = 0.0;
    const double xa = rs.x[a];
    for (int b = 0; b < nodes; ++b) {
      const double d = Kd[b] - Kc[a];
      const double gap = (t - half * rs.x[b]) - half * xa;
      const double weight = std::pow(xa, 2.0 * H - 1.0) * std::pow(rs.x[b], 2.0 * H - 1.0);
      scr += rs.w[b] * d * d * half * half / std::pow(gap, gamma) / weight;
    }
    rowA[a] = rx.w[a] * sa;
    rowB[a] = rx.w[a] * sb;
    rowC[a] = rs.w[a] * scr;
  });
  double total = 0.0;
  for (int a = 0; a < nodes; ++a) total += rowA[a] + rowB[a] + rowC[a];
  return 2.0 * total;
}

IteratedBoundCheck iterated_bound_check(MainEstimate variant, const std::vector<int>& eps,
                                        const std::vector<double>& w, double H, double gamma, double theta_prime,
                                        double theta, double t, int nodes) {
  const int n = static_cast<int>(eps.size());
  if (n == 0 || static_cast<int>(w.size()) != n) throw ValidationError("iterated_bound_check: eps and w must match");
  if (!(H > 0.0 && H < 0.5)) throw ValidationError("iterated_bound_check: H must lie in (0, 1/2)");
  if (!(theta < t) || theta < 0.0) throw ValidationError("iterated_bound_check: need 0 <= theta < t");
  int S = 0;
  double W = 0.0, log_gw = 0.0;
  for (int j = 0; j < n; ++j) {
    if (eps[j] != 0 && eps[j] != 1) throw ValidationError("iterated_bound_check: eps entries must be 0 or 1");
    if (!(w[j] > -1.0)) throw ValidationError("iterated_bound_check: weights must exceed -1");
    S += eps[j];
    W += w[j];
    log_gw += std::lgamma(w[j] + 1.0);
  }
  const HurstParam h(H);
  if (S > 0 && !(theta > 0.0)) throw ValidationError("iterated_bound_check: kernel factors need theta > 0");
  if (variant == MainEstimate::KernelDifference) {
    if (!(gamma > 0.0 && gamma < H)) throw ValidationError("iterated_bound_check: gamma must lie in (0, H)");
    if (S > 0 && !(theta_prime > 0.0 && theta_prime < theta))
      throw ValidationError("iterated_bound_check: need 0 < theta' < theta");
  } else {
    gamma = 0.0;
  }
  std::vector<std::function<double(double)>> g(n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    if (eps[j] == 0) {
      g[j] = [](double) { return 1.0; };
      continue;
    }
    e[j] = H - 0.5;
    if (variant == MainEstimate::Kernel)
      g[j] = [h, theta](double s) { return kernel_kh(s, theta, h); };
    else
      g[j] = [h, theta, theta_prime](double s) {
        return std::abs(kernel_kh(s, theta, h) - kernel_kh(s, theta_prime, h));
      };
  }
  IteratedBoundCheck r;
  r.lhs = iterated_singular_integral(g, e, w, theta, t, nodes);
  const double expo = n + W + (H - 0.5 - gamma) * S;
  double logr = log_gw + expo * std::log(t - theta) - std::lgamma(expo + 1.0);
  if (variant == MainEstimate::KernelDifference && S > 0) logr += gamma * S * std::log(theta - theta_prime);
  r.rhs = std::exp(logr);
  r.ratio = r.lhs / r.rhs;
  return r;
}

}  // namespace fbm
