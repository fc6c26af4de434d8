#include "fbmlab/kernel.hpp"

#include <cmath>

#include "fbmlab/quadrature.hpp"

namespace fbm {

namespace {

void check_hurst(double H) {
  if (!(H > 0.0 && H < 0.5)) throw ValidationError("Hurst parameter must lie in (0, 1/2)");
}

constexpr int kCellNodes = 8;
constexpr int kSingularCellNodes = 16;

}  // namespace

HurstParam::HurstParam(double H_) : H(H_) {
  check_hurst(H);
  cH = std::sqrt(2.0 * H / ((1.0 - 2.0 * H) * std::beta(1.0 - 2.0 * H, H + 0.5)));
}

double kernel_inner_integral(double t, double s, double H) {
  const double x = s / t;
  if (x >= 0.5) {
    // u = s + (t-s) v; the remaining factor is smooth because s >= t-s.
    const quad::Rule& r = quad::gauss_jacobi01(kKernelInnerNodes, 0.0, H - 0.5);
    double acc = 0.0;
    for (int k = 0; k < kKernelInnerNodes; ++k) acc += r.w[k] * std::pow(s + (t - s) * r.x[k], H - 1.5);
    return std::pow(t - s, H + 0.5) * acc;
  }
  // u = s/y turns the integral into s^(2H-1) int_x^1 y^(-2H) (1-y)^(H-1/2) dy;
  // the complement over (0,x) has weight r^(-2H) after y = x r.
  const quad::Rule& r = quad::gauss_jacobi01(kKernelInnerNodes, 0.0, -2.0 * H);
  double acc = 0.0;
  for (int k = 0; k < kKernelInnerNodes; ++k) acc += r.w[k] * std::pow(1.0 - x * r.x[k], H - 0.5);
  const double head = std::pow(x, 1.0 - 2.0 * H) * acc;
  return std::pow(s, 2.0 * H - 1.0) * (std::beta(1.0 - 2.0 * H, H + 0.5) - head);
}

double kernel_kh(double t, double s, const HurstParam& h) {
  if (!(s > 0.0) || !(s < t)) throw ValidationError("kernel_kh requires 0 < s < t");
  const double H = h.H;
  const double first = std::pow(t / s, H - 0.5) * std::pow(t - s, H - 0.5);
  const double second = (H - 0.5) * std::pow(s, 0.5 - H) * kernel_inner_integral(t, s, H);
  return h.cH * (first - second);
}

double kernel_kh_dt(double t, double s, const HurstParam& h) {
  if (!(s > 0.0) || !(s < t)) throw ValidationError("kernel_kh_dt requires 0 < s < t");
  const double H = h.H;
  return h.cH * (H - 0.5) * std::pow(t / s, H - 0.5) * std::pow(t - s, H - 1.5);
}

double kernel_cell_average(double t, double lo, double hi, const HurstParam& h) {
  if (!(lo >= 0.0) || !(hi > lo) || hi > t) throw ValidationError("kernel_cell_average: need 0 <= lo < hi <= t");
  const double H = h.H;
  const double w = hi - lo;
  const bool left_sing = lo == 0.0;
  const bool right_sing = hi == t;
  const double a = right_sing ? H - 0.5 : 0.0;  // exponent of (1-v)
  const double b = left_sing ? H - 0.5 : 0.0;   // exponent of v
  const int n = (left_sing || right_sing) ? kSingularCellNodes : kCellNodes;
  const quad::Rule& r = (left_sing || right_sing) ? quad::gauss_jacobi01(n, a, b) : quad::gauss_legendre01(n);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = r.x[k];
    const double s = lo + w * v;
    double f = kernel_kh(t, s, h);
    if (left_sing) f *= std::pow(v, -b);
    if (right_sing) f *= std::pow(1.0 - v, -a);
    acc += r.w[k] * f;
  }
  return acc;
}

double kernel_diagonal_average(double s, double dt, const HurstParam& h) {
  if (!(s > 0.0) || !(dt > 0.0)) throw ValidationError("kernel_diagonal_average: need s > 0, dt > 0");
  const double e = h.H - 0.5;
  const quad::Rule& r = quad::gauss_jacobi01(kSingularCellNodes, 0.0, e);
  double acc = 0.0;
  for (int k = 0; k < kSingularCellNodes; ++k) {
    const double v = r.x[k];
    acc += r.w[k] * kernel_kh(s + dt * v, s, h) * std::pow(v, -e);
  }
  return acc;
}

double covariance_rh(double t, double s, double H) {
  if (t < 0.0 || s < 0.0) throw ValidationError("covariance_rh requires t, s >= 0");
  return 0.5 * (std::pow(t, 2 * H) + std::pow(s, 2 * H) - std::pow(std::abs(t - s), 2 * H));
}

namespace {

// Quadrature nodes on [0,m] split into `cells` cells: first cell weighted by
// v^(2H-1), last cell by (1-v)^last_exp, Gauss-Legendre elsewhere. Each node
// carries the weight that multiplies the raw integrand.
struct FactorNodes {
  std::vector<double> u, w;
};

constexpr int kInteriorPoints = 4;
constexpr int kEndPoints = 12;

FactorNodes factor_nodes(double m, int cells, double H, double last_exp) {
  FactorNodes fn;
  const double h = m / cells;
  const quad::Rule& gl = quad::gauss_legendre01(kInteriorPoints);
  if (cells == 1) {
    const quad::Rule& r = quad::gauss_jacobi01(kEndPoints, last_exp, 2 * H - 1);
    for (int k = 0; k < kEndPoints; ++k) {
      const double v = r.x[k];
      fn.u.push_back(h * v);
      fn.w.push_back(h * r.w[k] * std::pow(v, 1 - 2 * H) * std::pow(1 - v, -last_exp));
    }
    return fn;
  }
  const quad::Rule& first = quad::gauss_jacobi01(kEndPoints, 0.0, 2 * H - 1);
  for (int k = 0; k < kEndPoints; ++k) {
    const double v = first.x[k];
    fn.u.push_back(h * v);
    fn.w.push_back(h * first.w[k] * std::pow(v, 1 - 2 * H));
  }
  for (int c = 1; c < cells - 1; ++c)
    for (int k = 0; k < kInteriorPoints; ++k) {
      fn.u.push_back(h * (c + gl.x[k]));
      fn.w.push_back(h * gl.w[k]);
    }
  const quad::Rule& last = quad::gauss_jacobi01(kEndPoints, last_exp, 0.0);
  for (int k = 0; k < kEndPoints; ++k) {
    const double v = last.x[k];
    fn.u.push_back(m - h + h * v);
    fn.w.push_back(h * last.w[k] * std::pow(1 - v, -last_exp));
  }
  return fn;
}

}  // namespace

double covariance_factorization(double t, double s, const HurstParam& h, int cells) {
  if (cells < 1) throw ValidationError("covariance_factorization: cells must be >= 1");
  const double m = std::min(t, s), M = std::max(t, s);
  if (!(m > 0.0)) return 0.0;
  const double H = h.H;
  const FactorNodes fn = factor_nodes(m, cells, H, t == s ? 2 * H - 1 : H - 0.5);
  double acc = 0.0;
  for (size_t k = 0; k < fn.u.size(); ++k) acc += fn.w[k] * kernel_kh(m, fn.u[k], h) * kernel_kh(M, fn.u[k], h);
  return acc;
}

double covariance_factorization_error(const HurstParam& h, double T, int points, int cells) {
  const double H = h.H;
  double worst = 0.0;
  for (int b = 1; b <= points; ++b) {
    const double m = T * b / points;
    for (int diag = 0; diag < 2; ++diag) {
      const FactorNodes fn = factor_nodes(m, cells, H, diag ? 2 * H - 1 : H - 0.5);
      std::vector<double> km(fn.u.size());
      for (size_t k = 0; k < fn.u.size(); ++k) km[k] = kernel_kh(m, fn.u[k], h);
      const int a_lo = diag ? b : b + 1;
      const int a_hi = diag ? b : points;
      for (int a = a_lo; a <= a_hi; ++a) {
        const double t = T * a / points;
        double acc = 0.0;
        for (size_t k = 0; k < fn.u.size(); ++k)
          acc += fn.w[k] * km[k] * (a == b ? km[k] : kernel_kh(t, fn.u[k], h));
        const double exact = covariance_rh(t, m, H);
        worst = std::max(worst, std::abs(acc - exact) / exact);
      }
    }
  }
  return worst;
}

GridFunction kh_star(const GridFunction& phi, const HurstParam& h) {
  validate(phi);
  if (phi.dim != 1) throw ValidationError("kh_star: scalar input required");
  const TimeGrid& g = phi.grid;
  const int N = g.N;
  const double T = g.T, dt = g.dt(), H = h.H;
  GridFunction out(g, 1);
  const quad::Rule& gl = quad::gauss_legendre01(kCellNodes);
  const quad::Rule& gj = quad::gauss_jacobi01(kSingularCellNodes, 0.0, H - 0.5);
  for (int i = 1; i < N; ++i) {
    const double s = g.node(i);
    double acc = kernel_kh(T, s, h) * phi(i);
    // Cell starting at s: phi(t)-phi(s) = slope (t-s) cancels one power.
    const double slope0 = (phi(i + 1) - phi(i)) / dt;
    double c0 = 0.0;
    for (int k = 0; k < kSingularCellNodes; ++k) c0 += gj.w[k] * std::pow(s + dt * gj.x[k], H - 0.5);
    acc += slope0 * h.cH * (H - 0.5) * std::pow(s, 0.5 - H) * std::pow(dt, H + 0.5) * c0;
    for (int j = i + 1; j < N; ++j) {
      const double a = g.node(j);
      double cell = 0.0;
      for (int k = 0; k < kCellNodes; ++k) {
        const double v = gl.x[k];
        const double t = a + dt * v;
        const double ph = phi(j) + (phi(j + 1) - phi(j)) * v;
        cell += gl.w[k] * (ph - phi(i)) * kernel_kh_dt(t, s, h);
      }
      acc += dt * cell;
    }
    out(i) = acc;
  }
  const double edge = std::pow(2.0, 0.5 - H) / (H + 0.5);
  out(0) = phi(0) == 0.0 ? 0.0 : (N > 1 ? out(1) * edge : 0.0);
  out(N) = phi(N) == 0.0 ? 0.0 : (N > 1 ? out(N - 1) * edge : 0.0);
  return out;
}

double kinv_beta_constant(double H) { return std::tgamma(1.5 - H) / std::tgamma(2.0 - 2.0 * H); }
double kinv_displayed_constant(double H) { return std::tgamma(1.5 - H) / std::tgamma(1.0 - 2.0 * H); }
double kernel_operator_constant(const HurstParam& h) { return h.cH * std::tgamma(h.H + 0.5); }

KhInverseOperator::KhInverseOperator(const TimeGrid& g, const HurstParam& h)
    : grid_(g), p_(0.5 - h.H), weights_(g.N, g.dt(), 0.5 - h.H) {
  pos_pow_.resize(g.N + 1);
  neg_pow_.resize(g.N + 1);
  for (int i = 0; i <= g.N; ++i) {
    const double t = g.node(i);
    pos_pow_[i] = std::pow(t, p_);
    neg_pow_[i] = i == 0 ? 0.0 : std::pow(t, -p_);
  }
}

void KhInverseOperator::apply(const double* dphi, int in_stride, double* out, int out_stride) const {
  const int N = grid_.N;
  std::vector<double> g(N + 1);
  for (int i = 0; i <= N; ++i) g[i] = pos_pow_[i] * dphi[static_cast<size_t>(i) * in_stride];
  for (int i = 1; i <= N; ++i) out[static_cast<size_t>(i) * out_stride] = neg_pow_[i] * weights_.at(g.data(), i);
  if (N >= 2) {
    const double o1 = out[out_stride], o2 = out[2 * static_cast<size_t>(out_stride)];
    const double c = (o2 - o1) / (pos_pow_[2] - pos_pow_[1]);
    out[0] = o1 - c * pos_pow_[1];
  } else {
    out[0] = out[out_stride];
  }
}

GridFunction kh_inverse_ac(const GridFunction& dphi, const HurstParam& h) {
  if (dphi.values.empty()) throw ValidationError("kh_inverse_ac: empty input");
  validate(dphi);
  const KhInverseOperator op(dphi.grid, h);
  GridFunction out(dphi.grid, dphi.dim);
  for (int c = 0; c < dphi.dim; ++c) op.apply(dphi.values.data() + c, dphi.dim, out.values.data() + c, dphi.dim);
  return out;
}

}  // namespace fbm
