#include "fbmlab/girsanov.hpp"

#include <algorithm>
#include <cmath>

#include "fbmlab/fraccalc.hpp"
#include "fbmlab/quadrature.hpp"

namespace fbm {

namespace {

void require_bounded(const Drift& b) {
  if (!b.bounded()) throw ValidationError("drift " + b.name() + " is unbounded; the measure change needs sup|b| < inf");
}

}  // namespace

void theta_from_drift(const Drift& b, const double* X, const KhInverseOperator& op, double* out) {
  const TimeGrid& g = op.grid();
  const int d = b.dim(), N = g.N;
  std::vector<double> dens(static_cast<size_t>(N + 1) * d);
  for (int i = 0; i <= N; ++i)
    b.eval(g.node(i), X + static_cast<size_t>(i) * d, dens.data() + static_cast<size_t>(i) * d);
  for (int c = 0; c < d; ++c) op.apply(dens.data() + c, d, out + c, d);
  const double scale = 1.0 / kernel_operator_constant(HurstParam(op.hurst()));
  for (size_t k = 0; k < dens.size(); ++k) out[k] *= scale;
  // |theta_s| <= C sup|b| s^{1/2-H}, so theta(0) = 0 for bounded b. The
  // operator's extrapolated s=0 entry would look ahead to t_1 and t_2 and break
  // adaptedness of the weight.
  for (int c = 0; c < d; ++c) out[c] = 0.0;
}

GridFunction theta_from_drift(const Drift& b, const GridFunction& X, const HurstParam& h) {
  require_bounded(b);
  if (X.dim != b.dim()) throw ValidationError("theta_from_drift: path dimension differs from the drift");
  validate(X);
  const KhInverseOperator op(X.grid, h);
  GridFunction out(X.grid, X.dim);
  theta_from_drift(b, X.values.data(), op, out.values.data());
  return out;
}

void doleans_log(const double* theta, const double* dW, int N, int d, double dt, double* logZ) {
  logZ[0] = 0.0;
  for (int i = 0; i < N; ++i) {
    double dot = 0.0, sq = 0.0;
    for (int c = 0; c < d; ++c) {
      const double th = theta[static_cast<size_t>(i) * d + c];
      dot += th * dW[static_cast<size_t>(i) * d + c];
      sq += th * th;
    }
    logZ[i + 1] = logZ[i] + dot - 0.5 * sq * dt;
  }
}

GirsanovWeight doleans_exponential(const GridFunction& theta, const std::vector<double>& dW) {
  const int N = theta.grid.N, d = theta.dim;
  if (dW.size() != static_cast<size_t>(N) * d)
    throw ValidationError("doleans_exponential: increments do not match the grid of theta");
  validate(theta);
  GirsanovWeight w{theta, GridFunction(theta.grid, 1), 1.0};
  doleans_log(theta.values.data(), dW.data(), N, d, theta.grid.dt(), w.logZ.values.data());
  w.ZT = std::exp(w.logZ.values[N]);
  if (!std::isfinite(w.ZT)) throw NumericError("doleans_exponential: Z overflowed");
  return w;
}

std::vector<std::string> spatial_test_catalog() { return {"one", "bump", "gauss", "cos"}; }

SpatialTest make_spatial_test(const std::string& name) {
  if (name == "one") return [](const double*, int) { return 1.0; };
  if (name == "bump")
    return [](const double* x, int d) {
      double v = 1.0;
      for (int c = 0; c < d; ++c) v *= quad::bump::value(0.5 * x[c]);
      return v;
    };
  if (name == "gauss")
    return [](const double* x, int d) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += x[c] * x[c];
      return std::exp(-0.5 * s);
    };
  if (name == "cos")
    return [](const double* x, int d) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += x[c];
      return std::cos(s);
    };
  throw ValidationError("unknown test function '" + name + "'");
}

std::vector<double> girsanov_weights(const Drift& b, const std::vector<double>& x, int t_index,
                                     const FbmEnsemble& ens, int workers) {
  require_bounded(b);
  if (ens.n_paths == 0) throw ValidationError("girsanov_weights: empty ensemble");
  if (!ens.has_increments()) throw ValidationError("girsanov_weights: ensemble carries no Wiener increments");
  if (ens.d != b.dim() || static_cast<int>(x.size()) != b.dim())
    throw ValidationError("girsanov_weights: dimension mismatch");
  if (t_index < 0 || t_index > ens.grid.N) throw ValidationError("girsanov_weights: t index out of range");
  const int N = ens.grid.N, d = ens.d;
  const KhInverseOperator op(ens.grid, HurstParam(ens.H));
  std::vector<double> Z(ens.n_paths);
  parallel_for(ens.n_paths, workers > 0 ? workers : default_workers(), [&](int p) {
    std::vector<double> X(static_cast<size_t>(N + 1) * d), th(X.size()), logZ(N + 1);
    const double* B = ens.path(p);
    for (int i = 0; i <= N; ++i)
      for (int c = 0; c < d; ++c) X[static_cast<size_t>(i) * d + c] = x[c] + B[static_cast<size_t>(i) * d + c];
    theta_from_drift(b, X.data(), op, th.data());
    doleans_log(th.data(), ens.increments(p), t_index, d, ens.grid.dt(), logZ.data());
    Z[p] = std::exp(logZ[t_index]);
  });
  for (double z : Z)
    if (!std::isfinite(z)) throw NumericError("girsanov_weights: non-finite weight");
  return Z;
}

Estimate weak_solution_estimator(const Drift& b, const SpatialTest& phi, const std::vector<double>& x, int t_index,
                                 const FbmEnsemble& ens, int workers) {
  const std::vector<double> Z = girsanov_weights(b, x, t_index, ens, workers);
  const int d = ens.d;
  MeanAccumulator acc;
  std::vector<double> X(d);
  for (int p = 0; p < ens.n_paths; ++p) {
    for (int c = 0; c < d; ++c) X[c] = x[c] + ens.value(p, t_index, c);
    acc.push(phi(X.data(), d) * Z[p]);
  }
  return {acc.mean, acc.se()};
}

NovikovBound novikov_bound(double sup_norm, double H, double T, double mu) {
  if (!(H > 0.0 && H < 0.5)) throw ValidationError("novikov_bound: H must lie in (0, 1/2)");
  const double disp = kinv_displayed_constant(H), beta = kinv_beta_constant(H);
  const double scale = std::abs(mu) * std::pow(T, 2.0 * (1.0 - H)) * sup_norm * sup_norm;
  return {std::exp(scale * disp * disp), std::exp(scale * beta * beta)};
}

double theta_bound(double sup_norm, double H, double T) {
  const double beta = kinv_beta_constant(H) / kernel_operator_constant(HurstParam(H));
  return beta * beta * sup_norm * sup_norm * std::pow(T, 1.0 - 2.0 * H);
}

ThetaBoundCheck check_theta_bound(const GridFunction& theta, double sup_norm, double H) {
  ThetaBoundCheck r;
  const double T = theta.grid.T;
  const double bound_beta = theta_bound(sup_norm, H, T);
  const double disp = kinv_displayed_constant(H) / kernel_operator_constant(HurstParam(H));
  const double bound_disp = disp * disp * sup_norm * sup_norm * std::pow(T, 1.0 - 2.0 * H);
  for (int i = 0; i <= theta.grid.N; ++i) {
    double sq = 0.0;
    for (int c = 0; c < theta.dim; ++c) sq += theta(i, c) * theta(i, c);
    if (sq == 0.0) continue;
    const double rb = bound_beta > 0.0 ? sq / bound_beta : INFINITY;
    if (rb > r.max_ratio_beta) {
      r.max_ratio_beta = rb;
      r.worst_node = i;
    }
    r.max_ratio_displayed = std::max(r.max_ratio_displayed, bound_disp > 0.0 ? sq / bound_disp : INFINITY);
  }
  return r;
}

FracImageCheck frac_image_check(const Drift& b, const GridFunction& X, double H) {
  require_bounded(b);
  if (X.dim != b.dim()) throw ValidationError("frac_image_check: path dimension differs from the drift");
  const TimeGrid& g = X.grid;
  const int d = b.dim(), N = g.N;
  GridFunction F(g, 1);
  std::vector<double> v(d);
  double prev = 0.0;
  for (int i = 0; i <= N; ++i) {
    b.eval(g.node(i), &X.values[static_cast<size_t>(i) * d], v.data());
    double n2 = 0.0;
    for (double a : v) n2 += a * a;
    const double cur = std::sqrt(n2);
    F(i) = i == 0 ? 0.0 : F(i - 1) + 0.5 * g.dt() * (prev + cur);
    prev = cur;
  }
  FracImageCheck r;
  if (b.sup_norm() == 0.0) return r;
  const GridFunction D = frac_derivative(F, FracOrder{H + 0.5, Side::Left, 0.0, g.T});
  const double c = b.sup_norm() / std::tgamma(1.5 - H);
  for (int i = 1; i <= N; ++i) {
    if (!std::isfinite(D(i))) r.finite = false;
    r.max_ratio = std::max(r.max_ratio, std::abs(D(i)) / (c * std::pow(g.node(i), 0.5 - H)));
  }
  return r;
}

}  // namespace fbm
