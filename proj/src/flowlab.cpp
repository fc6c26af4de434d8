#include "fbmlab/flowlab.hpp"

#include <algorithm>
#include <cmath>

#include "fbmlab/kernel.hpp"

namespace fbm {

namespace {

size_t ipow(int d, int e) {
  size_t r = 1;
  for (int k = 0; k < e; ++k) r *= static_cast<size_t>(d);
  return r;
}

// One Euler step of the derivative tensors, in place. Db is d x d, D2b is
// d x d x d, D3b is d^4; J[j] points at the order-(j+1) block of node i and
// Jn[j] at node i+1.
void step_tensors(int d, int order, double dt, const double* Db, const double* D2b, const double* D3b,
                  const std::vector<const double*>& J, const std::vector<double*>& Jn) {
  const double* J1 = J[0];
  // Order 1: J1n = J1 + dt Db J1.
  for (int r = 0; r < d; ++r)
    for (int p = 0; p < d; ++p) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += Db[r * d + a] * J1[a * d + p];
      Jn[0][r * d + p] = J1[r * d + p] + dt * s;
    }
  if (order < 2) return;
  const double* J2 = J[1];
  auto j2 = [&](int a, int p, int q) { return J2[(a * d + p) * d + q]; };
  for (int r = 0; r < d; ++r)
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) {
          s += Db[r * d + a] * j2(a, p, q);
          for (int c = 0; c < d; ++c) s += D2b[(r * d + a) * d + c] * J1[a * d + p] * J1[c * d + q];
        }
        Jn[1][(r * d + p) * d + q] = j2(r, p, q) + dt * s;
      }
  if (order < 3) return;
  const double* J3 = J[2];
  for (int r = 0; r < d; ++r)
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q)
        for (int u = 0; u < d; ++u) {
          double s = 0.0;
          for (int a = 0; a < d; ++a) {
            s += Db[r * d + a] * J3[((a * d + p) * d + q) * d + u];
            for (int c = 0; c < d; ++c) {
              const double h = D2b[(r * d + a) * d + c];
              s += h * (j2(a, p, q) * J1[c * d + u] + j2(a, p, u) * J1[c * d + q] + J1[a * d + p] * j2(c, q, u));
              for (int e = 0; e < d; ++e)
                s += D3b[((r * d + a) * d + c) * d + e] * J1[a * d + p] * J1[c * d + q] * J1[e * d + u];
            }
          }
          const size_t idx = ((static_cast<size_t>(r) * d + p) * d + q) * d + u;
          Jn[2][idx] = J3[idx] + dt * s;
        }
}

void require_differentiable(const Drift& b, int order, const char* who) {
  if (b.max_order() < order)
    throw ValidationError(std::string(who) + ": drift " + b.name() + " has derivatives only up to order " +
                          std::to_string(b.max_order()));
}

// K_H(t_i, t_q) for 1 <= q < i <= n and the diagonal cell averages.
struct KernelTable {
  int n = 0;
  std::vector<double> K;     // (n+1) x (n+1), column q contiguous
  std::vector<double> diag;  // diag[q]

  double at(int i, int q) const { return K[static_cast<size_t>(q) * (n + 1) + i]; }
  double& at(int i, int q) { return K[static_cast<size_t>(q) * (n + 1) + i]; }
};

KernelTable kernel_table(const TimeGrid& g, int n, const HurstParam& h) {
  KernelTable kt;
  kt.n = n;
  kt.K.assign(static_cast<size_t>(n + 1) * (n + 1), 0.0);
  kt.diag.assign(n + 1, 0.0);
  for (int q = 1; q <= n; ++q) {
    kt.diag[q] = kernel_diagonal_average(g.node(q), g.dt(), h);
    for (int i = q + 1; i <= n; ++i) kt.at(i, q) = kernel_kh(g.node(i), g.node(q), h);
  }
  return kt;
}

// D_{t_q} X at nodes q..n; Db holds the Jacobians at nodes 0..n-1. Writes
// (n+1)*d*d values into out (zero before q).
void malliavin_into(int d, int q, int n, double dt, const KernelTable& kt, const double* Db, double scale,
                    double* out) {
  const size_t dd = static_cast<size_t>(d) * d;
  std::fill(out, out + (n + 1) * dd, 0.0);
  std::vector<double> Z(dd, 0.0);
  double* Y = out + q * dd;
  for (int c = 0; c < d; ++c) Y[c * d + c] = scale * kt.diag[q];
  for (int i = q; i < n; ++i) {
    const double* Yi = out + i * dd;
    const double* J = Db + i * dd;
    for (int r = 0; r < d; ++r)
      for (int p = 0; p < d; ++p) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += J[r * d + a] * Yi[a * d + p];
        Z[r * d + p] += dt * s;
      }
    double* Yn = out + (i + 1) * dd;
    const double k = scale * kt.at(i + 1, q);
    for (size_t e = 0; e < dd; ++e) Yn[e] = Z[e];
    for (int c = 0; c < d; ++c) Yn[c * d + c] += k;
  }
}

// Phi[j] = (I + dt Db_{n-1}) ... (I + dt Db_j), Phi[n] = I.
void backward_propagators(int d, int n, double dt, const double* Db, double* Phi) {
  const size_t dd = static_cast<size_t>(d) * d;
  double* P = Phi + n * dd;
  std::fill(P, P + dd, 0.0);
  for (int c = 0; c < d; ++c) P[c * d + c] = 1.0;
  for (int j = n - 1; j >= 0; --j) {
    const double* Pn = Phi + (j + 1) * dd;
    const double* J = Db + j * dd;
    double* Pj = Phi + j * dd;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        double s = Pn[r * d + c];
        for (int a = 0; a < d; ++a) s += dt * Pn[r * d + a] * J[a * d + c];
        Pj[r * d + c] = s;
      }
  }
}

// D_{t_q} X_{t_n} from the propagators: the recursion of malliavin_into reads
// Y_{i+1} = (I + dt Db_i) Y_i + (K_{i+1,q} - K_{i,q}) I for i > q.
void slice_at_end(int d, int q, int n, double dt, const KernelTable& kt, const double* Db, const double* Phi,
                  double* tmp, double* out) {
  const size_t dd = static_cast<size_t>(d) * d;
  const double kd = kt.diag[q];
  if (q == n) {
    std::fill(out, out + dd, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = kd;
    return;
  }
  // Y_{q+1} = K_{q+1,q} I + dt kd Db_q.
  const double* J = Db + q * dd;
  for (size_t e = 0; e < dd; ++e) tmp[e] = dt * kd * J[e];
  for (int c = 0; c < d; ++c) tmp[c * d + c] += kt.at(q + 1, q);
  const double* P = Phi + (q + 1) * dd;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += P[r * d + a] * tmp[a * d + c];
      out[r * d + c] = s;
    }
  if (d == 1) {
    const double* Kq = &kt.K[static_cast<size_t>(q) * (n + 1)];
    double s = 0.0;
    for (int j = q + 1; j < n; ++j) s += Phi[j + 1] * (Kq[j + 1] - Kq[j]);
    out[0] += s;
    return;
  }
  for (int j = q + 1; j < n; ++j) {
    const double dk = kt.at(j + 1, q) - kt.at(j, q);
    const double* Pj = Phi + (j + 1) * dd;
    for (size_t e = 0; e < dd; ++e) out[e] += dk * Pj[e];
  }
}

// Order-j spatial derivative used for the step from node i to i+1: the node
// value (Euler) or, in d = 1, the mean of b^{(j)} along the segment
// [X_i, X_{i+1}], i.e. the divided difference of b^{(j-1)}.
void step_derivative(const Drift& b, FlowScheme scheme, double t, const double* X0, const double* X1, int order,
                     double* out) {
  if (scheme == FlowScheme::Secant) {
    const double dx = X1[0] - X0[0];
    if (std::abs(dx) > 1e-12 * (1.0 + std::abs(X0[0]))) {
      double hi, lo;
      if (order == 1) {
        b.eval(t, X1, &hi);
        b.eval(t, X0, &lo);
      } else {
        b.derivative(t, X1, order - 1, &hi);
        b.derivative(t, X0, order - 1, &lo);
      }
      out[0] = (hi - lo) / dx;
      return;
    }
  }
  b.derivative(t, X0, order, out);
}

void check_scheme(FlowScheme scheme, int d, const char* who) {
  if (scheme == FlowScheme::Secant && d != 1)
    throw ValidationError(std::string(who) + ": the secant step rule is defined for d = 1 only");
}

void jacobians(const Drift& b, FlowScheme scheme, const TimeGrid& g, const double* X, int n, double* Db) {
  const int d = b.dim();
  for (int i = 0; i < n; ++i)
    step_derivative(b, scheme, g.node(i), X + static_cast<size_t>(i) * d, X + static_cast<size_t>(i + 1) * d, 1,
                    Db + static_cast<size_t>(i) * d * d);
}

}  // namespace

// ---------------------------------------------------------------- variational

const double* VariationalState::at(int j, int i) const {
  if (j < 1 || j > order) throw ValidationError("VariationalState: order out of range");
  return tensors[j - 1].data() + static_cast<size_t>(i) * ipow(base.d, j + 1);
}

double VariationalState::norm(int j, int i) const {
  const double* T = at(j, i);
  const size_t n = ipow(base.d, j + 1);
  double s = 0.0;
  for (size_t e = 0; e < n; ++e) s += T[e] * T[e];
  return std::sqrt(s);
}

VariationalState variational_flow(const Drift& b, const std::vector<double>& x0, const TimeGrid& g,
                                  const double* noise, int order, FlowScheme scheme) {
  if (order < 1 || order > kMaxFlowOrder) throw ValidationError("variational_flow: order must be 1, 2 or 3");
  require_differentiable(b, order, "variational_flow");
  check_scheme(scheme, b.dim(), "variational_flow");
  const int d = b.dim(), N = g.N;
  VariationalState st;
  st.base = euler_solve(b, x0, g, noise);
  st.order = order;
  st.tensors.resize(order);
  for (int j = 1; j <= order; ++j) st.tensors[j - 1].assign(static_cast<size_t>(N + 1) * ipow(d, j + 1), 0.0);
  for (int c = 0; c < d; ++c) st.tensors[0][c * d + c] = 1.0;
  std::vector<double> Db(ipow(d, 2)), D2b(order >= 2 ? ipow(d, 3) : 0), D3b(order >= 3 ? ipow(d, 4) : 0);
  std::vector<const double*> J(order);
  std::vector<double*> Jn(order);
  for (int i = 0; i < N; ++i) {
    const double t = g.node(i);
    const double* X = st.base.values.data() + static_cast<size_t>(i) * d;
    const double* Xn = X + d;
    step_derivative(b, scheme, t, X, Xn, 1, Db.data());
    if (order >= 2) step_derivative(b, scheme, t, X, Xn, 2, D2b.data());
    if (order >= 3) step_derivative(b, scheme, t, X, Xn, 3, D3b.data());
    for (int j = 0; j < order; ++j) {
      const size_t blk = ipow(d, j + 2);
      J[j] = st.tensors[j].data() + static_cast<size_t>(i) * blk;
      Jn[j] = st.tensors[j].data() + static_cast<size_t>(i + 1) * blk;
    }
    step_tensors(d, order, g.dt(), Db.data(), D2b.data(), D3b.data(), J, Jn);
  }
  for (const auto& T : st.tensors)
    for (double v : T)
      if (!std::isfinite(v)) throw NumericError("variational_flow: derivative overflowed");
  return st;
}

// ---------------------------------------------------------------- Malliavin

MalliavinSlice malliavin_derivative(const Drift& b, const SolutionPath& path, int theta_index, double H,
                                    double kernel_scale, FlowScheme scheme) {
  require_differentiable(b, 1, "malliavin_derivative");
  check_scheme(scheme, b.dim(), "malliavin_derivative");
  const TimeGrid& g = path.grid;
  const int d = path.d, N = g.N;
  if (d != b.dim()) throw ValidationError("malliavin_derivative: path dimension differs from the drift");
  if (theta_index < 1 || theta_index > N)
    throw ValidationError("malliavin_derivative: theta index must lie in 1..N (the kernel is undefined at s = 0)");
  const HurstParam h(H);
  // Only column theta_index of the kernel table is needed.
  KernelTable kt;
  kt.n = N;
  kt.K.assign(static_cast<size_t>(N + 1) * (N + 1), 0.0);
  kt.diag.assign(N + 1, 0.0);
  kt.diag[theta_index] = kernel_diagonal_average(g.node(theta_index), g.dt(), h);
  for (int i = theta_index + 1; i <= N; ++i)
    kt.at(i, theta_index) = kernel_kh(g.node(i), g.node(theta_index), h);
  std::vector<double> Db(static_cast<size_t>(N) * d * d);
  jacobians(b, scheme, g, path.values.data(), N, Db.data());
  MalliavinSlice s;
  s.theta_index = theta_index;
  s.d = d;
  s.values.resize(static_cast<size_t>(N + 1) * d * d);
  malliavin_into(d, theta_index, N, g.dt(), kt, Db.data(), kernel_scale, s.values.data());
  return s;
}

// ---------------------------------------------------------------- compactness

CompactnessTable compactness_diagnostic(const DriftPtr& b, const std::vector<int>& levels, const FbmEnsemble& ens,
                                        const std::vector<double>& x0, int t_index, double beta, FlowScheme scheme,
                                        int workers) {
  if (!(beta > 0.0 && beta < 0.5)) throw ValidationError("compactness_diagnostic: beta must lie in (0, 1/2)");
  if (levels.empty()) throw ValidationError("compactness_diagnostic: no mollification levels");
  if (ens.n_paths == 0) throw ValidationError("compactness_diagnostic: empty ensemble");
  if (ens.d != b->dim() || static_cast<int>(x0.size()) != b->dim())
    throw ValidationError("compactness_diagnostic: dimension mismatch");
  if (t_index < 2 || t_index > ens.grid.N) throw ValidationError("compactness_diagnostic: t index must lie in 2..N");
  check_scheme(scheme, b->dim(), "compactness_diagnostic");
  const TimeGrid& g = ens.grid;
  const int d = ens.d, n = t_index, L = static_cast<int>(levels.size());
  const size_t dd = static_cast<size_t>(d) * d;
  std::vector<DriftPtr> drifts;
  for (int lv : levels) drifts.push_back(b->kind() == DriftKind::Singular ? mollify(b, lv) : b);
  for (const auto& bn : drifts) require_differentiable(*bn, 1, "compactness_diagnostic");

  const KernelTable kt = kernel_table(g, n, HurstParam(ens.H));
  const double dt = g.dt();
  // dt^2 / |t_i - t_j|^{1+2beta} depends on |i - j| only.
  std::vector<double> wgap(n + 1, 0.0);
  for (int k = 1; k <= n; ++k) wgap[k] = dt * dt / std::pow(k * dt, 1.0 + 2.0 * beta);

  std::vector<double> stat(static_cast<size_t>(ens.n_paths) * L), energy(stat.size());
  parallel_for(ens.n_paths, workers > 0 ? workers : default_workers(), [&](int p) {
    std::vector<double> X(static_cast<size_t>(g.N + 1) * d), Db(static_cast<size_t>(n) * dd);
    std::vector<double> Phi(static_cast<size_t>(n + 1) * dd), D(static_cast<size_t>(n + 1) * dd), tmp(dd);
    for (int l = 0; l < L; ++l) {
      euler_solve_into(*drifts[l], x0.data(), g, ens.path(p), X.data());
      jacobians(*drifts[l], scheme, g, X.data(), n, Db.data());
      backward_propagators(d, n, dt, Db.data(), Phi.data());
      for (int q = 1; q <= n; ++q) slice_at_end(d, q, n, dt, kt, Db.data(), Phi.data(), tmp.data(), &D[q * dd]);
      double s = 0.0, e = 0.0;
      for (int i = 1; i <= n; ++i) {
        double sq = 0.0;
        for (size_t c = 0; c < dd; ++c) sq += D[i * dd + c] * D[i * dd + c];
        e += dt * sq;
        for (int j = i + 1; j <= n; ++j) {
          double diff = 0.0;
          for (size_t c = 0; c < dd; ++c) {
            const double v = D[i * dd + c] - D[j * dd + c];
            diff += v * v;
          }
          s += 2.0 * wgap[j - i] * diff;
        }
      }
      stat[static_cast<size_t>(p) * L + l] = s;
      energy[static_cast<size_t>(p) * L + l] = e;
    }
  });
  CompactnessTable t;
  t.levels = levels;
  for (int l = 0; l < L; ++l) {
    MeanAccumulator a, e;
    for (int p = 0; p < ens.n_paths; ++p) {
      a.push(stat[static_cast<size_t>(p) * L + l]);
      e.push(energy[static_cast<size_t>(p) * L + l]);
    }
    t.stat.push_back(a.mean);
    t.stat_se.push_back(a.se());
    t.energy.push_back(e.mean);
    t.energy_se.push_back(e.se());
    if (l == 0 || a.mean > t.sup_stat) {
      t.sup_stat = a.mean;
      t.sup_level = levels[l];
    }
    MeanAccumulator gr, inc;
    for (int p = 0; p < ens.n_paths; ++p) {
      const double* row = &stat[static_cast<size_t>(p) * L];
      gr.push(row[l] - row[0]);
      inc.push(l == 0 ? 0.0 : row[l] - row[l - 1]);
    }
    t.increment.push_back(inc.mean);
    t.increment_se.push_back(inc.se());
    if (l == 0 || gr.mean > t.growth) {
      t.growth = gr.mean;
      t.growth_se = gr.se();
    }
  }
  return t;
}

// ---------------------------------------------------------------- moment scan

std::vector<std::vector<double>> cube_stencil(const std::vector<double>& x0, double radius) {
  const int d = static_cast<int>(x0.size());
  if (d < 1 || d > 3) throw ValidationError("cube_stencil: dimension must be 1, 2 or 3");
  if (!(radius >= 0.0)) throw ValidationError("cube_stencil: radius must be non-negative");
  std::vector<std::vector<double>> pts;
  if (d == 1) {
    for (int k = 0; k < 9; ++k) pts.push_back({x0[0] - radius + radius * k / 4.0});
  } else if (d == 2) {
    for (int a = -1; a <= 1; ++a)
      for (int c = -1; c <= 1; ++c) pts.push_back({x0[0] + a * radius, x0[1] + c * radius});
  } else {
    pts.push_back(x0);
    for (int m = 0; m < 8; ++m)
      pts.push_back({x0[0] + ((m & 1) ? radius : -radius), x0[1] + ((m & 2) ? radius : -radius),
                     x0[2] + ((m & 4) ? radius : -radius)});
  }
  return pts;
}

MomentScan moment_scan(const MomentScanSpec& spec, int workers) {
  if (spec.k < 1 || spec.k > kMaxFlowOrder) throw ValidationError("moment_scan: k must be 1, 2 or 3");
  if (spec.p < 2 || spec.p % 2 != 0) throw ValidationError("moment_scan: p must be even and at least 2");
  if (spec.stencil.empty()) throw ValidationError("moment_scan: empty x stencil");
  if (spec.H.empty() || spec.levels.empty()) throw ValidationError("moment_scan: H grid and levels must be non-empty");
  if (spec.paths < 2) throw ValidationError("moment_scan: need at least two paths");
  check_scheme(spec.scheme, spec.d, "moment_scan");
  for (double H : spec.H)
    if (!(H > 0.0 && H < 0.5)) throw ValidationError("moment_scan: H must lie in (0, 1/2)");
  for (const auto& x : spec.stencil)
    if (static_cast<int>(x.size()) != spec.d) throw ValidationError("moment_scan: stencil point dimension differs from d");
  const DriftPtr b = make_drift(spec.drift, spec.d);
  std::vector<DriftPtr> drifts;
  for (int lv : spec.levels) drifts.push_back(b->kind() == DriftKind::Singular ? mollify(b, lv) : b);
  for (const auto& bn : drifts) require_differentiable(*bn, spec.k, "moment_scan");

  const TimeGrid g = make_grid(spec.T, spec.N);
  const int L = static_cast<int>(spec.levels.size()), S = static_cast<int>(spec.stencil.size());
  const int nH = static_cast<int>(spec.H.size());
  MomentScan out;
  out.threshold = 1.0 / (spec.d * (2.0 * spec.k + 1.0));
  out.H = spec.H;
  out.levels = spec.levels;

  const std::vector<double> zero(static_cast<size_t>(g.N + 1) * spec.d, 0.0);
  for (int l = 0; l < L; ++l) {
    double worst = 0.0;
    for (const auto& x : spec.stencil)
      worst = std::max(worst, std::pow(variational_flow(*drifts[l], x, g, zero.data(), spec.k, spec.scheme).norm(spec.k, g.N), spec.p));
    out.control.push_back(worst);
  }

  for (int h = 0; h < nH; ++h) {
    // One label for every H: the same Gaussian draws feed each Cholesky factor.
    const FbmEnsemble ens = sample_exact(g, spec.H[h], spec.d, spec.paths, spec.seed, spec.label);
    std::vector<double> vals(static_cast<size_t>(spec.paths) * L * S);
    parallel_for(spec.paths, workers > 0 ? workers : default_workers(), [&](int p) {
      for (int l = 0; l < L; ++l)
        for (int s = 0; s < S; ++s) {
          const VariationalState st = variational_flow(*drifts[l], spec.stencil[s], g, ens.path(p), spec.k, spec.scheme);
          vals[(static_cast<size_t>(p) * L + l) * S + s] = std::pow(st.norm(spec.k, g.N), spec.p);
        }
    });
    for (int l = 0; l < L; ++l) {
      double best = -1.0, best_se = 0.0;
      for (int s = 0; s < S; ++s) {
        MeanAccumulator acc;
        for (int p = 0; p < spec.paths; ++p) acc.push(vals[(static_cast<size_t>(p) * L + l) * S + s]);
        if (acc.mean > best) {
          best = acc.mean;
          best_se = acc.se();
        }
      }
      out.moment.push_back(best);
      out.moment_se.push_back(best_se);
    }
  }
  return out;
}

}  // namespace fbm
