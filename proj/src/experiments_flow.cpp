// flow-derivatives, compactness-stat and flow-scan.
#include <algorithm>
#include <cmath>

#include "experiment_support.hpp"
#include "fbmlab/flowlab.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/localtime.hpp"
#include "fbmlab/quadrature.hpp"

namespace fbm::exp {
namespace {

FlowScheme scheme_of(const std::string& s) {
  if (s == "euler") return FlowScheme::Euler;
  if (s == "secant") return FlowScheme::Secant;
  throw ValidationError("invalid parameter: scheme must be 'euler' or 'secant'");
}

// ---------------------------------------------------------------- flow-derivatives

json derivatives_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"N", 256},
              {"H", 0.2},
              {"d", {1, 2}},
              {"x0", 0.3},
              {"order", 3},
              {"fd_step", 1e-3},
              {"rel_tol", 1e-4},
              {"linear", {{"lambda", -1.0}, {"x0", 0.5}, {"rel_tol", 1e-12}}},
              {"malliavin", {{"H", 0.3}, {"theta_index", 64}, {"check_indices", {128, 256}}, {"rel_tol", 1e-2},
                             {"oracle_nodes", 64}}}};
}

// max over entries of |fd - v| / max(1, |v|) between the order-j tensor at
// the last node and central differences of the order-(j-1) tensor.
double fd_mismatch(const Drift& b, const std::vector<double>& x, const TimeGrid& g, const double* noise, int order,
                   double h) {
  const int d = b.dim(), N = g.N;
  const VariationalState st = variational_flow(b, x, g, noise, order);
  double worst = 0.0;
  for (int p = 0; p < d; ++p) {
    std::vector<double> xp = x, xm = x;
    xp[p] += h;
    xm[p] -= h;
    const VariationalState sp = variational_flow(b, xp, g, noise, std::max(1, order - 1));
    const VariationalState sm = variational_flow(b, xm, g, noise, std::max(1, order - 1));
    // The order-(j-1) tensor has d^j entries; the order-j entry with last index p.
    size_t lower = 1;
    for (int j = 0; j < order; ++j) lower *= d;
    for (size_t e = 0; e < lower; ++e) {
      double hi, lo;
      if (order == 1) {
        hi = sp.base(N, static_cast<int>(e));
        lo = sm.base(N, static_cast<int>(e));
      } else {
        hi = sp.at(order - 1, N)[e];
        lo = sm.at(order - 1, N)[e];
      }
      const double fd = (hi - lo) / (2.0 * h);
      const double v = st.at(order, N)[e * d + p];
      worst = std::max(worst, std::abs(fd - v) / std::max(1.0, std::abs(v)));
    }
  }
  return worst;
}

ExperimentReport run_derivatives(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "flow-derivatives";
  ExperimentReport r;
  const double T = num(cfg, "T"), H = num(cfg, "H"), x0 = num(cfg, "x0"), h = num(cfg, "fd_step"),
               tol = num(cfg, "rel_tol");
  const int N = integer(cfg, "N"), order = integer(cfg, "order");
  require_positive(T, "T");
  require_hurst(H);
  require_count(N, 2, 1 << 16, "N");
  require_count(order, 1, kMaxFlowOrder, "order");
  require_positive(h, "fd_step");
  const TimeGrid g = make_grid(T, N);

  CsvTable table({"d", "drift", "order", "max_rel_mismatch", "norm_at_T"});
  for (int d : integers(cfg, "d")) {
    require_count(d, 1, 3, "d");
    const FbmEnsemble ens = sample_exact(g, H, d, 1, seed_of(cfg), "flow-derivatives.d=" + std::to_string(d));
    const std::vector<double> x(d, x0);
    for (const auto& nm : smooth_catalog()) {
      const DriftPtr b = make_drift(nm, d);
      const int top = std::min(order, b->max_order());
      for (int j = 1; j <= top; ++j) {
        const double m = fd_mismatch(*b, x, g, ens.path(0), j, h);
        const double nrm = variational_flow(*b, x, g, ens.path(0), j).norm(j, N);
        table.row() << d << nm << j << m << nrm;
        r.add("fd.d=" + std::to_string(d) + "." + nm + ".order=" + std::to_string(j), m, tol, Check::Le);
      }
    }
    // b = 0: first derivative the identity, higher ones zero, at every node.
    const DriftPtr zero = make_drift("zero", d);
    const VariationalState st = variational_flow(*zero, x, g, ens.path(0), order);
    double dev = 0.0;
    for (int i = 0; i <= N; ++i) {
      for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) dev = std::max(dev, std::abs(st.at(1, i)[a * d + c] - (a == c ? 1.0 : 0.0)));
      for (int j = 2; j <= order; ++j) dev = std::max(dev, st.norm(j, i));
    }
    r.add("zero_drift.d=" + std::to_string(d) + ".max_abs_dev", dev, 0.0, Check::AbsLe);
  }
  table.write(ctx, name, "finite_differences");

  // b = lambda x: the Euler derivative is (1 + lambda dt)^N exactly.
  {
    const json& l = node(cfg, "linear");
    const double lam = num(l, "lambda");
    const DriftPtr b = make_drift("linear", 1, json{{"lambda", lam}});
    const FbmEnsemble ens = sample_exact(g, H, 1, 1, seed_of(cfg), "flow-derivatives.linear");
    const double v = variational_flow(*b, {num(l, "x0")}, g, ens.path(0), 1).at(1, N)[0];
    const double discrete = std::pow(1.0 + lam * g.dt(), N);
    r.add("linear.rel_err_vs_discrete", std::abs(v - discrete) / std::abs(discrete), num(l, "rel_tol"), Check::Le);
    r.diagnostic("linear.rel_err_vs_exponential", std::abs(v - std::exp(lam * T)) / std::exp(lam * T));
  }

  // Malliavin slices: b = 0 gives the kernel itself; b = lambda x the
  // variation-of-constants formula; the slice is linear in the kernel.
  {
    const json& m = node(cfg, "malliavin");
    const double Hm = num(m, "H");
    const int q = integer(m, "theta_index"), nodes = integer(m, "oracle_nodes");
    require_hurst(Hm, "malliavin.H");
    require_count(q, 1, N - 1, "malliavin.theta_index");
    require_count(nodes, 2, 1024, "malliavin.oracle_nodes");
    const HurstParam hp(Hm);
    const FbmEnsemble ens = sample_exact(g, Hm, 1, 1, seed_of(cfg), "flow-derivatives.malliavin");
    const DriftPtr zero = make_drift("zero", 1);
    const SolutionPath p0 = euler_solve(*zero, {0.0}, g, ens.path(0));
    const MalliavinSlice s = malliavin_derivative(*zero, p0, q, Hm);
    const MalliavinSlice s2 = malliavin_derivative(*zero, p0, q, Hm, 2.0);
    double err = 0.0, lin = 0.0, before = 0.0;
    for (int i = 0; i <= N; ++i) {
      if (i > q) {
        const double k = kernel_kh(g.node(i), g.node(q), hp);
        err = std::max(err, std::abs(s.at(i)[0] - k) / std::abs(k));
      }
      if (i < q) before = std::max(before, std::abs(s.at(i)[0]));
      lin = std::max(lin, std::abs(s2.at(i)[0] - 2.0 * s.at(i)[0]));
    }
    r.add("malliavin.zero_drift.max_rel_err_vs_kernel", err, 1e-14, Check::Le);
    r.add("malliavin.zero_drift.before_theta_max_abs", before, 0.0, Check::AbsLe);
    r.add("malliavin.kernel_doubling.max_abs_dev", lin, 1e-14, Check::Le);

    const double lam = num(node(cfg, "linear"), "lambda");
    const DriftPtr b = make_drift("linear", 1, json{{"lambda", lam}});
    const SolutionPath pl = euler_solve(*b, {0.0}, g, ens.path(0));
    const MalliavinSlice sl = malliavin_derivative(*b, pl, q, Hm);
    const double th = g.node(q);
    // u = theta + (t - theta) v absorbs the (u - theta)^{H-1/2} singularity.
    const quad::Rule& gj = quad::gauss_jacobi01(nodes, 0.0, Hm - 0.5);
    CsvTable mt({"t", "slice", "oracle"});
    double worst = 0.0;
    for (int i : integers(m, "check_indices")) {
      require_count(i, q + 1, N, "malliavin.check_indices");
      const double t = g.node(i);
      double acc = 0.0;
      for (size_t k = 0; k < gj.x.size(); ++k) {
        const double u = th + (t - th) * gj.x[k];
        acc += gj.w[k] * std::exp(lam * (t - u)) * kernel_kh(u, th, hp) / std::pow(gj.x[k], Hm - 0.5);
      }
      const double oracle = kernel_kh(t, th, hp) + lam * (t - th) * acc;
      worst = std::max(worst, std::abs(sl.at(i)[0] - oracle) / std::abs(oracle));
      mt.row() << t << sl.at(i)[0] << oracle;
    }
    mt.write(ctx, name, "malliavin_linear");
    r.add("malliavin.linear.max_rel_err", worst, num(m, "rel_tol"), Check::Le);
  }
  return r;
}

// ---------------------------------------------------------------- compactness-stat

json compactness_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"N", 512},
              {"H", 0.1},
              {"beta", 0.05},
              {"paths", 1000},
              {"levels", {4, 8, 16, 32}},
              {"drifts", {"sign_indicator", "radial_jump", "checkerboard"}},
              {"scheme", "secant"},
              {"x0", 0.0},
              {"se_mult", 2.0},
              {"zero_drift", {{"H", 0.3}, {"beta", 0.1}, {"N", {256, 512}}, {"nodes", 512}}},
              {"control", {{"H", 0.45}, {"paths", 200}}}};
}

ExperimentReport run_compactness(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "compactness-stat";
  ExperimentReport r;
  const double T = num(cfg, "T"), H = num(cfg, "H"), beta = num(cfg, "beta"), x0 = num(cfg, "x0"),
               k = num(cfg, "se_mult");
  const int N = integer(cfg, "N"), paths = integer(cfg, "paths");
  const auto levels = integers(cfg, "levels");
  const auto drifts = strs(cfg, "drifts");
  const FlowScheme scheme = scheme_of(str(cfg, "scheme"));
  require_positive(T, "T");
  require_hurst(H);
  require(beta > 0.0 && beta < 0.5, "beta must lie in (0, 1/2)");
  require_count(N, 2, 8192, "N");
  require_count(paths, 2, 1000000, "paths");
  require(!levels.empty(), "levels must not be empty");
  for (int l : levels) require_count(l, 1, 1 << 20, "levels");
  const TimeGrid g = make_grid(T, N);
  const FbmEnsemble ens = sample_exact(g, H, 1, paths, seed_of(cfg), "compactness-stat");

  CsvTable table({"role", "drift", "H", "level", "stat", "stat_se", "increment", "increment_se", "energy",
                  "energy_se"});
  for (const auto& nm : drifts) {
    const CompactnessTable ct = compactness_diagnostic(make_drift(nm, 1), levels, ens, {x0}, N, beta, scheme, ctx.workers);
    double excess = -INFINITY;
    for (size_t l = 0; l < levels.size(); ++l) {
      table.row() << "study" << nm << H << levels[l] << ct.stat[l] << ct.stat_se[l] << ct.increment[l]
                  << ct.increment_se[l] << ct.energy[l] << ct.energy_se[l];
      if (l) excess = std::max(excess, ct.stat[l] - ct.stat[l - 1] - k * std::hypot(ct.stat_se[l], ct.stat_se[l - 1]));
    }
    if (levels.size() > 1) r.add("study." + nm + ".max_increase_over_se", excess, 0.0, Check::Le);
    r.diagnostic("study." + nm + ".sup_stat", ct.sup_stat);
    r.diagnostic("study." + nm + ".paired_growth", ct.growth, ct.growth_se);
  }

  // b = 0: the statistic is deterministic and equals d times the double
  // integral at gamma = 1 + 2 beta. Richardson in N at the known rate.
  {
    const json& z = node(cfg, "zero_drift");
    const double Hz = num(z, "H"), bz = num(z, "beta");
    const auto Ns = integers(z, "N");
    require_hurst(Hz, "zero_drift.H");
    require(bz > 0.0 && bz < Hz, "zero_drift.beta must lie in (0, H)");
    require(Ns.size() == 2 && Ns[1] == 2 * Ns[0], "zero_drift.N must be {n, 2n}");
    double S[2];
    for (int a = 0; a < 2; ++a) {
      require_count(Ns[a], 4, 8192, "zero_drift.N");
      const TimeGrid gz = make_grid(T, Ns[a]);
      const FbmEnsemble ez = sample_exact(gz, Hz, 1, 1, seed_of(cfg), "compactness-stat.zero");
      S[a] = compactness_diagnostic(make_drift("zero", 1), {1}, ez, {0.0}, Ns[a], bz, FlowScheme::Euler, 1).stat[0];
    }
    const double A = appendix_double_integral(Hz, 1.0 + 2.0 * bz, T, integer(z, "nodes"));
    const double p = 2.0 * Hz - 2.0 * bz;
    const double gap = std::abs(S[1] - S[0]) / (std::pow(2.0, p) - 1.0);
    const double ext = S[1] + (S[1] - S[0]) / (std::pow(2.0, p) - 1.0);
    r.add("zero_drift.extrapolation_error_over_gap", std::abs(ext - A) / gap, 1.0, Check::Le);
    r.diagnostic("zero_drift.stat_fine", S[1]);
    r.diagnostic("zero_drift.extrapolated", ext);
    r.diagnostic("zero_drift.double_integral", A);
    table.row() << "zero_drift" << "zero" << Hz << 0 << S[1] << 0.0 << S[1] - S[0] << 0.0 << ext << A;
  }

  // Out-of-hypothesis control, reported only.
  {
    const json& c = node(cfg, "control");
    const double Hc = num(c, "H");
    const int pc = integer(c, "paths");
    require_hurst(Hc, "control.H");
    require_count(pc, 2, 1000000, "control.paths");
    const FbmEnsemble ec = sample_exact(g, Hc, 1, pc, seed_of(cfg), "compactness-stat.control");
    const std::string nm = drifts.empty() ? "sign_indicator" : drifts.front();
    const CompactnessTable ct = compactness_diagnostic(make_drift(nm, 1), levels, ec, {x0}, N, beta, scheme, ctx.workers);
    for (size_t l = 0; l < levels.size(); ++l) {
      table.row() << "control" << nm << Hc << levels[l] << ct.stat[l] << ct.stat_se[l] << ct.increment[l]
                  << ct.increment_se[l] << ct.energy[l] << ct.energy_se[l];
      r.diagnostic("control." + nm + ".level=" + std::to_string(levels[l]), ct.stat[l], ct.stat_se[l]);
    }
  }
  table.write(ctx, name, "levels");
  return r;
}

// ---------------------------------------------------------------- flow-scan

json scan_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"N", 512},
              {"paths", 500},
              {"p", 2},
              {"H", {0.05, 0.1, 0.2, 0.3, 0.4}},
              {"levels", {4, 8, 16, 32}},
              {"stencil_radius", 1.0},
              {"cases", json::array({json{{"d", 1}, {"k", 1}, {"drift", "sign_indicator"}, {"scheme", "secant"}},
                                     json{{"d", 1}, {"k", 2}, {"drift", "sign_indicator"}, {"scheme", "secant"}},
                                     json{{"d", 2}, {"k", 1}, {"drift", "radial_jump"}, {"scheme", "euler"}}})},
              {"assert", {{"d", 1}, {"k", 1}, {"H", 0.1}, {"se_mult", 2.0}, {"control_growth", 100.0}}}};
}

ExperimentReport run_scan(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "flow-scan";
  ExperimentReport r;
  const double T = num(cfg, "T"), radius = num(cfg, "stencil_radius");
  const int N = integer(cfg, "N"), paths = integer(cfg, "paths"), p = integer(cfg, "p");
  const auto Hs = nums(cfg, "H");
  const auto levels = integers(cfg, "levels");
  require_positive(T, "T");
  require_positive(radius, "stencil_radius");
  require_count(N, 2, 8192, "N");
  require_count(paths, 2, 1000000, "paths");
  require(p >= 2 && p % 2 == 0, "p must be even and at least 2");
  require(!Hs.empty() && !levels.empty(), "H and levels must not be empty");
  for (double H : Hs) require_hurst(H);
  for (size_t i = 1; i < Hs.size(); ++i) require(Hs[i] > Hs[i - 1], "H grid increasing");
  const json& as = node(cfg, "assert");
  const int ad = integer(as, "d"), ak = integer(as, "k");
  const double aH = num(as, "H"), kse = num(as, "se_mult"), growth = num(as, "control_growth");
  const json& cases = node(cfg, "cases");
  require(cases.is_array(), "cases must be an array");

  const int L = static_cast<int>(levels.size()), nH = static_cast<int>(Hs.size());
  std::vector<std::string> header{"d", "k", "H", "H_star", "below_threshold"};
  for (int l : levels) {
    header.push_back("level_" + std::to_string(l));
    header.push_back("level_" + std::to_string(l) + "_se");
  }
  CsvTable table(header);
  CsvTable ctrl({"d", "k", "H_star", "level", "control"});
  bool asserted_case_seen = false;
  for (const json& c : cases) {
    MomentScanSpec spec;
    spec.d = integer(c, "d");
    spec.k = integer(c, "k");
    spec.drift = str(c, "drift");
    spec.scheme = scheme_of(str(c, "scheme"));
    require_count(spec.d, 1, 3, "cases.d");
    require_count(spec.k, 1, kMaxFlowOrder, "cases.k");
    spec.p = p;
    spec.H = Hs;
    spec.levels = levels;
    spec.stencil = cube_stencil(std::vector<double>(spec.d, 0.0), radius);
    spec.T = T;
    spec.N = N;
    spec.paths = paths;
    spec.seed = seed_of(cfg);
    spec.label = "flow-scan.d=" + std::to_string(spec.d) + ".k=" + std::to_string(spec.k);
    const MomentScan ms = moment_scan(spec, ctx.workers);
    const std::string key = "d=" + std::to_string(spec.d) + ".k=" + std::to_string(spec.k);
    r.add(key + ".threshold_error", ms.threshold - 1.0 / (spec.d * (2.0 * spec.k + 1.0)), 0.0, Check::AbsLe);
    r.diagnostic(key + ".threshold", ms.threshold);
    for (int h = 0; h < nH; ++h) {
      table.row() << spec.d << spec.k << Hs[h] << ms.threshold << (Hs[h] < ms.threshold ? 1 : 0);
      for (int l = 0; l < L; ++l) table << ms.moment[h * L + l] << ms.moment_se[h * L + l];
    }
    for (int l = 0; l < L; ++l) ctrl.row() << spec.d << spec.k << ms.threshold << levels[l] << ms.control[l];

    // Level trend per H: largest consecutive increase beyond k SE.
    std::vector<double> trend(nH, -INFINITY);
    for (int h = 0; h < nH; ++h)
      for (int l = 1; l < L; ++l) {
        const int a = h * L + l, b = a - 1;
        trend[h] = std::max(trend[h], ms.moment[a] - ms.moment[b] - kse * std::hypot(ms.moment_se[a], ms.moment_se[b]));
      }
    // Non-decreasing in H at each level, within k SE.
    double mono = -INFINITY;
    for (int l = 0; l < L; ++l)
      for (int h = 1; h < nH; ++h) {
        const int a = h * L + l, b = a - L;
        mono = std::max(mono, ms.moment[b] - ms.moment[a] - kse * std::hypot(ms.moment_se[a], ms.moment_se[b]));
      }
    double ctrl_drop = -INFINITY;
    for (int l = 1; l < L; ++l) ctrl_drop = std::max(ctrl_drop, ms.control[l - 1] - ms.control[l]);
    const double ctrl_ratio = ms.control.back() / ms.control.front();

    const bool asserted = spec.d == ad && spec.k == ak;
    for (int h = 0; h < nH; ++h) {
      const std::string hk = key + ".H=" + fmt_key(Hs[h]) + ".level_increase_over_se";
      if (asserted && std::abs(Hs[h] - aH) < 1e-12) {
        r.add(hk, trend[h], 0.0, Check::Le);
        asserted_case_seen = true;
      } else {
        r.diagnostic(hk, trend[h]);
      }
    }
    if (asserted) {
      r.add(key + ".H_monotonicity_violation_over_se", mono, 0.0, Check::Le);
      r.add(key + ".control_min_step", ctrl_drop, 0.0, Check::Le);
      r.add(key + ".control_growth_ratio", ctrl_ratio, growth, Check::Ge);
    } else {
      r.diagnostic(key + ".H_monotonicity_violation_over_se", mono);
      r.diagnostic(key + ".control_min_step", ctrl_drop);
      r.diagnostic(key + ".control_growth_ratio", ctrl_ratio);
    }
  }
  require(asserted_case_seen, "assert.{d,k,H} must name a scanned case and H");
  table.write(ctx, name, "moments");
  ctrl.write(ctx, name, "control");
  return r;
}

}  // namespace

void register_flow(std::vector<ExperimentSpec>& out) {
  out.push_back({"flow-derivatives", "variational and Malliavin derivatives against finite differences and closed forms",
                 derivatives_defaults(), run_derivatives});
  out.push_back({"compactness-stat", "double-increment statistic of the Malliavin derivative across mollification levels",
                 compactness_defaults(), run_compactness});
  out.push_back({"flow-scan", "moments of the k-th flow derivative over H and mollification levels", scan_defaults(),
                 run_scan});
}

}  // namespace fbm::exp
