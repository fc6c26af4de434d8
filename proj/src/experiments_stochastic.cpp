// ibp-check, psi-table, appendix-verify, girsanov-verify, sde-solve and
// sde-converge.
#include <algorithm>
#include <cmath>

#include "experiment_support.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/girsanov.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/localtime.hpp"
#include "fbmlab/sde.hpp"

namespace fbm::exp {
namespace {

int node_of(const TimeGrid& g, double t, const std::string& what) {
  const int i = static_cast<int>(std::lround(t / g.T * g.N));
  require(i >= 0 && i <= g.N && std::abs(g.node(i) - t) <= 1e-12 * std::max(1.0, g.T), what + " must be a grid node");
  return i;
}

FbmEnsemble head(const FbmEnsemble& e, int n) {
  FbmEnsemble out = e;
  out.n_paths = std::min(n, e.n_paths);
  out.paths.resize(static_cast<size_t>(out.n_paths) * (e.grid.N + 1) * e.d);
  if (e.has_increments()) out.dW.resize(static_cast<size_t>(out.n_paths) * e.grid.N * e.d);
  return out;
}

// Splits [0, n) into `chunks` contiguous ranges.
std::pair<int, int> chunk_range(int n, int chunks, int c) {
  return {static_cast<int>(static_cast<long>(n) * c / chunks), static_cast<int>(static_cast<long>(n) * (c + 1) / chunks)};
}

// ---------------------------------------------------------------- ibp-check

json ibp_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"N", 512},
              {"H", {0.1, 0.2}},
              {"paths", 10000},
              {"R", 50.0},
              {"theta", 0.25},
              {"t", 1.0},
              {"alpha", {0, 1, 2}},
              {"factors", {"bump", "gauss_poly"}},
              {"z_points_per_panel", 8},
              {"se_mult", 3.0},
              {"oracle_se_mult", 3.0},
              {"zero_factor_paths", 100}};
}

ExperimentReport run_ibp(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "ibp-check";
  ExperimentReport r;
  const double T = num(cfg, "T"), R = num(cfg, "R"), theta = num(cfg, "theta"), t = num(cfg, "t");
  const int N = integer(cfg, "N"), paths = integer(cfg, "paths");
  const auto Hs = nums(cfg, "H");
  const auto alphas = integers(cfg, "alpha");
  const auto factors = strs(cfg, "factors");
  const double k = num(cfg, "se_mult"), ko = num(cfg, "oracle_se_mult");
  require_positive(T, "T");
  require_positive(R, "R");
  require_count(N, 2, 8192, "N");
  require_count(paths, 2, 10000000, "paths");
  require(0.0 <= theta && theta < t && t <= T, "need 0 <= theta < t <= T");
  for (double H : Hs) require_hurst(H);
  for (int a : alphas) require_count(a, 0, 2, "alpha");
  ZQuadrature zq;
  zq.points_per_panel = integer(cfg, "z_points_per_panel");
  require_count(zq.points_per_panel, 2, 64, "z_points_per_panel");
  const TimeGrid g = make_grid(T, N);
  node_of(g, theta, "theta");
  node_of(g, t, "t");
  const SeedSpec seed = seed_of(cfg);

  CsvTable table({"H", "factor", "alpha", "lhs", "lhs_se", "rhs", "rhs_se", "diff", "paired_se", "combined_se",
                  "allowance", "oracle"});
  for (double H : Hs) {
    const FbmEnsemble ens = sample_exact(g, H, 1, paths, seed, "ibp-check.H=" + fmt_key(H));
    for (const auto& fname : factors) {
      const TestFactor f = make_test_factor(fname);
      for (int a : alphas) {
        const IbpResult res = ibp_check(f, a, theta, t, ens, R, zq, ctx.workers);
        const std::string key = "ibp.H=" + fmt_key(H) + "." + fname + ".alpha=" + std::to_string(a);
        // |lhs - rhs| - k * SE of the per-path difference, against the
        // truncation allowance plus a rounding floor for sides that agree
        // to machine precision.
        const double floor = 1e-12 * std::max(1.0, std::abs(res.lhs) + std::abs(res.rhs));
        r.add(key + ".excess", std::abs(res.diff) - k * res.paired_se, res.allowance + floor, Check::Le);
        r.add(key + ".oracle_excess", std::abs(res.lhs - res.oracle) - ko * res.lhs_se, 0.0, Check::Le);
        r.diagnostic(key + ".lhs", res.lhs, res.lhs_se);
        r.diagnostic(key + ".rhs", res.rhs, res.rhs_se);
        r.diagnostic(key + ".oracle", res.oracle);
        table.row() << H << fname << a << res.lhs << res.lhs_se << res.rhs << res.rhs_se << res.diff << res.paired_se
                    << res.combined_se << res.allowance << res.oracle;
      }
    }
    // The zero factor gives zero on both sides.
    const int nz = integer(cfg, "zero_factor_paths");
    if (nz > 0) {
      const IbpResult z = ibp_check(make_test_factor(factors.empty() ? "bump" : factors.front()).scaled(0.0), 1,
                                    theta, t, head(ens, nz), R, zq, ctx.workers);
      r.add("ibp.H=" + fmt_key(H) + ".zero_factor.max_abs", std::max(std::abs(z.lhs), std::abs(z.rhs)), 0.0,
            Check::AbsLe);
    }
  }
  table.write(ctx, name, "cases");
  return r;
}

// ---------------------------------------------------------------- psi-table

json psi_defaults() {
  return json{{"seed", 0},
              {"H", {0.05, 0.1, 0.2, 0.3}},
              {"k", {0, 1, 2}},
              {"d", {1, 2}},
              {"m", {1, 2}},
              {"theta", 0.0},
              {"t", {0.5, 1.0}},
              {"nodes", 24},
              {"factors", {"bump", "gauss_poly"}},
              {"oracle_tol", 1e-10},
              {"scale", 1.7},
              {"bounds", {{"m_max", 50}, {"k", 0}, {"d", 1}, {"H", 0.1}, {"gamma", 0.05}, {"theta_prime", 0.25},
                          {"theta", 0.5}, {"t", 1.0}, {"tail_tol", 1e-10}}},
              {"lambda", {{"H", 0.3}, {"N", 256}, {"paths", 200}, {"R", {50.0, 100.0, 200.0, 400.0}}, {"factor", "gauss_poly"},
                          {"theta", 0.0}, {"t", 1.0}, {"z", 0.0}}}};
}

ExperimentReport run_psi(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "psi-table";
  ExperimentReport r;
  const auto Hs = nums(cfg, "H");
  const auto ks = integers(cfg, "k"), ds = integers(cfg, "d"), ms = integers(cfg, "m");
  const auto ts = nums(cfg, "t");
  const double theta = num(cfg, "theta"), otol = num(cfg, "oracle_tol"), lam = num(cfg, "scale");
  const int nodes = integer(cfg, "nodes");
  const auto factors = strs(cfg, "factors");
  for (double H : Hs) require_hurst(H);
  for (int k : ks) require_count(k, 0, 10, "k");
  for (int d : ds) require_count(d, 1, 8, "d");
  for (int m : ms) require_count(m, 1, kLambdaMaxM, "m");
  for (double t : ts) require(t > theta && theta >= 0.0, "t > theta >= 0");
  require_count(nodes, 2, 256, "nodes");
  require(!factors.empty(), "factors must not be empty");
  std::vector<double> sorted_t = ts;
  std::sort(sorted_t.begin(), sorted_t.end());
  std::vector<int> sorted_k = ks;
  std::sort(sorted_k.begin(), sorted_k.end());

  CsvTable table({"kind", "H", "k", "d", "m", "t", "value", "oracle", "threshold"});
  double oracle_err = 0.0;
  int inf_errors = 0, mono_k = 0, mono_t = 0;
  double homog_err = 0.0;
  for (double H : Hs)
    for (int d : ds)
      for (int m : ms) {
        // Unit weights: closed form binom(2m, m) Gamma(1-w)^{2m} / Gamma(2m(1-w)+1) (t-theta)^{2m(1-w)}.
        for (int k : sorted_k)
          for (double t : sorted_t) {
            const double w = d * H * (2 * k + 1);
            WeightSpec ws;
            ws.eps.assign(m, 0);
            const double v = psi_kappa(ws, m, d, k, theta, t, H, nodes);
            double oracle = INFINITY;
            if (w < 1.0) {
              double binom = 1.0;
              for (int j = 1; j <= m; ++j) binom = binom * (m + j) / j;
              const double e = 2.0 * m * (1.0 - w);
              oracle = binom * std::exp(2.0 * m * std::lgamma(1.0 - w) - std::lgamma(e + 1.0) + e * std::log(t - theta));
              oracle_err = std::max(oracle_err, std::abs(v - oracle) / oracle);
            } else if (std::isfinite(v)) {
              ++inf_errors;
            }
            table.row() << "unit" << H << k << d << m << t << v << oracle << 1.0 / (d * (2.0 * k + 1.0));
          }
        // Catalog factors: monotone in k and t, homogeneous of degree 2 in each factor.
        SeparableTestFunction f;
        f.d = d;
        for (int j = 0; j < m; ++j) f.factors.push_back(make_test_factor(factors[j % factors.size()]));
        const std::vector<double> z(static_cast<size_t>(m) * d, 0.0);
        std::vector<std::vector<double>> vals(sorted_k.size(), std::vector<double>(sorted_t.size()));
        for (size_t a = 0; a < sorted_k.size(); ++a)
          for (size_t b = 0; b < sorted_t.size(); ++b) {
            vals[a][b] = psi_f(f, sorted_k[a], theta, sorted_t[b], z, H, nodes);
            table.row() << "factors" << H << sorted_k[a] << d << m << sorted_t[b] << vals[a][b] << NAN
                        << 1.0 / (d * (2.0 * sorted_k[a] + 1.0));
          }
        for (size_t a = 0; a < sorted_k.size(); ++a)
          for (size_t b = 0; b < sorted_t.size(); ++b) {
            if (a && !(vals[a][b] >= vals[a - 1][b])) ++mono_k;
            if (b && !(vals[a][b] >= vals[a][b - 1])) ++mono_t;
          }
        if (std::isfinite(vals[0].back())) {
          SeparableTestFunction g = f;
          g.factors[0] = g.factors[0].scaled(lam);
          const double v = psi_f(g, sorted_k[0], theta, sorted_t.back(), z, H, nodes);
          homog_err = std::max(homog_err, std::abs(v / vals[0].back() - lam * lam) / (lam * lam));
        }
      }
  table.write(ctx, name, "psi");
  r.add("unit_weights.max_rel_err_vs_gamma_formula", oracle_err, otol, Check::Le);
  r.add("unit_weights.finite_beyond_threshold", inf_errors, 0.0, Check::AbsLe);
  r.add("factors.k_monotonicity_violations", mono_k, 0.0, Check::AbsLe);
  r.add("factors.t_monotonicity_violations", mono_t, 0.0, Check::AbsLe);
  r.add("factors.scaling_rel_err", homog_err, 1e-12, Check::Le);

  // Closed-form right-hand sides of the main estimates.
  {
    const json& b = node(cfg, "bounds");
    const int m_max = integer(b, "m_max"), k = integer(b, "k"), d = integer(b, "d");
    const double H = num(b, "H"), gamma = num(b, "gamma"), tp = num(b, "theta_prime"), th = num(b, "theta"),
                 t = num(b, "t");
    require_count(m_max, 2, 1000, "bounds.m_max");
    require_hurst(H, "bounds.H");
    require(gamma > 0 && gamma < H, "bounds.gamma in (0, H)");
    require(tp < th && th < t, "bounds: theta' < theta < t");
    CsvTable bt({"variant", "m", "S", "value", "admissible", "threshold"});
    double peak = 0.0, last = 0.0;
    int rises_after_peak = 0;
    bool past_peak = false;
    double prev = -1.0;
    for (int m = 1; m <= m_max; ++m) {
      for (MainEstimate v : {MainEstimate::KernelDifference, MainEstimate::Kernel}) {
        std::vector<int> eps(m, 0);
        eps[0] = 1;  // bounded sum of flags
        const BoundResult br = bound_main_estimate(v, m, k, d, H, gamma, eps, std::vector<double>(m, 1.0), tp, th, t);
        bt.row() << (v == MainEstimate::Kernel ? "kernel" : "kernel_difference") << m << 1 << br.value
                 << (br.admissible ? 1 : 0) << br.threshold;
        if (v != MainEstimate::KernelDifference) continue;
        if (prev >= 0.0 && br.value < prev) past_peak = true;
        if (past_peak && br.value > prev) ++rises_after_peak;
        peak = std::max(peak, br.value);
        last = br.value;
        prev = br.value;
      }
    }
    bt.write(ctx, name, "bounds");
    r.add("bounds.tail_rises_after_peak", rises_after_peak, 0.0, Check::AbsLe);
    r.add("bounds.last_over_peak", last / peak, num(b, "tail_tol"), Check::Le);
    const BoundResult simple = bound_main_estimate(MainEstimate::Kernel, 1, 0, 1, 0.1, 0.0, {0}, {1.0}, 0.0, 0.0, 1.0);
    r.add("bounds.single_factor_rel_err",
          std::abs(simple.value - 1.0 / std::sqrt(std::tgamma(3.0 - 2.0 * 0.1))) * std::sqrt(std::tgamma(2.8)), 1e-14,
          Check::Le);
    const BoundResult inadm = bound_main_estimate(MainEstimate::Kernel, 1, 1, 1, 0.4, 0.0, {0}, {1.0}, 0.0, 0.0, 1.0);
    r.add("bounds.inadmissible_reported_admissible", inadm.admissible ? 1.0 : 0.0, 0.0, Check::AbsLe);
    const BoundResult coincide =
        bound_main_estimate(MainEstimate::KernelDifference, 1, 0, 1, H, gamma, {1}, {1.0}, th, th, t);
    r.add("bounds.coincident_thetas_value", coincide.value, 0.0, Check::AbsLe);
  }

  // E|Lambda_R|^2 against Psi at several radii; the ratio is the measured constant.
  {
    const json& l = node(cfg, "lambda");
    const double H = num(l, "H"), th = num(l, "theta"), t = num(l, "t"), z = num(l, "z");
    const int N = integer(l, "N"), paths = integer(l, "paths");
    require_hurst(H, "lambda.H");
    require_count(N, 2, 4096, "lambda.N");
    require_count(paths, 1, 1000000, "lambda.paths");
    require(0.0 <= th && th < t, "lambda: 0 <= theta < t");
    const TimeGrid g = make_grid(t, N);
    const FbmEnsemble ens = sample_exact(g, H, 1, paths, seed_of(cfg), "psi-table.lambda");
    SeparableTestFunction f;
    f.factors.push_back(make_test_factor(str(l, "factor")));
    const double psi = psi_f(f, 0, th, t, {z}, H, nodes);
    CsvTable lt({"R", "mean_sq", "se", "psi", "ratio"});
    bool finite = true;
    for (double R : nums(l, "R")) {
      require_positive(R, "lambda.R");
      const Estimate e = lambda_l2_mc(f, MultiIndex::zeros(1, 1), th, t, {z}, R, ens, ctx.workers);
      lt.row() << R << e.value << e.se << psi << e.value / psi;
      r.diagnostic("lambda.R=" + fmt_key(R) + ".ratio_to_psi", e.value / psi, e.se / psi);
      finite = finite && std::isfinite(e.value / psi);
    }
    lt.write(ctx, name, "lambda");
    r.add("lambda.ratios_finite", finite ? 1.0 : 0.0, 1.0, Check::Ge);
  }
  return r;
}

// ---------------------------------------------------------------- appendix-verify

json appendix_defaults() {
  return json{{"seed", 0},
              {"nodes", 24},
              {"classical", {{"m", {1, 2}}, {"theta", {0.0, 0.25}}, {"t", 1.0}, {"tol", 1e-10}}},
              {"random", {{"draws", 20}, {"m", {1, 2}}, {"H_range", {0.1, 0.45}}, {"w_range", {-0.5, 0.5}},
                          {"ratio_cap", 10.0}}},
              {"double_integral", {{"H", 0.3}, {"gamma", 1.5}, {"t", 1.0}, {"nodes", {256, 512, 1024, 2048}},
                                   {"rel_tol", 0.01}}}};
}

ExperimentReport run_appendix(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "appendix-verify";
  ExperimentReport r;
  const int nodes = integer(cfg, "nodes");
  require_count(nodes, 2, 256, "nodes");

  const json& c = node(cfg, "classical");
  const double t = num(c, "t"), tol = num(c, "tol");
  CsvTable ct({"lemma", "m", "theta", "lhs", "rhs", "exact"});
  double worst = 0.0;
  for (int m : integers(c, "m")) {
    require_count(m, 1, 2, "classical.m");
    for (double th : nums(c, "theta")) {
      require(th >= 0.0 && th < t, "classical.theta in [0, t)");
      const double exact = std::pow(t - th, 2 * m) / std::tgamma(2 * m + 1.0);
      for (MainEstimate v : {MainEstimate::KernelDifference, MainEstimate::Kernel}) {
        const auto res = iterated_bound_check(v, std::vector<int>(2 * m, 0), std::vector<double>(2 * m, 0.0), 0.3,
                                              0.1, 0.5 * th, th, t, nodes);
        worst = std::max({worst, std::abs(res.lhs - exact), std::abs(res.rhs - exact)});
        ct.row() << (v == MainEstimate::Kernel ? "kernel" : "kernel_difference") << m << th << res.lhs << res.rhs
                 << exact;
      }
    }
  }
  ct.write(ctx, name, "classical");
  r.add("classical.max_abs_err", worst, tol, Check::Le);

  const json& rd = node(cfg, "random");
  const int draws = integer(rd, "draws");
  const auto ms = integers(rd, "m");
  const auto Hr = nums(rd, "H_range"), wr = nums(rd, "w_range");
  require_count(draws, 1, 10000, "random.draws");
  require(Hr.size() == 2 && Hr[0] > 0 && Hr[0] < Hr[1] && Hr[1] < 0.5, "random.H_range inside (0, 1/2)");
  require(wr.size() == 2 && wr[0] >= -0.5 && wr[0] <= wr[1], "random.w_range with lower end at least -1/2");
  require(!ms.empty(), "random.m must not be empty");
  for (int m : ms) require_count(m, 1, 2, "random.m");
  CsvTable rt({"lemma", "draw", "m", "H", "gamma", "theta_prime", "theta", "t", "eps", "w", "lhs", "rhs", "ratio"});
  for (MainEstimate v : {MainEstimate::KernelDifference, MainEstimate::Kernel}) {
    const std::string lemma = v == MainEstimate::Kernel ? "kernel" : "kernel_difference";
    RandomStream rng(seed_of(cfg), "appendix-verify." + lemma, 0);
    double cmax = 0.0, cmin = INFINITY;
    for (int k = 0; k < draws; ++k) {
      const int m = ms[rng.uniform_int(0, static_cast<int>(ms.size()) - 1)];
      const double H = Hr[0] + (Hr[1] - Hr[0]) * rng.uniform();
      const double gamma = H * (0.05 + 0.9 * rng.uniform());
      const double th = 0.1 + 0.8 * rng.uniform();
      const double tp = th * (0.05 + 0.9 * rng.uniform());
      const double tt = th + (1.0 - th) * (0.1 + 0.9 * rng.uniform());
      std::vector<int> eps(2 * m);
      std::vector<double> w(2 * m);
      std::string es, wsr;
      int S = 0;
      for (int j = 0; j < 2 * m; ++j) {
        eps[j] = rng.uniform_int(0, 1);
        S += eps[j];
        w[j] = wr[0] + (wr[1] - wr[0]) * rng.uniform();
        es += (j ? " " : "") + std::to_string(eps[j]);
        wsr += (j ? " " : "") + fmt(w[j]);
      }
      if (S == 0) {  // keep every draw singular
        eps[0] = 1;
        es[0] = '1';
      }
      const auto res = iterated_bound_check(v, eps, w, H, gamma, tp, th, tt, nodes);
      cmax = std::max(cmax, res.ratio);
      cmin = std::min(cmin, res.ratio);
      rt.row() << lemma << k << m << H << gamma << tp << th << tt << es << wsr << res.lhs << res.rhs << res.ratio;
    }
    // The measured constant: finite, positive and below the pinned cap.
    r.add("random." + lemma + ".measured_C", cmax, num(rd, "ratio_cap"), Check::Le);
    r.add("random." + lemma + ".min_ratio", cmin, 0.0, Check::Ge);
  }
  rt.write(ctx, name, "random");

  const json& di = node(cfg, "double_integral");
  const double H = num(di, "H"), gamma = num(di, "gamma"), tt = num(di, "t"), rtol = num(di, "rel_tol");
  require_hurst(H, "double_integral.H");
  const auto nn = integers(di, "nodes");
  require(nn.size() >= 2, "double_integral.nodes needs two entries");
  std::vector<double> vals(nn.size());
  parallel_for(static_cast<int>(nn.size()), 1, [&](int i) { vals[i] = appendix_double_integral(H, gamma, tt, nn[i]); });
  CsvTable dt({"nodes", "value", "rel_change"});
  double last_change = NAN;
  for (size_t i = 0; i < nn.size(); ++i) {
    const double ch = i ? std::abs(vals[i] - vals[i - 1]) / std::abs(vals[i]) : NAN;
    dt.row() << nn[i] << vals[i] << ch;
    r.diagnostic("double_integral.nodes=" + std::to_string(nn[i]), vals[i]);
    last_change = ch;
  }
  dt.write(ctx, name, "double_integral");
  r.add("double_integral.last_rel_change", last_change, rtol, Check::Le);
  return r;
}

// ---------------------------------------------------------------- girsanov-verify

std::vector<std::string> bounded_catalog_d1() {
  return {"zero", "constant", "sine", "tanh", "gauss_bump", "sine_time", "sign_indicator", "radial_jump", "checkerboard"};
}

json girsanov_defaults() {
  return json{
      {"seed", 0},
      {"T", 1.0},
      {"x0", 0.0},
      {"suites", {"normalization", "theta_bound", "weak", "frac_image"}},
      {"batch", 2000},
      {"normalization", {{"H", {0.1, 0.2, 0.3}}, {"N", 128}, {"paths", 100000}, {"drifts", bounded_catalog_d1()},
                         {"se_mult", 4.0}, {"theta_bound_slack", 1e-9}, {"lognormal_c", 0.5}}},
      {"weak", {{"H", 0.2}, {"N", 256}, {"paths", 100000}, {"drifts", {"sine", "tanh", "gauss_bump", "sine_time"}},
                {"test", "bump"}, {"euler_N", 1024}, {"euler_paths", 100000}, {"se_mult", 4.0}}},
      {"frac_image", {{"H", 0.2}, {"N", 256}, {"paths", 100}, {"slack", 1e-9}}}};
}

bool has_suite(const std::vector<std::string>& s, const char* name) {
  return std::find(s.begin(), s.end(), name) != s.end();
}

ExperimentReport run_girsanov(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "girsanov-verify";
  ExperimentReport r;
  const double T = num(cfg, "T"), x0 = num(cfg, "x0");
  require_positive(T, "T");
  const auto suites = strs(cfg, "suites");
  for (const auto& s : suites)
    require(s == "normalization" || s == "theta_bound" || s == "weak" || s == "frac_image",
            "unknown suite '" + s + "'");
  const int batch = integer(cfg, "batch");
  require_count(batch, 1, 1000000, "batch");
  const SeedSpec seed = seed_of(cfg);
  const int workers = ctx.workers;

  if (has_suite(suites, "normalization") || has_suite(suites, "theta_bound")) {
    const json& c = node(cfg, "normalization");
    const auto Hs = nums(c, "H");
    const int N = integer(c, "N"), paths = integer(c, "paths");
    const auto names = strs(c, "drifts");
    const double k = num(c, "se_mult"), slack = num(c, "theta_bound_slack"), lc = num(c, "lognormal_c");
    require_count(N, 2, 4096, "normalization.N");
    require_count(paths, 2, 100000000, "normalization.paths");
    std::vector<DriftPtr> drifts;
    for (const auto& n : names) {
      drifts.push_back(make_drift(n, 1));
      require(drifts.back()->bounded(), "drift '" + n + "' must be bounded");
    }
    const TimeGrid g = make_grid(T, N);
    const int nd = static_cast<int>(drifts.size());
    CsvTable table({"H", "drift", "mean_Z", "se", "max_theta_ratio", "max_theta_ratio_displayed"});
    for (double H : Hs) {
      require_hurst(H, "normalization.H");
      const HurstParam hp(H);
      const VolterraSampler sampler(g, H);
      const KhInverseOperator op(g, hp);
      // Per path and drift: Z_T and the two theta ratios. Lognormal Z per path.
      std::vector<double> Z(static_cast<size_t>(paths) * nd), ratio(Z.size()), ratio_disp(Z.size()), Zc(paths);
      std::vector<double> bound(nd), bound_disp(nd);
      const double disp = kinv_displayed_constant(H) / kernel_operator_constant(hp);
      for (int j = 0; j < nd; ++j) {
        bound[j] = theta_bound(drifts[j]->sup_norm(), H, T);
        bound_disp[j] = disp * disp * std::pow(drifts[j]->sup_norm(), 2) * std::pow(T, 1.0 - 2.0 * H);
      }
      const std::string label = "girsanov-verify.normalization.H=" + fmt_key(H);
      for (int first = 0; first < paths; first += batch) {
        const int count = std::min(batch, paths - first);
        const int chunks = std::min(count, std::max(1, workers));
        parallel_for(chunks, workers, [&](int cix) {
          const auto [lo, hi] = chunk_range(count, chunks, cix);
          const int n = hi - lo;
          std::vector<double> B(static_cast<size_t>(n) * (N + 1)), dW(static_cast<size_t>(n) * N);
          sampler.sample(seed, label, first + lo, n, 1, B.data(), dW.data());
          std::vector<double> X(N + 1), th(N + 1), logZ(N + 1), thc(N + 1, lc);
          for (int q = 0; q < n; ++q) {
            const size_t p = static_cast<size_t>(first + lo + q);
            const double* Bq = B.data() + static_cast<size_t>(q) * (N + 1);
            const double* dWq = dW.data() + static_cast<size_t>(q) * N;
            for (int i = 0; i <= N; ++i) X[i] = x0 + Bq[i];
            for (int j = 0; j < nd; ++j) {
              theta_from_drift(*drifts[j], X.data(), op, th.data());
              double mx = 0.0;
              for (int i = 0; i <= N; ++i) mx = std::max(mx, th[i] * th[i]);
              ratio[p * nd + j] = bound[j] > 0.0 ? mx / bound[j] : (mx > 0.0 ? INFINITY : 0.0);
              ratio_disp[p * nd + j] = bound_disp[j] > 0.0 ? mx / bound_disp[j] : (mx > 0.0 ? INFINITY : 0.0);
              doleans_log(th.data(), dWq, N, 1, g.dt(), logZ.data());
              Z[p * nd + j] = std::exp(logZ[N]);
            }
            doleans_log(thc.data(), dWq, N, 1, g.dt(), logZ.data());
            Zc[p] = std::exp(logZ[N]);
          }
        });
      }
      for (int j = 0; j < nd; ++j) {
        MeanAccumulator acc;
        double worst = 0.0, worst_disp = 0.0;
        for (int p = 0; p < paths; ++p) {
          const double z = Z[static_cast<size_t>(p) * nd + j];
          if (!std::isfinite(z)) throw NumericError("girsanov-verify: non-finite weight for drift " + names[j]);
          acc.push(z);
          worst = std::max(worst, ratio[static_cast<size_t>(p) * nd + j]);
          worst_disp = std::max(worst_disp, ratio_disp[static_cast<size_t>(p) * nd + j]);
        }
        const std::string key = "H=" + fmt_key(H) + "." + names[j];
        if (has_suite(suites, "normalization"))
          r.add("normalization." + key + ".mean_Z_deviation", acc.mean - 1.0, k * acc.se(), Check::AbsLe, acc.se());
        if (has_suite(suites, "theta_bound")) {
          r.add("theta_bound." + key + ".max_ratio", worst, 1.0 + slack, Check::Le);
          r.diagnostic("theta_bound." + key + ".max_ratio_displayed_constant", worst_disp);
        }
        table.row() << H << names[j] << acc.mean << acc.se() << worst << worst_disp;
      }
      if (has_suite(suites, "normalization")) {
        // Deterministic theta = c: Z_T is lognormal with mean 1 and variance e^{c^2 T} - 1.
        MeanAccumulator m1, m2;
        for (double z : Zc) {
          m1.push(z);
          m2.push((z - 1.0) * (z - 1.0));
        }
        const std::string key = "normalization.H=" + fmt_key(H) + ".constant_theta";
        r.add(key + ".mean_deviation", m1.mean - 1.0, k * m1.se(), Check::AbsLe, m1.se());
        r.add(key + ".variance_deviation", m2.mean - std::expm1(lc * lc * T), k * m2.se(), Check::AbsLe, m2.se());
        const NovikovBound nb = novikov_bound(1.0, H, T, 1.0);
        r.diagnostic("novikov.H=" + fmt_key(H) + ".displayed_constant", nb.displayed);
        r.diagnostic("novikov.H=" + fmt_key(H) + ".beta_constant", nb.beta);
      }
    }
    table.write(ctx, name, "normalization");
  }

  if (has_suite(suites, "weak")) {
    const json& c = node(cfg, "weak");
    const double H = num(c, "H"), k = num(c, "se_mult");
    const int N = integer(c, "N"), paths = integer(c, "paths"), Ne = integer(c, "euler_N"),
              pe = integer(c, "euler_paths");
    require_hurst(H, "weak.H");
    require_count(N, 2, 4096, "weak.N");
    require_count(Ne, 2, 4096, "weak.euler_N");
    require_count(paths, 2, 100000000, "weak.paths");
    require_count(pe, 2, 100000000, "weak.euler_paths");
    const auto names = strs(c, "drifts");
    std::vector<DriftPtr> drifts;
    for (const auto& n : names) {
      drifts.push_back(make_drift(n, 1));
      require(drifts.back()->bounded(), "drift '" + n + "' must be bounded");
    }
    const SpatialTest phi = make_spatial_test(str(c, "test"));
    const int nd = static_cast<int>(drifts.size());
    const TimeGrid g = make_grid(T, N), ge = make_grid(T, Ne);
    const HurstParam hp(H);
    const VolterraSampler vs(g, H);
    const KhInverseOperator op(g, hp);
    const ExactSampler es(ge, H);
    std::vector<double> wz(static_cast<size_t>(paths) * nd), ev(static_cast<size_t>(pe) * nd);
    for (int first = 0; first < paths; first += batch) {
      const int count = std::min(batch, paths - first);
      const int chunks = std::min(count, std::max(1, workers));
      parallel_for(chunks, workers, [&](int cix) {
        const auto [lo, hi] = chunk_range(count, chunks, cix);
        const int n = hi - lo;
        std::vector<double> B(static_cast<size_t>(n) * (N + 1)), dW(static_cast<size_t>(n) * N);
        vs.sample(seed, "girsanov-verify.weak.volterra", first + lo, n, 1, B.data(), dW.data());
        std::vector<double> X(N + 1), th(N + 1), logZ(N + 1);
        for (int q = 0; q < n; ++q) {
          const size_t p = static_cast<size_t>(first + lo + q);
          for (int i = 0; i <= N; ++i) X[i] = x0 + B[static_cast<size_t>(q) * (N + 1) + i];
          for (int j = 0; j < nd; ++j) {
            theta_from_drift(*drifts[j], X.data(), op, th.data());
            doleans_log(th.data(), dW.data() + static_cast<size_t>(q) * N, N, 1, g.dt(), logZ.data());
            wz[p * nd + j] = phi(&X[N], 1) * std::exp(logZ[N]);
          }
        }
      });
    }
    for (int first = 0; first < pe; first += batch) {
      const int count = std::min(batch, pe - first);
      const int chunks = std::min(count, std::max(1, workers));
      parallel_for(chunks, workers, [&](int cix) {
        const auto [lo, hi] = chunk_range(count, chunks, cix);
        const int n = hi - lo;
        std::vector<double> B(static_cast<size_t>(n) * (Ne + 1)), X(Ne + 1);
        es.sample(seed, "girsanov-verify.weak.euler", first + lo, n, 1, B.data());
        for (int q = 0; q < n; ++q)
          for (int j = 0; j < nd; ++j) {
            euler_solve_into(*drifts[j], &x0, ge, B.data() + static_cast<size_t>(q) * (Ne + 1), X.data());
            ev[static_cast<size_t>(first + lo + q) * nd + j] = phi(&X[Ne], 1);
          }
      });
    }
    CsvTable table({"drift", "girsanov", "girsanov_se", "euler", "euler_se", "diff", "combined_se"});
    for (int j = 0; j < nd; ++j) {
      MeanAccumulator a, b;
      for (int p = 0; p < paths; ++p) a.push(wz[static_cast<size_t>(p) * nd + j]);
      for (int p = 0; p < pe; ++p) b.push(ev[static_cast<size_t>(p) * nd + j]);
      const double se = std::hypot(a.se(), b.se());
      r.add("weak." + names[j] + ".deviation", a.mean - b.mean, k * se, Check::AbsLe, se);
      r.diagnostic("weak." + names[j] + ".girsanov", a.mean, a.se());
      r.diagnostic("weak." + names[j] + ".euler", b.mean, b.se());
      table.row() << names[j] << a.mean << a.se() << b.mean << b.se() << a.mean - b.mean << se;
    }
    table.write(ctx, name, "weak");
  }

  if (has_suite(suites, "frac_image")) {
    const json& c = node(cfg, "frac_image");
    const double H = num(c, "H"), slack = num(c, "slack");
    const int N = integer(c, "N"), paths = integer(c, "paths");
    require_hurst(H, "frac_image.H");
    require_count(N, 2, 4096, "frac_image.N");
    require_count(paths, 1, 100000, "frac_image.paths");
    const TimeGrid g = make_grid(T, N);
    const FbmEnsemble e = sample_exact(g, H, 1, paths, seed, "girsanov-verify.frac_image");
    for (const auto& n : bounded_catalog_d1()) {
      const DriftPtr b = make_drift(n, 1);
      double worst = 0.0;
      bool finite = true;
      for (int p = 0; p < paths; ++p) {
        GridFunction X(g, 1);
        for (int i = 0; i <= N; ++i) X(i) = x0 + e.value(p, i);
        const FracImageCheck fc = frac_image_check(*b, X, H);
        worst = std::max(worst, fc.max_ratio);
        finite = finite && fc.finite;
      }
      r.add("frac_image." + n + ".max_ratio", finite ? worst : INFINITY, 1.0 + slack, Check::Le);
    }
  }
  return r;
}

// ---------------------------------------------------------------- sde-solve

json drift_params_default() { return json{{"a", 1.0}, {"c", 0.5}, {"lambda", -1.0}}; }

json sde_solve_defaults() {
  return json{{"seed", 0},      {"drift", "sign_indicator"}, {"d", 1},       {"params", drift_params_default()},
              {"level", 0},     {"x0", {0.0}},               {"T", 1.0},     {"N", 512},
              {"H", 0.2},       {"path_index", 0},           {"method", "exact"}, {"file", "sde-solve.path.csv"}};
}

ExperimentReport run_sde_solve(const json& cfg, const ExperimentContext& ctx) {
  ExperimentReport r;
  const int d = integer(cfg, "d"), N = integer(cfg, "N"), level = integer(cfg, "level"), pidx = integer(cfg, "path_index");
  const double T = num(cfg, "T"), H = num(cfg, "H");
  const auto x0 = nums(cfg, "x0");
  const std::string method = str(cfg, "method"), file = str(cfg, "file");
  require_positive(T, "T");
  require_hurst(H);
  require_count(d, 1, 8, "d");
  require_count(N, 1, 1 << 16, "N");
  require_count(level, 0, 1 << 20, "level");
  require_count(pidx, 0, 1 << 30, "path_index");
  require(static_cast<int>(x0.size()) == d, "x0 must have d entries");
  require(method == "exact" || method == "volterra", "method must be 'exact' or 'volterra'");
  require(!file.empty() && file.find('/') == std::string::npos, "file must be a plain file name");
  DriftPtr b = make_drift(str(cfg, "drift"), d, node(cfg, "params"));
  if (level > 0) b = mollify(b, level);

  const TimeGrid g = make_grid(T, N);
  std::vector<double> B(static_cast<size_t>(N + 1) * d);
  if (method == "exact")
    ExactSampler(g, H).sample(seed_of(cfg), "sde-solve", pidx, 1, d, B.data());
  else
    VolterraSampler(g, H).sample(seed_of(cfg), "sde-solve", pidx, 1, d, B.data(), nullptr);
  const SolutionPath path = euler_solve(*b, x0, g, B.data(), "sde-solve", pidx);

  std::vector<std::string> header{"t"};
  for (int c = 0; c < d; ++c) header.push_back("x" + std::to_string(c + 1));
  for (int c = 0; c < d; ++c) header.push_back("b" + std::to_string(c + 1));
  CsvTable table(header);
  double start = 0.0, peak = 0.0;
  for (int i = 0; i <= N; ++i) {
    table.row() << g.node(i);
    for (int c = 0; c < d; ++c) {
      table << path(i, c);
      peak = std::max(peak, std::abs(path(i, c)));
    }
    for (int c = 0; c < d; ++c) table << B[static_cast<size_t>(i) * d + c];
  }
  for (int c = 0; c < d; ++c) start = std::max(start, std::abs(path(0, c) - x0[c]));
  if (!ctx.out_dir.empty()) write_text_file(data_path(ctx, file), table.str());
  r.add("initial_value_error", start, 0.0, Check::AbsLe);
  for (int c = 0; c < d; ++c) r.diagnostic("terminal.x" + std::to_string(c + 1), path(N, c));
  r.diagnostic("max_abs_value", peak);
  r.add("finite_values", std::isfinite(peak) ? 1.0 : 0.0, 1.0, Check::Ge);
  return r;
}

// ---------------------------------------------------------------- sde-converge

json sde_converge_defaults() {
  return json{{"seed", 0},
              {"drift", "sign_indicator"},
              {"d", 1},
              {"params", drift_params_default()},
              {"H", 0.1},
              {"levels", {4, 8, 16, 32}},
              {"T", 1.0},
              {"N", 512},
              {"paths", 1000},
              {"x0", {0.0}},
              {"se_mult", 2.0},
              {"control_H", 0.45},
              {"mollifier", {{"levels", {1, 2, 4, 8, 16, 32}}, {"times", {0.0}}}}};
}

ExperimentReport run_sde_converge(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "sde-converge";
  ExperimentReport r;
  const int d = integer(cfg, "d"), N = integer(cfg, "N"), paths = integer(cfg, "paths");
  const double T = num(cfg, "T"), H = num(cfg, "H"), k = num(cfg, "se_mult"), Hc = num(cfg, "control_H");
  const auto levels = integers(cfg, "levels");
  const auto x0 = nums(cfg, "x0");
  require_positive(T, "T");
  require_hurst(H);
  require_hurst(Hc, "control_H");
  require_count(N, 1, 8192, "N");
  require_count(paths, 2, 10000000, "paths");
  require(levels.size() >= 2, "levels needs two or more entries");
  for (size_t i = 0; i < levels.size(); ++i) {
    require_count(levels[i], 1, 1 << 20, "levels");
    if (i) require(levels[i] > levels[i - 1], "levels increasing");
  }
  require(static_cast<int>(x0.size()) == d, "x0 must have d entries");
  const DriftPtr b = make_drift(str(cfg, "drift"), d, node(cfg, "params"));
  const TimeGrid g = make_grid(T, N);
  const int L = static_cast<int>(levels.size());

  CsvTable table({"H", "level_i", "level_j", "mse", "se", "role"});
  auto study = [&](double h, const std::string& role) {
    const FbmEnsemble e = sample_exact(g, h, d, paths, seed_of(cfg), "sde-converge.H=" + fmt_key(h));
    const ConvergenceTable ct = strong_convergence_study(b, levels, e, x0, N, ctx.workers);
    for (int i = 0; i < L; ++i)
      for (int j = i + 1; j < L; ++j)
        table.row() << h << levels[i] << levels[j] << ct.mse[i * L + j] << ct.mse_se[i * L + j] << role;
    return ct;
  };
  const ConvergenceTable ct = study(H, "study");
  // Cauchy diagnostic non-increasing in i within k combined standard errors,
  // and the nested-level differences E|X^n - X^{2n}|^2 likewise.
  double worst_cauchy = -INFINITY, worst_nested = -INFINITY;
  for (int i = 0; i + 1 < L - 1; ++i) {
    const double se = std::hypot(ct.cauchy_se[i], ct.cauchy_se[i + 1]);
    worst_cauchy = std::max(worst_cauchy, ct.cauchy[i + 1] - ct.cauchy[i] - k * se);
  }
  for (int i = 0; i + 2 < L; ++i) {
    const double a = ct.mse[i * L + i + 1], c = ct.mse[(i + 1) * L + i + 2];
    const double se = std::hypot(ct.mse_se[i * L + i + 1], ct.mse_se[(i + 1) * L + i + 2]);
    worst_nested = std::max(worst_nested, c - a - k * se);
  }
  for (int i = 0; i + 1 < L; ++i)
    r.diagnostic("study.cauchy.level=" + std::to_string(levels[i]), ct.cauchy[i], ct.cauchy_se[i]);
  if (L > 2) {
    r.add("study.cauchy_max_increase_over_se", worst_cauchy, 0.0, Check::Le);
    r.add("study.nested_max_increase_over_se", worst_nested, 0.0, Check::Le);
  }
  const ConvergenceTable cc = study(Hc, "control");
  for (int i = 0; i + 1 < L; ++i)
    r.diagnostic("control.cauchy.level=" + std::to_string(levels[i]), cc.cauchy[i], cc.cauchy_se[i]);
  table.write(ctx, name, "mse");

  // Mollifier approximation: L1 distance to b, sup bound.
  const json& m = node(cfg, "mollifier");
  const auto ml = integers(m, "levels");
  const auto times = nums(m, "times");
  CsvTable mt({"level", "l1_distance", "sup"});
  double prev = INFINITY, worst_rise = 0.0, sup_excess = -INFINITY, c_meas = 0.0;
  for (int n : ml) {
    require_count(n, 1, 1 << 20, "mollifier.levels");
    const DriftPtr bn = mollify(b, n);
    double dist = NAN;
    if (d <= 2 && std::isfinite(b->l1_norm())) dist = l1_distance(*bn, *b, times);
    const double sup = numeric_norms(*bn, times.empty() ? 0.0 : times.front()).sup;
    mt.row() << n << dist << sup;
    if (std::isfinite(dist)) {
      worst_rise = std::max(worst_rise, dist - prev);
      prev = dist;
      c_meas = std::max(c_meas, n * dist);
    }
    sup_excess = std::max(sup_excess, sup - b->sup_norm());
  }
  mt.write(ctx, name, "mollifier");
  r.add("mollifier.l1_max_increase", worst_rise, 0.0, Check::Le);
  r.add("mollifier.sup_excess", sup_excess, 1e-12, Check::Le);
  r.diagnostic("mollifier.measured_c", c_meas);
  return r;
}

}  // namespace

void register_stochastic(std::vector<ExperimentSpec>& out) {
  out.push_back({"ibp-check", "Monte Carlo integration-by-parts identity for the truncated field", ibp_defaults(),
                 run_ibp});
  out.push_back({"psi-table", "Psi functionals, their Gamma closed forms and the main-estimate right-hand sides",
                 psi_defaults(), run_psi});
  out.push_back({"appendix-verify", "iterated singular integrals and the kernel-difference double integral",
                 appendix_defaults(), run_appendix});
  out.push_back({"girsanov-verify", "E[Z] = 1, pathwise theta bound and Girsanov vs Euler estimates",
                 girsanov_defaults(), run_girsanov});
  out.push_back({"sde-solve", "one Euler path with a sampled fBm, dumped as CSV", sde_solve_defaults(), run_sde_solve});
  out.push_back({"sde-converge", "common-noise convergence across mollification levels", sde_converge_defaults(),
                 run_sde_converge});
}

}  // namespace fbm::exp
