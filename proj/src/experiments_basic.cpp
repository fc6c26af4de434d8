// fraccalc-table, kernel-verify, fbm-sample, fbm-verify and shuffle-verify.
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "experiment_support.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/fraccalc.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/shuffle.hpp"

namespace fbm::exp {
namespace {

// ---------------------------------------------------------------- fraccalc-table

// Smooth functions vanishing at the left endpoint.
double inversion_function(const std::string& name, double x) {
  if (name == "sin_pi") return std::sin(M_PI * x);
  if (name == "t_exp") return x * std::exp(x);
  if (name == "one_minus_cos") return 1.0 - std::cos(M_PI * x);
  throw ValidationError("unknown inversion test function '" + name + "'");
}

json fraccalc_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"power",
               {{"N", 4096},
                {"alpha", {0.1, 0.25, 0.4}},
                {"beta", {0.0, 0.5, 1.0, 2.0}},
                {"points", {0.25, 0.5, 0.75, 1.0}},
                {"rel_tol", 1e-6}}},
              {"inversion",
               {{"levels", {6, 7, 8, 9, 10, 11, 12}},
                {"alpha", {0.1, 0.25, 0.4}},
                {"functions", {"sin_pi", "t_exp", "one_minus_cos"}},
                {"min_order", 1.0}}},
              {"linearity_tol", 1e-12}};
}

ExperimentReport run_fraccalc(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "fraccalc-table";
  ExperimentReport r;
  const double T = num(cfg, "T");
  require_positive(T, "T");

  const json& pw = node(cfg, "power");
  const int N = integer(pw, "N");
  require_count(N, 2, 1 << 16, "power.N");
  const auto alphas = nums(pw, "alpha");
  const auto betas = nums(pw, "beta");
  const auto points = nums(pw, "points");
  const double rel_tol = num(pw, "rel_tol");
  for (double a : alphas) require(a > 0.0 && a <= 1.0, "power.alpha in (0, 1]");
  for (double b : betas) require(b >= 0.0, "power.beta >= 0");
  for (double x : points) require(x > 0.0 && x <= T, "power.points in (0, T]");

  const TimeGrid g = make_grid(T, N);
  CsvTable power({"beta", "alpha", "x", "numeric", "exact", "rel_err"});
  for (double beta : betas) {
    const GridFunction f = GridFunction::sample(g, [&](double x) { return std::pow(x, beta); });
    for (double alpha : alphas) {
      const GridFunction I = frac_integral(f, {alpha, Side::Left, 0.0, T});
      const double c = std::tgamma(beta + 1.0) / std::tgamma(beta + alpha + 1.0);
      auto rel_at = [&](int i, double* numeric, double* exact) {
        *numeric = I(i);
        *exact = c * std::pow(g.node(i), beta + alpha);
        return std::abs(*numeric - *exact) / std::abs(*exact);
      };
      double worst_interior = 0.0;
      for (double x : points) {
        const int i = static_cast<int>(std::lround(x / T * N));
        double nv, ev;
        const double rel = rel_at(i, &nv, &ev);
        worst_interior = std::max(worst_interior, rel);
        power.row() << beta << alpha << g.node(i) << nv << ev << rel;
      }
      double nv, ev;
      const std::string key = "power.beta=" + fmt_key(beta) + ".alpha=" + fmt_key(alpha);
      r.add(key + ".rel_err_at_T", rel_at(N, &nv, &ev), rel_tol, Check::Le);
      r.diagnostic(key + ".max_rel_err_table_points", worst_interior);
    }
  }
  power.write(ctx, name, "power");

  const json& inv = node(cfg, "inversion");
  const auto levels = integers(inv, "levels");
  const auto inv_alphas = nums(inv, "alpha");
  const auto functions = strs(inv, "functions");
  const double min_order = num(inv, "min_order");
  require(levels.size() >= 2, "inversion.levels needs two or more entries");
  for (size_t i = 0; i < levels.size(); ++i) {
    require_count(levels[i], 1, 16, "inversion.levels");
    if (i) require(levels[i] > levels[i - 1], "inversion.levels increasing");
  }
  for (double a : inv_alphas) require(a > 0.0 && a < 1.0, "inversion.alpha in (0, 1)");

  CsvTable table({"function", "alpha", "N", "l2_err", "max_err", "l2_order", "max_order"});
  for (const auto& fname : functions) {
    inversion_function(fname, 0.0);
    for (double alpha : inv_alphas) {
      std::vector<double> l2, mx;
      for (int lv : levels) {
        const TimeGrid gl = make_grid(T, 1 << lv);
        const GridFunction f = GridFunction::sample(gl, [&](double x) { return inversion_function(fname, x); });
        const FracOrder o{alpha, Side::Left, 0.0, T};
        const GridFunction back = frac_derivative(frac_integral(f, o), o);
        double s = 0.0, m = 0.0;
        for (int i = 0; i <= gl.N; ++i) {
          const double e = back(i) - f(i);
          s += (i == 0 || i == gl.N ? 0.5 : 1.0) * e * e * gl.dt();
          m = std::max(m, std::abs(e));
        }
        l2.push_back(std::sqrt(s));
        mx.push_back(m);
      }
      double min_l2_order = INFINITY, min_max_ratio = INFINITY;
      for (size_t i = 0; i < levels.size(); ++i) {
        double l2o = NAN, mo = NAN;
        if (i) {
          const double steps = levels[i] - levels[i - 1];
          l2o = std::log2(l2[i - 1] / l2[i]) / steps;
          mo = std::log2(mx[i - 1] / mx[i]) / steps;
          min_l2_order = std::min(min_l2_order, l2o);
          min_max_ratio = std::min(min_max_ratio, mx[i - 1] / mx[i]);
        }
        table.row() << fname << alpha << (1 << levels[i]) << l2[i] << mx[i] << l2o << mo;
      }
      const std::string key = "inversion." + fname + ".alpha=" + fmt_key(alpha);
      r.add(key + ".min_l2_order", min_l2_order, min_order, Check::Ge);
      // A ratio >= 1 between successive levels means the max-node error did not grow.
      r.add(key + ".min_max_err_ratio", min_max_ratio, 1.0, Check::Ge);
    }
  }
  table.write(ctx, name, "inversion");

  // Linearity of I^alpha on two catalog functions.
  {
    const double tol = num(cfg, "linearity_tol");
    const TimeGrid gl = make_grid(T, 1 << levels.back());
    const GridFunction f = GridFunction::sample(gl, [&](double x) { return inversion_function("sin_pi", x); });
    const GridFunction h = GridFunction::sample(gl, [&](double x) { return inversion_function("t_exp", x); });
    GridFunction comb(gl, 1);
    const double a = 0.7, b = -1.3;
    for (int i = 0; i <= gl.N; ++i) comb(i) = a * f(i) + b * h(i);
    double worst = 0.0;
    for (double alpha : inv_alphas) {
      const FracOrder o{alpha, Side::Left, 0.0, T};
      const GridFunction If = frac_integral(f, o), Ih = frac_integral(h, o), Ic = frac_integral(comb, o);
      double scale = 0.0;
      for (int i = 0; i <= gl.N; ++i) scale = std::max(scale, std::abs(Ic(i)));
      for (int i = 0; i <= gl.N; ++i) worst = std::max(worst, std::abs(Ic(i) - a * If(i) - b * Ih(i)) / scale);
    }
    r.add("linearity.max_rel_err", worst, tol, Check::Le);
  }
  return r;
}

// ---------------------------------------------------------------- kernel-verify

json kernel_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"H", {0.1, 0.2, 0.3, 0.4}},
              {"cells", {256, 512, 1024, 2048, 4096}},
              {"points", 16},
              {"rel_tol", 1e-2},
              {"inverse", {{"N", 1024}, {"rel_tol", 1e-3}}}};
}

ExperimentReport run_kernel(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "kernel-verify";
  ExperimentReport r;
  const double T = num(cfg, "T");
  require_positive(T, "T");
  const auto Hs = nums(cfg, "H");
  const auto cells = integers(cfg, "cells");
  const int points = integer(cfg, "points");
  const double tol = num(cfg, "rel_tol");
  for (double H : Hs) require_hurst(H);
  require(!cells.empty(), "cells must not be empty");
  for (size_t i = 0; i < cells.size(); ++i) {
    require_count(cells[i], 2, 1 << 16, "cells");
    if (i) require(cells[i] > cells[i - 1], "cells increasing");
  }
  require_count(points, 1, 256, "points");

  // One task per (H, cells) pair; the table is assembled in index order.
  const int nc = static_cast<int>(cells.size());
  std::vector<double> err(Hs.size() * cells.size());
  parallel_for(static_cast<int>(err.size()), ctx.workers, [&](int task) {
    const HurstParam h(Hs[task / nc]);
    err[task] = covariance_factorization_error(h, T, points, cells[task % nc]);
  });

  CsvTable table({"H", "N", "max_rel_err"});
  for (size_t a = 0; a < Hs.size(); ++a) {
    const std::string key = "factorization.H=" + fmt_key(Hs[a]);
    double worst_ratio = INFINITY;
    for (int c = 0; c < nc; ++c) {
      const double e = err[a * nc + c];
      table.row() << Hs[a] << cells[c] << e;
      if (c + 1 < nc)
        r.diagnostic(key + ".N=" + std::to_string(cells[c]) + ".max_rel_err", e);
      else
        r.add(key + ".N=" + std::to_string(cells[c]) + ".max_rel_err", e, tol, Check::Le);
      if (c) worst_ratio = std::min(worst_ratio, err[a * nc + c - 1] / e);
    }
    // Non-increasing under refinement: every successive ratio is at least 1.
    if (nc > 1) r.add(key + ".min_refinement_ratio", worst_ratio, 1.0, Check::Ge);
  }
  table.write(ctx, name, "factorization");

  // K_H^{-1} of phi(s) = s: both constants are recorded, the Beta one is checked.
  const json& inv = node(cfg, "inverse");
  const int Ni = integer(inv, "N");
  require_count(Ni, 4, 1 << 16, "inverse.N");
  const double inv_tol = num(inv, "rel_tol");
  CsvTable consts({"H", "beta_constant", "displayed_constant", "numeric_at_T", "beta_value_at_T"});
  for (double H : Hs) {
    const HurstParam h(H);
    const TimeGrid g = make_grid(T, Ni);
    const GridFunction one(g, std::vector<double>(g.N + 1, 1.0));
    const GridFunction th = kh_inverse_ac(one, h);
    const double exact = kinv_beta_constant(H) * std::pow(T, 0.5 - H);
    const std::string key = "inverse.H=" + fmt_key(H);
    r.add(key + ".rel_err_at_T", std::abs(th(g.N) - exact) / exact, inv_tol, Check::Le);
    r.diagnostic(key + ".displayed_over_beta", kinv_displayed_constant(H) / kinv_beta_constant(H));
    consts.row() << H << kinv_beta_constant(H) << kinv_displayed_constant(H) << th(g.N) << exact;
  }
  consts.write(ctx, name, "inverse_constants");
  return r;
}

// ---------------------------------------------------------------- fbm-sample

json fbm_sample_defaults() {
  return json{{"seed", 0},     {"T", 1.0},        {"N", 256},
              {"H", 0.3},      {"d", 1},          {"paths", 1000},
              {"method", "exact"}, {"file", "fbm-sample.bin"}, {"se_mult", 4.0}};
}

ExperimentReport run_fbm_sample(const json& cfg, const ExperimentContext& ctx) {
  ExperimentReport r;
  const double T = num(cfg, "T"), H = num(cfg, "H");
  const int N = integer(cfg, "N"), d = integer(cfg, "d"), paths = integer(cfg, "paths");
  const std::string method = str(cfg, "method");
  const double k = num(cfg, "se_mult");
  require_positive(T, "T");
  require_hurst(H);
  require_count(N, 1, 1 << 16, "N");
  require_count(d, 1, 16, "d");
  require_count(paths, 0, 100000000, "paths");
  require(method == "exact" || method == "volterra", "method must be 'exact' or 'volterra'");
  const std::string file = str(cfg, "file");
  require(!file.empty() && file.find('/') == std::string::npos, "file must be a plain file name");

  const TimeGrid g = make_grid(T, N);
  const SeedSpec seed = seed_of(cfg);
  const FbmEnsemble e = method == "exact" ? sample_exact(g, H, d, paths, seed, "fbm-sample")
                                          : sample_volterra(g, H, d, paths, seed, "fbm-sample");
  if (!ctx.out_dir.empty()) write_ensemble_binary(data_path(ctx, file), e, seed.master);

  double start = 0.0;
  MeanAccumulator var;
  for (int p = 0; p < e.n_paths; ++p)
    for (int c = 0; c < d; ++c) {
      start = std::max(start, std::abs(e.value(p, 0, c)));
      var.push(e.value(p, N, c) * e.value(p, N, c));
    }
  r.add("start_value_max_abs", start, 0.0, Check::AbsLe);
  r.diagnostic("paths", e.n_paths);
  if (var.n > 1) {
    const double target = std::pow(T, 2.0 * H);
    r.add("terminal_variance_deviation", var.mean - target, k * var.se(), Check::AbsLe, var.se());
    r.diagnostic("terminal_variance", var.mean, var.se());
  }
  return r;
}

// ---------------------------------------------------------------- fbm-verify

json fbm_verify_defaults() {
  return json{{"seed", 0},
              {"T", 1.0},
              {"N", 512},
              {"H", {0.1, 0.3}},
              {"paths", 100000},
              {"batch", 5000},
              {"se_mult", 3.0},
              {"exact_z_max", 5.5},
              {"systematic", 0.02},
              {"table_stride", 32},
              {"increments", {{"H", 0.2}, {"d", 2}, {"t", 0.75}, {"s", 0.5}, {"paths", 100000}, {"N", 64}, {"se_mult", 3.0}}},
              {"independence", {{"H", 0.3}, {"d", 2}, {"N", 64}, {"paths", 100000}, {"se_mult", 4.0}}},
              {"lnd", {{"H", 0.2}, {"m", 8}, {"draws", 1000}, {"lower_bound", 0.1}, {"near_half_H", 0.499}, {"near_half_tol", 1e-2}}},
              {"slope", {{"H", {0.1, 0.2, 0.3, 0.4}}, {"t", 0.5}, {"deltas", {0.001, 0.002, 0.004, 0.008, 0.016, 0.032}}, {"tol", 0.02}}}};
}

// Uncentred second moments (the mean is zero by construction) and the
// standard error of each entry, accumulated over batches of paths.
struct MomentAccumulator {
  Eigen::MatrixXd S, S2;
  double n = 0;

  explicit MomentAccumulator(int dim) : S(Eigen::MatrixXd::Zero(dim, dim)), S2(Eigen::MatrixXd::Zero(dim, dim)) {}
  void push(const Eigen::MatrixXd& X) {  // rows are paths
    S.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    const Eigen::MatrixXd X2 = X.array().square().matrix();
    S2.selfadjointView<Eigen::Lower>().rankUpdate(X2.transpose());
    n += static_cast<double>(X.rows());
  }
  double mean(int i, int j) const { return (i >= j ? S(i, j) : S(j, i)) / n; }
  double se(int i, int j) const {
    const double m = mean(i, j);
    const double m2 = (i >= j ? S2(i, j) : S2(j, i)) / n;
    return std::sqrt(std::max(0.0, m2 - m * m) / std::max(1.0, n - 1.0));
  }
};

ExperimentReport run_fbm_verify(const json& cfg, const ExperimentContext& ctx) {
  const std::string name = "fbm-verify";
  ExperimentReport r;
  const double T = num(cfg, "T");
  const int N = integer(cfg, "N"), paths = integer(cfg, "paths"), batch = integer(cfg, "batch");
  const auto Hs = nums(cfg, "H");
  const double k = num(cfg, "se_mult"), sys = num(cfg, "systematic"), zmax = num(cfg, "exact_z_max");
  const int stride = integer(cfg, "table_stride");
  require_positive(T, "T");
  require_count(N, 2, 4096, "N");
  require_count(paths, 2, 100000000, "paths");
  require_count(batch, 1, 1000000, "batch");
  require_count(stride, 1, N, "table_stride");
  for (double H : Hs) require_hurst(H);

  const TimeGrid g = make_grid(T, N);
  const SeedSpec seed = seed_of(cfg);
  CsvTable table({"H", "i", "j", "t_i", "t_j", "exact_sampler", "exact_se", "volterra_sampler", "volterra_se", "formula"});

  for (double H : Hs) {
    const ExactSampler ex(g, H);
    const VolterraSampler vo(g, H);
    MomentAccumulator me(N), mv(N);
    const int n_batches = (paths + batch - 1) / batch;
    for (int b = 0; b < n_batches; ++b) {
      const int first = b * batch, count = std::min(batch, paths - first);
      // Each batch is split over workers by path range; draws depend only on
      // the path index, so the batch content is worker-independent.
      std::vector<double> be(static_cast<size_t>(count) * (N + 1)), bv(be.size());
      const int chunks = std::min(count, std::max(1, ctx.workers));
      parallel_for(chunks, ctx.workers, [&](int c) {
        const int lo = first + static_cast<int>(static_cast<long>(count) * c / chunks);
        const int hi = first + static_cast<int>(static_cast<long>(count) * (c + 1) / chunks);
        const size_t off = static_cast<size_t>(lo - first) * (N + 1);
        ex.sample(seed, "fbm-verify.exact", lo, hi - lo, 1, be.data() + off);
        vo.sample(seed, "fbm-verify.volterra", lo, hi - lo, 1, bv.data() + off, nullptr);
      });
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      // Drop the t_0 column (identically zero).
      const Eigen::Map<const RowMat> Me(be.data(), count, N + 1), Mv(bv.data(), count, N + 1);
      me.push(Me.rightCols(N));
      mv.push(Mv.rightCols(N));
    }

    double excess = -INFINITY, max_diff = 0.0, vol_bias = 0.0, exact_z = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j <= i; ++j) {
        const double ce = me.mean(i, j), cv = mv.mean(i, j);
        const double se = std::sqrt(me.se(i, j) * me.se(i, j) + mv.se(i, j) * mv.se(i, j));
        const double R = covariance_rh(g.node(i + 1), g.node(j + 1), H);
        excess = std::max(excess, std::abs(cv - ce) - k * se);
        max_diff = std::max(max_diff, std::abs(cv - ce));
        vol_bias = std::max(vol_bias, std::abs(cv - R));
        exact_z = std::max(exact_z, std::abs(ce - R) / me.se(i, j));
      }
    for (int i = stride; i <= N; i += stride)
      for (int j = stride; j <= i; j += stride)
        table.row() << H << i << j << g.node(i) << g.node(j) << me.mean(i - 1, j - 1) << me.se(i - 1, j - 1)
                    << mv.mean(i - 1, j - 1) << mv.se(i - 1, j - 1) << covariance_rh(g.node(i), g.node(j), H);

    const std::string key = "samplers.H=" + fmt_key(H);
    // max over entries of |volterra - exact| - k SE, against the systematic
    // allowance on the covariance scale T^{2H}.
    r.add(key + ".max_excess_over_se", excess, sys * std::pow(T, 2.0 * H), Check::Le);
    r.diagnostic(key + ".max_abs_diff", max_diff);
    r.diagnostic(key + ".volterra_max_abs_bias_vs_formula", vol_bias);
    // Largest |z| of the exact sampler against the formula over all N(N+1)/2
    // entries; a per-entry 3 SE band would be exceeded by chance.
    r.add(key + ".exact_max_abs_z", exact_z, zmax, Check::Le);
    r.diagnostic(key + ".volterra_variance_at_T", mv.mean(N - 1, N - 1), mv.se(N - 1, N - 1));
    r.diagnostic(key + ".exact_variance_at_T", me.mean(N - 1, N - 1), me.se(N - 1, N - 1));
  }
  table.write(ctx, name, "covariance");

  // Stationary increments: E|B_t - B_s|^2 = d |t-s|^{2H}.
  {
    const json& c = node(cfg, "increments");
    const double H = num(c, "H"), t = num(c, "t"), s = num(c, "s");
    const int d = integer(c, "d"), n = integer(c, "paths"), Ni = integer(c, "N");
    require_hurst(H, "increments.H");
    require(s >= 0 && t > s && t <= T, "increments need 0 <= s < t <= T");
    require_count(n, 2, 100000000, "increments.paths");
    require_count(Ni, 1, 4096, "increments.N");
    const TimeGrid gi = make_grid(T, Ni);
    const int it = static_cast<int>(std::lround(t / T * Ni)), is = static_cast<int>(std::lround(s / T * Ni));
    require(std::abs(gi.node(it) - t) < 1e-12 && std::abs(gi.node(is) - s) < 1e-12, "increments.t, s must be nodes");
    const FbmEnsemble e = sample_exact(gi, H, d, n, seed, "fbm-verify.increments");
    MeanAccumulator acc;
    for (int p = 0; p < n; ++p) {
      double q = 0.0;
      for (int cc = 0; cc < d; ++cc) q += std::pow(e.value(p, it, cc) - e.value(p, is, cc), 2);
      acc.push(q);
    }
    const double target = d * std::pow(t - s, 2.0 * H);
    r.add("increments.mean_square_deviation", acc.mean - target, num(c, "se_mult") * acc.se(), Check::AbsLe,
          acc.se());
  }

  // Cross-covariance between components at a few nodes.
  {
    const json& c = node(cfg, "independence");
    const double H = num(c, "H");
    const int d = integer(c, "d"), n = integer(c, "paths"), Ni = integer(c, "N");
    require_hurst(H, "independence.H");
    require_count(d, 2, 8, "independence.d");
    require_count(n, 2, 100000000, "independence.paths");
    require_count(Ni, 4, 4096, "independence.N");
    const TimeGrid gi = make_grid(T, Ni);
    const FbmEnsemble e = sample_exact(gi, H, d, n, seed, "fbm-verify.independence");
    double worst = 0.0;
    for (int i : {Ni / 4, Ni / 2, Ni})
      for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
          MeanAccumulator acc;
          for (int p = 0; p < n; ++p) acc.push(e.value(p, i, a) * e.value(p, i, b));
          worst = std::max(worst, std::abs(acc.mean) / acc.se());
        }
    r.add("independence.max_cross_covariance_in_se", worst, num(c, "se_mult"), Check::Le);
  }

  // Local non-determinism ratio, exact from the covariance.
  {
    const json& c = node(cfg, "lnd");
    const double H = num(c, "H"), H_half = num(c, "near_half_H");
    const int m = integer(c, "m"), draws = integer(c, "draws");
    require_hurst(H, "lnd.H");
    require_hurst(H_half, "lnd.near_half_H");
    require_count(m, 1, 64, "lnd.m");
    require_count(draws, 1, 1000000, "lnd.draws");
    std::vector<double> times(m + 1);
    for (int j = 0; j <= m; ++j) times[j] = T * j / m;
    const LndRatio single = lnd_ratio({0.0, T}, {1.0}, 1, H);
    r.add("lnd.single_increment", single.expectation_reading - 1.0, 1e-12, Check::AbsLe);
    double lo = INFINITY, lo_literal = INFINITY, near_half = 0.0;
    RandomStream rng(seed, "fbm-verify.lnd", 0);
    for (int k = 0; k < draws; ++k) {
      std::vector<double> xi(m);
      double nrm = 0.0;
      for (auto& v : xi) {
        v = rng.normal();
        nrm += v * v;
      }
      for (auto& v : xi) v /= std::sqrt(nrm);
      const LndRatio q = lnd_ratio(times, xi, 1, H);
      lo = std::min(lo, q.expectation_reading);
      lo_literal = std::min(lo_literal, q.literal_reading);
      near_half = std::max(near_half, std::abs(lnd_ratio(times, xi, 1, H_half).expectation_reading - 1.0));
    }
    r.add("lnd.min_ratio", lo, num(c, "lower_bound"), Check::Ge);
    r.diagnostic("lnd.min_ratio_literal_reading", lo_literal);
    r.add("lnd.near_half_max_deviation", near_half, num(c, "near_half_tol"), Check::Le);
  }

  // Regression slope of log E|increment|^2 against log delta.
  {
    const json& c = node(cfg, "slope");
    const double t = num(c, "t"), tol = num(c, "tol");
    for (double H : nums(c, "H")) {
      require_hurst(H, "slope.H");
      const double sl = increment_variance_slope(t, nums(c, "deltas"), H);
      r.add("slope.H=" + fmt_key(H) + ".deviation", sl - 2.0 * H, tol, Check::AbsLe);
    }
  }
  return r;
}

// ---------------------------------------------------------------- shuffle-verify

shuffle::Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return shuffle::Rational(std::stoll(s));
    return shuffle::Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  } catch (const std::exception&) {
    throw ConfigError("not a rational number: '" + s + "'");
  }
}

json shuffle_defaults() {
  return json{{"seed", 0},
              {"random_cases", 200},
              {"max_size", 6},
              {"max_exponent", 3},
              {"times", {"0", "1/4", "1/2", "1"}},
              {"count_max_size", 12},
              {"partial", {{"n_max", 4}, {"p_max", 3}, {"draws", 3}, {"max_exponent", 3}}},
              {"interleaving_C_bound", 3}};
}

ExperimentReport run_shuffle(const json& cfg, const ExperimentContext& ctx) {
  using namespace shuffle;
  const std::string name = "shuffle-verify";
  ExperimentReport r;
  const SeedSpec seed = seed_of(cfg);
  const int cases = integer(cfg, "random_cases"), max_size = integer(cfg, "max_size");
  const int max_exp = integer(cfg, "max_exponent"), count_max = integer(cfg, "count_max_size");
  require_count(cases, 0, 100000, "random_cases");
  require_count(max_size, 2, kMaxIdentitySize, "max_size");
  require_count(max_exp, 0, 10, "max_exponent");
  require_count(count_max, 0, kMaxShuffleSize, "count_max_size");
  std::vector<Rational> times;
  for (const auto& s : strs(cfg, "times")) times.push_back(parse_rational(s));
  std::sort(times.begin(), times.end());
  require(times.size() >= 2, "times needs two distinct values");

  // Cardinalities and structure.
  int count_failures = 0;
  for (int total = 0; total <= count_max; ++total)
    for (int m = 0; m <= total; ++m) {
      const ShuffleSet s = enumerate_shuffles(m, total - m);
      bool ok = s.perms.size() == binomial(total, m);
      for (const auto& p : s.perms) ok = ok && is_shuffle(p, m);
      count_failures += ok ? 0 : 1;
    }
  r.add("cardinality.failures", count_failures, 0.0, Check::AbsLe);

  CsvTable table({"case", "a", "b", "theta", "t", "lhs", "rhs", "exact", "literal_exact"});
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
  };
  RandomStream rng(seed, "shuffle-verify", 0);
  int failures = 0, literal_mismatch = 0;
  for (int c = 0; c < cases; ++c) {
    const int total = rng.uniform_int(2, max_size);
    const int m = rng.uniform_int(1, total - 1);
    std::vector<int> a(m), b(total - m);
    for (auto& v : a) v = rng.uniform_int(0, max_exp);
    for (auto& v : b) v = rng.uniform_int(0, max_exp);
    int i0 = rng.uniform_int(0, static_cast<int>(times.size()) - 2);
    int i1 = rng.uniform_int(i0 + 1, static_cast<int>(times.size()) - 1);
    const IdentityCheck chk = shuffle_identity_check(a, b, times[i0], times[i1]);
    failures += chk.exact ? 0 : 1;
    literal_mismatch += chk.literal_exact ? 0 : 1;
    table.row() << c << join(a) << join(b) << to_string(times[i0]) << to_string(times[i1]) << to_string(chk.lhs)
                << to_string(chk.rhs) << (chk.exact ? 1 : 0) << (chk.literal_exact ? 1 : 0);
  }
  table.write(ctx, name, "identity");
  r.add("identity.failures", failures, 0.0, Check::AbsLe);
  r.diagnostic("identity.literal_reading_mismatches", literal_mismatch);
  r.diagnostic("identity.cases", cases);

  const json& pc = node(cfg, "partial");
  const int n_max = integer(pc, "n_max"), p_max = integer(pc, "p_max"), draws = integer(pc, "draws");
  const int pexp = integer(pc, "max_exponent");
  require_count(n_max, 1, 5, "partial.n_max");
  require_count(p_max, 0, 5, "partial.p_max");
  require_count(draws, 1, 100, "partial.draws");
  require_count(pexp, 0, 10, "partial.max_exponent");
  CsvTable ptable({"n", "p", "k", "draw", "size", "lhs", "rhs", "equal"});
  int pfail = 0, pcases = 0;
  for (int n = 1; n <= n_max; ++n)
    for (int p = 0; p <= p_max; ++p)
      for (int k = 1; k <= n; ++k)
        for (int dr = 0; dr < draws; ++dr) {
          std::vector<int> fa(n), ga(p);
          for (auto& v : fa) v = rng.uniform_int(0, pexp);
          for (auto& v : ga) v = rng.uniform_int(0, pexp);
          int i0 = rng.uniform_int(0, static_cast<int>(times.size()) - 2);
          int i1 = rng.uniform_int(i0 + 1, static_cast<int>(times.size()) - 1);
          const PartialShuffleCheck chk = partial_shuffle_decompose(n, p, k, fa, ga, times[i0], times[i1]);
          pfail += chk.equal ? 0 : 1;
          ++pcases;
          ptable.row() << n << p << k << dr << static_cast<int>(chk.set.assignments.size()) << to_string(chk.lhs)
                       << to_string(chk.rhs) << (chk.equal ? 1 : 0);
        }
  ptable.write(ctx, name, "partial");
  r.add("partial.failures", pfail, 0.0, Check::AbsLe);
  r.diagnostic("partial.cases", pcases);
  r.add("partial.measured_C", measured_interleaving_constant(n_max, p_max), integer(cfg, "interleaving_C_bound"),
        Check::Le);
  return r;
}

}  // namespace

void register_basic(std::vector<ExperimentSpec>& out) {
  out.push_back({"fraccalc-table", "fractional integral power table and D^a I^a inversion orders",
                 fraccalc_defaults(), run_fraccalc});
  out.push_back({"kernel-verify", "covariance factorization by the Volterra kernel, per (H, N)", kernel_defaults(),
                 run_kernel});
  out.push_back({"fbm-sample", "sample an fBm ensemble and write it in the binary layout", fbm_sample_defaults(),
                 run_fbm_sample});
  out.push_back({"fbm-verify", "exact vs Volterra sampler covariances and exact structural checks",
                 fbm_verify_defaults(), run_fbm_verify});
  out.push_back({"shuffle-verify", "exact shuffle and partial-shuffle identities on monomials", shuffle_defaults(),
                 run_shuffle});
}

}  // namespace fbm::exp
