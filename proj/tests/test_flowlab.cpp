#include <cmath>

#include "doctest.h"
#include "fbmlab/flowlab.hpp"
#include "fbmlab/quadrature.hpp"

using namespace fbm;

namespace {

SolutionPath solve(const Drift& b, std::vector<double> x0, const FbmEnsemble& e, int p = 0) {
  return euler_solve(b, x0, e.grid, e.path(p));
}

// (1/dt) int_theta^{theta+dt} K_H(u, theta) du with u - theta = w^{1/(H+1/2)}.
double diagonal_average(double theta, double dt, double H) {
  const HurstParam h(H);
  const double q = 1.0 / (H + 0.5), wmax = std::pow(dt, H + 0.5);
  const auto& r = quad::gauss_legendre01(100);
  double acc = 0;
  for (size_t k = 0; k < r.x.size(); ++k) {
    const double w = wmax * r.x[k];
    acc += r.w[k] * wmax * q * std::pow(w, q - 1) * kernel_kh(theta + std::pow(w, q), theta, h);
  }
  return acc / dt;
}

}  // namespace

TEST_SUITE("flowlab") {
  TEST_CASE("variational flow of a linear drift is the discrete exponential") {
    const TimeGrid g = make_grid(1.0, 100);
    const FbmEnsemble e = sample_exact(g, 0.2, 1, 1, SeedSpec{1}, "test.flow");
    const double lambda = -0.7;
    const auto b = make_drift("linear", 1, json{{"lambda", lambda}});
    const VariationalState v = variational_flow(*b, {0.4}, g, e.path(0), 2);
    for (int i : {0, 10, 100}) {
      CHECK(*v.at(1, i) == doctest::Approx(std::pow(1 + lambda * g.dt(), i)).epsilon(1e-13));
      CHECK(*v.at(2, i) == 0.0);
    }
  }

  TEST_CASE("variational tensors match finite differences") {
    const TimeGrid g = make_grid(1.0, 128);
    for (int d : {1, 2}) {
      const FbmEnsemble e = sample_exact(g, 0.25, d, 1, SeedSpec{2}, "test.flowfd");
      const auto b = make_drift("sine", d);
      std::vector<double> x0(d, 0.3);
      const VariationalState v = variational_flow(*b, x0, g, e.path(0), 2);
      const double h = 1e-4;
      for (int p = 0; p < d; ++p) {
        auto xp = x0, xm = x0;
        xp[p] += h;
        xm[p] -= h;
        const SolutionPath Xp = solve(*b, xp, e), Xm = solve(*b, xm, e), X0 = solve(*b, x0, e);
        for (int r = 0; r < d; ++r) {
          const double fd1 = (Xp(g.N, r) - Xm(g.N, r)) / (2 * h);
          const double fd2 = (Xp(g.N, r) - 2 * X0(g.N, r) + Xm(g.N, r)) / (h * h);
          CHECK(v.at(1, g.N)[r * d + p] == doctest::Approx(fd1).epsilon(1e-7).scale(1.0));
          CHECK(v.at(2, g.N)[(r * d + p) * d + p] == doctest::Approx(fd2).epsilon(1e-4).scale(1.0));
        }
      }
    }
  }

  TEST_CASE("variational flow rejects non-differentiable drifts") {
    const TimeGrid g = make_grid(1.0, 8);
    const std::vector<double> noise(9, 0.0);
    CHECK_THROWS_AS(variational_flow(*make_drift("sign_indicator", 1), {0.0}, g, noise.data(), 1), ValidationError);
    CHECK_THROWS_AS(variational_flow(*make_drift("sine", 1), {0.0}, g, noise.data(), 4), ValidationError);
  }

  TEST_CASE("Malliavin derivative without drift is the kernel") {
    const TimeGrid g = make_grid(1.0, 64);
    const FbmEnsemble e = sample_exact(g, 0.3, 2, 1, SeedSpec{3}, "test.mall");
    const SolutionPath X = solve(*make_drift("zero", 2), {0.0, 0.0}, e);
    const HurstParam h(0.3);
    const int q = 20;
    const MalliavinSlice s = malliavin_derivative(*make_drift("zero", 2), X, q, 0.3, 2.0);
    for (int i = 0; i < q; ++i)
      for (int c = 0; c < 4; ++c) CHECK(s.at(i)[c] == 0.0);
    CHECK(s.at(q)[0] == doctest::Approx(2.0 * diagonal_average(g.node(q), g.dt(), 0.3)).epsilon(1e-8));
    for (int i = q + 1; i <= g.N; ++i) {
      CHECK(s.at(i)[0] == doctest::Approx(2.0 * kernel_kh(g.node(i), g.node(q), h)).epsilon(1e-14));
      CHECK(s.at(i)[1] == 0.0);
      CHECK(s.at(i)[3] == s.at(i)[0]);
    }
    CHECK_THROWS_AS(malliavin_derivative(*make_drift("zero", 2), X, 0, 0.3), ValidationError);
  }

  TEST_CASE("Malliavin derivative solves its linear equation") {
    const TimeGrid g = make_grid(1.0, 64);
    const FbmEnsemble e = sample_exact(g, 0.2, 1, 1, SeedSpec{4}, "test.mall2");
    const double lambda = -1.3;
    const auto b = make_drift("linear", 1, json{{"lambda", lambda}});
    const SolutionPath X = solve(*b, {0.2}, e);
    const HurstParam h(0.2);
    const int q = 10;
    const MalliavinSlice s = malliavin_derivative(*b, X, q, 0.2);
    for (int i = q + 1; i <= g.N; ++i) {
      double sum = 0.0;
      for (int j = q; j < i; ++j) sum += g.dt() * lambda * s.at(j)[0];
      CHECK(s.at(i)[0] == doctest::Approx(kernel_kh(g.node(i), g.node(q), h) + sum).epsilon(1e-12));
    }
  }

  TEST_CASE("compactness statistic without drift") {
    const TimeGrid g = make_grid(1.0, 32);
    const double H = 0.3, beta = 0.1;
    const FbmEnsemble e = sample_exact(g, H, 1, 3, SeedSpec{5}, "test.compact");
    const int n = g.N;
    const CompactnessTable t = compactness_diagnostic(make_drift("zero", 1), {1, 2}, e, {0.0}, n, beta);
    // D_{t_i} X_t = K_H(t, t_i) for i < n and the diagonal average at i = n.
    const HurstParam h(H);
    std::vector<double> D(n + 1);
    for (int i = 1; i < n; ++i) D[i] = kernel_kh(1.0, g.node(i), h);
    D[n] = diagonal_average(1.0, g.dt(), H);
    double s = 0.0, en = 0.0;
    for (int i = 1; i <= n; ++i) {
      en += g.dt() * D[i] * D[i];
      for (int j = 1; j <= n; ++j)
        if (i != j) s += g.dt() * g.dt() * std::pow(D[i] - D[j], 2) / std::pow(std::abs(i - j) * g.dt(), 1 + 2 * beta);
    }
    for (int l = 0; l < 2; ++l) {
      CHECK(t.stat[l] == doctest::Approx(s).epsilon(1e-8));
      CHECK(t.stat_se[l] == doctest::Approx(0.0).scale(1e-12));
      CHECK(t.energy[l] == doctest::Approx(en).epsilon(1e-8));
    }
    CHECK(t.increment[1] == doctest::Approx(0.0).scale(1e-12));
    CHECK_THROWS_AS(compactness_diagnostic(make_drift("zero", 1), {1}, e, {0.0}, n, 0.5), ValidationError);
    CHECK_THROWS_AS(compactness_diagnostic(make_drift("zero", 1), {}, e, {0.0}, n, beta), ValidationError);
  }

  TEST_CASE("cube stencils") {
    const auto s1 = cube_stencil({0.5}, 1.0);
    CHECK(s1.size() == 9);
    CHECK(s1.front()[0] == -0.5);
    CHECK(s1.back()[0] == 1.5);
    CHECK(cube_stencil({0.0, 0.0}, 0.5).size() == 9);
    const auto s3 = cube_stencil({0.0, 0.0, 0.0}, 1.0);
    CHECK(s3.size() == 9);
    CHECK(s3[0] == std::vector<double>{0.0, 0.0, 0.0});
    CHECK_THROWS_AS(cube_stencil({0, 0, 0, 0}, 1.0), ValidationError);
    CHECK_THROWS_AS(cube_stencil({0.0}, -1.0), ValidationError);
  }

  TEST_CASE("moment scan shape and control") {
    MomentScanSpec spec;
    spec.H = {0.1, 0.4};
    spec.levels = {4, 16};
    spec.stencil = cube_stencil({0.0}, 0.5);
    spec.N = 64;
    spec.paths = 40;
    spec.scheme = FlowScheme::Secant;
    const MomentScan m = moment_scan(spec, 1);
    CHECK(m.threshold == doctest::Approx(1.0 / 3.0));
    CHECK(m.moment.size() == 4);
    CHECK(m.control.size() == 2);
    for (double v : m.moment) CHECK(std::isfinite(v));
    CHECK(m.control[1] > m.control[0]);
    const MomentScan again = moment_scan(spec, 1);
    CHECK(again.moment == m.moment);
  }
}
