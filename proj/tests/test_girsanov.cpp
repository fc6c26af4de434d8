#include <cmath>

#include "doctest.h"
#include "fbmlab/girsanov.hpp"

using namespace fbm;

namespace {

GridFunction path_of(const FbmEnsemble& e, int p, double x0 = 0.0) {
  GridFunction X(e.grid, e.d);
  for (int i = 0; i <= e.grid.N; ++i)
    for (int c = 0; c < e.d; ++c) X(i, c) = x0 + e.value(p, i, c);
  return X;
}

}  // namespace

TEST_SUITE("girsanov") {
  TEST_CASE("theta of a constant drift") {
    const TimeGrid g = make_grid(1.0, 256);
    for (double H : {0.1, 0.3}) {
      const HurstParam h(H);
      const double c = 0.6;
      const auto b = make_drift("constant", 1, json{{"c", c}});
      const GridFunction theta = theta_from_drift(*b, GridFunction(g, 1), h);
      CHECK(theta(0) == 0.0);
      const double k = c * kinv_beta_constant(H) / kernel_operator_constant(h);
      for (int i : {32, 128, 256}) CHECK(theta(i) == doctest::Approx(k * std::pow(g.node(i), 0.5 - H)).epsilon(3e-3));
      // The pathwise bound is attained at T.
      const ThetaBoundCheck tb = check_theta_bound(theta, c, H);
      CHECK(tb.max_ratio_beta <= 1.0 + 1e-9);
      CHECK(tb.max_ratio_beta >= 0.999);
      CHECK(tb.worst_node == g.N);
    }
    CHECK_THROWS_AS(theta_from_drift(*make_drift("linear", 1), GridFunction(g, 1), HurstParam(0.2)), ValidationError);
    CHECK_THROWS_AS(theta_from_drift(*make_drift("sine", 2), GridFunction(g, 1), HurstParam(0.2)), ValidationError);
  }

  TEST_CASE("Doleans exponential recursion") {
    const TimeGrid g = make_grid(2.0, 5);
    GridFunction theta(g, 2);
    std::vector<double> dW(10);
    for (int i = 0; i <= 5; ++i) {
      theta(i, 0) = 0.1 * i;
      theta(i, 1) = -0.05 * i * i;
    }
    for (int k = 0; k < 10; ++k) dW[k] = 0.3 * std::sin(k + 1.0);
    const GirsanovWeight w = doleans_exponential(theta, dW);
    double l = 0.0;
    CHECK(w.logZ(0) == 0.0);
    for (int i = 0; i < 5; ++i) {
      l += theta(i, 0) * dW[2 * i] + theta(i, 1) * dW[2 * i + 1] -
           0.5 * (theta(i, 0) * theta(i, 0) + theta(i, 1) * theta(i, 1)) * g.dt();
      CHECK(w.logZ(i + 1) == doctest::Approx(l).epsilon(1e-14));
    }
    CHECK(w.ZT == doctest::Approx(std::exp(l)).epsilon(1e-14));
    CHECK_THROWS_AS(doleans_exponential(theta, std::vector<double>(9)), ValidationError);
  }

  TEST_CASE("log-normal moments of the exponential") {
    // Deterministic theta: Z_T is log-normal with E Z = 1 and
    // Var Z = exp(sum theta^2 dt) - 1.
    const TimeGrid g = make_grid(1.0, 32);
    GridFunction theta = GridFunction::sample(g, [](double s) { return 0.8 * std::sqrt(s); });
    double q = 0.0;
    for (int i = 0; i < g.N; ++i) q += theta(i) * theta(i) * g.dt();
    MeanAccumulator m;
    std::vector<double> dW(g.N);
    for (int p = 0; p < 40000; ++p) {
      RandomStream rs(SeedSpec{6}, "test.lognormal", p);
      for (double& x : dW) x = std::sqrt(g.dt()) * rs.normal();
      m.push(doleans_exponential(theta, dW).ZT);
    }
    CHECK(std::abs(m.mean - 1.0) <= 4 * m.se());
    const double var = std::exp(q) - 1.0;
    CHECK(m.variance() == doctest::Approx(var).epsilon(0.05));
  }

  TEST_CASE("Novikov constants") {
    const double H = 0.2, T = 2.0, sup = 1.5, mu = -3.0;
    const NovikovBound nb = novikov_bound(sup, H, T, mu);
    const double scale = 3.0 * std::pow(T, 1.6) * sup * sup;
    const double disp = std::pow(std::tgamma(1.5 - H) / std::tgamma(1 - 2 * H), 2);
    const double beta = std::pow(std::tgamma(1.5 - H) / std::tgamma(2 - 2 * H), 2);
    CHECK(nb.displayed == doctest::Approx(std::exp(scale * disp)).epsilon(1e-12));
    CHECK(nb.beta == doctest::Approx(std::exp(scale * beta)).epsilon(1e-12));
    CHECK_THROWS_AS(novikov_bound(1.0, 0.5, 1.0, 1.0), ValidationError);
  }

  TEST_CASE("spatial test functions") {
    const double x[2] = {0.3, -0.4};
    CHECK(make_spatial_test("one")(x, 2) == 1.0);
    CHECK(make_spatial_test("gauss")(x, 2) == doctest::Approx(std::exp(-0.125)));
    CHECK(make_spatial_test("cos")(x, 2) == doctest::Approx(std::cos(-0.1)));
    CHECK(make_spatial_test("bump")(x, 2) > 0.0);
    const double far[1] = {2.5};
    CHECK(make_spatial_test("bump")(far, 1) == 0.0);
    CHECK_THROWS_AS(make_spatial_test("nope"), ValidationError);
  }

  TEST_CASE("zero drift gives unit weights") {
    const TimeGrid g = make_grid(1.0, 32);
    const FbmEnsemble e = sample_volterra(g, 0.2, 1, 50, SeedSpec{7}, "test.zero");
    for (double z : girsanov_weights(*make_drift("zero", 1), {0.0}, g.N, e)) CHECK(z == 1.0);
    const SpatialTest phi = make_spatial_test("cos");
    MeanAccumulator m;
    for (int p = 0; p < e.n_paths; ++p) {
      const double y = 0.5 + e.value(p, 16);
      m.push(phi(&y, 1));
    }
    const Estimate est = weak_solution_estimator(*make_drift("zero", 1), phi, {0.5}, 16, e);
    CHECK(est.value == doctest::Approx(m.mean).epsilon(1e-14));
    const FbmEnsemble noinc = sample_exact(g, 0.2, 1, 5, SeedSpec{7}, "test.noinc");
    CHECK_THROWS_AS(girsanov_weights(*make_drift("sine", 1), {0.0}, g.N, noinc), ValidationError);
  }

  TEST_CASE("weights have unit mean and the shifted process has fBm covariance") {
    const TimeGrid g = make_grid(1.0, 64);
    const double H = 0.2;
    const FbmEnsemble e = sample_volterra(g, H, 1, 20000, SeedSpec{8}, "test.cov");
    const auto b = make_drift("sine", 1);
    const KhInverseOperator op(g, HurstParam(H));
    MeanAccumulator mz;
    std::vector<MeanAccumulator> cov(3);
    const int idx[3][2] = {{64, 64}, {32, 64}, {16, 48}};
    std::vector<double> X(g.N + 1), theta(g.N + 1), logZ(g.N + 1), I(g.N + 1);
    for (int p = 0; p < e.n_paths; ++p) {
      for (int i = 0; i <= g.N; ++i) X[i] = e.value(p, i);
      theta_from_drift(*b, X.data(), op, theta.data());
      doleans_log(theta.data(), e.increments(p), g.N, 1, g.dt(), logZ.data());
      const double Z = std::exp(logZ[g.N]);
      mz.push(Z);
      // B~_t = B_t - int_0^t b(X_s) ds by the left-point rule of the scheme.
      I[0] = 0.0;
      for (int i = 0; i < g.N; ++i) {
        double v;
        b->eval(g.node(i), &X[i], &v);
        I[i + 1] = I[i] + v * g.dt();
      }
      for (int k = 0; k < 3; ++k) {
        const int a = idx[k][0], c = idx[k][1];
        cov[k].push(Z * (X[a] - I[a]) * (X[c] - I[c]));
      }
    }
    CHECK(std::abs(mz.mean - 1.0) <= 4 * mz.se());
    for (int k = 0; k < 3; ++k) {
      const double want = covariance_rh(g.node(idx[k][0]), g.node(idx[k][1]), H);
      CHECK(std::abs(cov[k].mean - want) <= 4 * cov[k].se() + 0.02 * want);
    }
  }

  TEST_CASE("fractional image bound") {
    const TimeGrid g = make_grid(1.0, 128);
    const FbmEnsemble e = sample_exact(g, 0.2, 1, 5, SeedSpec{9}, "test.frac");
    for (const auto& name : {"sine", "sign_indicator", "checkerboard"})
      for (int p = 0; p < 5; ++p) {
        const FracImageCheck c = frac_image_check(*make_drift(name, 1), path_of(e, p), 0.2);
        CHECK(c.finite);
        CHECK(c.max_ratio <= 1.0 + 1e-9);
      }
  }
}
