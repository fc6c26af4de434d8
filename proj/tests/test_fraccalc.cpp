#include <cmath>

#include "doctest.h"
#include "fbmlab/fraccalc.hpp"

using namespace fbm;

namespace {

FracOrder left(double alpha, double T = 1.0) { return FracOrder{alpha, Side::Left, 0.0, T}; }

double l2_error(const GridFunction& a, const GridFunction& b) {
  double s = 0;
  for (int i = 0; i < a.size(); ++i) s += (a(i) - b(i)) * (a(i) - b(i));
  return std::sqrt(s * a.grid.dt());
}

}  // namespace

TEST_SUITE("fraccalc") {
  TEST_CASE("integral of a constant is exact") {
    for (double alpha : {0.1, 0.5, 0.9, 1.0}) {
      const TimeGrid g = make_grid(2.0, 37);
      const GridFunction one = GridFunction::sample(g, [](double) { return 1.0; });
      const GridFunction I = frac_integral(one, FracOrder{alpha, Side::Left, 0.0, 2.0});
      for (int i = 0; i <= g.N; ++i)
        CHECK(I(i) == doctest::Approx(std::pow(g.node(i), alpha) / std::tgamma(alpha + 1)).epsilon(1e-13));
    }
  }

  TEST_CASE("alpha = 1 is the running trapezoid integral") {
    const TimeGrid g = make_grid(1.0, 50);
    const GridFunction f = GridFunction::sample(g, [](double t) { return std::sin(3 * t) + t * t; });
    const GridFunction I = frac_integral(f, left(1.0));
    double acc = 0;
    for (int i = 0; i <= g.N; ++i) {
      if (i) acc += 0.5 * (f(i) + f(i - 1)) * g.dt();
      CHECK(I(i) == doctest::Approx(acc).epsilon(1e-13));
    }
  }

  TEST_CASE("half integral of y at x = 1") {
    // Substituting y = 1 - u^2: int_0^1 (1-y)^{-1/2} y dy = 2 int_0^1 (1-u^2) du = 4/3.
    const double oracle = (4.0 / 3.0) / std::sqrt(M_PI);
    CHECK(oracle == doctest::Approx(std::tgamma(2.0) / std::tgamma(2.5)).epsilon(1e-14));
    const TimeGrid g = make_grid(1.0, 64);
    const GridFunction f = GridFunction::sample(g, [](double t) { return t; });
    // Piecewise-linear data is integrated exactly.
    CHECK(frac_integral(f, left(0.5))(g.N) == doctest::Approx(oracle).epsilon(1e-13));
  }

  TEST_CASE("right-sided integral mirrors the left one") {
    const TimeGrid g = make_grid(1.0, 40);
    const GridFunction one = GridFunction::sample(g, [](double) { return 1.0; });
    const GridFunction I = frac_integral(one, FracOrder{0.3, Side::Right, 0.0, 1.0});
    for (int i = 0; i <= g.N; ++i)
      CHECK(I(i) == doctest::Approx(std::pow(1.0 - g.node(i), 0.3) / std::tgamma(1.3)).epsilon(1e-13));
  }

  TEST_CASE("derivative of a constant") {
    const TimeGrid g = make_grid(1.0, 64);
    const GridFunction c = GridFunction::sample(g, [](double) { return 2.5; });
    for (double alpha : {0.2, 0.5, 0.8}) {
      const GridFunction D = frac_derivative(c, left(alpha));
      for (int i = 1; i <= g.N; ++i)
        CHECK(D(i) == doctest::Approx(2.5 * std::pow(g.node(i), -alpha) / std::tgamma(1 - alpha)).epsilon(1e-12));
    }
  }

  TEST_CASE("derivative of y^alpha is Gamma(alpha+1)") {
    const TimeGrid g = make_grid(1.0, 2048);
    for (double alpha : {0.25, 0.5}) {
      const GridFunction f = GridFunction::sample(g, [&](double t) { return std::pow(t, alpha); });
      const GridFunction D = frac_derivative(f, left(alpha));
      for (int i = g.N / 4; i <= g.N; i += g.N / 8) CHECK(D(i) == doctest::Approx(std::tgamma(alpha + 1)).epsilon(2e-3));
    }
  }

  TEST_CASE("power table at the right endpoint") {
    const TimeGrid g = make_grid(1.0, 4096);
    for (double beta : {0.0, 0.5, 1.0, 2.0})
      for (double alpha : {0.1, 0.25, 0.4}) {
        const GridFunction f = GridFunction::sample(g, [&](double t) { return std::pow(t, beta); });
        const double exact = std::tgamma(beta + 1) / std::tgamma(beta + alpha + 1);
        const double got = frac_integral(f, left(alpha))(g.N);
        CHECK(std::abs(got - exact) / exact <= 1e-6);
      }
  }

  TEST_CASE("inversion error decays under refinement") {
    for (double alpha : {0.1, 0.25, 0.4}) {
      double prev = INFINITY;
      for (int N : {64, 256, 1024, 4096}) {
        const TimeGrid g = make_grid(1.0, N);
        const GridFunction f = GridFunction::sample(g, [](double t) { return std::sin(M_PI * t); });
        const GridFunction back = frac_derivative(frac_integral(f, left(alpha)), left(alpha));
        const double e = l2_error(back, f);
        // Four-fold refinement: order >= 1 means at least a factor 4.
        CHECK(e * 4.0 <= prev);
        prev = e;
      }
    }
  }

  TEST_CASE("linearity") {
    const TimeGrid g = make_grid(1.0, 200);
    const GridFunction f = GridFunction::sample(g, [](double t) { return std::exp(t); });
    const GridFunction h = GridFunction::sample(g, [](double t) { return std::cos(5 * t); });
    GridFunction comb(g, 1);
    for (int i = 0; i <= g.N; ++i) comb(i) = 2.0 * f(i) - 3.0 * h(i);
    const GridFunction a = frac_integral(comb, left(0.3)), If = frac_integral(f, left(0.3)),
                       Ih = frac_integral(h, left(0.3));
    for (int i = 0; i <= g.N; ++i) CHECK(a(i) == doctest::Approx(2.0 * If(i) - 3.0 * Ih(i)).epsilon(1e-12));
  }

  TEST_CASE("reusable weights agree with frac_integral") {
    const TimeGrid g = make_grid(1.0, 100);
    const GridFunction f = GridFunction::sample(g, [](double t) { return t * t - t; });
    const FracIntegralWeights w(g.N, g.dt(), 0.35);
    std::vector<double> out(g.N + 1);
    w.apply(f.values.data(), out.data());
    const GridFunction I = frac_integral(f, left(0.35));
    for (int i = 0; i <= g.N; ++i) {
      CHECK(out[i] == doctest::Approx(I(i)).epsilon(1e-14));
      CHECK(w.at(f.values.data(), i) == doctest::Approx(I(i)).epsilon(1e-14));
    }
  }

  TEST_CASE("argument validation") {
    const TimeGrid g = make_grid(1.0, 8);
    const GridFunction f(g, 1);
    CHECK_THROWS_AS(frac_integral(f, left(0.0)), ValidationError);
    CHECK_THROWS_AS(frac_integral(f, left(1.2)), ValidationError);
    CHECK_THROWS_AS(frac_derivative(f, left(1.0)), ValidationError);
    CHECK_THROWS_AS(frac_integral(f, FracOrder{0.5, Side::Left, 0.0, 2.0}), ValidationError);
  }
}
