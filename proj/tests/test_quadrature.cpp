#include <cmath>

#include "doctest.h"
#include "fbmlab/quadrature.hpp"

using namespace fbm;

namespace {
// Composite Simpson on [a, b] with n (even) panels: independent of the library rules.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}
}  // namespace

TEST_SUITE("quadrature") {
  TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly") {
    const auto& r = quad::gauss_legendre01(6);
    for (int k = 0; k <= 11; ++k) {
      double s = 0;
      for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], k);
      CHECK(s == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }

  TEST_CASE("Gauss-Jacobi moments equal Beta functions") {
    for (double a : {-0.4, 0.0, 0.3}) {
      for (double b : {-0.7, -0.2, 0.5}) {
        const auto& r = quad::gauss_jacobi01(10, a, b);
        for (int k = 0; k <= 6; ++k) {
          double s = 0;
          for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], k);
          // int_0^1 (1-v)^a v^{b+k} dv = B(a+1, b+k+1)
          const double beta = std::exp(std::lgamma(a + 1) + std::lgamma(b + k + 1) - std::lgamma(a + b + k + 2));
          CHECK(s == doctest::Approx(beta).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("composite rule covers the interval") {
    const auto r = quad::composite_legendre(-1.0, 3.0, 5, 4);
    double s = 0, s2 = 0;
    for (size_t i = 0; i < r.x.size(); ++i) {
      s += r.w[i];
      s2 += r.w[i] * r.x[i] * r.x[i];
    }
    CHECK(s == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(s2 == doctest::Approx(28.0 / 3.0).epsilon(1e-13));
  }

  TEST_CASE("bump and mollifier") {
    const double I = simpson([](double x) { return quad::bump::value(x); }, -1.0, 1.0, 20000);
    CHECK(quad::bump::integral() == doctest::Approx(I).epsilon(1e-10));
    CHECK(quad::bump::value(1.0) == 0.0);
    CHECK(quad::bump::value(-1.5) == 0.0);
    CHECK(quad::bump::value(0.0) == doctest::Approx(std::exp(-1.0)));
    // Derivatives against central differences.
    for (double x : {-0.7, -0.1, 0.4, 0.8})
      for (int k = 1; k <= 3; ++k) {
        const double h = 1e-5;
        const double fd = (quad::bump::derivative(x + h, k - 1) - quad::bump::derivative(x - h, k - 1)) / (2 * h);
        CHECK(quad::bump::derivative(x, k) == doctest::Approx(fd).epsilon(1e-6));
      }
    const double l1 = simpson([](double x) { return std::abs(quad::bump::derivative(x, 1)); }, -1.0, 1.0, 20000);
    CHECK(quad::bump::abs_derivative_integral(1) == doctest::Approx(l1).epsilon(1e-8));
    CHECK(quad::mollifier::cdf(-1.0) == doctest::Approx(0.0));
    CHECK(quad::mollifier::cdf(0.0) == doctest::Approx(0.5));
    CHECK(quad::mollifier::cdf(1.0) == doctest::Approx(1.0));
    const double mass = simpson([](double u) { return quad::mollifier::density(u); }, -1.0, 0.3, 20000);
    CHECK(quad::mollifier::cdf(0.3) == doctest::Approx(mass).epsilon(1e-9));
  }
}
