#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "doctest.h"
#include "fbmlab/kernel.hpp"
#include "fbmlab/quadrature.hpp"

using namespace fbm;

namespace {

// Tanh-sinh handles the integrable power singularities at either end.
template <class F>
double endpoint_singular_integral(F f, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, lo, hi);
}

}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("Hurst parameter range") {
    CHECK_THROWS_AS(HurstParam(0.0), ValidationError);
    CHECK_THROWS_AS(HurstParam(0.5), ValidationError);
    CHECK_THROWS_AS(HurstParam(0.6), ValidationError);
    const HurstParam h(0.3);
    CHECK(h.cH > 0.0);
    CHECK(std::isfinite(h.cH));
  }

  TEST_CASE("covariance formula") {
    for (double H : {0.1, 0.25, 0.4}) {
      CHECK(covariance_rh(1.0, 1.0, H) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(covariance_rh(0.7, 0.0, H) == 0.0);
    }
    CHECK(covariance_rh(2.0, 1.0, 0.25) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
    CHECK(covariance_rh(0.3, 0.8, 0.2) == covariance_rh(0.8, 0.3, 0.2));
  }

  TEST_CASE("inner kernel integral against the regularized incomplete Beta function") {
    for (double H : {0.1, 0.3, 0.45})
      for (double s : {0.01, 0.3, 0.49, 0.5, 0.8, 0.999}) {
        const double a = 1.0 - 2.0 * H, b = H + 0.5;
        const double oracle = std::pow(s, 2.0 * H - 1.0) * boost::math::beta(a, b) * boost::math::ibetac(a, b, s);
        CHECK(kernel_inner_integral(1.0, s, H) == doctest::Approx(oracle).epsilon(1e-11));
      }
  }

  TEST_CASE("kernel domain") {
    const HurstParam h(0.3);
    CHECK_THROWS_AS(kernel_kh(1.0, 1.0, h), ValidationError);
    CHECK_THROWS_AS(kernel_kh(1.0, 1.5, h), ValidationError);
    CHECK_THROWS_AS(kernel_kh(1.0, 0.0, h), ValidationError);
    CHECK(kernel_kh(1.0, 0.5, h) > 0.0);
  }

  TEST_CASE("square integral of the kernel equals t^{2H}") {
    for (double H : {0.1, 0.3}) {
      const HurstParam h(H);
      const double v = endpoint_singular_integral([&](double u) { return std::pow(kernel_kh(1.0, u, h), 2); }, 0.0, 1.0);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
      CHECK(covariance_factorization(1.0, 1.0, h, 1024) == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  TEST_CASE("leading singular behaviour near the diagonal") {
    const HurstParam h(0.3);
    double prev = INFINITY;
    for (int j = 8; j <= 16; ++j) {
      const double s = 1.0 - std::ldexp(1.0, -j);
      const double lead = h.cH * std::pow(1.0 / s, h.H - 0.5);
      const double err = std::abs(kernel_kh(1.0, s, h) * std::pow(1.0 - s, 0.5 - h.H) / lead - 1.0);
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev < 1e-4);
  }

  TEST_CASE("time derivative of the kernel") {
    const HurstParam h(0.2);
    for (double s : {0.2, 0.5})
      for (double t : {0.7, 0.9}) {
        const double e = 1e-6;
        const double fd = (kernel_kh(t + e, s, h) - kernel_kh(t - e, s, h)) / (2 * e);
        CHECK(kernel_kh_dt(t, s, h) == doctest::Approx(fd).epsilon(1e-6));
      }
  }

  TEST_CASE("cell averages against a dense rule") {
    const HurstParam h(0.25);
    const double t = 1.0, lo = 0.3, hi = 0.4;
    const auto& r = quad::gauss_legendre01(200);
    double acc = 0;
    for (size_t k = 0; k < r.x.size(); ++k) acc += r.w[k] * kernel_kh(t, lo + (hi - lo) * r.x[k], h);
    CHECK(kernel_cell_average(t, lo, hi, h) == doctest::Approx(acc).epsilon(1e-12));
    // Singular end at s = t.
    const double last = endpoint_singular_integral([&](double u) { return kernel_kh(t, u, h); }, 0.9, 1.0) / 0.1;
    CHECK(kernel_cell_average(t, 0.9, 1.0, h) == doctest::Approx(last).epsilon(1e-8));
  }

  TEST_CASE("covariance factorization refines monotonically") {
    const HurstParam h(0.2);
    double prev = INFINITY;
    for (int cells : {64, 128, 256, 512}) {
      const double e = covariance_factorization_error(h, 1.0, 8, cells);
      CHECK(e <= prev);
      prev = e;
    }
    CHECK(prev < 1e-2);
  }

  TEST_CASE("adjoint of an indicator is the kernel") {
    const HurstParam h(0.3);
    const TimeGrid g = make_grid(1.0, 1024);
    const int k = 512;
    const GridFunction ind = GridFunction::sample(g, [&](double t) { return t <= g.node(k) ? 1.0 : 0.0; });
    const GridFunction v = kh_star(ind, h);
    for (int i : {64, 128, 256, 384, 448})
      CHECK(v(i) == doctest::Approx(kernel_kh(g.node(k), g.node(i), h)).epsilon(1e-2));
    for (int i : {600, 800, 1000}) CHECK(std::abs(v(i)) < 1e-12);
    const GridFunction zero = kh_star(GridFunction(g, 1), h);
    for (int i = 0; i <= g.N; ++i) CHECK(zero(i) == 0.0);
  }

  TEST_CASE("adjoint isometry") {
    const HurstParam h(0.3);
    const TimeGrid g = make_grid(1.0, 1024);
    auto adj = [&](int k) {
      return kh_star(GridFunction::sample(g, [&](double t) { return t <= g.node(k) ? 1.0 : 0.0; }), h);
    };
    const GridFunction a = adj(512), b = adj(768);
    double ip = 0;
    for (int i = 0; i < g.N; ++i) ip += 0.5 * (a(i) * b(i) + a(i + 1) * b(i + 1)) * g.dt();
    CHECK(ip == doctest::Approx(covariance_rh(0.5, 0.75, 0.3)).epsilon(1e-2));
  }

  TEST_CASE("inverse on absolutely continuous paths") {
    for (double H : {0.1, 0.3}) {
      const HurstParam h(H);
      const TimeGrid g = make_grid(1.0, 512);
      const GridFunction zero = kh_inverse_ac(GridFunction(g, 1), h);
      for (int i = 0; i <= g.N; ++i) CHECK(zero(i) == 0.0);
      // phi' = 1: s^{H-1/2} I^{1/2-H} r^{1/2-H} = B(1/2-H, 3/2-H)/Gamma(1/2-H) s^{1/2-H}.
      const double c = std::exp(std::lgamma(0.5 - H) + std::lgamma(1.5 - H) - std::lgamma(2.0 - 2.0 * H)) /
                       std::tgamma(0.5 - H);
      CHECK(kinv_beta_constant(H) == doctest::Approx(c).epsilon(1e-14));
      const GridFunction one = kh_inverse_ac(GridFunction::sample(g, [](double) { return 1.0; }), h);
      for (int i : {64, 256, 512}) CHECK(one(i) == doctest::Approx(c * std::pow(g.node(i), 0.5 - H)).epsilon(2e-3));
      // The discretization error shrinks under refinement.
      const TimeGrid g2 = make_grid(1.0, 2048);
      const GridFunction one2 = kh_inverse_ac(GridFunction::sample(g2, [](double) { return 1.0; }), h);
      CHECK(std::abs(one2(g2.N) - c) < std::abs(one(g.N) - c));
    }
  }

  TEST_CASE("inverse is linear and obeys the pathwise bound") {
    const HurstParam h(0.2);
    const TimeGrid g = make_grid(1.0, 256);
    const double C = kinv_beta_constant(0.2);
    std::uint64_t state = 12345;
    auto next = [&] {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      return static_cast<double>(state >> 11) / 9007199254740992.0;
    };
    for (int trial = 0; trial < 100; ++trial) {
      GridFunction a(g, 1), b(g, 1), ab(g, 1);
      double sup = 0;
      for (int i = 0; i <= g.N; ++i) {
        a(i) = 2 * next() - 1;
        b(i) = 2 * next() - 1;
        ab(i) = 0.5 * a(i) - 2 * b(i);
        sup = std::max(sup, std::abs(a(i)));
      }
      const GridFunction ia = kh_inverse_ac(a, h), ib = kh_inverse_ac(b, h), iab = kh_inverse_ac(ab, h);
      for (int i = 1; i <= g.N; ++i) {
        CHECK(iab(i) == doctest::Approx(0.5 * ia(i) - 2 * ib(i)).epsilon(1e-12).scale(1.0));
        CHECK(std::abs(ia(i)) <= sup * C * std::pow(g.node(i), 0.3) * (1 + 1e-9));
      }
    }
  }

  TEST_CASE("kernel operator constant normalizes the inverse") {
    // int_0^1 K_H(1,s) c s^{1/2-H} ds = kernel_operator_constant * 1, c the
    // Beta constant: the inverse of phi(s) = s divided by the constant
    // reproduces phi through the kernel itself.
    for (double H : {0.1, 0.2, 0.3, 0.4}) {
      const HurstParam h(H);
      const double c = kinv_beta_constant(H);
      const double v = endpoint_singular_integral(
          [&](double s) { return kernel_kh(1.0, s, h) * c * std::pow(s, 0.5 - H); }, 0.0, 1.0);
      CHECK(v == doctest::Approx(kernel_operator_constant(h)).epsilon(1e-6));
    }
  }

  TEST_CASE("reusable inverse matches the grid function form") {
    const HurstParam h(0.15);
    const TimeGrid g = make_grid(2.0, 100);
    const GridFunction f = GridFunction::sample(g, [](double t) { return std::cos(t); });
    const GridFunction a = kh_inverse_ac(f, h);
    const KhInverseOperator op(g, h);
    std::vector<double> out(g.N + 1);
    op.apply(f.values.data(), 1, out.data(), 1);
    for (int i = 0; i <= g.N; ++i) CHECK(out[i] == doctest::Approx(a(i)).epsilon(1e-14));
    CHECK(op.hurst() == doctest::Approx(0.15).epsilon(1e-15));
  }
}
