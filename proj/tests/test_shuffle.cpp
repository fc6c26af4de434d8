#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fbmlab/shuffle.hpp"

using namespace fbm;
using namespace fbm::shuffle;

namespace {

// All permutations of 1..m+n that increase on the first m and on the last n
// positions, in lexicographic order, by brute force.
std::vector<std::vector<int>> brute_shuffles(int m, int n) {
  std::vector<int> s(m + n);
  std::iota(s.begin(), s.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    if (std::is_sorted(s.begin(), s.begin() + m) && std::is_sorted(s.begin() + m, s.end())) out.push_back(s);
  } while (std::next_permutation(s.begin(), s.end()));
  return out;
}

Rational factorial(int k) {
  Rational f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

Rational rpow(const Rational& x, int k) {
  Rational r = 1;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

TEST_SUITE("shuffle") {
  TEST_CASE("binomial coefficients") {
    CHECK(binomial(0, 0) == 1);
    CHECK(binomial(5, 2) == 10);
    CHECK(binomial(12, 6) == 924);
    CHECK(binomial(3, 5) == 0);
  }

  TEST_CASE("shuffle enumeration matches brute force") {
    for (int m = 0; m <= 4; ++m)
      for (int n = 0; n <= 4; ++n) {
        const ShuffleSet s = enumerate_shuffles(m, n);
        CHECK(s.perms.size() == binomial(m + n, m));
        CHECK(s.perms == brute_shuffles(m, n));
        for (const auto& p : s.perms) CHECK(is_shuffle(p, m));
      }
    CHECK(enumerate_shuffles(6, 6).perms.size() == 924);
    CHECK_THROWS_AS(enumerate_shuffles(7, 6), ValidationError);
    CHECK_THROWS_AS(enumerate_shuffles(-1, 2), ValidationError);
    CHECK_FALSE(is_shuffle({2, 1, 3}, 2));
    CHECK_FALSE(is_shuffle({1, 1, 2}, 1));
    CHECK(is_shuffle({1, 3, 2}, 2));
  }

  TEST_CASE("polynomial helpers") {
    const Poly p = {Rational(1), Rational(0), Rational(3)};  // 1 + 3x^2
    CHECK(evaluate(p, Rational(1, 2)) == Rational(7, 4));
    CHECK(multiply(monomial(2), monomial(3)) == monomial(5));
    // int_{1/2}^x (1 + 3r^2) dr = x + x^3 - 5/8.
    const Poly a = antiderivative_from(p, Rational(1, 2));
    CHECK(evaluate(a, Rational(1, 2)) == 0);
    CHECK(evaluate(a, Rational(2)) == Rational(2) + 8 - Rational(5, 8));
    CHECK(to_string(Rational(3, 4)) == "3/4");
    CHECK(to_string(Rational(-2)) == "-2");
    CHECK(to_double(Rational(1, 3)) == doctest::Approx(1.0 / 3.0).epsilon(1e-16));
  }

  TEST_CASE("simplex volume") {
    const Rational theta(1, 3), t(2);
    for (int k = 0; k <= 6; ++k) {
      const std::vector<Poly> ones(k, monomial(0));
      CHECK(simplex_integral(ones, theta, t) == rpow(t - theta, k) / factorial(k));
    }
  }

  TEST_CASE("two-level simplex of monomials") {
    // int_0^t s1^a int_0^{s1} s2^b = t^{a+b+2} / ((b+1)(a+b+2)).
    const Rational t(3, 2);
    for (int a = 0; a <= 3; ++a)
      for (int b = 0; b <= 3; ++b)
        CHECK(simplex_integral({monomial(a), monomial(b)}, Rational(0), t) ==
              rpow(t, a + b + 2) / ((b + 1) * (a + b + 2)));
  }

  TEST_CASE("shuffle identity holds exactly") {
    const std::vector<std::pair<std::vector<int>, std::vector<int>>> cases = {
        {{0}, {0}}, {{1}, {2}}, {{0, 1}, {2}}, {{2, 0}, {1, 3}}, {{1, 1, 0}, {2, 1, 0}}, {{}, {1, 2}}};
    for (const auto& [a, b] : cases) {
      const IdentityCheck c = shuffle_identity_check(a, b, Rational(1, 4), Rational(7, 5));
      CHECK(c.exact);
      CHECK(c.lhs == simplex_integral([&] {
              std::vector<Poly> f;
              for (int e : a) f.push_back(monomial(e));
              return f;
            }(), Rational(1, 4), Rational(7, 5)) *
                         simplex_integral([&] {
                           std::vector<Poly> g;
                           for (int e : b) g.push_back(monomial(e));
                           return g;
                         }(), Rational(1, 4), Rational(7, 5)));
    }
    CHECK_THROWS_AS(shuffle_identity_check({0, 0, 0, 0}, {0, 0, 0}, Rational(0), Rational(1)), ValidationError);
    CHECK_THROWS_AS(shuffle_identity_check({-1}, {0}, Rational(0), Rational(1)), ValidationError);
  }

  TEST_CASE("partial shuffle sets") {
    // The induction leaves C(n-k+p, p) interleavings.
    for (int n = 1; n <= 4; ++n)
      for (int p = 0; p <= 3; ++p)
        for (int k = 1; k <= n; ++k) {
          const InterleavingSet s = partial_shuffle_set(n, p, k);
          CHECK(s.assignments.size() == binomial(n - k + p, p));
          for (const auto& a : s.assignments) {
            CHECK(a.size() == static_cast<size_t>(n + p));
            for (int j = 0; j < k; ++j) CHECK(a[j] == j + 1);
          }
        }
    CHECK_THROWS_AS(partial_shuffle_set(2, 1, 3), ValidationError);
    CHECK_THROWS_AS(partial_shuffle_set(6, 1, 1), ValidationError);
  }

  TEST_CASE("partial shuffle decomposition is exact") {
    const PartialShuffleCheck c = partial_shuffle_decompose(3, 2, 2, {1, 0, 2}, {0, 3}, Rational(1, 5), Rational(9, 7));
    CHECK(c.equal);
    CHECK(c.lhs == c.rhs);
    CHECK(partial_shuffle_decompose(2, 0, 1, {0, 0}, {}, Rational(0), Rational(1)).equal);
  }

  TEST_CASE("measured interleaving constant") {
    for (int nmax : {2, 4})
      for (int pmax : {0, 3}) {
        int want = 1;
        for (int n = 1; n <= nmax; ++n)
          for (int p = 0; p <= pmax; ++p)
            for (int k = 1; k <= n; ++k)
              while (static_cast<double>(binomial(n - k + p, p)) > std::pow(want, n + p)) ++want;
        CHECK(measured_interleaving_constant(nmax, pmax) == want);
      }
  }
}
