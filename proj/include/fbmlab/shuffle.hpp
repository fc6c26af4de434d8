// Shuffle permutations and exact iterated integrals of polynomials over
// simplices, in rational arithmetic.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"

namespace fbm::shuffle {

using Rational = boost::multiprecision::cpp_rational;
using Poly = std::vector<Rational>;  // coefficients, lowest degree first

constexpr int kMaxShuffleSize = 12;
constexpr int kMaxIdentitySize = 6;

// sigma is stored 1-based: perms[k][j-1] = sigma(j).
struct ShuffleSet {
  int m = 0, n = 0;
  std::vector<std::vector<int>> perms;
};

std::uint64_t binomial(int n, int k);
// Lexicographic in (sigma(1), ..., sigma(m+n)); m+n <= kMaxShuffleSize.
ShuffleSet enumerate_shuffles(int m, int n);
bool is_shuffle(const std::vector<int>& sigma, int m);

Poly monomial(int exponent);
Rational evaluate(const Poly& p, const Rational& x);
Poly multiply(const Poly& a, const Poly& b);
// x -> int_theta^x p(r) dr.
Poly antiderivative_from(const Poly& p, const Rational& theta);

// int over theta < s_k < ... < s_1 < x of prod_j h_j(s_j), as a polynomial in
// x. An empty list gives the constant 1.
Poly simplex_integral_poly(const std::vector<Poly>& h, const Rational& theta);
Rational simplex_integral(const std::vector<Poly>& h, const Rational& theta, const Rational& t);

// Integrand of one shuffle term: slot sigma(j) carries the j-th function of
// the concatenated list (f_1..f_m, g_1..g_n).
std::vector<Poly> shuffled_integrand(const std::vector<int>& sigma, const std::vector<Poly>& concatenated);
// Index-literal alternative: slot j carries the sigma(j)-th function.
std::vector<Poly> literal_integrand(const std::vector<int>& sigma, const std::vector<Poly>& concatenated);

struct IdentityCheck {
  Rational lhs, rhs, rhs_literal;
  bool exact = false;          // lhs == rhs
  bool literal_exact = false;  // lhs == rhs_literal
};

// f_j(s) = s^{a_j}, g_j(s) = s^{b_j}; exponents >= 0, m+n <= kMaxIdentitySize.
IdentityCheck shuffle_identity_check(const std::vector<int>& a, const std::vector<int>& b, const Rational& theta,
                                     const Rational& t);

// Labels 1..n stand for f_1..f_n, n+1..n+p for g_1..g_p.
struct InterleavingSet {
  int n = 0, p = 0, k = 0;
  std::vector<std::vector<int>> assignments;
};

// Built by the induction on n: f_1 is prepended to the set for (f_2..f_n) with
// k-1, and the k = 1 case is f_1 followed by all shuffles of (f_2..f_n) with
// (g_1..g_p). Requires 1 <= k <= n <= 5, 0 <= p <= 5.
InterleavingSet partial_shuffle_set(int n, int p, int k);

struct PartialShuffleCheck {
  InterleavingSet set;
  Rational lhs, rhs;
  bool equal = false;
};

// Nested left-hand side (g-chain below s_k) against the sum over the set, for
// monomial f_j(s) = s^{fa_j}, g_i(s) = s^{ga_i}.
PartialShuffleCheck partial_shuffle_decompose(int n, int p, int k, const std::vector<int>& fa,
                                              const std::vector<int>& ga, const Rational& theta,
                                              const Rational& t);

// Smallest integer C >= 1 with #A_{n,p,k} <= C^{n+p} over 1 <= k <= n <= n_max,
// 0 <= p <= p_max.
int measured_interleaving_constant(int n_max, int p_max);

std::string to_string(const Rational& r);
double to_double(const Rational& r);

}  // namespace fbm::shuffle
