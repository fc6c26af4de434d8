#include "fbmlab/shuffle.hpp"

#include <algorithm>
#include <cmath>

namespace fbm::shuffle {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

ShuffleSet enumerate_shuffles(int m, int n) {
  if (m < 0 || n < 0) throw ValidationError("enumerate_shuffles: counts must be non-negative");
  if (m + n > kMaxShuffleSize) throw ValidationError("enumerate_shuffles: m+n exceeds the cap");
  ShuffleSet s{m, n, {}};
  const int total = m + n;
  std::vector<int> pick(m);
  for (int j = 0; j < m; ++j) pick[j] = j + 1;
  while (true) {
    std::vector<int> sigma(pick);
    std::vector<bool> used(total + 1, false);
    for (int v : pick) used[v] = true;
    for (int v = 1; v <= total; ++v)
      if (!used[v]) sigma.push_back(v);
    s.perms.push_back(std::move(sigma));
    // Next m-combination of {1..total} in lexicographic order.
    int j = m - 1;
    while (j >= 0 && pick[j] == total - m + j + 1) --j;
    if (j < 0) break;
    ++pick[j];
    for (int q = j + 1; q < m; ++q) pick[q] = pick[q - 1] + 1;
  }
  return s;
}

bool is_shuffle(const std::vector<int>& sigma, int m) {
  const int total = static_cast<int>(sigma.size());
  if (m < 0 || m > total) return false;
  std::vector<bool> seen(total + 1, false);
  for (int v : sigma) {
    if (v < 1 || v > total || seen[v]) return false;
    seen[v] = true;
  }
  for (int j = 1; j < m; ++j)
    if (sigma[j] <= sigma[j - 1]) return false;
  for (int j = m + 1; j < total; ++j)
    if (sigma[j] <= sigma[j - 1]) return false;
  return true;
}

Poly monomial(int exponent) {
  if (exponent < 0) throw ValidationError("monomial: negative exponent");
  Poly p(exponent + 1, Rational(0));
  p[exponent] = 1;
  return p;
}

Rational evaluate(const Poly& p, const Rational& x) {
  Rational r = 0;
  for (size_t i = p.size(); i-- > 0;) r = r * x + p[i];
  return r;
}

Poly multiply(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, Rational(0));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Poly antiderivative_from(const Poly& p, const Rational& theta) {
  Poly r(p.size() + 1, Rational(0));
  for (size_t i = 0; i < p.size(); ++i) r[i + 1] = p[i] / static_cast<int>(i + 1);
  r[0] = -evaluate(r, theta);
  return r;
}

Poly simplex_integral_poly(const std::vector<Poly>& h, const Rational& theta) {
  Poly acc{Rational(1)};
  for (size_t j = h.size(); j-- > 0;) acc = antiderivative_from(multiply(h[j], acc), theta);
  return acc;
}

Rational simplex_integral(const std::vector<Poly>& h, const Rational& theta, const Rational& t) {
  return evaluate(simplex_integral_poly(h, theta), t);
}

std::vector<Poly> shuffled_integrand(const std::vector<int>& sigma, const std::vector<Poly>& concatenated) {
  std::vector<Poly> slots(sigma.size());
  for (size_t j = 0; j < sigma.size(); ++j) slots[sigma[j] - 1] = concatenated[j];
  return slots;
}

std::vector<Poly> literal_integrand(const std::vector<int>& sigma, const std::vector<Poly>& concatenated) {
  std::vector<Poly> slots(sigma.size());
  for (size_t j = 0; j < sigma.size(); ++j) slots[j] = concatenated[sigma[j] - 1];
  return slots;
}

IdentityCheck shuffle_identity_check(const std::vector<int>& a, const std::vector<int>& b, const Rational& theta,
                                     const Rational& t) {
  const int m = static_cast<int>(a.size()), n = static_cast<int>(b.size());
  if (m + n > kMaxIdentitySize) throw ValidationError("shuffle_identity_check: m+n exceeds the cap");
  if (!(theta < t)) throw ValidationError("shuffle_identity_check: need theta < t");
  std::vector<Poly> f, g, all;
  for (int e : a) f.push_back(monomial(e));
  for (int e : b) g.push_back(monomial(e));
  all = f;
  all.insert(all.end(), g.begin(), g.end());
  IdentityCheck c;
  c.lhs = simplex_integral(f, theta, t) * simplex_integral(g, theta, t);
  c.rhs = 0;
  c.rhs_literal = 0;
  for (const auto& sigma : enumerate_shuffles(m, n).perms) {
    c.rhs += simplex_integral(shuffled_integrand(sigma, all), theta, t);
    c.rhs_literal += simplex_integral(literal_integrand(sigma, all), theta, t);
  }
  c.exact = c.lhs == c.rhs;
  c.literal_exact = c.lhs == c.rhs_literal;
  return c;
}

namespace {

// Sequences over the labels first..n_last of the f-block (f-labels shifted)
// and the fixed g-labels.
std::vector<std::vector<int>> build_set(int f_first, int n, int p, int k, int g_first) {
  std::vector<std::vector<int>> out;
  if (k == 1) {
    const ShuffleSet s = enumerate_shuffles(n - 1, p);
    std::vector<int> rest;
    for (int j = 1; j < n; ++j) rest.push_back(f_first + j);
    for (int i = 0; i < p; ++i) rest.push_back(g_first + i);
    for (const auto& sigma : s.perms) {
      std::vector<int> seq(n + p);
      seq[0] = f_first;
      for (size_t j = 0; j < sigma.size(); ++j) seq[sigma[j]] = rest[j];
      out.push_back(std::move(seq));
    }
    return out;
  }
  for (auto& tail : build_set(f_first + 1, n - 1, p, k - 1, g_first)) {
    std::vector<int> seq{f_first};
    seq.insert(seq.end(), tail.begin(), tail.end());
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

InterleavingSet partial_shuffle_set(int n, int p, int k) {
  if (k > n) throw ValidationError("partial_shuffle_set: k must not exceed n");
  if (k < 1 || n > 5 || p < 0 || p > 5) throw ValidationError("partial_shuffle_set: need 1 <= k <= n <= 5, 0 <= p <= 5");
  return InterleavingSet{n, p, k, build_set(1, n, p, k, n + 1)};
}

PartialShuffleCheck partial_shuffle_decompose(int n, int p, int k, const std::vector<int>& fa,
                                              const std::vector<int>& ga, const Rational& theta,
                                              const Rational& t) {
  if (static_cast<int>(fa.size()) != n || static_cast<int>(ga.size()) != p)
    throw ValidationError("partial_shuffle_decompose: exponent lists do not match (n, p)");
  PartialShuffleCheck c;
  c.set = partial_shuffle_set(n, p, k);
  std::vector<Poly> f, labels;
  for (int e : fa) f.push_back(monomial(e));
  std::vector<Poly> g;
  for (int e : ga) g.push_back(monomial(e));
  labels = f;
  labels.insert(labels.end(), g.begin(), g.end());

  std::vector<Poly> nested = f;
  nested[k - 1] = multiply(nested[k - 1], simplex_integral_poly(g, theta));
  c.lhs = simplex_integral(nested, theta, t);

  c.rhs = 0;
  for (const auto& seq : c.set.assignments) {
    std::vector<Poly> h;
    for (int label : seq) h.push_back(labels[label - 1]);
    c.rhs += simplex_integral(h, theta, t);
  }
  c.equal = c.lhs == c.rhs;
  return c;
}

int measured_interleaving_constant(int n_max, int p_max) {
  int C = 1;
  for (int n = 1; n <= n_max; ++n)
    for (int p = 0; p <= p_max; ++p)
      for (int k = 1; k <= n; ++k) {
        const double count = static_cast<double>(partial_shuffle_set(n, p, k).assignments.size());
        while (std::pow(static_cast<double>(C), n + p) < count) ++C;
      }
  return C;
}

std::string to_string(const Rational& r) { return r.str(); }

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace fbm::shuffle
