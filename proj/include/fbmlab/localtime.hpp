// The truncated local-time field Lambda_{alpha,R}, the Psi_k functionals, the
// integration-by-parts check, closed-form right-hand sides of the main
// estimates and the singular iterated-integral bounds.
#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/girsanov.hpp"

namespace fbm {

// alpha as an m x d array of derivative orders, row-major.
struct MultiIndex {
  int m = 1, d = 1;
  std::vector<int> a;

  MultiIndex() : a(1, 0) {}
  MultiIndex(int m_, int d_, std::vector<int> entries);
  static MultiIndex zeros(int m, int d) { return MultiIndex(m, d, std::vector<int>(static_cast<size_t>(m) * d, 0)); }
  int operator()(int j, int l) const { return a[static_cast<size_t>(j) * d + l]; }
  int total() const;
  int max_entry() const;
};

// One factor f_j(s,z) = coef * a(s) * prod_c phi(z_c).
class TestFactor {
 public:
  enum class Profile { Bump, GaussPoly };

  TestFactor(std::string name, Profile profile, double time_slope, double coef = 1.0);

  const std::string& name() const { return name_; }
  Profile profile() const { return profile_; }
  double coef() const { return coef_; }
  TestFactor scaled(double lambda) const;

  // coef * a(s), with a(s) = 1 + time_slope * s.
  double time(double s) const { return coef_ * (1.0 + slope_ * s); }
  // order-th derivative of the one-dimensional profile phi.
  double space(double x, int order) const;
  double value(double s, const double* z, int d) const;
  // D^alpha_row f(s, z) for one row of the multi-index.
  double derivative(double s, const double* z, int d, const int* alpha_row) const;

  // sup_{s in [0,T]} int |f(s,z)| dz, from the closed forms.
  double declared_norm(double T, int d) const;
  // Half-width of the spatial support of phi (infinite for GaussPoly).
  double support() const;
  // Range [-L, L] outside of which |phi| is below 1e-16.
  double effective_support() const;
  // int |phi^{(order)}| over R in one dimension.
  double profile_l1(int order) const;
  // |Fourier transform of phi| in one dimension (GaussPoly only).
  double fourier_abs(double u) const;

 private:
  std::string name_;
  Profile profile_;
  double slope_, coef_;
};

std::vector<std::string> test_factor_catalog();
// "bump": a(s) = 1 + s/2, phi the unit bump; "gauss_poly": a(s) = 1,
// phi(x) = (1 + x^2) exp(-2 x^2).
TestFactor make_test_factor(const std::string& name);

// Numerical counterpart of declared_norm (tensor quadrature, d <= 2).
double numeric_factor_norm(const TestFactor& f, double T, int d);

struct SeparableTestFunction {
  int d = 1;
  std::vector<TestFactor> factors;  // m factors
  int m() const { return static_cast<int>(factors.size()); }
};

// Generic factor values f_j(s, z_j), used for superposition checks.
using FactorFn = std::function<double(int j, double s, const double* z_j)>;

constexpr int kLambdaMaxM = 2;
constexpr int kLambdaMaxD = 2;
constexpr int kLambdaDefaultNodes = 512;
// Upper bound on (u nodes)^{dm} * (s nodes)^m work units.
constexpr double kLambdaWorkBudget = 4.0e9;

struct LambdaOptions {
  int u_nodes = kLambdaDefaultNodes;  // per u-dimension when quadrature is used
  bool force_quadrature = false;      // skip the closed form (testing)
};

// (2 pi)^{-dm} int_{|u|<R} int_{simplex} prod_j f_j(s_j,z_j) (-i u_j)^{alpha_j}
// exp(-i <u_j, B_{s_j} - z_j>) ds du on one path, s integrated first. theta
// and t must be nodes of the path grid; z holds m*d coordinates. The simplex
// is theta < s_m < ... < s_1 < t and the s-integral is the trapezoid rule on
// the path grid.
std::complex<double> lambda_truncated(const SeparableTestFunction& f, const MultiIndex& alpha, double theta,
                                      double t, const std::vector<double>& z, double R, const GridFunction& path,
                                      const LambdaOptions& opt = {});
std::complex<double> lambda_truncated(const FactorFn& f, int m, const MultiIndex& alpha, double theta, double t,
                                      const std::vector<double>& z, double R, const GridFunction& path,
                                      const LambdaOptions& opt = {});

// Mean of |Lambda_{alpha,R}|^2 over an ensemble.
Estimate lambda_l2_mc(const SeparableTestFunction& f, const MultiIndex& alpha, double theta, double t,
                      const std::vector<double>& z, double R, const FbmEnsemble& ens, int workers = 0,
                      const LambdaOptions& opt = {});

// Weighted occupation density of the piecewise-linear interpolant of a
// one-dimensional path: sum over segments in [theta,t] crossing z of
// f(s*, z) dt / |dB|, s* the crossing time.
double occupation_density(const TestFactor& f, double theta, double t, double z, const GridFunction& path);

// ---------------------------------------------------------------- Psi

enum class WeightVariant { Unit, Kernel, KernelDifference };

// kappa_j(s) = (K_H(s,theta) - K_H(s,theta'))^{eps_j}, K_H(s,theta)^{eps_j}
// or 1, for the m factors.
struct WeightSpec {
  WeightVariant variant = WeightVariant::Unit;
  std::vector<int> eps;  // per factor, 0 or 1
  double theta_prime = 0.0;
};

constexpr int kPsiDefaultNodes = 24;

// Sum over shuffles in S(m,m) of the iterated integral over theta = s_0 < s_1
// < ... < s_{2m} < t of the shuffled factor product (slot sigma(j) carries
// factor [j]) times prod_j (s_j - s_{j-1})^{-dH(2k+1)}. Returns +inf when
// dH(2k+1) >= 1.
double psi_f(const SeparableTestFunction& f, int k, double theta, double t, const std::vector<double>& z, double H,
             int nodes = kPsiDefaultNodes);
double psi_kappa(const WeightSpec& w, int m, int d, int k, double theta, double t, double H,
                 int nodes = kPsiDefaultNodes);

// int over theta = s_0 < s_1 < ... < s_n < t of prod_j g_j(s_j) (s_j -
// s_{j-1})^{w_j}, where g_j(s) = (s-theta)^{e_j} times a bounded function.
// Nested Gauss-Jacobi rules absorb every power singularity.
double iterated_singular_integral(const std::vector<std::function<double(double)>>& g,
                                  const std::vector<double>& e, const std::vector<double>& w, double theta, double t,
                                  int nodes);

// ---------------------------------------------------------------- IBP

struct IbpResult {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double diff = 0.0;
  double combined_se = 0.0;  // sqrt(lhs_se^2 + rhs_se^2)
  double paired_se = 0.0;    // SE of the per-path difference
  double allowance = 0.0;    // truncation allowance for |u| > R
  double oracle = 0.0;       // exact E[int D^alpha f(s,B_s) ds]
};

struct ZQuadrature {
  int points_per_panel = 8;
};

// m = 1, d = 1, alpha <= 2. lhs: mean of the trapezoid integral of
// D^alpha f(s,B_s); rhs: mean of int Lambda_{alpha,R}(theta,t,z) dz by
// composite Gauss-Legendre panels of width at most pi/R.
IbpResult ibp_check(const TestFactor& f, int alpha, double theta, double t, const FbmEnsemble& ens, double R,
                    const ZQuadrature& zq = {}, int workers = 0);

// int_theta^t E[D^alpha f(s, B^H_s)] ds for one-dimensional B^H by Gaussian
// quadrature in the standardized variable.
double ibp_oracle(const TestFactor& f, int alpha, double theta, double t, double H);

// (1/2pi) int_{|u|>R} |u|^alpha |phi^(u)| du times int_theta^t |a(s)| ds.
double ibp_truncation_allowance(const TestFactor& f, int alpha, double theta, double t, double R);

// int_{-R}^{R} (-iu)^alpha e^{-iub} du for alpha <= 2 (real valued).
double fourier_window(int alpha, double R, double b);

// ---------------------------------------------------------------- bounds

enum class MainEstimate { KernelDifference, Kernel };

struct BoundResult {
  bool admissible = true;
  double threshold = 0.0;  // admissibility threshold on H
  double value = 0.0;
};

// C^m prod ||f_j|| |theta'-theta|^{gamma S} |t-theta|^{m(1-d(2k+1)H) + (H-1/2-gamma) S}
//   / Gamma(2m(1-dH(2k+1)) + 1 + 2(H-1/2-gamma) S)^{1/2},  S = sum eps,
// with gamma and theta' dropped for the Kernel variant.
BoundResult bound_main_estimate(MainEstimate variant, int m, int k, int d, double H, double gamma,
                                const std::vector<int>& eps, const std::vector<double>& norms, double theta_prime,
                                double theta, double t, double C = 1.0);

// min over m' >= max(1, S) of (m' - S/2) / (m' d(2k+1) - S).
double admissibility_threshold(int k, int d, int S);

// ---------------------------------------------------------------- appendix

// int_0^t int_0^t |K_H(t,a) - K_H(t,b)|^2 / |a-b|^gamma da db with `nodes`
// Gauss-Jacobi nodes per axis on each of three regions. Requires 0 < gamma <
// 2H + 1.
double appendix_double_integral(double H, double gamma, double t, int nodes);

struct IteratedBoundCheck {
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

// Left side of the iterated-integral bound with 2m factors
// |K_H(s_j,theta) - K_H(s_j,theta')|^{eps_j} (KernelDifference) or
// K_H(s_j,theta)^{eps_j} (Kernel) and weights |s_j - s_{j-1}|^{w_j}; the right
// side is the closed form without the constant.
IteratedBoundCheck iterated_bound_check(MainEstimate variant, const std::vector<int>& eps,
                                        const std::vector<double>& w, double H, double gamma, double theta_prime,
                                        double theta, double t, int nodes = kPsiDefaultNodes);

}  // namespace fbm
