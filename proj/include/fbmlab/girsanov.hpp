// The drift-to-Wiener-shift map theta = K_H^{-1}(int b(r,X_r) dr), the
// stochastic exponential Z, Novikov-type bounds and Girsanov-weighted
// estimators.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/sde.hpp"

namespace fbm {

struct GirsanovWeight {
  GridFunction theta;  // d-vector valued
  GridFunction logZ;   // scalar, logZ(0) = 0
  double ZT = 1.0;     // exp(logZ at the last node)
};

// theta at the nodes of X's grid: kh_inverse_ac of the density b(s, X_s)
// divided by kernel_operator_constant, so that int_0^t K_H(t,s) theta(s) ds =
// int_0^t b(s, X_s) ds for the kernel that drives the Volterra sampler.
// theta(0) is the limit 0. Unbounded drifts and grid or dimension mismatches
// raise ValidationError.
GridFunction theta_from_drift(const Drift& b, const GridFunction& X, const HurstParam& h);
// Same with a prebuilt operator; X holds (N+1)*d values, out likewise.
void theta_from_drift(const Drift& b, const double* X, const KhInverseOperator& op, double* out);

// logZ_{i+1} = logZ_i + theta_i . dW_i - |theta_i|^2 dt / 2; dW holds N*d
// Wiener increments row-major.
GirsanovWeight doleans_exponential(const GridFunction& theta, const std::vector<double>& dW);
// Running log only, for theta and dW given as raw (N+1)*d and N*d arrays.
void doleans_log(const double* theta, const double* dW, int N, int d, double dt, double* logZ);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Bounded spatial test functions on R^d.
using SpatialTest = std::function<double(const double* x, int d)>;
std::vector<std::string> spatial_test_catalog();
// "one", "bump" (prod_c psi(x_c/2), psi the unit bump), "gauss" (exp(-|x|^2/2)),
// "cos" (cos(x_1 + ... + x_d)).
SpatialTest make_spatial_test(const std::string& name);

// Mean of phi(x + B^H_t) Z_t over a Volterra ensemble (increments required),
// with theta built on X = x + B^H. t_index selects the node t.
Estimate weak_solution_estimator(const Drift& b, const SpatialTest& phi, const std::vector<double>& x, int t_index,
                                 const FbmEnsemble& ens, int workers = 0);

// Per-path terminal weights Z at node t_index, theta built on x + B^H.
std::vector<double> girsanov_weights(const Drift& b, const std::vector<double>& x, int t_index,
                                     const FbmEnsemble& ens, int workers = 0);

struct NovikovBound {
  double displayed;  // constant Gamma(3/2-H)^2 / Gamma(1-2H)^2
  double beta;       // constant Gamma(3/2-H)^2 / Gamma(2-2H)^2
};
// exp(|mu| C T^{2(1-H)} sup^2) for both constants.
NovikovBound novikov_bound(double sup_norm, double H, double T, double mu);

// Pathwise theta bound C sup^2 T^{1-2H} with C the square of the Beta
// constant over kernel_operator_constant, sharp for b = const.
double theta_bound(double sup_norm, double H, double T);

struct ThetaBoundCheck {
  double max_ratio_beta = 0.0;       // max_i |theta_i|^2 / theta_bound
  double max_ratio_displayed = 0.0;  // same with the displayed constant in place of the Beta one
  int worst_node = 0;
};
ThetaBoundCheck check_theta_bound(const GridFunction& theta, double sup_norm, double H);

// Discrete D^{H+1/2} of F(t) = int_0^t |b(s,X_s)| ds (trapezoidal F) against
// the closed form t^{1/2-H} sup / Gamma(3/2-H); returns max over nodes i >= 1
// of (value / bound), which is at most 1 for every bounded drift.
struct FracImageCheck {
  double max_ratio = 0.0;
  bool finite = true;
};
FracImageCheck frac_image_check(const Drift& b, const GridFunction& X, double H);

}  // namespace fbm
