// Volterra kernel K_H of fractional Brownian motion, its covariance, the
// operator K_H^* and the inverse K_H^{-1} on absolutely continuous paths.
#pragma once

#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/fraccalc.hpp"

namespace fbm {

struct HurstParam {
  double H;
  double cH;  // sqrt(2H / ((1-2H) B(1-2H, H+1/2)))
  explicit HurstParam(double H);
};

// Nodes used by the inner integral of K_H.
constexpr int kKernelInnerNodes = 64;

// int_s^t u^(H-3/2) (u-s)^(H-1/2) du, 0 < s < t.
double kernel_inner_integral(double t, double s, double H);

// K_H(t,s), 0 < s < t; throws ValidationError otherwise.
double kernel_kh(double t, double s, const HurstParam& h);
// dK_H/dt (t,s) = c_H (H-1/2) (t/s)^(H-1/2) (t-s)^(H-3/2).
double kernel_kh_dt(double t, double s, const HurstParam& h);

// (1/(hi-lo)) int_lo^hi K_H(t,s) ds with 0 <= lo < hi <= t; singular ends
// (s=0, s=t) handled by Gauss-Jacobi weights.
double kernel_cell_average(double t, double lo, double hi, const HurstParam& h);

// (1/dt) int_s^{s+dt} K_H(u,s) du: average over the first argument, used where
// K_H(s,s) itself is infinite.
double kernel_diagonal_average(double s, double dt, const HurstParam& h);

double covariance_rh(double t, double s, double H);

// int_0^{min(t,s)} K_H(t,u) K_H(s,u) du with `cells` equal cells; first and
// last cell use Gauss-Jacobi weights matched to the endpoint singularities.
double covariance_factorization(double t, double s, const HurstParam& h, int cells);

// Max relative error of the factorization over the (t_a, t_b) test grid
// t_a = a T/points, a = 1..points, at the given cell count.
double covariance_factorization_error(const HurstParam& h, double T, int points, int cells);

// (K_H^* phi)(t_i) at the nodes. Entries at s=0 and s=T, where K_H(T,s) is
// singular, hold 0 when phi vanishes there and otherwise the half-cell average
// of the leading singular profile fitted at the neighbouring node.
GridFunction kh_star(const GridFunction& phi, const HurstParam& h);

// Gamma(3/2-H)/Gamma(2-2H): K_H^{-1} of phi(s)=s is this constant times s^(1/2-H).
double kinv_beta_constant(double H);
// Gamma(3/2-H)/Gamma(1-2H), the constant in the stated Novikov bound.
double kinv_displayed_constant(double H);
// c_H Gamma(H+1/2): int_0^t K_H(t,s) phi(s) ds equals this constant times
// I^{2H} s^{1/2-H} I^{1/2-H} s^{H-1/2} phi, so kh_inverse_ac divided by it
// inverts the kernel operator itself.
double kernel_operator_constant(const HurstParam& h);

// K_H^{-1} phi from the density phi' (componentwise for vector input):
// s^(H-1/2) I^(1/2-H)( r^(1/2-H) phi'(r) )(s). The s=0 entry is extrapolated
// from the first two interior nodes along a + c s^(1/2-H).
GridFunction kh_inverse_ac(const GridFunction& dphi, const HurstParam& h);

// Reusable form for many inputs on one grid.
class KhInverseOperator {
 public:
  KhInverseOperator(const TimeGrid& g, const HurstParam& h);
  // dphi and out are strided arrays of N+1 entries.
  void apply(const double* dphi, int in_stride, double* out, int out_stride) const;
  const TimeGrid& grid() const { return grid_; }
  double hurst() const { return 0.5 - p_; }

 private:
  TimeGrid grid_;
  double p_;  // 1/2 - H
  FracIntegralWeights weights_;
  std::vector<double> pos_pow_, neg_pow_;  // t^p, t^-p
};

}  // namespace fbm
