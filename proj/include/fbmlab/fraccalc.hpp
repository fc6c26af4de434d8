// Riemann-Liouville fractional integrals and Marchaud-form fractional
// derivatives of grid functions, by product integration on the piecewise-linear
// interpolant.
#pragma once

#include <vector>

#include "fbmlab/core.hpp"

namespace fbm {

enum class Side { Left, Right };

struct FracOrder {
  double alpha = 0.5;
  Side side = Side::Left;
  double a = 0.0;  // interval [a,b]; must coincide with the grid's [0,T]
  double b = 1.0;
};

// I^alpha f at the nodes; 0 < alpha <= 1.
GridFunction frac_integral(const GridFunction& f, const FracOrder& o);

// D^alpha f at the nodes; 0 < alpha < 1. At the singular endpoint the value is
// 0 when f vanishes there, otherwise the first-cell average of f(a)(x-a)^(-alpha)/Gamma(1-alpha).
GridFunction frac_derivative(const GridFunction& f, const FracOrder& o);

// Left-sided product-integration weights for a fixed (N, h, alpha), reusable
// across many inputs on the same grid.
class FracIntegralWeights {
 public:
  FracIntegralWeights(int N, double h, double alpha);
  // out[n] = (I^alpha f)(t_n), n = 0..N; f and out hold N+1 values.
  void apply(const double* f, double* out) const;
  // Value at a single node n using f[0..n].
  double at(const double* f, int n) const;
  int steps() const { return N_; }
  double alpha() const { return alpha_; }

 private:
  int N_;
  double alpha_;
  double scale_;                 // h^alpha / Gamma(alpha+2)
  std::vector<double> interior_; // c_k, k = 1..N
  std::vector<double> first_;    // weight of f_0 at node n
};

}  // namespace fbm
