// Fixed quadrature rules and the smooth compactly supported bump used for
// mollifiers and test functions.
#pragma once

#include <vector>

namespace fbm::quad {

struct Rule {
  std::vector<double> x, w;
};

// Gauss-Legendre on [0,1]; cached.
const Rule& gauss_legendre01(int n);
// Gauss-Jacobi on [0,1] for the weight (1-v)^a * v^b, a,b > -1; cached.
const Rule& gauss_jacobi01(int n, double a, double b);

// Composite Gauss-Legendre on [lo,hi] with `panels` equal panels.
Rule composite_legendre(double lo, double hi, int panels, int points_per_panel);

// exp(-1/(1-x^2)) on (-1,1), zero outside, and its derivatives.
namespace bump {
constexpr int kMaxOrder = 10;
double value(double x);
double derivative(double x, int order);
double integral();                    // integral over (-1,1)
double abs_derivative_integral(int order);  // L1 norm of the order-th derivative
}  // namespace bump

// Probability density rho(u) = bump(u)/integral, supported on [-1,1].
namespace mollifier {
double density(double u, int order = 0);
double cdf(double u);
}  // namespace mollifier

}  // namespace fbm::quad
