// Drift catalog with declared norms, mollification, the Euler scheme for
// X = x + int b dt + B^H and the common-noise strong convergence study.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/fbm.hpp"

namespace fbm {

enum class DriftKind { Smooth, Singular, Mollified };

// Spatial shape used by the numerical norm checks.
enum class DriftShape { General, Separable, Radial };

constexpr int kMaxDriftOrder = 3;

class Drift {
 public:
  virtual ~Drift() = default;

  const std::string& name() const { return name_; }
  int dim() const { return d_; }
  DriftKind kind() const { return kind_; }
  DriftShape shape() const { return shape_; }
  // sup over (t,x) of the Euclidean norm |b(t,x)|; infinite when unbounded.
  double sup_norm() const { return sup_; }
  // sup over t of int |b(t,x)| dx; infinite when not integrable.
  double l1_norm() const { return l1_; }
  bool bounded() const;
  // Highest spatial derivative order available (0 for discontinuous drifts).
  int max_order() const { return max_order_; }
  // Coordinates where the drift or its mollification changes regime; used to
  // align numerical integration panels.
  const std::vector<double>& breakpoints() const { return breaks_; }
  // Half-width of a box containing the spatial support (infinite if none).
  double support_radius() const { return support_; }

  virtual void eval(double t, const double* x, double* out) const = 0;
  // Mixed partial derivative of every component: counts[c] derivatives in x_c.
  virtual void partial(double t, const double* x, const int* counts, double* out) const;

  // Dense derivative tensors: order 1 out[r*d+p], order 2 out[(r*d+p)*d+q],
  // order 3 out[((r*d+p)*d+q)*d+s].
  void derivative(double t, const double* x, int order, double* out) const;

 protected:
  Drift(std::string name, int d, DriftKind kind, DriftShape shape, double sup, double l1, int max_order,
        std::vector<double> breaks, double support);

 private:
  std::string name_;
  int d_;
  DriftKind kind_;
  DriftShape shape_;
  double sup_, l1_;
  int max_order_;
  std::vector<double> breaks_;
  double support_;
};

using DriftPtr = std::shared_ptr<const Drift>;

std::vector<std::string> smooth_catalog();
std::vector<std::string> singular_catalog();
bool catalog_supports(const std::string& name, int d);

// Parameters: "a" (amplitude, default 1), "c" (constant, default 0.5),
// "lambda" (linear rate, default -1). Unknown names or dimensions raise
// ValidationError. Singular entries have their declared norms checked
// numerically (to 1e-4) the first time they are built for a dimension.
DriftPtr make_drift(const std::string& name, int d, const json& params = json::object());

// Spatial convolution with a product bump of radius 1/n, times a product
// cutoff equal to 1 on [-n,n]^d and 0 outside [-2n,2n]^d.
DriftPtr mollify(const DriftPtr& b, int n);

struct NumericNorms {
  double sup = 0.0;
  double l1 = 0.0;
};
// Sup over a sample lattice and L1 by panel quadrature aligned with the
// breakpoints (polar coordinates for radial shapes), at time t.
NumericNorms numeric_norms(const Drift& b, double t = 0.0);

// int |a(t,x) - b(t,x)| dx over the union of both supports, maximized over
// the given times.
double l1_distance(const Drift& a, const Drift& b, const std::vector<double>& times);

struct SolutionPath {
  TimeGrid grid;
  int d = 1;
  std::vector<double> x0;
  std::string drift;
  std::string noise_label;
  int path_index = 0;
  std::vector<double> values;  // (N+1) x d row-major

  double operator()(int i, int c = 0) const { return values[static_cast<size_t>(i) * d + c]; }
};

// X_{i+1} = X_i + b(t_i, X_i) dt + (B_{i+1} - B_i); noise holds (N+1)*d fBm
// values, out receives (N+1)*d values.
void euler_solve_into(const Drift& b, const double* x0, const TimeGrid& g, const double* noise, double* out);
SolutionPath euler_solve(const Drift& b, const std::vector<double>& x0, const TimeGrid& g, const double* noise,
                         std::string noise_label = "", int path_index = 0);

struct ConvergenceTable {
  std::vector<int> levels;
  std::vector<double> mse;     // L x L, mean of |X^{n_i}_t - X^{n_j}_t|^2
  std::vector<double> mse_se;  // standard errors
  std::vector<double> cauchy;  // per i: max over j > i of mse(i,j)
  std::vector<double> cauchy_se;
};

// Solves with each mollified level on the same noise paths and tabulates the
// pairwise mean squared differences at node t_index.
ConvergenceTable strong_convergence_study(const DriftPtr& b, const std::vector<int>& levels,
                                          const FbmEnsemble& noise, const std::vector<double>& x0, int t_index,
                                          int workers = 0);

}  // namespace fbm
