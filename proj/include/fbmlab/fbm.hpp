// Fractional Brownian motion samplers (dense covariance factorization and the
// Volterra transform of Wiener increments) and exact structural diagnostics.
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/kernel.hpp"

namespace fbm {

// Paths stored row-major as paths[(p*(N+1) + i)*d + c]; dW likewise with N
// rows per path when present.
struct FbmEnsemble {
  TimeGrid grid;
  double H = 0.25;
  int d = 1;
  int n_paths = 0;
  std::string label;
  std::vector<double> paths;
  std::vector<double> dW;

  bool has_increments() const { return !dW.empty(); }
  double value(int p, int i, int c = 0) const {
    return paths[(static_cast<size_t>(p) * (grid.N + 1) + i) * d + c];
  }
  const double* path(int p) const { return paths.data() + static_cast<size_t>(p) * (grid.N + 1) * d; }
  const double* increments(int p) const { return dW.data() + static_cast<size_t>(p) * grid.N * d; }
};

// Upper bound on stored doubles for an in-memory ensemble.
constexpr double kDefaultMemoryBudget = 2.0e8;

// Lower Cholesky factor of [R_H(t_i,t_j)], i,j = 1..N, cached per (T, N, H).
// Throws NumericError naming the failing pivot when the matrix is not
// numerically positive definite.
std::shared_ptr<const Eigen::MatrixXd> covariance_cholesky(const TimeGrid& g, double H);

// Cell-averaged Volterra weights: row i (0..N), column j (0..N-1) holds
// (1/dt) int_{t_j}^{t_{j+1}} K_H(t_i,s) ds for j < i and 0 otherwise. Cached.
std::shared_ptr<const Eigen::MatrixXd> volterra_weights(const TimeGrid& g, double H);

// Draws for one path come from rng_stream(seed, label, path index), so any
// subset of paths can be regenerated independently and in any order.
class ExactSampler {
 public:
  ExactSampler(const TimeGrid& g, double H);
  // Paths [first, first+count) into out, laid out as in FbmEnsemble::paths.
  void sample(const SeedSpec& seed, std::string_view label, int first, int count, int d, double* out) const;

 private:
  TimeGrid grid_;
  std::shared_ptr<const Eigen::MatrixXd> L_;
};

class VolterraSampler {
 public:
  VolterraSampler(const TimeGrid& g, double H);
  // As ExactSampler::sample; dW (nullable) receives the N*d increments per path.
  void sample(const SeedSpec& seed, std::string_view label, int first, int count, int d, double* out,
              double* dW) const;
  const Eigen::MatrixXd& weights() const { return *K_; }

 private:
  TimeGrid grid_;
  std::shared_ptr<const Eigen::MatrixXd> K_;
};

// Wiener increments of one path as drawn by VolterraSampler (N*d values).
void draw_increments(const TimeGrid& g, const SeedSpec& seed, std::string_view label, int path, int d,
                     double* dW);

// out = weights * dW applied per path and component; weights is (N+1) x N.
void volterra_transform(const Eigen::MatrixXd& weights, int N, int d, int count, const double* dW, double* out);

FbmEnsemble sample_exact(const TimeGrid& g, double H, int d, int n_paths, const SeedSpec& seed,
                         std::string_view label = "fbm.exact", double memory_budget = kDefaultMemoryBudget);
FbmEnsemble sample_volterra(const TimeGrid& g, double H, int d, int n_paths, const SeedSpec& seed,
                            std::string_view label = "fbm.volterra",
                            double memory_budget = kDefaultMemoryBudget);

// Local non-determinism ratio under both readings of the denominator.
struct LndRatio {
  double expectation_reading;  // denominator sum |xi_j|^2 d |dt_j|^(2H)
  double literal_reading;      // denominator sum |xi_j|^2 2d |dt_j|^(4H)
};
// times = (t_0=0, t_1, ..., t_m) strictly increasing; xi holds m vectors of
// dimension d, row-major.
LndRatio lnd_ratio(const std::vector<double>& times, const std::vector<double>& xi, int d, double H);

// Least-squares slope of log E|B_{t+delta}-B_t|^2 against log delta over the
// given deltas at fixed t, from R_H.
double increment_variance_slope(double t, const std::vector<double>& deltas, double H);

// Binary layout: int64 N, int64 d, double H, int64 n_paths, uint64 seed, then
// n_paths*(N+1)*d doubles, in host byte order. The horizon is not part of the
// layout, so the reader takes it as an argument.
void write_ensemble_binary(const std::string& path, const FbmEnsemble& e, std::uint64_t seed);
FbmEnsemble read_ensemble_binary(const std::string& path, double T, std::uint64_t* seed = nullptr);

}  // namespace fbm
