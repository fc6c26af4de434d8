// Derivatives of the Euler flow with respect to the initial point and to the
// driving noise, the double-increment compactness statistic and H-threshold
// moment scans.
#pragma once

#include <string>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/sde.hpp"

namespace fbm {

constexpr int kMaxFlowOrder = 3;

// How the drift derivatives enter one time step. Euler uses their values at
// the left node, so the tensors are the exact derivatives of euler_solve.
// Secant (d = 1) uses their mean along the linear segment between successive
// nodes, which stays bounded by 2 sup|b| / |X_{i+1} - X_i| when the drift
// has steep layers narrower than a step.
enum class FlowScheme { Euler, Secant };

// tensors[j-1] holds d^x_j X at every node: (N+1) blocks of d^{j+1} entries,
// index [r, p_1, ..., p_j] row-major inside a block.
struct VariationalState {
  SolutionPath base;
  int order = 1;
  std::vector<std::vector<double>> tensors;

  const double* at(int j, int i) const;
  // Frobenius norm of the order-j tensor at node i.
  double norm(int j, int i) const;
};

// Euler path and its first `order` derivatives in x, stepped jointly:
// J1' = Db J1, J2' = D2b(J1,J1) + Db J2, J3 by the chain rule for third
// derivatives. noise holds (N+1)*d fBm values.
VariationalState variational_flow(const Drift& b, const std::vector<double>& x0, const TimeGrid& g,
                                  const double* noise, int order, FlowScheme scheme = FlowScheme::Euler);

// D_theta X at nodes t_i >= theta as d x d matrices, row-major; zero before
// theta.
struct MalliavinSlice {
  int theta_index = 1;
  int d = 1;
  std::vector<double> values;  // (N+1) * d * d

  const double* at(int i) const { return values.data() + static_cast<size_t>(i) * d * d; }
};

// Y_i = s K_H(t_i, theta) I + sum_{theta <= t_j < t_i} dt Db(t_j, X_j) Y_j for
// t_i > theta and Y_theta = s * (cell average of K_H(., theta) over the first
// step) I, with s = kernel_scale. Db is taken per step as in FlowScheme.
MalliavinSlice malliavin_derivative(const Drift& b, const SolutionPath& path, int theta_index, double H,
                                    double kernel_scale = 1.0, FlowScheme scheme = FlowScheme::Euler);

struct CompactnessTable {
  std::vector<int> levels;
  std::vector<double> stat, stat_se;      // double-increment statistic per level
  std::vector<double> energy, energy_se;  // int_0^t E|D_theta X_t|^2 dtheta per level
  double sup_stat = 0.0;
  int sup_level = 0;
  // Paired means of stat(level) - stat(previous level); 0 for the first.
  std::vector<double> increment, increment_se;
  // max over levels of the paired mean of stat(level) - stat(first level).
  double growth = 0.0, growth_se = 0.0;
};

// For each level: mollify b (singular drifts only; other drifts are used as
// given), solve on every ensemble path from x0 and estimate
//   sum_{i != j} dt^2 E|D_{t_i} X_t - D_{t_j} X_t|^2 / |t_i - t_j|^{1+2 beta}
// over nodes 1 <= i, j <= t_index (Frobenius norm), plus the energy term.
CompactnessTable compactness_diagnostic(const DriftPtr& b, const std::vector<int>& levels, const FbmEnsemble& ens,
                                        const std::vector<double>& x0, int t_index, double beta,
                                        FlowScheme scheme = FlowScheme::Euler, int workers = 0);

// Nine points around x0 at radius r: evenly spaced on [-r, r] (d = 1), the
// 3 x 3 lattice (d = 2), centre plus the cube corners (d = 3).
std::vector<std::vector<double>> cube_stencil(const std::vector<double>& x0, double radius);

struct MomentScanSpec {
  std::string drift = "sign_indicator";
  int d = 1;
  int k = 1;
  int p = 2;
  FlowScheme scheme = FlowScheme::Euler;
  std::vector<double> H;
  std::vector<int> levels;
  std::vector<std::vector<double>> stencil;
  double T = 1.0;
  int N = 128;
  int paths = 500;
  SeedSpec seed;
  std::string label = "flow-scan";
};

struct MomentScan {
  double threshold = 0.0;  // 1/(d(2k+1))
  std::vector<double> H;
  std::vector<int> levels;
  // H-major (H index, level index): max over the stencil of the mean of
  // |d^k X_T|^p, with the SE at the maximizing point.
  std::vector<double> moment, moment_se;
  // Same with the noise switched off (one value per level).
  std::vector<double> control;
};

MomentScan moment_scan(const MomentScanSpec& spec, int workers = 0);

}  // namespace fbm
