#include "fbmlab/fbm.hpp"

#include <lapacke.h>

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <tuple>

namespace fbm {

namespace {

using Key = std::tuple<double, int, double>;

void check_args(const TimeGrid& g, double H, int d, int n_paths, double budget) {
  (void)HurstParam(H);
  if (d < 1) throw ValidationError("fbm: dimension must be >= 1");
  if (n_paths < 0) throw ValidationError("fbm: n_paths must be >= 0");
  const double values = static_cast<double>(n_paths) * (g.N + 1) * d;
  if (values > budget) throw ValidationError("fbm: ensemble exceeds the memory budget");
}

constexpr int kChunk = 256;

}  // namespace

std::shared_ptr<const Eigen::MatrixXd> covariance_cholesky(const TimeGrid& g, double H) {
  static std::map<Key, std::shared_ptr<const Eigen::MatrixXd>> cache;
  static std::mutex mu;
  const Key key{g.T, g.N, H};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const int N = g.N;
  auto L = std::make_shared<Eigen::MatrixXd>(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) (*L)(i, j) = covariance_rh(g.node(i + 1), g.node(j + 1), H);
  const lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', N, L->data(), N);
  if (info > 0)
    throw NumericError("covariance factorization lost positive definiteness at pivot " + std::to_string(info) +
                       " of " + std::to_string(N));
  if (info < 0) throw NumericError("covariance factorization: invalid argument " + std::to_string(-info));
  *L = L->triangularView<Eigen::Lower>();
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(L)).first->second;
}

std::shared_ptr<const Eigen::MatrixXd> volterra_weights(const TimeGrid& g, double H) {
  static std::map<Key, std::shared_ptr<const Eigen::MatrixXd>> cache;
  static std::mutex mu;
  const Key key{g.T, g.N, H};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const HurstParam h(H);
  const int N = g.N;
  auto K = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(N + 1, N));
  parallel_for(N, default_workers(), [&](int r) {
    const int i = r + 1;
    const double t = g.node(i);
    for (int j = 0; j < i; ++j) (*K)(i, j) = kernel_cell_average(t, g.node(j), g.node(j + 1), h);
  });
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(K)).first->second;
}

void draw_increments(const TimeGrid& g, const SeedSpec& seed, std::string_view label, int path, int d,
                     double* dW) {
  RandomStream rng = rng_stream(seed, label, static_cast<std::uint64_t>(path));
  const double sd = std::sqrt(g.dt());
  const int n = g.N * d;
  for (int k = 0; k < n; ++k) dW[k] = sd * rng.normal();
}

void volterra_transform(const Eigen::MatrixXd& weights, int N, int d, int count, const double* dW, double* out) {
  if (weights.rows() != N + 1 || weights.cols() != N) throw ValidationError("volterra_transform: weight shape");
  const int cols = count * d;
  Eigen::MatrixXd Z(N, cols);
  for (int p = 0; p < count; ++p)
    for (int j = 0; j < N; ++j)
      for (int c = 0; c < d; ++c) Z(j, p * d + c) = dW[(static_cast<size_t>(p) * N + j) * d + c];
  const Eigen::MatrixXd B = weights * Z;
  for (int p = 0; p < count; ++p)
    for (int i = 0; i <= N; ++i)
      for (int c = 0; c < d; ++c) out[(static_cast<size_t>(p) * (N + 1) + i) * d + c] = B(i, p * d + c);
}

ExactSampler::ExactSampler(const TimeGrid& g, double H) : grid_(g), L_(covariance_cholesky(g, H)) {}

void ExactSampler::sample(const SeedSpec& seed, std::string_view label, int first, int count, int d,
                          double* out) const {
  const int N = grid_.N;
  for (int c0 = 0; c0 < count; c0 += kChunk) {
    const int n = std::min(kChunk, count - c0);
    Eigen::MatrixXd Z(N, n * d);
    for (int q = 0; q < n; ++q) {
      RandomStream rng = rng_stream(seed, label, static_cast<std::uint64_t>(first + c0 + q));
      for (int j = 0; j < N; ++j)
        for (int c = 0; c < d; ++c) Z(j, q * d + c) = rng.normal();
    }
    const Eigen::MatrixXd B = L_->triangularView<Eigen::Lower>() * Z;
    for (int q = 0; q < n; ++q) {
      double* dst = out + static_cast<size_t>(c0 + q) * (N + 1) * d;
      for (int c = 0; c < d; ++c) dst[c] = 0.0;
      for (int i = 1; i <= N; ++i)
        for (int c = 0; c < d; ++c) dst[static_cast<size_t>(i) * d + c] = B(i - 1, q * d + c);
    }
  }
}

VolterraSampler::VolterraSampler(const TimeGrid& g, double H) : grid_(g), K_(volterra_weights(g, H)) {}

void VolterraSampler::sample(const SeedSpec& seed, std::string_view label, int first, int count, int d,
                             double* out, double* dW) const {
  const int N = grid_.N;
  const size_t per_path = static_cast<size_t>(N) * d;
  std::vector<double> local;
  for (int c0 = 0; c0 < count; c0 += kChunk) {
    const int n = std::min(kChunk, count - c0);
    double* w = nullptr;
    if (dW) {
      w = dW + c0 * per_path;
    } else {
      local.resize(n * per_path);
      w = local.data();
    }
    for (int q = 0; q < n; ++q) draw_increments(grid_, seed, label, first + c0 + q, d, w + q * per_path);
    volterra_transform(*K_, N, d, n, w, out + static_cast<size_t>(c0) * (N + 1) * d);
  }
}

FbmEnsemble sample_exact(const TimeGrid& g, double H, int d, int n_paths, const SeedSpec& seed,
                         std::string_view label, double memory_budget) {
  check_args(g, H, d, n_paths, memory_budget);
  FbmEnsemble e{g, H, d, n_paths, std::string(label), {}, {}};
  if (n_paths == 0) return e;
  e.paths.assign(static_cast<size_t>(n_paths) * (g.N + 1) * d, 0.0);
  const ExactSampler s(g, H);
  const int chunks = (n_paths + kChunk - 1) / kChunk;
  parallel_for(chunks, default_workers(), [&](int k) {
    const int first = k * kChunk;
    const int n = std::min(kChunk, n_paths - first);
    s.sample(seed, label, first, n, d, e.paths.data() + static_cast<size_t>(first) * (g.N + 1) * d);
  });
  return e;
}

FbmEnsemble sample_volterra(const TimeGrid& g, double H, int d, int n_paths, const SeedSpec& seed,
                            std::string_view label, double memory_budget) {
  check_args(g, H, d, n_paths, memory_budget);
  FbmEnsemble e{g, H, d, n_paths, std::string(label), {}, {}};
  if (n_paths == 0) return e;
  e.paths.assign(static_cast<size_t>(n_paths) * (g.N + 1) * d, 0.0);
  e.dW.assign(static_cast<size_t>(n_paths) * g.N * d, 0.0);
  const VolterraSampler s(g, H);
  const int chunks = (n_paths + kChunk - 1) / kChunk;
  parallel_for(chunks, default_workers(), [&](int k) {
    const int first = k * kChunk;
    const int n = std::min(kChunk, n_paths - first);
    s.sample(seed, label, first, n, d, e.paths.data() + static_cast<size_t>(first) * (g.N + 1) * d,
             e.dW.data() + static_cast<size_t>(first) * g.N * d);
  });
  return e;
}

LndRatio lnd_ratio(const std::vector<double>& times, const std::vector<double>& xi, int d, double H) {
  if (times.size() < 2) throw ValidationError("lnd_ratio: need at least one increment");
  if (times[0] < 0.0) throw ValidationError("lnd_ratio: partition must start at t_0 >= 0");
  for (size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) throw ValidationError("lnd_ratio: partition must be strictly increasing");
  const int m = static_cast<int>(times.size()) - 1;
  if (d < 1 || xi.size() != static_cast<size_t>(m) * d) throw ValidationError("lnd_ratio: xi has the wrong size");
  auto R = [&](double a, double b) { return covariance_rh(a, b, H); };
  double num = 0.0;
  for (int j = 1; j <= m; ++j)
    for (int k = 1; k <= m; ++k) {
      const double cov = R(times[j], times[k]) - R(times[j], times[k - 1]) - R(times[j - 1], times[k]) +
                         R(times[j - 1], times[k - 1]);
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += xi[(j - 1) * d + c] * xi[(k - 1) * d + c];
      num += dot * cov;
    }
  double den_e = 0.0, den_l = 0.0;
  for (int j = 1; j <= m; ++j) {
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += xi[(j - 1) * d + c] * xi[(j - 1) * d + c];
    const double dt = times[j] - times[j - 1];
    den_e += n2 * d * std::pow(dt, 2 * H);
    den_l += n2 * 2.0 * d * std::pow(dt, 4 * H);
  }
  if (!(den_e > 0.0)) throw ValidationError("lnd_ratio: xi must not vanish identically");
  return {num / den_e, num / den_l};
}

double increment_variance_slope(double t, const std::vector<double>& deltas, double H) {
  if (deltas.size() < 2) throw ValidationError("increment_variance_slope: need two or more deltas");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double dl : deltas) {
    if (!(dl > 0.0)) throw ValidationError("increment_variance_slope: deltas must be positive");
    const double v = covariance_rh(t + dl, t + dl, H) + covariance_rh(t, t, H) - 2 * covariance_rh(t + dl, t, H);
    const double x = std::log(dl), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(deltas.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_ensemble_binary(const std::string& path, const FbmEnsemble& e, std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  const std::int64_t N = e.grid.N, d = e.d, n = e.n_paths;
  os.write(reinterpret_cast<const char*>(&N), sizeof N);
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  os.write(reinterpret_cast<const char*>(&e.H), sizeof e.H);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&seed), sizeof seed);
  os.write(reinterpret_cast<const char*>(e.paths.data()), static_cast<std::streamsize>(e.paths.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

FbmEnsemble read_ensemble_binary(const std::string& path, double T, std::uint64_t* seed) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::int64_t N = 0, d = 0, n = 0;
  double H = 0;
  std::uint64_t s = 0;
  is.read(reinterpret_cast<char*>(&N), sizeof N);
  is.read(reinterpret_cast<char*>(&d), sizeof d);
  is.read(reinterpret_cast<char*>(&H), sizeof H);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&s), sizeof s);
  if (!is || N < 1 || d < 1 || n < 0) throw ValidationError("read_ensemble_binary: malformed header");
  FbmEnsemble e;
  e.grid = make_grid(T, static_cast<int>(N));
  e.H = H;
  e.d = static_cast<int>(d);
  e.n_paths = static_cast<int>(n);
  e.paths.resize(static_cast<size_t>(n) * (N + 1) * d);
  is.read(reinterpret_cast<char*>(e.paths.data()), static_cast<std::streamsize>(e.paths.size() * sizeof(double)));
  if (!is) throw ValidationError("read_ensemble_binary: truncated payload");
  if (seed) *seed = s;
  return e;
}

}  // namespace fbm
