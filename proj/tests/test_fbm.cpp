#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "fbmlab/fbm.hpp"

using namespace fbm;

namespace {

// Sample covariance of columns i, j over the ensemble with a plug-in SE.
struct CovEstimate {
  double mean, se;
};

CovEstimate sample_cov(const FbmEnsemble& e, int i, int j, int ci = 0, int cj = 0) {
  MeanAccumulator a;
  for (int p = 0; p < e.n_paths; ++p) a.push(e.value(p, i, ci) * e.value(p, j, cj));
  return {a.mean, a.se()};
}

}  // namespace

TEST_SUITE("fbm") {
  TEST_CASE("Cholesky factor reproduces the covariance matrix") {
    const TimeGrid g = make_grid(2.0, 40);
    for (double H : {0.1, 0.35}) {
      const auto L = covariance_cholesky(g, H);
      const Eigen::MatrixXd C = (*L) * L->transpose();
      for (int i = 1; i <= g.N; i += 3)
        for (int j = 1; j <= g.N; j += 5)
          CHECK(C(i - 1, j - 1) == doctest::Approx(covariance_rh(g.node(i), g.node(j), H)).epsilon(1e-12));
      CHECK(covariance_cholesky(g, H).get() == L.get());
    }
  }

  TEST_CASE("Volterra weights are lower triangular cell averages") {
    const TimeGrid g = make_grid(1.0, 16);
    const auto K = volterra_weights(g, 0.2);
    CHECK(K->rows() == 17);
    CHECK(K->cols() == 16);
    for (int j = 0; j < 16; ++j) CHECK((*K)(0, j) == 0.0);
    for (int i = 1; i <= 16; ++i)
      for (int j = i; j < 16; ++j) CHECK((*K)(i, j) == 0.0);
    const HurstParam h(0.2);
    CHECK((*K)(10, 3) == doctest::Approx(kernel_cell_average(g.node(10), g.node(3), g.node(4), h)).epsilon(1e-14));
  }

  TEST_CASE("exact sampler is reproducible and path-addressable") {
    const TimeGrid g = make_grid(1.0, 32);
    const ExactSampler s(g, 0.3);
    const int d = 2, row = (g.N + 1) * d;
    std::vector<double> all(5 * row), part(2 * row), again(5 * row), other(5 * row);
    s.sample(SeedSpec{7}, "t", 0, 5, d, all.data());
    s.sample(SeedSpec{7}, "t", 3, 2, d, part.data());
    s.sample(SeedSpec{7}, "t", 0, 5, d, again.data());
    s.sample(SeedSpec{8}, "t", 0, 5, d, other.data());
    CHECK(all == again);
    for (int k = 0; k < 2 * row; ++k) CHECK(part[k] == all[3 * row + k]);
    CHECK(all != other);
    for (int p = 0; p < 5; ++p)
      for (int c = 0; c < d; ++c) CHECK(all[p * row + c] == 0.0);
  }

  TEST_CASE("exact sampler covariance and component independence") {
    const TimeGrid g = make_grid(1.5, 8);
    const double H = 0.25;
    const FbmEnsemble e = sample_exact(g, H, 2, 20000, SeedSpec{3}, "test.cov");
    for (int i : {1, 4, 8})
      for (int j : {2, 8}) {
        const CovEstimate c = sample_cov(e, i, j);
        CHECK(std::abs(c.mean - covariance_rh(g.node(i), g.node(j), H)) <= 4.5 * c.se);
      }
    const CovEstimate x = sample_cov(e, 8, 8, 0, 1);
    CHECK(std::abs(x.mean) <= 4.5 * x.se);
  }

  TEST_CASE("exact sampler increments are stationary") {
    const TimeGrid g = make_grid(1.0, 16);
    const double H = 0.15;
    const FbmEnsemble e = sample_exact(g, H, 1, 20000, SeedSpec{11}, "test.incr");
    const double h = g.dt();
    for (int i : {0, 7, 15}) {
      MeanAccumulator a;
      for (int p = 0; p < e.n_paths; ++p) a.push(std::pow(e.value(p, i + 1) - e.value(p, i), 2));
      CHECK(std::abs(a.mean - std::pow(h, 2 * H)) <= 4.5 * a.se());
    }
  }

  TEST_CASE("Volterra sampler is the transform of its increments") {
    const TimeGrid g = make_grid(1.0, 24);
    const VolterraSampler s(g, 0.3);
    const int d = 2, count = 3;
    std::vector<double> out(count * (g.N + 1) * d), dW(count * g.N * d), dW1(g.N * d), again(out.size());
    s.sample(SeedSpec{5}, "v", 4, count, d, out.data(), dW.data());
    draw_increments(g, SeedSpec{5}, "v", 5, d, dW1.data());
    for (int k = 0; k < g.N * d; ++k) CHECK(dW1[k] == dW[g.N * d + k]);
    volterra_transform(s.weights(), g.N, d, count, dW.data(), again.data());
    for (size_t k = 0; k < out.size(); ++k) CHECK(again[k] == doctest::Approx(out[k]).epsilon(1e-14));
    // A hand transform of one entry.
    double v = 0.0;
    for (int j = 0; j < 10; ++j) v += s.weights()(10, j) * dW[(g.N * d) * 0 + j * d + 1];
    CHECK(out[10 * d + 1] == doctest::Approx(v).epsilon(1e-14));
  }

  TEST_CASE("Volterra sampler variance at moderate H") {
    const TimeGrid g = make_grid(1.0, 256);
    const FbmEnsemble e = sample_volterra(g, 0.3, 1, 4000, SeedSpec{1}, "test.volterra");
    CHECK(e.has_increments());
    MeanAccumulator a;
    for (int p = 0; p < e.n_paths; ++p) a.push(std::pow(e.value(p, g.N), 2));
    CHECK(std::abs(a.mean - 1.0) <= 0.02 + 4 * a.se());
  }

  TEST_CASE("memory budget is enforced") {
    CHECK_THROWS_AS(sample_exact(make_grid(1.0, 100), 0.2, 1, 1000, SeedSpec{}, "big", 1.0e4), ValidationError);
  }

  TEST_CASE("local non-determinism ratio closed forms") {
    for (double H : {0.1, 0.3})
      for (int d : {1, 3}) {
        const std::vector<double> xi(d, 0.7);
        const LndRatio r = lnd_ratio({0.0, 0.4}, xi, d, H);
        CHECK(r.expectation_reading == doctest::Approx(1.0 / d).epsilon(1e-13));
        CHECK(r.literal_reading == doctest::Approx(std::pow(0.4, -2 * H) / (2.0 * d)).epsilon(1e-13));
      }
    // Two equal unit-weight increments from 0: Var B_{2h} / (2 h^{2H}).
    const double H = 0.2, h = 0.3;
    const LndRatio r = lnd_ratio({0.0, h, 2 * h}, {1.0, 1.0}, 1, H);
    CHECK(r.expectation_reading == doctest::Approx(std::pow(2.0, 2 * H - 1)).epsilon(1e-13));
    CHECK_THROWS_AS(lnd_ratio({0.0, 0.5, 0.5}, {1.0, 1.0}, 1, H), ValidationError);
    CHECK_THROWS_AS(lnd_ratio({0.0, 0.5}, {0.0}, 1, H), ValidationError);
    CHECK_THROWS_AS(lnd_ratio({0.0, 0.5}, {1.0, 2.0}, 1, H), ValidationError);
  }

  TEST_CASE("increment variance slope is 2H") {
    for (double H : {0.05, 0.25, 0.45})
      CHECK(increment_variance_slope(0.5, {1e-4, 1e-3, 1e-2, 1e-1}, H) == doctest::Approx(2 * H).epsilon(1e-12));
  }

  TEST_CASE("binary ensemble round trip") {
    const TimeGrid g = make_grid(2.0, 10);
    const FbmEnsemble e = sample_exact(g, 0.2, 2, 3, SeedSpec{9}, "test.bin");
    const auto path = (std::filesystem::temp_directory_path() / "fbmlab_test_ensemble.bin").string();
    write_ensemble_binary(path, e, 9);
    std::uint64_t seed = 0;
    const FbmEnsemble back = read_ensemble_binary(path, 2.0, &seed);
    CHECK(seed == 9);
    CHECK(back.grid == g);
    CHECK(back.d == 2);
    CHECK(back.n_paths == 3);
    CHECK(back.H == 0.2);
    CHECK(back.paths == e.paths);
    // Truncated payload.
    const auto bytes = read_text_file(path);
    write_text_file(path, bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_ensemble_binary(path, 2.0), ValidationError);
    std::filesystem::remove(path);
  }
}
