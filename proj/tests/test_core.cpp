#include <cmath>
#include <set>

#include "doctest.h"
#include "fbmlab/core.hpp"

using namespace fbm;

TEST_SUITE("core") {
  TEST_CASE("uniform grids") {
    const TimeGrid g = make_grid(1.0, 4);
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    CHECK(g.nodes() == expected);
    CHECK(make_grid(2.0, 1).nodes() == std::vector<double>{0.0, 2.0});
    CHECK_THROWS_AS(make_grid(0.0, 4), ValidationError);
    CHECK_THROWS_AS(make_grid(1.0, 0), ValidationError);
    CHECK_THROWS_AS(make_grid(-1.0, 4), ValidationError);
    // Last node is T exactly even when T/N is not representable.
    const TimeGrid h = make_grid(0.3, 7);
    CHECK(h.node(7) == 0.3);
    const auto n = h.nodes();
    for (size_t i = 1; i < n.size(); ++i) CHECK(n[i] > n[i - 1]);
  }

  TEST_CASE("grid function validation") {
    const TimeGrid g = make_grid(1.0, 3);
    GridFunction f(g, 2);
    CHECK_NOTHROW(validate(f));
    f(2, 1) = NAN;
    CHECK_THROWS_AS(validate(f), ValidationError);
    CHECK_THROWS(GridFunction(g, std::vector<double>(3, 0.0)));
    const GridFunction s = GridFunction::sample(g, [](double t) { return 2 * t; });
    CHECK(s(3) == doctest::Approx(2.0));
  }

  TEST_CASE("random streams are reproducible and label separated") {
    const SeedSpec seed{42};
    RandomStream a = rng_stream(seed, "exp", 3), b = rng_stream(seed, "exp", 3);
    for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());
    CHECK(std::isfinite(rng_stream(seed, "exp", 0).normal()));
    CHECK(stream_key(42, "exp", 3) != stream_key(42, "exp", 4));
    CHECK(stream_key(42, "exp", 3) != stream_key(42, "exq", 3));
    CHECK(stream_key(42, "exp", 3) != stream_key(43, "exp", 3));

    // Correlation of two labelled streams within 4/sqrt(n).
    const int n = 100000;
    RandomStream x = rng_stream(seed, "left", 0), y = rng_stream(seed, "right", 0);
    double sxy = 0, sxx = 0, syy = 0, sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
      const double u = x.normal(), v = y.normal();
      sx += u;
      sy += v;
      sxy += u * v;
      sxx += u * u;
      syy += v * v;
    }
    const double cov = sxy / n - sx / n * sy / n;
    const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
  }

  TEST_CASE("uniform_int covers its inclusive range") {
    RandomStream r = rng_stream(SeedSpec{1}, "ints", 0);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
      const int v = r.uniform_int(-2, 3);
      CHECK(v >= -2);
      CHECK(v <= 3);
      seen.insert(v);
    }
    CHECK(seen.size() == 6);
  }

  TEST_CASE("checks and pass flags") {
    CHECK(evaluate_check(Check::AbsLe, -0.5, 0.5));
    CHECK_FALSE(evaluate_check(Check::AbsLe, -0.6, 0.5));
    CHECK(evaluate_check(Check::Le, -3.0, 0.0));
    CHECK_FALSE(evaluate_check(Check::Le, NAN, 1.0));
    CHECK(evaluate_check(Check::Ge, 2.0, 1.0));
    CHECK(evaluate_check(Check::Diagnostic, NAN, 0.0));
    for (Check c : {Check::AbsLe, Check::Le, Check::Ge, Check::Diagnostic}) CHECK(check_from_name(check_name(c)) == c);
    CHECK_THROWS(check_from_name("bogus"));
  }

  TEST_CASE("report serialization round trips") {
    ExperimentReport r;
    r.experiment = "demo";
    r.inputs = json{{"seed", 3}, {"H", 0.1}, {"nested", {{"list", {1, 2}}}}};
    r.add("a", 0.1 + 0.2, 0.3, Check::Le, 1e-3);
    r.add("b", -1.0 / 3.0, 0.0, Check::Ge);
    r.diagnostic("c", NAN);
    r.diagnostic("d", INFINITY, 2.5);
    r.add("e", 5e-324, 0.0, Check::AbsLe);
    r.duration_s = 1.25;
    const ExperimentReport back = report_from_json(report_to_json(r, true));
    CHECK(back == r);
    CHECK(back.duration_s == r.duration_s);
    // Without timing the duration is dropped.
    ExperimentReport untimed = r;
    untimed.duration_s = 0.0;
    CHECK(report_from_json(json::parse(report_to_json(r, false).dump())) == untimed);
    // Pass flags are recomputable from value and tolerance.
    for (const auto& s : back.stats) CHECK(s.pass == evaluate_check(s.check, s.value, s.tolerance));
    CHECK_FALSE(r.all_passed());
    CHECK(r.find("b") != nullptr);
    CHECK(r.find("zz") == nullptr);
    const std::string csv = report_to_csv(r);
    CHECK(csv.rfind("name,", 0) == 0);
  }

  TEST_CASE("config merging rejects unknown keys and type mismatches") {
    const json defaults{{"seed", 0}, {"H", 0.2}, {"N", 8}, {"list", {1, 2}}, {"sub", {{"x", "a"}}}};
    const json ok = merge_config(defaults, json{{"H", 0.3}, {"sub", {{"x", "b"}}}});
    CHECK(ok["H"].get<double>() == 0.3);
    CHECK(ok["N"].get<int>() == 8);
    CHECK(ok["sub"]["x"] == "b");
    CHECK_THROWS_AS(merge_config(defaults, json{{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(merge_config(defaults, json{{"sub", {{"y", 1}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(defaults, json{{"H", "high"}}), ConfigError);
    CHECK_THROWS_AS(merge_config(defaults, json{{"list", 3}}), ConfigError);
    // Integers are accepted where the default is a float.
    CHECK_NOTHROW(merge_config(defaults, json{{"H", 1}}));

    json cfg = defaults;
    apply_override(cfg, defaults, "sub.x=zz");
    CHECK(cfg["sub"]["x"] == "zz");
    apply_override(cfg, defaults, "seed=7");
    CHECK(cfg["seed"].get<int>() == 7);
    apply_override(cfg, defaults, "list=[3,4,5]");
    CHECK(cfg["list"].size() == 3);
    CHECK_THROWS_AS(apply_override(cfg, defaults, "nokey=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, defaults, "N=abc"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, defaults, "novalue"), ConfigError);
  }

  TEST_CASE("parallel_for visits every task once") {
    for (int workers : {1, 3, 8}) {
      std::vector<int> hits(97, 0);
      parallel_for(97, workers, [&](int i) { hits[i] += 1; });
      for (int h : hits) CHECK(h == 1);
    }
    parallel_for(0, 4, [](int) { FAIL("no task expected"); });
  }

  TEST_CASE("mean accumulator matches the two-pass formulas") {
    const std::vector<double> xs{1.5, -2.0, 3.25, 0.0, 7.0, 2.5};
    MeanAccumulator a, b, c;
    for (double x : xs) a.push(x);
    for (size_t i = 0; i < 3; ++i) b.push(xs[i]);
    for (size_t i = 3; i < xs.size(); ++i) c.push(xs[i]);
    b.merge(c);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    CHECK(a.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(a.variance() == doctest::Approx(var).epsilon(1e-14));
    CHECK(a.se() == doctest::Approx(std::sqrt(var / xs.size())).epsilon(1e-14));
    CHECK(b.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(b.variance() == doctest::Approx(var).epsilon(1e-14));
  }
}
