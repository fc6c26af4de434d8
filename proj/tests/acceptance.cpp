// Acceptance runner: one PASS/FAIL line per criterion on stdout, details of
// failing statistics on stderr. Every criterion runs the registered
// experiments at their default configuration; the last one reruns all of
// them and compares the written files byte for byte.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fbmlab/experiments.hpp"

namespace fs = std::filesystem;
using namespace fbm;

namespace {

struct Run {
  std::string experiment;
  std::vector<std::string> overrides;
  std::vector<std::string> prefixes;  // statistics asserted by the criterion; empty: all
};

struct Criterion {
  int id;
  std::string title;
  double limit_s;
  std::vector<Run> runs;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "covariance factorization", 60, {{"kernel-verify", {}, {"factorization."}}}},
      {2, "fractional calculus inversion", 60, {{"fraccalc-table", {}, {"inversion."}}}},
      {3, "sampler equivalence", 300, {{"fbm-verify", {}, {"samplers."}}}},
      {4, "Girsanov normalization and theta bound", 600,
       {{"girsanov-verify", {R"(suites=["normalization","theta_bound"])"}, {"normalization.", "theta_bound."}}}},
      {5, "weak versus strong cross-check", 600, {{"girsanov-verify", {R"(suites=["weak"])"}, {"weak."}}}},
      {6, "shuffle identities", 60, {{"shuffle-verify", {}, {}}}},
      {7, "integration by parts", 900, {{"ibp-check", {}, {"ibp."}}}},
      {8, "appendix bounds", 300, {{"appendix-verify", {}, {}}}},
      {9, "compactness diagnostic", 1200, {{"compactness-stat", {}, {"study.", "zero_drift."}}}},
      {10, "flow derivatives and threshold scan", 1800,
       {{"flow-derivatives", {}, {"fd.", "zero_drift.", "linear."}}, {"flow-scan", {}, {}}}},
  };
  return c;
}

bool selected(const Statistic& s, const std::vector<std::string>& prefixes) {
  if (s.check == Check::Diagnostic) return false;
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes)
    if (s.name.rfind(p, 0) == 0) return true;
  return false;
}

std::string run_dir(const fs::path& root, int id, const Run& r) {
  return (root / ("ac" + std::to_string(id) + "-" + r.experiment)).string();
}

struct Outcome {
  bool pass = true;
  int checked = 0, failed = 0;
  double seconds = 0.0;
  std::string error;
};

Outcome run_criterion(const Criterion& c, const fs::path& root, bool assess) {
  Outcome o;
  for (const auto& r : c.runs) {
    RunRequest q;
    q.name = r.experiment;
    q.overrides = r.overrides;
    q.out_dir = run_dir(root, c.id, r);
    fs::create_directories(q.out_dir);
    try {
      const ExperimentReport rep = run_experiment(q);
      o.seconds += rep.duration_s;
      if (!assess) continue;
      for (const auto& s : rep.stats) {
        if (!selected(s, r.prefixes)) continue;
        ++o.checked;
        if (!s.pass) {
          ++o.failed;
          std::fprintf(stderr, "  AC%d %s: %s = %.6g (tolerance %.6g, %s)\n", c.id, r.experiment.c_str(),
                       s.name.c_str(), s.value, s.tolerance, check_name(s.check));
        }
      }
    } catch (const std::exception& e) {
      o.error = r.experiment + ": " + e.what();
      o.pass = false;
    }
  }
  if (assess) {
    if (o.checked == 0 || o.failed > 0) o.pass = false;
    if (o.seconds > c.limit_s) {
      o.pass = false;
      std::fprintf(stderr, "  AC%d runtime %.1f s exceeds %.0f s\n", c.id, o.seconds, c.limit_s);
    }
  }
  return o;
}

// Files under a, relative, excluding wall-clock timing records.
std::vector<fs::path> report_files(const fs::path& a) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() >= 12 && name.compare(name.size() - 12, 12, ".timing.json") == 0) continue;
    out.push_back(fs::relative(e.path(), a));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  const fs::path first = root / "run1", second = root / "run2";
  fs::remove_all(root);
  bool all = true;
  for (const auto& c : criteria()) {
    const Outcome o = run_criterion(c, first, true);
    all = all && o.pass;
    if (!o.error.empty()) std::fprintf(stderr, "  AC%d error: %s\n", c.id, o.error.c_str());
    std::printf("AC%-2d %s  %s: %d checks, %d failed, %.1f s (limit %.0f s)\n", c.id, o.pass ? "PASS" : "FAIL",
                c.title.c_str(), o.checked, o.failed, o.seconds, c.limit_s);
    std::fflush(stdout);
  }

  // Determinism: rerun everything with the same seeds and compare bytes.
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& c : criteria()) run_criterion(c, second, false);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto fa = report_files(first), fb = report_files(second);
  int differing = 0;
  if (fa != fb) {
    ++differing;
    std::fprintf(stderr, "  AC11 file sets differ (%zu vs %zu files)\n", fa.size(), fb.size());
  } else {
    for (const auto& p : fa)
      if (read_text_file((first / p).string()) != read_text_file((second / p).string())) {
        ++differing;
        std::fprintf(stderr, "  AC11 differs: %s\n", p.string().c_str());
      }
  }
  const bool det = differing == 0 && !fa.empty();
  all = all && det;
  std::printf("AC11 %s  full determinism: %zu report files compared, %d differ, rerun %.1f s\n",
              det ? "PASS" : "FAIL", fa.size(), differing, secs);
  return all ? 0 : 1;
}
