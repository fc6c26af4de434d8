// Command-line golden tests: reduced configs under tests/golden are run
// through the installed binary and their reports compared with the frozen
// documents. Set FBMLAB_UPDATE_GOLDEN=1 to rewrite the frozen documents.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "fbmlab/core.hpp"
#include "fbmlab/experiments.hpp"

namespace fs = std::filesystem;
using fbm::json;

namespace {

const fs::path kSource = FBMLAB_SOURCE_DIR;
const std::string kCli = FBMLAB_CLI_PATH;

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "fbmlab_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> data_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.find(".timing.json") == std::string::npos) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> golden_commands() {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(kSource / "tests" / "golden")) {
    const std::string n = e.path().filename().string();
    const std::string suffix = ".config.json";
    if (n.size() > suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(n.substr(0, n.size() - suffix.size()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool close(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)) + 1e-12;
}

double number(const json& v) {
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

void compare_reports(const std::string& cmd, const json& got, const json& want) {
  INFO("command " << cmd);
  CHECK(got["experiment"] == want["experiment"]);
  CHECK(got["inputs"] == want["inputs"]);
  CHECK(got["all_pass"] == want["all_pass"]);
  const json& gs = got["statistics"];
  const json& ws = want["statistics"];
  REQUIRE(gs.size() == ws.size());
  for (size_t i = 0; i < gs.size(); ++i) {
    INFO("statistic " << ws[i]["name"].get<std::string>());
    CHECK(gs[i]["name"] == ws[i]["name"]);
    CHECK(gs[i]["check"] == ws[i]["check"]);
    CHECK(gs[i]["pass"] == ws[i]["pass"]);
    CHECK(close(number(gs[i]["value"]), number(ws[i]["value"])));
    CHECK(close(number(gs[i]["tolerance"]), number(ws[i]["tolerance"])));
    CHECK(gs[i]["se"].is_null() == ws[i]["se"].is_null());
    if (!ws[i]["se"].is_null()) CHECK(close(number(gs[i]["se"]), number(ws[i]["se"])));
  }
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("golden reports") {
    const bool update = std::getenv("FBMLAB_UPDATE_GOLDEN") != nullptr;
    const auto cmds = golden_commands();
    CHECK(cmds.size() == fbm::experiment_registry().size());
    for (const auto& cmd : cmds) {
      const fs::path out = scratch(cmd);
      const fs::path cfg = kSource / "tests" / "golden" / (cmd + ".config.json");
      const int code = run_cli(cmd + " --config \"" + cfg.string() + "\" --out \"" + out.string() +
                               "\" --seed 7 --workers 1");
      REQUIRE_MESSAGE((code == 0 || code == 1), cmd << " exited with " << code);
      const json report = json::parse(fbm::read_text_file((out / (cmd + ".json")).string()));
      CHECK((code == 0) == report["all_pass"].get<bool>());
      CHECK(fbm::read_text_file((out / (cmd + ".csv")).string()).rfind("name,value,se,tolerance,check,pass\n", 0) == 0);
      const json timing = json::parse(fbm::read_text_file((out / (cmd + ".timing.json")).string()));
      CHECK(timing["duration_s"].get<double>() >= 0.0);
      const json doc = {{"exit", code}, {"files", data_files(out)}, {"report", report}};
      const fs::path golden = kSource / "tests" / "golden" / (cmd + ".golden.json");
      if (update) {
        fbm::write_text_file(golden.string(), doc.dump(2) + "\n");
        continue;
      }
      REQUIRE_MESSAGE(fs::exists(golden), "missing " << golden.string());
      const json want = json::parse(fbm::read_text_file(golden.string()));
      CHECK(doc["exit"] == want["exit"]);
      CHECK(doc["files"] == want["files"]);
      compare_reports(cmd, report, want["report"]);
    }
  }

  TEST_CASE("same seed gives identical files for any worker count") {
    for (const std::string cmd : {"fbm-verify", "girsanov-verify", "compactness-stat", "sde-solve", "fbm-sample"}) {
      const fs::path a = scratch(cmd + ".a"), b = scratch(cmd + ".b");
      const fs::path cfg = kSource / "tests" / "golden" / (cmd + ".config.json");
      const std::string base = cmd + " --config \"" + cfg.string() + "\" --seed 7 ";
      const int ca = run_cli(base + "--workers 1 --out \"" + a.string() + "\"");
      const int cb = run_cli(base + "--workers 3 --out \"" + b.string() + "\"");
      CHECK(ca == cb);
      const auto fa = data_files(a), fb = data_files(b);
      CHECK(fa == fb);
      for (const auto& f : fa) {
        INFO(cmd << " " << f);
        CHECK(fbm::read_text_file((a / f).string()) == fbm::read_text_file((b / f).string()));
      }
    }
  }

  TEST_CASE("seed changes the sampled output") {
    const fs::path a = scratch("seed.a"), b = scratch("seed.b");
    const fs::path cfg = kSource / "tests" / "golden" / "sde-solve.config.json";
    run_cli("sde-solve --config \"" + cfg.string() + "\" --seed 7 --out \"" + a.string() + "\"");
    run_cli("sde-solve --config \"" + cfg.string() + "\" --seed 8 --out \"" + b.string() + "\"");
    CHECK(fbm::read_text_file((a / "sde-solve.path.csv").string()) !=
          fbm::read_text_file((b / "sde-solve.path.csv").string()));
  }

  TEST_CASE("invalid input exits with status 2") {
    const fs::path out = scratch("invalid");
    CHECK(run_cli("sde-solve --override H=0.6 --out \"" + out.string() + "\"") == 2);
    CHECK(run_cli("flow-scan --override H=[0.1,0.6] --out \"" + out.string() + "\"") == 2);
    CHECK(run_cli("sde-solve --override no_such_key=1 --out \"" + out.string() + "\"") == 2);
    CHECK(run_cli("sde-solve --override N=\\\"many\\\" --out \"" + out.string() + "\"") == 2);
    const fs::path bad = out / "bad.json";
    fbm::write_text_file(bad.string(), "{\"N\": 64,");
    CHECK(run_cli("sde-solve --config \"" + bad.string() + "\" --out \"" + out.string() + "\"") == 2);
    fbm::write_text_file(bad.string(), "[1, 2, 3]");
    CHECK(run_cli("sde-solve --config \"" + bad.string() + "\" --out \"" + out.string() + "\"") == 2);
    fbm::write_text_file(bad.string(), "{\"params\": {\"a\": \"one\"}}");
    CHECK(run_cli("sde-solve --config \"" + bad.string() + "\" --out \"" + out.string() + "\"") == 2);
    CHECK(run_cli("sde-solve --config /nonexistent.json") == 2);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("sde-solve --workers -1") == 2);
    CHECK(run_cli("") == 2);
  }

  TEST_CASE("shipped configs equal the defaults") {
    for (const auto& spec : fbm::experiment_registry()) {
      INFO(spec.name);
      const fs::path p = kSource / "configs" / (spec.name + ".json");
      REQUIRE(fs::exists(p));
      CHECK(json::parse(fbm::read_text_file(p.string())) == spec.defaults);
      const fs::path out = scratch("defaults");
      const std::string cmd = "\"" + kCli + "\" defaults " + spec.name + " > \"" + (out / "d.json").string() + "\"";
      REQUIRE(std::system(cmd.c_str()) == 0);
      CHECK(json::parse(fbm::read_text_file((out / "d.json").string())) == spec.defaults);
    }
  }

  TEST_CASE("help and version") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("flow-scan --help") == 0);
  }
}
