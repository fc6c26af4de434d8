// Named experiments behind the command line and the C API. Each one owns a
// default configuration document, which is also its schema.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"

namespace fbm {

struct ExperimentContext {
  std::string out_dir;  // empty: no files written
  int workers = 1;
};

struct ExperimentSpec {
  std::string name;
  std::string summary;
  json defaults;
  std::function<ExperimentReport(const json& cfg, const ExperimentContext& ctx)> run;
};

const std::vector<ExperimentSpec>& experiment_registry();
// nullptr when the name is unknown.
const ExperimentSpec* find_experiment(const std::string& name);

struct RunRequest {
  std::string name;
  json config = json::object();         // user document, merged over the defaults
  std::vector<std::string> overrides;   // "a.b=value", applied after the document
  std::optional<std::uint64_t> seed;    // replaces the "seed" key when set
  int workers = 0;                      // 0: default_workers()
  std::string out_dir;                  // empty: report returned, nothing written
};

// Resolves the configuration exactly as run_experiment would.
json resolve_config(const RunRequest& req);

// Runs, fills inputs and duration, and writes <out>/<name>.json, .csv and
// .timing.json plus the experiment's data files. Throws ConfigError,
// ValidationError or NumericError.
ExperimentReport run_experiment(const RunRequest& req);

// Exit status for the command line: 0 all checks pass, 1 a check failed.
int report_status(const ExperimentReport& r);

// Parses a config file; JSON syntax errors become ConfigError.
json load_config_file(const std::string& path);

}  // namespace fbm
