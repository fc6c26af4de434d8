// Grids, seeded random streams, experiment reports and configuration handling.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fbm {

using json = nlohmann::ordered_json;

// Error taxonomy. The C API and the CLI map these onto distinct status codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeGrid {
  double T = 1.0;
  int N = 1;

  double dt() const { return T / N; }
  // t_N is returned as T exactly so the last node never drifts by rounding.
  double node(int i) const { return i == N ? T : T * i / N; }
  std::vector<double> nodes() const;
  bool operator==(const TimeGrid& o) const { return T == o.T && N == o.N; }
};

TimeGrid make_grid(double T, int N);

// Samples of a (possibly vector valued) function at the N+1 grid nodes,
// stored row-major: values[i * dim + c].
struct GridFunction {
  TimeGrid grid;
  int dim = 1;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(const TimeGrid& g, int d);
  GridFunction(const TimeGrid& g, std::vector<double> v, int d = 1);

  static GridFunction sample(const TimeGrid& g, const std::function<double(double)>& f);

  int size() const { return grid.N + 1; }
  double& operator()(int i, int c = 0) { return values[static_cast<size_t>(i) * dim + c]; }
  double operator()(int i, int c = 0) const { return values[static_cast<size_t>(i) * dim + c]; }
  std::vector<double> component(int c) const;
};

// Throws ValidationError when the length is wrong or an entry is not finite.
void validate(const GridFunction& f);

// Master seed plus label hashing. A label is (experiment id, path index).
struct SeedSpec {
  std::uint64_t master = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_key(std::uint64_t master, std::string_view experiment, std::uint64_t index);

class RandomStream {
 public:
  RandomStream(const SeedSpec& seed, std::string_view experiment, std::uint64_t index);
  explicit RandomStream(std::uint64_t key);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }
  int uniform_int(int lo, int hi);  // inclusive bounds

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

RandomStream rng_stream(const SeedSpec& seed, std::string_view experiment, std::uint64_t index);

// Report records. A statistic carries the comparison used to derive its pass
// flag, so pass flags can be recomputed from value and tolerance alone.
enum class Check { AbsLe, Le, Ge, Diagnostic };

const char* check_name(Check c);
Check check_from_name(const std::string& s);
bool evaluate_check(Check c, double value, double tolerance);

struct Statistic {
  std::string name;
  double value = 0.0;
  std::optional<double> se;
  double tolerance = 0.0;
  Check check = Check::Diagnostic;
  bool pass = true;
};

struct ExperimentReport {
  std::string experiment;
  json inputs = json::object();
  std::vector<Statistic> stats;
  double duration_s = 0.0;

  // Adds a statistic and derives its pass flag.
  Statistic& add(std::string name, double value, double tolerance, Check check,
                 std::optional<double> se = std::nullopt);
  Statistic& diagnostic(std::string name, double value, std::optional<double> se = std::nullopt);
  bool all_passed() const;
  const Statistic* find(const std::string& name) const;
};

json report_to_json(const ExperimentReport& r, bool include_timing);
ExperimentReport report_from_json(const json& j);
std::string report_to_csv(const ExperimentReport& r);
bool operator==(const Statistic& a, const Statistic& b);
bool operator==(const ExperimentReport& a, const ExperimentReport& b);

// Writes <dir>/<experiment>.json and .csv (deterministic content) and
// <dir>/<experiment>.timing.json (wall clock).
void write_report(const ExperimentReport& r, const std::string& dir);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Configuration: the default document doubles as the schema. Unknown keys and
// type mismatches raise ConfigError.
json merge_config(const json& defaults, const json& user);
void apply_override(json& cfg, const json& defaults, const std::string& key_value);

// Runs fn(0..n_tasks-1) on up to `workers` threads. Callers store per-task
// results and reduce them in index order, so output never depends on workers.
void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn);
int default_workers();

// Mean and standard error accumulated in a fixed order.
struct MeanAccumulator {
  double n = 0, mean = 0, m2 = 0;
  void push(double x);
  void merge(const MeanAccumulator& o);
  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double se() const;
};

}  // namespace fbm
