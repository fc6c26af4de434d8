// Helpers shared by the experiment runners: typed config access, parameter
// validation and CSV tables. Internal to the library.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fbmlab/core.hpp"
#include "fbmlab/experiments.hpp"

namespace fbm::exp {

// Typed lookups. Missing keys or wrong element types raise ConfigError.
const json& node(const json& cfg, const std::string& key);
double num(const json& cfg, const std::string& key);
int integer(const json& cfg, const std::string& key);
std::uint64_t u64(const json& cfg, const std::string& key);
bool flag(const json& cfg, const std::string& key);
std::string str(const json& cfg, const std::string& key);
std::vector<double> nums(const json& cfg, const std::string& key);
std::vector<int> integers(const json& cfg, const std::string& key);
std::vector<std::string> strs(const json& cfg, const std::string& key);

SeedSpec seed_of(const json& cfg);

// ValidationError unless the predicate holds; `what` names the parameter.
void require(bool ok, const std::string& what);
void require_hurst(double H, const std::string& what = "H");
void require_positive(double v, const std::string& what);
void require_count(int n, int lo, int hi, const std::string& what);

// Shortest round-trip decimal form, so data files are reproducible and
// lossless.
std::string fmt(double v);
std::string fmt_key(double v);  // compact form for statistic names

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row();
  CsvTable& operator<<(double v);
  CsvTable& operator<<(int v);
  CsvTable& operator<<(const std::string& v);
  std::string str() const;
  // Writes <dir>/<experiment>.<name>.csv unless dir is empty.
  void write(const ExperimentContext& ctx, const std::string& experiment, const std::string& name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string data_path(const ExperimentContext& ctx, const std::string& file);

// Registration hooks, one per source file.
void register_basic(std::vector<ExperimentSpec>& out);
void register_stochastic(std::vector<ExperimentSpec>& out);
void register_flow(std::vector<ExperimentSpec>& out);

}  // namespace fbm::exp
