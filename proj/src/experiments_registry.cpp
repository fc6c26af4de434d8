#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "experiment_support.hpp"

namespace fbm {
namespace exp {

const json& node(const json& cfg, const std::string& key) {
  if (!cfg.is_object() || !cfg.contains(key)) throw ConfigError("missing config key '" + key + "'");
  return cfg.at(key);
}

namespace {

template <class T>
T typed(const json& cfg, const std::string& key) {
  try {
    return node(cfg, key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("type mismatch for config key '" + key + "'");
  }
}

}  // namespace

double num(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

int integer(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t u64(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool flag(const json& cfg, const std::string& key) { return typed<bool>(cfg, key); }
std::string str(const json& cfg, const std::string& key) { return typed<std::string>(cfg, key); }

std::vector<double> nums(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError("config key '" + key + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> integers(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError("config key '" + key + "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<std::string> strs(const json& cfg, const std::string& key) {
  const json& v = node(cfg, key);
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError("config key '" + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

SeedSpec seed_of(const json& cfg) { return SeedSpec{u64(cfg, "seed")}; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("invalid parameter: " + what);
}

void require_hurst(double H, const std::string& what) {
  require(H > 0.0 && H < 0.5, what + " must lie in (0, 1/2)");
}

void require_positive(double v, const std::string& what) { require(v > 0.0 && std::isfinite(v), what + " must be positive"); }

void require_count(int n, int lo, int hi, const std::string& what) {
  require(n >= lo && n <= hi, what + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_key(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::operator<<(double v) {
  rows_.back().push_back(fmt(v));
  return *this;
}

CsvTable& CsvTable::operator<<(int v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::operator<<(const std::string& v) {
  rows_.back().push_back(v);
  return *this;
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

void CsvTable::write(const ExperimentContext& ctx, const std::string& experiment, const std::string& name) const {
  if (ctx.out_dir.empty()) return;
  write_text_file(data_path(ctx, experiment + "." + name + ".csv"), str());
}

std::string data_path(const ExperimentContext& ctx, const std::string& file) {
  return (std::filesystem::path(ctx.out_dir) / file).string();
}

}  // namespace exp

const std::vector<ExperimentSpec>& experiment_registry() {
  static const std::vector<ExperimentSpec> registry = [] {
    std::vector<ExperimentSpec> r;
    exp::register_basic(r);
    exp::register_stochastic(r);
    exp::register_flow(r);
    return r;
  }();
  return registry;
}

const ExperimentSpec* find_experiment(const std::string& name) {
  for (const auto& e : experiment_registry())
    if (e.name == name) return &e;
  return nullptr;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

json resolve_config(const RunRequest& req) {
  const ExperimentSpec* spec = find_experiment(req.name);
  if (!spec) throw ConfigError("unknown experiment '" + req.name + "'");
  json cfg = merge_config(spec->defaults, req.config);
  for (const auto& o : req.overrides) apply_override(cfg, spec->defaults, o);
  if (req.seed) cfg["seed"] = *req.seed;
  return cfg;
}

ExperimentReport run_experiment(const RunRequest& req) {
  const json cfg = resolve_config(req);
  const ExperimentSpec* spec = find_experiment(req.name);
  ExperimentContext ctx;
  ctx.out_dir = req.out_dir;
  ctx.workers = req.workers > 0 ? req.workers : default_workers();
  if (!ctx.out_dir.empty()) std::filesystem::create_directories(ctx.out_dir);

  const auto start = std::chrono::steady_clock::now();
  ExperimentReport r = spec->run(cfg, ctx);
  r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.experiment = spec->name;
  r.inputs = cfg;
  if (!ctx.out_dir.empty()) write_report(r, ctx.out_dir);
  return r;
}

int report_status(const ExperimentReport& r) { return r.all_passed() ? 0 : 1; }

}  // namespace fbm
