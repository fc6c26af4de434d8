#include "fbmlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace fbm {

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> t(N + 1);
  for (int i = 0; i <= N; ++i) t[i] = node(i);
  return t;
}

TimeGrid make_grid(double T, int N) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("make_grid: horizon T must be positive");
  if (N < 1) throw ValidationError("make_grid: step count N must be at least 1");
  return TimeGrid{T, N};
}

GridFunction::GridFunction(const TimeGrid& g, int d) : grid(g), dim(d), values(static_cast<size_t>(g.N + 1) * d, 0.0) {
  if (d < 1) throw ValidationError("GridFunction: dimension must be >= 1");
}

GridFunction::GridFunction(const TimeGrid& g, std::vector<double> v, int d) : grid(g), dim(d), values(std::move(v)) {
  validate(*this);
}

GridFunction GridFunction::sample(const TimeGrid& g, const std::function<double(double)>& f) {
  GridFunction out(g, 1);
  for (int i = 0; i <= g.N; ++i) out(i) = f(g.node(i));
  return out;
}

std::vector<double> GridFunction::component(int c) const {
  std::vector<double> out(size());
  for (int i = 0; i < size(); ++i) out[i] = (*this)(i, c);
  return out;
}

void validate(const GridFunction& f) {
  if (f.dim < 1) throw ValidationError("GridFunction: dimension must be >= 1");
  if (f.values.size() != static_cast<size_t>(f.grid.N + 1) * f.dim)
    throw ValidationError("GridFunction: values length does not match N+1 nodes");
  for (double v : f.values)
    if (!std::isfinite(v)) throw ValidationError("GridFunction: non-finite entry");
}

// ---------------------------------------------------------------- random streams

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t master, std::string_view experiment, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label text
  for (unsigned char ch : experiment) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t k = splitmix64(master ^ splitmix64(h));
  return splitmix64(k ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

RandomStream::RandomStream(const SeedSpec& seed, std::string_view experiment, std::uint64_t index)
    : RandomStream(stream_key(seed.master, experiment, index)) {}

RandomStream::RandomStream(std::uint64_t key) : engine_(key) {}

int RandomStream::uniform_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(engine_);
}

RandomStream rng_stream(const SeedSpec& seed, std::string_view experiment, std::uint64_t index) {
  return RandomStream(seed, experiment, index);
}

// ---------------------------------------------------------------- reports

const char* check_name(Check c) {
  switch (c) {
    case Check::AbsLe: return "abs_le";
    case Check::Le: return "le";
    case Check::Ge: return "ge";
    case Check::Diagnostic: return "diagnostic";
  }
  return "diagnostic";
}

Check check_from_name(const std::string& s) {
  if (s == "abs_le") return Check::AbsLe;
  if (s == "le") return Check::Le;
  if (s == "ge") return Check::Ge;
  if (s == "diagnostic") return Check::Diagnostic;
  throw ConfigError("unknown check kind '" + s + "'");
}

bool evaluate_check(Check c, double value, double tolerance) {
  switch (c) {
    case Check::AbsLe: return std::abs(value) <= tolerance;
    case Check::Le: return value <= tolerance;
    case Check::Ge: return value >= tolerance;
    case Check::Diagnostic: return true;
  }
  return false;
}

Statistic& ExperimentReport::add(std::string name, double value, double tolerance, Check check,
                                 std::optional<double> se) {
  Statistic s;
  s.name = std::move(name);
  s.value = value;
  s.se = se;
  s.tolerance = tolerance;
  s.check = check;
  s.pass = evaluate_check(check, value, tolerance);
  stats.push_back(std::move(s));
  return stats.back();
}

Statistic& ExperimentReport::diagnostic(std::string name, double value, std::optional<double> se) {
  return add(std::move(name), value, 0.0, Check::Diagnostic, se);
}

bool ExperimentReport::all_passed() const {
  return std::all_of(stats.begin(), stats.end(), [](const Statistic& s) { return s.pass; });
}

const Statistic* ExperimentReport::find(const std::string& name) const {
  for (const auto& s : stats)
    if (s.name == name) return &s;
  return nullptr;
}

namespace {

// JSON has no representation for non-finite doubles; they travel as strings.
json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  throw ConfigError("expected a number in report");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json report_to_json(const ExperimentReport& r, bool include_timing) {
  json j;
  j["experiment"] = r.experiment;
  j["inputs"] = r.inputs;
  json stats = json::array();
  for (const auto& s : r.stats) {
    json e;
    e["name"] = s.name;
    e["value"] = number_to_json(s.value);
    e["se"] = s.se ? number_to_json(*s.se) : json(nullptr);
    e["tolerance"] = number_to_json(s.tolerance);
    e["check"] = check_name(s.check);
    e["pass"] = s.pass;
    stats.push_back(std::move(e));
  }
  j["statistics"] = std::move(stats);
  j["all_pass"] = r.all_passed();
  if (include_timing) j["duration_s"] = r.duration_s;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.inputs = j.at("inputs");
  for (const auto& e : j.at("statistics")) {
    Statistic s;
    s.name = e.at("name").get<std::string>();
    s.value = number_from_json(e.at("value"));
    if (!e.at("se").is_null()) s.se = number_from_json(e.at("se"));
    s.tolerance = number_from_json(e.at("tolerance"));
    s.check = check_from_name(e.at("check").get<std::string>());
    s.pass = e.at("pass").get<bool>();
    r.stats.push_back(std::move(s));
  }
  if (j.contains("duration_s")) r.duration_s = j.at("duration_s").get<double>();
  return r;
}

std::string report_to_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "name,value,se,tolerance,check,pass\n";
  for (const auto& s : r.stats) {
    os << s.name << ',' << format_double(s.value) << ',' << (s.se ? format_double(*s.se) : std::string())
       << ',' << format_double(s.tolerance) << ',' << check_name(s.check) << ',' << (s.pass ? "true" : "false")
       << '\n';
  }
  return os.str();
}

static bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool operator==(const Statistic& a, const Statistic& b) {
  const bool se_eq = (a.se.has_value() == b.se.has_value()) && (!a.se || same_double(*a.se, *b.se));
  return a.name == b.name && same_double(a.value, b.value) && se_eq && same_double(a.tolerance, b.tolerance) &&
         a.check == b.check && a.pass == b.pass;
}

bool operator==(const ExperimentReport& a, const ExperimentReport& b) {
  return a.experiment == b.experiment && a.inputs == b.inputs && a.stats == b.stats &&
         same_double(a.duration_s, b.duration_s);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_report(const ExperimentReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string base = (std::filesystem::path(dir) / r.experiment).string();
  write_text_file(base + ".json", report_to_json(r, false).dump(2) + "\n");
  write_text_file(base + ".csv", report_to_csv(r));
  json t;
  t["experiment"] = r.experiment;
  t["duration_s"] = r.duration_s;
  write_text_file(base + ".timing.json", t.dump(2) + "\n");
}

// ---------------------------------------------------------------- configuration

namespace {

bool compatible(const json& def, const json& val) {
  if (def.is_number()) return val.is_number();
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return def.type() == val.type();
}

void merge_into(json& out, const json& user, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!out.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = out[it.key()];
    if (!compatible(slot, it.value())) throw ConfigError("type mismatch for config key '" + key + "'");
    if (slot.is_object())
      merge_into(slot, it.value(), key);
    else
      slot = it.value();
  }
}

}  // namespace

json merge_config(const json& defaults, const json& user) {
  if (!user.is_object()) throw ConfigError("config document must be an object");
  json out = defaults;
  merge_into(out, user, "");
  return out;
}

void apply_override(json& cfg, const json& defaults, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + key_value + "'");
  const std::string key = key_value.substr(0, eq);
  const std::string raw = key_value.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare words are strings
  }
  json* slot = &cfg;
  const json* def = &defaults;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (size_t i = 0; i < parts.size(); ++i) {
    if (!def->is_object() || !def->contains(parts[i])) throw ConfigError("unknown config key '" + key + "'");
    def = &(*def)[parts[i]];
    slot = &(*slot)[parts[i]];
  }
  if (!compatible(*def, value)) throw ConfigError("type mismatch for override '" + key + "'");
  *slot = value;
}

// ---------------------------------------------------------------- parallelism

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn) {
  if (n_tasks <= 0) return;
  workers = std::max(1, std::min(workers, n_tasks));
  if (workers == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n_tasks; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void MeanAccumulator::push(double x) {
  n += 1;
  const double delta = x - mean;
  mean += delta / n;
  m2 += delta * (x - mean);
}

void MeanAccumulator::merge(const MeanAccumulator& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double tot = n + o.n;
  const double delta = o.mean - mean;
  mean += delta * o.n / tot;
  m2 += o.m2 + delta * delta * n * o.n / tot;
  n = tot;
}

double MeanAccumulator::se() const { return n > 1 ? std::sqrt(variance() / n) : 0.0; }

}  // namespace fbm
