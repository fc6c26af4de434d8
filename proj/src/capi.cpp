#include "fbmlab/fbmlab.h"

#include <cstring>
#include <new>
#include <string>

#include "fbmlab/experiments.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/kernel.hpp"

struct fbmlab_request {
  fbm::RunRequest req;
};

struct fbmlab_report {
  fbm::ExperimentReport rep;
};

namespace {

thread_local std::string g_last_error;

fbmlab_status fail(fbmlab_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs fn, translating the library's exception taxonomy into status codes.
template <class F>
fbmlab_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const fbm::ConfigError& e) {
    return fail(FBMLAB_CONFIG_ERROR, e.what());
  } catch (const fbm::ValidationError& e) {
    return fail(FBMLAB_VALIDATION_ERROR, e.what());
  } catch (const fbm::NumericError& e) {
    return fail(FBMLAB_NUMERIC_ERROR, e.what());
  } catch (const fbm::json::exception& e) {
    return fail(FBMLAB_CONFIG_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FBMLAB_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(FBMLAB_INTERNAL_ERROR, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const fbm::ExperimentSpec* spec_at(int index) {
  const auto& reg = fbm::experiment_registry();
  if (index < 0 || index >= static_cast<int>(reg.size())) return nullptr;
  return &reg[index];
}

}  // namespace

extern "C" {

const char* fbmlab_version(void) { return "1.0.0"; }

const char* fbmlab_last_error(void) { return g_last_error.c_str(); }

int fbmlab_experiment_count(void) { return static_cast<int>(fbm::experiment_registry().size()); }

const char* fbmlab_experiment_name(int index) {
  const auto* s = spec_at(index);
  return s ? s->name.c_str() : nullptr;
}

const char* fbmlab_experiment_summary(int index) {
  const auto* s = spec_at(index);
  return s ? s->summary.c_str() : nullptr;
}

fbmlab_status fbmlab_default_config(const char* experiment, char** json_out) {
  if (!experiment || !json_out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto* s = fbm::find_experiment(experiment);
    if (!s) return fail(FBMLAB_CONFIG_ERROR, std::string("unknown experiment '") + experiment + "'");
    *json_out = dup_string(s->defaults.dump(2));
    return FBMLAB_OK;
  });
}

void fbmlab_free_string(char* s) { delete[] s; }

fbmlab_status fbmlab_request_create(const char* experiment, fbmlab_request** out) {
  if (!experiment || !out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    if (!fbm::find_experiment(experiment))
      return fail(FBMLAB_CONFIG_ERROR, std::string("unknown experiment '") + experiment + "'");
    auto* r = new fbmlab_request;
    r->req.name = experiment;
    *out = r;
    return FBMLAB_OK;
  });
}

void fbmlab_request_destroy(fbmlab_request* req) { delete req; }

fbmlab_status fbmlab_request_set_config_json(fbmlab_request* req, const char* json) {
  if (!req || !json) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    fbm::json doc;
    try {
      doc = fbm::json::parse(json);
    } catch (const fbm::json::parse_error& e) {
      return fail(FBMLAB_CONFIG_ERROR, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) return fail(FBMLAB_CONFIG_ERROR, "config document must be a JSON object");
    req->req.config = std::move(doc);
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_request_set_config_file(fbmlab_request* req, const char* path) {
  if (!req || !path) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    fbm::json doc = fbm::load_config_file(path);
    if (!doc.is_object()) return fail(FBMLAB_CONFIG_ERROR, "config document must be a JSON object");
    req->req.config = std::move(doc);
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_request_add_override(fbmlab_request* req, const char* key_value) {
  if (!req || !key_value) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    req->req.overrides.emplace_back(key_value);
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_request_set_seed(fbmlab_request* req, uint64_t seed) {
  if (!req) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  req->req.seed = seed;
  return FBMLAB_OK;
}

fbmlab_status fbmlab_request_set_workers(fbmlab_request* req, int workers) {
  if (!req) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  if (workers < 0) return fail(FBMLAB_INVALID_ARGUMENT, "workers must be non-negative");
  req->req.workers = workers;
  return FBMLAB_OK;
}

fbmlab_status fbmlab_request_set_output_dir(fbmlab_request* req, const char* dir) {
  if (!req) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  req->req.out_dir = dir ? dir : "";
  return FBMLAB_OK;
}

fbmlab_status fbmlab_request_resolved_config(const fbmlab_request* req, char** json_out) {
  if (!req || !json_out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *json_out = dup_string(fbm::resolve_config(req->req).dump(2));
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_run(const fbmlab_request* req, fbmlab_report** report) {
  if (!req || !report) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  *report = nullptr;
  return guarded([&] {
    auto* r = new fbmlab_report{fbm::run_experiment(req->req)};
    *report = r;
    return r->rep.all_passed() ? FBMLAB_OK : FBMLAB_CHECKS_FAILED;
  });
}

void fbmlab_report_destroy(fbmlab_report* rep) { delete rep; }

int fbmlab_report_passed(const fbmlab_report* rep) { return rep && rep->rep.all_passed() ? 1 : 0; }

double fbmlab_report_duration(const fbmlab_report* rep) { return rep ? rep->rep.duration_s : 0.0; }

fbmlab_status fbmlab_report_json(const fbmlab_report* rep, char** json_out) {
  if (!rep || !json_out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *json_out = dup_string(fbm::report_to_json(rep->rep, false).dump(2));
    return FBMLAB_OK;
  });
}

int fbmlab_report_stat_count(const fbmlab_report* rep) { return rep ? static_cast<int>(rep->rep.stats.size()) : 0; }

fbmlab_status fbmlab_report_stat(const fbmlab_report* rep, int index, const char** name, double* value,
                                 double* tolerance, int* pass) {
  if (!rep) return fail(FBMLAB_INVALID_ARGUMENT, "null report");
  if (index < 0 || index >= static_cast<int>(rep->rep.stats.size()))
    return fail(FBMLAB_INVALID_ARGUMENT, "statistic index out of range");
  const auto& s = rep->rep.stats[index];
  if (name) *name = s.name.c_str();
  if (value) *value = s.value;
  if (tolerance) *tolerance = s.tolerance;
  if (pass) *pass = s.pass ? 1 : 0;
  return FBMLAB_OK;
}

fbmlab_status fbmlab_covariance(double H, double t, double s, double* out) {
  if (!out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (!(H > 0.0 && H < 1.0)) return fail(FBMLAB_VALIDATION_ERROR, "H must lie in (0, 1)");
    if (!(t >= 0.0 && s >= 0.0)) return fail(FBMLAB_VALIDATION_ERROR, "times must be non-negative");
    *out = fbm::covariance_rh(t, s, H);
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_kernel(double H, double t, double s, double* out) {
  if (!out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (!(H > 0.0 && H < 0.5)) return fail(FBMLAB_VALIDATION_ERROR, "H must lie in (0, 1/2)");
    *out = fbm::kernel_kh(t, s, fbm::HurstParam(H));
    return FBMLAB_OK;
  });
}

fbmlab_status fbmlab_sample_fbm(double H, double T, int N, int d, int n_paths, uint64_t seed, double* out) {
  if (!out) return fail(FBMLAB_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (!(H > 0.0 && H < 0.5)) return fail(FBMLAB_VALIDATION_ERROR, "H must lie in (0, 1/2)");
    if (!(T > 0.0) || N < 1 || d < 1 || n_paths < 1)
      return fail(FBMLAB_VALIDATION_ERROR, "need T > 0, N >= 1, d >= 1, n_paths >= 1");
    const fbm::ExactSampler s(fbm::make_grid(T, N), H);
    s.sample(fbm::SeedSpec{seed}, "capi.sample", 0, n_paths, d, out);
    return FBMLAB_OK;
  });
}

}  // extern "C"
