/* C interface to fbmlab: experiment registry, configured runs, reports and a
 * few numerical primitives. All handles are opaque; every call that can fail
 * returns a status code and records a message readable through
 * fbmlab_last_error() on the calling thread. */
#ifndef FBMLAB_H
#define FBMLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(FBMLAB_BUILDING)
#define FBMLAB_API __attribute__((visibility("default")))
#else
#define FBMLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  FBMLAB_OK = 0,
  FBMLAB_CHECKS_FAILED = 1, /* run completed, a statistic failed its check */
  FBMLAB_CONFIG_ERROR = 2,  /* unknown key, type mismatch, unreadable file */
  FBMLAB_VALIDATION_ERROR = 3,
  FBMLAB_NUMERIC_ERROR = 4,
  FBMLAB_INVALID_ARGUMENT = 5, /* null handle, index out of range */
  FBMLAB_INTERNAL_ERROR = 6
} fbmlab_status;

typedef struct fbmlab_request fbmlab_request;
typedef struct fbmlab_report fbmlab_report;

FBMLAB_API const char* fbmlab_version(void);
/* Message of the last failing call on this thread; empty when none. */
FBMLAB_API const char* fbmlab_last_error(void);

/* Registry. Names and summaries live as long as the library. */
FBMLAB_API int fbmlab_experiment_count(void);
FBMLAB_API const char* fbmlab_experiment_name(int index);
FBMLAB_API const char* fbmlab_experiment_summary(int index);
/* Default configuration as JSON; release with fbmlab_free_string. */
FBMLAB_API fbmlab_status fbmlab_default_config(const char* experiment, char** json_out);
FBMLAB_API void fbmlab_free_string(char* s);

/* Requests. */
FBMLAB_API fbmlab_status fbmlab_request_create(const char* experiment, fbmlab_request** out);
FBMLAB_API void fbmlab_request_destroy(fbmlab_request* req);
FBMLAB_API fbmlab_status fbmlab_request_set_config_json(fbmlab_request* req, const char* json);
FBMLAB_API fbmlab_status fbmlab_request_set_config_file(fbmlab_request* req, const char* path);
/* "a.b=value"; applied in order after the config document. */
FBMLAB_API fbmlab_status fbmlab_request_add_override(fbmlab_request* req, const char* key_value);
FBMLAB_API fbmlab_status fbmlab_request_set_seed(fbmlab_request* req, uint64_t seed);
/* 0 selects the hardware concurrency. */
FBMLAB_API fbmlab_status fbmlab_request_set_workers(fbmlab_request* req, int workers);
/* Empty or NULL: nothing is written. */
FBMLAB_API fbmlab_status fbmlab_request_set_output_dir(fbmlab_request* req, const char* dir);
/* Resolved configuration (defaults, document, overrides, seed) as JSON. */
FBMLAB_API fbmlab_status fbmlab_request_resolved_config(const fbmlab_request* req, char** json_out);

/* Runs the request. On FBMLAB_OK or FBMLAB_CHECKS_FAILED *report is set and
 * must be released with fbmlab_report_destroy; otherwise it is NULL. */
FBMLAB_API fbmlab_status fbmlab_run(const fbmlab_request* req, fbmlab_report** report);

FBMLAB_API void fbmlab_report_destroy(fbmlab_report* rep);
FBMLAB_API int fbmlab_report_passed(const fbmlab_report* rep);
FBMLAB_API double fbmlab_report_duration(const fbmlab_report* rep);
/* Report document (without timing); release with fbmlab_free_string. */
FBMLAB_API fbmlab_status fbmlab_report_json(const fbmlab_report* rep, char** json_out);
FBMLAB_API int fbmlab_report_stat_count(const fbmlab_report* rep);
/* Name pointer valid while the report lives. pass is 1 for diagnostics. */
FBMLAB_API fbmlab_status fbmlab_report_stat(const fbmlab_report* rep, int index, const char** name, double* value,
                                            double* tolerance, int* pass);

/* Numerical primitives. */
/* R_H(t, s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2. */
FBMLAB_API fbmlab_status fbmlab_covariance(double H, double t, double s, double* out);
/* Volterra kernel K_H(t, s) for 0 < s < t. */
FBMLAB_API fbmlab_status fbmlab_kernel(double H, double t, double s, double* out);
/* n_paths exact fBm paths on N steps of [0, T], d components: out holds
 * n_paths*(N+1)*d doubles, path-major then node then component. */
FBMLAB_API fbmlab_status fbmlab_sample_fbm(double H, double T, int N, int d, int n_paths, uint64_t seed,
                                           double* out);

#ifdef __cplusplus
}
#endif

#endif
