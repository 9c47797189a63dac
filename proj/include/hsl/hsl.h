#ifndef HSL_H
#define HSL_H

#include <stddef.h>
#include <stdint.h>

#if defined(HSL_BUILDING_LIBRARY)
#define HSL_API __attribute__((visibility("default")))
#else
#define HSL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the values mirror hsl::ErrorCode. */
typedef enum hsl_status {
  HSL_OK = 0,
  HSL_INVALID_DIMENSION,
  HSL_SCALING_VIOLATION,
  HSL_MALFORMED_SPEC,
  HSL_OVERLAP_INPUT,
  HSL_NON_UNIT_OMEGA,
  HSL_EVENT_CASCADE_OVERFLOW,
  HSL_INCONSISTENT_STATE,
  HSL_SIZE_GUARD,
  HSL_REJECTION_BUDGET_EXHAUSTED,
  HSL_INVALID_DENSITY,
  HSL_K_TOO_LARGE,
  HSL_MISSING_SAMPLE_TIME,
  HSL_INSUFFICIENT_REPLICAS,
  HSL_AMPLITUDE_GUARD,
  HSL_OVERFLOW,
  HSL_CUTOFF_LEAK,
  HSL_MAJORANT_BREACH,
  HSL_CELL_UNDERFLOW,
  HSL_NEGATIVE_MASS,
  HSL_INTEGRATOR_FAILURE,
  HSL_SUPPORT_VIOLATION,
  HSL_EXP_OVERFLOW,
  HSL_CONFIG_INVALID,
  HSL_RESOURCE_BUDGET_EXCEEDED,
  HSL_CONFIG_HASH_MISMATCH,
  HSL_IO_ERROR,
  HSL_NULL_ARGUMENT = 100,
  HSL_INTERNAL = 101
} hsl_status;

typedef struct hsl_system hsl_system;
typedef struct hsl_report hsl_report;

HSL_API const char* hsl_version(void);
HSL_API const char* hsl_status_name(int status);
/* Message of the last failing call on this thread ("" if none). */
HSL_API const char* hsl_last_error(void);

/* Strings returned through char** are owned by the caller. */
HSL_API void hsl_string_free(char* s);

/* --- particle systems --- */

HSL_API int hsl_system_sample_equilibrium(int d, double eps, double alpha, uint64_t seed, hsl_system** out);
HSL_API int hsl_system_read_snapshot(const char* path, hsl_system** out);
HSL_API int hsl_system_write_snapshot(const hsl_system* s, const char* path);
/* Exact event-driven evolution; collisions may be NULL. */
HSL_API int hsl_system_advance(hsl_system* s, double duration, uint64_t* collisions);
HSL_API int hsl_system_reverse(hsl_system* s);
HSL_API int hsl_system_size(const hsl_system* s, size_t* n);
HSL_API int hsl_system_time(const hsl_system* s, double* t);
HSL_API int hsl_system_invariants(const hsl_system* s, double momentum[3], double* energy, double* min_distance);
HSL_API void hsl_system_free(hsl_system* s);

/* --- experiments --- */

HSL_API int hsl_experiment_kinds(char** json_array);
HSL_API int hsl_default_config(const char* kind, char** json);
/* Applies "a.b.c=value" to a JSON document. */
HSL_API int hsl_config_override(const char* json, const char* assignment, char** out);
/* Merges defaults and validates; returns the complete document. */
HSL_API int hsl_config_resolve(const char* json, char** out);

/* workers = 0 selects the hardware parallelism; persist = 0 keeps everything in memory. */
HSL_API int hsl_run_experiment(const char* config_json, size_t workers, int persist, hsl_report** out);
HSL_API int hsl_report_json(const hsl_report* r, char** json);
HSL_API int hsl_report_telemetry(const hsl_report* r, char** json);
HSL_API int hsl_report_all_passed(const hsl_report* r, int* passed);
HSL_API int hsl_report_criteria_count(const hsl_report* r, size_t* n);
/* id is valid until the report is freed. */
HSL_API int hsl_report_criterion(const hsl_report* r, size_t index, const char** id, int* passed, double* measured,
                                 double* target, double* tolerance);
HSL_API void hsl_report_free(hsl_report* r);

/* Scans <dir>/replicas and counts files that pass or fail their checksums for the given config hash. */
HSL_API int hsl_verify_replicas(const char* dir, const char* config_hash, size_t* valid, size_t* corrupt);

/* --- standalone solvers --- */

/* Homogeneous Kac run; request {"d","particles","times","seed","f0","observables"}. Result is JSON. */
HSL_API int hsl_kac_run(const char* request_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif
