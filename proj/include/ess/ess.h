#ifndef ESS_ESS_H
#define ESS_ESS_H

/* C interface to the storage-sharing toolkit. Every object is an opaque
 * handle owned by the caller and released with its *_free function; every
 * fallible call returns an ess_status and leaves a thread-local message for
 * ess_last_error(). Output handles are set only on ESS_OK. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ESS_API __declspec(dllexport)
#else
#define ESS_API __attribute__((visibility("default")))
#endif

typedef enum ess_status {
  ESS_OK = 0,
  ESS_E_INVALID_ARGUMENT = 1,
  ESS_E_DIMENSION = 2,
  ESS_E_VALIDATION = 3,
  ESS_E_IO = 4,
  ESS_E_PARSE = 5,
  ESS_E_SOLVER = 6,
  ESS_E_VERIFICATION = 7,
  ESS_E_LIMIT = 8,
  ESS_E_INTERNAL = 99
} ess_status;

/* Solver outcome; ess_exit_code maps it to the CLI convention
 * (0 optimal, 2 infeasible, 3 unbounded, 4 limit). */
typedef enum ess_solve_status {
  ESS_OPTIMAL = 0,
  ESS_INFEASIBLE = 1,
  ESS_UNBOUNDED = 2,
  ESS_LIMIT = 3
} ess_solve_status;

typedef struct ess_run ess_run;       /* instance plus solver settings */
typedef struct ess_result ess_result; /* bilevel or oracle outcome */
typedef struct ess_report ess_report; /* ordered list of day reports */

ESS_API const char* ess_last_error(void);
ESS_API const char* ess_status_name(ess_status status);
ESS_API int ess_exit_code(ess_solve_status status);

/* ---- runs ---- */
/* config may be NULL or "" for all defaults. */
ESS_API ess_status ess_run_load(const char* loads_path, const char* prices_path, const char* config_path,
                                ess_run** out);
/* profile: duck | typical | mixed; shape: conforming | conflicting. */
ESS_API ess_status ess_run_generate(const char* profile, const char* shape, int customers, int slots, uint64_t seed,
                                    ess_run** out);
ESS_API ess_status ess_run_write(const ess_run* run, const char* loads_path, const char* prices_path,
                                 const char* config_path);
ESS_API void ess_run_free(ess_run* run);

ESS_API int ess_run_customers(const ess_run* run);
ESS_API int ess_run_slots(const ess_run* run);
ESS_API double ess_run_total_capacity(const ess_run* run);
ESS_API size_t ess_run_provenance_count(const ess_run* run);
/* Valid until the run is modified or freed; NULL when out of range. */
ESS_API const char* ess_run_provenance(const ess_run* run, size_t index);

/* mode: bigm | lpcc */
ESS_API ess_status ess_run_set_mode(ess_run* run, const char* mode);
ESS_API ess_status ess_run_set_time_limit(ess_run* run, double seconds);
/* 0 selects total_capacity / 20. */
ESS_API ess_status ess_run_set_grid_step(ess_run* run, double step);
ESS_API ess_status ess_run_set_total_capacity(ess_run* run, double kwh);

/* ---- model export ---- */
/* Big-M MILP of the bilevel problem as fixed-format MPS. */
ESS_API ess_status ess_export_mps(const ess_run* run, const char* path, long* binaries, long* rows, long* cols);

/* ---- solving ---- */
ESS_API ess_status ess_solve(const ess_run* run, ess_result** out);
/* Exhaustive grid search; writes oracle.csv/oracle.json when out_dir is non-NULL. */
ESS_API ess_status ess_oracle(const ess_run* run, const char* out_dir, ess_result** out);
ESS_API void ess_result_free(ess_result* result);

ESS_API ess_solve_status ess_result_status(const ess_result* result);
ESS_API double ess_result_objective(const ess_result* result);
ESS_API double ess_result_bound(const ess_result* result);
ESS_API long ess_result_nodes(const ess_result* result);
ESS_API double ess_result_disco_capacity(const ess_result* result);
/* Copies min(count, customers) customer capacities; returns the customer count. */
ESS_API size_t ess_result_customer_capacities(const ess_result* result, double* out, size_t count);
/* Notes such as big-M escalations or oracle tie resolutions. */
ESS_API size_t ess_result_note_count(const ess_result* result);
ESS_API const char* ess_result_note(const ess_result* result, size_t index);

/* ---- scenarios and reports ---- */
ESS_API ess_status ess_report_new(ess_report** out);
ESS_API void ess_report_free(ess_report* report);
/* scenario 1 (DisCo only), 2 (customers only) or 3 (shared); appends one day report. */
ESS_API ess_status ess_run_scenario(const ess_run* run, int scenario, int day, ess_report* report);
/* Synthetic daily cycle: day d uses gen_synthetic(profile, shape, N, T, seed + d - 1) with the run's
 * storage and solver settings. Failing days are recorded in the report, not returned as errors. */
ESS_API ess_status ess_run_cycle(const ess_run* run, const char* profile, const char* shape, int days, uint64_t seed,
                                 const int* scenarios, size_t scenario_count, ess_report* report);
/* Daily cycle over input files; loads_paths[i] and prices_paths[i] form day i + 1. */
ESS_API ess_status ess_run_cycle_files(const ess_run* run, const char* const* loads_paths,
                                       const char* const* prices_paths, size_t days, const int* scenarios,
                                       size_t scenario_count, ess_report* report);

ESS_API ess_status ess_report_set_manifest(ess_report* report, const char* key, const char* value);
ESS_API ess_status ess_report_emit(const ess_report* report, const char* directory);
ESS_API ess_status ess_report_read(const char* directory, ess_report** out);

ESS_API size_t ess_report_count(const ess_report* report);
/* Day, scenario and failure flag of entry i. */
ESS_API ess_status ess_report_entry(const ess_report* report, size_t index, int* day, int* scenario, int* failed);
/* Reduction percentage of a party (disco, customers_1, customers_2, peak) in entry i. */
ESS_API ess_status ess_report_reduction(const ess_report* report, size_t index, const char* party, double* percent);
ESS_API ess_status ess_report_upper_objective(const ess_report* report, size_t index, double* value);
/* Formatted reduction table. Writes at most capacity bytes including the terminator;
 * *needed receives the full length plus one. */
ESS_API ess_status ess_report_table(const ess_report* report, char* buffer, size_t capacity, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
