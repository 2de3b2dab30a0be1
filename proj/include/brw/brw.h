/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the discounted branching random walk laboratory.
 *
 * All handles are opaque. Every call returning brw_status records a
 * message retrievable with brw_last_error() on failure (thread-local,
 * valid until the next failing call on the same thread).
 */
#ifndef BRW_BRW_H
#define BRW_BRW_H

#include <stddef.h>
#include <stdint.h>

#if defined(BRW_BUILDING_LIBRARY)
#define BRW_API __attribute__((visibility("default")))
#else
#define BRW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum brw_status {
  BRW_OK = 0,
  BRW_ERR_INVALID_ARGUMENT = 1,
  BRW_ERR_CONFIG = 2,
  BRW_ERR_BUDGET = 3,
  BRW_ERR_INTERNAL = 4,
  BRW_ERR_BOUND_VIOLATED = 5,
  BRW_ERR_DEPTH_TOO_SHALLOW = 6
} brw_status;

typedef struct brw_experiment brw_experiment;
typedef struct brw_law brw_law;

BRW_API const char* brw_version(void);
BRW_API const char* brw_status_string(brw_status status);
BRW_API const char* brw_last_error(void);

/* Experiments. `config_json` follows docs/schemas.md. */
BRW_API brw_status brw_experiment_create(const char* config_json, brw_experiment** out);
BRW_API brw_status brw_experiment_create_from_file(const char* path, brw_experiment** out);
/* Fixes the kind ("simulate", "phase", ...); fails if the config names another. */
BRW_API brw_status brw_experiment_set_kind(brw_experiment* exp, const char* kind);
BRW_API brw_status brw_experiment_set_seed(brw_experiment* exp, uint64_t seed);
BRW_API brw_status brw_experiment_set_threads(brw_experiment* exp, int threads);
BRW_API brw_status brw_experiment_set_dump_partitions(brw_experiment* exp, int on);
/* Writes CSV files and summary.json into out_dir. Returns BRW_ERR_BUDGET
 * (after writing) when a replica ran out of node budget. */
BRW_API brw_status brw_experiment_run(brw_experiment* exp, const char* out_dir);
/* Summary of the last run; owned by the handle, valid until the next run. */
BRW_API const char* brw_experiment_summary_json(const brw_experiment* exp);
BRW_API void brw_experiment_destroy(brw_experiment* exp);

/* Increment laws, e.g. {"kind": "pareto", "theta": 1.0}. */
BRW_API brw_status brw_law_create(const char* spec_json, brw_law** out);
BRW_API brw_status brw_law_tail(const brw_law* law, double x, double* out);
/* E|Y|^(1/H): *finite is 0 or 1, *value is set when finite. */
BRW_API brw_status brw_law_moment(const brw_law* law, double H, int* finite, double* value);
BRW_API void brw_law_destroy(brw_law* law);

/* P = sum_k m^k P(|Y| > m^(kH)). */
BRW_API brw_status brw_series_P(const brw_law* law, double m, double H, int* finite, double* value);
/* sum_k m^k P(|Y| > u m^(kH)). */
BRW_API brw_status brw_series_expected_exceedance(const brw_law* law, double m, double H, double u, int* finite,
                                                  double* value);
BRW_API brw_status brw_u_threshold(double H, int n, double* out);

/* Streaming supremum of one tree: fills max_abs[0..depth] (caller-sized). */
BRW_API brw_status brw_simulate_max_abs(const brw_law* law, const char* offspring_json, double H, int depth,
                                        uint64_t seed, double* max_abs, size_t len);

#ifdef __cplusplus
}
#endif

#endif
