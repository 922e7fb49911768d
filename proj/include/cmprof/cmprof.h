// Copyright 2026 The cmprof Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * cmprof C API.
 *
 * Offline serialization-bottleneck analysis of scheduler traces. All objects
 * are opaque handles owned by the caller and released with the matching
 * *_free function. Functions that can fail return a cmprof_status; on failure
 * cmprof_last_error() describes the problem for the calling thread until the
 * next failing call on that thread.
 */
#ifndef CMPROF_CMPROF_H_
#define CMPROF_CMPROF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CMPROF_BUILDING_LIBRARY)
#define CMPROF_API __attribute__((visibility("default")))
#else
#define CMPROF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cmprof_status {
  CMPROF_OK = 0,
  CMPROF_ERR_INVALID_ARGUMENT = 1,
  CMPROF_ERR_IO = 2,
  CMPROF_ERR_PARSE = 3,
  CMPROF_ERR_VALIDATION = 4,
  CMPROF_ERR_CONSISTENCY = 5,
  /* Engine and reference CMetric disagree beyond the tolerance. */
  CMPROF_ERR_DIVERGENCE = 6,
  CMPROF_ERR_INTERNAL = 7
} cmprof_status;

CMPROF_API const char* cmprof_version(void);
CMPROF_API const char* cmprof_status_string(cmprof_status status);
/* Never NULL; empty when the calling thread has not seen a failure. */
CMPROF_API const char* cmprof_last_error(void);

/* Strings returned through char** out-parameters. */
CMPROF_API void cmprof_string_free(char* s);

/* ---- traces ---- */

typedef struct cmprof_trace cmprof_trace;

CMPROF_API cmprof_status cmprof_trace_load(const char* path,
                                           cmprof_trace** out);
/* Parses JSON Lines text; `data` need not be NUL-terminated. */
CMPROF_API cmprof_status cmprof_trace_parse(const char* data, size_t size,
                                            cmprof_trace** out);
CMPROF_API cmprof_status cmprof_trace_save(const cmprof_trace* trace,
                                           const char* path);
CMPROF_API void cmprof_trace_free(cmprof_trace* trace);
CMPROF_API size_t cmprof_trace_event_count(const cmprof_trace* trace);

typedef struct cmprof_trace_stats {
  uint64_t new_count;
  uint64_t exit_count;
  uint64_t switch_count;
  uint64_t wakeup_count;
  uint64_t sample_count;
  uint64_t app_thread_count;
  int64_t first_ts;
  int64_t last_ts;
  size_t note_count;
} cmprof_trace_stats;

/* Timestamp order and thread lifecycles. Notes stay readable through
 * cmprof_trace_note() until the next validate call on the same trace. */
CMPROF_API cmprof_status cmprof_trace_validate(cmprof_trace* trace,
                                               cmprof_trace_stats* stats);
CMPROF_API const char* cmprof_trace_note(const cmprof_trace* trace,
                                         size_t index);

/* ---- symbols ---- */

typedef struct cmprof_symbols cmprof_symbols;

typedef struct cmprof_symbol_info {
  uint64_t start;
  uint64_t end;
  const char* function; /* borrowed from the map */
  const char* file;
  uint32_t line;
} cmprof_symbol_info;

CMPROF_API cmprof_status cmprof_symbols_load(const char* path,
                                             cmprof_symbols** out);
CMPROF_API void cmprof_symbols_free(cmprof_symbols* symbols);
CMPROF_API size_t cmprof_symbols_count(const cmprof_symbols* symbols);
/* Returns 1 and fills `info` when `addr` falls in a range, 0 otherwise. */
CMPROF_API int cmprof_symbols_lookup(const cmprof_symbols* symbols,
                                     uint64_t addr, cmprof_symbol_info* info);

/* ---- analysis ---- */

typedef enum cmprof_nmin_mode {
  CMPROF_NMIN_HALF_TOTAL = 0, /* half of the live application threads */
  CMPROF_NMIN_FIXED = 1
} cmprof_nmin_mode;

typedef struct cmprof_config {
  cmprof_nmin_mode nmin_mode;
  uint32_t nmin; /* used with CMPROF_NMIN_FIXED, >= 1 */
  uint32_t stack_depth;
  uint32_t top_n;
  int64_t sample_period_ns;
} cmprof_config;

/* HALF_TOTAL, stack depth 16, top 5, 3 ms sample period. */
CMPROF_API void cmprof_config_init(cmprof_config* config);

typedef enum cmprof_format {
  CMPROF_FORMAT_TEXT = 0,
  CMPROF_FORMAT_JSON = 1
} cmprof_format;

typedef struct cmprof_analysis cmprof_analysis;

/* Validates and replays the trace. `config` may be NULL for defaults. */
CMPROF_API cmprof_status cmprof_analyze(const cmprof_trace* trace,
                                        const cmprof_config* config,
                                        cmprof_analysis** out);
CMPROF_API void cmprof_analysis_free(cmprof_analysis* analysis);
CMPROF_API uint64_t cmprof_analysis_total_slices(const cmprof_analysis* a);
CMPROF_API uint64_t cmprof_analysis_critical_slices(const cmprof_analysis* a);
CMPROF_API double cmprof_analysis_cr(const cmprof_analysis* a);
CMPROF_API size_t cmprof_analysis_path_count(const cmprof_analysis* a);
/* Threads in report order (descending CMetric, then tid). */
CMPROF_API size_t cmprof_analysis_thread_count(const cmprof_analysis* a);
CMPROF_API cmprof_status cmprof_analysis_thread(const cmprof_analysis* a,
                                                size_t index, uint32_t* tid,
                                                double* cmetric_ns);
/* `symbols` may be NULL. Free *out with cmprof_string_free. */
CMPROF_API cmprof_status cmprof_analysis_render(const cmprof_analysis* a,
                                                const cmprof_symbols* symbols,
                                                cmprof_format format,
                                                char** out);

/* ---- reference CMetric ---- */

/* Per-thread CMetric from the interval-by-interval reference computation,
 * ascending tid. *count receives the number of threads; at most `capacity`
 * entries are written, so a first call with capacity 0 sizes the arrays. */
CMPROF_API cmprof_status cmprof_oracle_cmetric(const cmprof_trace* trace,
                                               uint32_t* tids, double* values,
                                               size_t capacity, size_t* count);
/* Compares engine and reference per-thread CMetric. Returns
 * CMPROF_ERR_DIVERGENCE when some thread differs by more than
 * `relative_tolerance`; `mismatches` (may be NULL) receives the count. */
CMPROF_API cmprof_status cmprof_oracle_check(const cmprof_trace* trace,
                                             double relative_tolerance,
                                             size_t* mismatches);

/* ---- synthetic traces ---- */

typedef enum cmprof_scenario_kind {
  CMPROF_SCENARIO_SERIAL_PHASE = 0,
  CMPROF_SCENARIO_LOCK_CONVOY = 1,
  CMPROF_SCENARIO_PIPELINE = 2,
  CMPROF_SCENARIO_BALANCED = 3
} cmprof_scenario_kind;

typedef struct cmprof_scenario {
  cmprof_scenario_kind kind;
  uint32_t threads; /* ignored for PIPELINE */
  uint32_t cpus;    /* 0: one per thread */
  uint64_t seed;
  int64_t sample_period_ns;
  int64_t parallel_ns;
  int64_t serial_ns;
  int64_t critical_ns;
  uint32_t rounds;
  /* PIPELINE only. Arrays are borrowed for the duration of the call. */
  const uint32_t* stage_threads;
  size_t stage_count;
  const int64_t* stage_service_ns; /* 1 entry or stage_count entries */
  size_t service_count;
  uint32_t items;
  /* Threshold for the ground-truth trigger decisions. */
  cmprof_nmin_mode truth_nmin_mode;
  uint32_t truth_nmin;
  uint32_t stack_depth;
} cmprof_scenario;

/* Accepts "serial", "convoy", "pipeline", "balanced". */
CMPROF_API cmprof_status cmprof_scenario_kind_parse(const char* name,
                                                    cmprof_scenario_kind* out);
CMPROF_API cmprof_status cmprof_scenario_init(cmprof_scenario_kind kind,
                                              cmprof_scenario* scenario);

typedef struct cmprof_synth cmprof_synth;

CMPROF_API cmprof_status cmprof_synth_generate(const cmprof_scenario* scenario,
                                               cmprof_synth** out);
CMPROF_API void cmprof_synth_free(cmprof_synth* synth);
/* Borrowed; valid while `synth` lives. */
CMPROF_API const cmprof_trace* cmprof_synth_trace(const cmprof_synth* synth);
CMPROF_API const cmprof_symbols* cmprof_synth_symbols(
    const cmprof_synth* synth);
CMPROF_API const char* cmprof_synth_truth_json(const cmprof_synth* synth);
/* Writes <prefix>.jsonl, <prefix>.sym and <prefix>.truth.json. */
CMPROF_API cmprof_status cmprof_synth_write(const cmprof_synth* synth,
                                            const char* prefix);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* CMPROF_CMPROF_H_ */
