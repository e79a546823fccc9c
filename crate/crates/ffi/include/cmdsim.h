#ifndef CMDSIM_H
#define CMDSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmdsimMode {
  CMDSIM_MODE_BASELINE = 0,
  CMDSIM_MODE_DEDUP = 1,
  CMDSIM_MODE_DEDUP_CAR = 2,
  CMDSIM_MODE_CMD = 3,
} CmdsimMode;

typedef enum CmdsimStatus {
  CMDSIM_STATUS_OK = 0,
  CMDSIM_STATUS_NULL_POINTER = 1,
  CMDSIM_STATUS_INVALID_ARGUMENT = 2,
  CMDSIM_STATUS_PARSE = 3,
  CMDSIM_STATUS_CONFIG = 4,
  CMDSIM_STATUS_TRACE_VIOLATION = 5,
  CMDSIM_STATUS_INVARIANT = 6,
  CMDSIM_STATUS_PANIC = 7,
} CmdsimStatus;

/**
 * Opaque simulator configuration.
 */
typedef struct CmdsimConfig CmdsimConfig;

/**
 * Opaque traffic report of one run.
 */
typedef struct CmdsimReport CmdsimReport;

/**
 * Opaque parsed or generated trace.
 */
typedef struct CmdsimTrace CmdsimTrace;

/**
 * Synthetic trace parameters; see the generator documentation.
 */
typedef struct CmdsimGenParams {
  uint64_t seed;
  uint64_t n_blocks;
  uint64_t n_records;
  double write_fraction;
  double intra_prob;
  uint64_t inter_pool_size;
  uint64_t readonly_set_size;
  uint64_t readonly_rereads;
  double mask_distribution[4];
} CmdsimGenParams;

/**
 * Traffic counters of one run.
 */
typedef struct CmdsimCounts {
  uint64_t write;
  uint64_t data_read;
  uint64_t read_only;
  uint64_t metadata_read;
  uint64_t metadata_write;
  uint64_t dedup_read;
  uint64_t car_copy;
  uint64_t fifo_hit;
  uint64_t l2_hit;
  uint64_t l2_miss;
  uint64_t offchip_total;
  uint64_t intra_removed;
  uint64_t inter_removed;
  uint64_t unique_writes;
} CmdsimCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *cmdsim_last_error(void);

/**
 * Library version as a static string.
 */
const char *cmdsim_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cmdsim_string_free(char *s);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_gen_params_default(struct CmdsimGenParams *out);

/**
 * # Safety
 * `params` must point to a valid struct; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_trace_generate(const struct CmdsimGenParams *params,
                                        struct CmdsimTrace **out);

/**
 * Parses the text trace format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_trace_parse(const char *text_in, struct CmdsimTrace **out);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_trace_len(const struct CmdsimTrace *trace, size_t *out);

/**
 * Canonical text form; free the result with [`cmdsim_string_free`].
 *
 * # Safety
 * `trace` must be a live handle; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_trace_to_text(const struct CmdsimTrace *trace, char **out);

/**
 * # Safety
 * `trace` must be null or a live handle; it is invalid afterwards.
 */
void cmdsim_trace_free(struct CmdsimTrace *trace);

/**
 * Default configuration: 4 MiB 16-way L2 over 8 partitions.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_config_default(struct CmdsimConfig **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_config_from_json(const char *json, struct CmdsimConfig **out);

/**
 * # Safety
 * `config` must be a live handle; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_config_to_json(const struct CmdsimConfig *config, char **out);

/**
 * Rejected (and the handle left unchanged) if the geometry becomes invalid.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CmdsimStatus cmdsim_config_set_partitions(struct CmdsimConfig *config, size_t n);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CmdsimStatus cmdsim_config_set_l2_bytes(struct CmdsimConfig *config, uint64_t bytes);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CmdsimStatus cmdsim_config_set_assoc(struct CmdsimConfig *config, size_t ways);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CmdsimStatus cmdsim_config_set_fifo_entries(struct CmdsimConfig *config, size_t entries);

/**
 * Hash-store entries per partition; 0 means unbounded.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CmdsimStatus cmdsim_config_set_hash_entries(struct CmdsimConfig *config, size_t entries);

/**
 * # Safety
 * `config` must be null or a live handle; it is invalid afterwards.
 */
void cmdsim_config_free(struct CmdsimConfig *config);

/**
 * Simulates `mode` (a [`CmdsimMode`] value).
 *
 * # Safety
 * `trace` and `config` must be live handles; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_run(const struct CmdsimTrace *trace,
                             const struct CmdsimConfig *config,
                             uint32_t mode,
                             struct CmdsimReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_report_counts(const struct CmdsimReport *report, struct CmdsimCounts *out);

/**
 * `format` is 0 for JSON, 1 for CSV.
 *
 * # Safety
 * `report` must be a live handle; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_report_emit(const struct CmdsimReport *report,
                                     uint32_t format,
                                     char **out);

/**
 * # Safety
 * `report` must be null or a live handle; it is invalid afterwards.
 */
void cmdsim_report_free(struct CmdsimReport *report);

/**
 * All four modes side by side, as JSON.
 *
 * # Safety
 * `trace` and `config` must be live handles; `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_compare_json(const struct CmdsimTrace *trace,
                                      const struct CmdsimConfig *config,
                                      char **out);

/**
 * Checks the simulator against the oracle. `*equivalent` is 1 when they
 * agree; otherwise 0 and [`cmdsim_last_error`] names the first divergence.
 *
 * # Safety
 * `trace` and `config` must be live handles; `equivalent` must be valid for
 * writes.
 */
enum CmdsimStatus cmdsim_verify(const struct CmdsimTrace *trace,
                                const struct CmdsimConfig *config,
                                int32_t *equivalent);

/**
 * Serializes the default generator parameters as JSON, mainly for tooling.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CmdsimStatus cmdsim_gen_params_default_json(char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CMDSIM_H */
