#ifndef GRIDSPLIT_H
#define GRIDSPLIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_UTF8 = 2,
  GS_STATUS_PARSE = 3,
  GS_STATUS_INVALID_NETWORK = 4,
  GS_STATUS_INVALID_CONFIG = 5,
  GS_STATUS_INVALID_CATALOG = 6,
  GS_STATUS_CAPACITY_EXCEEDED = 7,
  GS_STATUS_INCONSISTENT_TOTALS = 8,
  GS_STATUS_INVALID_ARGUMENT = 9,
  GS_STATUS_ENGINE = 10,
  GS_STATUS_PANIC = 11,
} GsStatus;

typedef enum GsMethod {
  GS_METHOD_TOP_DOWN = 0,
  GS_METHOD_BOTTOM_UP = 1,
} GsMethod;

typedef struct GsCatalog GsCatalog;

typedef struct GsConfig GsConfig;

typedef struct GsNetwork GsNetwork;

typedef struct GsResult GsResult;

/**
 * Consumer counts of a finished run.
 */
typedef struct GsCounts {
  size_t grid;
  size_t offgrid;
  size_t microgrid;
  size_t isolated;
} GsCounts;

/**
 * Annual costs of a finished run, $/yr.
 */
typedef struct GsTotals {
  double grid;
  double offgrid;
  double total;
  double all_grid;
} GsTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *gs_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *gs_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gs_string_free(char *s);

/**
 * Parses and validates a network document.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum GsStatus gs_network_from_json(const char *json, struct GsNetwork **out);

/**
 * Builds a synthetic network: the default thousand-consumer scenario, or
 * the 6688-consumer one when `full_scale` is true.
 *
 * # Safety
 * `out` must be writable.
 */
enum GsStatus gs_network_generate(uint64_t seed, bool full_scale, struct GsNetwork **out);

/**
 * Number of consumers, or 0 for null.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
size_t gs_network_consumer_count(const struct GsNetwork *network);

/**
 * # Safety
 * `network` must be null or a live handle, not used afterwards.
 */
void gs_network_free(struct GsNetwork *network);

/**
 * # Safety
 * `out` must be writable.
 */
enum GsStatus gs_config_default(struct GsConfig **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum GsStatus gs_config_from_json(const char *json, struct GsConfig **out);

/**
 * Sets the diesel price, $/L. The handle is unchanged on failure.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
enum GsStatus gs_config_set_fuel_cost(struct GsConfig *config, double usd_per_l);

/**
 * Sets the grid reliability in [0, 1]. The handle is unchanged on failure.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
enum GsStatus gs_config_set_grid_reliability(struct GsConfig *config, double reliability);

/**
 * # Safety
 * `config` must be null or a live handle, not used afterwards.
 */
void gs_config_free(struct GsConfig *config);

/**
 * # Safety
 * `out` must be writable.
 */
enum GsStatus gs_catalog_default(struct GsCatalog **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum GsStatus gs_catalog_from_json(const char *json, struct GsCatalog **out);

/**
 * # Safety
 * `catalog` must be null or a live handle, not used afterwards.
 */
void gs_catalog_free(struct GsCatalog *catalog);

/**
 * Partitions the network with the chosen engine. The network handle is not
 * modified and can be run again.
 *
 * # Safety
 * The input handles must be live; `out` must be writable.
 */
enum GsStatus gs_run(const struct GsNetwork *network,
                     const struct GsConfig *config,
                     const struct GsCatalog *catalog,
                     enum GsMethod method,
                     struct GsResult **out);

/**
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_result_counts(const struct GsResult *result, struct GsCounts *out);

/**
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_result_totals(const struct GsResult *result, struct GsTotals *out);

/**
 * Copies the input ids of off-grid consumers, ascending, into `ids` (up to
 * `capacity` of them) and stores the full count in `count`. Call with a
 * null `ids` to size the buffer.
 *
 * # Safety
 * `result` must be a live handle; `ids` must be null or hold `capacity`
 * elements; `count` must be writable.
 */
enum GsStatus gs_result_offgrid_ids(const struct GsResult *result,
                                    uint64_t *ids,
                                    size_t capacity,
                                    size_t *count);

/**
 * The per-system-type summary as JSON. Free with [`gs_string_free`].
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_result_summary_json(const struct GsResult *result, char **out);

/**
 * # Safety
 * `result` must be null or a live handle, not used afterwards.
 */
void gs_result_free(struct GsResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDSPLIT_H */
