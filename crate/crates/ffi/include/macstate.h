#ifndef MACSTATE_H
#define MACSTATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsMode {
  MS_MODE_ONE_WAY = 0,
  MS_MODE_TWO_WAY = 1,
  MS_MODE_SPLIT = 2,
  MS_MODE_STATE_ONLY = 3,
  MS_MODE_MESSAGE_ONLY = 4,
} MsMode;

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_INVALID_ARGUMENT = 1,
  MS_STATUS_INFEASIBLE = 2,
  MS_STATUS_RESOURCE_GUARD = 3,
  MS_STATUS_NULL_POINTER = 4,
  MS_STATUS_PANIC = 5,
} MsStatus;

/**
 * Channel plus its input-cost caps.
 */
typedef struct MsChannel MsChannel;

/**
 * Traced region with its witnesses.
 */
typedef struct MsRegion MsRegion;

typedef struct MsSearch {
  size_t u_card;
  size_t v_card;
  size_t directions;
  size_t restarts;
  size_t local_steps;
  uint64_t seed;
} MsSearch;

/**
 * Cooperation setting. Rates that the mode does not use must be zero.
 */
typedef struct MsCoop {
  enum MsMode mode;
  double c12;
  double c21;
  double c12m;
  double c12s;
} MsCoop;

typedef struct MsSimResult {
  size_t trials;
  size_t errors;
  double error_rate;
  double ci95_halfwidth;
  size_t coverage_fail;
  size_t decoder_errors;
} MsSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Defaults used by the command-line tool.
 */
struct MsSearch ms_search_default(void);

/**
 * Switch channel with flip probability `pz`. Pass a negative cap to leave
 * that encoder unconstrained.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum MsStatus ms_channel_switch_bsc(double pz, double p1, double p2, struct MsChannel **out);

/**
 * Channel from the JSON spec format accepted by the command-line tool.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum MsStatus ms_channel_from_json(const char *json, struct MsChannel **out);

/**
 * # Safety
 * `ch` must come from this library and not be freed twice. Null is a no-op.
 */
void ms_channel_free(struct MsChannel *ch);

/**
 * # Safety
 * `ch` must be a live channel handle and `out` a valid pointer.
 */
enum MsStatus ms_trace_region(const struct MsChannel *ch,
                              struct MsCoop coop,
                              struct MsSearch search,
                              struct MsRegion **out);

/**
 * Number of frontier vertices; 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live region handle.
 */
size_t ms_region_len(const struct MsRegion *r);

/**
 * # Safety
 * `r` must be a live region handle; `r1`, `r2` valid pointers.
 */
enum MsStatus ms_region_point(const struct MsRegion *r, size_t index, double *r1, double *r2);

/**
 * Writes 1 to `inside` when (r1, r2) lies in the region up to `tol`, else 0.
 *
 * # Safety
 * `r` must be a live region handle; `inside` a valid pointer.
 */
enum MsStatus ms_region_contains(const struct MsRegion *r,
                                 double r1,
                                 double r2,
                                 double tol,
                                 int32_t *inside);

/**
 * Frontier CSV. Release with [`ms_string_free`].
 *
 * # Safety
 * `r` must be a live region handle; `out` a valid pointer.
 */
enum MsStatus ms_region_to_csv(const struct MsRegion *r, char **out);

/**
 * Policy achieving frontier vertex `index`, as JSON. Release with
 * [`ms_string_free`].
 *
 * # Safety
 * `r` must be a live region handle; `out` a valid pointer.
 */
enum MsStatus ms_region_witness_json(const struct MsRegion *r, size_t index, char **out);

/**
 * # Safety
 * `s` must come from this library. Null is a no-op.
 */
void ms_string_free(char *s);

/**
 * # Safety
 * `r` must come from this library and not be freed twice. Null is a no-op.
 */
void ms_region_free(struct MsRegion *r);

/**
 * Monte Carlo error rate of the binned code at blocklength `n` using the
 * policy given as JSON.
 *
 * # Safety
 * `ch` must be a live channel handle, `policy_json` a NUL-terminated
 * string and `out` a valid pointer.
 */
enum MsStatus ms_simulate(const struct MsChannel *ch,
                          const char *policy_json,
                          size_t n,
                          double r1,
                          double r2,
                          double c12,
                          double eps,
                          size_t trials,
                          uint64_t seed,
                          struct MsSimResult *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MACSTATE_H */
