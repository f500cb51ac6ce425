#ifndef COVERLAB_H
#define COVERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. `COVERLAB_STATUS_OK` is zero.
 */
typedef enum CoverlabStatus {
  COVERLAB_STATUS_OK = 0,
  COVERLAB_STATUS_NULL_POINTER = 1,
  COVERLAB_STATUS_INVALID_UTF8 = 2,
  COVERLAB_STATUS_JSON = 3,
  COVERLAB_STATUS_STRUCTURE = 4,
  COVERLAB_STATUS_INVALID_PARAMETER = 5,
  COVERLAB_STATUS_BUDGET = 6,
  COVERLAB_STATUS_BRACKET = 7,
  COVERLAB_STATUS_EMPTY_CONFIDENCE_SET = 8,
  COVERLAB_STATUS_CONFIG = 9,
  COVERLAB_STATUS_IO = 10,
  COVERLAB_STATUS_PANIC = 11,
} CoverlabStatus;

/**
 * Opaque value-function family.
 */
typedef struct CoverlabFamily CoverlabFamily;

/**
 * Opaque layered MDP.
 */
typedef struct CoverlabMdp CoverlabMdp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *coverlab_version(void);

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *coverlab_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed; null is ignored.
 */
void coverlab_string_free(char *s);

/**
 * Parses an MDP from its JSON interchange form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CoverlabStatus coverlab_mdp_from_json(const char *json, struct CoverlabMdp **out);

/**
 * Serializes an MDP; free the result with `coverlab_string_free`.
 *
 * # Safety
 * `mdp` must be a live handle and `out` a valid pointer.
 */
enum CoverlabStatus coverlab_mdp_to_json(const struct CoverlabMdp *mdp, char **out);

/**
 * # Safety
 * `mdp` must come from this library and not have been freed; null is ignored.
 */
void coverlab_mdp_free(struct CoverlabMdp *mdp);

/**
 * Number of layers, or 0 for a null handle.
 *
 * # Safety
 * `mdp` must be null or a live handle.
 */
uintptr_t coverlab_mdp_horizon(const struct CoverlabMdp *mdp);

/**
 * Optimal value from the initial state.
 *
 * # Safety
 * `mdp` must be a live handle and `out` a valid pointer.
 */
enum CoverlabStatus coverlab_mdp_optimal_value(const struct CoverlabMdp *mdp, double *out);

/**
 * Parses a family. When `mdp` is non-null its shapes are checked against it.
 *
 * # Safety
 * `json` must be a NUL-terminated string, `mdp` null or a live handle, `out` valid.
 */
enum CoverlabStatus coverlab_family_from_json(const char *json,
                                              const struct CoverlabMdp *mdp,
                                              struct CoverlabFamily **out);

/**
 * Serializes a family; free the result with `coverlab_string_free`.
 *
 * # Safety
 * `family` must be a live handle and `out` a valid pointer.
 */
enum CoverlabStatus coverlab_family_to_json(const struct CoverlabFamily *family, char **out);

/**
 * # Safety
 * `family` must come from this library and not have been freed; null is ignored.
 */
void coverlab_family_free(struct CoverlabFamily *family);

/**
 * Number of members, or 0 for a null handle.
 *
 * # Safety
 * `family` must be null or a live handle.
 */
uintptr_t coverlab_family_len(const struct CoverlabFamily *family);

/**
 * Builds a named construction (`tree`, `two-layer`, `bandit`, `peak-bandit`, `exbmdp`).
 *
 * `params_json` is a JSON object of numbers and may be null. `out_manifest`
 * may be null; otherwise it receives the manifest as JSON.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_mdp` and `out_family` must be valid.
 */
enum CoverlabStatus coverlab_construct(const char *name,
                                       const char *params_json,
                                       struct CoverlabMdp **out_mdp,
                                       struct CoverlabFamily **out_family,
                                       char **out_manifest);

/**
 * Coverability over the greedy policies of `family`, or over all policies when it is null.
 *
 * # Safety
 * `mdp` must be a live handle, `family` null or a live handle, `out` valid.
 */
enum CoverlabStatus coverlab_coverability(const struct CoverlabMdp *mdp,
                                          const struct CoverlabFamily *family,
                                          double *out);

/**
 * Runs optimistic exploration for `rounds` episodes.
 *
 * A non-positive `beta` selects the default width at `delta = 0.05`.
 * `out_log` may be null; otherwise it receives the full run log as JSON.
 *
 * # Safety
 * Handles must be live; `out_regret` must be valid.
 */
enum CoverlabStatus coverlab_golf_run(const struct CoverlabMdp *mdp,
                                      const struct CoverlabFamily *family,
                                      uintptr_t rounds,
                                      double beta,
                                      uint64_t seed,
                                      double *out_regret,
                                      char **out_log);

/**
 * Runs a claim suite. `out_failures` receives the number of failing rows;
 * `out_csv` may be null, otherwise it receives the ledger as CSV.
 *
 * # Safety
 * `suite` must be NUL-terminated and `out_failures` valid.
 */
enum CoverlabStatus coverlab_verify_claims(const char *suite,
                                           uintptr_t *out_failures,
                                           char **out_csv);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* COVERLAB_H */
