#ifndef MIXTAINT_H
#define MIXTAINT_H

/* Generated by cbindgen from the mixtaint-capi crate; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible binding.
 */
typedef enum {
  MIXTAINT_STATUS_OK = 0,
  /**
   * A file could not be read.
   */
  MIXTAINT_STATUS_IO = 1,
  /**
   * Input text is not valid JSON of the expected shape.
   */
  MIXTAINT_STATUS_PARSE = 2,
  /**
   * The transactions do not form a consistent chain.
   */
  MIXTAINT_STATUS_CHAIN = 3,
  /**
   * The analysis rejected the request (bad window, empty seed, ...).
   */
  MIXTAINT_STATUS_ANALYSIS = 4,
  /**
   * A required pointer is null or an argument is out of range.
   */
  MIXTAINT_STATUS_INVALID_ARG = 5,
  /**
   * A string argument is not valid UTF-8.
   */
  MIXTAINT_STATUS_UTF8 = 6,
} MixtaintStatus;

/**
 * An indexed transaction chain.
 *
 * Created by [`mixtaint_chain_load`] or [`mixtaint_chain_from_jsonl`] and
 * released with [`mixtaint_chain_free`]. The handle is immutable after
 * construction and safe to share across threads.
 */
typedef struct MixtaintChain MixtaintChain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message text for the most recent failure on the calling thread.
 *
 * The pointer stays valid until the next failing call on the same thread;
 * it is empty when no call has failed yet.
 */
const char *mixtaint_last_error(void);

/**
 * Loads a chain from a JSONL file, one transaction object per line.
 *
 * On success writes a new handle to `out_chain`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_chain` a valid pointer.
 */
MixtaintStatus mixtaint_chain_load(const char *path, MixtaintChain **out_chain);

/**
 * Parses a chain from in-memory JSONL text, one transaction per line.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out_chain` a valid pointer.
 */
MixtaintStatus mixtaint_chain_from_jsonl(const char *text, MixtaintChain **out_chain);

/**
 * Releases a chain handle. Passing null is a no-op.
 *
 * # Safety
 * `chain` must be null or a handle returned by this library that has not
 * been freed yet.
 */
void mixtaint_chain_free(MixtaintChain *chain);

/**
 * Number of transactions in the chain; 0 when `chain` is null.
 *
 * # Safety
 * `chain` must be null or a live handle returned by this library.
 */
uintptr_t mixtaint_chain_tx_count(const MixtaintChain *chain);

/**
 * Runs one tracking method on one case and returns the taint result as JSON.
 *
 * `case_json` holds a single case object. `method` is one of `baseline`,
 * `poison`, `m1`, `m2`, `m3` or `m4`. The window parameters are in days;
 * pass 5, 3, 3 for the defaults. The returned string must be released with
 * [`mixtaint_string_free`].
 *
 * # Safety
 * `chain` must be a live handle, the string arguments NUL-terminated, and
 * `out_json` a valid pointer.
 */
MixtaintStatus mixtaint_run_method_json(const MixtaintChain *chain,
                                        const char *case_json,
                                        const char *method,
                                        uint32_t lookback_days,
                                        uint32_t horizon_days,
                                        uint32_t backtrace_days,
                                        char **out_json);

/**
 * Evaluates one case with every method, filtered and unfiltered, and
 * returns the report as JSON.
 *
 * `calibration_json` maps service names to filter calibrations; it must
 * contain a row for the case's service. The returned string must be
 * released with [`mixtaint_string_free`].
 *
 * # Safety
 * `chain` must be a live handle, the string arguments NUL-terminated, and
 * `out_json` a valid pointer.
 */
MixtaintStatus mixtaint_evaluate_case_json(const MixtaintChain *chain,
                                           const char *case_json,
                                           const char *calibration_json,
                                           uint32_t lookback_days,
                                           uint32_t horizon_days,
                                           uint32_t backtrace_days,
                                           char **out_json);

/**
 * Releases a string returned by this library. Passing null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library that has not been
 * freed yet.
 */
void mixtaint_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXTAINT_H */
