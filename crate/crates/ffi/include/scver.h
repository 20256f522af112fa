#ifndef SCVER_H
#define SCVER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stdint.h>

// Result codes.
typedef enum ScverCode {
  // Success; for checks, the property holds within the bounds.
  SCVER_CODE_OK = 0,
  // A property or assertion is violated; the JSON carries a trace.
  SCVER_CODE_VIOLATION = 1,
  // A bound or the state cap was hit.
  SCVER_CODE_BOUND = 2,
  // Syntax, type or usage error in the input.
  SCVER_CODE_INVALID = 3,
  // Infrastructure error.
  SCVER_CODE_INFRA = 4,
  // A required pointer argument was null.
  SCVER_CODE_NULL_ARGUMENT = 5,
  // A string argument was not valid UTF-8.
  SCVER_CODE_UTF8 = 6,
  // Internal panic caught at the boundary.
  SCVER_CODE_PANIC = 7,
} ScverCode;

// Environment policy for open inputs.
typedef enum ScverEnv {
  SCVER_ENV_MOST_GENERAL = 0,
  SCVER_ENV_CLOSED_DEFAULT = 1,
} ScverEnv;

// Opaque handle to a parsed and elaborated design.
typedef struct ScverDesign ScverDesign;

// Exploration bounds. Obtain defaults from [`scver_config_default`].
typedef struct ScverConfig {
  uint32_t max_time;
  uint32_t max_delta;
  uint32_t step_limit;
  uint64_t state_cap;
  // A [`ScverEnv`] value.
  uint32_t env;
  bool check_deadlock;
} ScverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, static storage.
const char *scver_version(void);

// Default bounds: time 100, 64 deltas, 10000 statements per run,
// 5,000,000 states, most-general environment, deadlock checking on.
struct ScverConfig scver_config_default(void);

// Message for the last failed call on this thread, or "" after a success.
// Valid until the next call into the library from this thread.
const char *scver_last_error(void);

// Parses and elaborates `source`. On success `*out` owns a new handle.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum ScverCode scver_design_load(const char *source, struct ScverDesign **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `d` must come from [`scver_design_load`] and not be freed twice.
void scver_design_free(struct ScverDesign *d);

// Checks `property`, or assertions and deadlocks when it is null. Writes
// the verdict JSON to `*json_out` and returns Ok, Violation or Bound.
//
// # Safety
// `d` must be a live handle; `property` null or NUL-terminated; `cfg` null
// or valid; `json_out` a valid pointer.
enum ScverCode scver_check(const struct ScverDesign *d,
                           const char *property,
                           const struct ScverConfig *cfg,
                           char **json_out);

// Emits Promela for `property`, or for all properties when null.
//
// # Safety
// As for [`scver_check`].
enum ScverCode scver_emit_promela(const struct ScverDesign *d,
                                  const char *property,
                                  const struct ScverConfig *cfg,
                                  char **pml_out);

// Learns an interface stub for `instance` with depth `k` and history `h`.
// Writes the stub file contents to `*json_out`.
//
// # Safety
// `d` must be a live handle; `instance` NUL-terminated; `cfg` null or
// valid; `json_out` a valid pointer.
enum ScverCode scver_learn_stub(const struct ScverDesign *d,
                                const char *instance,
                                uint32_t k,
                                uint32_t h,
                                const struct ScverConfig *cfg,
                                char **json_out);

// Generates abstract tests for statement and toggle coverage. Writes
// `{"tests": [...], "uncovered": [...]}` to `*json_out`.
//
// # Safety
// `d` must be a live handle; `cfg` null or valid; `json_out` a valid pointer.
enum ScverCode scver_testgen(const struct ScverDesign *d,
                             const struct ScverConfig *cfg,
                             char **json_out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void scver_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCVER_H */
