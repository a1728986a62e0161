#ifndef SMD_H
#define SMD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmdKind {
  SMD_KIND_SP = 0,
  SMD_KIND_SPD = 1,
  SMD_KIND_SPP = 2,
} SmdKind;

typedef enum SmdMode {
  SMD_MODE_NUPBR = 0,
  SMD_MODE_DSV = 1,
} SmdMode;

typedef enum SmdStatus {
  SMD_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  SMD_STATUS_NULL = -1,
  /*
   A string argument was not UTF-8.
   */
  SMD_STATUS_UTF8 = -2,
  /*
   The instance text or an argument was rejected.
   */
  SMD_STATUS_PARSE = -3,
  /*
   Unknown gallery name, command or process name.
   */
  SMD_STATUS_UNKNOWN = -4,
  /*
   The library panicked; the handle is still valid.
   */
  SMD_STATUS_INTERNAL = -5,
} SmdStatus;

/*
 Opaque instance handle.
 */
typedef struct SmdInstance SmdInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *smd_last_error(void);

/*
 Parses an instance from JSON text.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum SmdStatus smd_instance_from_json(const char *json, struct SmdInstance **out);

/*
 Loads a built-in instance by name.

 # Safety
 `name` must be a nul-terminated string; `out` must be writable.
 */
enum SmdStatus smd_instance_from_gallery(const char *name, struct SmdInstance **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `instance` must come from this library and not be used afterwards.
 */
void smd_instance_free(struct SmdInstance *instance);

/*
 Canonical JSON of the instance.

 # Safety
 `instance` must be a live handle; `out` must be writable.
 */
enum SmdStatus smd_instance_json(const struct SmdInstance *instance, char **out);

/*
 `fail_time` is the first time with an unbounded closure level, or -1.

 # Safety
 `instance` must be a live handle; the out pointers must be writable.
 */
enum SmdStatus smd_check_nupbr(const struct SmdInstance *instance, bool *holds, int64_t *fail_time);

/*
 # Safety
 `instance` must be a live handle; `kind` must be writable.
 */
enum SmdStatus smd_classify(const struct SmdInstance *instance, enum SmdKind *kind);

/*
 Solves the deflator LP. `xhat` may be null in NUPBR mode and, in DSV
 mode, falls back to the instance's dominating process. `delta` receives
 the optimal margin as a rational string, to be freed with
 [`smd_string_free`].

 # Safety
 `instance` must be a live handle; `xhat` null or nul-terminated; the out
 pointers must be writable.
 */
enum SmdStatus smd_synth_deflator(const struct SmdInstance *instance,
                                  enum SmdMode mode,
                                  const char *xhat,
                                  bool *feasible,
                                  char **delta);

/*
 Machine-format report of a command run with default options; `exit`
 receives the command-line exit code.

 # Safety
 `instance` must be a live handle; `command` nul-terminated; the out
 pointers must be writable.
 */
enum SmdStatus smd_report_json(const struct SmdInstance *instance,
                               const char *command,
                               int32_t *exit,
                               char **out);

/*
 Releases a string returned by this library; null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void smd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMD_H */
