/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DSYNC_H
#define DSYNC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsyncStatus {
  DSYNC_STATUS_OK = 0,
  DSYNC_STATUS_NULL_POINTER = 1,
  DSYNC_STATUS_INVALID_UTF8 = 2,
  DSYNC_STATUS_IO = 3,
  DSYNC_STATUS_PARSE = 4,
  DSYNC_STATUS_VALIDATION = 5,
  DSYNC_STATUS_DEADLOCK = 6,
  DSYNC_STATUS_INTERNAL = 7,
} DsyncStatus;

/**
 * An event log.
 */
typedef struct DsyncLog DsyncLog;

/**
 * A validated timed colored Petri net.
 */
typedef struct DsyncNet DsyncNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *dsync_last_error(void);

/**
 * Library version, a static string.
 */
const char *dsync_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void dsync_string_free(char *s);

/**
 * Parses and validates a net from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum DsyncStatus dsync_net_from_json(const char *json, struct DsyncNet **out);

/**
 * Loads a net from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DsyncStatus dsync_net_load(const char *path, struct DsyncNet **out);

/**
 * # Safety
 * `net` must be null or a handle from this library, not yet freed.
 */
void dsync_net_free(struct DsyncNet *net);

/**
 * Parses a CSV event log.
 *
 * # Safety
 * `csv` must be a NUL-terminated string; `out` must be writable.
 */
enum DsyncStatus dsync_log_parse_csv(const char *csv, struct DsyncLog **out);

/**
 * Loads a CSV event log from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DsyncStatus dsync_log_load(const char *path, struct DsyncLog **out);

/**
 * # Safety
 * `log` must be null or a handle from this library, not yet freed.
 */
void dsync_log_free(struct DsyncLog *log);

/**
 * Number of events in the log; 0 for a null handle.
 *
 * # Safety
 * `log` must be null or a live handle.
 */
size_t dsync_log_len(const struct DsyncLog *log);

/**
 * Writes the log as CSV text into `*out`.
 *
 * # Safety
 * `log` must be a live handle; `out` must be writable.
 */
enum DsyncStatus dsync_log_to_csv(const struct DsyncLog *log, char **out);

/**
 * Simulates the net. `max_cases` of 0 means unbounded, which requires a
 * positive `horizon`; a `horizon` of 0 or less means none.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum DsyncStatus dsync_simulate(const struct DsyncNet *net,
                                uint64_t seed,
                                size_t max_cases,
                                double horizon,
                                struct DsyncLog **out);

/**
 * Runs discovery and writes the JSON report into `*out_json`. `config_toml`
 * may be null for the default settings.
 *
 * # Safety
 * `net` and `log` must be live handles; `config_toml` must be null or a
 * NUL-terminated string; `out_json` must be writable.
 */
enum DsyncStatus dsync_discover(const struct DsyncNet *net,
                                const struct DsyncLog *log,
                                const char *config_toml,
                                char **out_json);

/**
 * Replays the log on the net with its guards enforced and reports how many
 * events fit. Either count pointer may be null.
 *
 * # Safety
 * `net` and `log` must be live handles; non-null count pointers must be
 * writable.
 */
enum DsyncStatus dsync_check(const struct DsyncNet *net,
                             const struct DsyncLog *log,
                             size_t *matched,
                             size_t *unmatched);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSYNC_H */
