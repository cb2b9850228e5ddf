#ifndef PRINTLEAK_H
#define PRINTLEAK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PlkStatus {
  PLK_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  PLK_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range or a string was not UTF-8.
   */
  PLK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * G-code could not be parsed or interpreted.
   */
  PLK_STATUS_GCODE = 3,
  /**
   * The simulator rejected its toolpath or options.
   */
  PLK_STATUS_SIMULATION = 4,
  /**
   * A trace, label set or feature matrix was malformed.
   */
  PLK_STATUS_DATA = 5,
  /**
   * Training failed or a cascade file is invalid.
   */
  PLK_STATUS_MODEL = 6,
  /**
   * A file could not be opened, read or written.
   */
  PLK_STATUS_IO = 7,
  /**
   * Rust panicked; the handle arguments should be treated as unusable.
   */
  PLK_STATUS_PANIC = 8,
} PlkStatus;

/**
 * A trained six-node classifier cascade.
 */
typedef struct PlkCascade PlkCascade;

/**
 * A parsed toolpath.
 */
typedef struct PlkToolpath PlkToolpath;

/**
 * A recorded or simulated sensor trace.
 */
typedef struct PlkTrace PlkTrace;

/**
 * Simulation settings. Obtain defaults from `plk_sim_options_default`.
 */
typedef struct PlkSimOptions {
  uint64_t seed;
  double distance_cm;
  /**
   * Acoustic noise floor at 15 cm, dB.
   */
  double noise_db;
  /**
   * Magnetometer noise standard deviation, µT.
   */
  double mag_noise_ut;
  /**
   * Seconds into the toolpath at which recording starts.
   */
  double record_start_s;
  /**
   * Disable every noise source.
   */
  bool noiseless;
} PlkSimOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *plk_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer is valid until the next `plk_*` call on the same thread.
 */
const char *plk_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void plk_string_free(char *s);

/**
 * Default simulation options.
 */
struct PlkSimOptions plk_sim_options_default(void);

/**
 * Parse G-code text into a toolpath. An `; origin X.. Y.. Z..` comment sets
 * the start position; otherwise the nozzle starts at zero.
 *
 * # Safety
 * `gcode` must be a NUL-terminated string; `out` must be writable.
 */
enum PlkStatus plk_toolpath_from_gcode(const char *gcode, struct PlkToolpath **out);

/**
 * The built-in three-layer 10 mm square.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlkStatus plk_toolpath_square(struct PlkToolpath **out);

/**
 * The built-in calibration sweep, `blocks` blocks of 24 s each.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlkStatus plk_toolpath_calibration(size_t blocks, struct PlkToolpath **out);

/**
 * Number of motion segments; 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live toolpath handle.
 */
size_t plk_toolpath_segment_count(const struct PlkToolpath *t);

/**
 * Total motion time in seconds; 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live toolpath handle.
 */
double plk_toolpath_duration(const struct PlkToolpath *t);

/**
 * Render a toolpath as G-code. Free the result with `plk_string_free`.
 *
 * # Safety
 * `t` must be a live toolpath handle; `out` must be writable.
 */
enum PlkStatus plk_toolpath_to_gcode(const struct PlkToolpath *t, char **out);

/**
 * # Safety
 * `t` must be NULL or a toolpath handle not yet freed.
 */
void plk_toolpath_free(struct PlkToolpath *t);

/**
 * Simulate the sensor recording of a toolpath.
 *
 * # Safety
 * `t` must be a live toolpath handle, `opts` readable, `out` writable.
 */
enum PlkStatus plk_simulate(const struct PlkToolpath *t,
                            const struct PlkSimOptions *opts,
                            struct PlkTrace **out);

/**
 * Read a sensor CSV (`time_s,ax,bx_uT,by_uT,bz_uT`).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PlkStatus plk_trace_read_csv(const char *path, struct PlkTrace **out);

/**
 * # Safety
 * `trace` must be a live trace handle; `path` a NUL-terminated string.
 */
enum PlkStatus plk_trace_write_csv(const struct PlkTrace *trace, const char *path);

/**
 * Recorded time in seconds; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live trace handle.
 */
double plk_trace_duration(const struct PlkTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or a trace handle not yet freed.
 */
void plk_trace_free(struct PlkTrace *trace);

/**
 * Train a cascade on `trace`, labelled from the toolpath that produced it.
 * `opts` must match the options the trace was recorded with; `seed` drives
 * the train/held-out split.
 *
 * # Safety
 * Handles must be live, `opts` readable, `out` writable.
 */
enum PlkStatus plk_cascade_train(const struct PlkToolpath *t,
                                 const struct PlkTrace *trace,
                                 const struct PlkSimOptions *opts,
                                 uint64_t seed,
                                 struct PlkCascade **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PlkStatus plk_cascade_load(const char *path, struct PlkCascade **out);

/**
 * # Safety
 * `c` must be a live cascade handle; `path` a NUL-terminated string.
 */
enum PlkStatus plk_cascade_save(const struct PlkCascade *c, const char *path);

/**
 * Number of classifier nodes; 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live cascade handle.
 */
size_t plk_cascade_node_count(const struct PlkCascade *c);

/**
 * Held-out accuracy of node `index` (order: layer, axial, dir_x, dir_y,
 * header, speed).
 *
 * # Safety
 * `c` must be a live cascade handle; `out` must be writable.
 */
enum PlkStatus plk_cascade_node_accuracy(const struct PlkCascade *c, size_t index, double *out);

/**
 * # Safety
 * `c` must be NULL or a cascade handle not yet freed.
 */
void plk_cascade_free(struct PlkCascade *c);

/**
 * Classify every frame of `trace` and rebuild the toolpath. When `original`
 * is given, the reconstruction starts at its origin and `mte_percent`
 * receives the Mean Tendency Error; otherwise it starts at zero and
 * `mte_percent` receives NaN. `mte_percent` may be NULL.
 *
 * # Safety
 * `c` and `trace` must be live handles, `original` NULL or live, `out` writable.
 */
enum PlkStatus plk_reconstruct(const struct PlkCascade *c,
                               const struct PlkTrace *trace,
                               const struct PlkToolpath *original,
                               struct PlkToolpath **out,
                               double *mte_percent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRINTLEAK_H */
