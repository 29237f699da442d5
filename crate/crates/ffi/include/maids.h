#ifndef MAIDS_H
#define MAIDS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MaidsStatus {
  MAIDS_STATUS_OK = 0,
  MAIDS_STATUS_NULL_POINTER = 1,
  MAIDS_STATUS_INVALID_UTF8 = 2,
  MAIDS_STATUS_INVALID_ARGUMENT = 3,
  MAIDS_STATUS_JSON = 4,
  MAIDS_STATUS_IO = 5,
  MAIDS_STATUS_ENUMERATION_TOO_LARGE = 6,
  MAIDS_STATUS_DEGENERATE_POSTERIOR = 7,
  MAIDS_STATUS_SOLVER = 8,
  MAIDS_STATUS_OUT_OF_RANGE = 9,
  MAIDS_STATUS_PANIC = 10,
} MaidsStatus;

/**
 * Parsed experiment configuration.
 */
typedef struct MaidsConfig MaidsConfig;

/**
 * Zero-sum tabular Markov game.
 */
typedef struct MaidsEnv MaidsEnv;

/**
 * Finished experiment together with the configuration that produced it.
 */
typedef struct MaidsReport MaidsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *maids_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t maids_last_error(char *buf, size_t len);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or come from this library and not be freed twice.
 */
void maids_string_free(char *s);

/**
 * Regret bound for theorem `thm` (1 to 4), natural log. `information`
 * and `epsilon` are used by theorem 3 only.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MaidsStatus maids_bound(uint8_t thm,
                             size_t states,
                             size_t actions_max,
                             size_t actions_min,
                             size_t horizon,
                             size_t episodes,
                             size_t players,
                             double information,
                             double epsilon,
                             double *out);

/**
 * Parses a zero-sum environment from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MaidsStatus maids_env_from_json(const char *json, struct MaidsEnv **out);

/**
 * # Safety
 * `env` must be null or a live handle.
 */
void maids_env_free(struct MaidsEnv *env);

/**
 * Writes horizon, states and the two action counts.
 *
 * # Safety
 * `env` must be a live handle and the outputs valid pointers.
 */
enum MaidsStatus maids_env_dims(const struct MaidsEnv *env,
                                size_t *horizon,
                                size_t *states,
                                size_t *actions_max,
                                size_t *actions_min);

/**
 * Nash value at the initial state.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum MaidsStatus maids_env_nash_value(const struct MaidsEnv *env, double *out);

/**
 * Loads an experiment config from a file; relative environment paths
 * resolve against the file's directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MaidsStatus maids_config_load(const char *path, struct MaidsConfig **out);

/**
 * Parses an experiment config from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MaidsStatus maids_config_from_json(const char *json, struct MaidsConfig **out);

/**
 * Overrides the episode count.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum MaidsStatus maids_config_set_episodes(struct MaidsConfig *config, size_t episodes);

/**
 * # Safety
 * `config` must be null or a live handle.
 */
void maids_config_free(struct MaidsConfig *config);

/**
 * Runs the experiment. The config handle stays owned by the caller.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum MaidsStatus maids_run(const struct MaidsConfig *config, struct MaidsReport **out);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
void maids_report_free(struct MaidsReport *report);

/**
 * # Safety
 * `report` must be a live handle and the outputs valid pointers.
 */
enum MaidsStatus maids_report_shape(const struct MaidsReport *report,
                                    size_t *algorithms,
                                    size_t *episodes);

/**
 * Mean cumulative regret over prior draws after `episode + 1` episodes.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum MaidsStatus maids_report_cum_regret(const struct MaidsReport *report,
                                         size_t algorithm,
                                         size_t episode,
                                         double *out);

/**
 * Final cumulative regret: mean and standard error across prior draws.
 *
 * # Safety
 * `report` must be a live handle and the outputs valid pointers.
 */
enum MaidsStatus maids_report_final_regret(const struct MaidsReport *report,
                                           size_t algorithm,
                                           double *mean,
                                           double *stderr);

/**
 * Report as JSON. Free the result with `maids_string_free`.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum MaidsStatus maids_report_json(const struct MaidsReport *report, char **out);

/**
 * Per-episode CSV. Free the result with `maids_string_free`.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum MaidsStatus maids_report_csv(const struct MaidsReport *report, char **out);

/**
 * Writes `regret.csv` and `report.json` into `dir`.
 *
 * # Safety
 * `report` must be a live handle and `dir` a NUL-terminated string.
 */
enum MaidsStatus maids_report_write(const struct MaidsReport *report, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAIDS_H */
