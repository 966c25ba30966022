#ifndef TOFML_H
#define TOFML_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum TofmlStatus {
  TOFML_STATUS_OK = 0,
  TOFML_STATUS_NULL_POINTER = 1,
  TOFML_STATUS_INVALID_ARGUMENT = 2,
  TOFML_STATUS_INVALID_CONFIG = 3,
  TOFML_STATUS_DIMENSION_MISMATCH = 4,
  TOFML_STATUS_NUMERIC_ABORT = 5,
  TOFML_STATUS_IO = 6,
  TOFML_STATUS_FORMAT = 7,
  TOFML_STATUS_MISMATCH = 8,
  TOFML_STATUS_PANIC = 9,
} TofmlStatus;

/**
 * Simulation environment handle.
 */
typedef struct TofmlEnv TofmlEnv;

/**
 * Scalar outcome of one environment step.
 */
typedef struct TofmlStepResult {
  double reward;
  /**
   * Unclipped weighted value of learning.
   */
  double objective;
  /**
   * Mean personalised accuracy after the round.
   */
  double mean_accuracy;
  double round_time;
  bool feasible;
  bool done;
} TofmlStepResult;

/**
 * Final-episode summary of a run.
 */
typedef struct TofmlRunSummary {
  size_t episodes;
  double final_reward;
  double final_reward_ma20;
  double final_vol_ma20;
  double final_accuracy;
} TofmlRunSummary;

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t tofml_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tofml_version(void);

/**
 * Builds an environment from a TOML configuration (empty string for the
 * defaults) and stores the handle in `*out`.
 *
 * # Safety
 * `config_toml` must be a valid C string; `out` must be valid for writes.
 */
enum TofmlStatus tofml_env_new(const char *config_toml, struct TofmlEnv **out);

/**
 * Releases an environment. Null is ignored.
 *
 * # Safety
 * `env` must come from [`tofml_env_new`] and not be used afterwards.
 */
void tofml_env_free(struct TofmlEnv *env);

/**
 * Number of devices, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t tofml_env_num_devices(const struct TofmlEnv *env);

/**
 * Length of the encoded state vector, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t tofml_env_state_len(const struct TofmlEnv *env);

/**
 * Starts an episode and writes the encoded initial state.
 *
 * # Safety
 * `env` must be a live handle; `state` must be valid for `state_len` writes.
 */
enum TofmlStatus tofml_env_reset(struct TofmlEnv *env,
                                 uint64_t seed,
                                 double *state,
                                 size_t state_len);

/**
 * Executes one round. `mask`, `power` and `freq` hold one entry per
 * device; a nonzero mask byte schedules the device. The next encoded
 * state is written to `next_state`.
 *
 * # Safety
 * `env` must be a live handle, the input arrays valid for `devices`
 * reads, `result` valid for a write and `next_state` for `state_len`
 * writes.
 */
enum TofmlStatus tofml_env_step(struct TofmlEnv *env,
                                const uint8_t *mask,
                                const double *power,
                                const double *freq,
                                size_t devices,
                                struct TofmlStepResult *result,
                                double *next_state,
                                size_t state_len);

/**
 * Runs a full experiment. Files are written under `out_dir` unless it is
 * null.
 *
 * # Safety
 * `config_toml` must be a valid C string, `out_dir` null or a valid C
 * string, and `summary` null or valid for a write.
 */
enum TofmlStatus tofml_run_experiment(const char *config_toml,
                                      const char *out_dir,
                                      struct TofmlRunSummary *summary);

/**
 * Weighted value of learning of one device:
 * `η1·V^A − η2·V^T − η3·V^E`.
 */
double tofml_vol(double accuracy,
                 double acc_req,
                 double round_time,
                 double t_max,
                 double energy,
                 double e_max,
                 double eta_accuracy,
                 double eta_time,
                 double eta_energy);

/**
 * Advances ages of update in place: scheduled devices reset to 1, the
 * others grow by 1.
 *
 * # Safety
 * `ages` and `mask` must be valid for `devices` elements.
 */
enum TofmlStatus tofml_update_aou(uint64_t *ages, const uint8_t *mask, size_t devices);

#endif  /* TOFML_H */
