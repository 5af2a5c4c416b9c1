#ifndef NOMA_SLICE_H
#define NOMA_SLICE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NslAlgorithm {
  NSL_ALGORITHM_FEASIBLE = 0,
  NSL_ALGORITHM_BCD = 1,
} NslAlgorithm;

typedef enum NslScheme {
  NSL_SCHEME_OMA = 0,
  NSL_SCHEME_NOMA = 1,
} NslScheme;

/**
 * Status codes returned by every fallible call.
 */
typedef enum NslStatus {
  NSL_STATUS_OK = 0,
  NSL_STATUS_INVALID_ARGUMENT = 1,
  NSL_STATUS_NULL_POINTER = 2,
  NSL_STATUS_INFEASIBLE = 3,
  NSL_STATUS_INFEASIBLE_LATENCY = 4,
  NSL_STATUS_UNDEFINED_INTERFERENCE_LIMITED = 5,
  NSL_STATUS_OUT_OF_MODEL = 6,
  NSL_STATUS_TABLE_EXHAUSTED = 7,
  NSL_STATUS_NOT_COVERED = 8,
  NSL_STATUS_TABLE_MISMATCH = 9,
  NSL_STATUS_TABLE_FORMAT = 10,
  NSL_STATUS_CONFIG = 11,
  NSL_STATUS_IO = 12,
  NSL_STATUS_BUFFER_TOO_SMALL = 13,
  NSL_STATUS_PANIC = 14,
} NslStatus;

/**
 * Result of one allocation.
 */
typedef struct NslAllocation NslAllocation;

/**
 * Scenario configuration.
 */
typedef struct NslConfig NslConfig;

/**
 * Outage look-up table.
 */
typedef struct NslTable NslTable;

/**
 * Monte Carlo outage estimate.
 */
typedef struct NslOutageEstimate {
  double p_hat;
  uint64_t outages;
  uint64_t trials;
  /**
   * Three binomial standard errors.
   */
  double ci_halfwidth;
} NslOutageEstimate;

/**
 * Scalar summary of an allocation.
 */
typedef struct NslAllocationSummary {
  size_t frequencies;
  size_t urllc_frequencies;
  double total_w;
  double embb_w;
  double urllc_w;
  double embb_rate;
  double urllc_rate;
  double table_power_dbm;
  struct NslOutageEstimate evidence;
  bool sic_satisfied;
  size_t iterations;
} NslAllocationSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * excluding the terminator, so a caller can size a second attempt.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nsl_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nsl_version(void);

/**
 * Water-filling over `n` parallel channels with positive `gains` for a
 * total of `target_bits`. Writes `n` powers and the water level.
 *
 * # Safety
 * `gains` and `powers` must point to `n` doubles; `level` may be null.
 */
enum NslStatus nsl_waterfill(const double *gains,
                             size_t n,
                             double target_bits,
                             double *powers,
                             double *level);

/**
 * Minimum eMBB powers reaching `rate` on average over `n` channels.
 *
 * # Safety
 * `snr` and `powers` must point to `n` doubles.
 */
enum NslStatus nsl_embb_power(const double *snr, size_t n, double rate, double *powers);

/**
 * Minimum URLLC powers letting the eMBB receiver cancel the URLLC stream.
 *
 * # Safety
 * `embb_power`, `embb_snr` and `powers` must point to `n` doubles.
 */
enum NslStatus nsl_sic_power(enum NslScheme scheme_kind,
                             const double *embb_power,
                             const double *embb_snr,
                             size_t n,
                             double rate,
                             double *powers);

/**
 * Interference-limited URLLC power bound.
 *
 * # Safety
 * `embb_power` and `powers` must point to `n` doubles.
 */
enum NslStatus nsl_il_power(const double *embb_power, size_t n, double rate, double *powers);

/**
 * Closed-form single-resource URLLC power for outage `epsilon`.
 *
 * # Safety
 * `power` must be a valid pointer.
 */
enum NslStatus nsl_single_freq_power(double rate,
                                     double mean_snr,
                                     double epsilon,
                                     double embb_power,
                                     double *power);

/**
 * Distance [m] at which the mean SNR equals `mean_snr_db`, default geometry.
 *
 * # Safety
 * `distance_m` must be a valid pointer.
 */
enum NslStatus nsl_distance_from_snr_db(double mean_snr_db, double *distance_m);

/**
 * Linear mean SNR per watt at `distance_m`, default geometry.
 *
 * # Safety
 * `mean_snr` must be a valid pointer.
 */
enum NslStatus nsl_mean_snr_from_distance(double distance_m, double *mean_snr);

/**
 * Monte Carlo outage estimate for `n` URLLC frequencies.
 *
 * # Safety
 * `urllc_power` and `embb_power` must point to `n` doubles; `out` must be valid.
 */
enum NslStatus nsl_estimate_outage(const double *urllc_power,
                                   const double *embb_power,
                                   size_t n,
                                   double mean_snr,
                                   double rate,
                                   uint64_t trials,
                                   uint64_t seed,
                                   struct NslOutageEstimate *out);

/**
 * Builds a table on the power grid `power_min_dbm..=power_max_dbm` with
 * interference rows on the same grid plus the interference-free row.
 *
 * # Safety
 * `table` must be a valid pointer; the new handle is written there.
 */
enum NslStatus nsl_table_build(double mean_snr,
                               size_t freqs,
                               double rate,
                               uint64_t trials,
                               uint64_t seed,
                               double power_min_dbm,
                               double power_max_dbm,
                               double power_step_db,
                               struct NslTable **table);

/**
 * Loads a table saved in either encoding.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `table` a valid pointer.
 */
enum NslStatus nsl_table_load(const char *path, struct NslTable **table);

/**
 * Saves a table; a `.bin` or `.nsot` extension selects the binary encoding.
 *
 * # Safety
 * `table` must come from this library; `path` must be NUL-terminated.
 */
enum NslStatus nsl_table_save(const struct NslTable *table, const char *path);

/**
 * Smallest grid power [dBm] meeting `epsilon` at interference `embb_power` watts.
 *
 * # Safety
 * `table` must come from this library; `power_dbm` must be valid.
 */
enum NslStatus nsl_table_min_feasible_power(const struct NslTable *table,
                                            double embb_power,
                                            double epsilon,
                                            double *power_dbm);

/**
 * Tabulated outage at grid point (`power_dbm`, `interference_dbm`); pass
 * `has_interference = false` for the interference-free row.
 *
 * # Safety
 * `table` must come from this library; `p_hat` must be valid.
 */
enum NslStatus nsl_table_value(const struct NslTable *table,
                               double power_dbm,
                               bool has_interference,
                               double interference_dbm,
                               double *p_hat);

/**
 * # Safety
 * `table` must be null or come from this library and not be used afterwards.
 */
void nsl_table_free(struct NslTable *table);

/**
 * Default configuration.
 */
struct NslConfig *nsl_config_default(void);

/**
 * Parses a TOML configuration; missing fields take their defaults.
 *
 * # Safety
 * `toml` must be NUL-terminated; `config` must be valid.
 */
enum NslStatus nsl_config_from_toml(const char *toml, struct NslConfig **config);

/**
 * Overrides the trial counts; zero leaves a count unchanged.
 *
 * # Safety
 * `config` must come from this library.
 */
enum NslStatus nsl_config_set_trials(struct NslConfig *config,
                                     uint64_t table_trials,
                                     uint64_t crn_trials,
                                     uint64_t evidence_trials);

/**
 * Sets the outage target and base seed.
 *
 * # Safety
 * `config` must come from this library.
 */
enum NslStatus nsl_config_set_target(struct NslConfig *config, double epsilon, uint64_t seed);

/**
 * # Safety
 * `config` must be null or come from this library and not be used afterwards.
 */
void nsl_config_free(struct NslConfig *config);

/**
 * Allocates fading realization `drop` for users at the given distances.
 * `scheme` is `noma`, `noma-<k>` or `o-<k>`. `table` may be null, in which
 * case the needed table rows are estimated on the fly.
 *
 * # Safety
 * `config` must come from this library; `table` must be null or come from
 * this library; `scheme` must be NUL-terminated; `out` must be valid.
 */
enum NslStatus nsl_allocate(const struct NslConfig *config,
                            const char *scheme_name,
                            enum NslAlgorithm algorithm,
                            double urllc_distance_m,
                            double embb_distance_m,
                            uint64_t drop_index,
                            const struct NslTable *table,
                            struct NslAllocation **out);

/**
 * # Safety
 * `allocation` must come from this library; `out` must be valid.
 */
enum NslStatus nsl_allocation_summary(const struct NslAllocation *allocation,
                                      struct NslAllocationSummary *out);

/**
 * Copies per-frequency eMBB, URLLC and SIC-floor powers (each `len`
 * entries, `len` equal to the grid size). Any output may be null.
 *
 * # Safety
 * `allocation` must come from this library; non-null outputs must point to
 * `len` doubles.
 */
enum NslStatus nsl_allocation_powers(const struct NslAllocation *allocation,
                                     double *embb,
                                     double *urllc,
                                     double *sic,
                                     size_t len);

/**
 * Copies the allocation as JSON into `buf`. Returns the JSON length
 * excluding the terminator; if that is `>= len` the output was truncated.
 *
 * # Safety
 * `allocation` must come from this library; `buf` must be null or point to
 * `len` writable bytes.
 */
size_t nsl_allocation_json(const struct NslAllocation *allocation, char *buf, size_t len);

/**
 * # Safety
 * `allocation` must be null or come from this library and not be used afterwards.
 */
void nsl_allocation_free(struct NslAllocation *allocation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOMA_SLICE_H */
