#ifndef PMCYCLE_H
#define PMCYCLE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PmcStatus {
  PMC_STATUS_OK = 0,
  PMC_STATUS_NULL_POINTER = 1,
  PMC_STATUS_INVALID_ARGUMENT = 2,
  PMC_STATUS_PARSE = 3,
  PMC_STATUS_VALIDATION = 4,
  PMC_STATUS_SOLVER = 5,
  PMC_STATUS_NOT_CONVERGED = 6,
  PMC_STATUS_PANIC = 7,
} PmcStatus;

/**
 * Opaque result of a bilevel run.
 */
typedef struct PmcBilevel PmcBilevel;

/**
 * Opaque validated scenario.
 */
typedef struct PmcScenario PmcScenario;

/**
 * One visit's local solution.
 */
typedef struct PmcLocalSolution {
  double total_time;
  double inner_exit_time;
  double lambda_phi[2];
  double lambda_psi[2];
  double lambda_r;
  /**
   * All verification checks passed.
   */
  bool verified;
} PmcLocalSolution;

/**
 * Options for `pmc_run_bilevel`. Obtain defaults from
 * `pmc_bilevel_options_default`.
 */
typedef struct PmcBilevelOptions {
  double alpha0;
  double decay;
  double tol_grad;
  double tol_uncertainty;
  size_t max_cycles;
  size_t nodes;
  double dt;
  bool coupling;
} PmcBilevelOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next pmcycle call on the same thread.
 */
const char *pmc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pmc_version(void);

/**
 * Parses and validates scenario TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PmcStatus pmc_scenario_parse(const char *text, struct PmcScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PmcStatus pmc_scenario_load(const char *path, struct PmcScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library, freed once.
 */
void pmc_scenario_free(struct PmcScenario *scenario);

/**
 * Number of targets, 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t pmc_scenario_num_targets(const struct PmcScenario *scenario);

/**
 * Visits per cycle, 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t pmc_scenario_num_visits(const struct PmcScenario *scenario);

/**
 * Solves the draining problem of target `target_id` entered at polar angle
 * `phi` and left at inner-circle angle `psi`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum PmcStatus pmc_solve_local(const struct PmcScenario *scenario,
                               uint32_t target_id,
                               double phi,
                               double psi,
                               double arrival_uncertainty,
                               size_t nodes,
                               struct PmcLocalSolution *out);

struct PmcBilevelOptions pmc_bilevel_options_default(void);

/**
 * Optimizes the boundary angles from their straight-line initialization.
 * A run that exhausts `max_cycles` still produces a handle and returns
 * `NotConverged`.
 *
 * # Safety
 * `scenario` must be a live handle, `options` null (defaults) or valid, and
 * `out` a valid pointer.
 */
enum PmcStatus pmc_run_bilevel(const struct PmcScenario *scenario,
                               const struct PmcBilevelOptions *options,
                               struct PmcBilevel **out);

/**
 * # Safety
 * `result` must be null or a handle from `pmc_run_bilevel`, freed once.
 */
void pmc_bilevel_free(struct PmcBilevel *result);

/**
 * Period of the last cycle, NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double pmc_bilevel_period(const struct PmcBilevel *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
size_t pmc_bilevel_cycles(const struct PmcBilevel *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
bool pmc_bilevel_converged(const struct PmcBilevel *result);

/**
 * Copies the final entrance and departure angles into `phi` and `psi`,
 * each of length `len`, which must equal the visits per cycle.
 *
 * # Safety
 * `result` must be a live handle; `phi` and `psi` must hold `len` doubles.
 */
enum PmcStatus pmc_bilevel_angles(const struct PmcBilevel *result,
                                  double *phi,
                                  double *psi,
                                  size_t len);

/**
 * Steady-state period of the greedy policy.
 *
 * # Safety
 * `scenario` must be a live handle and `period` a valid pointer.
 */
enum PmcStatus pmc_greedy_period(const struct PmcScenario *scenario,
                                 double dt,
                                 size_t max_cycles,
                                 double *period);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMCYCLE_H */
