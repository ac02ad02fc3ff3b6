/* C interface of the riskinf library. */

#ifndef RISKINF_H
#define RISKINF_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Where the optimal weight lands.
 */
typedef enum {
  RI_BOUNDARY_INTERIOR = 0,
  RI_BOUNDARY_AT_ZERO = 1,
  RI_BOUNDARY_AT_ONE = 2,
  RI_BOUNDARY_INFEASIBLE = 3,
} RiBoundary;

/**
 * Risk kinds addressable through the plain-C entry points.
 */
typedef enum {
  RI_RISK_KIND_VARIANCE = 0,
  RI_RISK_KIND_CVAR = 1,
  RI_RISK_KIND_WMD = 2,
} RiRiskKind;

/**
 * Call outcome.
 */
typedef enum {
  RI_STATUS_OK = 0,
  RI_STATUS_NULL_POINTER = 1,
  RI_STATUS_INVALID_ARGUMENT = 2,
  RI_STATUS_PARSE_ERROR = 3,
  RI_STATUS_UNSUPPORTED = 4,
  RI_STATUS_NUMERICAL_FAILURE = 5,
} RiStatus;

/**
 * Opaque scenario-set handle.
 */
typedef struct RiScenarioSet RiScenarioSet;

/**
 * Mirror of a risk evaluation.
 */
typedef struct {
  double value;
  double eta_star;
  double bracket_lo;
  double bracket_hi;
  uint32_t iterations;
} RiRiskEvaluation;

/**
 * Mirror of the closed-form two-asset solution.
 */
typedef struct {
  double a_sharp;
  double lambda_sharp;
  double eta_sharp;
  double theta;
  double c_p;
  double value;
  RiBoundary boundary;
} RiGaussianSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a scenario set from parallel `values`/`probs` arrays of length `len`.
 *
 * # Safety
 * `values` and `probs` must point to `len` readable doubles; `out` must be
 * a valid out-pointer. The returned handle must be freed with
 * [`ri_scenario_free`].
 */
RiStatus ri_scenario_new(const double *values,
                         const double *probs,
                         uintptr_t len,
                         RiScenarioSet **out);

/**
 * Parses a `value,prob` CSV (with header) from a NUL-terminated UTF-8 string.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` as in
 * [`ri_scenario_new`].
 */
RiStatus ri_scenario_from_csv(const char *text, RiScenarioSet **out);

/**
 * Draws `n` equiprobable Normal(mean, std^2) atoms; identical seeds give
 * identical sets.
 *
 * # Safety
 * `out` as in [`ri_scenario_new`].
 */
RiStatus ri_scenario_sample_normal(double mean,
                                   double std,
                                   uintptr_t n,
                                   uint64_t seed,
                                   RiScenarioSet **out);

/**
 * Maps a scenario set through `x -> scale*x + shift` into a new handle.
 *
 * # Safety
 * `set` must be a live handle from this library; `out` as in
 * [`ri_scenario_new`].
 */
RiStatus ri_scenario_affine(const RiScenarioSet *set,
                            double scale,
                            double shift,
                            RiScenarioSet **out);

/**
 * Number of atoms in a scenario set; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle from this library.
 */
uintptr_t ri_scenario_len(const RiScenarioSet *set);

/**
 * Releases a scenario handle. Null is a no-op.
 *
 * # Safety
 * `set` must be null or a handle returned by this library, not yet freed.
 */
void ri_scenario_free(RiScenarioSet *set);

/**
 * Generic minimization of `eta -> E[rho(X, eta)]`. `p` is ignored for the
 * variance kind.
 *
 * # Safety
 * `set` must be a live handle; `out` a valid out-pointer.
 */
RiStatus ri_risk_evaluate(RiRiskKind kind,
                          double p,
                          const RiScenarioSet *set,
                          double tol,
                          RiRiskEvaluation *out);

/**
 * Generic minimization for the optimized-certainty-equivalent kernel with
 * a piecewise-linear utility (`n_slopes == n_breakpoints + 1`).
 *
 * # Safety
 * `breakpoints`/`slopes` must point to the stated number of readable
 * doubles; `set` and `out` as in [`ri_risk_evaluate`].
 */
RiStatus ri_risk_evaluate_oce(const double *breakpoints,
                              uintptr_t n_breakpoints,
                              const double *slopes,
                              uintptr_t n_slopes,
                              const RiScenarioSet *set,
                              double tol,
                              RiRiskEvaluation *out);

/**
 * Closed-form risk for variance/cvar/wmd.
 *
 * # Safety
 * `set` must be a live handle; `out` a valid out-pointer.
 */
RiStatus ri_risk_closed_form(RiRiskKind kind,
                             double p,
                             const RiScenarioSet *set,
                             RiRiskEvaluation *out);

/**
 * Safety measure `S(X) = -Risk(-X)`.
 *
 * # Safety
 * `set` must be a live handle; `out` a valid out-pointer.
 */
RiStatus ri_safety_measure(RiRiskKind kind,
                           double p,
                           const RiScenarioSet *set,
                           double tol,
                           double *out);

/**
 * Standard Normal quantile.
 *
 * # Safety
 * `out` must be a valid out-pointer.
 */
RiStatus ri_normal_quantile(double q, double *out);

/**
 * Standard Normal CVaR coefficient `phi(quantile(p)) / (1 - p)`.
 *
 * # Safety
 * `out` must be a valid out-pointer.
 */
RiStatus ri_normal_cvar_coeff(double p, double *out);

/**
 * Closed-form two-asset portfolio under a CVaR bound. Infeasible problems
 * come back with `boundary == Infeasible` and NaN decision fields, not an
 * error status.
 *
 * # Safety
 * `out` must be a valid out-pointer.
 */
RiStatus ri_gaussian_solve(double xi0,
                           double mean,
                           double sigma,
                           double p,
                           double gamma,
                           RiGaussianSolution *out);

/**
 * Reference-table reproduction as a CSV string (see the library docs for
 * the column layout). Free the string with [`ri_string_free`].
 *
 * # Safety
 * `out` must be a valid out-pointer.
 */
RiStatus ri_table3_csv(double tolerance_scale, char **out);

/**
 * Solves a risk-constrained linear payoff problem given as JSON and returns
 * the result as JSON (the same schemas the CLI uses). Free the string with
 * [`ri_string_free`].
 *
 * # Safety
 * `problem_json` must be a valid NUL-terminated string; `out_json` a valid
 * out-pointer.
 */
RiStatus ri_solve_json(const char *problem_json, char **out_json);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ri_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RISKINF_H */
