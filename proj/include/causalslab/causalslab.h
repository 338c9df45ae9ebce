/*
 * C interface to the causalslab library.
 *
 * Objects are opaque handles created by cslab_*_from_* / cslab_*_sample and
 * released with the matching *_free function. Every fallible call returns a
 * cslab_status; on failure a human-readable message is available from
 * cslab_last_error() on the same thread until the next failing call.
 * Strings handed out through char** parameters are owned by the caller and
 * must be released with cslab_string_free.
 *
 * Variable, pair and parameter indices are 1-based throughout this header.
 */
#ifndef CAUSALSLAB_H
#define CAUSALSLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(CAUSALSLAB_BUILDING)
#define CSLAB_API __attribute__((visibility("default")))
#else
#define CSLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cslab_status {
  CSLAB_OK = 0,
  CSLAB_INVALID_ARGUMENT = 1,
  CSLAB_NOT_POSITIVE_DEFINITE = 2,
  CSLAB_DEGENERATE_DATA = 3,
  CSLAB_NUMERICAL_DEGENERACY = 4,
  CSLAB_WEAK_INSTRUMENT = 5,
  CSLAB_INSUFFICIENT_SAMPLES = 6,
  CSLAB_SAMPLER_CONFIGURATION = 7,
  CSLAB_SAMPLER_MAX_ITERATIONS = 8,
  CSLAB_IO = 9,
  CSLAB_INTERNAL = 100
} cslab_status;

CSLAB_API const char* cslab_last_error(void);
CSLAB_API const char* cslab_version(void);
CSLAB_API const char* cslab_status_name(cslab_status status);
CSLAB_API void cslab_string_free(char* s);

/* Priors. Defaults: w_spike = w_slab = 0.5, v_spike = 1e-4, v_slab = 1,
 * log-uniform variance prior on [1e-6, 1e6], confounder_sd = 1. */
typedef struct cslab_prior_config {
  double w_spike;
  double w_slab;
  double v_spike;
  double v_slab;
  double v_min;
  double v_max;
  double confounder_sd;
} cslab_prior_config;

CSLAB_API void cslab_prior_config_init(cslab_prior_config* cfg);

/* Nested sampler. steps_per_replacement = 0 selects 5 x dimension. */
typedef struct cslab_sampler_config {
  int n_live;
  double termination_fraction;
  long long max_iterations;
  uint64_t seed;
  int steps_per_replacement;
} cslab_sampler_config;

CSLAB_API void cslab_sampler_config_init(cslab_sampler_config* cfg);

/* ------------------------------------------------------------------------ */
/* Model: a covariance matrix plus the confounder pairs left free.           */

typedef struct cslab_model cslab_model;

/* Named scenario "a".."f" or a scenario JSON document on disk. The model
 * holds the exact population covariance and the scenario's free pairs. */
CSLAB_API cslab_status cslab_model_from_scenario(const char* name_or_path, cslab_model** out);
/* Covariance CSV: n rows of n numbers. Every pair is free. */
CSLAB_API cslab_status cslab_model_from_covariance_csv(const char* path, cslab_model** out);
/* Raw observations, one row per sample; the model keeps the sample count. */
CSLAB_API cslab_status cslab_model_from_data_csv(const char* path, cslab_model** out);
/* Row-major n x n covariance. Every pair is free. */
CSLAB_API cslab_status cslab_model_from_values(size_t n, const double* row_major, cslab_model** out);
/* Finite-sample draws from a scenario's ground truth, returned as a model
 * over their sample covariance. */
CSLAB_API cslab_status cslab_model_from_simulation(const char* name_or_path, int n_samples, uint64_t seed,
                                                   cslab_model** out);
CSLAB_API void cslab_model_free(cslab_model* model);

CSLAB_API size_t cslab_model_dim(const cslab_model* model);
/* Number of observations behind the covariance; 0 for population covariances. */
CSLAB_API long long cslab_model_sample_count(const cslab_model* model);
CSLAB_API cslab_status cslab_model_covariance(const cslab_model* model, double* out_row_major);
/* "2-3,1-3", "all" or "none". */
CSLAB_API cslab_status cslab_model_set_free_pairs(cslab_model* model, const char* pairs);
CSLAB_API cslab_status cslab_model_free_pairs(const cslab_model* model, char** out);
CSLAB_API cslab_status cslab_model_covariance_csv(const cslab_model* model, char** out);
/* Scenario parameter document, or "null" when the model has no scenario. */
CSLAB_API cslab_status cslab_model_parameters_json(const cslab_model* model, char** out);

/* ------------------------------------------------------------------------ */
/* Posterior over the free confounding coefficients.                         */

typedef struct cslab_posterior cslab_posterior;

CSLAB_API cslab_status cslab_posterior_sample(const cslab_model* model, const cslab_prior_config* prior,
                                              const cslab_sampler_config* sampler, cslab_posterior** out);
CSLAB_API void cslab_posterior_free(cslab_posterior* posterior);

CSLAB_API double cslab_posterior_log_evidence(const cslab_posterior* posterior);
CSLAB_API double cslab_posterior_log_evidence_error(const cslab_posterior* posterior);
CSLAB_API size_t cslab_posterior_draw_count(const cslab_posterior* posterior);
CSLAB_API double cslab_posterior_effective_sample_size(const cslab_posterior* posterior);

/* target: "b32", "b3_2" or "v2". */
CSLAB_API cslab_status cslab_posterior_interval_mass(const cslab_posterior* posterior, const char* target,
                                                     double lo, double hi, double* out);
CSLAB_API cslab_status cslab_posterior_json(const cslab_posterior* posterior, char** out);

/* intervals holds n_intervals (lo, hi) pairs. bandwidth <= 0 selects
 * Silverman's rule. Any of the output pointers may be NULL. */
CSLAB_API cslab_status cslab_posterior_summary(const cslab_posterior* posterior, const char* target,
                                               const double* intervals, size_t n_intervals, int bins,
                                               double bandwidth, char** summary_json, char** histogram_csv,
                                               char** kde_csv);

/* ------------------------------------------------------------------------ */
/* Analyses.                                                                 */

/* IV and LCD estimates, partial correlation of (iv, effect) given cause, and
 * the Fisher-z test. n_samples <= 0 uses the model's sample count (if any). */
CSLAB_API cslab_status cslab_baseline_json(const cslab_model* model, int iv, int cause, int effect,
                                           long long n_samples, double alpha, char** out);

/* orderings: "1>2>3;1>3>2" or "all". */
CSLAB_API cslab_status cslab_compare_orderings_json(const cslab_model* model, const char* orderings,
                                                    const cslab_prior_config* prior,
                                                    const cslab_sampler_config* sampler, int workers,
                                                    char** out);
CSLAB_API cslab_status cslab_evidence_sweep_json(const cslab_model* model, const char* orderings,
                                                 const double* v_spikes, size_t count,
                                                 const cslab_prior_config* prior,
                                                 const cslab_sampler_config* sampler, int workers, char** out);

/* Grid over the two coefficients of pair (pair_j, pair_i); all other
 * confounders are held at zero. */
CSLAB_API cslab_status cslab_grid_csv(const cslab_model* model, const cslab_prior_config* prior, int pair_j,
                                      int pair_i, double lo, double hi, int resolution, int hessian_only,
                                      char** out);

CSLAB_API cslab_status cslab_spike_sweep_csv(const cslab_model* model, const double* v_spikes, size_t count,
                                             const cslab_prior_config* prior,
                                             const cslab_sampler_config* sampler, const char* target,
                                             const double* intervals, size_t n_intervals, int workers,
                                             char** out);

/* Writes via a temporary file and rename. */
CSLAB_API cslab_status cslab_write_file_atomic(const char* path, const char* contents);

#ifdef __cplusplus
}
#endif

#endif /* CAUSALSLAB_H */
