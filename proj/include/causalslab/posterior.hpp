#pragma once

// Large-sample-limit posterior over scaled confounding coefficients.
//
// For fixed C~ the likelihood concentrates on Theta*(C~, S) = (B~, V), so the
// marginal over Theta reduces by Laplace's method to
//
//   log p(C~ | S) = -1/2 log det(-H) + log p(Theta*) + log p(C~) + const,
//
// where H is the per-datapoint Hessian of the log-likelihood with respect to
// Theta = (b~_pq lexicographic over p > q, then v_1 .. v_n), with C~ held
// fixed, evaluated at Theta*.

#include <atomic>
#include <span>

#include "causalslab/sem_model.hpp"
#include "causalslab/theta_recovery.hpp"

namespace causalslab {

struct PriorConfig {
  double w_spike = 0.5;
  double w_slab = 0.5;
  double v_spike = 1e-4;
  double v_slab = 1.0;
  // Support of the normalised log-uniform prior on each noise variance.
  double v_min = 1e-6;
  double v_max = 1e6;
  // Standard deviation of the Gaussian prior on each free entry of C~.
  double confounder_sd = 1.0;

  void validate() const;
};

/// -1/2 (tr(Sigma^-1 S) + log det Sigma), Sigma = implied_covariance(params).
double log_likelihood_per_datapoint(const SemParameters& params, const CovarianceMatrix& s_hat);

/// log(w_spike N(x; 0, v_spike) + w_slab N(x; 0, v_slab)).
double spike_slab_log_density(double x, const PriorConfig& cfg);

/// Spike-and-slab on every b~_ij (i > j) plus the truncated log-uniform prior
/// on every v_i. Returns -infinity when a variance leaves [v_min, v_max].
double log_prior_theta(const RecoveredTheta& theta, const PriorConfig& cfg);

/// Independent N(0, confounder_sd^2) over the free coefficients.
double log_prior_confounders(std::span<const double> coefficients, const PriorConfig& cfg);
double log_prior_confounders(const Matrix& c_tilde, const ConfounderLayout& layout,
                             const PriorConfig& cfg);

/// Number of Theta coordinates, n(n+1)/2.
int theta_dimension(int n);
/// Position of b~_pq (p > q) in the Theta coordinate vector.
int theta_b_index(int p, int q);
/// Position of v_r in the Theta coordinate vector.
int theta_v_index(int n, int r);

/// Negative per-datapoint Hessian -H at the maximum-likelihood point, from
/// Delta = I - B~, Omega = I + C~C~^T, Sigma~ = Delta^-1 Omega Delta^-T and
/// K~ = Delta^T Omega^-1 Delta.
Matrix hessian(const RecoveredTheta& theta, const Matrix& c_tilde);

/// The same matrix written in terms of Q = chol(S) and L = chol(Omega).
Matrix hessian_cholesky_form(const RecoveredTheta& theta, const Matrix& c_tilde,
                             const CovarianceMatrix& s_hat);

/// Counters for points the posterior maps to -infinity. Shared between
/// concurrent evaluators.
struct PosteriorDiagnostics {
  std::atomic<long> non_pd_hessian{0};
  std::atomic<long> degenerate_recovery{0};
};

/// -1/2 log det(-H) + log p(Theta*): the part of the log posterior that
/// depends on the data. Returns -infinity on a non-PD Hessian.
double log_laplace_term(const Matrix& c_tilde, const CovarianceMatrix& s_hat, const PriorConfig& cfg,
                        PosteriorDiagnostics* diagnostics = nullptr);

/// Just -1/2 log det(-H).
double log_hessian_term(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                        PosteriorDiagnostics* diagnostics = nullptr);

/// Unnormalised log p(C~ | S).
double log_posterior_confounders(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                                 const PriorConfig& cfg, const ConfounderLayout& layout,
                                 PosteriorDiagnostics* diagnostics = nullptr);

/// Convenience overload with every pair free.
double log_posterior_confounders(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                                 const PriorConfig& cfg);

}  // namespace causalslab
