#pragma once

// Classical point estimators and the Fisher-z partial-correlation test.
// Variable indices are 0-based.

#include <optional>

#include "causalslab/sem_model.hpp"

namespace causalslab {

/// Cov(iv, effect) / Cov(iv, cause). Throws Error(WeakInstrument) when
/// |Cov(iv, cause)| <= 1e-12.
double iv_estimate(const CovarianceMatrix& s, int iv, int cause, int effect);

/// Cov(cause, effect) / Var(cause).
double lcd_estimate(const CovarianceMatrix& s, int cause, int effect);

/// First-order partial correlation of i and j given k.
double partial_correlation(const CovarianceMatrix& s, int i, int j, int k);

struct CITestResult {
  double partial_correlation = 0.0;
  double z_statistic = 0.0;  // sqrt(N - |cond| - 3) * atanh(rho)
  double alpha = 0.05;
  bool reject = false;
  long n_samples = 0;
  int n_conditioning = 0;
  // Smallest N for which the test rejects at this correlation; empty for rho = 0.
  std::optional<long> n_min_reject;
};

/// Two-sided test of rho = 0. Requires |rho| < 1, 0 < alpha < 1 and
/// n_samples > n_conditioning + 3.
CITestResult fisher_z_test(double rho, long n_samples, int n_conditioning, double alpha);

/// Smallest N with sqrt(N - n_conditioning - 3) |atanh(rho)| > z_{1 - alpha/2}.
std::optional<long> fisher_min_samples(double rho, int n_conditioning, double alpha);

}  // namespace causalslab
