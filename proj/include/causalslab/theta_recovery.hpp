#pragma once

#include "causalslab/sem_model.hpp"

namespace causalslab {

/// Structural coefficients and noise variances that reproduce a covariance
/// matrix exactly for a given scaled confounding matrix.
struct RecoveredTheta {
  Matrix B;        // strictly lower triangular
  Vector V;        // positive
  Matrix B_tilde;  // V^-1/2 B V^1/2

  int n() const { return static_cast<int>(V.size()); }
};

/// Unique (B, V) with implied_covariance_scaled({B~, C~, V}) == S.
///
/// With Q = chol(S) and L = chol(I + C~ C~^T), both lower triangular with
/// positive diagonal, V^1/2 (I - B~)^-1 = Q L^-1 is lower triangular with
/// diagonal V^1/2, which pins down V and then B~ = I - L Q^-1 V^1/2.
///
/// Throws Error(NumericalDegeneracy) if a recovered variance is not a finite
/// positive number.
RecoveredTheta recover_theta(const CovarianceMatrix& s_hat, const Matrix& c_tilde);

}  // namespace causalslab
