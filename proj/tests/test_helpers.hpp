#pragma once

// Shared fixtures: random model instances and the benchmark covariances.

#include <cmath>
#include <random>

#include "causalslab/sem_model.hpp"

namespace testing_support {

using causalslab::Matrix;
using causalslab::SemParameters;

// B, C entries uniform in [-range, range], V log-uniform in [v_lo, v_hi], every
// pair confounded. The defaults give widely varying conditioning.
inline SemParameters random_parameters(int n, std::mt19937_64& rng, double range = 2.0, double v_lo = 0.1,
                                       double v_hi = 10.0) {
  std::uniform_real_distribution<double> coef(-range, range);
  std::uniform_real_distribution<double> logv(std::log(v_lo), std::log(v_hi));
  SemParameters p = SemParameters::zeros(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) p.B(i, j) = coef(rng);
    p.V(i) = std::exp(logv(rng));
  }
  for (int r = 0; r < p.C.rows(); ++r) {
    for (int c = 0; c < p.C.cols(); ++c) p.C(r, c) = coef(rng);
  }
  // Only the two endpoints of a pair load on its confounder.
  for (int c = 0; c < p.C.cols(); ++c) {
    const auto pair = causalslab::pair_at(n, c);
    for (int r = 0; r < n; ++r) {
      if (r != pair.first && r != pair.second) p.C(r, c) = 0.0;
    }
  }
  return p;
}

// Confounding coefficients in the same sparsity pattern, entries in [-range, range].
inline Matrix random_c_tilde(int n, std::mt19937_64& rng, double range = 1.5) {
  std::uniform_real_distribution<double> coef(-range, range);
  Matrix c = Matrix::Zero(n, causalslab::pair_count(n));
  for (int col = 0; col < c.cols(); ++col) {
    const auto pair = causalslab::pair_at(n, col);
    c(pair.first, col) = coef(rng);
    c(pair.second, col) = coef(rng);
  }
  return c;
}

// Unit-scale instances for finite-difference checks. A fixed 1e-5 central
// difference has truncation error h^2/12 times the fourth derivative, which
// exceeds 1e-5 once Hessian entries reach ~1e4 (small V with large B).
inline SemParameters unit_scale_parameters(int n, std::mt19937_64& rng) {
  return random_parameters(n, rng, 1.0, 0.5, 2.0);
}

inline double max_relative_difference(const Matrix& a, const Matrix& b) {
  return ((a - b).cwiseAbs().array() / (1.0 + b.cwiseAbs().array())).maxCoeff();
}

inline Matrix mat3(std::initializer_list<double> values) {
  Matrix m(3, 3);
  auto it = values.begin();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = *it++;
  }
  return m;
}

}  // namespace testing_support
