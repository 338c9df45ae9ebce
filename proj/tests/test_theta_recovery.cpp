#include <doctest.h>

#include <random>

#include "causalslab/errors.hpp"
#include "causalslab/sem_model.hpp"
#include "causalslab/theta_recovery.hpp"
#include "test_helpers.hpp"

using namespace causalslab;
using testing_support::mat3;

TEST_CASE("recovery from the identity") {
  const CovarianceMatrix s(Matrix::Identity(3, 3));
  const auto theta = recover_theta(s, Matrix::Zero(3, 3));
  CHECK(theta.B.cwiseAbs().maxCoeff() < 1e-15);
  CHECK((theta.V - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("recovery inverts the unconfounded chain") {
  const CovarianceMatrix s(mat3({1, 1, 1, 1, 2, 2, 1, 2, 3}));
  const auto theta = recover_theta(s, Matrix::Zero(3, 3));
  CHECK(theta.B(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(theta.B(2, 0)) < 1e-14);
  CHECK(theta.B(2, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((theta.V - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("recovery inverts the confounded chain given the true confounders") {
  const CovarianceMatrix s(mat3({1, 1, 1, 1, 3, 4, 1, 4, 7}));
  const ConfounderLayout layout(3, {{1, 2}});
  const std::vector<double> c{1.0, 1.0};
  const auto theta = recover_theta(s, layout.to_matrix(c));
  CHECK(theta.B(1, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(theta.B(2, 0)) < 1e-13);
  CHECK(theta.B(2, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((theta.V - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("recovered parameters reproduce the covariance exactly") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 4;
    const auto s = implied_covariance(testing_support::random_parameters(n, rng));
    const Matrix c = testing_support::random_c_tilde(n, rng);
    const auto theta = recover_theta(s, c);
    CHECK(theta.B.triangularView<Eigen::Upper>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);
    CHECK(theta.V.minCoeff() > 0.0);
    const ScaledParameters scaled{theta.B_tilde, c, theta.V};
    const Matrix back = implied_covariance_scaled(scaled).matrix();
    CHECK(testing_support::max_relative_difference(back, s.matrix()) < 1e-10);
    // The raw and scaled coefficients are the same parameterisation.
    const auto raw = from_scaled(scaled);
    CHECK((raw.B - theta.B).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + theta.B.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("recovery rejects mismatched shapes") {
  const CovarianceMatrix s(Matrix::Identity(3, 3));
  CHECK_THROWS_AS(recover_theta(s, Matrix::Zero(2, 3)), Error);
}
