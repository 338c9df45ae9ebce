#pragma once

// Linear-Gaussian structural equation model over a fixed variable ordering
// with one latent unit-variance confounder per variable pair.
//
//   x = B x + C eta + e,   Cov(e) = diag(V),   Cov(eta) = I
//
// B is strictly lower triangular. C has one column per unordered pair (j, i),
// j < i, ordered lexicographically: (0,1), (0,2), ..., (0,n-1), (1,2), ...
// Only rows j and i of a pair's column may be nonzero. All indices in this
// header are 0-based.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace causalslab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Number of unordered variable pairs, n(n-1)/2.
int pair_count(int n);

/// Column of C that belongs to the pair (j, i), j < i.
int pair_index(int n, int j, int i);

struct VariablePair {
  int first = 0;   // smaller index
  int second = 0;  // larger index

  friend bool operator==(const VariablePair&, const VariablePair&) = default;
  friend auto operator<=>(const VariablePair&, const VariablePair&) = default;
};

/// Inverse of pair_index.
VariablePair pair_at(int n, int column);

/// Symmetric positive-definite covariance matrix. Construction validates and
/// caches the lower Cholesky factor.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Matrix s);

  int dim() const { return static_cast<int>(s_.rows()); }
  const Matrix& matrix() const { return s_; }
  double operator()(int i, int j) const { return s_(i, j); }

  /// Lower-triangular Q with positive diagonal and Q Q^T = S.
  const Matrix& cholesky_lower() const { return chol_; }
  double log_determinant() const;

  /// Rows/columns rearranged so that new variable k is old variable order[k].
  CovarianceMatrix permuted(std::span<const int> order) const;

 private:
  Matrix s_;
  Matrix chol_;
};

struct SemParameters {
  Matrix B;  // n x n, strictly lower triangular
  Matrix C;  // n x n(n-1)/2
  Vector V;  // n, strictly positive

  static SemParameters zeros(int n);  // B = 0, C = 0, V = 1
  int n() const { return static_cast<int>(V.size()); }

  /// Throws Error(InvalidArgument) if any structural invariant is violated.
  void validate() const;

  double& confounder(int row, int j, int i) { return C(row, pair_index(n(), j, i)); }
};

/// Dimensionless coefficients B~ = V^-1/2 B V^1/2 and C~ = V^-1/2 C.
struct ScaledParameters {
  Matrix B_tilde;
  Matrix C_tilde;
  Vector V;

  int n() const { return static_cast<int>(V.size()); }
  void validate() const;
};

/// Which confounder pairs carry free coefficients. Coefficients of pairs not
/// in the layout are held at zero. The free-coefficient vector lists, for each
/// pair in lexicographic order, the entry in the smaller-index row followed by
/// the entry in the larger-index row.
class ConfounderLayout {
 public:
  ConfounderLayout(int n, std::vector<VariablePair> pairs);
  static ConfounderLayout all_pairs(int n);

  int n() const { return n_; }
  int dimension() const { return 2 * static_cast<int>(pairs_.size()); }
  const std::vector<VariablePair>& pairs() const { return pairs_; }
  bool contains(VariablePair p) const;

  /// n x n(n-1)/2 matrix with the free coefficients in place.
  Matrix to_matrix(std::span<const double> coefficients) const;
  /// Free coefficients read back out of a full confounding matrix.
  Vector extract(const Matrix& c) const;

  /// Same pairs expressed after relabelling variables by `order` (new variable
  /// k is old variable order[k]).
  ConfounderLayout permuted(std::span<const int> order) const;

 private:
  int n_;
  std::vector<VariablePair> pairs_;
};

/// Sigma = (I - B)^-1 (V + C C^T) (I - B)^-T.
CovarianceMatrix implied_covariance(const SemParameters& params);

/// Sigma = V^1/2 (I - B~)^-1 (I + C~ C~^T) (I - B~)^-T V^1/2.
CovarianceMatrix implied_covariance_scaled(const ScaledParameters& scaled);

ScaledParameters to_scaled(const SemParameters& params);
SemParameters from_scaled(const ScaledParameters& scaled);

/// i.i.d. rows drawn from N(0, implied_covariance(params)); deterministic in seed.
Matrix simulate_data(const SemParameters& params, int n_samples, std::uint64_t seed);

/// Column-centred maximum-likelihood covariance (1/N) X_c^T X_c.
/// Throws Error(DegenerateData) when the result is not positive definite or
/// there are fewer than n + 1 rows.
CovarianceMatrix sample_covariance(const Matrix& data);

}  // namespace causalslab
