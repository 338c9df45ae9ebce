#include "causalslab/sem_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "causalslab/errors.hpp"

namespace causalslab {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, what);
}

// (I - B)^-1 M (I - B)^-T for symmetric M, via two triangular solves.
Matrix sandwich_unit_lower(const Matrix& B, const Matrix& M) {
  const Eigen::Index n = B.rows();
  const Matrix delta = Matrix::Identity(n, n) - B;
  const auto lower = delta.triangularView<Eigen::Lower>();
  const Matrix left = lower.solve(M);  // (I-B)^-1 M
  Matrix result = lower.solve(left.transpose());
  return 0.5 * (result + result.transpose());
}

void check_lower_triangular(const Matrix& B, int n, const char* name) {
  if (B.rows() != n || B.cols() != n) {
    std::ostringstream os;
    os << name << " must be " << n << "x" << n;
    invalid(os.str());
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (B(i, j) != 0.0) {
        std::ostringstream os;
        os << name << " must be strictly lower triangular; entry (" << i + 1 << "," << j + 1
           << ") is " << B(i, j);
        invalid(os.str());
      }
    }
  }
  if (!B.allFinite()) invalid(std::string(name) + " has non-finite entries");
}

void check_confounding(const Matrix& C, int n, const char* name) {
  const int m = pair_count(n);
  if (C.rows() != n || C.cols() != m) {
    std::ostringstream os;
    os << name << " must be " << n << "x" << m;
    invalid(os.str());
  }
  for (int col = 0; col < m; ++col) {
    const VariablePair p = pair_at(n, col);
    for (int row = 0; row < n; ++row) {
      if (row != p.first && row != p.second && C(row, col) != 0.0) {
        std::ostringstream os;
        os << name << " column for pair (" << p.first + 1 << "," << p.second + 1
           << ") has a nonzero entry in row " << row + 1;
        invalid(os.str());
      }
    }
  }
  if (!C.allFinite()) invalid(std::string(name) + " has non-finite entries");
}

void check_variances(const Vector& V) {
  if (V.size() < 1) invalid("at least one variable is required");
  for (Eigen::Index i = 0; i < V.size(); ++i) {
    if (!(V(i) > 0.0) || !std::isfinite(V(i))) {
      std::ostringstream os;
      os << "noise variance v" << i + 1 << " must be positive, got " << V(i);
      invalid(os.str());
    }
  }
}

}  // namespace

int pair_count(int n) { return n * (n - 1) / 2; }

int pair_index(int n, int j, int i) {
  if (j > i) std::swap(j, i);
  if (j < 0 || i >= n || j == i) invalid("invalid variable pair");
  // pairs starting with 0..j-1 come first
  return j * n - j * (j + 1) / 2 + (i - j - 1);
}

VariablePair pair_at(int n, int column) {
  for (int j = 0; j < n; ++j) {
    const int width = n - j - 1;
    if (column < width) return {j, j + 1 + column};
    column -= width;
  }
  invalid("pair column out of range");
}

CovarianceMatrix::CovarianceMatrix(Matrix s) : s_(std::move(s)) {
  if (s_.rows() != s_.cols() || s_.rows() == 0) invalid("covariance matrix must be square and non-empty");
  if (!s_.allFinite()) invalid("covariance matrix has non-finite entries");
  const double scale = std::max(s_.cwiseAbs().maxCoeff(), 1e-300);
  if ((s_ - s_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    invalid("covariance matrix is not symmetric");
  }
  s_ = 0.5 * (s_ + s_.transpose());
  Eigen::LLT<Matrix> llt(s_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "covariance matrix is not positive definite");
  }
  chol_ = llt.matrixL();
}

double CovarianceMatrix::log_determinant() const {
  return 2.0 * chol_.diagonal().array().log().sum();
}

CovarianceMatrix CovarianceMatrix::permuted(std::span<const int> order) const {
  const int n = dim();
  if (static_cast<int>(order.size()) != n) invalid("ordering length does not match dimension");
  std::vector<int> seen(order.begin(), order.end());
  std::sort(seen.begin(), seen.end());
  for (int k = 0; k < n; ++k) {
    if (seen[k] != k) invalid("ordering is not a permutation");
  }
  Matrix p(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) p(a, b) = s_(order[a], order[b]);
  }
  return CovarianceMatrix(std::move(p));
}

SemParameters SemParameters::zeros(int n) {
  if (n < 1) invalid("at least one variable is required");
  return {Matrix::Zero(n, n), Matrix::Zero(n, pair_count(n)), Vector::Ones(n)};
}

void SemParameters::validate() const {
  check_variances(V);
  check_lower_triangular(B, n(), "B");
  check_confounding(C, n(), "C");
}

void ScaledParameters::validate() const {
  check_variances(V);
  check_lower_triangular(B_tilde, n(), "B~");
  check_confounding(C_tilde, n(), "C~");
}

ConfounderLayout::ConfounderLayout(int n, std::vector<VariablePair> pairs)
    : n_(n), pairs_(std::move(pairs)) {
  if (n < 1) invalid("at least one variable is required");
  for (auto& p : pairs_) {
    if (p.first > p.second) std::swap(p.first, p.second);
    if (p.first < 0 || p.second >= n || p.first == p.second) invalid("confounder pair out of range");
  }
  std::sort(pairs_.begin(), pairs_.end());
  if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end()) {
    invalid("duplicate confounder pair");
  }
}

ConfounderLayout ConfounderLayout::all_pairs(int n) {
  std::vector<VariablePair> pairs;
  for (int col = 0; col < pair_count(n); ++col) pairs.push_back(pair_at(n, col));
  return ConfounderLayout(n, std::move(pairs));
}

bool ConfounderLayout::contains(VariablePair p) const {
  if (p.first > p.second) std::swap(p.first, p.second);
  return std::binary_search(pairs_.begin(), pairs_.end(), p);
}

Matrix ConfounderLayout::to_matrix(std::span<const double> coefficients) const {
  if (static_cast<int>(coefficients.size()) != dimension()) {
    invalid("confounder coefficient vector has wrong length");
  }
  Matrix c = Matrix::Zero(n_, pair_count(n_));
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const int col = pair_index(n_, pairs_[k].first, pairs_[k].second);
    c(pairs_[k].first, col) = coefficients[2 * k];
    c(pairs_[k].second, col) = coefficients[2 * k + 1];
  }
  return c;
}

Vector ConfounderLayout::extract(const Matrix& c) const {
  Vector out(dimension());
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const int col = pair_index(n_, pairs_[k].first, pairs_[k].second);
    out(2 * k) = c(pairs_[k].first, col);
    out(2 * k + 1) = c(pairs_[k].second, col);
  }
  return out;
}

ConfounderLayout ConfounderLayout::permuted(std::span<const int> order) const {
  if (static_cast<int>(order.size()) != n_) invalid("ordering length does not match dimension");
  std::vector<int> position(n_);
  for (int k = 0; k < n_; ++k) position[order[k]] = k;
  std::vector<VariablePair> moved;
  for (const auto& p : pairs_) moved.push_back({position[p.first], position[p.second]});
  return ConfounderLayout(n_, std::move(moved));
}

CovarianceMatrix implied_covariance(const SemParameters& params) {
  params.validate();
  const Matrix inner = Matrix(params.V.asDiagonal()) + params.C * params.C.transpose();
  return CovarianceMatrix(sandwich_unit_lower(params.B, inner));
}

CovarianceMatrix implied_covariance_scaled(const ScaledParameters& scaled) {
  scaled.validate();
  const int n = scaled.n();
  const Matrix omega = Matrix::Identity(n, n) + scaled.C_tilde * scaled.C_tilde.transpose();
  const Vector sd = scaled.V.cwiseSqrt();
  Matrix s = sd.asDiagonal() * sandwich_unit_lower(scaled.B_tilde, omega) * sd.asDiagonal();
  return CovarianceMatrix(0.5 * (s + s.transpose()));
}

ScaledParameters to_scaled(const SemParameters& params) {
  params.validate();
  const Vector sd = params.V.cwiseSqrt();
  const Vector inv_sd = sd.cwiseInverse();
  return {inv_sd.asDiagonal() * params.B * sd.asDiagonal(), inv_sd.asDiagonal() * params.C, params.V};
}

SemParameters from_scaled(const ScaledParameters& scaled) {
  scaled.validate();
  const Vector sd = scaled.V.cwiseSqrt();
  const Vector inv_sd = sd.cwiseInverse();
  return {sd.asDiagonal() * scaled.B_tilde * inv_sd.asDiagonal(), sd.asDiagonal() * scaled.C_tilde,
          scaled.V};
}

Matrix simulate_data(const SemParameters& params, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) invalid("n_samples must be at least 1");
  const CovarianceMatrix sigma = implied_covariance(params);
  const int n = sigma.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n_samples, n);
  for (int r = 0; r < n_samples; ++r) {
    for (int c = 0; c < n; ++c) z(r, c) = normal(rng);
  }
  return z * sigma.cholesky_lower().transpose();
}

CovarianceMatrix sample_covariance(const Matrix& data) {
  const Eigen::Index rows = data.rows();
  const Eigen::Index n = data.cols();
  if (n < 1) invalid("data matrix has no columns");
  if (rows < n + 1) {
    std::ostringstream os;
    os << "need at least " << n + 1 << " rows of data for " << n << " variables, got " << rows;
    throw Error(ErrorCode::DegenerateData, os.str());
  }
  if (!data.allFinite()) invalid("data matrix has non-finite entries");
  const Matrix centred = data.rowwise() - data.colwise().mean();
  Matrix s = (centred.transpose() * centred) / static_cast<double>(rows);
  try {
    return CovarianceMatrix(0.5 * (s + s.transpose()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) {
      throw Error(ErrorCode::DegenerateData, "sample covariance is singular (rank-deficient data)");
    }
    throw;
  }
}

}  // namespace causalslab
