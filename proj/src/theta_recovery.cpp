#include "causalslab/theta_recovery.hpp"

#include <cmath>
#include <sstream>

#include "causalslab/errors.hpp"

namespace causalslab {

RecoveredTheta recover_theta(const CovarianceMatrix& s_hat, const Matrix& c_tilde) {
  const int n = s_hat.dim();
  if (c_tilde.rows() != n || c_tilde.cols() != pair_count(n)) {
    throw Error(ErrorCode::InvalidArgument, "confounding matrix shape does not match covariance");
  }
  const Matrix identity = Matrix::Identity(n, n);
  const Matrix& q = s_hat.cholesky_lower();
  const Matrix omega = identity + c_tilde * c_tilde.transpose();
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalDegeneracy, "I + C~C~^T lost positive definiteness");
  }
  const Matrix l = llt.matrixL();

  // Q L^-1 from (L^T)^-1 Q^T, and Q^-1 from a triangular solve.
  const Matrix q_linv = l.transpose().triangularView<Eigen::Upper>().solve(q.transpose()).transpose();
  const Matrix q_inv = q.triangularView<Eigen::Lower>().solve(identity);

  const Vector sd = q_linv.diagonal();
  RecoveredTheta theta;
  theta.V = sd.array().square();
  for (int i = 0; i < n; ++i) {
    if (!(theta.V(i) > 0.0) || !std::isfinite(theta.V(i))) {
      std::ostringstream os;
      os << "recovered variance v" << i + 1 << " = " << theta.V(i) << " is not positive";
      throw Error(ErrorCode::NumericalDegeneracy, os.str());
    }
  }

  const Matrix l_qinv = l * q_inv;
  theta.B_tilde = identity - l_qinv * sd.asDiagonal();
  theta.B = identity - sd.asDiagonal() * l_qinv;
  // Analytically zero on and above the diagonal; remove rounding residue.
  theta.B_tilde.triangularView<Eigen::Upper>().setZero();
  theta.B.triangularView<Eigen::Upper>().setZero();
  return theta;
}

}  // namespace causalslab
