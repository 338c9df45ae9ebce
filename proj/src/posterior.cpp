#include "causalslab/posterior.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "causalslab/errors.hpp"

namespace causalslab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

double log_normal(double x, double variance) {
  return -0.5 * (kLogTwoPi + std::log(variance) + x * x / variance);
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

struct HessianParts {
  Matrix delta_inv;    // (I - B~)^-1
  Matrix omega_inv;    // (I + C~C~^T)^-1
  Matrix sigma_t;      // Delta^-1 Omega Delta^-T
  Matrix k_t;          // Delta^T Omega^-1 Delta
  Matrix k_delta_inv;  // K~ Delta^-1 = Delta^T Omega^-1
};

HessianParts hessian_parts(const RecoveredTheta& theta, const Matrix& c_tilde) {
  const int n = theta.n();
  const Matrix identity = Matrix::Identity(n, n);
  const Matrix delta = identity - theta.B_tilde;
  const Matrix omega = identity + c_tilde * c_tilde.transpose();
  HessianParts h;
  h.delta_inv = delta.triangularView<Eigen::Lower>().solve(identity);
  h.omega_inv = omega.llt().solve(identity);
  h.sigma_t = h.delta_inv * omega * h.delta_inv.transpose();
  h.k_t = delta.transpose() * h.omega_inv * delta;
  h.k_delta_inv = delta.transpose() * h.omega_inv;
  return h;
}

// Fills the upper triangle from `entry(a, b)` and mirrors it so the result is
// exactly symmetric.
template <typename Entry>
Matrix symmetric_from(int d, Entry&& entry) {
  Matrix h(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      h(a, b) = entry(a, b);
      h(b, a) = h(a, b);
    }
  }
  return h;
}

// (p, q) for every b coordinate, in Theta order.
std::vector<std::pair<int, int>> b_coordinates(int n) {
  std::vector<std::pair<int, int>> out;
  for (int p = 1; p < n; ++p) {
    for (int q = 0; q < p; ++q) out.emplace_back(p, q);
  }
  return out;
}

}  // namespace

void PriorConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(w_spike >= 0.0) || !(w_slab >= 0.0)) fail("mixture weights must be nonnegative");
  if (std::abs(w_spike + w_slab - 1.0) > 1e-12) fail("w_spike + w_slab must equal 1");
  if (!(v_spike > 0.0) || !(v_slab > 0.0)) fail("spike and slab variances must be positive");
  if (v_spike > v_slab) fail("v_spike must not exceed v_slab");
  if (!(v_min > 0.0) || !(v_min < v_max) || !std::isfinite(v_max)) {
    fail("variance prior needs 0 < v_min < v_max < infinity");
  }
  if (!(confounder_sd > 0.0) || !std::isfinite(confounder_sd)) fail("confounder_sd must be positive");
}

double log_likelihood_per_datapoint(const SemParameters& params, const CovarianceMatrix& s_hat) {
  const CovarianceMatrix sigma = implied_covariance(params);
  if (sigma.dim() != s_hat.dim()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  const auto& l = sigma.cholesky_lower();
  const Matrix solved = l.triangularView<Eigen::Lower>().solve(s_hat.matrix());
  const Matrix full = l.transpose().triangularView<Eigen::Upper>().solve(solved);
  return -0.5 * (full.trace() + sigma.log_determinant());
}

double spike_slab_log_density(double x, const PriorConfig& cfg) {
  const double spike = cfg.w_spike > 0.0 ? std::log(cfg.w_spike) + log_normal(x, cfg.v_spike) : kNegInf;
  const double slab = cfg.w_slab > 0.0 ? std::log(cfg.w_slab) + log_normal(x, cfg.v_slab) : kNegInf;
  return log_add_exp(spike, slab);
}

double log_prior_theta(const RecoveredTheta& theta, const PriorConfig& cfg) {
  const int n = theta.n();
  const double log_range = std::log(std::log(cfg.v_max) - std::log(cfg.v_min));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = theta.V(i);
    if (!(v >= cfg.v_min && v <= cfg.v_max)) return kNegInf;
    total += -std::log(v) - log_range;
  }
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < i; ++j) total += spike_slab_log_density(theta.B_tilde(i, j), cfg);
  }
  return total;
}

double log_prior_confounders(std::span<const double> coefficients, const PriorConfig& cfg) {
  const double variance = cfg.confounder_sd * cfg.confounder_sd;
  double total = 0.0;
  for (double c : coefficients) total += log_normal(c, variance);
  return total;
}

double log_prior_confounders(const Matrix& c_tilde, const ConfounderLayout& layout,
                             const PriorConfig& cfg) {
  const Vector free = layout.extract(c_tilde);
  return log_prior_confounders(std::span<const double>(free.data(), free.size()), cfg);
}

int theta_dimension(int n) { return n * (n + 1) / 2; }

int theta_b_index(int p, int q) { return p * (p - 1) / 2 + q; }

int theta_v_index(int n, int r) { return pair_count(n) + r; }

Matrix hessian(const RecoveredTheta& theta, const Matrix& c_tilde) {
  const int n = theta.n();
  const int nb = pair_count(n);
  const HessianParts h = hessian_parts(theta, c_tilde);
  const auto coords = b_coordinates(n);
  const Vector& v = theta.V;

  return symmetric_from(theta_dimension(n), [&](int a, int b) {
    if (a < nb && b < nb) {
      const auto [p, q] = coords[a];
      const auto [r, s] = coords[b];
      return h.sigma_t(q, s) * h.omega_inv(p, r) + h.delta_inv(s, p) * h.delta_inv(q, r);
    }
    if (a < nb) {
      const auto [p, q] = coords[a];
      const int r = b - nb;
      return (h.sigma_t(r, q) * h.k_delta_inv(r, p) + (r == q ? h.delta_inv(r, p) : 0.0)) /
             (2.0 * v(r));
    }
    const int r = a - nb;
    const int s = b - nb;
    return ((r == s ? 1.0 : 0.0) + h.sigma_t(r, s) * h.k_t(r, s)) / (4.0 * v(r) * v(s));
  });
}

Matrix hessian_cholesky_form(const RecoveredTheta& theta, const Matrix& c_tilde,
                             const CovarianceMatrix& s_hat) {
  const int n = theta.n();
  const int nb = pair_count(n);
  const Matrix identity = Matrix::Identity(n, n);
  const Matrix& q_chol = s_hat.cholesky_lower();
  const Matrix l = (identity + c_tilde * c_tilde.transpose()).llt().matrixL();

  const Matrix l_inv = l.triangularView<Eigen::Lower>().solve(identity);
  const Matrix q_inv = q_chol.triangularView<Eigen::Lower>().solve(identity);
  const Matrix qqt = q_chol * q_chol.transpose();
  const Matrix lt_l = l_inv.transpose() * l_inv;        // L^-T L^-1
  const Matrix qt_q = q_inv.transpose() * q_inv;        // Q^-T Q^-1
  const Matrix q_linv = q_chol * l_inv;                 // Q L^-1
  const Matrix qt_linv = q_inv.transpose() * l_inv;     // Q^-T L^-1
  const auto coords = b_coordinates(n);
  const Vector& v = theta.V;

  return symmetric_from(theta_dimension(n), [&](int a, int b) {
    if (a < nb && b < nb) {
      const auto [p, q] = coords[a];
      const auto [r, s] = coords[b];
      return (qqt(q, s) * lt_l(p, r) + q_linv(s, p) * q_linv(q, r)) / std::sqrt(v(q) * v(s));
    }
    if (a < nb) {
      const auto [p, q] = coords[a];
      const int r = b - nb;
      return (qqt(r, q) * qt_linv(r, p) + (r == q ? q_linv(r, p) : 0.0)) /
             (2.0 * v(r) * std::sqrt(v(q)));
    }
    const int r = a - nb;
    const int s = b - nb;
    return ((r == s ? 1.0 : 0.0) + qqt(r, s) * qt_q(r, s)) / (4.0 * v(r) * v(s));
  });
}

namespace {

// -1/2 log det(-H) and the recovered Theta, or nullopt on a degenerate point.
std::optional<std::pair<double, RecoveredTheta>> laplace_pieces(const Matrix& c_tilde,
                                                                const CovarianceMatrix& s_hat,
                                                                PosteriorDiagnostics* diagnostics) {
  RecoveredTheta theta;
  try {
    theta = recover_theta(s_hat, c_tilde);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NumericalDegeneracy) throw;
    if (diagnostics) ++diagnostics->degenerate_recovery;
    return std::nullopt;
  }
  const Matrix h = hessian(theta, c_tilde);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success || !h.allFinite()) {
    if (diagnostics) ++diagnostics->non_pd_hessian;
    return std::nullopt;
  }
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return std::make_pair(-0.5 * log_det, std::move(theta));
}

}  // namespace

double log_hessian_term(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                        PosteriorDiagnostics* diagnostics) {
  const auto pieces = laplace_pieces(c_tilde, s_hat, diagnostics);
  return pieces ? pieces->first : kNegInf;
}

double log_laplace_term(const Matrix& c_tilde, const CovarianceMatrix& s_hat, const PriorConfig& cfg,
                        PosteriorDiagnostics* diagnostics) {
  const auto pieces = laplace_pieces(c_tilde, s_hat, diagnostics);
  if (!pieces) return kNegInf;
  return pieces->first + log_prior_theta(pieces->second, cfg);
}

double log_posterior_confounders(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                                 const PriorConfig& cfg, const ConfounderLayout& layout,
                                 PosteriorDiagnostics* diagnostics) {
  const double laplace = log_laplace_term(c_tilde, s_hat, cfg, diagnostics);
  if (laplace == kNegInf) return kNegInf;
  return laplace + log_prior_confounders(c_tilde, layout, cfg);
}

double log_posterior_confounders(const Matrix& c_tilde, const CovarianceMatrix& s_hat,
                                 const PriorConfig& cfg) {
  return log_posterior_confounders(c_tilde, s_hat, cfg, ConfounderLayout::all_pairs(s_hat.dim()),
                                   nullptr);
}

}  // namespace causalslab
