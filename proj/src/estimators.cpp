#include "causalslab/estimators.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "causalslab/errors.hpp"

namespace causalslab {

namespace {

constexpr double kWeakInstrumentThreshold = 1e-12;

void check_index(const CovarianceMatrix& s, int k) {
  if (k < 0 || k >= s.dim()) {
    std::ostringstream os;
    os << "variable index " << k + 1 << " out of range 1.." << s.dim();
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

double critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

}  // namespace

double iv_estimate(const CovarianceMatrix& s, int iv, int cause, int effect) {
  check_index(s, iv);
  check_index(s, cause);
  check_index(s, effect);
  const double denominator = s(iv, cause);
  if (std::abs(denominator) <= kWeakInstrumentThreshold) {
    std::ostringstream os;
    os << "Cov(X" << iv + 1 << ", X" << cause + 1 << ") = " << denominator
       << " is too close to zero for an instrumental-variable estimate";
    throw Error(ErrorCode::WeakInstrument, os.str());
  }
  return s(iv, effect) / denominator;
}

double lcd_estimate(const CovarianceMatrix& s, int cause, int effect) {
  check_index(s, cause);
  check_index(s, effect);
  return s(cause, effect) / s(cause, cause);
}

double partial_correlation(const CovarianceMatrix& s, int i, int j, int k) {
  check_index(s, i);
  check_index(s, j);
  check_index(s, k);
  if (i == j || i == k || j == k) throw Error(ErrorCode::InvalidArgument, "partial correlation needs three distinct variables");
  auto corr = [&](int a, int b) { return s(a, b) / std::sqrt(s(a, a) * s(b, b)); };
  const double r_ij = corr(i, j);
  const double r_ik = corr(i, k);
  const double r_jk = corr(j, k);
  return (r_ij - r_ik * r_jk) / std::sqrt((1.0 - r_ik * r_ik) * (1.0 - r_jk * r_jk));
}

std::optional<long> fisher_min_samples(double rho, int n_conditioning, double alpha) {
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|rho| must be below 1");
  if (n_conditioning < 0) throw Error(ErrorCode::InvalidArgument, "conditioning set size must be nonnegative");
  const double z = std::abs(std::atanh(rho));
  // Population covariances give rounding-level correlations where the true
  // value is zero; no finite sample size rejects those.
  if (z < 1e-12) return std::nullopt;
  const double ratio = critical_value(alpha) / z;
  // Strict inequality: an exact tie does not reject, so step past it.
  const double bound = std::floor(n_conditioning + 3.0 + ratio * ratio);
  if (!(bound < 1e18)) return std::nullopt;
  return static_cast<long>(bound) + 1;
}

CITestResult fisher_z_test(double rho, long n_samples, int n_conditioning, double alpha) {
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|rho| must be below 1");
  if (n_samples <= n_conditioning + 3L) {
    throw Error(ErrorCode::InvalidArgument, "Fisher z test needs more than |cond| + 3 samples");
  }
  CITestResult r;
  r.partial_correlation = rho;
  r.alpha = alpha;
  r.n_samples = n_samples;
  r.n_conditioning = n_conditioning;
  r.z_statistic = std::sqrt(static_cast<double>(n_samples - n_conditioning - 3)) * std::atanh(rho);
  r.reject = std::abs(r.z_statistic) > critical_value(alpha);
  r.n_min_reject = fisher_min_samples(rho, n_conditioning, alpha);
  return r;
}

}  // namespace causalslab
