#pragma once

// Nested sampling over a unit-hypercube reparameterisation of the prior.
// Replacement points are drawn by a random walk started from a randomly chosen
// surviving live point, accepting only moves that stay inside the cube and
// above the current likelihood floor.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "causalslab/errors.hpp"
#include "causalslab/posterior.hpp"

namespace causalslab {

struct SamplerConfig {
  int n_live = 400;
  // Stop once the evidence still held by the live points, bounded by
  // max live likelihood times remaining prior volume, falls below this
  // fraction of the accumulated evidence.
  double termination_fraction = 1e-3;
  long max_iterations = 1'000'000;
  std::uint64_t seed = 0;
  // Random-walk proposals per replacement; 0 selects 5 x dimension.
  int steps_per_replacement = 0;

  void validate() const;
  int steps_for(int dimension) const {
    return steps_per_replacement > 0 ? steps_per_replacement : 5 * dimension;
  }
};

struct SamplerDiagnostics {
  long iterations = 0;
  long likelihood_evaluations = 0;
  long accepted_moves = 0;
  long rejected_moves = 0;      // below the floor or outside the cube
  long stalled_walks = 0;       // walks that had to be restarted with a smaller step
  long non_pd_evaluations = 0;  // posterior points with a non-PD Hessian
  long degenerate_recoveries = 0;
  long boundary_clamps = 0;     // prior-transform coordinates at exactly 0 or 1
  double final_step_scale = 0.0;
  long clusters = 1;            // live-point clusters at termination
};

struct WeightedDraw {
  Vector point;               // sampled coordinates (C~ free coefficients)
  double log_weight = 0.0;    // log of the normalised posterior weight
  double log_likelihood = 0.0;
  std::optional<RecoveredTheta> theta;  // attached by sample_causal_posterior
};

struct WeightedPosterior {
  std::vector<WeightedDraw> draws;
  double log_evidence = 0.0;
  double log_evidence_error = 0.0;
  double information = 0.0;  // KL divergence from prior to posterior, in nats
  // Likelihood floor at each iteration; non-decreasing.
  std::vector<double> thresholds;
  SamplerDiagnostics diagnostics;

  Vector normalized_weights() const;
  /// 1 / sum(w^2).
  double effective_sample_size() const;
};

/// Raised when the run cannot finish; carries what the sampler saw so far.
class SamplerError : public Error {
 public:
  SamplerError(ErrorCode code, const std::string& what, SamplerDiagnostics diagnostics)
      : Error(code, what), diagnostics_(diagnostics) {}
  const SamplerDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  SamplerDiagnostics diagnostics_;
};

using LogDensity = std::function<double(std::span<const double>)>;
using PriorTransform = std::function<void(std::span<const double> unit, std::span<double> out)>;

/// Maps the open unit cube to N(0, sd^2) coordinatewise. Coordinates at
/// exactly 0 or 1 are clamped to -8 sd / +8 sd and counted in `clamps`.
Vector prior_transform(std::span<const double> unit, const PriorConfig& cfg, long* clamps = nullptr);

/// Evidence and weighted draws for `log_density` (the likelihood) under the
/// prior defined by `transform`. Evidence is accumulated by the trapezoid rule
/// over log-shrinking prior volume, tracked per cluster of live points; the
/// final live points share their cluster's remaining volume equally. Throws SamplerError on max_iterations or when every initial
/// live point has zero likelihood.
WeightedPosterior run_nested(const LogDensity& log_density, int dimension,
                             const PriorTransform& transform, const SamplerConfig& cfg);

/// Nested sampling of the large-sample-limit posterior over the free
/// confounding coefficients of `layout`, with every retained draw mapped to
/// its Theta*(C~, S).
WeightedPosterior sample_causal_posterior(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                          const PriorConfig& prior_cfg,
                                          const SamplerConfig& sampler_cfg);

}  // namespace causalslab
