#pragma once

// Summaries of weighted posteriors, 2D log-posterior grids, evidence-based
// comparison of variable orderings and spike-variance sweeps.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causalslab/nested_sampler.hpp"
#include "causalslab/posterior.hpp"

namespace causalslab {

/// A scalar parameter of Theta: "b32" / "b3_2" (raw structural coefficient,
/// effect first, 1-based) or "v2" (noise variance).
class Target {
 public:
  static Target parse(std::string_view text, int n);

  double value(const RecoveredTheta& theta) const;
  const std::string& label() const { return label_; }

 private:
  Target(std::string label, bool is_variance, int row, int col)
      : label_(std::move(label)), is_variance_(is_variance), row_(row), col_(col) {}

  std::string label_;
  bool is_variance_;
  int row_;
  int col_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sum of normalised weights of draws whose target value lies in [lo, hi].
double interval_mass(const WeightedPosterior& posterior, const Target& target, double lo, double hi);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<double> mass;   // sums to 1
};

struct Mode {
  double location = 0.0;
  double density = 0.0;
};

struct PosteriorSummary {
  std::string target;
  std::vector<std::pair<Interval, double>> interval_masses;
  Histogram histogram;
  std::vector<std::pair<double, double>> kde_curve;  // (x, density)
  std::vector<Mode> modes;                            // highest density first
  double bandwidth = 0.0;
  double effective_sample_size = 0.0;
};

struct SummaryOptions {
  int bins = 100;
  std::optional<double> bandwidth;  // Silverman's rule when empty
  std::vector<Interval> intervals;
};

/// Weighted histogram over the 0.1%..99.9% weighted-quantile range (tails
/// folded into the edge bins), weighted Gaussian KDE and its local maxima.
/// Throws Error(InsufficientSamples) below 10 effective draws.
PosteriorSummary summarize(const WeightedPosterior& posterior, const Target& target,
                           const SummaryOptions& options = {});

enum class GridTerm { Posterior, HessianOnly };

struct Grid {
  VariablePair pair;
  std::vector<double> axis;  // shared by both coefficients
  Matrix values;             // values(r, k): first coefficient axis[r], second axis[k]
};

/// log p(C~ | S) (or just -1/2 log det(-H)) over a resolution x resolution
/// lattice of the two coefficients of `pair`, all other confounders at zero.
/// The lattice is symmetric about the centre of [lo, hi].
Grid grid_log_posterior(const CovarianceMatrix& s_hat, const PriorConfig& prior_cfg, VariablePair pair,
                        double lo, double hi, int resolution, GridTerm term = GridTerm::Posterior);

/// First row: corner label then axis; then one row per first-coefficient value.
std::string grid_to_csv(const Grid& grid);

struct OrderingResult {
  std::vector<int> ordering;  // 0-based; new variable k is old variable ordering[k]
  double log_evidence = 0.0;
  double log_evidence_error = 0.0;
};

struct OrderingComparison {
  std::vector<OrderingResult> results;

  /// p(results[a]) / p(results[b]).
  double ratio(std::size_t a, std::size_t b) const;
  /// Ratios of every ordering relative to the first.
  std::vector<double> evidence_ratios() const;
};

/// Every permutation of 0..n-1 in lexicographic order; n <= 5.
std::vector<std::vector<int>> all_orderings(int n);

/// Parses "1>2>3;1>3>2" (1-based); "all" enumerates every permutation.
std::vector<std::vector<int>> parse_orderings(std::string_view text, int n);
std::string format_ordering(const std::vector<int>& ordering);

/// Log-evidence of each ordering: S is permuted and the free pairs (given in
/// the original labels) relabelled before sampling. Runs execute on up to
/// `workers` threads, each with its own seeded sampler.
OrderingComparison compare_orderings(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                     const std::vector<std::vector<int>>& orderings,
                                     const PriorConfig& prior_cfg, const SamplerConfig& sampler_cfg,
                                     int workers = 1);

struct SweepRow {
  double v_spike = 0.0;
  std::optional<std::string> failure;
  std::vector<double> masses;  // per requested interval
  std::vector<Mode> modes;     // highest first
  double log_evidence = 0.0;
  double log_evidence_error = 0.0;
  double effective_sample_size = 0.0;
};

/// One posterior per spike variance; failures are recorded per row.
std::vector<SweepRow> spike_sweep(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                  const std::vector<double>& v_spikes, const PriorConfig& prior_cfg,
                                  const SamplerConfig& sampler_cfg, const Target& target,
                                  const std::vector<Interval>& intervals, int workers = 1);

std::string sweep_to_csv(const std::vector<SweepRow>& rows, const std::vector<Interval>& intervals,
                         int n_modes = 2);

struct EvidenceSweepRow {
  double v_spike = 0.0;
  std::optional<std::string> failure;
  OrderingComparison comparison;
};

/// compare_orderings repeated for each spike variance.
std::vector<EvidenceSweepRow> evidence_sweep(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                             const std::vector<std::vector<int>>& orderings,
                                             const std::vector<double>& v_spikes,
                                             const PriorConfig& prior_cfg, const SamplerConfig& sampler_cfg,
                                             int workers = 1);

/// Runs body(0) .. body(count - 1) on at most `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace causalslab
