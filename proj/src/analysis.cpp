#include "causalslab/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

#include "causalslab/errors.hpp"
#include "causalslab/io.hpp"

namespace causalslab {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

struct WeightedValue {
  double x;
  double w;
};

std::vector<WeightedValue> sorted_values(const WeightedPosterior& posterior, const Target& target) {
  const Vector w = posterior.normalized_weights();
  std::vector<WeightedValue> out;
  out.reserve(posterior.draws.size());
  for (std::size_t k = 0; k < posterior.draws.size(); ++k) {
    const auto& d = posterior.draws[k];
    if (!d.theta) invalid("posterior draws carry no mapped parameters");
    out.push_back({target.value(*d.theta), w(static_cast<Eigen::Index>(k))});
  }
  std::sort(out.begin(), out.end(), [](const WeightedValue& a, const WeightedValue& b) { return a.x < b.x; });
  return out;
}

double weighted_quantile(const std::vector<WeightedValue>& values, double p) {
  double cumulative = 0.0;
  for (const auto& v : values) {
    cumulative += v.w;
    if (cumulative >= p) return v.x;
  }
  return values.back().x;
}

double silverman_bandwidth(const std::vector<WeightedValue>& values, double ess) {
  double mean = 0.0;
  for (const auto& v : values) mean += v.w * v.x;
  double var = 0.0;
  for (const auto& v : values) var += v.w * (v.x - mean) * (v.x - mean);
  const double sd = std::sqrt(var);
  const double iqr = weighted_quantile(values, 0.75) - weighted_quantile(values, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(ess, -0.2);
}

// Uniform h/4 spacing inside every region within 5h of a draw.
std::vector<double> kde_grid(const std::vector<WeightedValue>& values, double h) {
  constexpr std::size_t kMaxPoints = 400'000;
  const double reach = 5.0 * h;
  double spacing = h / 4.0;
  std::vector<std::pair<double, double>> segments;
  for (const auto& v : values) {
    if (!segments.empty() && v.x - reach <= segments.back().second) {
      segments.back().second = v.x + reach;
    } else {
      segments.emplace_back(v.x - reach, v.x + reach);
    }
  }
  double covered = 0.0;
  for (const auto& s : segments) covered += s.second - s.first;
  if (covered / spacing > kMaxPoints) spacing = covered / kMaxPoints;
  std::vector<double> grid;
  for (const auto& s : segments) {
    const auto steps = static_cast<long>(std::ceil((s.second - s.first) / spacing));
    for (long k = 0; k <= steps; ++k) grid.push_back(s.first + (s.second - s.first) * k / steps);
  }
  return grid;
}

double kde_at(const std::vector<WeightedValue>& values, double x, double h) {
  const double reach = 8.0 * h;
  auto lo = std::lower_bound(values.begin(), values.end(), x - reach,
                             [](const WeightedValue& v, double t) { return v.x < t; });
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  double total = 0.0;
  for (auto it = lo; it != values.end() && it->x <= x + reach; ++it) {
    const double z = (x - it->x) / h;
    total += it->w * std::exp(-0.5 * z * z);
  }
  return total * norm;
}

std::vector<Mode> local_maxima(const std::vector<std::pair<double, double>>& curve) {
  double peak = 0.0;
  for (const auto& p : curve) peak = std::max(peak, p.second);
  std::vector<Mode> modes;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double here = curve[k].second;
    if (here <= 1e-8 * peak) continue;
    const bool left = k == 0 || here > curve[k - 1].second;
    const bool right = k + 1 == curve.size() || here >= curve[k + 1].second;
    if (left && right) modes.push_back({curve[k].first, here});
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.density > b.density; });
  return modes;
}

std::string without_commas(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

Target Target::parse(std::string_view text, int n) {
  const std::string label(text);
  auto number = [&](std::string_view digits) {
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      invalid("cannot parse parameter '" + label + "' (expected e.g. b32, b3_2 or v2)");
    }
    const int k = std::stoi(std::string(digits));
    if (k < 1 || k > n) invalid("parameter '" + label + "' refers to a variable outside 1.." + std::to_string(n));
    return k - 1;
  };
  if (text.size() >= 2 && text[0] == 'v') return Target(label, true, number(text.substr(1)), 0);
  if (text.size() >= 3 && text[0] == 'b') {
    const auto rest = text.substr(1);
    int i = 0;
    int j = 0;
    if (const auto sep = rest.find('_'); sep != std::string_view::npos) {
      i = number(rest.substr(0, sep));
      j = number(rest.substr(sep + 1));
    } else if (rest.size() == 2) {
      i = number(rest.substr(0, 1));
      j = number(rest.substr(1, 1));
    } else {
      invalid("ambiguous parameter '" + label + "'; write b<i>_<j>");
    }
    if (j >= i) invalid("parameter '" + label + "' is not a free structural coefficient (need i > j)");
    return Target(label, false, i, j);
  }
  invalid("cannot parse parameter '" + label + "' (expected e.g. b32, b3_2 or v2)");
}

double Target::value(const RecoveredTheta& theta) const {
  return is_variance_ ? theta.V(row_) : theta.B(row_, col_);
}

double interval_mass(const WeightedPosterior& posterior, const Target& target, double lo, double hi) {
  if (!(lo < hi)) invalid("interval needs lo < hi");
  const Vector w = posterior.normalized_weights();
  double mass = 0.0;
  for (std::size_t k = 0; k < posterior.draws.size(); ++k) {
    const auto& d = posterior.draws[k];
    if (!d.theta) invalid("posterior draws carry no mapped parameters");
    const double x = target.value(*d.theta);
    if (x >= lo && x <= hi) mass += w(static_cast<Eigen::Index>(k));
  }
  return mass;
}

PosteriorSummary summarize(const WeightedPosterior& posterior, const Target& target,
                           const SummaryOptions& options) {
  if (options.bins < 1) invalid("histogram needs at least one bin");
  PosteriorSummary summary;
  summary.target = target.label();
  summary.effective_sample_size = posterior.effective_sample_size();
  if (posterior.draws.empty() || summary.effective_sample_size < 10.0) {
    std::ostringstream os;
    os << "only " << summary.effective_sample_size << " effective draws; at least 10 are needed";
    throw Error(ErrorCode::InsufficientSamples, os.str());
  }
  const auto values = sorted_values(posterior, target);

  for (const auto& iv : options.intervals) {
    summary.interval_masses.emplace_back(iv, interval_mass(posterior, target, iv.lo, iv.hi));
  }

  double lo = weighted_quantile(values, 0.001);
  double hi = weighted_quantile(values, 0.999);
  if (!(hi > lo)) {
    const double centre = weighted_quantile(values, 0.5);
    lo = centre - 0.5;
    hi = centre + 0.5;
  }
  const int bins = options.bins;
  summary.histogram.edges.resize(bins + 1);
  for (int k = 0; k <= bins; ++k) summary.histogram.edges[k] = lo + (hi - lo) * k / bins;
  summary.histogram.mass.assign(bins, 0.0);
  for (const auto& v : values) {
    const double pos = (v.x - lo) / (hi - lo) * bins;
    const int k = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
    summary.histogram.mass[k] += v.w;
  }

  double h = options.bandwidth.value_or(silverman_bandwidth(values, summary.effective_sample_size));
  // A spread at rounding level means the draws coincide.
  const double scale = std::max(1.0, std::abs(weighted_quantile(values, 0.5)));
  if (!(h > 1e-8 * scale)) h = 1e-3 * scale;
  summary.bandwidth = h;
  for (double x : kde_grid(values, h)) summary.kde_curve.emplace_back(x, kde_at(values, x, h));
  summary.modes = local_maxima(summary.kde_curve);
  return summary;
}

Grid grid_log_posterior(const CovarianceMatrix& s_hat, const PriorConfig& prior_cfg, VariablePair pair,
                        double lo, double hi, int resolution, GridTerm term) {
  prior_cfg.validate();
  if (resolution < 1) invalid("grid resolution must be positive");
  if (!(lo < hi)) invalid("grid range needs lo < hi");
  const int n = s_hat.dim();
  const ConfounderLayout layout(n, {pair});
  Grid grid{layout.pairs().front(), {}, Matrix(resolution, resolution)};
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int k = 0; k < resolution; ++k) {
    const double t = resolution == 1 ? 0.0 : static_cast<double>(2 * k - (resolution - 1)) / (resolution - 1);
    grid.axis.push_back(mid + half * t);
  }
  for (int r = 0; r < resolution; ++r) {
    for (int k = 0; k < resolution; ++k) {
      const double coeffs[2] = {grid.axis[r], grid.axis[k]};
      const Matrix c = layout.to_matrix(coeffs);
      grid.values(r, k) = term == GridTerm::Posterior ? log_posterior_confounders(c, s_hat, prior_cfg, layout)
                                                      : log_hessian_term(c, s_hat);
    }
  }
  return grid;
}

std::string grid_to_csv(const Grid& grid) {
  std::ostringstream os;
  os << "c" << grid.pair.first + 1 << "\\c" << grid.pair.second + 1;
  for (double x : grid.axis) os << ',' << format_double(x);
  os << '\n';
  for (std::size_t r = 0; r < grid.axis.size(); ++r) {
    os << format_double(grid.axis[r]);
    for (std::size_t k = 0; k < grid.axis.size(); ++k) {
      os << ',' << format_double(grid.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
    }
    os << '\n';
  }
  return os.str();
}

double OrderingComparison::ratio(std::size_t a, std::size_t b) const {
  return std::exp(results.at(a).log_evidence - results.at(b).log_evidence);
}

std::vector<double> OrderingComparison::evidence_ratios() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < results.size(); ++k) out.push_back(ratio(k, 0));
  return out;
}

std::vector<std::vector<int>> all_orderings(int n) {
  if (n < 1 || n > 5) invalid("ordering enumeration is limited to 1..5 variables; list orderings explicitly");
  std::vector<int> perm(n);
  for (int k = 0; k < n; ++k) perm[k] = k;
  std::vector<std::vector<int>> out;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::vector<std::vector<int>> parse_orderings(std::string_view text, int n) {
  if (text == "all") return all_orderings(n);
  std::vector<std::vector<int>> out;
  std::stringstream outer{std::string(text)};
  std::string item;
  while (std::getline(outer, item, ';')) {
    std::vector<int> ordering;
    std::stringstream inner(item);
    std::string label;
    while (std::getline(inner, label, '>')) {
      try {
        ordering.push_back(std::stoi(label) - 1);
      } catch (const std::logic_error&) {
        invalid("cannot parse ordering '" + item + "' (expected e.g. 1>3>2)");
      }
    }
    auto sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < static_cast<int>(sorted.size()); ++k) {
      if (sorted[k] != k) invalid("ordering '" + item + "' is not a permutation of 1.." + std::to_string(n));
    }
    if (static_cast<int>(ordering.size()) != n) {
      invalid("ordering '" + item + "' is not a permutation of 1.." + std::to_string(n));
    }
    out.push_back(std::move(ordering));
  }
  if (out.empty()) invalid("no orderings given");
  return out;
}

std::string format_ordering(const std::vector<int>& ordering) {
  std::string out;
  for (std::size_t k = 0; k < ordering.size(); ++k) {
    if (k > 0) out += '>';
    out += std::to_string(ordering[k] + 1);
  }
  return out;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          body(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

OrderingComparison compare_orderings(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                     const std::vector<std::vector<int>>& orderings,
                                     const PriorConfig& prior_cfg, const SamplerConfig& sampler_cfg,
                                     int workers) {
  if (orderings.empty()) invalid("no orderings given");
  OrderingComparison out;
  out.results.resize(orderings.size());
  parallel_for(orderings.size(), workers, [&](std::size_t k) {
    const auto& ordering = orderings[k];
    try {
      const CovarianceMatrix permuted = s_hat.permuted(ordering);
      const ConfounderLayout relabelled = layout.permuted(ordering);
      const WeightedPosterior post = sample_causal_posterior(permuted, relabelled, prior_cfg, sampler_cfg);
      out.results[k] = {ordering, post.log_evidence, post.log_evidence_error};
    } catch (const Error& e) {
      throw Error(e.code(), "ordering " + format_ordering(ordering) + ": " + e.what());
    }
  });
  return out;
}

std::vector<SweepRow> spike_sweep(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                  const std::vector<double>& v_spikes, const PriorConfig& prior_cfg,
                                  const SamplerConfig& sampler_cfg, const Target& target,
                                  const std::vector<Interval>& intervals, int workers) {
  for (double v : v_spikes) {
    if (!(v > 0.0) || v > prior_cfg.v_slab) invalid("every v_spike must lie in (0, v_slab]");
  }
  std::vector<SweepRow> rows(v_spikes.size());
  parallel_for(v_spikes.size(), workers, [&](std::size_t k) {
    SweepRow& row = rows[k];
    row.v_spike = v_spikes[k];
    try {
      PriorConfig cfg = prior_cfg;
      cfg.v_spike = v_spikes[k];
      const WeightedPosterior post = sample_causal_posterior(s_hat, layout, cfg, sampler_cfg);
      row.log_evidence = post.log_evidence;
      row.log_evidence_error = post.log_evidence_error;
      row.effective_sample_size = post.effective_sample_size();
      for (const auto& iv : intervals) row.masses.push_back(interval_mass(post, target, iv.lo, iv.hi));
      row.modes = summarize(post, target).modes;
    } catch (const Error& e) {
      row.failure = e.what();
    }
  });
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows, const std::vector<Interval>& intervals,
                         int n_modes) {
  std::ostringstream os;
  os << "v_spike,status";
  for (const auto& iv : intervals) os << ",mass_" << format_label(iv.lo) << '_' << format_label(iv.hi);
  for (int m = 1; m <= n_modes; ++m) os << ",mode_" << m << ",mode_" << m << "_density";
  os << ",log_evidence,log_evidence_error,effective_sample_size\n";
  const std::string nan = format_double(std::nan(""));
  for (const auto& row : rows) {
    os << format_double(row.v_spike) << ',' << (row.failure ? "error: " + without_commas(*row.failure) : "ok");
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      os << ',' << (k < row.masses.size() ? format_double(row.masses[k]) : nan);
    }
    for (int m = 0; m < n_modes; ++m) {
      if (m < static_cast<int>(row.modes.size())) {
        os << ',' << format_double(row.modes[m].location) << ',' << format_double(row.modes[m].density);
      } else {
        os << ',' << nan << ',' << nan;
      }
    }
    if (row.failure) {
      os << ',' << nan << ',' << nan << ',' << nan << '\n';
    } else {
      os << ',' << format_double(row.log_evidence) << ',' << format_double(row.log_evidence_error) << ','
         << format_double(row.effective_sample_size) << '\n';
    }
  }
  return os.str();
}

std::vector<EvidenceSweepRow> evidence_sweep(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                             const std::vector<std::vector<int>>& orderings,
                                             const std::vector<double>& v_spikes,
                                             const PriorConfig& prior_cfg, const SamplerConfig& sampler_cfg,
                                             int workers) {
  for (double v : v_spikes) {
    if (!(v > 0.0) || v > prior_cfg.v_slab) invalid("every v_spike must lie in (0, v_slab]");
  }
  std::vector<EvidenceSweepRow> rows(v_spikes.size());
  parallel_for(v_spikes.size(), workers, [&](std::size_t k) {
    rows[k].v_spike = v_spikes[k];
    try {
      PriorConfig cfg = prior_cfg;
      cfg.v_spike = v_spikes[k];
      rows[k].comparison = compare_orderings(s_hat, layout, orderings, cfg, sampler_cfg, 1);
    } catch (const Error& e) {
      rows[k].failure = e.what();
    }
  });
  return rows;
}

}  // namespace causalslab
