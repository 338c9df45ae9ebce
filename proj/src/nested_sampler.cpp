#include "causalslab/nested_sampler.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace causalslab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kClampSigmas = 8.0;
constexpr int kMaxWalkAttempts = 60;
constexpr std::size_t kNeighbours = 10;
constexpr int kMinClusterSize = 5;

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

struct LivePoint {
  Vector unit;
  Vector point;
  double log_likelihood = kNegInf;
};

struct DeadPoint {
  Vector point;
  double log_likelihood = kNegInf;
};

class Evaluator {
 public:
  Evaluator(const LogDensity& density, const PriorTransform& transform, int dimension,
            SamplerDiagnostics& diagnostics)
      : density_(density), transform_(transform), dimension_(dimension), diagnostics_(diagnostics) {}

  LivePoint at(const Vector& unit) const {
    LivePoint p;
    p.unit = unit;
    p.point.resize(dimension_);
    transform_(std::span<const double>(unit.data(), unit.size()),
               std::span<double>(p.point.data(), p.point.size()));
    const double value = density_(std::span<const double>(p.point.data(), p.point.size()));
    ++diagnostics_.likelihood_evaluations;
    p.log_likelihood = std::isnan(value) ? kNegInf : value;
    return p;
  }

 private:
  const LogDensity& density_;
  const PriorTransform& transform_;
  int dimension_;
  SamplerDiagnostics& diagnostics_;
};

bool inside_unit_cube(const Vector& u) {
  return (u.array() > 0.0).all() && (u.array() < 1.0).all();
}

// log(exp(a) - exp(b)) for a >= b.
double log_difference(double a, double b) {
  if (b == kNegInf) return a;
  if (!(a > b)) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

// Connected components of the symmetrised k-nearest-neighbour graph of
// `points` in unit-cube coordinates. k grows with the point count so that
// random gaps inside one mode do not cut the graph.
std::vector<int> neighbour_components(const std::vector<const Vector*>& points) {
  const std::size_t m = points.size();
  const std::size_t dim = static_cast<std::size_t>(points.front()->size());
  std::vector<double> flat(m * dim);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t d = 0; d < dim; ++d) flat[i * dim + d] = (*points[i])(static_cast<Eigen::Index>(d));
  }
  std::vector<int> parent(m);
  for (std::size_t i = 0; i < m; ++i) parent[i] = static_cast<int>(i);
  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const std::size_t k = std::min(std::max(kNeighbours, m / 40), m - 1);
  std::vector<double> dist(m), scratch(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = &flat[i * dim];
    for (std::size_t j = 0; j < m; ++j) {
      const double* xj = &flat[j * dim];
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) sq += (xi[d] - xj[d]) * (xi[d] - xj[d]);
      dist[j] = sq;
    }
    scratch = dist;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
    const double radius = scratch[k];
    for (std::size_t j = 0; j < m; ++j) {
      if (dist[j] <= radius) parent[root(static_cast<int>(i))] = root(static_cast<int>(j));
    }
  }
  std::vector<int> label(m, -1), out(m);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const int r = root(static_cast<int>(i));
    if (label[r] < 0) label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

// Splits every cluster whose live points fall into separate neighbourhood
// components; children share the parent's volume by point count. Components
// holding under 5% of the cluster are tail fragments and rejoin the component
// of their nearest point.
void split_clusters(const std::vector<LivePoint>& live, std::vector<int>& member,
                    std::vector<double>& log_volume, std::vector<int>& size) {
  const std::size_t existing = size.size();
  for (std::size_t c = 0; c < existing; ++c) {
    const int min_size = std::max(kMinClusterSize, size[c] / 20);
    if (size[c] < 2 * min_size) continue;
    std::vector<std::size_t> idx;
    std::vector<const Vector*> pts;
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (member[k] == static_cast<int>(c)) {
        idx.push_back(k);
        pts.push_back(&live[k].unit);
      }
    }
    auto comp = neighbour_components(pts);
    int parts = *std::max_element(comp.begin(), comp.end()) + 1;
    if (parts < 2) continue;
    std::vector<int> count(parts, 0);
    for (int label : comp) ++count[label];
    const std::size_t m = comp.size();
    for (std::size_t i = 0; i < m; ++i) {
      if (count[comp[i]] >= min_size) continue;
      double best = std::numeric_limits<double>::infinity();
      int target = comp[i];
      for (std::size_t j = 0; j < m; ++j) {
        if (count[comp[j]] < min_size) continue;
        const double d = (*pts[i] - *pts[j]).squaredNorm();
        if (d < best) {
          best = d;
          target = comp[j];
        }
      }
      comp[i] = target;
    }
    // Relabel the surviving components densely.
    std::vector<int> relabel(parts, -1);
    int next = 0;
    for (int& label : comp) {
      if (relabel[label] < 0) relabel[label] = next++;
      label = relabel[label];
    }
    parts = next;
    if (parts < 2) continue;
    count.assign(parts, 0);
    for (int label : comp) ++count[label];

    const double parent_volume = log_volume[c];
    const double parent_size = size[c];
    for (int part = 0; part < parts; ++part) {
      const int target = part == 0 ? static_cast<int>(c) : static_cast<int>(size.size());
      if (part > 0) {
        log_volume.push_back(0.0);
        size.push_back(0);
      }
      log_volume[target] = parent_volume + std::log(count[part] / parent_size);
      size[target] = count[part];
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (comp[r] == part) member[idx[r]] = target;
      }
    }
  }
}

}  // namespace

void SamplerConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (n_live < 2) fail("n_live must be at least 2");
  if (!(termination_fraction > 0.0)) fail("termination_fraction must be positive");
  if (max_iterations < 1) fail("max_iterations must be positive");
  if (steps_per_replacement < 0) fail("steps_per_replacement must be nonnegative");
}

Vector WeightedPosterior::normalized_weights() const {
  Vector w(static_cast<Eigen::Index>(draws.size()));
  for (std::size_t i = 0; i < draws.size(); ++i) w(i) = std::exp(draws[i].log_weight);
  const double total = w.sum();
  return total > 0.0 ? Vector(w / total) : w;
}

double WeightedPosterior::effective_sample_size() const {
  const Vector w = normalized_weights();
  const double sq = w.squaredNorm();
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

Vector prior_transform(std::span<const double> unit, const PriorConfig& cfg, long* clamps) {
  const boost::math::normal_distribution<double> normal(0.0, cfg.confounder_sd);
  Vector out(static_cast<Eigen::Index>(unit.size()));
  for (std::size_t k = 0; k < unit.size(); ++k) {
    const double u = unit[k];
    if (!(u > 0.0)) {
      out(k) = -kClampSigmas * cfg.confounder_sd;
      if (clamps) ++*clamps;
    } else if (!(u < 1.0)) {
      out(k) = kClampSigmas * cfg.confounder_sd;
      if (clamps) ++*clamps;
    } else {
      out(k) = boost::math::quantile(normal, u);
    }
  }
  return out;
}

WeightedPosterior run_nested(const LogDensity& log_density, int dimension,
                             const PriorTransform& transform, const SamplerConfig& cfg) {
  cfg.validate();
  if (dimension < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be at least 1");

  WeightedPosterior result;
  SamplerDiagnostics& diag = result.diagnostics;
  const Evaluator evaluate(log_density, transform, dimension, diag);
  const int n_live = cfg.n_live;
  const int steps = cfg.steps_for(dimension);
  // Recluster once per e-fold of compression.
  const long recluster_every = n_live;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<LivePoint> live;
  live.reserve(n_live);
  for (int k = 0; k < n_live; ++k) {
    Vector u(dimension);
    for (int d = 0; d < dimension; ++d) u(d) = uniform(rng);
    live.push_back(evaluate.at(u));
  }
  if (std::all_of(live.begin(), live.end(), [](const LivePoint& p) { return p.log_likelihood == kNegInf; })) {
    throw SamplerError(ErrorCode::SamplerConfiguration,
                       "every initial live point has zero likelihood; check the prior support", diag);
  }

  // Each cluster tracks its own prior volume, so new points are placed in
  // proportion to volume rather than to how many live points a mode holds.
  // Without this the split between separated modes drifts at random.
  std::vector<int> member(n_live, 0);
  std::vector<double> cluster_log_volume{0.0};
  std::vector<int> cluster_size{n_live};

  // Per-coordinate spread of each cluster, the random-walk step shape.
  std::vector<Vector> cluster_spread;
  auto refresh_spreads = [&] {
    const std::size_t count = cluster_size.size();
    std::vector<Vector> mean(count, Vector::Zero(dimension)), sq(count, Vector::Zero(dimension));
    std::vector<int> n(count, 0);
    Vector all_mean = Vector::Zero(dimension), all_sq = Vector::Zero(dimension);
    for (std::size_t k = 0; k < live.size(); ++k) {
      const int c = member[k];
      mean[c] += live[k].unit;
      sq[c] += live[k].unit.array().square().matrix();
      ++n[c];
      all_mean += live[k].unit;
      all_sq += live[k].unit.array().square().matrix();
    }
    auto sd = [](const Vector& m, const Vector& s2, double w) {
      return Vector((s2 / w - (m / w).array().square().matrix()).cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-12));
    };
    const Vector fallback = sd(all_mean, all_sq, static_cast<double>(live.size()));
    cluster_spread.resize(count);
    for (std::size_t c = 0; c < count; ++c) {
      // Too few points to estimate a shape: use the whole live set.
      cluster_spread[c] = n[c] >= dimension + 2 ? sd(mean[c], sq[c], n[c]) : fallback;
    }
  };
  const long refresh_every = std::max(1, n_live / 10);

  std::vector<DeadPoint> dead;
  std::vector<double> log_volumes{0.0};  // global X after each deletion
  double log_scale = 0.0;
  double log_z_running = kNegInf;
  const double log_termination = std::log(cfg.termination_fraction);

  for (long iteration = 0;; ++iteration) {
    if (iteration > 0 && iteration % recluster_every == 0) {
      split_clusters(live, member, cluster_log_volume, cluster_size);
      refresh_spreads();
    }
    const auto [min_it, max_it] = std::minmax_element(
        live.begin(), live.end(),
        [](const LivePoint& a, const LivePoint& b) { return a.log_likelihood < b.log_likelihood; });
    const double floor = min_it->log_likelihood;
    const double ceiling = max_it->log_likelihood;

    // Flat remainder: the live points already describe it exactly.
    if (floor == ceiling) break;
    const double log_volume = log_volumes.back();
    if (log_z_running != kNegInf && ceiling + log_volume - log_z_running < log_termination) break;
    if (iteration >= cfg.max_iterations) {
      std::ostringstream os;
      os << "nested sampling did not converge within " << cfg.max_iterations << " iterations";
      throw SamplerError(ErrorCode::SamplerMaxIterations, os.str(), diag);
    }

    const auto worst = static_cast<std::size_t>(min_it - live.begin());
    result.thresholds.push_back(floor);
    dead.push_back({live[worst].point, floor});
    {
      // The lowest of n uniform points leaves n / (n + 1) of its cluster's
      // volume on average; a cluster's last point takes the whole of it.
      const int c = member[worst];
      const int n_c = cluster_size[c];
      cluster_log_volume[c] = n_c > 1 ? cluster_log_volume[c] + std::log(n_c / (n_c + 1.0)) : kNegInf;
      --cluster_size[c];
      double total = kNegInf;
      for (double v : cluster_log_volume) total = log_add_exp(total, v);
      log_volumes.push_back(total);
      log_z_running = log_add_exp(log_z_running, floor + log_difference(log_volume, total));
    }
    ++diag.iterations;

    if (iteration % refresh_every == 0) refresh_spreads();

    // Pick a cluster by volume, then a starting point inside it.
    std::vector<double> cluster_weight(cluster_size.size(), 0.0);
    for (std::size_t c = 0; c < cluster_size.size(); ++c) {
      if (cluster_size[c] > 0) cluster_weight[c] = std::exp(cluster_log_volume[c] - log_volumes.back());
    }
    std::discrete_distribution<std::size_t> pick_cluster(cluster_weight.begin(), cluster_weight.end());
    const std::size_t chosen = pick_cluster(rng);
    std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
    std::size_t start_index = worst;
    while (start_index == worst || member[start_index] != static_cast<int>(chosen)) start_index = pick(rng);
    const LivePoint& start = live[start_index];
    const Vector& spread = cluster_spread[chosen];

    LivePoint current = start;
    bool moved = false;
    for (int attempt = 0; attempt < kMaxWalkAttempts && !moved; ++attempt) {
      current = start;
      int accepted = 0;
      for (int s = 0; s < steps; ++s) {
        Vector proposal = current.unit;
        const double step = std::exp(log_scale);
        for (int d = 0; d < dimension; ++d) proposal(d) += step * spread(d) * normal(rng);
        if (!inside_unit_cube(proposal)) {
          ++diag.rejected_moves;
          continue;
        }
        LivePoint candidate = evaluate.at(proposal);
        if (candidate.log_likelihood > floor) {
          current = std::move(candidate);
          ++accepted;
          ++diag.accepted_moves;
        } else {
          ++diag.rejected_moves;
        }
      }
      const double rate = static_cast<double>(accepted) / steps;
      log_scale = std::clamp(log_scale + (rate - 0.5), -30.0, 2.0);
      moved = accepted > 0;
      if (!moved) ++diag.stalled_walks;
    }
    assert(!moved || current.log_likelihood > floor);
    if (!moved) {
      throw SamplerError(ErrorCode::SamplerConfiguration,
                         "constrained random walk failed to move above the likelihood floor", diag);
    }
    live[worst] = std::move(current);
    member[worst] = static_cast<int>(chosen);
    ++cluster_size[chosen];
  }
  diag.final_step_scale = std::exp(log_scale);
  diag.clusters = static_cast<long>(std::count_if(cluster_size.begin(), cluster_size.end(), [](int n) { return n > 0; }));

  // Trapezoid rule over the volume sequence X_0 = 1 > X_1 > ..., with the
  // likelihood held flat below the first dead point; each final live point
  // takes an equal share of its cluster's remaining volume.
  const std::size_t k_dead = dead.size();
  auto log_interval = [&](std::size_t k) {  // log(X_{k-1} - X_k), k >= 1
    return log_difference(log_volumes[k - 1], log_volumes[k]);
  };
  std::vector<double> log_weights;
  std::vector<std::pair<Vector, double>> points;
  log_weights.reserve(k_dead + live.size());
  for (std::size_t k = 1; k <= k_dead; ++k) {
    double log_share = k == 1 ? log_interval(1) : log_interval(k) - std::log(2.0);
    if (k < k_dead) log_share = log_add_exp(log_share, log_interval(k + 1) - std::log(2.0));
    const auto& d = dead[k - 1];
    log_weights.push_back(d.log_likelihood + log_share);
    points.emplace_back(d.point, d.log_likelihood);
  }
  std::vector<std::size_t> order(live.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return live[a].log_likelihood < live[b].log_likelihood; });
  for (std::size_t k : order) {
    const int c = member[k];
    log_weights.push_back(live[k].log_likelihood + cluster_log_volume[c] - std::log(static_cast<double>(cluster_size[c])));
    points.emplace_back(live[k].point, live[k].log_likelihood);
  }

  double log_z = kNegInf;
  for (double w : log_weights) log_z = log_add_exp(log_z, w);
  result.log_evidence = log_z;

  double information = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    if (log_weights[k] == kNegInf) continue;
    const double p = std::exp(log_weights[k] - log_z);
    if (p > 0.0) information += p * (points[k].second - log_z);
  }
  result.information = std::max(information, 0.0);
  result.log_evidence_error = std::sqrt(result.information / n_live);

  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    if (log_weights[k] == kNegInf) continue;
    WeightedDraw draw;
    draw.point = std::move(points[k].first);
    draw.log_likelihood = points[k].second;
    draw.log_weight = log_weights[k] - log_z;
    result.draws.push_back(std::move(draw));
  }
  return result;
}

WeightedPosterior sample_causal_posterior(const CovarianceMatrix& s_hat, const ConfounderLayout& layout,
                                          const PriorConfig& prior_cfg,
                                          const SamplerConfig& sampler_cfg) {
  prior_cfg.validate();
  sampler_cfg.validate();
  if (layout.n() != s_hat.dim()) {
    throw Error(ErrorCode::InvalidArgument, "confounder layout does not match covariance dimension");
  }

  PosteriorDiagnostics posterior_diag;
  WeightedPosterior result;
  if (layout.dimension() == 0) {
    // No free confounders: the posterior is a point mass at Theta*(0, S).
    const Matrix zero = Matrix::Zero(s_hat.dim(), pair_count(s_hat.dim()));
    WeightedDraw draw;
    draw.point = Vector(0);
    draw.log_likelihood = log_laplace_term(zero, s_hat, prior_cfg, &posterior_diag);
    draw.log_weight = 0.0;
    result.log_evidence = draw.log_likelihood;
    result.draws.push_back(std::move(draw));
  } else {
    long clamps = 0;
    const LogDensity density = [&](std::span<const double> c) {
      return log_laplace_term(layout.to_matrix(c), s_hat, prior_cfg, &posterior_diag);
    };
    const PriorTransform transform = [&](std::span<const double> unit, std::span<double> out) {
      const Vector x = prior_transform(unit, prior_cfg, &clamps);
      std::copy(x.data(), x.data() + x.size(), out.begin());
    };
    result = run_nested(density, layout.dimension(), transform, sampler_cfg);
    result.diagnostics.boundary_clamps = clamps;
  }
  result.diagnostics.non_pd_evaluations = posterior_diag.non_pd_hessian.load();
  result.diagnostics.degenerate_recoveries = posterior_diag.degenerate_recovery.load();

  for (auto& draw : result.draws) {
    draw.theta = recover_theta(s_hat, layout.to_matrix(std::span<const double>(draw.point.data(), draw.point.size())));
  }
  return result;
}

}  // namespace causalslab
