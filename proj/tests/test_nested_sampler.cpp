#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "causalslab/errors.hpp"
#include "causalslab/nested_sampler.hpp"
#include "causalslab/scenario.hpp"

using namespace causalslab;

namespace {

PriorTransform uniform_box(double lo, double hi) {
  return [lo, hi](std::span<const double> u, std::span<double> out) {
    for (std::size_t k = 0; k < u.size(); ++k) out[k] = lo + (hi - lo) * u[k];
  };
}

// Unnormalised standard normal: its integral over the box is 2 pi.
double gaussian_2d(std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); }

// 0.7 N(-2, 0.1^2) + 0.3 N(2, 0.1^2).
double mixture(std::span<const double> x) {
  const double sd = 0.1;
  auto comp = [&](double mu) { return -0.5 * std::pow((x[0] - mu) / sd, 2) - std::log(sd * std::sqrt(2.0 * M_PI)); };
  const double a = std::log(0.7) + comp(-2.0), b = std::log(0.3) + comp(2.0);
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double mass_where(const WeightedPosterior& post, double lo, double hi) {
  const Vector w = post.normalized_weights();
  double mass = 0.0;
  for (std::size_t k = 0; k < post.draws.size(); ++k) {
    const double x = post.draws[k].point(0);
    if (x >= lo && x <= hi) mass += w(static_cast<Eigen::Index>(k));
  }
  return mass;
}

}  // namespace

TEST_CASE("prior transform maps the cube onto the Gaussian confounder prior") {
  const PriorConfig cfg;
  const std::vector<double> centre{0.5, 0.5};
  const Vector c = prior_transform(centre, cfg);
  CHECK(c(0) == 0.0);
  CHECK(c(1) == 0.0);
  const std::vector<double> one_sd{0.841345, 0.5};
  CHECK(prior_transform(one_sd, cfg)(0) == doctest::Approx(1.0).epsilon(1e-5));

  long clamps = 0;
  const std::vector<double> edges{0.0, 1.0};
  const Vector e = prior_transform(edges, cfg, &clamps);
  CHECK(e(0) == -8.0);
  CHECK(e(1) == 8.0);
  CHECK(clamps == 2);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int count = 100000;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  for (int k = 0; k < count; ++k) {
    const std::vector<double> u{unif(rng), unif(rng)};
    const Vector x = prior_transform(u, cfg);
    for (int d = 0; d < 2; ++d) {
      sum[d] += x(d);
      sq[d] += x(d) * x(d);
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double mean = sum[d] / count;
    CHECK(sq[d] / count - mean * mean == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("evidence of a 2D Gaussian under a uniform box prior") {
  const double truth = std::log(2.0 * M_PI / 100.0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SamplerConfig cfg;
    cfg.seed = seed;
    const auto post = run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), cfg);
    CHECK(std::abs(post.log_evidence - truth) < 3.0 * post.log_evidence_error);
    CHECK(post.log_evidence_error > 0.0);
    CHECK(post.normalized_weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("doubling the live points is consistent with the reported errors") {
  SamplerConfig small;
  small.seed = 4;
  SamplerConfig large = small;
  large.n_live = 800;
  const auto a = run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), small);
  const auto b = run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), large);
  const double combined = std::hypot(a.log_evidence_error, b.log_evidence_error);
  CHECK(std::abs(a.log_evidence - b.log_evidence) < 3.0 * combined);
}

TEST_CASE("constant density gives the constant as log-evidence with uniform weights") {
  SamplerConfig cfg;
  cfg.n_live = 50;
  const auto post = run_nested([](std::span<const double>) { return -3.25; }, 2, uniform_box(0.0, 1.0), cfg);
  CHECK(post.log_evidence == doctest::Approx(-3.25).epsilon(1e-12));
  const Vector w = post.normalized_weights();
  CHECK((w.array() - w(0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("mixture mass split") {
  SamplerConfig cfg;
  cfg.seed = 5;
  // The split between separated modes carries compression noise of order
  // sqrt(H / n) per mode (about 0.03 at 400 live points); 8000 brings it
  // well inside the tolerance.
  cfg.n_live = 8000;
  const auto post = run_nested(mixture, 1, uniform_box(-5.0, 5.0), cfg);
  CHECK(std::abs(mass_where(post, 0.0, 5.0) - 0.3) < 0.02);
  CHECK(std::abs(post.log_evidence - std::log(0.1)) < 3.0 * post.log_evidence_error);
  CHECK(post.diagnostics.clusters >= 1);
}

TEST_CASE("same seed reproduces the run, likelihood floors rise") {
  SamplerConfig cfg;
  cfg.seed = 6;
  cfg.n_live = 100;
  const auto a = run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), cfg);
  const auto b = run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), cfg);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t k = 0; k < a.draws.size(); ++k) {
    CHECK(a.draws[k].point == b.draws[k].point);
    CHECK(a.draws[k].log_weight == b.draws[k].log_weight);
  }
  CHECK(a.log_evidence == b.log_evidence);
  for (std::size_t k = 1; k < a.thresholds.size(); ++k) CHECK(a.thresholds[k] >= a.thresholds[k - 1]);
}

TEST_CASE("sampler failures") {
  SamplerConfig cfg;
  cfg.n_live = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = SamplerConfig{};
  cfg.max_iterations = 10;
  try {
    run_nested(gaussian_2d, 2, uniform_box(-5.0, 5.0), cfg);
    FAIL("expected the iteration limit to trip");
  } catch (const SamplerError& e) {
    CHECK(e.code() == ErrorCode::SamplerMaxIterations);
    CHECK(e.diagnostics().iterations == 10);
  }

  cfg = SamplerConfig{};
  try {
    run_nested([](std::span<const double>) { return -std::numeric_limits<double>::infinity(); }, 2,
               uniform_box(0.0, 1.0), cfg);
    FAIL("expected a configuration error");
  } catch (const SamplerError& e) {
    CHECK(e.code() == ErrorCode::SamplerConfiguration);
  }
}

TEST_CASE("causal posterior draws carry Theta and pair up under sign flips") {
  const auto sc = named_scenario("a");
  const auto s = sc.covariance();
  const PriorConfig prior;
  SamplerConfig cfg;
  cfg.seed = 7;
  const auto post = sample_causal_posterior(s, sc.free_pairs, prior, cfg);
  REQUIRE(post.draws.size() > 100);
  for (std::size_t k = 0; k < 100; ++k) {
    const auto& draw = post.draws[k * (post.draws.size() / 100)];
    REQUIRE(draw.theta.has_value());
    const Vector c = draw.point;
    const Matrix plus = sc.free_pairs.to_matrix(std::span<const double>(c.data(), c.size()));
    const double at_plus = log_posterior_confounders(plus, s, prior, sc.free_pairs);
    CHECK(log_posterior_confounders(-plus, s, prior, sc.free_pairs) == at_plus);
    // The attached Theta reproduces S exactly.
    const ScaledParameters scaled{draw.theta->B_tilde, plus, draw.theta->V};
    CHECK((implied_covariance_scaled(scaled).matrix() - s.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }

  const auto again = sample_causal_posterior(s, sc.free_pairs, prior, cfg);
  REQUIRE(again.draws.size() == post.draws.size());
  bool identical = true;
  for (std::size_t k = 0; k < post.draws.size(); ++k) identical &= again.draws[k].point == post.draws[k].point;
  CHECK(identical);
}

TEST_CASE("no free confounders gives a point mass") {
  const auto s = named_scenario("a").covariance();
  const auto post = sample_causal_posterior(s, ConfounderLayout(3, {}), PriorConfig{}, SamplerConfig{});
  REQUIRE(post.draws.size() == 1);
  CHECK(post.draws[0].theta->B(2, 1) == doctest::Approx(1.0));
  CHECK(post.effective_sample_size() == doctest::Approx(1.0));
}
