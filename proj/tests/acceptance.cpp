// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "causalslab/analysis.hpp"
#include "causalslab/estimators.hpp"
#include "causalslab/nested_sampler.hpp"
#include "causalslab/posterior.hpp"
#include "causalslab/scenario.hpp"
#include "causalslab/theta_recovery.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace causalslab;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int number, const std::string& title, double runtime_limit_s,
               const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (runtime_limit_s > 0.0) out.require(seconds < runtime_limit_s, "runtime limit " + std::to_string(runtime_limit_s) + " s");
  if (!out.pass) ++failures;
  std::printf("%s criterion %d: %s (%.2f s)%s\n", out.pass ? "PASS" : "FAIL", number, title.c_str(), seconds,
              out.detail.str().c_str());
  std::fflush(stdout);
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

SamplerConfig seeded(std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.seed = seed;
  return cfg;
}

const Target& b32() {
  static const Target t = Target::parse("b32", 3);
  return t;
}

WeightedPosterior scenario_posterior(const std::string& name, const PriorConfig& prior = {}) {
  const auto sc = named_scenario(name);
  return sample_causal_posterior(sc.covariance(), sc.free_pairs, prior, seeded(1));
}

bool has_mode_in(const std::vector<Mode>& modes, double lo, double hi, std::size_t first = 0, std::size_t count = SIZE_MAX) {
  for (std::size_t k = first; k < modes.size() && k - first < count; ++k) {
    if (modes[k].location >= lo && modes[k].location <= hi) return true;
  }
  return false;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

int main() {
  std::printf("causalslab acceptance suite (%d worker threads)\n", workers());

  criterion(1, "Theta recovery round trip, 1000 instances, n in 2..5, 1e-10 relative", 5.0, [](Outcome& out) {
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + trial % 4;
      const auto s = implied_covariance(testing_support::random_parameters(n, rng));
      const Matrix c = testing_support::random_c_tilde(n, rng);
      const auto theta = recover_theta(s, c);
      const Matrix back = implied_covariance_scaled({theta.B_tilde, c, theta.V}).matrix();
      worst = std::max(worst, (back - s.matrix()).cwiseAbs().maxCoeff() / s.matrix().cwiseAbs().maxCoeff());
    }
    out.detail << " worst relative error " << fmt(worst);
    out.require(worst < 1e-10, "relative error below 1e-10");
  });

  criterion(2, "Hessian vs central differences (1e-5 abs) and raw vs Q/L form (1e-10), 100 unit-scale instances", 30.0,
            [](Outcome& out) {
              std::mt19937_64 rng(2002);
              double worst_fd = 0.0, worst_forms = 0.0;
              for (int trial = 0; trial < 100; ++trial) {
                const int n = 2 + trial % 3;
                const auto s = implied_covariance(testing_support::unit_scale_parameters(n, rng));
                const Matrix c = testing_support::random_c_tilde(n, rng, 1.0);
                // Theta*(C~, S) reproduces S exactly, so this is a maximum-likelihood point.
                const auto theta = recover_theta(s, c);
                const Matrix raw = hessian(theta, c);
                const Matrix chol = hessian_cholesky_form(theta, c, s);
                const Matrix fd = testing_support::finite_difference_negative_hessian(theta, c, s, 1e-5);
                worst_fd = std::max(worst_fd, (raw - fd).cwiseAbs().maxCoeff());
                worst_forms = std::max(worst_forms, (raw - chol).cwiseAbs().maxCoeff());
              }
              out.detail << " worst |H - FD| " << fmt(worst_fd) << ", worst |raw - Q/L| " << fmt(worst_forms);
              out.require(worst_fd < 1e-5, "finite-difference agreement");
              out.require(worst_forms < 1e-10, "raw vs Q/L agreement");
            });

  criterion(3, "posterior invariant under column sign flips, exactly, 100 points per scenario", 0.0, [](Outcome& out) {
    std::mt19937_64 rng(3003);
    const PriorConfig prior;
    long checked = 0, mismatched = 0;
    for (const auto& name : scenario_names()) {
      const auto s = named_scenario(name).covariance();
      for (int trial = 0; trial < 100; ++trial) {
        const Matrix c = testing_support::random_c_tilde(3, rng, 3.0);
        const double base = log_posterior_confounders(c, s, prior);
        for (int col = 0; col < c.cols(); ++col) {
          Matrix flipped = c;
          flipped.col(col) *= -1.0;
          ++checked;
          if (log_posterior_confounders(flipped, s, prior) != base) ++mismatched;
        }
        ++checked;
        if (log_posterior_confounders(-c, s, prior) != base) ++mismatched;
      }
    }
    out.detail << " " << checked << " flips, " << mismatched << " mismatches";
    out.require(mismatched == 0, "exact invariance");
  });

  criterion(4, "nested sampler: 2D Gaussian log Z within 3x error over 10 seeds; mixture split within 0.02", 120.0,
            [](Outcome& out) {
              const double truth = std::log(2.0 * M_PI / 100.0);
              const PriorTransform box = [](std::span<const double> u, std::span<double> x) {
                for (std::size_t k = 0; k < u.size(); ++k) x[k] = -5.0 + 10.0 * u[k];
              };
              const LogDensity gaussian = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); };
              int within = 0;
              double worst_sigmas = 0.0;
              for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto post = run_nested(gaussian, 2, box, seeded(seed));
                const double sigmas = std::abs(post.log_evidence - truth) / post.log_evidence_error;
                worst_sigmas = std::max(worst_sigmas, sigmas);
                within += sigmas < 3.0;
              }
              out.detail << " Gaussian: " << within << "/10 within 3 sigma (worst " << fmt(worst_sigmas) << ")";
              out.require(within == 10, "every Gaussian run within 3x the reported error");

              const LogDensity mixture = [](std::span<const double> x) {
                const double sd = 0.1;
                auto comp = [&](double mu) {
                  return -0.5 * std::pow((x[0] - mu) / sd, 2) - std::log(sd * std::sqrt(2.0 * M_PI));
                };
                const double a = std::log(0.7) + comp(-2.0), b = std::log(0.3) + comp(2.0);
                const double m = std::max(a, b);
                return m + std::log(std::exp(a - m) + std::exp(b - m));
              };
              // Mode-split noise is about 0.03 at 400 live points and shrinks as
              // 1/sqrt(n_live); 8000 puts the tolerance near three standard errors.
              SamplerConfig cfg = seeded(1);
              cfg.n_live = 8000;
              const auto post = run_nested(mixture, 1, box, cfg);
              const Vector w = post.normalized_weights();
              double right = 0.0;
              for (std::size_t k = 0; k < post.draws.size(); ++k) {
                if (post.draws[k].point(0) >= 0.0) right += w(static_cast<Eigen::Index>(k));
              }
              out.detail << "; mixture mass in [0,5] " << fmt(right) << " (n_live 8000)";
              out.require(std::abs(right - 0.3) <= 0.02, "mixture split within 0.02");
            });

  criterion(5, "IV / LCD exact on (a), (b), (f); partial correlations", 0.0, [](Outcome& out) {
    const auto a = named_scenario("a").covariance();
    const auto b = named_scenario("b").covariance();
    const auto f = named_scenario("f").covariance();
    const auto c = named_scenario("c").covariance();
    const double iv_a = iv_estimate(a, 0, 1, 2), lcd_a = lcd_estimate(a, 1, 2);
    const double iv_b = iv_estimate(b, 0, 1, 2);
    const double iv_f = iv_estimate(f, 0, 1, 2), lcd_f = lcd_estimate(f, 1, 2);
    const double rho_a = partial_correlation(a, 0, 2, 1), rho_f = partial_correlation(f, 0, 2, 1);
    const double rho_c = partial_correlation(c, 0, 2, 1);
    out.detail << " iv(a) " << fmt(iv_a) << ", lcd(a) " << fmt(lcd_a) << ", iv(b) " << fmt(iv_b) << ", iv(f) "
               << fmt(iv_f) << ", lcd(f) " << fmt(lcd_f) << ", rho(a) " << fmt(rho_a) << ", rho(f) " << fmt(rho_f)
               << ", rho(c) " << fmt(rho_c);
    out.require(iv_a == 1.0 && lcd_a == 1.0, "scenario (a) estimates equal 1");
    out.require(iv_b == 1.0, "scenario (b) IV equals 1");
    out.require(iv_f == 2.0 && lcd_f == 2.0, "scenario (f) estimates equal 2");
    out.require(std::abs(rho_a) < 1e-12 && std::abs(rho_f) < 1e-12, "zero partial correlations");
    out.require(std::abs(rho_c - 0.0353) <= 1e-4, "rho(c) = 0.0353 +- 1e-4");
  });

  criterion(6, "scenario (f) covariance equals the unconfounded b32 = 2 model to 1e-12", 0.0, [](Outcome& out) {
    const auto f = named_scenario("f").covariance();
    const Matrix other = testing_support::mat3({1, 1, 2, 1, 3, 6, 2, 6, 15});
    const double diff = (f.matrix() - other).cwiseAbs().maxCoeff();
    out.detail << " max entrywise difference " << fmt(diff);
    out.require(diff <= 1e-12, "entrywise agreement");
  });

  criterion(7, "scenario (a): mass in [0.9,1.1] = 0.85 +- 0.10; secondary mode in [-0.1,0.1] with 0.2%..6% mass",
            300.0, [](Outcome& out) {
              const auto post = scenario_posterior("a");
              const auto s = summarize(post, b32());
              const double main = interval_mass(post, b32(), 0.9, 1.1);
              const double zero = interval_mass(post, b32(), -0.1, 0.1);
              out.detail << " mass " << fmt(main) << ", near-zero mass " << fmt(zero) << ", top mode "
                         << fmt(s.modes.at(0).location);
              out.require(std::abs(main - 0.85) <= 0.10, "main mass");
              out.require(has_mode_in(s.modes, -0.1, 0.1, 1), "secondary KDE mode in [-0.1, 0.1]");
              out.require(zero >= 0.002 && zero <= 0.06, "near-zero mass between 0.2% and 6%");
            });

  criterion(8, "scenario (b): mass in [0.9,1.1] = 0.71 +- 0.12; KDE mode in [1.35,1.65]", 300.0, [](Outcome& out) {
    const auto post = scenario_posterior("b");
    const auto s = summarize(post, b32());
    const double main = interval_mass(post, b32(), 0.9, 1.1);
    out.detail << " mass " << fmt(main);
    out.require(std::abs(main - 0.71) <= 0.12, "main mass");
    out.require(has_mode_in(s.modes, 1.35, 1.65), "mode near 1.5");
  });

  criterion(9, "scenario (c) mass 0.80 +- 0.10, scenario (d) mass 0.69 +- 0.12", 300.0, [](Outcome& out) {
    const double c = interval_mass(scenario_posterior("c"), b32(), 0.9, 1.1);
    const double d = interval_mass(scenario_posterior("d"), b32(), 0.9, 1.1);
    out.detail << " mass (c) " << fmt(c) << ", mass (d) " << fmt(d);
    out.require(std::abs(c - 0.80) <= 0.10, "scenario (c)");
    out.require(std::abs(d - 0.69) <= 0.12, "scenario (d)");
  });

  criterion(10, "scenario (e): top modes near 1.5 and 2.0, mass 2%..15%; (f): top mode in [1.9,2.1], mass 0.1%..3%",
            300.0, [](Outcome& out) {
              const auto e = scenario_posterior("e");
              const auto se = summarize(e, b32());
              const double me = interval_mass(e, b32(), 0.9, 1.1);
              const auto f = scenario_posterior("f");
              const auto sf = summarize(f, b32());
              const double mf = interval_mass(f, b32(), 0.9, 1.1);
              out.detail << " (e) modes " << fmt(se.modes.at(0).location) << ", "
                         << (se.modes.size() > 1 ? fmt(se.modes[1].location) : std::string("-")) << ", mass "
                         << fmt(me) << "; (f) top mode " << fmt(sf.modes.at(0).location) << ", mass " << fmt(mf);
              // "Near" uses the windows the other criteria give these values.
              out.require(has_mode_in(se.modes, 1.35, 1.65, 0, 2) && has_mode_in(se.modes, 1.9, 2.1, 0, 2),
                          "(e) two highest modes near 1.5 and 2.0");
              out.require(me >= 0.02 && me <= 0.15, "(e) mass");
              out.require(has_mode_in(sf.modes, 1.9, 2.1, 0, 1), "(f) highest mode");
              out.require(mf >= 0.001 && mf <= 0.03, "(f) mass");
            });

  criterion(11, "scenario (c) evidence ratio p(1>2>3)/p(1>3>2) and its spike-variance profile", 300.0,
            [](Outcome& out) {
              const auto sc = named_scenario("c");
              const std::vector<double> spikes{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
              const auto rows = evidence_sweep(sc.covariance(), sc.free_pairs, parse_orderings("1>2>3;1>3>2", 3),
                                               spikes, PriorConfig{}, seeded(1), workers());
              double best_factor = INFINITY;
              out.detail << " ratios:";
              for (const auto& row : rows) {
                if (row.failure) {
                  out.require(false, "sweep row failed: " + *row.failure);
                  continue;
                }
                const auto& r = row.comparison.results;
                const double ratio = row.comparison.ratio(0, 1);
                const double sigma = std::hypot(r[0].log_evidence_error, r[1].log_evidence_error);
                out.detail << " " << fmt(row.v_spike) << "->" << fmt(ratio);
                best_factor = std::min(best_factor, std::abs(std::log(ratio / 3.358)));
                if (row.v_spike == 1e-4) out.require(ratio > 1.0, "ratio > 1 at the default spike");
                if (row.v_spike == 1.0) {
                  out.require(std::abs(std::log(ratio)) <= 3.0 * sigma, "ratio ~ 1 (within 3 sigma) at v_spike = v_slab");
                }
                if (row.v_spike <= 1e-2 && row.v_spike >= 1e-5) {
                  out.require(std::log(ratio) > 3.0 * sigma, "ratio above 1 (by 3 sigma) for intermediate spikes");
                }
              }
              out.detail << "; closest to 3.358 within factor " << fmt(std::exp(best_factor));
              out.require(best_factor <= std::log(2.0), "best-matching ratio within a factor of 2 of 3.358");
            });

  criterion(12, "scenario (c) spike sweep: top mode in [0.9,1.1] for v_spike 1e-3..1e-7; near-zero mass < 1% at 1",
            300.0, [](Outcome& out) {
              const auto sc = named_scenario("c");
              const std::vector<double> spikes{1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1.0};
              const auto rows = spike_sweep(sc.covariance(), sc.free_pairs, spikes, PriorConfig{}, seeded(1), b32(),
                                            {{-0.1, 0.1}}, workers());
              out.detail << " top modes:";
              for (const auto& row : rows) {
                if (row.failure) {
                  out.require(false, "sweep row failed: " + *row.failure);
                  continue;
                }
                if (row.v_spike == 1.0) {
                  out.detail << "; near-zero mass at v_spike 1: " << fmt(row.masses.at(0));
                  out.require(row.masses.at(0) < 0.01, "near-zero mass below 1% at v_spike = 1");
                } else {
                  const double top = row.modes.at(0).location;
                  out.detail << " " << fmt(row.v_spike) << "->" << fmt(top);
                  out.require(top >= 0.9 && top <= 1.1, "top mode in [0.9, 1.1]");
                }
              }
            });

  criterion(13, "fisher_z_test(0.03533, N, 1, 0.05) gives n_min_reject = 3079", 0.0, [](Outcome& out) {
    const auto r = fisher_z_test(0.03533, 100, 1, 0.05);
    const auto exact = fisher_min_samples(partial_correlation(named_scenario("c").covariance(), 0, 2, 1), 1, 0.05);
    out.detail << " n_min_reject " << (r.n_min_reject ? std::to_string(*r.n_min_reject) : std::string("none"))
               << " (unrounded scenario (c) correlation gives " << (exact ? std::to_string(*exact) : std::string("none"))
               << ")";
    out.require(r.n_min_reject && *r.n_min_reject == 3079, "n_min_reject == 3079");
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
