#include "causalslab/causalslab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>

#include "causalslab/analysis.hpp"
#include "causalslab/errors.hpp"
#include "causalslab/estimators.hpp"
#include "causalslab/io.hpp"
#include "causalslab/scenario.hpp"

using namespace causalslab;

struct cslab_model {
  CovarianceMatrix covariance;
  ConfounderLayout layout;
  std::optional<Scenario> scenario;
  long long sample_count = 0;
};

struct cslab_posterior {
  WeightedPosterior posterior;
  ConfounderLayout layout;
  int n;
};

namespace {

thread_local std::string last_error;

cslab_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return CSLAB_INVALID_ARGUMENT;
    case ErrorCode::NotPositiveDefinite: return CSLAB_NOT_POSITIVE_DEFINITE;
    case ErrorCode::DegenerateData: return CSLAB_DEGENERATE_DATA;
    case ErrorCode::NumericalDegeneracy: return CSLAB_NUMERICAL_DEGENERACY;
    case ErrorCode::WeakInstrument: return CSLAB_WEAK_INSTRUMENT;
    case ErrorCode::InsufficientSamples: return CSLAB_INSUFFICIENT_SAMPLES;
    case ErrorCode::SamplerConfiguration: return CSLAB_SAMPLER_CONFIGURATION;
    case ErrorCode::SamplerMaxIterations: return CSLAB_SAMPLER_MAX_ITERATIONS;
    case ErrorCode::Io: return CSLAB_IO;
  }
  return CSLAB_INTERNAL;
}

template <typename Body>
cslab_status guarded(Body&& body) {
  try {
    body();
    return CSLAB_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return CSLAB_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CSLAB_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void hand_out(char** out, const std::string& s) {
  if (out != nullptr) *out = duplicate(s);
}

PriorConfig to_prior(const cslab_prior_config* c) {
  PriorConfig cfg;
  if (c != nullptr) {
    cfg = {c->w_spike, c->w_slab, c->v_spike, c->v_slab, c->v_min, c->v_max, c->confounder_sd};
  }
  cfg.validate();
  return cfg;
}

SamplerConfig to_sampler(const cslab_sampler_config* c) {
  SamplerConfig cfg;
  if (c != nullptr) {
    cfg.n_live = c->n_live;
    cfg.termination_fraction = c->termination_fraction;
    cfg.max_iterations = static_cast<long>(c->max_iterations);
    cfg.seed = c->seed;
    cfg.steps_per_replacement = c->steps_per_replacement;
  }
  cfg.validate();
  return cfg;
}

std::vector<Interval> to_intervals(const double* values, std::size_t count) {
  std::vector<Interval> out;
  if (count > 0) require(values, "intervals");
  for (std::size_t k = 0; k < count; ++k) {
    const Interval iv{values[2 * k], values[2 * k + 1]};
    if (!(iv.lo < iv.hi)) throw Error(ErrorCode::InvalidArgument, "interval needs lo < hi");
    out.push_back(iv);
  }
  return out;
}

nlohmann::json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,mass\n";
  for (std::size_t k = 0; k < h.mass.size(); ++k) {
    out += format_double(h.edges[k]) + "," + format_double(h.edges[k + 1]) + "," + format_double(h.mass[k]) + "\n";
  }
  return out;
}

std::string kde_csv(const std::vector<std::pair<double, double>>& curve) {
  std::string out = "x,density\n";
  for (const auto& [x, d] : curve) out += format_double(x) + "," + format_double(d) + "\n";
  return out;
}

nlohmann::json comparison_json(const OrderingComparison& cmp) {
  auto rows = nlohmann::json::array();
  const auto ratios = cmp.evidence_ratios();
  for (std::size_t k = 0; k < cmp.results.size(); ++k) {
    const auto& r = cmp.results[k];
    rows.push_back({{"ordering", format_ordering(r.ordering)},
                    {"log_evidence", number_or_null(r.log_evidence)},
                    {"log_evidence_error", r.log_evidence_error},
                    {"ratio_to_first", number_or_null(ratios[k])}});
  }
  return {{"orderings", rows}};
}

}  // namespace

extern "C" {

const char* cslab_last_error(void) { return last_error.c_str(); }

const char* cslab_version(void) { return "0.1.0"; }

const char* cslab_status_name(cslab_status status) {
  switch (status) {
    case CSLAB_OK: return "ok";
    case CSLAB_INVALID_ARGUMENT: return "invalid argument";
    case CSLAB_NOT_POSITIVE_DEFINITE: return "not positive definite";
    case CSLAB_DEGENERATE_DATA: return "degenerate data";
    case CSLAB_NUMERICAL_DEGENERACY: return "numerical degeneracy";
    case CSLAB_WEAK_INSTRUMENT: return "weak instrument";
    case CSLAB_INSUFFICIENT_SAMPLES: return "insufficient samples";
    case CSLAB_SAMPLER_CONFIGURATION: return "sampler configuration";
    case CSLAB_SAMPLER_MAX_ITERATIONS: return "sampler exceeded max iterations";
    case CSLAB_IO: return "i/o error";
    case CSLAB_INTERNAL: return "internal error";
  }
  return "unknown";
}

void cslab_string_free(char* s) { std::free(s); }

void cslab_prior_config_init(cslab_prior_config* cfg) {
  if (cfg == nullptr) return;
  const PriorConfig d;
  *cfg = {d.w_spike, d.w_slab, d.v_spike, d.v_slab, d.v_min, d.v_max, d.confounder_sd};
}

void cslab_sampler_config_init(cslab_sampler_config* cfg) {
  if (cfg == nullptr) return;
  const SamplerConfig d;
  *cfg = {d.n_live, d.termination_fraction, d.max_iterations, d.seed, d.steps_per_replacement};
}

cslab_status cslab_model_from_scenario(const char* name_or_path, cslab_model** out) {
  return guarded([&] {
    require(name_or_path, "scenario");
    require(out, "out");
    Scenario sc = resolve_scenario(name_or_path);
    *out = new cslab_model{sc.covariance(), sc.free_pairs, sc, 0};
  });
}

cslab_status cslab_model_from_covariance_csv(const char* path, cslab_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    CovarianceMatrix s = read_covariance_csv(path);
    const int n = s.dim();
    *out = new cslab_model{std::move(s), ConfounderLayout::all_pairs(n), std::nullopt, 0};
  });
}

cslab_status cslab_model_from_data_csv(const char* path, cslab_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const Matrix data = read_data_csv(path);
    CovarianceMatrix s = sample_covariance(data);
    const int n = s.dim();
    *out = new cslab_model{std::move(s), ConfounderLayout::all_pairs(n), std::nullopt,
                           static_cast<long long>(data.rows())};
  });
}

cslab_status cslab_model_from_values(size_t n, const double* row_major, cslab_model** out) {
  return guarded([&] {
    require(row_major, "values");
    require(out, "out");
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
    const auto dim = static_cast<Eigen::Index>(n);
    Matrix m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(row_major, dim, dim);
    CovarianceMatrix s(std::move(m));
    *out = new cslab_model{std::move(s), ConfounderLayout::all_pairs(static_cast<int>(n)), std::nullopt, 0};
  });
}

cslab_status cslab_model_from_simulation(const char* name_or_path, int n_samples, uint64_t seed,
                                         cslab_model** out) {
  return guarded([&] {
    require(name_or_path, "scenario");
    require(out, "out");
    Scenario sc = resolve_scenario(name_or_path);
    CovarianceMatrix s = sample_covariance(simulate_data(sc.params, n_samples, seed));
    ConfounderLayout layout = sc.free_pairs;
    *out = new cslab_model{std::move(s), std::move(layout), std::move(sc), n_samples};
  });
}

void cslab_model_free(cslab_model* model) { delete model; }

size_t cslab_model_dim(const cslab_model* model) {
  return model == nullptr ? 0 : static_cast<size_t>(model->covariance.dim());
}

long long cslab_model_sample_count(const cslab_model* model) {
  return model == nullptr ? 0 : model->sample_count;
}

cslab_status cslab_model_covariance(const cslab_model* model, double* out_row_major) {
  return guarded([&] {
    require(model, "model");
    require(out_row_major, "out");
    const int n = model->covariance.dim();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) out_row_major[r * n + c] = model->covariance(r, c);
    }
  });
}

cslab_status cslab_model_set_free_pairs(cslab_model* model, const char* pairs) {
  return guarded([&] {
    require(model, "model");
    require(pairs, "pairs");
    model->layout = parse_pairs(pairs, model->covariance.dim());
  });
}

cslab_status cslab_model_free_pairs(const cslab_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    hand_out(out, format_pairs(model->layout));
  });
}

cslab_status cslab_model_covariance_csv(const cslab_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    hand_out(out, covariance_to_csv(model->covariance));
  });
}

cslab_status cslab_model_parameters_json(const cslab_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    hand_out(out, model->scenario ? scenario_to_json(*model->scenario).dump(2) : std::string("null"));
  });
}

cslab_status cslab_posterior_sample(const cslab_model* model, const cslab_prior_config* prior,
                                    const cslab_sampler_config* sampler, cslab_posterior** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    WeightedPosterior post =
        sample_causal_posterior(model->covariance, model->layout, to_prior(prior), to_sampler(sampler));
    *out = new cslab_posterior{std::move(post), model->layout, model->covariance.dim()};
  });
}

void cslab_posterior_free(cslab_posterior* posterior) { delete posterior; }

double cslab_posterior_log_evidence(const cslab_posterior* posterior) {
  return posterior == nullptr ? std::nan("") : posterior->posterior.log_evidence;
}

double cslab_posterior_log_evidence_error(const cslab_posterior* posterior) {
  return posterior == nullptr ? std::nan("") : posterior->posterior.log_evidence_error;
}

size_t cslab_posterior_draw_count(const cslab_posterior* posterior) {
  return posterior == nullptr ? 0 : posterior->posterior.draws.size();
}

double cslab_posterior_effective_sample_size(const cslab_posterior* posterior) {
  return posterior == nullptr ? 0.0 : posterior->posterior.effective_sample_size();
}

cslab_status cslab_posterior_interval_mass(const cslab_posterior* posterior, const char* target, double lo,
                                           double hi, double* out) {
  return guarded([&] {
    require(posterior, "posterior");
    require(target, "target");
    require(out, "out");
    *out = interval_mass(posterior->posterior, Target::parse(target, posterior->n), lo, hi);
  });
}

cslab_status cslab_posterior_json(const cslab_posterior* posterior, char** out) {
  return guarded([&] {
    require(posterior, "posterior");
    require(out, "out");
    hand_out(out, posterior_to_json(posterior->posterior, posterior->layout).dump());
  });
}

cslab_status cslab_posterior_summary(const cslab_posterior* posterior, const char* target,
                                     const double* intervals, size_t n_intervals, int bins, double bandwidth,
                                     char** summary_json, char** histogram_out, char** kde_out) {
  return guarded([&] {
    require(posterior, "posterior");
    require(target, "target");
    SummaryOptions options;
    options.bins = bins;
    if (bandwidth > 0.0) options.bandwidth = bandwidth;
    options.intervals = to_intervals(intervals, n_intervals);
    const PosteriorSummary s = summarize(posterior->posterior, Target::parse(target, posterior->n), options);

    nlohmann::json doc;
    doc["target"] = s.target;
    nlohmann::json masses = nlohmann::json::object();
    auto listed = nlohmann::json::array();
    for (const auto& [iv, mass] : s.interval_masses) {
      masses["mass_" + format_label(iv.lo) + "_" + format_label(iv.hi)] = mass;
      listed.push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"mass", mass}});
    }
    doc["masses"] = masses;
    doc["intervals"] = listed;
    auto modes = nlohmann::json::array();
    for (const auto& m : s.modes) modes.push_back({{"location", m.location}, {"density", m.density}});
    doc["modes"] = modes;
    doc["bandwidth"] = s.bandwidth;
    doc["effective_sample_size"] = s.effective_sample_size;
    doc["draws"] = posterior->posterior.draws.size();
    doc["log_evidence"] = number_or_null(posterior->posterior.log_evidence);
    doc["log_evidence_error"] = posterior->posterior.log_evidence_error;

    // Allocate everything before handing out so a failure leaks nothing.
    std::string summary_text = doc.dump(2);
    std::string hist_text = histogram_csv(s.histogram);
    std::string kde_text = kde_csv(s.kde_curve);
    hand_out(summary_json, summary_text);
    hand_out(histogram_out, hist_text);
    hand_out(kde_out, kde_text);
  });
}

cslab_status cslab_baseline_json(const cslab_model* model, int iv, int cause, int effect, long long n_samples,
                                 double alpha, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const CovarianceMatrix& s = model->covariance;
    nlohmann::json doc;
    doc["triple"] = {{"iv", iv}, {"cause", cause}, {"effect", effect}};
    auto warnings = nlohmann::json::array();
    try {
      doc["iv"] = iv_estimate(s, iv - 1, cause - 1, effect - 1);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WeakInstrument) throw;
      doc["iv"] = nullptr;
      warnings.push_back({{"code", "weak_instrument"}, {"message", e.what()}});
    }
    doc["lcd"] = lcd_estimate(s, cause - 1, effect - 1);
    const double rho = partial_correlation(s, iv - 1, effect - 1, cause - 1);
    doc["pcor"] = rho;
    const auto n_min = fisher_min_samples(rho, 1, alpha);
    doc["fisher_n_min"] = n_min ? nlohmann::json(*n_min) : nlohmann::json(nullptr);
    const long long n = n_samples > 0 ? n_samples : model->sample_count;
    nlohmann::json fisher = {{"alpha", alpha}, {"n_conditioning", 1}};
    if (n > 4) {
      const CITestResult test = fisher_z_test(rho, static_cast<long>(n), 1, alpha);
      fisher["n_samples"] = n;
      fisher["z_statistic"] = test.z_statistic;
      fisher["reject"] = test.reject;
    } else {
      fisher["n_samples"] = nullptr;
    }
    fisher["n_min_reject"] = doc["fisher_n_min"];
    doc["fisher"] = fisher;
    doc["warnings"] = warnings;
    hand_out(out, doc.dump(2));
  });
}

cslab_status cslab_compare_orderings_json(const cslab_model* model, const char* orderings,
                                          const cslab_prior_config* prior, const cslab_sampler_config* sampler,
                                          int workers, char** out) {
  return guarded([&] {
    require(model, "model");
    require(orderings, "orderings");
    require(out, "out");
    const auto parsed = parse_orderings(orderings, model->covariance.dim());
    const OrderingComparison cmp =
        compare_orderings(model->covariance, model->layout, parsed, to_prior(prior), to_sampler(sampler), workers);
    nlohmann::json doc = comparison_json(cmp);
    doc["free_pairs"] = format_pairs(model->layout);
    hand_out(out, doc.dump(2));
  });
}

cslab_status cslab_evidence_sweep_json(const cslab_model* model, const char* orderings, const double* v_spikes,
                                       size_t count, const cslab_prior_config* prior,
                                       const cslab_sampler_config* sampler, int workers, char** out) {
  return guarded([&] {
    require(model, "model");
    require(orderings, "orderings");
    require(v_spikes, "v_spikes");
    require(out, "out");
    const auto parsed = parse_orderings(orderings, model->covariance.dim());
    const auto rows = evidence_sweep(model->covariance, model->layout, parsed,
                                     std::vector<double>(v_spikes, v_spikes + count), to_prior(prior),
                                     to_sampler(sampler), workers);
    auto list = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json item = row.failure ? nlohmann::json{{"error", *row.failure}} : comparison_json(row.comparison);
      item["v_spike"] = row.v_spike;
      list.push_back(std::move(item));
    }
    hand_out(out, nlohmann::json{{"sweep", list}, {"free_pairs", format_pairs(model->layout)}}.dump(2));
  });
}

cslab_status cslab_grid_csv(const cslab_model* model, const cslab_prior_config* prior, int pair_j, int pair_i,
                            double lo, double hi, int resolution, int hessian_only, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const int n = model->covariance.dim();
    if (pair_j < 1 || pair_j > n || pair_i < 1 || pair_i > n || pair_j == pair_i) {
      throw Error(ErrorCode::InvalidArgument, "grid pair out of range");
    }
    const Grid grid = grid_log_posterior(model->covariance, to_prior(prior), {pair_j - 1, pair_i - 1}, lo, hi,
                                         resolution, hessian_only ? GridTerm::HessianOnly : GridTerm::Posterior);
    hand_out(out, grid_to_csv(grid));
  });
}

cslab_status cslab_spike_sweep_csv(const cslab_model* model, const double* v_spikes, size_t count,
                                   const cslab_prior_config* prior, const cslab_sampler_config* sampler,
                                   const char* target, const double* intervals, size_t n_intervals, int workers,
                                   char** out) {
  return guarded([&] {
    require(model, "model");
    require(v_spikes, "v_spikes");
    require(target, "target");
    require(out, "out");
    const auto ivs = to_intervals(intervals, n_intervals);
    const auto rows = spike_sweep(model->covariance, model->layout, std::vector<double>(v_spikes, v_spikes + count),
                                  to_prior(prior), to_sampler(sampler),
                                  Target::parse(target, model->covariance.dim()), ivs, workers);
    hand_out(out, sweep_to_csv(rows, ivs));
  });
}

cslab_status cslab_write_file_atomic(const char* path, const char* contents) {
  return guarded([&] {
    require(path, "path");
    require(contents, "contents");
    write_file_atomic(path, contents);
  });
}

}  // extern "C"
