// causalslab command-line driver. Everything goes through the C API so the
// binary exercises exactly what library users see.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "causalslab/causalslab.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitComputation = 1;
constexpr int kExitInput = 2;

// Carries a status out of the command bodies; main() turns it into an exit code.
struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(cslab_status status) {
  switch (status) {
    case CSLAB_INVALID_ARGUMENT:
    case CSLAB_NOT_POSITIVE_DEFINITE:
    case CSLAB_DEGENERATE_DATA:
    case CSLAB_IO:
      return kExitInput;
    default:
      return kExitComputation;
  }
}

void check(cslab_status status, const std::string& context = {}) {
  if (status == CSLAB_OK) return;
  std::string msg = cslab_last_error();
  if (!context.empty()) msg = context + ": " + msg;
  throw Failure{exit_code_for(status), msg};
}

[[noreturn]] void input_error(const std::string& msg) { throw Failure{kExitInput, msg}; }

struct StringDeleter {
  void operator()(char* s) const { cslab_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) {
  OwnedString owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

struct ModelDeleter {
  void operator()(cslab_model* m) const { cslab_model_free(m); }
};
struct PosteriorDeleter {
  void operator()(cslab_posterior* p) const { cslab_posterior_free(p); }
};
using Model = std::unique_ptr<cslab_model, ModelDeleter>;
using Posterior = std::unique_ptr<cslab_posterior, PosteriorDeleter>;

// JSON config files: top-level keys are global options, nested objects are
// subcommand sections, e.g. {"posterior": {"v-spike": 1e-5, "interval": ["0.9,1.1"]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return {};  // manifests are always written as TOML
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      input >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        flatten(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

// Options shared by the commands that read a covariance.
struct SourceOptions {
  std::string cov;
  std::string data;
  std::string scenario;
  int simulate = 0;
  std::string pairs;
};

struct PriorOptions {
  cslab_prior_config prior{};
  cslab_sampler_config sampler{};
  PriorOptions() {
    cslab_prior_config_init(&prior);
    cslab_sampler_config_init(&sampler);
  }
};

struct GlobalOptions {
  std::string out = ".";
  bool manifest = false;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = 0;
};

void add_source(CLI::App* cmd, SourceOptions& src) {
  auto* cov = cmd->add_option("--cov", src.cov, "Covariance matrix CSV");
  auto* data = cmd->add_option("--data", src.data, "Raw observations CSV (one row per sample)");
  auto* sc = cmd->add_option("--scenario", src.scenario, "Named scenario a..f or scenario JSON file");
  cov->excludes(data)->excludes(sc);
  data->excludes(sc);
  cmd->add_option("--simulate", src.simulate, "With --scenario: use the sample covariance of N simulated draws")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--pairs", src.pairs, "Free confounder pairs, e.g. 2-3,1-3, 'all' or 'none'");
}

void add_prior(CLI::App* cmd, PriorOptions& p) {
  cmd->add_option("--v-spike", p.prior.v_spike, "Spike variance");
  cmd->add_option("--v-slab", p.prior.v_slab, "Slab variance");
  cmd->add_option("--w-spike", p.prior.w_spike, "Spike weight");
  cmd->add_option("--w-slab", p.prior.w_slab, "Slab weight");
  cmd->add_option("--v-min", p.prior.v_min, "Lower end of the noise-variance prior");
  cmd->add_option("--v-max", p.prior.v_max, "Upper end of the noise-variance prior");
  cmd->add_option("--confounder-sd", p.prior.confounder_sd, "Prior sd of each confounding coefficient");
}

void add_sampler(CLI::App* cmd, PriorOptions& p) {
  cmd->add_option("--n-live", p.sampler.n_live, "Live points");
  cmd->add_option("--tolerance", p.sampler.termination_fraction, "Stop once the remaining evidence fraction is below this");
  cmd->add_option("--max-iterations", p.sampler.max_iterations, "Iteration limit");
  cmd->add_option("--steps", p.sampler.steps_per_replacement, "Random-walk steps per replacement (0 = 5 x dim)");
}

Model load_model(const SourceOptions& src, std::uint64_t seed) {
  const int sources = !src.cov.empty() + !src.data.empty() + !src.scenario.empty();
  if (sources != 1) input_error("exactly one of --cov, --data or --scenario is required");
  if (src.simulate > 0 && src.scenario.empty()) input_error("--simulate needs --scenario");
  cslab_model* raw = nullptr;
  if (!src.cov.empty()) {
    check(cslab_model_from_covariance_csv(src.cov.c_str(), &raw));
  } else if (!src.data.empty()) {
    check(cslab_model_from_data_csv(src.data.c_str(), &raw));
  } else if (src.simulate > 0) {
    check(cslab_model_from_simulation(src.scenario.c_str(), src.simulate, seed, &raw));
  } else {
    check(cslab_model_from_scenario(src.scenario.c_str(), &raw));
  }
  Model model(raw);
  if (!src.pairs.empty()) check(cslab_model_set_free_pairs(model.get(), src.pairs.c_str()), "--pairs");
  return model;
}

std::vector<double> flatten_intervals(const std::vector<std::pair<double, double>>& intervals) {
  std::vector<double> flat;
  for (const auto& [lo, hi] : intervals) {
    if (!(lo < hi)) input_error("--interval needs LO < HI");
    flat.push_back(lo);
    flat.push_back(hi);
  }
  return flat;
}

class Outputs {
 public:
  explicit Outputs(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) input_error("cannot create output directory '" + dir + "': " + ec.message());
  }

  void write(const std::string& name, const std::string& contents) const {
    const std::string path = (dir_ / name).string();
    check(cslab_write_file_atomic(path.c_str(), contents.c_str()));
  }

 private:
  fs::path dir_;
};

std::string with_newline(std::string s) {
  if (s.empty() || s.back() != '\n') s += '\n';
  return s;
}

std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

std::string default_orderings(const cslab_model* model) {
  // Three variables with X1 first: the two orderings that disagree on X2, X3.
  return cslab_model_dim(model) == 3 ? "1>2>3;1>3>2" : "all";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian causal inference under hidden confounding with spike-and-slab priors"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(cslab_version()));

  GlobalOptions global;
  app.add_option("--out", global.out, "Output directory");
  app.add_option("--workers", global.workers, "Worker threads for multi-run commands")->check(CLI::PositiveNumber);
  app.add_option("--seed", global.seed, "Random seed");
  app.add_flag("--manifest", global.manifest, "Also write the fully-resolved configuration to manifest.toml");
  app.set_config("--config", "", "TOML or JSON config file (by extension); command-line flags take precedence");

  // scenario ----------------------------------------------------------------
  auto* scenario_cmd = app.add_subcommand("scenario", "Write a scenario's population covariance and parameters");
  std::string scenario_name;
  int scenario_simulate = 0;
  scenario_cmd->add_option("name", scenario_name, "Named scenario a..f or scenario JSON file")->required();
  scenario_cmd->add_option("--simulate", scenario_simulate, "Write the sample covariance of N simulated draws instead")
      ->check(CLI::NonNegativeNumber);

  // posterior ---------------------------------------------------------------
  auto* posterior_cmd = app.add_subcommand("posterior", "Sample the posterior over the free confounders");
  SourceOptions posterior_src;
  PriorOptions posterior_cfg;
  std::string posterior_target = "b32";
  std::vector<std::pair<double, double>> posterior_intervals{{0.9, 1.1}, {-0.1, 0.1}};
  int posterior_bins = 100;
  double posterior_bandwidth = 0.0;
  add_source(posterior_cmd, posterior_src);
  add_prior(posterior_cmd, posterior_cfg);
  add_sampler(posterior_cmd, posterior_cfg);
  posterior_cmd->add_option("--target", posterior_target, "Summarised parameter: b32, b3_2 or v2");
  posterior_cmd->add_option("--interval", posterior_intervals, "Mass interval LO,HI (repeatable)")
      ->delimiter(',')
      ->default_str("0.9,1.1,-0.1,0.1");
  posterior_cmd->add_option("--bins", posterior_bins, "Histogram bins")->check(CLI::PositiveNumber);
  posterior_cmd->add_option("--bandwidth", posterior_bandwidth, "KDE bandwidth (0 = Silverman)");

  // baseline ----------------------------------------------------------------
  auto* baseline_cmd = app.add_subcommand("baseline", "IV, LCD, partial correlation and Fisher z test");
  SourceOptions baseline_src;
  int iv = 1, cause = 2, effect = 3;
  long long baseline_n = 0;
  double alpha = 0.05;
  add_source(baseline_cmd, baseline_src);
  baseline_cmd->add_option("--iv", iv, "Instrument (1-based)");
  baseline_cmd->add_option("--cause", cause, "Cause (1-based)");
  baseline_cmd->add_option("--effect", effect, "Effect (1-based)");
  baseline_cmd->add_option("--n-samples", baseline_n, "Sample size for the Fisher test (0 = from data)");
  baseline_cmd->add_option("--alpha", alpha, "Significance level");

  // evidence ----------------------------------------------------------------
  auto* evidence_cmd = app.add_subcommand("evidence", "Compare variable orderings by log-evidence");
  SourceOptions evidence_src;
  PriorOptions evidence_cfg;
  std::string orderings = "auto";
  std::vector<double> evidence_sweep;
  add_source(evidence_cmd, evidence_src);
  add_prior(evidence_cmd, evidence_cfg);
  add_sampler(evidence_cmd, evidence_cfg);
  evidence_cmd->add_option("--orderings", orderings, "e.g. '1>2>3;1>3>2', 'all', or 'auto' (both orders of X2, X3 for three variables, else all)");
  evidence_cmd->add_option("--sweep", evidence_sweep, "Repeat for each spike variance (comma separated)")
      ->delimiter(',');

  // grid --------------------------------------------------------------------
  auto* grid_cmd = app.add_subcommand("grid", "Log-posterior over a lattice of one pair's confounders");
  SourceOptions grid_src;
  PriorOptions grid_cfg;
  std::string grid_pair = "2-3";
  double grid_lo = -3.0, grid_hi = 3.0;
  int grid_resolution = 61;
  bool hessian_only = false;
  add_source(grid_cmd, grid_src);
  add_prior(grid_cmd, grid_cfg);
  grid_cmd->add_option("--pair", grid_pair, "Confounded pair J-I");
  grid_cmd->add_option("--lo", grid_lo, "Lattice lower bound");
  grid_cmd->add_option("--hi", grid_hi, "Lattice upper bound");
  grid_cmd->add_option("--resolution", grid_resolution, "Points per axis")->check(CLI::Range(2, 10000));
  grid_cmd->add_flag("--hessian-only", hessian_only, "Only the -1/2 log det(-H) term");

  // sweep -------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Posterior summaries across spike variances");
  SourceOptions sweep_src;
  PriorOptions sweep_cfg;
  std::vector<double> sweep_spikes{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
  std::string sweep_target = "b32";
  std::vector<std::pair<double, double>> sweep_intervals{{0.9, 1.1}, {-0.1, 0.1}};
  add_source(sweep_cmd, sweep_src);
  add_prior(sweep_cmd, sweep_cfg);
  add_sampler(sweep_cmd, sweep_cfg);
  sweep_cmd->add_option("--v-spikes", sweep_spikes, "Spike variances (comma separated)")->delimiter(',');
  sweep_cmd->add_option("--target", sweep_target, "Summarised parameter");
  sweep_cmd->add_option("--interval", sweep_intervals, "Mass interval LO,HI (repeatable)")
      ->delimiter(',')
      ->default_str("0.9,1.1,-0.1,0.1");

  // The config format follows the file extension, so pick it before parsing.
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    std::string path;
    if (arg == "--config" && k + 1 < argc) path = argv[k + 1];
    if (arg.rfind("--config=", 0) == 0) path = arg.substr(9);
    if (!path.empty() && fs::path(path).extension() == ".json") app.config_formatter(std::make_shared<JsonConfig>());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    const Outputs out(global.out);
    if (global.manifest) {
      std::string manifest = "# causalslab " + std::string(cslab_version()) + " resolved configuration\n";
      manifest += "out=" + toml_string(global.out) + "\n";
      manifest += "workers=" + std::to_string(global.workers) + "\n";
      manifest += "seed=" + std::to_string(global.seed) + "\n";
      for (const CLI::App* sub : app.get_subcommands()) {
        manifest += "\n[" + sub->get_name() + "]\n";
        // Unset sources are left out so the manifest can be fed back via --config.
        std::istringstream lines(CLI::ConfigTOML().to_config(sub, true, false, ""));
        for (std::string line; std::getline(lines, line);) {
          if (line.size() < 3 || line.compare(line.size() - 3, 3, "=\"\"") != 0) manifest += line + "\n";
        }
      }
      out.write("manifest.toml", manifest);
    }

    auto seeded = [&](PriorOptions& cfg) { cfg.sampler.seed = global.seed; };

    if (*scenario_cmd) {
      SourceOptions src;
      src.scenario = scenario_name;
      src.simulate = scenario_simulate;
      const Model model = load_model(src, global.seed);
      char* text = nullptr;
      check(cslab_model_covariance_csv(model.get(), &text));
      out.write("covariance.csv", take(text));
      check(cslab_model_parameters_json(model.get(), &text));
      const std::string params = with_newline(take(text));
      out.write("parameters.json", params);
      std::cout << params;
    } else if (*posterior_cmd) {
      const Model model = load_model(posterior_src, global.seed);
      seeded(posterior_cfg);
      const auto intervals = flatten_intervals(posterior_intervals);
      cslab_posterior* raw = nullptr;
      check(cslab_posterior_sample(model.get(), &posterior_cfg.prior, &posterior_cfg.sampler, &raw));
      const Posterior post(raw);
      char* doc = nullptr;
      check(cslab_posterior_json(post.get(), &doc));
      const std::string posterior_json = with_newline(take(doc));
      char *summary = nullptr, *hist = nullptr, *kde = nullptr;
      check(cslab_posterior_summary(post.get(), posterior_target.c_str(), intervals.data(), intervals.size() / 2,
                                    posterior_bins, posterior_bandwidth, &summary, &hist, &kde));
      const std::string summary_json = with_newline(take(summary));
      out.write("posterior.json", posterior_json);
      out.write("histogram.csv", take(hist));
      out.write("kde.csv", take(kde));
      out.write("summary.json", summary_json);
      std::cout << summary_json;
    } else if (*baseline_cmd) {
      const Model model = load_model(baseline_src, global.seed);
      char* doc = nullptr;
      check(cslab_baseline_json(model.get(), iv, cause, effect, baseline_n, alpha, &doc));
      const std::string text = with_newline(take(doc));
      out.write("baseline.json", text);
      std::cout << text;
    } else if (*evidence_cmd) {
      const Model model = load_model(evidence_src, global.seed);
      seeded(evidence_cfg);
      const std::string order_text = orderings == "auto" ? default_orderings(model.get()) : orderings;
      char* doc = nullptr;
      std::string name;
      if (evidence_sweep.empty()) {
        check(cslab_compare_orderings_json(model.get(), order_text.c_str(), &evidence_cfg.prior,
                                           &evidence_cfg.sampler, global.workers, &doc));
        name = "evidence.json";
      } else {
        check(cslab_evidence_sweep_json(model.get(), order_text.c_str(), evidence_sweep.data(),
                                        evidence_sweep.size(), &evidence_cfg.prior, &evidence_cfg.sampler,
                                        global.workers, &doc));
        name = "evidence_sweep.json";
      }
      const std::string text = with_newline(take(doc));
      out.write(name, text);
      std::cout << text;
    } else if (*grid_cmd) {
      const Model model = load_model(grid_src, global.seed);
      int j = 0, i = 0;
      char dash = 0;
      std::istringstream pair_text(grid_pair);
      if (!(pair_text >> j >> dash >> i) || dash != '-' || !pair_text.eof()) {
        input_error("--pair expects J-I, got '" + grid_pair + "'");
      }
      char* csv = nullptr;
      check(cslab_grid_csv(model.get(), &grid_cfg.prior, j, i, grid_lo, grid_hi, grid_resolution, hessian_only,
                           &csv));
      out.write("grid.csv", take(csv));
    } else if (*sweep_cmd) {
      const Model model = load_model(sweep_src, global.seed);
      seeded(sweep_cfg);
      const auto intervals = flatten_intervals(sweep_intervals);
      char* csv = nullptr;
      check(cslab_spike_sweep_csv(model.get(), sweep_spikes.data(), sweep_spikes.size(), &sweep_cfg.prior,
                                  &sweep_cfg.sampler, sweep_target.c_str(), intervals.data(), intervals.size() / 2,
                                  global.workers, &csv));
      const std::string text = take(csv);
      out.write("sweep.csv", text);
      std::cout << text;
    }
  } catch (const Failure& f) {
    std::cerr << "causalslab: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "causalslab: " << e.what() << "\n";
    return kExitComputation;
  }
  return 0;
}
