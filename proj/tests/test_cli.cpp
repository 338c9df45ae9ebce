// Drives the causalslab executable end to end.
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Workspace {
 public:
  Workspace() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("causalslab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  const fs::path& dir() const { return dir_; }

  Run run(const std::string& args) const {
    const fs::path err_file = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" CAUSALSLAB_CLI "' " + args + " 2>'" + err_file.string() + "'";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_file);
    return r;
  }

  void write(const std::string& name, const std::string& contents) const { std::ofstream(dir_ / name) << contents; }
  std::string read(const std::string& name) const { return slurp(dir_ / name); }

 private:
  fs::path dir_;
};

std::vector<std::vector<double>> parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("scenario writes the population covariance") {
  Workspace ws;
  const auto r = ws.run("--out out scenario a");
  REQUIRE(r.exit_code == 0);
  const auto cov = parse_csv(ws.read("out/covariance.csv"));
  const double expected[3][3] = {{1, 1, 1}, {1, 2, 2}, {1, 2, 3}};
  REQUIRE(cov.size() == 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(cov[i][j] == doctest::Approx(expected[i][j]).epsilon(1e-14));
  }
  CHECK(nlohmann::json::parse(r.out)["name"] == "a");
  CHECK(nlohmann::json::parse(ws.read("out/parameters.json"))["n"] == 3);

  // Cancelling coefficients reproduce the confounder-free covariance of b31 = 0, b32 = 2.
  REQUIRE(ws.run("--out f scenario f").exit_code == 0);
  const auto f = parse_csv(ws.read("f/covariance.csv"));
  const double other[3][3] = {{1, 1, 2}, {1, 3, 6}, {2, 6, 15}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(std::abs(f[i][j] - other[i][j]) < 1e-12);
  }
}

TEST_CASE("runs with the same seed are byte-identical") {
  Workspace ws;
  REQUIRE(ws.run("--out one --seed 11 --workers 1 posterior --scenario b --n-live 100").exit_code == 0);
  REQUIRE(ws.run("--out two --seed 11 --workers 1 posterior --scenario b --n-live 100").exit_code == 0);
  for (const char* file : {"posterior.json", "summary.json", "histogram.csv", "kde.csv"}) {
    CHECK_MESSAGE(ws.read(std::string("one/") + file) == ws.read(std::string("two/") + file), file);
  }
  REQUIRE(ws.run("--out s1 --seed 4 scenario c --simulate 500").exit_code == 0);
  REQUIRE(ws.run("--out s2 --seed 4 scenario c --simulate 500").exit_code == 0);
  CHECK(ws.read("s1/covariance.csv") == ws.read("s2/covariance.csv"));
}

TEST_CASE("input errors exit with status 2 and name the problem") {
  Workspace ws;
  auto r = ws.run("posterior --cov missing.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("missing.csv") != std::string::npos);
  CHECK(r.err.rfind("causalslab: ", 0) == 0);

  r = ws.run("posterior --cov x.csv --scenario a");
  CHECK(r.exit_code == 2);

  r = ws.run("posterior");
  CHECK(r.exit_code == 2);

  ws.write("bad.csv", "1,2\n2,1\n");
  r = ws.run("posterior --cov bad.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("positive definite") != std::string::npos);

  r = ws.run("posterior --scenario a --v-spike -1");
  CHECK(r.exit_code == 2);

  r = ws.run("posterior --scenario a --max-iterations 5");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("iterations") != std::string::npos);
}

TEST_CASE("posterior summary") {
  Workspace ws;
  const auto r = ws.run("--out p --seed 1 posterior --scenario a");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc == nlohmann::json::parse(ws.read("p/summary.json")));
  const double mass = doc["masses"]["mass_0.9_1.1"].get<double>();
  CHECK(mass > 0.75);
  CHECK(mass < 0.95);
  CHECK(doc["modes"][0]["location"].get<double>() == doctest::Approx(1.0).epsilon(0.05));
  CHECK(nlohmann::json::parse(ws.read("p/posterior.json"))["free_pairs"] == "2-3");
}

TEST_CASE("baseline") {
  Workspace ws;
  auto r = ws.run("--out b baseline --scenario c");
  REQUIRE(r.exit_code == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["iv"].get<double>() == doctest::Approx(1.05));
  CHECK(doc["fisher_n_min"] == 3079);
  CHECK(doc == nlohmann::json::parse(ws.read("b/baseline.json")));

  r = ws.run("--out b baseline --scenario f");
  REQUIRE(r.exit_code == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["iv"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(doc["lcd"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(doc["fisher_n_min"].is_null());
}

TEST_CASE("evidence, grid and sweep outputs") {
  Workspace ws;
  auto r = ws.run("--out e --seed 2 --workers 2 evidence --scenario c --n-live 100");
  REQUIRE(r.exit_code == 0);
  const auto ev = nlohmann::json::parse(ws.read("e/evidence.json"));
  REQUIRE(ev["orderings"].size() == 2);
  CHECK(ev["orderings"][1]["ordering"] == "1>3>2");

  r = ws.run("--out g grid --scenario a --resolution 5 --lo -1 --hi 1");
  REQUIRE(r.exit_code == 0);
  const std::string grid = ws.read("g/grid.csv");
  CHECK(grid.rfind("c2\\c3,-1,-0.5,0,0.5,1\n", 0) == 0);

  r = ws.run("--out s --seed 3 sweep --scenario c --v-spikes 1e-3,1 --n-live 100");
  REQUIRE(r.exit_code == 0);
  const std::string sweep = ws.read("s/sweep.csv");
  CHECK(sweep.rfind("v_spike,status,mass_0.9_1.1,mass_-0.1_0.1,", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
}

TEST_CASE("config files set defaults that flags override") {
  Workspace ws;
  ws.write("cfg.toml", "seed = 5\n[posterior]\nv-spike = 0.5\nn-live = 50\n");
  REQUIRE(ws.run("--config cfg.toml --out t --manifest posterior --scenario a --n-live 60").exit_code == 0);
  const std::string toml = ws.read("t/manifest.toml");
  CHECK(toml.find("seed=5") != std::string::npos);
  CHECK(toml.find("v-spike=0.5") != std::string::npos);
  CHECK(toml.find("n-live=60") != std::string::npos);

  ws.write("cfg.json", R"({"seed": 9, "posterior": {"v-spike": 0.25}})");
  REQUIRE(ws.run("--config cfg.json --out j --manifest posterior --scenario a --n-live 60").exit_code == 0);
  const std::string from_json = ws.read("j/manifest.toml");
  CHECK(from_json.find("seed=9") != std::string::npos);
  CHECK(from_json.find("v-spike=0.25") != std::string::npos);

  // The manifest replays the run exactly.
  fs::copy_file(ws.dir() / "j/manifest.toml", ws.dir() / "replay.toml");
  REQUIRE(ws.run("--config replay.toml --out j2 posterior").exit_code == 0);
  CHECK(ws.read("j/summary.json") == ws.read("j2/summary.json"));
}
