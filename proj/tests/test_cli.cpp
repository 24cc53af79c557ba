// End-to-end checks against the built CLI binary: output files and formats,
// determinism, environment overrides, and the exit-code contract. Each case
// spawns the binary the way a user would.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch_root() {
  static const fs::path root = [] {
    const fs::path p =
        fs::temp_directory_path() / ("geko_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = scratch_root() / (tag + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

// Runs `<env> geko <args>` through the shell and captures exit code + streams.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path out_file = scratch_root() / "stdout.txt";
  const fs::path err_file = scratch_root() / "stderr.txt";
  std::string command;
  if (!env.empty()) command += env + " ";
  command += std::string(GEKO_CLI_PATH) + " " + args + " > " + out_file.string() +
             " 2> " + err_file.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.code = status == -1 ? -1 : WEXITSTATUS(status);
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

// Parses a comment-prefixed CSV into rows of cells (comments skipped).
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

// Numeric matrix view of a comment-prefixed CSV without a header row.
std::vector<std::vector<double>> read_matrix(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& cells : read_csv(path)) {
    std::vector<double> row;
    for (const std::string& cell : cells) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

double parse_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size()));
}

std::string preset() { return std::string(GEKO_VDP_PRESET); }

const std::string kSmallMaps = "GEKO_OBSERVABLES_N_Z=8 GEKO_OBSERVABLES_N_V=3";

// Writes a derived copy of the preset with the given mutation applied.
fs::path derived_config(const std::string& tag, const std::function<void(json&)>& mutate) {
  json cfg = json::parse(slurp(preset()));
  mutate(cfg);
  const fs::path path = scratch_root() / (tag + ".cfg");
  std::ofstream os(path);
  os << cfg.dump(2) << "\n";
  return path;
}

}  // namespace

TEST_CASE("simulate writes the rollout and reruns byte-identically") {
  const fs::path dir_a = fresh_dir("sim_a");
  const fs::path dir_b = fresh_dir("sim_b");
  const std::string args = "simulate --config " + preset() + " --seed 2024 --out ";
  const RunResult first = run_cli(args + dir_a.string());
  CAPTURE(first.err);
  REQUIRE(first.code == 0);
  const RunResult second = run_cli(args + dir_b.string());
  REQUIRE(second.code == 0);

  const std::string bytes = slurp(dir_a / "trajectory.csv");
  REQUIRE(!bytes.empty());
  CHECK(bytes == slurp(dir_b / "trajectory.csv"));
  CHECK(bytes.find("# config_hash=") != std::string::npos);

  const auto rows = read_csv(dir_a / "trajectory.csv");
  REQUIRE(rows.size() == 52);  // header + 51 sampled states
  CHECK(rows[0][0] == "t");
  REQUIRE(rows[0].size() == 6);  // t, x1, x2, u1, y1, y2 (VdP outputs = states)
  int inputs_present = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 6);
    if (!rows[i][3].empty()) ++inputs_present;
    CHECK(rows[i][4] == rows[i][1]);  // identity output block
    CHECK(rows[i][5] == rows[i][2]);
  }
  CHECK(inputs_present == 50);  // one input per step, none for the final state
}

TEST_CASE("zero input from the origin stays at the origin") {
  const fs::path dir = fresh_dir("sim_zero");
  const RunResult r =
      run_cli("simulate --config " + preset() + " --out " + dir.string(),
              "GEKO_EVAL_X0='[0,0]' GEKO_EVAL_INPUT_KIND=zero");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  const auto rows = read_csv(dir / "trajectory.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][1]) == 0.0);
    CHECK(std::stod(rows[i][2]) == 0.0);
  }
}

TEST_CASE("environment overrides change behavior and the config hash") {
  const fs::path dir_a = fresh_dir("env_a");
  const fs::path dir_b = fresh_dir("env_b");
  const std::string args = "simulate --config " + preset() + " --out ";
  REQUIRE(run_cli(args + dir_a.string()).code == 0);
  REQUIRE(run_cli(args + dir_b.string(), "GEKO_EVAL_HORIZON=10").code == 0);

  CHECK(read_csv(dir_a / "trajectory.csv").size() == 52);
  CHECK(read_csv(dir_b / "trajectory.csv").size() == 12);  // header + 11 states

  auto hash_line = [](const std::string& text) {
    const auto pos = text.find("# config_hash=");
    REQUIRE(pos != std::string::npos);
    return text.substr(pos, text.find('\n', pos) - pos);
  };
  CHECK(hash_line(slurp(dir_a / "trajectory.csv")) !=
        hash_line(slurp(dir_b / "trajectory.csv")));
}

TEST_CASE("fit reports diagnostics and refits byte-identically") {
  const fs::path dir_a = fresh_dir("fit_a");
  const fs::path dir_b = fresh_dir("fit_b");
  const std::string args = "fit --config " + preset() + " --out ";
  const RunResult first = run_cli(args + dir_a.string(), kSmallMaps);
  CAPTURE(first.err);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("method=geko") != std::string::npos);
  CHECK(first.out.find("features=24") != std::string::npos);
  CHECK(first.out.find("residual=") != std::string::npos);
  CHECK(first.out.find("rank=") != std::string::npos);
  CHECK(first.out.find("gamma=") != std::string::npos);

  const std::string bytes = slurp(dir_a / "model.json");
  REQUIRE(!bytes.empty());
  CHECK(bytes.find("config_hash") != std::string::npos);
  REQUIRE(run_cli(args + dir_b.string(), kSmallMaps).code == 0);
  CHECK(bytes == slurp(dir_b / "model.json"));
}

TEST_CASE("exactly bilinear recordings fit with zero residual") {
  // Fabricate a recording of x+ = K (x kron u) and fit it with identity
  // observables at gamma 0: the regression should be exact.
  const double k[2][2] = {{0.9, 0.15}, {-0.3, 0.8}};
  const double u_cycle[5] = {0.8, -0.6, 1.1, 0.9, -1.0};
  double x[2] = {1.0, 0.5};
  std::ostringstream csv;
  csv << "# sampling_time=1\n";
  csv << "t,x1,x2,u1\n";
  char buf[128];
  for (int t = 0; t <= 20; ++t) {
    if (t < 20) {
      const double u = u_cycle[t % 5];
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", t, x[0], x[1], u);
      csv << buf;
      const double next0 = k[0][0] * x[0] * u + k[0][1] * x[1] * u;
      const double next1 = k[1][0] * x[0] * u + k[1][1] * x[1] * u;
      x[0] = next0;
      x[1] = next1;
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,\n", t, x[0], x[1]);
      csv << buf;
    }
  }
  const fs::path data = scratch_root() / "bilinear.csv";
  std::ofstream(data) << csv.str();

  const fs::path dir = fresh_dir("fit_bilinear");
  const RunResult r = run_cli("fit --config " + preset() + " --data " + data.string() +
                                  " --gamma 0 --out " + dir.string(),
                              "GEKO_OBSERVABLES_KIND=identity");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("features=2") != std::string::npos);
  CHECK(parse_after(r.out, "residual=") <= 1e-8);
}

TEST_CASE("malformed recordings are refused with the offending line") {
  const fs::path data = scratch_root() / "bad.csv";
  std::ofstream(data) << "not,a,header\n1,2,3\n";
  const RunResult r = run_cli("fit --config " + preset() + " --data " + data.string() +
                              " --out " + fresh_dir("fit_bad").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.csv:1:") != std::string::npos);
}

TEST_CASE("config problems exit with the config error code") {
  CHECK(run_cli("simulate --config /no/such/file.cfg").code == 2);
  CHECK(run_cli("simulate").code == 2);  // --config is required
  const fs::path broken = scratch_root() / "broken.cfg";
  std::ofstream(broken) << "{ not json";
  CHECK(run_cli("simulate --config " + broken.string()).code == 2);
}

TEST_CASE("rank deficiency exits with the numerical-rank code") {
  // 50 snapshots cannot span the preset's 1000 lifted directions at gamma 0.
  const RunResult r = run_cli("fit --config " + preset() + " --gamma 0 --out " +
                                  fresh_dir("fit_rank").string(),
                              "GEKO_DATA_SNAPSHOTS=50");
  CHECK(r.code == 3);
  CHECK(r.err.find("gamma") != std::string::npos);
}

TEST_CASE("divergent rollouts exit with the divergence code") {
  const RunResult r =
      run_cli("simulate --config " + preset() + " --out " + fresh_dir("sim_div").string(),
              "GEKO_EVAL_X0='[100000000.0,100000000.0]'");
  CHECK(r.code == 4);
}

TEST_CASE("predict on recorded truth writes the error surface") {
  const fs::path sim = fresh_dir("truth_sim");
  REQUIRE(run_cli("simulate --config " + preset() + " --out " + sim.string()).code == 0);

  const fs::path fit = fresh_dir("truth_fit");
  REQUIRE(run_cli("fit --config " + preset() + " --out " + fit.string(), kSmallMaps)
              .code == 0);

  const fs::path dir = fresh_dir("truth_predict");
  const RunResult r = run_cli("predict --config " + preset() + " --model " +
                                  (fit / "model.json").string() + " --truth " +
                                  (sim / "trajectory.csv").string() + " --out " +
                                  dir.string(),
                              kSmallMaps);
  CAPTURE(r.err);
  REQUIRE(r.code == 0);

  const auto z_hat = read_matrix(dir / "z_hat.csv");
  REQUIRE(z_hat.size() == 8);
  CHECK(z_hat[0].size() == 51);
  const auto x_hat = read_matrix(dir / "x_hat.csv");
  REQUIRE(x_hat.size() == 2);  // decoded back to the state dimension

  const auto surface = read_matrix(dir / "error_surface.csv");
  REQUIRE(surface.size() == 8);
  CHECK(surface[0].size() == 51);
  for (const auto& row : surface) {
    for (double v : row) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  }

  const json summary = json::parse(slurp(dir / "error_summary.json"));
  CHECK(summary.contains("config_hash"));
  CHECK(summary["per_t_max"].size() == 51);
  CHECK(summary["mean"].get<double>() >= 0.0);
  CHECK(summary["max"].get<double>() >= summary["mean"].get<double>());
}

TEST_CASE("horizon zero predicts just the initial lift") {
  const fs::path fit = fresh_dir("h0_fit");
  REQUIRE(run_cli("fit --config " + preset() + " --out " + fit.string(), kSmallMaps)
              .code == 0);
  const fs::path dir = fresh_dir("h0_predict");
  const RunResult r = run_cli("predict --config " + preset() + " --model " +
                                  (fit / "model.json").string() + " --out " + dir.string(),
                              kSmallMaps + " GEKO_EVAL_HORIZON=0");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  const auto z_hat = read_matrix(dir / "z_hat.csv");
  REQUIRE(z_hat.size() == 8);
  CHECK(z_hat[0].size() == 1);
}

TEST_CASE("lemma predictions at depth one match the operator step") {
  // Build the operator and the lemma store from the same recording at the
  // same gamma; the depth-one lemma prediction then reproduces the one-step
  // operator prediction.
  const std::string maps = kSmallMaps + " GEKO_LEMMA_DEPTH=1 GEKO_LEMMA_OUTPUT=lifted";
  const fs::path sim = fresh_dir("lemma_sim");
  REQUIRE(run_cli("simulate --config " + preset() + " --out " + sim.string()).code == 0);
  const std::string data = (sim / "trajectory.csv").string();

  const fs::path fit = fresh_dir("lemma_fit");
  REQUIRE(run_cli("fit --config " + preset() + " --data " + data + " --gamma 1e-10 " +
                      "--out " + fit.string(),
                  maps)
              .code == 0);

  const fs::path store = fresh_dir("lemma_store");
  const RunResult built = run_cli("lemma-build --config " + preset() + " --data " + data +
                                      " --out " + store.string(),
                                  maps);
  CAPTURE(built.err);
  REQUIRE(built.code == 0);
  CHECK(built.out.find("full row rank") != std::string::npos);

  const fs::path op = fresh_dir("lemma_op");
  REQUIRE(run_cli("predict --config " + preset() + " --model " +
                      (fit / "model.json").string() + " --out " + op.string(),
                  maps)
              .code == 0);
  const fs::path lem = fresh_dir("lemma_pred");
  const RunResult r = run_cli("predict --config " + preset() + " --model " +
                                  (fit / "model.json").string() + " --mode lemma" +
                                  " --lemma " + (store / "lemma").string() +
                                  " --gamma 1e-10 --out " + lem.string(),
                              maps);
  CAPTURE(r.err);
  REQUIRE(r.code == 0);

  const auto z_hat = read_matrix(op / "z_hat.csv");
  const auto lemma_pred = read_matrix(lem / "lemma_prediction.csv");
  REQUIRE(lemma_pred.size() == 8);  // lifted outputs
  REQUIRE(lemma_pred[0].size() == 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < lemma_pred.size(); ++i) {
    worst = std::max(worst, std::abs(lemma_pred[i][0] - z_hat[i][1]));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("bench reports one row per tuple with matched feature dimensions") {
  // geko with 6 x 2 lifts and kic with 12 centers share feature dimension 12.
  const fs::path cfg = derived_config("bench", [](json& c) {
    c["bench"]["tuples"] = json::array({json::array({"geko", 6, 2}),
                                        json::array({"kic", 12, 1})});
  });
  const fs::path dir = fresh_dir("bench");
  const RunResult r =
      run_cli("bench --config " + cfg.string() + " --jobs 2 --out " + dir.string());
  CAPTURE(r.err);
  REQUIRE(r.code == 0);

  const auto rows = read_csv(dir / "bench_report.csv");
  REQUIRE(rows.size() == 3);  // header + two tuples
  REQUIRE(rows[0][0] == "method");
  CHECK(rows[1][0] == "geko");
  CHECK(rows[2][0] == "kic");
  CHECK(rows[1][3] == "12");  // feature_dim
  CHECK(rows[2][3] == "12");
  const std::size_t status = rows[0].size() - 1;
  CHECK(rows[1][status] == "ok");
  CHECK(rows[2][status] == "ok");

  const json report = json::parse(slurp(dir / "bench_report.json"));
  CHECK(report["rows"].size() == 2);
  CHECK(report.contains("config_hash"));
}
