// Command-line experiment harness around the geko C API.
//
// Subcommands: simulate, fit, predict, bench, lemma-build, lemma-predict.
// Every run is driven by a JSON config document; values can be overridden by
// environment variables (GEKO_ + uppercased dotted path, e.g. fit.gamma ->
// GEKO_FIT_GAMMA) and by the --seed / --gamma flags. The effective config is
// hashed (FNV-1a) and the hash is stamped into every output file so results
// stay traceable. Reruns with identical config and seeds produce identical
// numeric outputs.
//
// Exit codes: 0 success, 2 config error, 3 numerical/rank error, 4 divergence.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geko/geko.h"

using nlohmann::json;

namespace {

// ------------------------------------------------------------------ errors

struct CliError {
  int code = 2;
  std::string message;
};

int exit_code_for(geko_status status) {
  switch (status) {
    case GEKO_OK:
      return 0;
    case GEKO_ERR_RANK:
      return 3;
    case GEKO_ERR_DIVERGED:
      return 4;
    case GEKO_ERR_INTERNAL:
      return 3;
    default:  // PARAM, DIM, IO: the user gave us something unusable.
      return 2;
  }
}

void check(geko_status status) {
  if (status == GEKO_OK) return;
  throw CliError{exit_code_for(status), geko_last_error()};
}

// ------------------------------------------------------------ handle RAII

struct MatrixFree {
  void operator()(geko_matrix* p) const { geko_matrix_free(p); }
};
struct ObservableFree {
  void operator()(geko_observable* p) const { geko_observable_free(p); }
};
struct SystemFree {
  void operator()(geko_system* p) const { geko_system_free(p); }
};
struct TrajectoryFree {
  void operator()(geko_trajectory* p) const { geko_trajectory_free(p); }
};
struct ModelFree {
  void operator()(geko_model* p) const { geko_model_free(p); }
};
struct LemmaFree {
  void operator()(geko_lemma* p) const { geko_lemma_free(p); }
};

using MatrixPtr = std::unique_ptr<geko_matrix, MatrixFree>;
using ObservablePtr = std::unique_ptr<geko_observable, ObservableFree>;
using SystemPtr = std::unique_ptr<geko_system, SystemFree>;
using TrajectoryPtr = std::unique_ptr<geko_trajectory, TrajectoryFree>;
using ModelPtr = std::unique_ptr<geko_model, ModelFree>;
using LemmaPtr = std::unique_ptr<geko_lemma, LemmaFree>;

std::vector<double> matrix_data(const geko_matrix* m) {
  std::vector<double> data(static_cast<std::size_t>(geko_matrix_rows(m)) *
                           static_cast<std::size_t>(geko_matrix_cols(m)));
  check(geko_matrix_copy_data(m, data.data()));
  return data;
}

MatrixPtr make_matrix(int64_t rows, int64_t cols, const double* data) {
  geko_matrix* raw = nullptr;
  check(geko_matrix_create(rows, cols, data, &raw));
  return MatrixPtr(raw);
}

// ----------------------------------------------------------------- config

std::string format17(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CliError{2, "config error: cannot open '" + path + "'"};
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw CliError{2, "config error: " + path + ": " + e.what()};
  }
}

std::string env_name(const std::string& dotted) {
  std::string name = "GEKO_";
  for (char c : dotted) {
    name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

void apply_env_overrides(json& node, const std::string& prefix) {
  if (node.is_object()) {
    for (auto& [key, value] : node.items()) {
      apply_env_overrides(value, prefix.empty() ? key : prefix + "." + key);
    }
    return;
  }
  const char* text = std::getenv(env_name(prefix).c_str());
  if (text == nullptr) return;
  try {
    node = json::parse(text);
  } catch (const json::exception&) {
    node = std::string(text);
  }
}

const json* find_path(const json& cfg, const std::string& dotted) {
  const json* node = &cfg;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

const json& get_req(const json& cfg, const std::string& path) {
  const json* node = find_path(cfg, path);
  if (node == nullptr) throw CliError{2, "config error: missing field '" + path + "'"};
  return *node;
}

double get_num(const json& cfg, const std::string& path) {
  const json& node = get_req(cfg, path);
  if (!node.is_number()) throw CliError{2, "config error: '" + path + "' must be a number"};
  return node.get<double>();
}

double get_num_or(const json& cfg, const std::string& path, double fallback) {
  return find_path(cfg, path) == nullptr ? fallback : get_num(cfg, path);
}

int64_t get_int(const json& cfg, const std::string& path) {
  const json& node = get_req(cfg, path);
  if (!node.is_number_integer()) {
    throw CliError{2, "config error: '" + path + "' must be an integer"};
  }
  return node.get<int64_t>();
}

int64_t get_int_or(const json& cfg, const std::string& path, int64_t fallback) {
  return find_path(cfg, path) == nullptr ? fallback : get_int(cfg, path);
}

std::string get_str_or(const json& cfg, const std::string& path, const std::string& fallback) {
  const json* node = find_path(cfg, path);
  if (node == nullptr) return fallback;
  if (!node->is_string()) throw CliError{2, "config error: '" + path + "' must be a string"};
  return node->get<std::string>();
}

std::vector<double> get_vec(const json& cfg, const std::string& path) {
  const json& node = get_req(cfg, path);
  if (!node.is_array()) throw CliError{2, "config error: '" + path + "' must be an array"};
  std::vector<double> out;
  for (const auto& v : node) {
    if (!v.is_number()) throw CliError{2, "config error: '" + path + "' must hold numbers"};
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> get_vec_or(const json& cfg, const std::string& path,
                               std::vector<double> fallback) {
  return find_path(cfg, path) == nullptr ? fallback : get_vec(cfg, path);
}

std::string fnv1a_hash(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// The resolved run context shared by every subcommand.
struct Ctx {
  json cfg;
  std::string hash;
  std::filesystem::path out_dir;
  uint64_t seed = 0;
  double gamma = 0.0;
  bool large = false;
  std::string command;

  std::vector<std::string> comment_lines() const {
    return {"config_hash=" + hash, "command=" + command, "seed=" + std::to_string(seed)};
  }
};

Ctx make_ctx(const std::string& command, const std::string& config_path,
             const std::string& out_flag, const uint64_t* seed_flag,
             const double* gamma_flag, bool large) {
  Ctx ctx;
  ctx.command = command;
  ctx.cfg = load_config(config_path);
  apply_env_overrides(ctx.cfg, "");
  if (seed_flag != nullptr) ctx.cfg["data"]["seed"] = *seed_flag;
  if (gamma_flag != nullptr) ctx.cfg["fit"]["gamma"] = *gamma_flag;
  ctx.hash = fnv1a_hash(ctx.cfg.dump());
  if (find_path(ctx.cfg, "data.seed") == nullptr) {
    throw CliError{2, "config error: missing field 'data.seed' (seeds are mandatory)"};
  }
  ctx.seed = static_cast<uint64_t>(get_int(ctx.cfg, "data.seed"));
  ctx.gamma = get_num_or(ctx.cfg, "fit.gamma", 0.0);
  ctx.large = large;
  ctx.out_dir = out_flag.empty() ? get_str_or(ctx.cfg, "output.dir", ".") : out_flag;
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec) throw CliError{2, "config error: cannot create output dir '" +
                                ctx.out_dir.string() + "': " + ec.message()};
  return ctx;
}

std::vector<const char*> comment_ptrs(const std::vector<std::string>& lines) {
  std::vector<const char*> ptrs;
  ptrs.reserve(lines.size());
  for (const auto& l : lines) ptrs.push_back(l.c_str());
  return ptrs;
}

void write_matrix(const Ctx& ctx, const geko_matrix* m, const std::string& name) {
  const std::vector<std::string> lines = ctx.comment_lines();
  const std::vector<const char*> ptrs = comment_ptrs(lines);
  const std::string path = (ctx.out_dir / name).string();
  check(geko_matrix_write_csv(m, path.c_str(), ptrs.data(),
                              static_cast<int64_t>(ptrs.size())));
}

// Stamps the config hash into a JSON document the core just wrote.
void stamp_json(const std::filesystem::path& path, const std::string& hash) {
  std::ifstream is(path);
  if (!is) throw CliError{2, "cannot reopen '" + path.string() + "'"};
  json doc = json::parse(is);
  is.close();
  doc["config_hash"] = hash;
  std::ofstream os(path);
  os << doc.dump(2) << "\n";
}

// --------------------------------------------------- experiment components

SystemPtr build_system(const json& cfg) {
  const std::string name = get_str_or(cfg, "system.name", "vdp");
  if (name != "vdp") {
    throw CliError{2, "config error: unknown system '" + name + "' (available: vdp)"};
  }
  const double mu = get_num_or(cfg, "system.mu", 1.2);
  const double ts = get_num_or(cfg, "system.sampling_time", 0.1);
  const int substeps = static_cast<int>(get_int_or(cfg, "system.substeps", 10));
  const std::vector<double> x_lo = get_vec_or(cfg, "data.x_box.lo", {-3.0, -3.0});
  const std::vector<double> x_hi = get_vec_or(cfg, "data.x_box.hi", {3.0, 3.0});
  const std::vector<double> u_lo = get_vec_or(cfg, "data.u_box.lo", {-1.0});
  const std::vector<double> u_hi = get_vec_or(cfg, "data.u_box.hi", {1.0});
  if (x_lo.size() != 2 || x_hi.size() != 2 || u_lo.size() != 1 || u_hi.size() != 1) {
    throw CliError{2, "config error: data boxes must be 2-dimensional (state) and "
                      "1-dimensional (input)"};
  }
  geko_system* raw = nullptr;
  check(geko_system_vdp_boxed(mu, ts, substeps, x_lo.data(), x_hi.data(), u_lo.data(),
                              u_hi.data(), &raw));
  return SystemPtr(raw);
}

MatrixPtr build_inputs(const json& cfg, int64_t horizon) {
  if (horizon == 0) return make_matrix(1, 0, nullptr);
  const std::string kind = get_str_or(cfg, "eval.input.kind", "sinusoid");
  if (kind == "sinusoid") {
    const double amplitude = get_num(cfg, "eval.input.amplitude");
    const double frequency = get_num(cfg, "eval.input.frequency");
    geko_matrix* raw = nullptr;
    check(geko_sinusoid_input(amplitude, frequency, horizon, &raw));
    return MatrixPtr(raw);
  }
  if (kind == "zero" || kind == "constant") {
    const double value = kind == "zero" ? 0.0 : get_num(cfg, "eval.input.value");
    std::vector<double> row(static_cast<std::size_t>(horizon), value);
    return make_matrix(1, horizon, row.data());
  }
  throw CliError{2, "config error: unknown input kind '" + kind +
                    "' (available: sinusoid, zero, constant)"};
}

struct LiftPair {
  ObservablePtr psi_x;
  ObservablePtr psi_u;
  int64_t n_z = 0;
  int64_t n_v = 0;
};

// State/input observables for the geko and direct methods. n_z / n_v can be
// overridden per bench tuple.
LiftPair build_lifts(const json& cfg, int64_t n_z_override, int64_t n_v_override) {
  LiftPair pair;
  const std::string kind = get_str_or(cfg, "observables.kind", "imq");
  if (kind == "imq") {
    const int64_t n_z = n_z_override > 0 ? n_z_override : get_int(cfg, "observables.n_z");
    const int64_t n_v = n_v_override > 0 ? n_v_override : get_int(cfg, "observables.n_v");
    const double sigma_x = get_num_or(cfg, "observables.sigma_x", 1.0);
    const double sigma_u = get_num_or(cfg, "observables.sigma_u", 1.0);
    const double beta = get_num_or(cfg, "observables.beta", 1.0);
    const uint64_t center_seed =
        static_cast<uint64_t>(get_int_or(cfg, "observables.center_seed", 1));
    const std::vector<double> x_lo = get_vec_or(cfg, "data.x_box.lo", {-3.0, -3.0});
    const std::vector<double> x_hi = get_vec_or(cfg, "data.x_box.hi", {3.0, 3.0});
    const std::vector<double> u_lo = get_vec_or(cfg, "data.u_box.lo", {-1.0});
    const std::vector<double> u_hi = get_vec_or(cfg, "data.u_box.hi", {1.0});
    geko_matrix* xc = nullptr;
    geko_matrix* uc = nullptr;
    check(geko_sample_centers(x_lo.data(), x_hi.data(), 2, n_z, GEKO_CENTERS_UNIFORM,
                              center_seed, &xc));
    const MatrixPtr x_centers(xc);
    check(geko_sample_centers(u_lo.data(), u_hi.data(), 1, n_v, GEKO_CENTERS_UNIFORM,
                              center_seed + 1, &uc));
    const MatrixPtr u_centers(uc);
    geko_observable* px = nullptr;
    geko_observable* pu = nullptr;
    check(geko_observable_imq(x_centers.get(), sigma_x, beta, x_lo.data(), x_hi.data(), 2,
                              center_seed, &px));
    pair.psi_x.reset(px);
    check(geko_observable_imq(u_centers.get(), sigma_u, beta, u_lo.data(), u_hi.data(), 1,
                              center_seed + 1, &pu));
    pair.psi_u.reset(pu);
    pair.n_z = n_z;
    pair.n_v = n_v;
    return pair;
  }
  if (kind == "affine" || kind == "identity") {
    geko_observable* px = nullptr;
    geko_observable* pu = nullptr;
    if (kind == "affine") {
      check(geko_observable_affine(2, &px));
      pair.psi_x.reset(px);
      check(geko_observable_affine(1, &pu));
      pair.psi_u.reset(pu);
    } else {
      check(geko_observable_identity(2, &px));
      pair.psi_x.reset(px);
      check(geko_observable_identity(1, &pu));
      pair.psi_u.reset(pu);
    }
    pair.n_z = geko_observable_output_dim(pair.psi_x.get());
    pair.n_v = geko_observable_output_dim(pair.psi_u.get());
    return pair;
  }
  throw CliError{2, "config error: unknown observable kind '" + kind +
                    "' (available: imq, affine, identity)"};
}

// Stacked-space centers for the KIC baseline: count defaults to n_z.
MatrixPtr build_kic_centers(const json& cfg, int64_t count_override) {
  const int64_t count =
      count_override > 0 ? count_override : get_int(cfg, "observables.n_z");
  const uint64_t center_seed =
      static_cast<uint64_t>(get_int_or(cfg, "observables.center_seed", 1));
  const std::vector<double> x_lo = get_vec_or(cfg, "data.x_box.lo", {-3.0, -3.0});
  const std::vector<double> x_hi = get_vec_or(cfg, "data.x_box.hi", {3.0, 3.0});
  const std::vector<double> u_lo = get_vec_or(cfg, "data.u_box.lo", {-1.0});
  const std::vector<double> u_hi = get_vec_or(cfg, "data.u_box.hi", {1.0});
  const std::vector<double> lo = {x_lo[0], x_lo[1], u_lo[0]};
  const std::vector<double> hi = {x_hi[0], x_hi[1], u_hi[0]};
  geko_matrix* raw = nullptr;
  check(geko_sample_centers(lo.data(), hi.data(), 3, count, GEKO_CENTERS_UNIFORM,
                            center_seed, &raw));
  return MatrixPtr(raw);
}

int64_t feature_dimension(const json& cfg, const std::string& method, int64_t n_z,
                          int64_t n_v) {
  if (method == "kic") return n_z;
  if (method == "havok") return 2 * get_int_or(cfg, "fit.delay", 10);
  return n_z * n_v;
}

// data.snapshots <= 0 (or absent) means "4 x feature dimension".
int64_t snapshot_count(const json& cfg, int64_t feature_dim) {
  const int64_t count = get_int_or(cfg, "data.snapshots", 0);
  return count > 0 ? count : 4 * feature_dim;
}

constexpr int64_t kLargeGateFeatures = 8192;

void gate_large(const Ctx& ctx, int64_t feature_dim) {
  const double gib = static_cast<double>(feature_dim) * static_cast<double>(feature_dim) *
                     8.0 / (1024.0 * 1024.0 * 1024.0);
  if (feature_dim > kLargeGateFeatures && !ctx.large) {
    std::ostringstream os;
    os << "config error: feature dimension " << feature_dim
       << " implies a normal-equations matrix of about " << format17(gib)
       << " GiB; rerun with --large to confirm";
    throw CliError{2, os.str()};
  }
  if (ctx.large) {
    std::cout << "large run: feature dimension " << feature_dim
              << ", normal-equations estimate " << gib << " GiB\n";
  }
}

// --------------------------------------------------------------- simulate

TrajectoryPtr run_rollout(const Ctx& ctx) {
  const SystemPtr sys = build_system(ctx.cfg);
  const std::vector<double> x0 = get_vec(ctx.cfg, "eval.x0");
  if (x0.size() != 2) throw CliError{2, "config error: 'eval.x0' must have 2 entries"};
  const int64_t horizon = get_int(ctx.cfg, "eval.horizon");
  if (horizon < 1) throw CliError{2, "config error: 'eval.horizon' must be >= 1"};
  const MatrixPtr inputs = build_inputs(ctx.cfg, horizon);
  geko_trajectory* raw = nullptr;
  check(geko_rollout(sys.get(), x0.data(), static_cast<int64_t>(x0.size()), inputs.get(),
                     &raw));
  return TrajectoryPtr(raw);
}

int cmd_simulate(const Ctx& ctx) {
  const TrajectoryPtr traj = run_rollout(ctx);
  const std::vector<std::string> lines = ctx.comment_lines();
  const std::vector<const char*> ptrs = comment_ptrs(lines);
  const std::string path = (ctx.out_dir / "trajectory.csv").string();
  check(geko_trajectory_write_csv(traj.get(), path.c_str(), ptrs.data(),
                                  static_cast<int64_t>(ptrs.size())));

  geko_matrix* states_raw = nullptr;
  check(geko_trajectory_states(traj.get(), &states_raw));
  const MatrixPtr states(states_raw);
  const int64_t last = geko_matrix_cols(states.get()) - 1;
  double x1 = 0.0;
  double x2 = 0.0;
  check(geko_matrix_get(states.get(), 0, last, &x1));
  check(geko_matrix_get(states.get(), 1, last, &x2));
  std::cout << "simulated " << geko_trajectory_length(traj.get()) << " steps ("
            << geko_matrix_cols(states.get()) << " states); final state [" << format17(x1)
            << ", " << format17(x2) << "]\n"
            << "wrote " << path << " (config_hash=" << ctx.hash << ")\n";
  return 0;
}

// -------------------------------------------------------------------- fit

struct FitOutcome {
  ModelPtr model;
  int64_t feature_dim = 0;
};

// Fits one model per the config's fit.method, either from generated snapshot
// data (shared seed) or from a recorded trajectory file.
FitOutcome run_fit(const Ctx& ctx, const std::string& data_path, int64_t n_z_override,
                   int64_t n_v_override) {
  const std::string method = get_str_or(ctx.cfg, "fit.method", "geko");
  const bool with_decoder = get_int_or(ctx.cfg, "fit.decoder", 1) != 0;

  TrajectoryPtr traj;
  if (!data_path.empty()) {
    geko_trajectory* raw = nullptr;
    check(geko_trajectory_read_csv(data_path.c_str(), &raw));
    traj.reset(raw);
  }

  FitOutcome outcome;
  geko_model* raw_model = nullptr;

  if (method == "havok") {
    if (!traj) {
      throw CliError{2, "config error: method 'havok' needs a recorded trajectory "
                        "(pass --data)"};
    }
    const int64_t delay = get_int_or(ctx.cfg, "fit.delay", 10);
    outcome.feature_dim = feature_dimension(ctx.cfg, method, 0, 0);
    gate_large(ctx, outcome.feature_dim);
    check(geko_fit_havok(traj.get(), delay, ctx.gamma, &raw_model));
    outcome.model.reset(raw_model);
    return outcome;
  }

  if (method == "kic") {
    const MatrixPtr centers = build_kic_centers(ctx.cfg, n_z_override);
    const double sigma = get_num_or(ctx.cfg, "observables.sigma", 1.0);
    const std::string target_name = get_str_or(ctx.cfg, "fit.kic_target", "lifted");
    if (target_name != "lifted" && target_name != "raw") {
      throw CliError{2, "config error: 'fit.kic_target' must be 'lifted' or 'raw'"};
    }
    const geko_kic_target target =
        target_name == "raw" ? GEKO_KIC_RAW : GEKO_KIC_LIFTED;
    outcome.feature_dim = geko_matrix_cols(centers.get());
    gate_large(ctx, outcome.feature_dim);
    if (traj) {
      check(geko_fit_kic_trajectory(traj.get(), centers.get(), sigma, ctx.gamma, target,
                                    with_decoder ? 1 : 0, &raw_model));
    } else {
      const SystemPtr sys = build_system(ctx.cfg);
      const int64_t count = snapshot_count(ctx.cfg, outcome.feature_dim);
      geko_matrix *x = nullptr, *u = nullptr, *x_next = nullptr;
      check(geko_sample_snapshots(sys.get(), count, GEKO_SAMPLE_UNIFORM, ctx.seed, &x, &u,
                                  &x_next));
      const MatrixPtr xp(x), up(u), xnp(x_next);
      check(geko_fit_kic(x, u, x_next, centers.get(), sigma, ctx.gamma, target,
                         with_decoder ? 1 : 0, &raw_model));
    }
    outcome.model.reset(raw_model);
    return outcome;
  }

  if (method != "geko" && method != "direct") {
    throw CliError{2, "config error: unknown fit method '" + method +
                      "' (available: geko, kic, direct, havok)"};
  }

  const LiftPair lifts = build_lifts(ctx.cfg, n_z_override, n_v_override);
  outcome.feature_dim = lifts.n_z * lifts.n_v;
  gate_large(ctx, outcome.feature_dim);

  if (traj) {
    if (method == "geko") {
      check(geko_fit_geko_trajectory(traj.get(), lifts.psi_x.get(), lifts.psi_u.get(),
                                     ctx.gamma, with_decoder ? 1 : 0, &raw_model));
    } else {
      // fit_direct consumes snapshot triples; slice them out of the recording.
      geko_matrix* states_raw = nullptr;
      geko_matrix* inputs_raw = nullptr;
      check(geko_trajectory_states(traj.get(), &states_raw));
      const MatrixPtr states(states_raw);
      check(geko_trajectory_inputs(traj.get(), &inputs_raw));
      const MatrixPtr inputs(inputs_raw);
      const int64_t n = geko_matrix_rows(states.get());
      const int64_t steps = geko_matrix_cols(states.get()) - 1;
      const std::vector<double> flat = matrix_data(states.get());
      std::vector<double> head(static_cast<std::size_t>(n * steps));
      std::vector<double> tail(static_cast<std::size_t>(n * steps));
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t t = 0; t < steps; ++t) {
          head[static_cast<std::size_t>(i * steps + t)] =
              flat[static_cast<std::size_t>(i * (steps + 1) + t)];
          tail[static_cast<std::size_t>(i * steps + t)] =
              flat[static_cast<std::size_t>(i * (steps + 1) + t + 1)];
        }
      }
      const MatrixPtr x = make_matrix(n, steps, head.data());
      const MatrixPtr x_next = make_matrix(n, steps, tail.data());
      check(geko_fit_direct(x.get(), inputs.get(), x_next.get(), lifts.psi_x.get(),
                            lifts.psi_u.get(), ctx.gamma, &raw_model));
    }
  } else {
    const SystemPtr sys = build_system(ctx.cfg);
    const int64_t count = snapshot_count(ctx.cfg, outcome.feature_dim);
    geko_matrix *x = nullptr, *u = nullptr, *x_next = nullptr;
    check(geko_sample_snapshots(sys.get(), count, GEKO_SAMPLE_UNIFORM, ctx.seed, &x, &u,
                                &x_next));
    const MatrixPtr xp(x), up(u), xnp(x_next);
    if (method == "geko") {
      check(geko_fit_geko(x, u, x_next, lifts.psi_x.get(), lifts.psi_u.get(), ctx.gamma,
                          with_decoder ? 1 : 0, &raw_model));
    } else {
      check(geko_fit_direct(x, u, x_next, lifts.psi_x.get(), lifts.psi_u.get(), ctx.gamma,
                            &raw_model));
    }
  }
  outcome.model.reset(raw_model);
  return outcome;
}

int cmd_fit(const Ctx& ctx, const std::string& data_path) {
  FitOutcome outcome;
  try {
    outcome = run_fit(ctx, data_path, 0, 0);
  } catch (CliError& e) {
    if (e.code == 3) {
      e.message += "; supply more training data or set gamma > 0";
    }
    throw;
  }

  double residual = 0.0, smallest = 0.0, gamma = 0.0;
  int64_t rank = 0, columns = 0;
  check(geko_model_diagnostics(outcome.model.get(), &residual, &rank, &smallest, &gamma,
                               &columns));
  const std::string path = (ctx.out_dir / "model.json").string();
  check(geko_model_save(outcome.model.get(), path.c_str()));
  stamp_json(path, ctx.hash);

  std::cout << "method=" << geko_model_method(outcome.model.get())
            << " features=" << outcome.feature_dim << " columns=" << columns
            << " residual=" << format17(residual) << " rank=" << rank
            << " smallest_sv=" << format17(smallest) << " gamma=" << format17(gamma)
            << "\n"
            << "wrote " << path << " (config_hash=" << ctx.hash << ")\n";
  return 0;
}

// ---------------------------------------------------------------- predict

struct SurfaceStats {
  double mean = 0.0;
  double max = 0.0;
  std::vector<double> per_t_max;
};

SurfaceStats surface_stats(const geko_matrix* surface) {
  SurfaceStats stats;
  const int64_t rows = geko_matrix_rows(surface);
  const int64_t cols = geko_matrix_cols(surface);
  const std::vector<double> data = matrix_data(surface);
  stats.per_t_max.assign(static_cast<std::size_t>(cols), 0.0);
  double sum = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t t = 0; t < cols; ++t) {
      const double v = data[static_cast<std::size_t>(i * cols + t)];
      sum += v;
      stats.max = std::max(stats.max, v);
      stats.per_t_max[static_cast<std::size_t>(t)] =
          std::max(stats.per_t_max[static_cast<std::size_t>(t)], v);
    }
  }
  stats.mean = rows * cols > 0 ? sum / static_cast<double>(rows * cols) : 0.0;
  return stats;
}

std::vector<double> lift_state_point(const geko_model* model, const std::string& method,
                                     const std::vector<double>& x0,
                                     const geko_matrix* inputs) {
  std::vector<double> point = x0;
  if (method == "kic") {
    // The stacked lifting consumes col(x, u): append the first input.
    if (geko_matrix_cols(inputs) < 1) {
      throw CliError{2, "config error: the stacked lifting needs at least one input "
                        "(horizon >= 1)"};
    }
    double u0 = 0.0;
    check(geko_matrix_get(inputs, 0, 0, &u0));
    point.push_back(u0);
  }
  std::vector<double> z0(static_cast<std::size_t>(geko_model_nz(model)));
  check(geko_model_lift_state(model, point.data(), static_cast<int64_t>(point.size()),
                              z0.data()));
  return z0;
}

MatrixPtr lift_input_sequence(const geko_model* model, const geko_matrix* inputs,
                              int64_t horizon) {
  const int64_t nv = geko_model_nv(model);
  std::vector<double> v_rowmajor(static_cast<std::size_t>(nv * horizon));
  std::vector<double> v_col(static_cast<std::size_t>(nv));
  for (int64_t t = 0; t < horizon; ++t) {
    double ut = 0.0;
    check(geko_matrix_get(inputs, 0, t, &ut));
    check(geko_model_lift_input(model, &ut, 1, v_col.data()));
    for (int64_t i = 0; i < nv; ++i) {
      v_rowmajor[static_cast<std::size_t>(i * horizon + t)] =
          v_col[static_cast<std::size_t>(i)];
    }
  }
  return make_matrix(nv, horizon, v_rowmajor.data());
}

void emit_error_surface(const Ctx& ctx, const geko_model* model,
                        const std::string& truth_path) {
  geko_trajectory* truth_raw = nullptr;
  check(geko_trajectory_read_csv(truth_path.c_str(), &truth_raw));
  const TrajectoryPtr truth(truth_raw);
  geko_matrix* surface_raw = nullptr;
  check(geko_error_surface(model, truth.get(), &surface_raw));
  const MatrixPtr surface(surface_raw);
  write_matrix(ctx, surface.get(), "error_surface.csv");

  const SurfaceStats stats = surface_stats(surface.get());
  json summary;
  summary["config_hash"] = ctx.hash;
  summary["mean"] = stats.mean;
  summary["max"] = stats.max;
  summary["per_t_max"] = stats.per_t_max;
  const std::string path = (ctx.out_dir / "error_summary.json").string();
  std::ofstream os(path);
  os << summary.dump(2) << "\n";
  std::cout << "error surface " << geko_matrix_rows(surface.get()) << " x "
            << geko_matrix_cols(surface.get()) << ": mean=" << format17(stats.mean)
            << " max=" << format17(stats.max) << "\n";
}

int cmd_predict_operator(const Ctx& ctx, const geko_model* model,
                         const std::string& truth_path) {
  const std::string method = geko_model_method(model);
  const std::vector<double> x0 = get_vec(ctx.cfg, "eval.x0");
  const int64_t horizon = get_int(ctx.cfg, "eval.horizon");
  if (horizon < 0) throw CliError{2, "config error: 'eval.horizon' must be >= 0"};
  const MatrixPtr inputs = build_inputs(ctx.cfg, horizon);

  const std::vector<double> z0 = lift_state_point(model, method, x0, inputs.get());
  const MatrixPtr v_seq = lift_input_sequence(model, inputs.get(), horizon);

  geko_matrix* z_raw = nullptr;
  geko_matrix* w_raw = nullptr;
  check(geko_propagate(model, z0.data(), static_cast<int64_t>(z0.size()), v_seq.get(),
                       &z_raw, &w_raw));
  const MatrixPtr z_hat(z_raw);
  const MatrixPtr w_hat(w_raw);
  write_matrix(ctx, z_hat.get(), "z_hat.csv");
  std::cout << "lifted prediction " << geko_matrix_rows(z_hat.get()) << " x "
            << geko_matrix_cols(z_hat.get()) << " -> z_hat.csv\n";
  if (w_hat) {
    write_matrix(ctx, w_hat.get(), "w_hat.csv");
    std::cout << "output prediction -> w_hat.csv\n";
  }
  if (geko_model_has(model, GEKO_BLOCK_D) == 1) {
    geko_matrix* x_raw = nullptr;
    check(geko_decode(model, z_hat.get(), &x_raw));
    const MatrixPtr x_hat(x_raw);
    write_matrix(ctx, x_hat.get(), "x_hat.csv");
    std::cout << "decoded prediction -> x_hat.csv\n";
  }
  if (!truth_path.empty()) emit_error_surface(ctx, model, truth_path);
  return 0;
}

int cmd_predict_lemma(const Ctx& ctx, const geko_model* model,
                      const std::string& lemma_dir, const std::string& truth_path) {
  if (lemma_dir.empty()) {
    throw CliError{2, "config error: --mode lemma needs --lemma <dir>"};
  }
  geko_lemma* lemma_raw = nullptr;
  check(geko_lemma_load(lemma_dir.c_str(), &lemma_raw));
  const LemmaPtr lemma(lemma_raw);
  const int64_t depth = geko_lemma_depth(lemma.get());
  const int64_t nz = geko_lemma_nz(lemma.get());
  const int64_t nv = geko_lemma_nv(lemma.get());
  if (nz != geko_model_nz(model) || nv != geko_model_nv(model)) {
    throw CliError{2, "config error: lemma store lifts (" + std::to_string(nz) + ", " +
                      std::to_string(nv) + ") do not match the model (" +
                      std::to_string(geko_model_nz(model)) + ", " +
                      std::to_string(geko_model_nv(model)) + ")"};
  }

  // Assemble the query window of stacked (z_t kron v_t) blocks. Depth one
  // needs only the configured initial state and input; deeper windows read
  // the recorded truth.
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>(nz * nv * depth));
  const std::string method = geko_model_method(model);
  if (depth == 1) {
    const std::vector<double> x0 = get_vec(ctx.cfg, "eval.x0");
    const MatrixPtr inputs = build_inputs(ctx.cfg, std::max<int64_t>(
                                                       get_int(ctx.cfg, "eval.horizon"), 1));
    const std::vector<double> z0 = lift_state_point(model, method, x0, inputs.get());
    double u0 = 0.0;
    check(geko_matrix_get(inputs.get(), 0, 0, &u0));
    std::vector<double> v0(static_cast<std::size_t>(nv));
    check(geko_model_lift_input(model, &u0, 1, v0.data()));
    for (int64_t i = 0; i < nz; ++i) {
      for (int64_t j = 0; j < nv; ++j) {
        window.push_back(z0[static_cast<std::size_t>(i)] * v0[static_cast<std::size_t>(j)]);
      }
    }
  } else {
    if (truth_path.empty()) {
      throw CliError{2, "config error: lemma windows of depth " + std::to_string(depth) +
                        " need --truth to supply the recorded state-input window"};
    }
    geko_trajectory* truth_raw = nullptr;
    check(geko_trajectory_read_csv(truth_path.c_str(), &truth_raw));
    const TrajectoryPtr truth(truth_raw);
    if (geko_trajectory_length(truth.get()) < depth) {
      throw CliError{2, "config error: truth trajectory is shorter than the lemma depth"};
    }
    geko_matrix* states_raw = nullptr;
    geko_matrix* inputs_raw = nullptr;
    check(geko_trajectory_states(truth.get(), &states_raw));
    const MatrixPtr states(states_raw);
    check(geko_trajectory_inputs(truth.get(), &inputs_raw));
    const MatrixPtr inputs(inputs_raw);
    const int64_t n = geko_matrix_rows(states.get());
    std::vector<double> xt(static_cast<std::size_t>(n));
    std::vector<double> zt(static_cast<std::size_t>(nz));
    std::vector<double> vt(static_cast<std::size_t>(nv));
    for (int64_t t = 0; t < depth; ++t) {
      for (int64_t i = 0; i < n; ++i) {
        check(geko_matrix_get(states.get(), i, t, &xt[static_cast<std::size_t>(i)]));
      }
      double ut = 0.0;
      check(geko_matrix_get(inputs.get(), 0, t, &ut));
      std::vector<double> point = xt;
      if (method == "kic") point.push_back(ut);
      check(geko_model_lift_state(model, point.data(), static_cast<int64_t>(point.size()),
                                  zt.data()));
      check(geko_model_lift_input(model, &ut, 1, vt.data()));
      for (int64_t i = 0; i < nz; ++i) {
        for (int64_t j = 0; j < nv; ++j) {
          window.push_back(zt[static_cast<std::size_t>(i)] *
                           vt[static_cast<std::size_t>(j)]);
        }
      }
    }
  }

  const int64_t nw = geko_lemma_nw(lemma.get());
  std::vector<double> outputs(static_cast<std::size_t>(nw * depth));
  double residual = 0.0;
  check(geko_lemma_predict(lemma.get(), window.data(),
                           static_cast<int64_t>(window.size()), ctx.gamma, outputs.data(),
                           &residual));

  // The stacked output vector holds one nw-block per window step; unstack it
  // into an nw x depth matrix (column t = predicted outputs at step t+1).
  std::vector<double> rowmajor(outputs.size());
  for (int64_t t = 0; t < depth; ++t) {
    for (int64_t i = 0; i < nw; ++i) {
      rowmajor[static_cast<std::size_t>(i * depth + t)] =
          outputs[static_cast<std::size_t>(t * nw + i)];
    }
  }
  const MatrixPtr prediction = make_matrix(nw, depth, rowmajor.data());
  write_matrix(ctx, prediction.get(), "lemma_prediction.csv");
  std::cout << "lemma prediction " << nw << " x " << depth
            << " -> lemma_prediction.csv (residual=" << format17(residual) << ")\n";
  return 0;
}

int cmd_predict(const Ctx& ctx, const std::string& model_path, const std::string& mode,
                const std::string& truth_path, const std::string& lemma_dir) {
  geko_model* model_raw = nullptr;
  check(geko_model_load(model_path.c_str(), &model_raw));
  const ModelPtr model(model_raw);
  if (mode == "operator") return cmd_predict_operator(ctx, model.get(), truth_path);
  if (mode == "lemma") return cmd_predict_lemma(ctx, model.get(), lemma_dir, truth_path);
  throw CliError{2, "config error: unknown mode '" + mode +
                    "' (available: operator, lemma)"};
}

// ------------------------------------------------------------------ bench

struct BenchRow {
  std::string method;
  int64_t n_z = 0;
  int64_t n_v = 0;
  int64_t feature_dim = 0;
  double residual = std::numeric_limits<double>::quiet_NaN();
  double mean_lifted = std::numeric_limits<double>::quiet_NaN();
  double max_lifted = std::numeric_limits<double>::quiet_NaN();
  double mean_state = std::numeric_limits<double>::quiet_NaN();
  double max_state = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

std::string csv_field(double v) { return std::isfinite(v) ? format17(v) : ""; }

// One full pipeline run: sample, fit, roll out the truth, score.
BenchRow run_bench_tuple(const Ctx& ctx, const std::string& method, int64_t n_z,
                         int64_t n_v) {
  BenchRow row;
  row.method = method;
  row.n_z = n_z;
  row.n_v = n_v;
  row.feature_dim = feature_dimension(ctx.cfg, method, n_z, n_v);
  const auto started = std::chrono::steady_clock::now();
  try {
    Ctx tuple_ctx = ctx;
    tuple_ctx.cfg["fit"]["method"] = method;
    const FitOutcome outcome = run_fit(tuple_ctx, "", n_z, n_v);
    row.feature_dim = outcome.feature_dim;

    double smallest = 0.0, gamma = 0.0;
    int64_t rank = 0, columns = 0;
    check(geko_model_diagnostics(outcome.model.get(), &row.residual, &rank, &smallest,
                                 &gamma, &columns));

    const TrajectoryPtr truth = run_rollout(ctx);
    geko_matrix* surface_raw = nullptr;
    check(geko_error_surface(outcome.model.get(), truth.get(), &surface_raw));
    const MatrixPtr surface(surface_raw);
    const SurfaceStats lifted = surface_stats(surface.get());
    row.mean_lifted = lifted.mean;
    row.max_lifted = lifted.max;

    if (geko_model_has(outcome.model.get(), GEKO_BLOCK_D) == 1) {
      // Decode the model's own rollout and score it against the true states.
      geko_matrix* states_raw = nullptr;
      geko_matrix* inputs_raw = nullptr;
      check(geko_trajectory_states(truth.get(), &states_raw));
      const MatrixPtr states(states_raw);
      check(geko_trajectory_inputs(truth.get(), &inputs_raw));
      const MatrixPtr inputs(inputs_raw);
      const int64_t horizon = geko_matrix_cols(inputs.get());
      const std::vector<double> x0 = get_vec(ctx.cfg, "eval.x0");
      const std::vector<double> z0 =
          lift_state_point(outcome.model.get(), method, x0, inputs.get());
      const MatrixPtr v_seq =
          lift_input_sequence(outcome.model.get(), inputs.get(), horizon);
      geko_matrix* z_raw = nullptr;
      check(geko_propagate(outcome.model.get(), z0.data(),
                           static_cast<int64_t>(z0.size()), v_seq.get(), &z_raw, nullptr));
      const MatrixPtr z_hat(z_raw);
      geko_matrix* x_raw = nullptr;
      check(geko_decode(outcome.model.get(), z_hat.get(), &x_raw));
      const MatrixPtr x_hat(x_raw);

      const std::vector<double> pred = matrix_data(x_hat.get());
      const std::vector<double> true_states = matrix_data(states.get());
      const int64_t n = geko_matrix_rows(states.get());
      const int64_t pred_cols = geko_matrix_cols(x_hat.get());
      const int64_t cols = std::min(pred_cols, geko_matrix_cols(states.get()));
      double sum = 0.0;
      double peak = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t t = 0; t < cols; ++t) {
          const double err =
              std::abs(pred[static_cast<std::size_t>(i * pred_cols + t)] -
                       true_states[static_cast<std::size_t>(
                           i * geko_matrix_cols(states.get()) + t)]);
          sum += err;
          peak = std::max(peak, err);
        }
      }
      row.mean_state = sum / static_cast<double>(n * cols);
      row.max_state = peak;
    }
  } catch (const CliError& e) {
    row.status = e.message;
  } catch (const std::exception& e) {
    row.status = e.what();
  }
  const auto finished = std::chrono::steady_clock::now();
  row.wall_ms =
      std::chrono::duration<double, std::milli>(finished - started).count();
  // Keep the report CSV parseable: fields are comma-separated.
  std::replace(row.status.begin(), row.status.end(), ',', ';');
  return row;
}

int cmd_bench(const Ctx& ctx, int jobs) {
  struct Tuple {
    std::string method;
    int64_t n_z;
    int64_t n_v;
  };
  std::vector<Tuple> tuples;
  if (find_path(ctx.cfg, "bench.tuples") != nullptr) {
    const json& list = get_req(ctx.cfg, "bench.tuples");
    if (!list.is_array()) throw CliError{2, "config error: 'bench.tuples' must be an array"};
    for (const auto& t : list) {
      if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_number_integer() ||
          !t[2].is_number_integer()) {
        throw CliError{2, "config error: each bench tuple must be [method, n_z, n_v]"};
      }
      tuples.push_back({t[0].get<std::string>(), t[1].get<int64_t>(), t[2].get<int64_t>()});
    }
  } else {
    const json& methods = get_req(ctx.cfg, "bench.methods");
    const json& nzs = get_req(ctx.cfg, "bench.n_z");
    const json& nvs = get_req(ctx.cfg, "bench.n_v");
    if (!methods.is_array() || !nzs.is_array() || !nvs.is_array()) {
      throw CliError{2, "config error: 'bench.methods', 'bench.n_z', 'bench.n_v' must be "
                        "arrays"};
    }
    for (const auto& m : methods) {
      for (const auto& nz : nzs) {
        for (const auto& nv : nvs) {
          tuples.push_back({m.get<std::string>(), nz.get<int64_t>(), nv.get<int64_t>()});
        }
      }
    }
  }
  if (tuples.empty()) throw CliError{2, "config error: bench sweep is empty"};

  std::vector<BenchRow> rows(tuples.size());
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(jobs > 0 ? static_cast<std::size_t>(jobs) : hw, tuples.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < tuples.size(); i = next.fetch_add(1)) {
        rows[i] = run_bench_tuple(ctx, tuples[i].method, tuples[i].n_z, tuples[i].n_v);
      }
    });
  }
  for (auto& t : pool) t.join();

  std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.feature_dim != b.feature_dim) return a.feature_dim < b.feature_dim;
    if (a.n_z != b.n_z) return a.n_z < b.n_z;
    return a.n_v < b.n_v;
  });

  const std::string csv_path = (ctx.out_dir / "bench_report.csv").string();
  {
    std::ofstream os(csv_path);
    for (const auto& line : ctx.comment_lines()) os << "# " << line << "\n";
    os << "method,n_z,n_v,feature_dim,residual,mean_lifted_error,max_lifted_error,"
          "mean_state_error,max_state_error,wall_ms,status\n";
    for (const auto& r : rows) {
      os << r.method << ',' << r.n_z << ',' << r.n_v << ',' << r.feature_dim << ','
         << csv_field(r.residual) << ',' << csv_field(r.mean_lifted) << ','
         << csv_field(r.max_lifted) << ',' << csv_field(r.mean_state) << ','
         << csv_field(r.max_state) << ',' << csv_field(r.wall_ms) << ',' << r.status
         << "\n";
    }
  }

  json report;
  report["config_hash"] = ctx.hash;
  report["seed"] = ctx.seed;
  report["rows"] = json::array();
  for (const auto& r : rows) {
    json jr;
    jr["method"] = r.method;
    jr["n_z"] = r.n_z;
    jr["n_v"] = r.n_v;
    jr["feature_dim"] = r.feature_dim;
    jr["residual"] = std::isfinite(r.residual) ? json(r.residual) : json();
    jr["mean_lifted_error"] = std::isfinite(r.mean_lifted) ? json(r.mean_lifted) : json();
    jr["max_lifted_error"] = std::isfinite(r.max_lifted) ? json(r.max_lifted) : json();
    jr["mean_state_error"] = std::isfinite(r.mean_state) ? json(r.mean_state) : json();
    jr["max_state_error"] = std::isfinite(r.max_state) ? json(r.max_state) : json();
    jr["wall_ms"] = std::isfinite(r.wall_ms) ? json(r.wall_ms) : json();
    jr["status"] = r.status;
    report["rows"].push_back(jr);
  }
  const std::string json_path = (ctx.out_dir / "bench_report.json").string();
  {
    std::ofstream os(json_path);
    os << report.dump(2) << "\n";
  }

  std::size_t failures = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") ++failures;
    std::cout << r.method << " n_z=" << r.n_z << " n_v=" << r.n_v
              << " features=" << r.feature_dim;
    if (r.status == "ok") {
      std::cout << " mean_lifted=" << format17(r.mean_lifted)
                << " max_lifted=" << format17(r.max_lifted);
    } else {
      std::cout << " FAILED: " << r.status;
    }
    std::cout << "\n";
  }
  std::cout << "wrote " << csv_path << " and " << json_path << " (" << rows.size()
            << " rows, " << failures << " failures, config_hash=" << ctx.hash << ")\n";
  return 0;
}

// ------------------------------------------------------------------ lemma

int cmd_lemma_build(const Ctx& ctx, const std::string& data_path) {
  TrajectoryPtr traj;
  if (data_path.empty()) {
    traj = run_rollout(ctx);
  } else {
    geko_trajectory* raw = nullptr;
    check(geko_trajectory_read_csv(data_path.c_str(), &raw));
    traj.reset(raw);
  }

  const int64_t depth = get_int(ctx.cfg, "lemma.depth");
  const LiftPair lifts = build_lifts(ctx.cfg, 0, 0);

  geko_matrix* outputs_raw = nullptr;
  check(geko_trajectory_outputs(traj.get(), &outputs_raw));
  const MatrixPtr outputs(outputs_raw);
  const std::string output_kind = get_str_or(ctx.cfg, "lemma.output", "raw");
  ObservablePtr psi_y;
  if (output_kind == "raw") {
    geko_observable* py = nullptr;
    check(geko_observable_identity(geko_matrix_rows(outputs.get()), &py));
    psi_y.reset(py);
  } else if (output_kind == "lifted") {
    // Predict lifted state windows: lift the outputs with the state map.
    LiftPair y_lifts = build_lifts(ctx.cfg, 0, 0);
    psi_y = std::move(y_lifts.psi_x);
  } else {
    throw CliError{2, "config error: 'lemma.output' must be 'raw' or 'lifted'"};
  }

  geko_lemma* lemma_raw = nullptr;
  check(geko_lemma_build_trajectory(traj.get(), lifts.psi_x.get(), lifts.psi_u.get(),
                                    psi_y.get(), depth, &lemma_raw));
  const LemmaPtr lemma(lemma_raw);

  int full = 0;
  int64_t rank = 0;
  double smallest = 0.0;
  check(geko_lemma_pe(lemma.get(), 0.0, &full, &rank, &smallest));

  const std::filesystem::path dir = ctx.out_dir / "lemma";
  check(geko_lemma_save(lemma.get(), dir.string().c_str()));
  stamp_json(dir / "manifest.json", ctx.hash);

  std::cout << "lemma store: depth=" << geko_lemma_depth(lemma.get())
            << " width=" << geko_lemma_width(lemma.get())
            << " n_z=" << geko_lemma_nz(lemma.get())
            << " n_v=" << geko_lemma_nv(lemma.get())
            << " n_w=" << geko_lemma_nw(lemma.get()) << " rank=" << rank
            << " smallest_sv=" << format17(smallest) << "\n"
            << "persistency of excitation: "
            << (full ? "full row rank" : "NOT full row rank (gamma = 0 solves will fail)")
            << "\n"
            << "wrote " << dir.string() << " (config_hash=" << ctx.hash << ")\n";
  return 0;
}

int cmd_lemma_predict(const Ctx& ctx, const std::string& lemma_dir,
                      const std::string& window_path) {
  geko_lemma* lemma_raw = nullptr;
  check(geko_lemma_load(lemma_dir.c_str(), &lemma_raw));
  const LemmaPtr lemma(lemma_raw);

  geko_matrix* window_raw = nullptr;
  check(geko_matrix_read_csv(window_path.c_str(), &window_raw));
  const MatrixPtr windows(window_raw);
  const int64_t window_size =
      geko_lemma_nz(lemma.get()) * geko_lemma_nv(lemma.get()) * geko_lemma_depth(lemma.get());
  if (geko_matrix_rows(windows.get()) != window_size) {
    throw CliError{2, "config error: window file has " +
                      std::to_string(geko_matrix_rows(windows.get())) +
                      " rows, the lemma store expects " + std::to_string(window_size)};
  }

  const int64_t queries = geko_matrix_cols(windows.get());
  const int64_t nw = geko_lemma_nw(lemma.get());
  const int64_t depth = geko_lemma_depth(lemma.get());
  const std::vector<double> flat = matrix_data(windows.get());
  std::vector<double> window(static_cast<std::size_t>(window_size));
  std::vector<double> outputs(static_cast<std::size_t>(nw * depth));
  std::vector<double> predictions(static_cast<std::size_t>(nw * depth * queries));
  std::vector<double> residuals(static_cast<std::size_t>(queries));
  for (int64_t q = 0; q < queries; ++q) {
    for (int64_t i = 0; i < window_size; ++i) {
      window[static_cast<std::size_t>(i)] =
          flat[static_cast<std::size_t>(i * queries + q)];
    }
    check(geko_lemma_predict(lemma.get(), window.data(), window_size, ctx.gamma,
                             outputs.data(), &residuals[static_cast<std::size_t>(q)]));
    for (int64_t i = 0; i < nw * depth; ++i) {
      predictions[static_cast<std::size_t>(i * queries + q)] =
          outputs[static_cast<std::size_t>(i)];
    }
  }

  const MatrixPtr prediction = make_matrix(nw * depth, queries, predictions.data());
  write_matrix(ctx, prediction.get(), "lemma_prediction.csv");
  const MatrixPtr residual_row = make_matrix(1, queries, residuals.data());
  write_matrix(ctx, residual_row.get(), "lemma_residuals.csv");
  double worst = 0.0;
  for (double r : residuals) worst = std::max(worst, r);
  std::cout << "predicted " << queries << " windows (" << nw * depth
            << " outputs each), worst residual " << format17(worst)
            << " -> lemma_prediction.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geko: generalized Koopman operators with inputs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::string data_path;
  std::string model_path;
  std::string truth_path;
  std::string lemma_dir;
  std::string window_path;
  std::string mode = "operator";
  uint64_t seed_flag = 0;
  double gamma_flag = 0.0;
  bool large = false;
  int jobs = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", seed_flag, "override data.seed");
    cmd->add_option("--out", out_flag, "output directory");
    cmd->add_option("--gamma", gamma_flag, "override fit.gamma");
    cmd->add_flag("--large", large, "allow paper-scale feature dimensions");
    return cmd;
  };

  CLI::App* sim = add_common(app.add_subcommand("simulate", "roll out the true system"));
  CLI::App* fit = add_common(app.add_subcommand("fit", "fit a lifted model"));
  fit->add_option("--data", data_path, "recorded trajectory CSV (default: sample fresh)");
  CLI::App* predict =
      add_common(app.add_subcommand("predict", "propagate a fitted model"));
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--mode", mode, "operator | lemma");
  predict->add_option("--truth", truth_path, "truth trajectory CSV for error surfaces");
  predict->add_option("--lemma", lemma_dir, "lemma store directory (lemma mode)");
  CLI::App* bench = add_common(app.add_subcommand("bench", "sweep methods and sizes"));
  bench->add_option("--jobs", jobs, "parallel workers (default: hardware)");
  CLI::App* lbuild =
      add_common(app.add_subcommand("lemma-build", "build a data-driven lemma store"));
  lbuild->add_option("--data", data_path, "recorded trajectory CSV (default: simulate)");
  CLI::App* lpredict = add_common(
      app.add_subcommand("lemma-predict", "answer window queries from a lemma store"));
  lpredict->add_option("--lemma", lemma_dir, "lemma store directory")->required();
  lpredict->add_option("--window", window_path, "query window CSV (one query per column)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const uint64_t* seed_ptr = sim->count("--seed") || fit->count("--seed") ||
                                       predict->count("--seed") || bench->count("--seed") ||
                                       lbuild->count("--seed") || lpredict->count("--seed")
                                   ? &seed_flag
                                   : nullptr;
    const double* gamma_ptr = sim->count("--gamma") || fit->count("--gamma") ||
                                      predict->count("--gamma") || bench->count("--gamma") ||
                                      lbuild->count("--gamma") || lpredict->count("--gamma")
                                  ? &gamma_flag
                                  : nullptr;
    if (sim->parsed()) {
      return cmd_simulate(make_ctx("simulate", config_path, out_flag, seed_ptr, gamma_ptr,
                                   large));
    }
    if (fit->parsed()) {
      return cmd_fit(make_ctx("fit", config_path, out_flag, seed_ptr, gamma_ptr, large),
                     data_path);
    }
    if (predict->parsed()) {
      return cmd_predict(
          make_ctx("predict", config_path, out_flag, seed_ptr, gamma_ptr, large),
          model_path, mode, truth_path, lemma_dir);
    }
    if (bench->parsed()) {
      return cmd_bench(make_ctx("bench", config_path, out_flag, seed_ptr, gamma_ptr, large),
                       jobs);
    }
    if (lbuild->parsed()) {
      return cmd_lemma_build(
          make_ctx("lemma-build", config_path, out_flag, seed_ptr, gamma_ptr, large),
          data_path);
    }
    if (lpredict->parsed()) {
      return cmd_lemma_predict(
          make_ctx("lemma-predict", config_path, out_flag, seed_ptr, gamma_ptr, large),
          lemma_dir, window_path);
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
