#include "geko/lemma.hpp"

#include "geko/csv.hpp"
#include "geko/linalg.hpp"

#include <json.hpp>

#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>

namespace geko {

Matrix lemma_window_matrix(const Matrix& z, const Matrix& v, Eigen::Index depth,
                           Eigen::Index width) {
  const Eigen::Index block = z.rows() * v.rows();
  Matrix out(block * depth, width + 1);
  for (Eigen::Index j = 0; j <= width; ++j) {
    for (Eigen::Index i = 0; i < depth; ++i) {
      out.col(j).segment(i * block, block) = kron_vec(z.col(j + i), v.col(j + i));
    }
  }
  return out;
}

LemmaData build_lemma_data(const Matrix& z, const Matrix& v, const Matrix& w,
                           Eigen::Index depth) {
  if (depth < 1) throw ParamError("build_lemma_data: window depth must be at least 1");
  if (z.rows() < 1 || v.rows() < 1 || w.rows() < 1) {
    throw ParamError("build_lemma_data: z, v and w must all have at least one row");
  }
  if (z.cols() != v.cols()) {
    throw DimensionError("build_lemma_data: z and v must have the same column count (" +
                         std::to_string(z.cols()) + " vs " + std::to_string(v.cols()) + ")");
  }
  const Eigen::Index length = z.cols();
  if (length < depth) {
    throw DimensionError("build_lemma_data: " + std::to_string(length) +
                         " lifted pairs cannot fill a window of depth " + std::to_string(depth));
  }
  const Eigen::Index t_width = length - depth;
  if (w.cols() < length + 1) {
    throw DimensionError("build_lemma_data: the output windows reach index " +
                         std::to_string(length) + "; w has only " + std::to_string(w.cols()) +
                         " columns");
  }

  LemmaData data;
  data.depth = depth;
  data.width = t_width;
  data.n_z = z.rows();
  data.n_v = v.rows();
  data.n_w = w.rows();
  data.f_n = block_khatri_rao(hankel(z, depth, t_width), hankel(v, depth, t_width),
                              z.rows(), v.rows());
#ifndef NDEBUG
  assert((data.f_n - lemma_window_matrix(z, v, depth, t_width)).cwiseAbs().maxCoeff() == 0.0 &&
         "window-matrix factorization disagrees with the definitional assembly");
#endif
  const Matrix outputs = hankel(w.middleCols(1, length), depth, t_width);
  data.f_n_w.resize(data.f_n.rows() + outputs.rows(), t_width + 1);
  data.f_n_w.topRows(data.f_n.rows()) = data.f_n;
  data.f_n_w.bottomRows(outputs.rows()) = outputs;

  const SvdResult svd = svd_of(data.f_n);
  data.rank = svd.rank;
  data.smallest_sv = svd.smallest();
  data.condition = (svd.rank > 0) ? svd.singular_values[0] / svd.singular_values[svd.rank - 1]
                                  : 0.0;
  return data;
}

LemmaData build_lemma_data(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u, const ObservableMap& psi_y,
                           Eigen::Index depth) {
  if (!psi_x.pointwise() || !psi_u.pointwise() || !psi_y.pointwise()) {
    throw ParamError("build_lemma_data: delay observables are not supported here");
  }
  const Eigen::Index steps = traj.length();
  if (psi_x.input_dim != traj.states.rows() || psi_u.input_dim != traj.inputs.rows()) {
    throw DimensionError("build_lemma_data: observable maps do not match the trajectory");
  }
  if (traj.outputs.cols() != steps + 1 || psi_y.input_dim != traj.outputs.rows()) {
    throw DimensionError("build_lemma_data: psi_y needs aligned trajectory outputs");
  }
  Matrix z(psi_x.output_dim, steps);
  Matrix v(psi_u.output_dim, steps);
  Matrix w(psi_y.output_dim, steps + 1);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z.col(t) = psi_x.eval(traj.states.col(t));
    v.col(t) = psi_u.eval(traj.inputs.col(t));
  }
  for (Eigen::Index t = 0; t <= steps; ++t) w.col(t) = psi_y.eval(traj.outputs.col(t));
  return build_lemma_data(z, v, w, depth);
}

LemmaData reduce_lemma_rows(const LemmaData& data, double energy) {
  if (data.reduced()) {
    throw ParamError("reduce_lemma_rows: data has already been row-reduced");
  }
  const SvdReduction red = svd_reduce_energy(data.f_n, energy);
  LemmaData out = data;
  out.basis = red.svd.u.leftCols(red.order);
  out.f_n = red.reduced;
  out.f_n_w.resize(red.order + data.n_w * data.depth, data.columns());
  out.f_n_w.topRows(red.order) = red.reduced;
  out.f_n_w.bottomRows(data.n_w * data.depth) = data.output_block();
  out.rank = std::min(red.order, data.rank);
  out.smallest_sv = red.order > 0 ? red.svd.singular_values[red.order - 1] : 0.0;
  out.condition = (red.order > 0 && out.smallest_sv > 0.0)
                      ? red.svd.singular_values[0] / out.smallest_sv
                      : 0.0;
  return out;
}

PeReport pe_check(const LemmaData& data, double tolerance) {
  const SvdResult svd = svd_of(data.f_n);
  PeReport report;
  report.smallest_sv = svd.smallest();
  if (tolerance > 0.0 && svd.singular_values.size() > 0) {
    const double cutoff = tolerance * svd.singular_values[0];
    report.rank = 0;
    for (Eigen::Index i = 0; i < svd.singular_values.size(); ++i) {
      if (svd.singular_values[i] > cutoff) ++report.rank;
    }
  } else {
    report.rank = svd.rank;
  }
  report.full_row_rank = report.rank == data.f_n.rows();
  return report;
}

WindowQuery make_query(const Matrix& z, const Matrix& v, Eigen::Index start,
                       Eigen::Index depth) {
  if (depth < 1) throw ParamError("make_query: window depth must be at least 1");
  if (z.cols() != v.cols()) {
    throw DimensionError("make_query: z and v must have the same column count");
  }
  if (start < 0 || start + depth > z.cols()) {
    throw DimensionError("make_query: window [" + std::to_string(start) + ", " +
                         std::to_string(start + depth) + ") exceeds the signal length " +
                         std::to_string(z.cols()));
  }
  const Eigen::Index block = z.rows() * v.rows();
  WindowQuery query;
  query.horizon = depth;
  query.window.resize(block * depth);
  for (Eigen::Index i = 0; i < depth; ++i) {
    query.window.segment(i * block, block) = kron_vec(z.col(start + i), v.col(start + i));
  }
  return query;
}

GSolution solve_g(const LemmaData& data, const WindowQuery& query, double gamma) {
  if (query.window.size() != data.window_size()) {
    throw DimensionError("solve_g: query window has size " + std::to_string(query.window.size()) +
                         "; expected n_z*n_v*N = " + std::to_string(data.window_size()));
  }
  if (query.horizon != 0 && query.horizon != data.depth) {
    throw ParamError("solve_g: query horizon " + std::to_string(query.horizon) +
                     " does not match the window depth " + std::to_string(data.depth));
  }
  if (query.known_prefix.size() > 0 && query.known_prefix.rows() != data.n_w) {
    throw DimensionError("solve_g: known output prefix has " +
                         std::to_string(query.known_prefix.rows()) + " rows; expected " +
                         std::to_string(data.n_w));
  }
  const Vector q = data.reduced() ? Vector(data.basis.transpose() * query.window) : query.window;
  GSolution out;
  try {
    out.g = ridge_solve_vector(data.f_n, q, gamma);
  } catch (const RankError& e) {
    throw RankError("solve_g: F_N is not full row rank at gamma = 0, so solvability of every "
                    "query (the Rouche-Capelli rank condition) cannot be certified; " +
                    std::string(e.what()));
  }
  // Residual of the system actually solved (the projected one when reduced).
  out.residual = (data.f_n * out.g - q).norm();
  return out;
}

Vector predict_outputs(const LemmaData& data, const WindowQuery& query, double gamma) {
  const GSolution sol = solve_g(data, query, gamma);
  return data.output_block() * sol.g;
}

ConsistencyReport verify_lemma_consistency(const LemmaData& data, const KoopmanModel& model) {
  if (data.reduced()) {
    throw ParamError("verify_lemma_consistency: requires unreduced data matrices");
  }
  if (!model.has_k() || !model.has_c()) {
    throw ParamError("verify_lemma_consistency: the model needs both K and C");
  }
  if (model.k.rows() != data.n_z || model.k.cols() != data.n_z * data.n_v) {
    throw DimensionError("verify_lemma_consistency: K is " + std::to_string(model.k.rows()) +
                         " x " + std::to_string(model.k.cols()) + "; data blocks are n_z = " +
                         std::to_string(data.n_z) + ", n_v = " + std::to_string(data.n_v));
  }
  if (model.c.rows() != data.n_w || model.c.cols() != data.n_z) {
    throw DimensionError("verify_lemma_consistency: C is " + std::to_string(model.c.rows()) +
                         " x " + std::to_string(model.c.cols()) + "; data has n_w = " +
                         std::to_string(data.n_w) + ", n_z = " + std::to_string(data.n_z));
  }
  const Matrix ck = model.c * model.k;
  const Eigen::Index block = data.n_z * data.n_v;
  ConsistencyReport report;
  double fro2 = 0.0;
  for (Eigen::Index i = 0; i < data.depth; ++i) {
    const Matrix predicted = ck * data.f_n.middleRows(i * block, block);
    const Matrix diff =
        data.output_block().middleRows(i * data.n_w, data.n_w) - predicted;
    report.max_abs = std::max(report.max_abs, diff.cwiseAbs().maxCoeff());
    fro2 += diff.squaredNorm();
  }
  report.frobenius = std::sqrt(fro2);
  return report;
}

namespace {

Eigen::Index manifest_index(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    throw IoError(std::string("load_lemma_data: manifest is missing integer field '") + key +
                  "'");
  }
  return static_cast<Eigen::Index>(j[key].get<long long>());
}

double manifest_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw IoError(std::string("load_lemma_data: manifest is missing numeric field '") + key +
                  "'");
  }
  return j[key].get<double>();
}

}  // namespace

void save_lemma_data(const LemmaData& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("save_lemma_data: cannot create " + dir + ": " + ec.message());
  }
  write_matrix_csv(dir + "/f_n.csv", data.f_n);
  write_matrix_csv(dir + "/f_n_w.csv", data.f_n_w);
  if (data.reduced()) write_matrix_csv(dir + "/basis.csv", data.basis);

  nlohmann::json manifest;
  manifest["depth"] = data.depth;
  manifest["width"] = data.width;
  manifest["n_z"] = data.n_z;
  manifest["n_v"] = data.n_v;
  manifest["n_w"] = data.n_w;
  manifest["rank"] = data.rank;
  manifest["smallest_sv"] = data.smallest_sv;
  manifest["condition"] = data.condition;
  manifest["reduced"] = data.reduced();
  std::ofstream os(dir + "/manifest.json");
  if (!os) throw IoError("save_lemma_data: cannot write " + dir + "/manifest.json");
  os << manifest.dump(2) << "\n";
}

LemmaData load_lemma_data(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw IoError("load_lemma_data: cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("load_lemma_data: " + dir + "/manifest.json: " + e.what());
  }

  LemmaData data;
  data.depth = manifest_index(manifest, "depth");
  data.width = manifest_index(manifest, "width");
  data.n_z = manifest_index(manifest, "n_z");
  data.n_v = manifest_index(manifest, "n_v");
  data.n_w = manifest_index(manifest, "n_w");
  data.rank = manifest_index(manifest, "rank");
  data.smallest_sv = manifest_double(manifest, "smallest_sv");
  data.condition = manifest_double(manifest, "condition");
  data.f_n = read_matrix_csv(dir + "/f_n.csv");
  data.f_n_w = read_matrix_csv(dir + "/f_n_w.csv");
  const bool reduced = manifest.value("reduced", false);
  if (reduced) data.basis = read_matrix_csv(dir + "/basis.csv");

  const Eigen::Index expected_rows = reduced ? data.basis.cols() : data.window_size();
  if (data.f_n.rows() != expected_rows || data.f_n.cols() != data.columns() ||
      data.f_n_w.rows() != data.f_n.rows() + data.n_w * data.depth ||
      data.f_n_w.cols() != data.f_n.cols()) {
    throw IoError("load_lemma_data: " + dir + ": matrix shapes do not match the manifest");
  }
  return data;
}

}  // namespace geko
