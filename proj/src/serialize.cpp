#include "geko/serialize.hpp"

#include "geko/csv.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <utility>

namespace geko {

namespace {

using nlohmann::json;

const char* kind_name(ObservableKind kind) {
  switch (kind) {
    case ObservableKind::kIdentity: return "identity";
    case ObservableKind::kAffine: return "affine";
    case ObservableKind::kConstantOne: return "constant-one";
    case ObservableKind::kImq: return "imq";
    case ObservableKind::kStackedImq: return "stacked-imq";
    case ObservableKind::kDelay: return "delay";
    case ObservableKind::kLegendre: return "legendre";
  }
  return "identity";
}

ObservableKind kind_from_name(const std::string& name) {
  if (name == "identity") return ObservableKind::kIdentity;
  if (name == "affine") return ObservableKind::kAffine;
  if (name == "constant-one") return ObservableKind::kConstantOne;
  if (name == "imq") return ObservableKind::kImq;
  if (name == "stacked-imq") return ObservableKind::kStackedImq;
  if (name == "delay") return ObservableKind::kDelay;
  if (name == "legendre") return ObservableKind::kLegendre;
  throw IoError("observable document names unknown kind '" + name + "'");
}

std::string matrix_block(const Matrix& m) {
  return m.size() > 0 ? matrix_to_csv(m) : std::string();
}

Matrix matrix_from_block(const std::string& block, const std::string& name) {
  if (block.empty()) return Matrix();
  try {
    return matrix_from_csv(block, name);
  } catch (const Error& e) {
    throw IoError("model document: bad CSV block '" + name + "': " + e.what());
  }
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr, const char* where) {
  if (!arr.is_array()) throw IoError(std::string("model document: '") + where + "' must be an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const json& entry = arr[static_cast<std::size_t>(i)];
    if (!entry.is_number()) {
      throw IoError(std::string("model document: '") + where + "' holds a non-numeric entry");
    }
    v[i] = entry.get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw IoError(std::string("model document: ") + where + " is missing field '" + key + "'");
  }
  return *it;
}

Eigen::Index index_field(const json& j, const char* key, const char* where) {
  const json& f = field(j, key, where);
  if (!f.is_number_integer()) {
    throw IoError(std::string("model document: ") + where + " field '" + key +
                  "' must be an integer");
  }
  return static_cast<Eigen::Index>(f.get<long long>());
}

double double_field(const json& j, const char* key, const char* where) {
  const json& f = field(j, key, where);
  if (!f.is_number()) {
    throw IoError(std::string("model document: ") + where + " field '" + key +
                  "' must be a number");
  }
  return f.get<double>();
}

json map_to_json(const ObservableMap& map) {
  json j;
  j["kind"] = kind_name(map.kind);
  j["input_dim"] = map.input_dim;
  j["output_dim"] = map.output_dim;
  j["sigma"] = map.sigma;
  j["beta"] = map.beta;
  j["box_lo"] = vector_to_json(map.box.lo);
  j["box_hi"] = vector_to_json(map.box.hi);
  j["order"] = map.order;
  j["max_degree"] = map.max_degree;
  j["center_seed"] = map.center_seed;
  j["centers"] = matrix_block(map.centers);
  return j;
}

ObservableMap map_from_json(const json& j, const char* where) {
  const json& kind = field(j, "kind", where);
  if (!kind.is_string()) {
    throw IoError(std::string("model document: ") + where + " field 'kind' must be a string");
  }
  ObservableMap map;
  map.kind = kind_from_name(kind.get<std::string>());
  map.input_dim = index_field(j, "input_dim", where);
  map.output_dim = index_field(j, "output_dim", where);
  map.sigma = double_field(j, "sigma", where);
  map.beta = double_field(j, "beta", where);
  map.box.lo = vector_from_json(field(j, "box_lo", where), "box_lo");
  map.box.hi = vector_from_json(field(j, "box_hi", where), "box_hi");
  map.order = index_field(j, "order", where);
  map.max_degree = index_field(j, "max_degree", where);
  const json& seed = field(j, "center_seed", where);
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw IoError(std::string("model document: ") + where + " field 'center_seed' must be an integer");
  }
  map.center_seed = seed.get<std::uint64_t>();
  const json& centers = field(j, "centers", where);
  if (!centers.is_string()) {
    throw IoError(std::string("model document: ") + where + " field 'centers' must be a CSV block");
  }
  map.centers = matrix_from_block(centers.get<std::string>(), "centers");
  return map;
}

json diagnostics_to_json(const FitDiagnostics& diag) {
  json j;
  j["method"] = diag.method;
  j["residual"] = diag.residual;
  j["rank"] = diag.rank;
  j["smallest_sv"] = diag.smallest_sv;
  j["gamma"] = diag.gamma;
  j["columns"] = diag.columns;
  return j;
}

FitDiagnostics diagnostics_from_json(const json& j) {
  FitDiagnostics diag;
  const json& method = field(j, "method", "diagnostics");
  if (!method.is_string()) {
    throw IoError("model document: diagnostics field 'method' must be a string");
  }
  diag.method = method.get<std::string>();
  diag.residual = double_field(j, "residual", "diagnostics");
  diag.rank = index_field(j, "rank", "diagnostics");
  diag.smallest_sv = double_field(j, "smallest_sv", "diagnostics");
  diag.gamma = double_field(j, "gamma", "diagnostics");
  diag.columns = index_field(j, "columns", "diagnostics");
  return diag;
}

json parse_document(const std::string& text, const char* expected_format) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("model document: not valid JSON: ") + e.what());
  }
  const json& format = field(j, "format", "document");
  if (!format.is_string() || format.get<std::string>() != expected_format) {
    throw IoError(std::string("model document: expected format '") + expected_format + "'");
  }
  return j;
}

}  // namespace

std::string observable_to_string(const ObservableMap& map) {
  json j = map_to_json(map);
  j["format"] = "geko-observable";
  j["version"] = 1;
  return j.dump(2) + "\n";
}

ObservableMap observable_from_string(const std::string& text) {
  const json j = parse_document(text, "geko-observable");
  return map_from_json(j, "observable");
}

std::string model_to_string(const KoopmanModel& model) {
  json j;
  j["format"] = "geko-model";
  j["version"] = 1;
  json matrices;
  if (model.has_k()) matrices["k"] = matrix_block(model.k);
  if (model.has_k_x()) matrices["k_x"] = matrix_block(model.k_x);
  if (model.has_c()) matrices["c"] = matrix_block(model.c);
  if (model.has_d()) matrices["d"] = matrix_block(model.d);
  j["matrices"] = std::move(matrices);
  j["psi_x"] = map_to_json(model.psi_x);
  j["psi_u"] = map_to_json(model.psi_u);
  if (model.psi_y.has_value()) j["psi_y"] = map_to_json(*model.psi_y);
  j["diagnostics"] = diagnostics_to_json(model.diagnostics);
  return j.dump(2) + "\n";
}

KoopmanModel model_from_string(const std::string& text) {
  const json j = parse_document(text, "geko-model");
  KoopmanModel model;
  const json& matrices = field(j, "matrices", "document");
  if (!matrices.is_object()) throw IoError("model document: 'matrices' must be an object");
  const auto read_block = [&](const char* key) -> Matrix {
    const auto it = matrices.find(key);
    if (it == matrices.end()) return Matrix();
    if (!it->is_string()) {
      throw IoError(std::string("model document: matrix '") + key + "' must be a CSV block");
    }
    return matrix_from_block(it->get<std::string>(), key);
  };
  model.k = read_block("k");
  model.k_x = read_block("k_x");
  model.c = read_block("c");
  model.d = read_block("d");
  model.psi_x = map_from_json(field(j, "psi_x", "document"), "psi_x");
  model.psi_u = map_from_json(field(j, "psi_u", "document"), "psi_u");
  if (j.contains("psi_y")) model.psi_y = map_from_json(j["psi_y"], "psi_y");
  model.diagnostics = diagnostics_from_json(field(j, "diagnostics", "document"));
  return model;
}

void save_model(const KoopmanModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_model: cannot write " + path);
  os << model_to_string(model);
  if (!os) throw IoError("save_model: write to " + path + " failed");
}

KoopmanModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_model: cannot open " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return model_from_string(buffer.str());
}

}  // namespace geko
