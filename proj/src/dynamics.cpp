#include "geko/dynamics.hpp"

#include "geko/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace geko {

namespace {

void check_system(const System& sys) {
  if (sys.state_dim < 1 || sys.input_dim < 1 || sys.output_dim < 1) {
    throw ParamError("system '" + sys.name + "': dimensions must be positive");
  }
  if (sys.state_box.dim() != sys.state_dim || sys.input_box.dim() != sys.input_dim) {
    throw DimensionError("system '" + sys.name + "': box dimensions disagree with n, m");
  }
  if ((sys.state_box.width().array() <= 0.0).any() ||
      (sys.input_box.width().array() <= 0.0).any()) {
    throw ParamError("system '" + sys.name + "': domain boxes need lower < upper");
  }
  if (!sys.step || !sys.output) {
    throw ParamError("system '" + sys.name + "': state and output maps are required");
  }
}

OutputMap identity_output() {
  return [](const Vector& x) { return x; };
}

}  // namespace

Vector vdp_vector_field(const Vector& x, double u, double mu) {
  Vector dx(2);
  dx[0] = x[1];
  dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u;
  return dx;
}

Vector integrate_step(const VectorField& field, const Vector& x, const Vector& u,
                      double ts, int substeps) {
  if (substeps < 1) throw ParamError("integrate_step: substeps must be >= 1");
  const double h = ts / substeps;
  Vector state = x;
  for (int s = 0; s < substeps; ++s) {
    const Vector k1 = field(state, u);
    const Vector k2 = field(state + 0.5 * h * k1, u);
    const Vector k3 = field(state + 0.5 * h * k2, u);
    const Vector k4 = field(state + h * k3, u);
    state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!state.allFinite()) {
      throw DivergenceError("integrate_step: non-finite state at substep " +
                            std::to_string(s));
    }
  }
  return state;
}

System vdp_system(double mu, double ts, int substeps) {
  return vdp_system(mu, ts, substeps, Box::cube(2, -3.0, 3.0), Box::cube(1, -1.0, 1.0));
}

System vdp_system(double mu, double ts, int substeps, Box state_box, Box input_box) {
  System sys;
  sys.name = "vdp";
  sys.state_dim = 2;
  sys.input_dim = 1;
  sys.output_dim = 2;
  sys.sampling_time = ts;
  sys.state_box = std::move(state_box);
  sys.input_box = std::move(input_box);
  VectorField field = [mu](const Vector& x, const Vector& u) {
    return vdp_vector_field(x, u[0], mu);
  };
  sys.step = [field, ts, substeps](const Vector& x, const Vector& u) {
    return integrate_step(field, x, u, ts, substeps);
  };
  sys.output = identity_output();
  check_system(sys);
  return sys;
}

System lti_system(const Matrix& a, const Matrix& b, Box state_box, Box input_box) {
  return lti_system(a, b, Matrix::Identity(a.rows(), a.rows()), std::move(state_box),
                    std::move(input_box));
}

System lti_system(const Matrix& a, const Matrix& b, const Matrix& c, Box state_box,
                  Box input_box) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.rows()) {
    throw DimensionError("lti_system: A must be square with B, C conformable");
  }
  System sys;
  sys.name = "lti";
  sys.state_dim = a.rows();
  sys.input_dim = b.cols();
  sys.output_dim = c.rows();
  sys.sampling_time = 1.0;
  sys.state_box = std::move(state_box);
  sys.input_box = std::move(input_box);
  sys.step = [a, b](const Vector& x, const Vector& u) -> Vector { return a * x + b * u; };
  sys.output = [c](const Vector& x) -> Vector { return c * x; };
  check_system(sys);
  return sys;
}

System bilinear_system(const Matrix& k, Eigen::Index state_dim, Eigen::Index input_dim,
                       Box state_box, Box input_box) {
  const Eigen::Index nz = 1 + state_dim;
  const Eigen::Index nv = 1 + input_dim;
  if (k.rows() != nz || k.cols() != nz * nv) {
    throw DimensionError("bilinear_system: K must be (1+n) x (1+n)(1+m)");
  }
  Vector e1 = Vector::Zero(nz * nv);
  e1[0] = 1.0;
  if ((k.row(0).transpose() - e1).lpNorm<Eigen::Infinity>() != 0.0) {
    throw ParamError("bilinear_system: row 0 of K must equal e_1^T so the lifted "
                     "constant stays 1");
  }
  System sys;
  sys.name = "bilinear";
  sys.state_dim = state_dim;
  sys.input_dim = input_dim;
  sys.output_dim = state_dim;
  sys.sampling_time = 1.0;
  sys.state_box = std::move(state_box);
  sys.input_box = std::move(input_box);
  sys.step = [k, state_dim, input_dim](const Vector& x, const Vector& u) -> Vector {
    Vector z(1 + state_dim);
    z[0] = 1.0;
    z.tail(state_dim) = x;
    Vector v(1 + input_dim);
    v[0] = 1.0;
    v.tail(input_dim) = u;
    Vector zv(z.size() * v.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      zv.segment(i * v.size(), v.size()) = z[i] * v;
    }
    const Vector znext = k * zv;
    return znext.tail(state_dim);
  };
  sys.output = identity_output();
  check_system(sys);
  return sys;
}

System continuous_system(std::string name, Eigen::Index state_dim, Eigen::Index input_dim,
                         VectorField field, OutputMap h, Eigen::Index output_dim,
                         Box state_box, Box input_box, double ts, int substeps) {
  System sys;
  sys.name = std::move(name);
  sys.state_dim = state_dim;
  sys.input_dim = input_dim;
  sys.output_dim = output_dim;
  sys.sampling_time = ts;
  sys.state_box = std::move(state_box);
  sys.input_box = std::move(input_box);
  sys.step = [field = std::move(field), ts, substeps](const Vector& x, const Vector& u) {
    return integrate_step(field, x, u, ts, substeps);
  };
  sys.output = h ? std::move(h) : identity_output();
  check_system(sys);
  return sys;
}

Trajectory rollout(const System& sys, const Vector& x0, const Matrix& inputs) {
  if (x0.size() != sys.state_dim) {
    throw DimensionError("rollout: x0 has dimension " + std::to_string(x0.size()) +
                         ", system expects " + std::to_string(sys.state_dim));
  }
  if (inputs.cols() > 0 && inputs.rows() != sys.input_dim) {
    throw DimensionError("rollout: input rows " + std::to_string(inputs.rows()) +
                         " != system input dimension " + std::to_string(sys.input_dim));
  }
  if (!sys.state_box.contains(x0)) {
    log_warning("rollout: initial state lies outside the system's state box");
  }
  const Eigen::Index steps = inputs.cols();
  Trajectory traj;
  traj.sampling_time = sys.sampling_time;
  traj.states.resize(sys.state_dim, steps + 1);
  traj.inputs = inputs;
  traj.outputs.resize(sys.output_dim, steps + 1);
  traj.states.col(0) = x0;
  traj.outputs.col(0) = sys.output(x0);
  for (Eigen::Index t = 0; t < steps; ++t) {
    Vector next;
    try {
      next = sys.step(traj.states.col(t), inputs.col(t));
    } catch (const DivergenceError& e) {
      throw DivergenceError("rollout: diverged at time index " + std::to_string(t) +
                            " (" + e.what() + ")");
    }
    if (!next.allFinite()) {
      throw DivergenceError("rollout: diverged at time index " + std::to_string(t));
    }
    traj.states.col(t + 1) = next;
    traj.outputs.col(t + 1) = sys.output(next);
  }
  return traj;
}

SnapshotBatch sample_snapshots(const System& sys, Eigen::Index count, Sampler sampler,
                               std::uint64_t seed) {
  if (count < 1) throw ParamError("sample_snapshots: count must be >= 1");
  SnapshotBatch batch;
  batch.x.resize(sys.state_dim, count);
  batch.u.resize(sys.input_dim, count);
  batch.x_next.resize(sys.state_dim, count);
  batch.y.resize(sys.output_dim, count);
  Rng rng(seed);

  const auto apply = [&](Eigen::Index t) {
    Vector next;
    try {
      next = sys.step(batch.x.col(t), batch.u.col(t));
    } catch (const DivergenceError& e) {
      throw DivergenceError("sample_snapshots: state map diverged at sample " +
                            std::to_string(t) + " (" + e.what() + ")");
    }
    if (!next.allFinite()) {
      throw DivergenceError("sample_snapshots: state map diverged at sample " +
                            std::to_string(t));
    }
    batch.x_next.col(t) = next;
    batch.y.col(t) = sys.output(batch.x.col(t));
  };

  switch (sampler) {
    case Sampler::kUniformBox:
      for (Eigen::Index t = 0; t < count; ++t) {
        batch.x.col(t) = rng.uniform_in(sys.state_box);
        batch.u.col(t) = rng.uniform_in(sys.input_box);
        apply(t);
      }
      break;
    case Sampler::kGaussian: {
      const Vector xc = sys.state_box.center();
      const Vector xs = 0.25 * sys.state_box.width();
      const Vector uc = sys.input_box.center();
      const Vector us = 0.25 * sys.input_box.width();
      for (Eigen::Index t = 0; t < count; ++t) {
        batch.x.col(t) = rng.gaussian_vec(xc, xs);
        batch.u.col(t) = rng.gaussian_vec(uc, us);
        apply(t);
      }
      break;
    }
    case Sampler::kCenter:
      for (Eigen::Index t = 0; t < count; ++t) {
        batch.x.col(t) = sys.state_box.center();
        batch.u.col(t) = sys.input_box.center();
        apply(t);
      }
      break;
    case Sampler::kRollout: {
      const Vector x0 = rng.uniform_in(sys.state_box);
      Matrix inputs(sys.input_dim, count);
      for (Eigen::Index t = 0; t < count; ++t) inputs.col(t) = rng.uniform_in(sys.input_box);
      Trajectory traj;
      try {
        traj = rollout(sys, x0, inputs);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("sample_snapshots: ") + e.what());
      }
      batch.x = traj.states.leftCols(count);
      batch.u = inputs;
      batch.x_next = traj.states.rightCols(count);
      batch.y = traj.outputs.leftCols(count);
      break;
    }
  }
  return batch;
}

Matrix sinusoid_input(double amplitude, double frequency, Eigen::Index length) {
  if (length < 1) throw ParamError("sinusoid_input: length must be >= 1");
  Matrix u(1, length);
  for (Eigen::Index t = 0; t < length; ++t) {
    u(0, t) = amplitude * std::sin(frequency * static_cast<double>(t));
  }
  return u;
}

namespace {

void check_trajectory(const Trajectory& traj, const std::string& name) {
  if (traj.states.cols() != traj.inputs.cols() + 1 ||
      traj.states.cols() != traj.outputs.cols()) {
    throw DimensionError(name + ": inconsistent trajectory lengths (states " +
                         std::to_string(traj.states.cols()) + ", inputs " +
                         std::to_string(traj.inputs.cols()) + ", outputs " +
                         std::to_string(traj.outputs.cols()) + ")");
  }
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::vector<std::string>& comments) {
  check_trajectory(traj, "write_trajectory_csv");
  for (const auto& c : comments) os << "# " << c << "\n";
  os << "# sampling_time=" << format_double(traj.sampling_time) << "\n";
  const Eigen::Index n = traj.states.rows();
  const Eigen::Index m = traj.inputs.rows();
  const Eigen::Index p = traj.outputs.rows();
  os << 't';
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << (i + 1);
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << (i + 1);
  for (Eigen::Index i = 0; i < p; ++i) os << ",y" << (i + 1);
  os << '\n';
  for (Eigen::Index t = 0; t < traj.states.cols(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(traj.states(i, t));
    for (Eigen::Index i = 0; i < m; ++i) {
      os << ',';
      if (t < traj.inputs.cols()) os << format_double(traj.inputs(i, t));
    }
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(traj.outputs(i, t));
    os << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<std::string>& comments) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory_csv(f, traj, comments);
  if (!f.good()) throw IoError("write failed for '" + path + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

// Counts consecutive headers of the given prefix starting at `pos`.
Eigen::Index count_prefixed(const std::vector<std::string>& header, std::size_t pos,
                            char prefix) {
  Eigen::Index n = 0;
  while (pos < header.size() && header[pos].size() >= 2 && header[pos][0] == prefix) {
    ++n;
    ++pos;
  }
  return n;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& is, const std::string& name) {
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  Eigen::Index n = 0, m = 0, p = 0;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') {
      const std::string key = "sampling_time=";
      const auto pos = line.find(key);
      if (pos != std::string::npos) {
        traj.sampling_time = parse_double(std::string_view(line).substr(pos + key.size()));
      }
      continue;
    }
    auto fields = split_line(line);
    if (!have_header) {
      if (fields.empty() || fields[0] != "t") {
        throw IoError(name + ":" + std::to_string(lineno) +
                      ": expected header starting with 't'");
      }
      n = count_prefixed(fields, 1, 'x');
      m = count_prefixed(fields, 1 + static_cast<std::size_t>(n), 'u');
      p = count_prefixed(fields, 1 + static_cast<std::size_t>(n + m), 'y');
      if (n < 1 || fields.size() != static_cast<std::size_t>(1 + n + m + p)) {
        throw IoError(name + ":" + std::to_string(lineno) + ": malformed header '" +
                      line + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != static_cast<std::size_t>(1 + n + m + p)) {
      throw IoError(name + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(1 + n + m + p) + " fields, got " +
                    std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (!have_header || rows.empty()) throw IoError(name + ": no trajectory rows");

  const auto steps = static_cast<Eigen::Index>(rows.size()) - 1;
  traj.states.resize(n, steps + 1);
  traj.inputs.resize(m, steps);
  traj.outputs.resize(p, steps + 1);
  for (Eigen::Index t = 0; t <= steps; ++t) {
    const auto& row = rows[static_cast<std::size_t>(t)];
    const auto at = [&](std::size_t j) {
      bool ok = false;
      const double v = parse_double(row[j], &ok);
      if (!ok) {
        throw IoError(name + ": invalid number '" + row[j] + "' in row t=" +
                      std::to_string(t));
      }
      return v;
    };
    for (Eigen::Index i = 0; i < n; ++i) traj.states(i, t) = at(1 + i);
    if (t < steps) {
      for (Eigen::Index i = 0; i < m; ++i) traj.inputs(i, t) = at(1 + n + i);
    }
    for (Eigen::Index i = 0; i < p; ++i) traj.outputs(i, t) = at(1 + n + m + i);
  }
  return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return read_trajectory_csv(f, path);
}

}  // namespace geko
