#include "geko/koopman.hpp"

#include "geko/linalg.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace geko {

namespace {

FitDiagnostics make_diag(std::string method, const SolveResult& sol, Eigen::Index columns) {
  FitDiagnostics diag;
  diag.method = std::move(method);
  diag.residual = sol.residual;
  diag.rank = sol.rank;
  diag.smallest_sv = sol.smallest_sv;
  diag.gamma = sol.gamma;
  diag.columns = columns;
  return diag;
}

void check_lifted(const char* who, const LiftedData& data, const ObservableMap& psi_x,
                  const ObservableMap& psi_u) {
  if (data.count() < 1) {
    throw ParamError(std::string(who) + ": need at least one data column");
  }
  if (data.z_x.rows() != psi_x.output_dim) {
    throw DimensionError(std::string(who) + ": Z_X has " + std::to_string(data.z_x.rows()) +
                         " rows but psi_x produces " + std::to_string(psi_x.output_dim));
  }
  if (data.v_u.rows() != psi_u.output_dim) {
    throw DimensionError(std::string(who) + ": V_U has " + std::to_string(data.v_u.rows()) +
                         " rows but psi_u produces " + std::to_string(psi_u.output_dim));
  }
  if (data.v_u.cols() != data.count() || data.z_x_plus.cols() != data.count() ||
      data.z_x_plus.rows() != data.z_x.rows()) {
    throw DimensionError(std::string(who) + ": Z_X, V_U and Z_X_plus columns are not aligned");
  }
}

void warn_if_underdetermined(const char* who, Eigen::Index columns, Eigen::Index lifted) {
  if (columns < lifted) {
    log_warning(std::string(who) + ": only " + std::to_string(columns) +
                " data columns for lifted dimension " + std::to_string(lifted) +
                "; the regression is underdetermined");
  }
}

// Declared domain for a KIC model: the axis-aligned hull of its centers.
Box center_hull(const Matrix& centers) {
  Box box;
  box.lo = centers.rowwise().minCoeff();
  box.hi = centers.rowwise().maxCoeff();
  return box;
}

KoopmanModel fit_kic_from(const Matrix& features, const Matrix& targets, const Matrix& centers,
                          double sigma, double gamma, Eigen::Index input_dim, KicTarget target) {
  warn_if_underdetermined("fit_kic", features.cols(), features.rows());
  SolveResult sol;
  try {
    sol = solve_operator(targets, features, gamma);
  } catch (const RankError& e) {
    throw RankError("fit_kic: the stacked feature matrix must have full row rank at gamma = 0; " +
                    std::string(e.what()));
  }
  KoopmanModel model;
  model.psi_x = stacked_imq_map(centers, sigma, center_hull(centers));
  model.psi_u = constant_one_map(input_dim);
  if (target == KicTarget::kLifted) {
    model.k = std::move(sol.solution);
    model.diagnostics = make_diag("kic-lifted", sol, features.cols());
  } else {
    model.k_x = std::move(sol.solution);
    model.diagnostics = make_diag("kic-raw", sol, features.cols());
  }
  return model;
}

}  // namespace

KoopmanModel fit_geko(const LiftedData& data, const ObservableMap& psi_x,
                      const ObservableMap& psi_u, double gamma) {
  check_lifted("fit_geko", data, psi_x, psi_u);
  const Eigen::Index lifted = psi_x.output_dim * psi_u.output_dim;
  warn_if_underdetermined("fit_geko", data.count(), lifted);
  const Matrix g = khatri_rao(data.z_x, data.v_u);
  SolveResult sol;
  try {
    sol = solve_operator(data.z_x_plus, g, gamma);
  } catch (const RankError& e) {
    throw RankError("fit_geko: the Khatri-Rao regressor (columns Psi_x(x_t) kron Psi_u(u_t)) "
                    "must have full row rank at gamma = 0; " + std::string(e.what()));
  }
  KoopmanModel model;
  model.k = std::move(sol.solution);
  model.psi_x = psi_x;
  model.psi_u = psi_u;
  model.diagnostics = make_diag("geko", sol, data.count());
  return model;
}

KoopmanModel fit_direct(const LiftedData& data, const ObservableMap& psi_x,
                        const ObservableMap& psi_u, double gamma) {
  check_lifted("fit_direct", data, psi_x, psi_u);
  if (data.x_plus.cols() != data.count()) {
    throw ParamError("fit_direct: data carries no raw next-state columns");
  }
  const Eigen::Index lifted = psi_x.output_dim * psi_u.output_dim;
  warn_if_underdetermined("fit_direct", data.count(), lifted);
  const Matrix g = khatri_rao(data.z_x, data.v_u);
  SolveResult sol;
  try {
    sol = solve_operator(data.x_plus, g, gamma);
  } catch (const RankError& e) {
    throw RankError("fit_direct: the Khatri-Rao regressor (columns Psi_x(x_t) kron Psi_u(u_t)) "
                    "must have full row rank at gamma = 0; " + std::string(e.what()));
  }
  KoopmanModel model;
  model.k_x = std::move(sol.solution);
  model.psi_x = psi_x;
  model.psi_u = psi_u;
  model.diagnostics = make_diag("direct", sol, data.count());
  return model;
}

KoopmanModel fit_kic(const Trajectory& traj, const Matrix& centers, double sigma, double gamma,
                     KicTarget target) {
  const Eigen::Index steps = traj.length();
  const Eigen::Index n = traj.states.rows();
  const Eigen::Index m = traj.inputs.rows();
  if (steps < 1) throw ParamError("fit_kic: trajectory has no steps");
  if (centers.cols() < 1) throw ParamError("fit_kic: need at least one center");
  if (centers.rows() != n + m) {
    throw DimensionError("fit_kic: centers live in the stacked (state, input) space; expected " +
                         std::to_string(n + m) + " rows, got " + std::to_string(centers.rows()));
  }
  Matrix features(centers.cols(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    features.col(t) = kic_features(traj.states.col(t), traj.inputs.col(t), centers, sigma);
  }
  if (target == KicTarget::kLifted) {
    // The lifted target at t is the stacked feature of (x_{t+1}, u_{t+1}),
    // which needs the recorded next input, so the last step is dropped.
    if (steps < 2) {
      throw ParamError("fit_kic: the lifted target needs at least two steps "
                       "(it consumes the recorded next input)");
    }
    return fit_kic_from(features.leftCols(steps - 1), features.rightCols(steps - 1), centers,
                        sigma, gamma, m, target);
  }
  return fit_kic_from(features, traj.states.rightCols(steps), centers, sigma, gamma, m, target);
}

KoopmanModel fit_kic(const SnapshotBatch& batch, const Matrix& centers, double sigma, double gamma,
                     KicTarget target) {
  const Eigen::Index count = batch.count();
  const Eigen::Index n = batch.x.rows();
  const Eigen::Index m = batch.u.rows();
  if (count < 1) throw ParamError("fit_kic: batch has no snapshots");
  if (centers.cols() < 1) throw ParamError("fit_kic: need at least one center");
  if (centers.rows() != n + m) {
    throw DimensionError("fit_kic: centers live in the stacked (state, input) space; expected " +
                         std::to_string(n + m) + " rows, got " + std::to_string(centers.rows()));
  }
  Matrix features(centers.cols(), count);
  Matrix lifted_next(centers.cols(), count);
  for (Eigen::Index t = 0; t < count; ++t) {
    features.col(t) = kic_features(batch.x.col(t), batch.u.col(t), centers, sigma);
    if (target == KicTarget::kLifted) {
      // Snapshot pairs carry no next input; hold the current one.
      lifted_next.col(t) = kic_features(batch.x_next.col(t), batch.u.col(t), centers, sigma);
    }
  }
  if (target == KicTarget::kLifted) {
    return fit_kic_from(features, lifted_next, centers, sigma, gamma, m, target);
  }
  return fit_kic_from(features, batch.x_next, centers, sigma, gamma, m, target);
}

Matrix fit_output(const LiftedData& data, double gamma, FitDiagnostics* diag) {
  if (!data.has_w()) {
    throw ParamError("fit_output: data carries no output rows W (lift with an output map first)");
  }
  if (data.w.cols() != data.count()) {
    throw DimensionError("fit_output: W and Z_X columns are not aligned");
  }
  SolveResult sol;
  try {
    sol = solve_operator(data.w, data.z_x, gamma);
  } catch (const RankError& e) {
    throw RankError("fit_output: Z_X must have full row rank at gamma = 0; " +
                    std::string(e.what()));
  }
  if (diag) *diag = make_diag("output", sol, data.count());
  return std::move(sol.solution);
}

Matrix fit_decoder(const LiftedData& data, double gamma, FitDiagnostics* diag) {
  if (data.x_raw.cols() != data.count() || data.x_raw.rows() == 0) {
    throw ParamError("fit_decoder: data carries no raw state columns");
  }
  SolveResult sol;
  try {
    sol = solve_operator(data.x_raw, data.z_x, gamma);
  } catch (const RankError& e) {
    throw RankError("fit_decoder: Z_X must have full row rank at gamma = 0; " +
                    std::string(e.what()));
  }
  if (diag) *diag = make_diag("decoder", sol, data.count());
  return std::move(sol.solution);
}

LiftedTrajectory propagate(const KoopmanModel& model, const Vector& z0, const Matrix& v_seq) {
  if (!model.has_k()) {
    throw ParamError("propagate: model has no lifted operator K "
                     "(direct-to-state fits cannot be rolled out in the lifted space)");
  }
  if (z0.size() != model.k.rows()) {
    throw DimensionError("propagate: z0 has size " + std::to_string(z0.size()) + " but K has " +
                         std::to_string(model.k.rows()) + " rows");
  }
  if (model.k.cols() != z0.size() * v_seq.rows()) {
    throw DimensionError("propagate: K expects kron(z, v) of size " +
                         std::to_string(model.k.cols()) + ", got " + std::to_string(z0.size()) +
                         " x " + std::to_string(v_seq.rows()));
  }
  const Eigen::Index steps = v_seq.cols();
  LiftedTrajectory out;
  out.z.resize(z0.size(), steps + 1);
  out.z.col(0) = z0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    out.z.col(t + 1) = model.k * kron_vec(out.z.col(t), v_seq.col(t));
    if (!out.z.col(t + 1).allFinite()) {
      throw DivergenceError("propagate: lifted state is non-finite at step " +
                            std::to_string(t + 1));
    }
  }
  if (model.has_c()) {
    if (model.c.cols() != z0.size()) {
      throw DimensionError("propagate: C has " + std::to_string(model.c.cols()) +
                           " columns but z has size " + std::to_string(z0.size()));
    }
    out.w = model.c * out.z;
  }
  return out;
}

Matrix lifted_error_surface(const KoopmanModel& model, const Trajectory& traj) {
  if (!model.has_k()) throw ParamError("lifted_error_surface: model has no lifted operator K");
  const ObservableMap& psi_x = model.psi_x;
  const ObservableMap& psi_u = model.psi_u;
  if (!psi_x.pointwise() || !psi_u.pointwise()) {
    throw ParamError("lifted_error_surface: delay observables are not supported here");
  }
  const Eigen::Index steps = traj.length();
  const Eigen::Index n = traj.states.rows();
  const Eigen::Index m = traj.inputs.rows();
  if (steps < 1) throw ParamError("lifted_error_surface: trajectory has no steps");

  if (psi_x.kind == ObservableKind::kStackedImq) {
    // The stacked lifting consumes (x_t, u_t), so the truth is only defined
    // while an input is recorded: t = 0 .. steps-1.
    if (psi_x.input_dim != n + m) {
      throw DimensionError("lifted_error_surface: stacked lifting expects dimension " +
                           std::to_string(psi_x.input_dim) + ", trajectory provides " +
                           std::to_string(n + m));
    }
    Matrix truth(psi_x.output_dim, steps);
    Vector point(n + m);
    for (Eigen::Index t = 0; t < steps; ++t) {
      point.head(n) = traj.states.col(t);
      point.tail(m) = traj.inputs.col(t);
      truth.col(t) = psi_x.eval(point);
    }
    Matrix v(psi_u.output_dim, steps - 1);
    for (Eigen::Index t = 0; t + 1 < steps; ++t) v.col(t) = psi_u.eval(traj.inputs.col(t));
    const LiftedTrajectory roll = propagate(model, truth.col(0), v);
    return (roll.z - truth).cwiseAbs();
  }

  if (psi_x.input_dim != n) {
    throw DimensionError("lifted_error_surface: Psi_x expects dimension " +
                         std::to_string(psi_x.input_dim) + ", trajectory states have " +
                         std::to_string(n));
  }
  if (psi_u.input_dim != m) {
    throw DimensionError("lifted_error_surface: Psi_u expects dimension " +
                         std::to_string(psi_u.input_dim) + ", trajectory inputs have " +
                         std::to_string(m));
  }
  Matrix truth(psi_x.output_dim, steps + 1);
  for (Eigen::Index t = 0; t <= steps; ++t) truth.col(t) = psi_x.eval(traj.states.col(t));
  Matrix v(psi_u.output_dim, steps);
  for (Eigen::Index t = 0; t < steps; ++t) v.col(t) = psi_u.eval(traj.inputs.col(t));
  const LiftedTrajectory roll = propagate(model, truth.col(0), v);
  return (roll.z - truth).cwiseAbs();
}

namespace {

// Gauss-Legendre rule on [-1, 1]: nodes are the roots of P_n found by Newton
// iteration on the three-term recurrence, weights 2 / ((1 - x^2) P_n'(x)^2).
void legendre_rule(Eigen::Index n, Vector& nodes, Vector& weights) {
  nodes.resize(n);
  weights.resize(n);
  const auto eval = [n](double x) {
    double prev = 1.0;   // P_0
    double value = x;    // P_1
    for (Eigen::Index k = 2; k <= n; ++k) {
      const double next =
          ((2.0 * static_cast<double>(k) - 1.0) * x * value -
           (static_cast<double>(k) - 1.0) * prev) / static_cast<double>(k);
      prev = value;
      value = next;
    }
    const double derivative =
        static_cast<double>(n) * (x * value - prev) / (x * x - 1.0);
    return std::pair<double, double>{value, derivative};
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    for (int iteration = 0; iteration < 100; ++iteration) {
      const auto [value, derivative] = eval(x);
      const double dx = value / derivative;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const auto [value, derivative] = eval(x);
    static_cast<void>(value);
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * derivative * derivative);
  }
}

constexpr Eigen::Index kMaxGridNodes = Eigen::Index{1} << 26;

}  // namespace

QuadratureGrid tensor_gauss_legendre(const Box& box, Eigen::Index nodes_per_axis) {
  if (nodes_per_axis < 1) {
    throw ParamError("tensor_gauss_legendre: nodes_per_axis must be at least 1");
  }
  const Eigen::Index dim = box.dim();
  if (dim < 1) throw ParamError("tensor_gauss_legendre: box must have at least one axis");
  for (Eigen::Index a = 0; a < dim; ++a) {
    if (!(box.hi[a] > box.lo[a])) {
      throw ParamError("tensor_gauss_legendre: box must have positive width on every axis");
    }
  }
  Eigen::Index total = 1;
  for (Eigen::Index a = 0; a < dim; ++a) {
    if (total > kMaxGridNodes / nodes_per_axis) {
      throw ParamError("tensor_gauss_legendre: tensor grid would exceed " +
                       std::to_string(kMaxGridNodes) + " nodes");
    }
    total *= nodes_per_axis;
  }
  Vector ref_nodes;
  Vector ref_weights;
  legendre_rule(nodes_per_axis, ref_nodes, ref_weights);

  QuadratureGrid grid;
  grid.box = box;
  grid.nodes_per_axis = nodes_per_axis;
  grid.nodes.resize(dim, total);
  grid.weights.resize(total);
  for (Eigen::Index f = 0; f < total; ++f) {
    Eigen::Index rem = f;
    double w = 1.0;
    for (Eigen::Index a = dim - 1; a >= 0; --a) {  // last axis varies fastest
      const Eigen::Index idx = rem % nodes_per_axis;
      rem /= nodes_per_axis;
      const double half = 0.5 * (box.hi[a] - box.lo[a]);
      grid.nodes(a, f) = box.center()[a] + half * ref_nodes[idx];
      w *= half * ref_weights[idx];
    }
    grid.weights[f] = w;
  }
  return grid;
}

namespace {

Matrix weighted_gram(const Matrix& left, const Matrix& right, const Vector& weights) {
  return left * weights.asDiagonal() * right.transpose();
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_pointwise(const char* who, const ObservableMap& psi, const char* name) {
  if (!psi.pointwise()) {
    throw ParamError(std::string(who) + ": " + name + " must be a pointwise observable map");
  }
}

// Evaluations needed by the analytic construction: the product basis
// psi_i,x * psi_j,u at each node and the state basis composed with the
// one-step map.
struct ProductEval {
  Matrix phi;   // (n_z * n_v) x Q
  Matrix push;  // n_z x Q
};

ProductEval eval_product_basis(const char* who, const StateMap& f, const ObservableMap& psi_x,
                               const ObservableMap& psi_u, const QuadratureGrid& grid) {
  check_pointwise(who, psi_x, "psi_x");
  check_pointwise(who, psi_u, "psi_u");
  const Eigen::Index nx = psi_x.input_dim;
  const Eigen::Index mu = psi_u.input_dim;
  if (nx + mu > 3) {
    throw ParamError(std::string(who) +
                     ": the tensor quadrature construction supports state + input dimension <= 3");
  }
  if (grid.nodes.rows() != nx + mu) {
    throw DimensionError(std::string(who) + ": grid spans " + std::to_string(grid.nodes.rows()) +
                         " axes but the product domain has " + std::to_string(nx + mu));
  }
  if (!f) throw ParamError(std::string(who) + ": empty system map");
  ProductEval out;
  out.phi.resize(psi_x.output_dim * psi_u.output_dim, grid.count());
  out.push.resize(psi_x.output_dim, grid.count());
  for (Eigen::Index q = 0; q < grid.count(); ++q) {
    const Vector x = grid.nodes.col(q).head(nx);
    const Vector u = grid.nodes.col(q).tail(mu);
    const Vector fx = f(x, u);
    if (fx.size() != nx) {
      throw DimensionError(std::string(who) + ": the system map returned dimension " +
                           std::to_string(fx.size()) + " (expected " + std::to_string(nx) + ")");
    }
    out.push.col(q) = psi_x.eval(fx);
    out.phi.col(q) = kron_vec(psi_x.eval(x), psi_u.eval(u));
  }
  return out;
}

}  // namespace

Matrix gram_matrix(const ObservableMap& psi, const QuadratureGrid& grid) {
  check_pointwise("gram_matrix", psi, "psi");
  if (psi.input_dim != grid.nodes.rows()) {
    throw DimensionError("gram_matrix: observable expects dimension " +
                         std::to_string(psi.input_dim) + " but the grid spans " +
                         std::to_string(grid.nodes.rows()) + " axes");
  }
  Matrix phi(psi.output_dim, grid.count());
  for (Eigen::Index q = 0; q < grid.count(); ++q) phi.col(q) = psi.eval(grid.nodes.col(q));
  return symmetrized(weighted_gram(phi, phi, grid.weights));
}

Matrix gram_matrix_product(const ObservableMap& psi_x, const ObservableMap& psi_u,
                           const QuadratureGrid& grid) {
  check_pointwise("gram_matrix_product", psi_x, "psi_x");
  check_pointwise("gram_matrix_product", psi_u, "psi_u");
  const Eigen::Index nx = psi_x.input_dim;
  const Eigen::Index mu = psi_u.input_dim;
  if (grid.nodes.rows() != nx + mu) {
    throw DimensionError("gram_matrix_product: grid spans " + std::to_string(grid.nodes.rows()) +
                         " axes but the product domain has " + std::to_string(nx + mu));
  }
  Matrix phi(psi_x.output_dim * psi_u.output_dim, grid.count());
  for (Eigen::Index q = 0; q < grid.count(); ++q) {
    phi.col(q) = kron_vec(psi_x.eval(grid.nodes.col(q).head(nx)),
                          psi_u.eval(grid.nodes.col(q).tail(mu)));
  }
  return symmetrized(weighted_gram(phi, phi, grid.weights));
}

Matrix analytic_koopman(const StateMap& f, const ObservableMap& psi_x, const ObservableMap& psi_u,
                        const QuadratureGrid& grid) {
  const ProductEval both = eval_product_basis("analytic_koopman", f, psi_x, psi_u, grid);
  const Matrix r = symmetrized(weighted_gram(both.phi, both.phi, grid.weights));
  if (numerical_rank(r) < r.rows()) {
    throw RankError("analytic_koopman: the Gram matrix R of the product basis is numerically "
                    "singular; the observables must form a Riesz basis (nonsingular R)");
  }
  const Matrix q_x = weighted_gram(both.push, both.phi, grid.weights);
  return r.ldlt().solve(q_x.transpose()).transpose();
}

Matrix analytic_koopman_orthonormal(const StateMap& f, const ObservableMap& psi_x,
                                    const ObservableMap& psi_u, const QuadratureGrid& grid) {
  const ProductEval both =
      eval_product_basis("analytic_koopman_orthonormal", f, psi_x, psi_u, grid);
  return weighted_gram(both.push, both.phi, grid.weights);
}

Matrix analytic_output(const OutputMap& h, const ObservableMap& psi_x, const ObservableMap& psi_y,
                       const QuadratureGrid& grid) {
  check_pointwise("analytic_output", psi_x, "psi_x");
  check_pointwise("analytic_output", psi_y, "psi_y");
  if (psi_x.input_dim > 3) {
    throw ParamError("analytic_output: the tensor quadrature construction supports state "
                     "dimension <= 3");
  }
  if (grid.nodes.rows() != psi_x.input_dim) {
    throw DimensionError("analytic_output: grid spans " + std::to_string(grid.nodes.rows()) +
                         " axes but psi_x expects " + std::to_string(psi_x.input_dim));
  }
  if (!h) throw ParamError("analytic_output: empty output map");
  Matrix phi_x(psi_x.output_dim, grid.count());
  Matrix phi_y(psi_y.output_dim, grid.count());
  for (Eigen::Index q = 0; q < grid.count(); ++q) {
    const Vector x = grid.nodes.col(q);
    phi_x.col(q) = psi_x.eval(x);
    const Vector y = h(x);
    if (y.size() != psi_y.input_dim) {
      throw DimensionError("analytic_output: the output map returned dimension " +
                           std::to_string(y.size()) + " but psi_y expects " +
                           std::to_string(psi_y.input_dim));
    }
    phi_y.col(q) = psi_y.eval(y);
  }
  const Matrix r_x = symmetrized(weighted_gram(phi_x, phi_x, grid.weights));
  if (numerical_rank(r_x) < r_x.rows()) {
    throw RankError("analytic_output: the Gram matrix R_x is numerically singular; "
                    "psi_x must form a Riesz basis (nonsingular R_x)");
  }
  const Matrix q_y = weighted_gram(phi_y, phi_x, grid.weights);
  return r_x.ldlt().solve(q_y.transpose()).transpose();
}

}  // namespace geko
