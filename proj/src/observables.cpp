#include "geko/observables.hpp"

#include "geko/linalg.hpp"

#include <cmath>

namespace geko {

Vector imq_features(const Vector& point, const Matrix& centers, double sigma, double beta) {
  if (sigma <= 0.0 || beta <= 0.0) {
    throw ParamError("imq_features: sigma and beta must be positive");
  }
  if (point.size() != centers.rows()) {
    throw DimensionError("imq_features: point dimension " + std::to_string(point.size()) +
                         " != center dimension " + std::to_string(centers.rows()));
  }
  Vector out(centers.cols());
  const double inv_s2 = 1.0 / (sigma * sigma);
  for (Eigen::Index i = 0; i < centers.cols(); ++i) {
    const double q = 1.0 + (centers.col(i) - point).squaredNorm() * inv_s2;
    if (beta == 1.0) {
      out[i] = 1.0 / q;
    } else if (beta == 0.5) {
      out[i] = 1.0 / std::sqrt(q);
    } else {
      out[i] = std::pow(q, -beta);
    }
  }
  return out;
}

Vector delay_features(const Matrix& signal, Eigen::Index t, Eigen::Index order) {
  if (order < 1) throw ParamError("delay_features: order must be >= 1");
  if (t < 0 || t + order > signal.cols()) {
    throw DimensionError("delay_features: window [" + std::to_string(t) + ", " +
                         std::to_string(t + order - 1) + "] outside sequence of length " +
                         std::to_string(signal.cols()));
  }
  const Eigen::Index ns = signal.rows();
  Vector out(order * ns);
  for (Eigen::Index i = 0; i < order; ++i) out.segment(i * ns, ns) = signal.col(t + i);
  return out;
}

Vector kic_features(const Vector& state, const Vector& input, const Matrix& centers,
                    double sigma) {
  Vector stacked(state.size() + input.size());
  stacked << state, input;
  return imq_features(stacked, centers, sigma, 1.0);
}

Matrix sample_centers(const Box& box, Eigen::Index count, CenterMethod method,
                      std::uint64_t seed) {
  if (count < 1) throw ParamError("sample_centers: count must be >= 1");
  Matrix centers(box.dim(), count);
  Rng rng(seed);
  if (method == CenterMethod::kUniform) {
    for (Eigen::Index i = 0; i < count; ++i) centers.col(i) = rng.uniform_in(box);
  } else {
    const Vector mean = box.center();
    const Vector sd = 0.25 * box.width();
    for (Eigen::Index i = 0; i < count; ++i) centers.col(i) = rng.gaussian_vec(mean, sd);
  }
  return centers;
}

namespace {

void check_observable(const ObservableMap& m) {
  if (m.input_dim < 1 || m.output_dim < 1) {
    throw ParamError("observable map: dimensions must be positive");
  }
  if (m.kind == ObservableKind::kImq || m.kind == ObservableKind::kStackedImq) {
    if (m.sigma <= 0.0 || m.beta <= 0.0) {
      throw ParamError("observable map: sigma and beta must be positive");
    }
    if (m.centers.rows() != m.input_dim || m.centers.cols() != m.output_dim) {
      throw DimensionError("observable map: centers must be input_dim x output_dim");
    }
    if (m.box.dim() != m.input_dim) {
      throw DimensionError("observable map: box dimension != input dimension");
    }
    for (Eigen::Index i = 0; i < m.centers.cols(); ++i) {
      if (!m.box.contains(m.centers.col(i))) {
        throw ParamError("observable map: center " + std::to_string(i) +
                         " lies outside the declared box");
      }
    }
  }
}

// Value of the degree-0..max_degree Legendre basis at x over [lo, hi],
// normalized to unit L2(Lebesgue) norm on the interval.
void legendre_axis(double x, double lo, double hi, Eigen::Index max_degree, Vector& out) {
  const double t = (2.0 * x - lo - hi) / (hi - lo);
  double pkm1 = 1.0;  // P_0
  double pk = t;      // P_1
  for (Eigen::Index k = 0; k <= max_degree; ++k) {
    double pval;
    if (k == 0) {
      pval = 1.0;
    } else if (k == 1) {
      pval = t;
    } else {
      const double next =
          ((2.0 * k - 1.0) * t * pk - (k - 1.0) * pkm1) / static_cast<double>(k);
      pkm1 = pk;
      pk = next;
      pval = next;
    }
    out[k] = std::sqrt((2.0 * k + 1.0) / (hi - lo)) * pval;
  }
}

}  // namespace

Vector ObservableMap::eval(const Vector& point) const {
  if (!pointwise()) {
    throw ParamError("delay maps act on sequences; use lift_trajectory or havok_lift");
  }
  if (point.size() != input_dim) {
    throw DimensionError("observable eval: point dimension " + std::to_string(point.size()) +
                         " != map input dimension " + std::to_string(input_dim));
  }
  switch (kind) {
    case ObservableKind::kIdentity:
      return point;
    case ObservableKind::kAffine: {
      Vector out(point.size() + 1);
      out[0] = 1.0;
      out.tail(point.size()) = point;
      return out;
    }
    case ObservableKind::kConstantOne:
      return Vector::Ones(1);
    case ObservableKind::kImq:
      return imq_features(point, centers, sigma, beta);
    case ObservableKind::kStackedImq:
      return imq_features(point, centers, sigma, 1.0);
    case ObservableKind::kLegendre: {
      Vector features = Vector::Ones(1);
      Vector axis(max_degree + 1);
      for (Eigen::Index d = 0; d < input_dim; ++d) {
        legendre_axis(point[d], box.lo[d], box.hi[d], max_degree, axis);
        features = kron_vec(features, axis);
      }
      return features;
    }
    case ObservableKind::kDelay:
      break;
  }
  throw ParamError("observable eval: unknown kind");
}

ObservableMap identity_map(Eigen::Index dim) {
  ObservableMap m;
  m.kind = ObservableKind::kIdentity;
  m.input_dim = dim;
  m.output_dim = dim;
  check_observable(m);
  return m;
}

ObservableMap affine_map(Eigen::Index dim) {
  ObservableMap m;
  m.kind = ObservableKind::kAffine;
  m.input_dim = dim;
  m.output_dim = dim + 1;
  check_observable(m);
  return m;
}

ObservableMap constant_one_map(Eigen::Index dim) {
  ObservableMap m;
  m.kind = ObservableKind::kConstantOne;
  m.input_dim = dim;
  m.output_dim = 1;
  check_observable(m);
  return m;
}

ObservableMap imq_map(Matrix centers, double sigma, double beta, Box box,
                      std::uint64_t center_seed) {
  ObservableMap m;
  m.kind = ObservableKind::kImq;
  m.input_dim = centers.rows();
  m.output_dim = centers.cols();
  m.centers = std::move(centers);
  m.sigma = sigma;
  m.beta = beta;
  m.box = std::move(box);
  m.center_seed = center_seed;
  check_observable(m);
  return m;
}

ObservableMap stacked_imq_map(Matrix centers, double sigma, Box box,
                              std::uint64_t center_seed) {
  ObservableMap m;
  m.kind = ObservableKind::kStackedImq;
  m.input_dim = centers.rows();
  m.output_dim = centers.cols();
  m.centers = std::move(centers);
  m.sigma = sigma;
  m.beta = 1.0;
  m.box = std::move(box);
  m.center_seed = center_seed;
  check_observable(m);
  return m;
}

ObservableMap delay_map(Eigen::Index dim, Eigen::Index order) {
  if (order < 1) throw ParamError("delay_map: order must be >= 1");
  ObservableMap m;
  m.kind = ObservableKind::kDelay;
  m.input_dim = dim;
  m.output_dim = dim * order;
  m.order = order;
  check_observable(m);
  return m;
}

ObservableMap legendre_map(const Box& box, Eigen::Index max_degree) {
  if (max_degree < 0) throw ParamError("legendre_map: max_degree must be >= 0");
  if ((box.width().array() <= 0.0).any()) {
    throw ParamError("legendre_map: box must have positive width on every axis");
  }
  ObservableMap m;
  m.kind = ObservableKind::kLegendre;
  m.input_dim = box.dim();
  m.output_dim = 1;
  for (Eigen::Index d = 0; d < box.dim(); ++d) m.output_dim *= max_degree + 1;
  m.box = box;
  m.max_degree = max_degree;
  check_observable(m);
  return m;
}

namespace {

void check_map_dim(const ObservableMap& m, Eigen::Index dim, const char* name) {
  if (m.input_dim != dim) {
    throw DimensionError(std::string(name) + ": map expects dimension " +
                         std::to_string(m.input_dim) + ", signal has " +
                         std::to_string(dim));
  }
}

LiftedData lift_trajectory_impl(const Trajectory& traj, const ObservableMap& psi_x,
                                const ObservableMap& psi_u, const ObservableMap* psi_y) {
  check_map_dim(psi_x, traj.states.rows(), "lift_trajectory: psi_x");
  check_map_dim(psi_u, traj.inputs.rows(), "lift_trajectory: psi_u");
  if (psi_y) {
    check_map_dim(*psi_y, traj.outputs.rows(), "lift_trajectory: psi_y");
    if (!psi_y->pointwise()) {
      throw ParamError("lift_trajectory: psi_y must be a pointwise map");
    }
  }
  const Eigen::Index s = traj.states.cols();
  const Eigen::Index qx = psi_x.pointwise() ? 1 : psi_x.order;
  const Eigen::Index qu = psi_u.pointwise() ? 1 : psi_u.order;
  const Eigen::Index count = std::min(s - qx, s - qu);
  if (count < 1) {
    throw DimensionError("lift_trajectory: trajectory too short for the delay orders");
  }

  LiftedData data;
  data.z_x.resize(psi_x.output_dim, count);
  data.v_u.resize(psi_u.output_dim, count);
  data.z_x_plus.resize(psi_x.output_dim, count);
  if (psi_y) data.w.resize(psi_y->output_dim, count);
  data.x_raw = traj.states.middleCols(0, count);
  data.x_plus = traj.states.middleCols(1, count);
  for (Eigen::Index t = 0; t < count; ++t) {
    if (psi_x.pointwise()) {
      data.z_x.col(t) = psi_x.eval(traj.states.col(t));
      data.z_x_plus.col(t) = psi_x.eval(traj.states.col(t + 1));
    } else {
      data.z_x.col(t) = delay_features(traj.states, t, qx);
      data.z_x_plus.col(t) = delay_features(traj.states, t + 1, qx);
    }
    data.v_u.col(t) = psi_u.pointwise() ? psi_u.eval(traj.inputs.col(t))
                                        : delay_features(traj.inputs, t, qu);
    if (psi_y) data.w.col(t) = psi_y->eval(traj.outputs.col(t));
  }
  return data;
}

LiftedData lift_snapshots_impl(const SnapshotBatch& batch, const ObservableMap& psi_x,
                               const ObservableMap& psi_u, const ObservableMap* psi_y) {
  if (!psi_x.pointwise() || !psi_u.pointwise() || (psi_y && !psi_y->pointwise())) {
    throw ParamError("lift_snapshots: delay maps need contiguous trajectories");
  }
  check_map_dim(psi_x, batch.x.rows(), "lift_snapshots: psi_x");
  check_map_dim(psi_u, batch.u.rows(), "lift_snapshots: psi_u");
  if (psi_y) check_map_dim(*psi_y, batch.y.rows(), "lift_snapshots: psi_y");
  const Eigen::Index count = batch.count();
  LiftedData data;
  data.z_x.resize(psi_x.output_dim, count);
  data.v_u.resize(psi_u.output_dim, count);
  data.z_x_plus.resize(psi_x.output_dim, count);
  if (psi_y) data.w.resize(psi_y->output_dim, count);
  data.x_raw = batch.x;
  data.x_plus = batch.x_next;
  for (Eigen::Index t = 0; t < count; ++t) {
    data.z_x.col(t) = psi_x.eval(batch.x.col(t));
    data.v_u.col(t) = psi_u.eval(batch.u.col(t));
    data.z_x_plus.col(t) = psi_x.eval(batch.x_next.col(t));
    if (psi_y) data.w.col(t) = psi_y->eval(batch.y.col(t));
  }
  return data;
}

}  // namespace

LiftedData lift_trajectory(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u) {
  return lift_trajectory_impl(traj, psi_x, psi_u, nullptr);
}

LiftedData lift_trajectory(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u, const ObservableMap& psi_y) {
  return lift_trajectory_impl(traj, psi_x, psi_u, &psi_y);
}

LiftedData lift_snapshots(const SnapshotBatch& batch, const ObservableMap& psi_x,
                          const ObservableMap& psi_u) {
  return lift_snapshots_impl(batch, psi_x, psi_u, nullptr);
}

LiftedData lift_snapshots(const SnapshotBatch& batch, const ObservableMap& psi_x,
                          const ObservableMap& psi_u, const ObservableMap& psi_y) {
  return lift_snapshots_impl(batch, psi_x, psi_u, &psi_y);
}

HavokLift havok_lift(const Trajectory& traj, Eigen::Index order, Eigen::Index input_order,
                     Eigen::Index reduce_to) {
  if (order < 1) throw ParamError("havok_lift: order must be >= 1");
  const Eigen::Index qu = std::max<Eigen::Index>(1, input_order);
  const Eigen::Index s = traj.states.cols();
  if (s < order + 1 || s <= qu) {
    throw DimensionError("havok_lift: trajectory too short for the delay orders");
  }

  HavokLift out;
  // All depth-`order` windows of the state signal, oldest window first.
  out.hankel_x = hankel(traj.states, order, s - order);
  const Eigen::Index windows = out.hankel_x.cols();

  Eigen::Index keep = reduce_to;
  if (keep == 0) keep = std::min(out.hankel_x.rows(), windows);
  const SvdReduction red = svd_reduce(out.hankel_x, keep);
  out.singular_values = red.svd.singular_values;
  out.order = red.order;

  // Pair reduced columns one step apart; inputs align with the window start.
  const Eigen::Index count = std::min(windows - 1, s - qu);
  if (count < 1) throw DimensionError("havok_lift: no aligned columns remain");
  LiftedData& data = out.data;
  data.z_x = red.reduced.leftCols(count);
  data.z_x_plus = red.reduced.middleCols(1, count);
  data.v_u.resize(qu * traj.inputs.rows(), count);
  for (Eigen::Index t = 0; t < count; ++t) {
    data.v_u.col(t) = delay_features(traj.inputs, t, qu);
  }
  data.x_raw = traj.states.middleCols(0, count);
  data.x_plus = traj.states.middleCols(1, count);
  return out;
}

}  // namespace geko
