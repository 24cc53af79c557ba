#ifndef GEKO_OBSERVABLES_HPP
#define GEKO_OBSERVABLES_HPP

#include "geko/common.hpp"
#include "geko/dynamics.hpp"

#include <string>

namespace geko {

// Inverse multiquadric features against a set of centers (columns of
// `centers`): component i = (1 + ||xi_i - point||^2 / sigma^2)^(-beta).
Vector imq_features(const Vector& point, const Matrix& centers, double sigma, double beta);

// Delay window col(s_t, ..., s_{t+order-1}) over the columns of `signal`.
Vector delay_features(const Matrix& signal, Eigen::Index t, Eigen::Index order);

// IMQ features (beta = 1) of col(state, input) against stacked-space centers.
Vector kic_features(const Vector& state, const Vector& input, const Matrix& centers,
                    double sigma);

enum class CenterMethod {
  kUniform,   // i.i.d. uniform inside the box
  kGaussian,  // i.i.d. normal, mean = box center, sd = quarter box width
};

// Draws `count` center columns from the box; deterministic given the seed.
Matrix sample_centers(const Box& box, Eigen::Index count, CenterMethod method,
                      std::uint64_t seed);

enum class ObservableKind {
  kIdentity,     // x itself
  kAffine,       // col(1, x)
  kConstantOne,  // the single constant feature [1]
  kImq,          // IMQ kernel features against centers in a box
  kStackedImq,   // IMQ (beta = 1) on col(x, u) against product-space centers
  kDelay,        // time-shifted windows col(s_t, ..., s_{t+order-1})
  kLegendre,     // tensor product of per-axis normalized Legendre polynomials
};

// A lifting map with enough metadata to rebuild it bit-exactly from disk.
// Pointwise kinds evaluate with eval(); the delay kind acts on sequences and
// is applied through lift_trajectory / havok_lift.
struct ObservableMap {
  ObservableKind kind = ObservableKind::kIdentity;
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  Matrix centers;             // input_dim x k (kImq); (n+m) x k (kStackedImq)
  double sigma = 1.0;
  double beta = 1.0;
  Box box;                    // declared domain (kImq, kStackedImq, kLegendre)
  Eigen::Index order = 1;     // kDelay window length
  Eigen::Index max_degree = 0;  // kLegendre per-axis degree cap
  std::uint64_t center_seed = 0;

  bool pointwise() const { return kind != ObservableKind::kDelay; }
  Vector eval(const Vector& point) const;
};

ObservableMap identity_map(Eigen::Index dim);
ObservableMap affine_map(Eigen::Index dim);
ObservableMap constant_one_map(Eigen::Index dim);
ObservableMap imq_map(Matrix centers, double sigma, double beta, Box box,
                      std::uint64_t center_seed = 0);
ObservableMap stacked_imq_map(Matrix centers, double sigma, Box box,
                              std::uint64_t center_seed = 0);
ObservableMap delay_map(Eigen::Index dim, Eigen::Index order);
// Tensor basis of per-axis Legendre polynomials of degree 0..max_degree,
// normalized to be orthonormal under the Lebesgue measure on the box
// (enumeration row-major, first axis outer). output_dim = (max_degree+1)^dim.
ObservableMap legendre_map(const Box& box, Eigen::Index max_degree);

// Aligned data matrices lifted from one trajectory or snapshot batch.
struct LiftedData {
  Matrix z_x;       // n_z x T, column t = Psi_x(x_t)
  Matrix v_u;       // n_v x T, column t = Psi_u(u_t)
  Matrix z_x_plus;  // n_z x T, column t = Psi_x(x_{t+1})
  Matrix w;         // n_w x T, column t = Psi_y(y_t); 0 x 0 when no output map
  Matrix x_raw;     // n x T raw x_t
  Matrix x_plus;    // n x T raw x_{t+1}

  Eigen::Index count() const { return z_x.cols(); }
  bool has_w() const { return w.size() > 0; }
};

// Lifts a trajectory (or batch) into aligned (Z_X, V_U, Z_X_plus) columns,
// plus W when an output map is supplied. Delay maps shrink the usable column
// range so that every window stays inside the recorded signal.
LiftedData lift_trajectory(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u);
LiftedData lift_trajectory(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u, const ObservableMap& psi_y);
LiftedData lift_snapshots(const SnapshotBatch& batch, const ObservableMap& psi_x,
                          const ObservableMap& psi_u);
LiftedData lift_snapshots(const SnapshotBatch& batch, const ObservableMap& psi_x,
                          const ObservableMap& psi_u, const ObservableMap& psi_y);

// Delay-embedding lift with SVD order reduction: builds the state Hankel
// matrix from depth-`order` windows, keeps `reduce_to` modes of Sigma V^T
// (all, when reduce_to = 0), and pairs the reduced columns one step apart.
// Inputs enter as raw u_t columns when input_order = 0, else as depth
// input_order windows.
struct HavokLift {
  LiftedData data;
  Matrix hankel_x;        // the full state Hankel matrix before reduction
  Vector singular_values; // of hankel_x
  Eigen::Index order = 0; // retained modes
};

HavokLift havok_lift(const Trajectory& traj, Eigen::Index order, Eigen::Index input_order,
                     Eigen::Index reduce_to);

}  // namespace geko

#endif  // GEKO_OBSERVABLES_HPP
