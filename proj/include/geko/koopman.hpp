#ifndef GEKO_KOOPMAN_HPP
#define GEKO_KOOPMAN_HPP

#include "geko/common.hpp"
#include "geko/dynamics.hpp"
#include "geko/observables.hpp"

#include <optional>
#include <string>

namespace geko {

struct FitDiagnostics {
  std::string method;        // which fit produced the model
  double residual = 0.0;     // Frobenius norm of the training equation error
  Eigen::Index rank = 0;     // numerical rank of the regressor matrix
  double smallest_sv = 0.0;  // its smallest singular value
  double gamma = 0.0;        // ridge parameter used
  Eigen::Index columns = 0;  // data columns T
};

// A fitted bilinear lifted model z+ = K (z kron v), with optional output
// matrix C (w = C z), direct-to-state operator K_x (x+ = K_x (z kron v)) and
// linear decoder D (x ~ D z). Matrices are empty when not fitted.
struct KoopmanModel {
  Matrix k;    // n_z x (n_z * n_v)
  Matrix k_x;  // n x (n_z * n_v)
  Matrix c;    // n_w x n_z
  Matrix d;    // n x n_z
  ObservableMap psi_x;
  ObservableMap psi_u;
  std::optional<ObservableMap> psi_y;
  FitDiagnostics diagnostics;

  Eigen::Index n_z() const { return psi_x.output_dim; }
  Eigen::Index n_v() const { return psi_u.output_dim; }
  bool has_k() const { return k.size() > 0; }
  bool has_k_x() const { return k_x.size() > 0; }
  bool has_c() const { return c.size() > 0; }
  bool has_d() const { return d.size() > 0; }
};

// Khatri-Rao EDMD: K = Z_X_plus (Z_X kr V_U)^dagger with ridge gamma. At
// gamma = 0 the Khatri-Rao data matrix must have full row rank. Warns when
// the column count is below the lifted dimension n_z * n_v.
KoopmanModel fit_geko(const LiftedData& data, const ObservableMap& psi_x,
                      const ObservableMap& psi_u, double gamma);

// Decoder-free variant: regresses the raw next state on the same lifted
// regressor, filling k_x instead of k.
KoopmanModel fit_direct(const LiftedData& data, const ObservableMap& psi_x,
                        const ObservableMap& psi_u, double gamma);

enum class KicTarget {
  kLifted,  // regress the lifted next stacked state (the default baseline)
  kRaw,     // regress the raw next state (fills k_x)
};

// Stacked-observable baseline: IMQ features of col(x, u) with beta = 1,
// modeled as the degenerate bilinear system with Psi_u = [1]. Trajectory
// data uses the recorded next input for the lifted target; snapshot batches
// fall back to holding the input (u_next := u_t).
KoopmanModel fit_kic(const Trajectory& traj, const Matrix& centers, double sigma,
                     double gamma, KicTarget target = KicTarget::kLifted);
KoopmanModel fit_kic(const SnapshotBatch& batch, const Matrix& centers, double sigma,
                     double gamma, KicTarget target = KicTarget::kLifted);

// Output operator C = W Z_X^dagger (ridge). Requires data.w.
Matrix fit_output(const LiftedData& data, double gamma, FitDiagnostics* diag = nullptr);

// Linear decoder D with x_t ~ D z_t, for reporting state-space errors of
// lifted-only models.
Matrix fit_decoder(const LiftedData& data, double gamma, FitDiagnostics* diag = nullptr);

// Lifted rollout under the fitted operator.
struct LiftedTrajectory {
  Matrix z;  // n_z x (steps + 1)
  Matrix w;  // n_w x (steps + 1) when the model has C, else 0 x 0
};

// Iterates z_{t+1} = K (z_t kron v_t) over the columns of v_seq. Throws
// DivergenceError naming the step on non-finite states.
LiftedTrajectory propagate(const KoopmanModel& model, const Vector& z0,
                           const Matrix& v_seq);

// Absolute lifted prediction error |z_hat_{i,t} - psi_{i,x}(truth at t)|,
// propagating from the lifted initial condition with the true lifted inputs.
// For stacked (KIC) liftings the truth at t is col(x_t, u_t) and the surface
// spans t = 0..T-1; otherwise t = 0..T.
Matrix lifted_error_surface(const KoopmanModel& model, const Trajectory& traj);

// Tensor Gauss-Legendre quadrature over a box; nodes flattened row-major
// (first axis outer). Exact for polynomial integrands of per-axis degree
// <= 2 * nodes_per_axis - 1.
struct QuadratureGrid {
  Box box;
  Matrix nodes;    // dim x total
  Vector weights;  // total, positive, summing to the box volume
  Eigen::Index nodes_per_axis = 0;

  Eigen::Index count() const { return weights.size(); }
};

QuadratureGrid tensor_gauss_legendre(const Box& box, Eigen::Index nodes_per_axis = 32);

// Gram matrix R_ij = <psi_i, psi_j> under the Lebesgue measure on the grid's
// box, approximated by the quadrature rule.
Matrix gram_matrix(const ObservableMap& psi, const QuadratureGrid& grid);

// Gram of the product basis psi_i,x * psi_j,u on a grid over the X x U box
// (first psi_x.input_dim axes are X).
Matrix gram_matrix_product(const ObservableMap& psi_x, const ObservableMap& psi_u,
                           const QuadratureGrid& grid);

// Truncated analytic construction K = Q_x R^{-1}: Q_x from inner products of
// psi_x composed with the one-step map F against the product basis. Restricted
// to state + input dimension <= 3 (tensor quadrature). Throws RankError when
// the Gram matrix is numerically singular (the basis must stay a Riesz basis).
Matrix analytic_koopman(const StateMap& f, const ObservableMap& psi_x,
                        const ObservableMap& psi_u, const QuadratureGrid& grid);

// Simplified form for orthonormal bases: K reduces to Q_x itself.
Matrix analytic_koopman_orthonormal(const StateMap& f, const ObservableMap& psi_x,
                                    const ObservableMap& psi_u, const QuadratureGrid& grid);

// Output counterpart C = Q_y R_x^{-1} over a grid on the X box alone.
Matrix analytic_output(const OutputMap& h, const ObservableMap& psi_x,
                       const ObservableMap& psi_y, const QuadratureGrid& grid);

}  // namespace geko

#endif  // GEKO_KOOPMAN_HPP
