#ifndef GEKO_DYNAMICS_HPP
#define GEKO_DYNAMICS_HPP

#include "geko/common.hpp"

#include <functional>
#include <iosfwd>
#include <string>

namespace geko {

// Continuous-time vector field xdot = f(x, u).
using VectorField = std::function<Vector(const Vector&, const Vector&)>;
// Discrete-time state map x+ = F(x, u).
using StateMap = std::function<Vector(const Vector&, const Vector&)>;
// Output map y = h(x).
using OutputMap = std::function<Vector(const Vector&)>;

// A discrete-time control system over box domains. The state map may be a
// native discrete map or induced by integrating a continuous field over the
// sampling time (zero-order hold on the input).
struct System {
  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  double sampling_time = 0.0;
  StateMap step;
  OutputMap output;
  Box state_box;
  Box input_box;
};

// Van der Pol oscillator with additive input on the second coordinate:
// xdot = [x2, mu (1 - x1^2) x2 - x1 + u].
Vector vdp_vector_field(const Vector& x, double u, double mu);

// Classical 4th-order Runge-Kutta over ts seconds split into `substeps`
// equal substeps, input held constant. Throws DivergenceError (with the
// substep index) if the state leaves the finite range.
Vector integrate_step(const VectorField& field, const Vector& x, const Vector& u,
                      double ts, int substeps);

// System factories. Box defaults for the Van der Pol system cover the
// mu = 1.2 limit cycle (amplitude ~ 2) and the benchmark input range.
System vdp_system(double mu = 1.2, double ts = 0.1, int substeps = 10);
System vdp_system(double mu, double ts, int substeps, Box state_box, Box input_box);

// Discrete LTI system x+ = A x + B u, y = C x (C defaults to identity).
System lti_system(const Matrix& a, const Matrix& b, Box state_box, Box input_box);
System lti_system(const Matrix& a, const Matrix& b, const Matrix& c, Box state_box,
                  Box input_box);

// Synthetic system whose dynamics are exactly bilinear in the affine lifting
// z = col(1, x), v = col(1, u): the state update is rows 1..n of K (z kron v).
// Row 0 of K must preserve the leading constant, i.e. equal e_1^T.
System bilinear_system(const Matrix& k, Eigen::Index state_dim, Eigen::Index input_dim,
                       Box state_box, Box input_box);

// Generic continuous-time system discretized by RK4 with zero-order hold.
System continuous_system(std::string name, Eigen::Index state_dim, Eigen::Index input_dim,
                         VectorField field, OutputMap h, Eigen::Index output_dim,
                         Box state_box, Box input_box, double ts, int substeps = 10);

// State/input/output record of a closed rollout. states has one more column
// than inputs; outputs align with states.
struct Trajectory {
  Matrix states;   // n x (T+1)
  Matrix inputs;   // m x T
  Matrix outputs;  // p x (T+1)
  double sampling_time = 0.0;

  Eigen::Index length() const { return inputs.cols(); }  // number of steps T
};

// Composes the system map from x0 under the given input columns. Warns (does
// not fail) if x0 lies outside the state box; divergence aborts with the
// offending time index.
Trajectory rollout(const System& sys, const Vector& x0, const Matrix& inputs);

// Sampled one-step transition triples (x_t, u_t, x_t+1) plus outputs y_t.
struct SnapshotBatch {
  Matrix x;       // n x T
  Matrix u;       // m x T
  Matrix x_next;  // n x T
  Matrix y;       // p x T

  Eigen::Index count() const { return x.cols(); }
};

enum class Sampler {
  kUniformBox,  // x, u i.i.d. uniform over their boxes
  kGaussian,    // x, u i.i.d. normal, mean = box center, sd = quarter width
  kRollout,     // chained single rollout from a random start, uniform inputs
  kCenter,      // deterministic: every sample at the box centers (smoke tests)
};

SnapshotBatch sample_snapshots(const System& sys, Eigen::Index count, Sampler sampler,
                               std::uint64_t seed);

// u_t = amplitude * sin(frequency * t) for integer t = 0..length-1, as a
// 1 x length input row.
Matrix sinusoid_input(double amplitude, double frequency, Eigen::Index length);

// Trajectory CSV: header `t,x1..xn,u1..um,y1..yp`, one row per time index,
// input fields blank on the final row. The sampling time rides along in a
// `# sampling_time=...` comment; extra comment lines are preserved on write
// and skipped on read.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::vector<std::string>& comments = {});
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<std::string>& comments = {});
Trajectory read_trajectory_csv(std::istream& is, const std::string& name = "<stream>");
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace geko

#endif  // GEKO_DYNAMICS_HPP
