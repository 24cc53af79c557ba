#ifndef GEKO_TESTS_SUPPORT_RK45_HPP
#define GEKO_TESTS_SUPPORT_RK45_HPP

#include "geko/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geko::testsupport {

// Adaptive Dormand-Prince RK45 reference integrator, used only as a test
// oracle against the fixed-step production integrator. Independent
// coefficients and step control; tolerances default to near round-off.
inline Vector rk45_integrate(const VectorField& f, Vector x, const Vector& u,
                             double t_total, double rtol = 1e-12, double atol = 1e-14) {
  if (t_total == 0.0) return x;
  double t = 0.0;
  double h = t_total / 16.0;
  int steps = 0;
  while (t < t_total) {
    if (++steps > 1000000) throw std::runtime_error("rk45: step limit exceeded");
    h = std::min(h, t_total - t);
    const Vector k1 = f(x, u);
    const Vector k2 = f(x + h * (1.0 / 5.0) * k1, u);
    const Vector k3 = f(x + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2), u);
    const Vector k4 =
        f(x + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3), u);
    const Vector k5 = f(x + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                                 (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4),
                        u);
    const Vector k6 = f(x + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 +
                                 (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 -
                                 (5103.0 / 18656.0) * k5),
                        u);
    const Vector x5 = x + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                               (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5 +
                               (11.0 / 84.0) * k6);
    const Vector k7 = f(x5, u);
    const Vector x4 = x + h * ((5179.0 / 57600.0) * k1 + (7571.0 / 16695.0) * k3 +
                               (393.0 / 640.0) * k4 - (92097.0 / 339200.0) * k5 +
                               (187.0 / 2100.0) * k6 + (1.0 / 40.0) * k7);
    double err = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double scale = atol + rtol * std::max(std::abs(x[i]), std::abs(x5[i]));
      err = std::max(err, std::abs(x5[i] - x4[i]) / scale);
    }
    if (err <= 1.0) {
      t += h;
      x = x5;
    }
    const double factor = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
    h *= std::clamp(factor, 0.2, 5.0);
  }
  return x;
}

}  // namespace geko::testsupport

#endif  // GEKO_TESTS_SUPPORT_RK45_HPP
