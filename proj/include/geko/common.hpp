#ifndef GEKO_COMMON_HPP
#define GEKO_COMMON_HPP

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geko {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. The categories map one-to-one onto the C API status codes
// and the CLI exit codes, so every layer reports the same failure class.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

class ParamError : public Error {
 public:
  explicit ParamError(const std::string& msg) : Error(msg) {}
};

class RankError : public Error {
 public:
  explicit RankError(const std::string& msg) : Error(msg) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Axis-aligned box domain with lower <= upper per coordinate.
struct Box {
  Vector lo;
  Vector hi;

  Box() = default;
  Box(Vector lower, Vector upper);

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Vector& p) const;
  Vector center() const { return 0.5 * (lo + hi); }
  Vector width() const { return hi - lo; }
  double volume() const;

  static Box cube(Eigen::Index dim, double lo, double hi);
};

// Deterministic random source. All randomized sampling in the library goes
// through this wrapper so that a seed pins the generated values bit-exactly,
// independent of standard-library distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform01();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; the spare draw is cached.
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  Vector uniform_in(const Box& box);
  Vector gaussian_vec(const Vector& mean, const Vector& stddev);

  // Stream derivation for parallel work items: child streams are decorrelated
  // and reproducible given (seed, label).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t label);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Locale-independent formatting with 17 significant digits, enough to
// round-trip any finite double.
std::string format_double(double v);
double parse_double(std::string_view text, bool* ok = nullptr);

void log_warning(const std::string& msg);

bool all_finite(const Matrix& m);

}  // namespace geko

#endif  // GEKO_COMMON_HPP
