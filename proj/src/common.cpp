#include "geko/common.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

namespace geko {

Box::Box(Vector lower, Vector upper) : lo(std::move(lower)), hi(std::move(upper)) {
  if (lo.size() != hi.size()) {
    throw DimensionError("box bounds have mismatched dimensions");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    // Degenerate (zero-width) axes are allowed; sampling such a box always
    // returns the single contained point.
    if (!(lo[i] <= hi[i])) {
      throw ParamError("box requires lower <= upper in every coordinate, axis " +
                       std::to_string(i));
    }
  }
}

bool Box::contains(const Vector& p) const {
  if (p.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (p[i] < lo[i] || p[i] > hi[i]) return false;
  }
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (Eigen::Index i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
  return v;
}

Box Box::cube(Eigen::Index dim, double lo, double hi) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

std::uint64_t Rng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vector Rng::uniform_in(const Box& box) {
  Vector p(box.dim());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = uniform(box.lo[i], box.hi[i]);
  return p;
}

Vector Rng::gaussian_vec(const Vector& mean, const Vector& stddev) {
  Vector p(mean.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = gaussian(mean[i], stddev[i]);
  return p;
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t label) {
  Rng r(seed ^ (0xd1b54a32d192ed03ull * (label + 1)));
  return r.next_u64();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, bool* ok) {
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  const bool good = res.ec == std::errc() && res.ptr == text.data() + text.size();
  if (ok) *ok = good;
  if (!ok && !good) {
    throw IoError("failed to parse floating-point value: '" + std::string(text) + "'");
  }
  return value;
}

void log_warning(const std::string& msg) { std::cerr << "geko: warning: " << msg << "\n"; }

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace geko
