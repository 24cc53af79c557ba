#include "geko/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace geko {

namespace {

Eigen::Index rank_from_singular_values(const Vector& sv, Eigen::Index rows,
                                       Eigen::Index cols) {
  if (sv.size() == 0) return 0;
  const double tol = static_cast<double>(std::max(rows, cols)) * sv[0] * kRankRelTol;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) ++r;
  }
  return r;
}

// Rank cutoff for singular values obtained through a Gram matrix: those
// carry a noise floor of about eps * lambda_1 on the eigenvalue scale, so the
// relative tolerance must be applied to the squared values. Effectively a
// ~1e-6 relative sigma cutoff -- fine for the large-scale diagnostics this
// path serves, while correctness-critical checks use the exact SVD path.
Eigen::Index rank_from_gram_singular_values(const Vector& sv, Eigen::Index rows,
                                            Eigen::Index cols) {
  if (sv.size() == 0) return 0;
  const double tol2 = static_cast<double>(std::max(rows, cols)) * sv[0] * sv[0] * kRankRelTol;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] * sv[i] > tol2) ++r;
  }
  return r;
}

// Singular values of A from the eigenvalues of the Gram matrix of its
// shorter side. Loses half the digits but avoids a large SVD.
Vector singular_values_via_gram(const Matrix& a) {
  Matrix g;
  if (a.rows() <= a.cols()) {
    g = Matrix::Zero(a.rows(), a.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  } else {
    g = Matrix::Zero(a.cols(), a.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  Vector ev = eig.eigenvalues();  // ascending
  Vector sv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    sv[i] = std::sqrt(std::max(0.0, ev[ev.size() - 1 - i]));
  }
  return sv;
}

}  // namespace

SvdResult svd_of(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.u = svd.matrixU();
  out.singular_values = svd.singularValues();
  out.v = svd.matrixV();
  out.rank = rank_from_singular_values(out.singular_values, m.rows(), m.cols());
  return out;
}

Eigen::Index numerical_rank(const Matrix& m, Eigen::Index exact_limit) {
  if (std::min(m.rows(), m.cols()) <= exact_limit) {
    Eigen::BDCSVD<Matrix> svd(m);
    return rank_from_singular_values(svd.singularValues(), m.rows(), m.cols());
  }
  return rank_from_gram_singular_values(singular_values_via_gram(m), m.rows(), m.cols());
}

Vector kron_vec(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) {
    throw DimensionError("kron_vec requires nonempty vectors");
  }
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return out;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("khatri_rao: column counts differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
  }
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.col(c).segment(i * b.rows(), b.rows()) = a(i, c) * b.col(c);
    }
  }
  return out;
}

Matrix block_khatri_rao(const Matrix& a, const Matrix& b, Eigen::Index a_block,
                        Eigen::Index b_block) {
  if (a_block <= 0 || b_block <= 0) {
    throw DimensionError("block_khatri_rao: block sizes must be positive");
  }
  if (a.rows() % a_block != 0 || b.rows() % b_block != 0) {
    throw DimensionError("block_khatri_rao: rows not divisible by block size");
  }
  const Eigen::Index blocks = a.rows() / a_block;
  if (blocks != b.rows() / b_block) {
    throw DimensionError("block_khatri_rao: block counts differ");
  }
  if (a.cols() != b.cols()) {
    throw DimensionError("block_khatri_rao: column counts differ");
  }
  Matrix out(blocks * a_block * b_block, a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index k = 0; k < blocks; ++k) {
      for (Eigen::Index i = 0; i < a_block; ++i) {
        out.col(c).segment(k * a_block * b_block + i * b_block, b_block) =
            a(k * a_block + i, c) * b.col(c).segment(k * b_block, b_block);
      }
    }
  }
  return out;
}

namespace {

void require_full_row_rank(const Matrix& a, const char* who) {
  const Eigen::Index r = numerical_rank(a);
  if (r < a.rows()) {
    throw RankError(std::string(who) + ": matrix is row-rank-deficient at gamma = 0 " +
                    "(numerical rank " + std::to_string(r) + " of " +
                    std::to_string(a.rows()) + " rows); supply more data or gamma > 0");
  }
}

// Cholesky-style factor of (A A^T + gamma I) reused by the solve paths.
Eigen::LDLT<Matrix> gram_factor(const Matrix& a, double gamma) {
  Matrix g = Matrix::Zero(a.rows(), a.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  g = g.selfadjointView<Eigen::Lower>();
  if (gamma > 0.0) g.diagonal().array() += gamma;
  return Eigen::LDLT<Matrix>(g);
}

}  // namespace

Matrix ridge_right_pinv(const Matrix& a, double gamma) {
  if (gamma < 0.0) throw ParamError("ridge_right_pinv: gamma must be non-negative");
  if (gamma == 0.0) require_full_row_rank(a, "ridge_right_pinv");
  const auto ldlt = gram_factor(a, gamma);
  return ldlt.solve(a).transpose();
}

Matrix pinv_svd(const Matrix& a) {
  const SvdResult s = svd_of(a);
  Matrix out = Matrix::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < s.rank; ++i) {
    out += (1.0 / s.singular_values[i]) * s.v.col(i) * s.u.col(i).transpose();
  }
  return out;
}

SolveResult solve_operator(const Matrix& y, const Matrix& a, double gamma) {
  if (y.cols() != a.cols()) {
    throw DimensionError("solve_operator: Y and A must have the same column count");
  }
  if (gamma < 0.0) throw ParamError("solve_operator: gamma must be non-negative");

  SolveResult out;
  out.gamma = gamma;
  // The row Gram matrix serves both the rank diagnostics and the ridge
  // factorization, so it is built once. Small problems still use an exact
  // SVD for the diagnostics; at scale the Gram eigenvalues are enough.
  Matrix gram = Matrix::Zero(a.rows(), a.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
  gram = gram.selfadjointView<Eigen::Lower>();
  const bool small = std::min(a.rows(), a.cols()) <= 1024;
  if (small) {
    Eigen::BDCSVD<Matrix> svd(a);
    const Vector& sv = svd.singularValues();
    out.rank = rank_from_singular_values(sv, a.rows(), a.cols());
    out.smallest_sv = sv.size() ? sv[sv.size() - 1] : 0.0;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    Vector sv(eig.eigenvalues().size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      sv[i] = std::sqrt(std::max(0.0, eig.eigenvalues()[sv.size() - 1 - i]));
    }
    out.rank = rank_from_gram_singular_values(sv, a.rows(), a.cols());
    out.smallest_sv = sv.size() ? sv[sv.size() - 1] : 0.0;
  }
  if (gamma == 0.0 && out.rank < a.rows()) {
    throw RankError("solve_operator: regressor is row-rank-deficient at gamma = 0 "
                    "(numerical rank " + std::to_string(out.rank) + " of " +
                    std::to_string(a.rows()) + " rows)");
  }

  if (gamma > 0.0) gram.diagonal().array() += gamma;
  const Eigen::LDLT<Matrix> ldlt(gram);
  // X = Y A^T (A A^T + gamma I)^-1, computed as a transposed solve.
  Matrix m = a * y.transpose();      // (rows_a x rows_y)
  out.solution = ldlt.solve(m).transpose();
  out.residual = (out.solution * a - y).norm();
  return out;
}

Vector ridge_solve_vector(const Matrix& a, const Vector& b, double gamma) {
  if (b.size() != a.rows()) {
    throw DimensionError("ridge_solve_vector: rhs length must equal row count");
  }
  if (gamma < 0.0) throw ParamError("ridge_solve_vector: gamma must be non-negative");
  if (gamma == 0.0) require_full_row_rank(a, "ridge_solve_vector");
  const auto ldlt = gram_factor(a, gamma);
  return a.transpose() * ldlt.solve(b);
}

Vector min_norm_solve(const Matrix& a, const Vector& b) {
  if (b.size() != a.rows()) {
    throw DimensionError("min_norm_solve: rhs length must equal row count");
  }
  const SvdResult s = svd_of(a);
  Vector x = Vector::Zero(a.cols());
  for (Eigen::Index i = 0; i < s.rank; ++i) {
    x += (s.u.col(i).dot(b) / s.singular_values[i]) * s.v.col(i);
  }
  return x;
}

Matrix hankel(const Matrix& s, Eigen::Index depth, Eigen::Index width) {
  if (depth < 1 || width < 0) {
    throw DimensionError("hankel: depth must be >= 1 and width >= 0");
  }
  if (s.cols() < depth + width) {
    throw DimensionError("hankel: sequence of length " + std::to_string(s.cols()) +
                         " too short for depth " + std::to_string(depth) + " and width " +
                         std::to_string(width) + " (needs " + std::to_string(depth + width) +
                         ")");
  }
  const Eigen::Index ns = s.rows();
  Matrix out(depth * ns, width + 1);
  for (Eigen::Index j = 0; j <= width; ++j) {
    for (Eigen::Index i = 0; i < depth; ++i) {
      out.col(j).segment(i * ns, ns) = s.col(i + j);
    }
  }
  return out;
}

namespace {

SvdReduction reduce_from_svd(SvdResult s, Eigen::Index order, Eigen::Index cols) {
  SvdReduction out;
  out.order = order;
  out.reduced = s.singular_values.head(order).asDiagonal() *
                s.v.leftCols(order).transpose();
  (void)cols;
  out.svd = std::move(s);
  return out;
}

}  // namespace

SvdReduction svd_reduce(const Matrix& m, Eigen::Index order) {
  if (order < 1 || order > std::min(m.rows(), m.cols())) {
    throw DimensionError("svd_reduce: order " + std::to_string(order) +
                         " out of range [1, " +
                         std::to_string(std::min(m.rows(), m.cols())) + "]");
  }
  return reduce_from_svd(svd_of(m), order, m.cols());
}

SvdReduction svd_reduce_energy(const Matrix& m, double energy_fraction) {
  if (!(energy_fraction > 0.0) || energy_fraction > 1.0) {
    throw ParamError("svd_reduce: energy fraction must lie in (0, 1]");
  }
  SvdResult s = svd_of(m);
  const double total = s.singular_values.squaredNorm();
  double acc = 0.0;
  Eigen::Index order = s.singular_values.size();
  for (Eigen::Index i = 0; i < s.singular_values.size(); ++i) {
    acc += s.singular_values[i] * s.singular_values[i];
    if (acc >= energy_fraction * total) {
      order = i + 1;
      break;
    }
  }
  order = std::max<Eigen::Index>(order, 1);
  return reduce_from_svd(std::move(s), order, m.cols());
}

}  // namespace geko
