#ifndef GEKO_LINALG_HPP
#define GEKO_LINALG_HPP

#include "geko/common.hpp"

namespace geko {

// Relative singular-value cutoff used for numerical rank decisions:
// sigma_i counts iff sigma_i > max(rows, cols) * sigma_1 * kRankRelTol.
inline constexpr double kRankRelTol = 1e-12;

struct SvdResult {
  Matrix u;                 // orthonormal columns
  Vector singular_values;   // non-negative, non-increasing
  Matrix v;                 // orthonormal columns
  Eigen::Index rank = 0;    // numerical rank under the relative cutoff

  double smallest() const {
    return singular_values.size() ? singular_values[singular_values.size() - 1] : 0.0;
  }
};

// Thin SVD with a numerical-rank estimate.
SvdResult svd_of(const Matrix& m);

// Numerical rank only. For matrices whose smaller dimension exceeds
// `exact_limit` the singular values are taken from the eigenvalues of the
// Gram matrix of the shorter side, which is cheaper at scale.
Eigen::Index numerical_rank(const Matrix& m, Eigen::Index exact_limit = 1024);

// Kronecker product of two vectors: entry i*len(b)+j = a_i * b_j.
Vector kron_vec(const Vector& a, const Vector& b);

// Column-wise Kronecker product; requires equal column counts.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

// Block-wise Khatri-Rao product: both matrices are split into vertical blocks
// of a_block and b_block rows and block pair i of every column is replaced by
// its Kronecker vector product. Block counts must agree.
Matrix block_khatri_rao(const Matrix& a, const Matrix& b, Eigen::Index a_block,
                        Eigen::Index b_block);

// Ridge-regularized right pseudoinverse A^T (A A^T + gamma I)^-1.
// With gamma = 0 the matrix must have full row rank (checked numerically);
// the result then is the right Moore-Penrose inverse.
Matrix ridge_right_pinv(const Matrix& a, double gamma);

// SVD-truncation pseudoinverse: alternative mode for gamma = 0 on
// rank-deficient matrices. Singular values below the rank cutoff are dropped.
Matrix pinv_svd(const Matrix& a);

struct SolveResult {
  Matrix solution;        // X with X * A ~= Y
  double residual = 0.0;  // ||X A - Y||_F
  Eigen::Index rank = 0;  // numerical rank of A
  double smallest_sv = 0.0;
  double gamma = 0.0;
};

// Least-squares solve of X A = Y through the ridge right pseudoinverse,
// without materializing the pseudoinverse. Requires Y.cols == A.cols.
SolveResult solve_operator(const Matrix& y, const Matrix& a, double gamma);

// Right-hand-side variant: x with A x ~= b in the least-squares/ridge sense,
// x = A^T (A A^T + gamma I)^-1 b. Same rank rules as ridge_right_pinv.
Vector ridge_solve_vector(const Matrix& a, const Vector& b, double gamma);

// Minimum-norm solution of A x ~= b via truncated SVD.
Vector min_norm_solve(const Matrix& a, const Vector& b);

// Block Hankel matrix of a vector-valued sequence (columns of `s`):
// block (i, j) = s_{i+j} for i in [0, N-1], j in [0, T]. Needs at least
// N + T columns in s.
Matrix hankel(const Matrix& s, Eigen::Index depth, Eigen::Index width);

struct SvdReduction {
  SvdResult svd;
  Matrix reduced;           // Sigma_r V_r^T, r x cols
  Eigen::Index order = 0;   // retained modes r
};

// Rank-r reduction M ~= U_r (Sigma_r V_r^T); the reduced data keeps r rows.
SvdReduction svd_reduce(const Matrix& m, Eigen::Index order);

// Energy-based variant: keeps the smallest r whose singular-value energy
// reaches `energy_fraction` of the total (fraction in (0, 1]).
SvdReduction svd_reduce_energy(const Matrix& m, double energy_fraction);

}  // namespace geko

#endif  // GEKO_LINALG_HPP
