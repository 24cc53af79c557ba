#ifndef GEKO_LEMMA_HPP
#define GEKO_LEMMA_HPP

#include "geko/common.hpp"
#include "geko/koopman.hpp"
#include "geko/observables.hpp"

#include <string>

namespace geko {

// Windowed data matrices for the multi-step least-squares predictor. Column
// j of f_n stacks the lifted pairs (z kron v)_j .. (z kron v)_{j+N-1};
// f_n_w carries the output windows w_{j+1} .. w_{j+N} underneath.
struct LemmaData {
  Matrix f_n;    // (n_z*n_v*N) x (T+1), or r x (T+1) after row reduction
  Matrix f_n_w;  // f_n with the stacked output block appended
  Matrix basis;  // row-reduction basis U_r (empty when unreduced)
  Eigen::Index depth = 0;  // window length N
  Eigen::Index width = 0;  // T; f_n has T+1 columns
  Eigen::Index n_z = 0;
  Eigen::Index n_v = 0;
  Eigen::Index n_w = 0;
  Eigen::Index rank = 0;     // numerical rank of f_n
  double smallest_sv = 0.0;  // smallest singular value of f_n
  double condition = 0.0;    // sigma_1 / sigma_rank of f_n

  Eigen::Index window_size() const { return n_z * n_v * depth; }
  Eigen::Index columns() const { return width + 1; }
  bool reduced() const { return basis.size() > 0; }
  auto output_block() const { return f_n_w.bottomRows(n_w * depth); }
};

// Definitional, entrywise assembly of the window matrix: column j is
// col(kron(z_j, v_j), ..., kron(z_{j+depth-1}, v_{j+depth-1})). The builder
// uses the block Khatri-Rao factorization of the two Hankel matrices and
// cross-checks it against this path in debug builds.
Matrix lemma_window_matrix(const Matrix& z, const Matrix& v, Eigen::Index depth,
                           Eigen::Index width);

// Builds F_N and F_N^w from aligned lifted signals. z and v need L >= N
// columns (then T = L - N); w needs at least L + 1 columns because the output
// windows reach one step past the last lifted pair.
LemmaData build_lemma_data(const Matrix& z, const Matrix& v, const Matrix& w,
                           Eigen::Index depth);

// Convenience overload: lifts the trajectory pointwise first (z_t from the
// states, v_t from the inputs, w_t from the outputs).
LemmaData build_lemma_data(const Trajectory& traj, const ObservableMap& psi_x,
                           const ObservableMap& psi_u, const ObservableMap& psi_y,
                           Eigen::Index depth);

// Optional row reduction of the regressor block: keeps the leading SVD modes
// holding `energy` of the singular-value mass and stores the basis so query
// windows are projected consistently.
LemmaData reduce_lemma_rows(const LemmaData& data, double energy);

struct PeReport {
  bool full_row_rank = false;
  Eigen::Index rank = 0;
  double smallest_sv = 0.0;
};

// Persistency-of-excitation check: SVD row-rank verdict on F_N. A positive
// tolerance is relative to the largest singular value; tolerance <= 0 selects
// the library-wide relative cutoff.
PeReport pe_check(const LemmaData& data, double tolerance = 0.0);

struct WindowQuery {
  Vector window;             // stacked (z kron v) over the query steps
  Matrix known_prefix;       // optional recorded outputs ahead of the window
  Eigen::Index horizon = 0;  // requested depth; 0 = take the data's N
};

// Stacks the window starting at column `start` of the lifted signals.
WindowQuery make_query(const Matrix& z, const Matrix& v, Eigen::Index start,
                       Eigen::Index depth);

struct GSolution {
  Vector g;
  double residual = 0.0;  // ||F_N g - query||
};

// Least-squares coefficients with F_N g ~= query (ridge gamma). gamma = 0
// returns the minimum-norm solution and requires F_N full row rank.
GSolution solve_g(const LemmaData& data, const WindowQuery& query, double gamma);

// Multi-step prediction w*_{[t+1, t+N]} = output block of F_N^w times g.
Vector predict_outputs(const LemmaData& data, const WindowQuery& query, double gamma);

struct ConsistencyReport {
  double max_abs = 0.0;    // entrywise max of the discrepancy
  double frobenius = 0.0;  // Frobenius norm of the discrepancy
};

// Checks that the output block of F_N^w equals blockdiag(CK, ..., CK) F_N,
// which holds up to fit residual for a model fitted on the same lifted data.
ConsistencyReport verify_lemma_consistency(const LemmaData& data, const KoopmanModel& model);

// CSV blocks plus a JSON manifest in `dir`; load round-trips bit-exactly.
void save_lemma_data(const LemmaData& data, const std::string& dir);
LemmaData load_lemma_data(const std::string& dir);

}  // namespace geko

#endif  // GEKO_LEMMA_HPP
