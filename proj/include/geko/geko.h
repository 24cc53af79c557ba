#ifndef GEKO_GEKO_H
#define GEKO_GEKO_H

/* C interface to the geko library: opaque handles, status codes, and a
 * thread-local error message. All matrices cross the boundary either as
 * geko_matrix handles or as row-major double buffers. Every function that
 * can fail returns a geko_status; on failure the out-parameters are left
 * untouched and geko_last_error() describes the problem. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum geko_status {
  GEKO_OK = 0,
  GEKO_ERR_PARAM = 1,    /* invalid argument or configuration */
  GEKO_ERR_DIM = 2,      /* dimension mismatch */
  GEKO_ERR_RANK = 3,     /* numerical rank deficiency at gamma = 0 */
  GEKO_ERR_DIVERGED = 4, /* non-finite state during simulation/propagation */
  GEKO_ERR_IO = 5,       /* file or document problem */
  GEKO_ERR_INTERNAL = 6, /* unexpected failure */
} geko_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* geko_last_error(void);

const char* geko_version(void);

/* ---------------------------------------------------------------- matrix */

typedef struct geko_matrix geko_matrix;

/* data is row-major rows*cols doubles; pass NULL for a zero matrix. */
geko_status geko_matrix_create(int64_t rows, int64_t cols, const double* data,
                               geko_matrix** out);
void geko_matrix_free(geko_matrix* m);
int64_t geko_matrix_rows(const geko_matrix* m);
int64_t geko_matrix_cols(const geko_matrix* m);
geko_status geko_matrix_get(const geko_matrix* m, int64_t row, int64_t col, double* out);
/* Copies all entries into a caller buffer of rows*cols doubles, row-major. */
geko_status geko_matrix_copy_data(const geko_matrix* m, double* out);
geko_status geko_matrix_read_csv(const char* path, geko_matrix** out);
/* comments (may be NULL when count is 0) are written as leading # lines. */
geko_status geko_matrix_write_csv(const geko_matrix* m, const char* path,
                                  const char* const* comments, int64_t comment_count);

/* ----------------------------------------------------------- observables */

typedef struct geko_observable geko_observable;

typedef enum geko_center_method {
  GEKO_CENTERS_UNIFORM = 0,
  GEKO_CENTERS_GAUSSIAN = 1,
} geko_center_method;

/* Draws `count` center columns inside the box [lo, hi] (dim entries each). */
geko_status geko_sample_centers(const double* lo, const double* hi, int64_t dim,
                                int64_t count, geko_center_method method, uint64_t seed,
                                geko_matrix** out);

geko_status geko_observable_identity(int64_t dim, geko_observable** out);
geko_status geko_observable_affine(int64_t dim, geko_observable** out);
geko_status geko_observable_constant_one(int64_t dim, geko_observable** out);
geko_status geko_observable_imq(const geko_matrix* centers, double sigma, double beta,
                                const double* lo, const double* hi, int64_t dim,
                                uint64_t center_seed, geko_observable** out);
/* Centers live in the stacked (state, input) space of dimension dim. */
geko_status geko_observable_stacked_imq(const geko_matrix* centers, double sigma,
                                        const double* lo, const double* hi, int64_t dim,
                                        uint64_t center_seed, geko_observable** out);
geko_status geko_observable_legendre(const double* lo, const double* hi, int64_t dim,
                                     int64_t max_degree, geko_observable** out);
void geko_observable_free(geko_observable* obs);
int64_t geko_observable_input_dim(const geko_observable* obs);
int64_t geko_observable_output_dim(const geko_observable* obs);
/* point: input_dim doubles; out: output_dim doubles. */
geko_status geko_observable_eval(const geko_observable* obs, const double* point,
                                 int64_t point_len, double* out);

/* ------------------------------------------------- systems & trajectories */

typedef struct geko_system geko_system;
typedef struct geko_trajectory geko_trajectory;

/* Van der Pol oscillator discretized by RK4 (mu, sampling time, substeps). */
geko_status geko_system_vdp(double mu, double ts, int substeps, geko_system** out);
/* Same oscillator with explicit sampling boxes: x_lo/x_hi hold 2 entries,
 * u_lo/u_hi hold 1. */
geko_status geko_system_vdp_boxed(double mu, double ts, int substeps, const double* x_lo,
                                  const double* x_hi, const double* u_lo,
                                  const double* u_hi, geko_system** out);
void geko_system_free(geko_system* sys);
int64_t geko_system_state_dim(const geko_system* sys);
int64_t geko_system_input_dim(const geko_system* sys);

/* u_t = amplitude * sin(frequency * t), t = 0..length-1, as a 1 x length row. */
geko_status geko_sinusoid_input(double amplitude, double frequency, int64_t length,
                                geko_matrix** out);

geko_status geko_rollout(const geko_system* sys, const double* x0, int64_t x0_len,
                         const geko_matrix* inputs, geko_trajectory** out);

typedef enum geko_sampler {
  GEKO_SAMPLE_UNIFORM = 0,
  GEKO_SAMPLE_GAUSSIAN = 1,
  GEKO_SAMPLE_ROLLOUT = 2,
  GEKO_SAMPLE_CENTER = 3,
} geko_sampler;

/* One-step snapshot triples from the system's boxes; deterministic per seed. */
geko_status geko_sample_snapshots(const geko_system* sys, int64_t count,
                                  geko_sampler sampler, uint64_t seed, geko_matrix** x,
                                  geko_matrix** u, geko_matrix** x_next);

/* outputs may be NULL (then the trajectory carries none). */
geko_status geko_trajectory_create(const geko_matrix* states, const geko_matrix* inputs,
                                   const geko_matrix* outputs, double sampling_time,
                                   geko_trajectory** out);
void geko_trajectory_free(geko_trajectory* traj);
int64_t geko_trajectory_length(const geko_trajectory* traj);
double geko_trajectory_sampling_time(const geko_trajectory* traj);
geko_status geko_trajectory_states(const geko_trajectory* traj, geko_matrix** out);
geko_status geko_trajectory_inputs(const geko_trajectory* traj, geko_matrix** out);
/* Fails with GEKO_ERR_PARAM when the trajectory has no outputs. */
geko_status geko_trajectory_outputs(const geko_trajectory* traj, geko_matrix** out);
geko_status geko_trajectory_read_csv(const char* path, geko_trajectory** out);
geko_status geko_trajectory_write_csv(const geko_trajectory* traj, const char* path,
                                      const char* const* comments, int64_t comment_count);

/* ----------------------------------------------------------------- models */

typedef struct geko_model geko_model;

typedef enum geko_kic_target {
  GEKO_KIC_LIFTED = 0,
  GEKO_KIC_RAW = 1,
} geko_kic_target;

/* Khatri-Rao EDMD on snapshot triples; lifts internally with the two maps.
 * with_decoder additionally fits the linear decoder D (x ~ D z). */
geko_status geko_fit_geko(const geko_matrix* x, const geko_matrix* u,
                          const geko_matrix* x_next, const geko_observable* psi_x,
                          const geko_observable* psi_u, double gamma, int with_decoder,
                          geko_model** out);
geko_status geko_fit_geko_trajectory(const geko_trajectory* traj,
                                     const geko_observable* psi_x,
                                     const geko_observable* psi_u, double gamma,
                                     int with_decoder, geko_model** out);
/* Decoder-free direct-to-state regression (fills the K_x block). */
geko_status geko_fit_direct(const geko_matrix* x, const geko_matrix* u,
                            const geko_matrix* x_next, const geko_observable* psi_x,
                            const geko_observable* psi_u, double gamma, geko_model** out);
/* Stacked-observable KIC baseline on snapshot triples (input held) or on a
 * recorded trajectory (recorded next input). */
geko_status geko_fit_kic(const geko_matrix* x, const geko_matrix* u,
                         const geko_matrix* x_next, const geko_matrix* centers,
                         double sigma, double gamma, geko_kic_target target,
                         int with_decoder, geko_model** out);
geko_status geko_fit_kic_trajectory(const geko_trajectory* traj, const geko_matrix* centers,
                                    double sigma, double gamma, geko_kic_target target,
                                    int with_decoder, geko_model** out);
/* Delay-embedding (HAVOK style) fit on a recorded trajectory: the state is
 * lifted into depth-`order` windows, inputs stay raw. */
geko_status geko_fit_havok(const geko_trajectory* traj, int64_t order, double gamma,
                           geko_model** out);

void geko_model_free(geko_model* model);
int64_t geko_model_nz(const geko_model* model);
int64_t geko_model_nv(const geko_model* model);

typedef enum geko_model_block {
  GEKO_BLOCK_K = 0,
  GEKO_BLOCK_KX = 1,
  GEKO_BLOCK_C = 2,
  GEKO_BLOCK_D = 3,
} geko_model_block;

int geko_model_has(const geko_model* model, geko_model_block block);
/* Copies the requested block; GEKO_ERR_PARAM when it was never fitted. */
geko_status geko_model_matrix(const geko_model* model, geko_model_block block,
                              geko_matrix** out);
/* Method label of the fit; owned by the model handle. */
const char* geko_model_method(const geko_model* model);
geko_status geko_model_diagnostics(const geko_model* model, double* residual,
                                   int64_t* rank, double* smallest_sv, double* gamma,
                                   int64_t* columns);
geko_status geko_model_save(const geko_model* model, const char* path);
geko_status geko_model_load(const char* path, geko_model** out);

/* Initial lift z_0 = Psi_x(x): out holds nz doubles (for stacked liftings the
 * point is col(x, u), x_len = n + m). Inputs lift likewise to nv doubles. */
geko_status geko_model_lift_state(const geko_model* model, const double* x, int64_t x_len,
                                  double* out);
geko_status geko_model_lift_input(const geko_model* model, const double* u, int64_t u_len,
                                  double* out);

/* Iterates z+ = K (z kron v) over the columns of v_seq (nv x steps). z_out is
 * nz x (steps+1); w_out (optional, pass NULL to skip) is the output rollout
 * when the model carries C. */
geko_status geko_propagate(const geko_model* model, const double* z0, int64_t z0_len,
                           const geko_matrix* v_seq, geko_matrix** z_out,
                           geko_matrix** w_out);

/* Absolute lifted prediction error surface against a recorded trajectory. */
geko_status geko_error_surface(const geko_model* model, const geko_trajectory* traj,
                               geko_matrix** out);

/* Decoded states x = D z for each column of z; requires the decoder block. */
geko_status geko_decode(const geko_model* model, const geko_matrix* z, geko_matrix** out);

/* ------------------------------------------------------------------ lemma */

typedef struct geko_lemma geko_lemma;

geko_status geko_lemma_build(const geko_matrix* z, const geko_matrix* v,
                             const geko_matrix* w, int64_t depth, geko_lemma** out);
geko_status geko_lemma_build_trajectory(const geko_trajectory* traj,
                                        const geko_observable* psi_x,
                                        const geko_observable* psi_u,
                                        const geko_observable* psi_y, int64_t depth,
                                        geko_lemma** out);
void geko_lemma_free(geko_lemma* lemma);
int64_t geko_lemma_depth(const geko_lemma* lemma);
int64_t geko_lemma_width(const geko_lemma* lemma);
int64_t geko_lemma_nz(const geko_lemma* lemma);
int64_t geko_lemma_nv(const geko_lemma* lemma);
int64_t geko_lemma_nw(const geko_lemma* lemma);
int64_t geko_lemma_rank(const geko_lemma* lemma);
geko_status geko_lemma_pe(const geko_lemma* lemma, double tolerance, int* full_row_rank,
                          int64_t* rank, double* smallest_sv);
/* window: nz*nv*depth doubles; out: nw*depth doubles; residual may be NULL. */
geko_status geko_lemma_predict(const geko_lemma* lemma, const double* window,
                               int64_t window_len, double gamma, double* out,
                               double* residual);
geko_status geko_lemma_save(const geko_lemma* lemma, const char* dir);
geko_status geko_lemma_load(const char* dir, geko_lemma** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GEKO_GEKO_H */
