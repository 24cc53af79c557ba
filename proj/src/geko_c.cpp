#include "geko/geko.h"

#include "geko/common.hpp"
#include "geko/csv.hpp"
#include "geko/dynamics.hpp"
#include "geko/koopman.hpp"
#include "geko/lemma.hpp"
#include "geko/observables.hpp"
#include "geko/serialize.hpp"

#include <new>
#include <string>
#include <utility>
#include <vector>

struct geko_matrix {
  geko::Matrix m;
};

struct geko_observable {
  geko::ObservableMap map;
};

struct geko_system {
  geko::System sys;
};

struct geko_trajectory {
  geko::Trajectory traj;
};

struct geko_model {
  geko::KoopmanModel model;
};

struct geko_lemma {
  geko::LemmaData data;
};

namespace {

thread_local std::string t_last_error;

geko_status fail(geko_status code, const std::string& msg) {
  t_last_error = msg;
  return code;
}

template <typename Fn>
geko_status guarded(Fn&& fn) {
  try {
    fn();
    return GEKO_OK;
  } catch (const geko::ParamError& e) {
    return fail(GEKO_ERR_PARAM, e.what());
  } catch (const geko::DimensionError& e) {
    return fail(GEKO_ERR_DIM, e.what());
  } catch (const geko::RankError& e) {
    return fail(GEKO_ERR_RANK, e.what());
  } catch (const geko::DivergenceError& e) {
    return fail(GEKO_ERR_DIVERGED, e.what());
  } catch (const geko::IoError& e) {
    return fail(GEKO_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GEKO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GEKO_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* msg) {
  if (!ok) throw geko::ParamError(msg);
}

geko::Vector to_vector(const double* data, int64_t len, const char* what) {
  require(data != nullptr || len == 0, what);
  geko::Vector v(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = data[i];
  return v;
}

geko::Box to_box(const double* lo, const double* hi, int64_t dim) {
  return geko::Box(to_vector(lo, dim, "box bounds are null"),
                   to_vector(hi, dim, "box bounds are null"));
}

geko_matrix* wrap(geko::Matrix m) { return new geko_matrix{std::move(m)}; }

std::vector<std::string> to_comments(const char* const* comments, int64_t count) {
  require(comments != nullptr || count == 0, "comment array is null");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    require(comments[i] != nullptr, "comment entry is null");
    out.emplace_back(comments[i]);
  }
  return out;
}

// Rebuilds the lifted columns of a stacked (KIC) model so the linear decoder
// can be regressed after the fact.
void attach_decoder(geko::KoopmanModel& model, const geko::Matrix& x, const geko::Matrix& u,
                    double gamma) {
  geko::LiftedData data;
  data.z_x.resize(model.psi_x.output_dim, x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    geko::Vector point(x.rows() + u.rows());
    point << x.col(t), u.col(t);
    data.z_x.col(t) = model.psi_x.eval(point);
  }
  data.x_raw = x;
  model.d = geko::fit_decoder(data, gamma);
}

}  // namespace

extern "C" {

const char* geko_last_error(void) { return t_last_error.c_str(); }

const char* geko_version(void) { return "0.1.0"; }

/* ---------------------------------------------------------------- matrix */

geko_status geko_matrix_create(int64_t rows, int64_t cols, const double* data,
                               geko_matrix** out) {
  return guarded([&] {
    require(out != nullptr, "geko_matrix_create: out is null");
    require(rows >= 0 && cols >= 0, "geko_matrix_create: negative shape");
    geko::Matrix m = geko::Matrix::Zero(static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(cols));
    if (data != nullptr) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          m(i, j) = data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                         static_cast<std::size_t>(j)];
        }
      }
    }
    *out = wrap(std::move(m));
  });
}

void geko_matrix_free(geko_matrix* m) { delete m; }

int64_t geko_matrix_rows(const geko_matrix* m) { return m ? m->m.rows() : 0; }

int64_t geko_matrix_cols(const geko_matrix* m) { return m ? m->m.cols() : 0; }

geko_status geko_matrix_get(const geko_matrix* m, int64_t row, int64_t col, double* out) {
  return guarded([&] {
    require(m != nullptr && out != nullptr, "geko_matrix_get: null argument");
    if (row < 0 || row >= m->m.rows() || col < 0 || col >= m->m.cols()) {
      throw geko::DimensionError("geko_matrix_get: index out of range");
    }
    *out = m->m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  });
}

geko_status geko_matrix_copy_data(const geko_matrix* m, double* out) {
  return guarded([&] {
    require(m != nullptr && out != nullptr, "geko_matrix_copy_data: null argument");
    for (Eigen::Index i = 0; i < m->m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m->m.cols(); ++j) {
        out[static_cast<std::size_t>(i) * static_cast<std::size_t>(m->m.cols()) +
            static_cast<std::size_t>(j)] = m->m(i, j);
      }
    }
  });
}

geko_status geko_matrix_read_csv(const char* path, geko_matrix** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "geko_matrix_read_csv: null argument");
    *out = wrap(geko::read_matrix_csv(path));
  });
}

geko_status geko_matrix_write_csv(const geko_matrix* m, const char* path,
                                  const char* const* comments, int64_t comment_count) {
  return guarded([&] {
    require(m != nullptr && path != nullptr, "geko_matrix_write_csv: null argument");
    geko::write_matrix_csv(path, m->m, to_comments(comments, comment_count));
  });
}

/* ----------------------------------------------------------- observables */

geko_status geko_sample_centers(const double* lo, const double* hi, int64_t dim,
                                int64_t count, geko_center_method method, uint64_t seed,
                                geko_matrix** out) {
  return guarded([&] {
    require(out != nullptr, "geko_sample_centers: out is null");
    const geko::CenterMethod m = method == GEKO_CENTERS_GAUSSIAN
                                     ? geko::CenterMethod::kGaussian
                                     : geko::CenterMethod::kUniform;
    *out = wrap(geko::sample_centers(to_box(lo, hi, dim), static_cast<Eigen::Index>(count),
                                     m, seed));
  });
}

geko_status geko_observable_identity(int64_t dim, geko_observable** out) {
  return guarded([&] {
    require(out != nullptr, "geko_observable_identity: out is null");
    *out = new geko_observable{geko::identity_map(static_cast<Eigen::Index>(dim))};
  });
}

geko_status geko_observable_affine(int64_t dim, geko_observable** out) {
  return guarded([&] {
    require(out != nullptr, "geko_observable_affine: out is null");
    *out = new geko_observable{geko::affine_map(static_cast<Eigen::Index>(dim))};
  });
}

geko_status geko_observable_constant_one(int64_t dim, geko_observable** out) {
  return guarded([&] {
    require(out != nullptr, "geko_observable_constant_one: out is null");
    *out = new geko_observable{geko::constant_one_map(static_cast<Eigen::Index>(dim))};
  });
}

geko_status geko_observable_imq(const geko_matrix* centers, double sigma, double beta,
                                const double* lo, const double* hi, int64_t dim,
                                uint64_t center_seed, geko_observable** out) {
  return guarded([&] {
    require(centers != nullptr && out != nullptr, "geko_observable_imq: null argument");
    *out = new geko_observable{
        geko::imq_map(centers->m, sigma, beta, to_box(lo, hi, dim), center_seed)};
  });
}

geko_status geko_observable_stacked_imq(const geko_matrix* centers, double sigma,
                                        const double* lo, const double* hi, int64_t dim,
                                        uint64_t center_seed, geko_observable** out) {
  return guarded([&] {
    require(centers != nullptr && out != nullptr,
            "geko_observable_stacked_imq: null argument");
    *out = new geko_observable{
        geko::stacked_imq_map(centers->m, sigma, to_box(lo, hi, dim), center_seed)};
  });
}

geko_status geko_observable_legendre(const double* lo, const double* hi, int64_t dim,
                                     int64_t max_degree, geko_observable** out) {
  return guarded([&] {
    require(out != nullptr, "geko_observable_legendre: out is null");
    *out = new geko_observable{
        geko::legendre_map(to_box(lo, hi, dim), static_cast<Eigen::Index>(max_degree))};
  });
}

void geko_observable_free(geko_observable* obs) { delete obs; }

int64_t geko_observable_input_dim(const geko_observable* obs) {
  return obs ? obs->map.input_dim : 0;
}

int64_t geko_observable_output_dim(const geko_observable* obs) {
  return obs ? obs->map.output_dim : 0;
}

geko_status geko_observable_eval(const geko_observable* obs, const double* point,
                                 int64_t point_len, double* out) {
  return guarded([&] {
    require(obs != nullptr && out != nullptr, "geko_observable_eval: null argument");
    const geko::Vector result =
        obs->map.eval(to_vector(point, point_len, "geko_observable_eval: point is null"));
    for (Eigen::Index i = 0; i < result.size(); ++i) out[i] = result[i];
  });
}

/* ------------------------------------------------- systems & trajectories */

geko_status geko_system_vdp(double mu, double ts, int substeps, geko_system** out) {
  return guarded([&] {
    require(out != nullptr, "geko_system_vdp: out is null");
    *out = new geko_system{geko::vdp_system(mu, ts, substeps)};
  });
}

geko_status geko_system_vdp_boxed(double mu, double ts, int substeps, const double* x_lo,
                                  const double* x_hi, const double* u_lo,
                                  const double* u_hi, geko_system** out) {
  return guarded([&] {
    require(out != nullptr, "geko_system_vdp_boxed: out is null");
    *out = new geko_system{geko::vdp_system(mu, ts, substeps, to_box(x_lo, x_hi, 2),
                                            to_box(u_lo, u_hi, 1))};
  });
}

void geko_system_free(geko_system* sys) { delete sys; }

int64_t geko_system_state_dim(const geko_system* sys) {
  return sys ? sys->sys.state_dim : 0;
}

int64_t geko_system_input_dim(const geko_system* sys) {
  return sys ? sys->sys.input_dim : 0;
}

geko_status geko_sinusoid_input(double amplitude, double frequency, int64_t length,
                                geko_matrix** out) {
  return guarded([&] {
    require(out != nullptr, "geko_sinusoid_input: out is null");
    *out = wrap(geko::sinusoid_input(amplitude, frequency, static_cast<Eigen::Index>(length)));
  });
}

geko_status geko_rollout(const geko_system* sys, const double* x0, int64_t x0_len,
                         const geko_matrix* inputs, geko_trajectory** out) {
  return guarded([&] {
    require(sys != nullptr && inputs != nullptr && out != nullptr,
            "geko_rollout: null argument");
    *out = new geko_trajectory{geko::rollout(
        sys->sys, to_vector(x0, x0_len, "geko_rollout: x0 is null"), inputs->m)};
  });
}

geko_status geko_sample_snapshots(const geko_system* sys, int64_t count,
                                  geko_sampler sampler, uint64_t seed, geko_matrix** x,
                                  geko_matrix** u, geko_matrix** x_next) {
  return guarded([&] {
    require(sys != nullptr && x != nullptr && u != nullptr && x_next != nullptr,
            "geko_sample_snapshots: null argument");
    geko::Sampler s = geko::Sampler::kUniformBox;
    switch (sampler) {
      case GEKO_SAMPLE_UNIFORM: s = geko::Sampler::kUniformBox; break;
      case GEKO_SAMPLE_GAUSSIAN: s = geko::Sampler::kGaussian; break;
      case GEKO_SAMPLE_ROLLOUT: s = geko::Sampler::kRollout; break;
      case GEKO_SAMPLE_CENTER: s = geko::Sampler::kCenter; break;
    }
    geko::SnapshotBatch batch =
        geko::sample_snapshots(sys->sys, static_cast<Eigen::Index>(count), s, seed);
    *x = wrap(std::move(batch.x));
    *u = wrap(std::move(batch.u));
    *x_next = wrap(std::move(batch.x_next));
  });
}

geko_status geko_trajectory_create(const geko_matrix* states, const geko_matrix* inputs,
                                   const geko_matrix* outputs, double sampling_time,
                                   geko_trajectory** out) {
  return guarded([&] {
    require(states != nullptr && inputs != nullptr && out != nullptr,
            "geko_trajectory_create: null argument");
    if (states->m.cols() != inputs->m.cols() + 1) {
      throw geko::DimensionError(
          "geko_trajectory_create: states must have one more column than inputs");
    }
    if (outputs != nullptr && outputs->m.size() > 0 &&
        outputs->m.cols() != states->m.cols()) {
      throw geko::DimensionError(
          "geko_trajectory_create: outputs must align with states");
    }
    geko::Trajectory traj;
    traj.states = states->m;
    traj.inputs = inputs->m;
    if (outputs != nullptr) traj.outputs = outputs->m;
    traj.sampling_time = sampling_time;
    *out = new geko_trajectory{std::move(traj)};
  });
}

void geko_trajectory_free(geko_trajectory* traj) { delete traj; }

int64_t geko_trajectory_length(const geko_trajectory* traj) {
  return traj ? traj->traj.length() : 0;
}

double geko_trajectory_sampling_time(const geko_trajectory* traj) {
  return traj ? traj->traj.sampling_time : 0.0;
}

geko_status geko_trajectory_states(const geko_trajectory* traj, geko_matrix** out) {
  return guarded([&] {
    require(traj != nullptr && out != nullptr, "geko_trajectory_states: null argument");
    *out = wrap(traj->traj.states);
  });
}

geko_status geko_trajectory_inputs(const geko_trajectory* traj, geko_matrix** out) {
  return guarded([&] {
    require(traj != nullptr && out != nullptr, "geko_trajectory_inputs: null argument");
    *out = wrap(traj->traj.inputs);
  });
}

geko_status geko_trajectory_outputs(const geko_trajectory* traj, geko_matrix** out) {
  return guarded([&] {
    require(traj != nullptr && out != nullptr, "geko_trajectory_outputs: null argument");
    require(traj->traj.outputs.size() > 0, "trajectory carries no outputs");
    *out = wrap(traj->traj.outputs);
  });
}

geko_status geko_trajectory_read_csv(const char* path, geko_trajectory** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "geko_trajectory_read_csv: null argument");
    *out = new geko_trajectory{geko::read_trajectory_csv(path)};
  });
}

geko_status geko_trajectory_write_csv(const geko_trajectory* traj, const char* path,
                                      const char* const* comments, int64_t comment_count) {
  return guarded([&] {
    require(traj != nullptr && path != nullptr, "geko_trajectory_write_csv: null argument");
    geko::write_trajectory_csv(path, traj->traj, to_comments(comments, comment_count));
  });
}

/* ----------------------------------------------------------------- models */

geko_status geko_fit_geko(const geko_matrix* x, const geko_matrix* u,
                          const geko_matrix* x_next, const geko_observable* psi_x,
                          const geko_observable* psi_u, double gamma, int with_decoder,
                          geko_model** out) {
  return guarded([&] {
    require(x != nullptr && u != nullptr && x_next != nullptr && psi_x != nullptr &&
                psi_u != nullptr && out != nullptr,
            "geko_fit_geko: null argument");
    geko::SnapshotBatch batch;
    batch.x = x->m;
    batch.u = u->m;
    batch.x_next = x_next->m;
    const geko::LiftedData data = geko::lift_snapshots(batch, psi_x->map, psi_u->map);
    geko::KoopmanModel model = geko::fit_geko(data, psi_x->map, psi_u->map, gamma);
    if (with_decoder) model.d = geko::fit_decoder(data, gamma);
    *out = new geko_model{std::move(model)};
  });
}

geko_status geko_fit_geko_trajectory(const geko_trajectory* traj,
                                     const geko_observable* psi_x,
                                     const geko_observable* psi_u, double gamma,
                                     int with_decoder, geko_model** out) {
  return guarded([&] {
    require(traj != nullptr && psi_x != nullptr && psi_u != nullptr && out != nullptr,
            "geko_fit_geko_trajectory: null argument");
    const geko::LiftedData data = geko::lift_trajectory(traj->traj, psi_x->map, psi_u->map);
    geko::KoopmanModel model = geko::fit_geko(data, psi_x->map, psi_u->map, gamma);
    if (with_decoder) model.d = geko::fit_decoder(data, gamma);
    *out = new geko_model{std::move(model)};
  });
}

geko_status geko_fit_direct(const geko_matrix* x, const geko_matrix* u,
                            const geko_matrix* x_next, const geko_observable* psi_x,
                            const geko_observable* psi_u, double gamma, geko_model** out) {
  return guarded([&] {
    require(x != nullptr && u != nullptr && x_next != nullptr && psi_x != nullptr &&
                psi_u != nullptr && out != nullptr,
            "geko_fit_direct: null argument");
    geko::SnapshotBatch batch;
    batch.x = x->m;
    batch.u = u->m;
    batch.x_next = x_next->m;
    const geko::LiftedData data = geko::lift_snapshots(batch, psi_x->map, psi_u->map);
    *out = new geko_model{geko::fit_direct(data, psi_x->map, psi_u->map, gamma)};
  });
}

geko_status geko_fit_kic(const geko_matrix* x, const geko_matrix* u,
                         const geko_matrix* x_next, const geko_matrix* centers,
                         double sigma, double gamma, geko_kic_target target,
                         int with_decoder, geko_model** out) {
  return guarded([&] {
    require(x != nullptr && u != nullptr && x_next != nullptr && centers != nullptr &&
                out != nullptr,
            "geko_fit_kic: null argument");
    geko::SnapshotBatch batch;
    batch.x = x->m;
    batch.u = u->m;
    batch.x_next = x_next->m;
    const geko::KicTarget t =
        target == GEKO_KIC_RAW ? geko::KicTarget::kRaw : geko::KicTarget::kLifted;
    geko::KoopmanModel model = geko::fit_kic(batch, centers->m, sigma, gamma, t);
    if (with_decoder) attach_decoder(model, batch.x, batch.u, gamma);
    *out = new geko_model{std::move(model)};
  });
}

geko_status geko_fit_kic_trajectory(const geko_trajectory* traj, const geko_matrix* centers,
                                    double sigma, double gamma, geko_kic_target target,
                                    int with_decoder, geko_model** out) {
  return guarded([&] {
    require(traj != nullptr && centers != nullptr && out != nullptr,
            "geko_fit_kic_trajectory: null argument");
    const geko::KicTarget t =
        target == GEKO_KIC_RAW ? geko::KicTarget::kRaw : geko::KicTarget::kLifted;
    geko::KoopmanModel model = geko::fit_kic(traj->traj, centers->m, sigma, gamma, t);
    if (with_decoder) {
      const Eigen::Index steps = traj->traj.length();
      attach_decoder(model, traj->traj.states.leftCols(steps), traj->traj.inputs, gamma);
    }
    *out = new geko_model{std::move(model)};
  });
}

geko_status geko_fit_havok(const geko_trajectory* traj, int64_t order, double gamma,
                           geko_model** out) {
  return guarded([&] {
    require(traj != nullptr && out != nullptr, "geko_fit_havok: null argument");
    const geko::HavokLift lift = geko::havok_lift(traj->traj, order, 0, 0);
    geko::KoopmanModel model =
        geko::fit_geko(lift.data, geko::delay_map(traj->traj.states.rows(), order),
                       geko::identity_map(traj->traj.inputs.rows()), gamma);
    model.diagnostics.method = "havok";
    *out = new geko_model{std::move(model)};
  });
}

void geko_model_free(geko_model* model) { delete model; }

int64_t geko_model_nz(const geko_model* model) { return model ? model->model.n_z() : 0; }

int64_t geko_model_nv(const geko_model* model) { return model ? model->model.n_v() : 0; }

int geko_model_has(const geko_model* model, geko_model_block block) {
  if (model == nullptr) return 0;
  switch (block) {
    case GEKO_BLOCK_K: return model->model.has_k() ? 1 : 0;
    case GEKO_BLOCK_KX: return model->model.has_k_x() ? 1 : 0;
    case GEKO_BLOCK_C: return model->model.has_c() ? 1 : 0;
    case GEKO_BLOCK_D: return model->model.has_d() ? 1 : 0;
  }
  return 0;
}

geko_status geko_model_matrix(const geko_model* model, geko_model_block block,
                              geko_matrix** out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "geko_model_matrix: null argument");
    const geko::Matrix* source = nullptr;
    switch (block) {
      case GEKO_BLOCK_K: source = &model->model.k; break;
      case GEKO_BLOCK_KX: source = &model->model.k_x; break;
      case GEKO_BLOCK_C: source = &model->model.c; break;
      case GEKO_BLOCK_D: source = &model->model.d; break;
    }
    require(source != nullptr && source->size() > 0,
            "geko_model_matrix: the requested block was never fitted");
    *out = wrap(*source);
  });
}

const char* geko_model_method(const geko_model* model) {
  return model ? model->model.diagnostics.method.c_str() : "";
}

geko_status geko_model_diagnostics(const geko_model* model, double* residual,
                                   int64_t* rank, double* smallest_sv, double* gamma,
                                   int64_t* columns) {
  return guarded([&] {
    require(model != nullptr, "geko_model_diagnostics: model is null");
    if (residual) *residual = model->model.diagnostics.residual;
    if (rank) *rank = model->model.diagnostics.rank;
    if (smallest_sv) *smallest_sv = model->model.diagnostics.smallest_sv;
    if (gamma) *gamma = model->model.diagnostics.gamma;
    if (columns) *columns = model->model.diagnostics.columns;
  });
}

geko_status geko_model_save(const geko_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "geko_model_save: null argument");
    geko::save_model(model->model, path);
  });
}

geko_status geko_model_load(const char* path, geko_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "geko_model_load: null argument");
    *out = new geko_model{geko::load_model(path)};
  });
}

geko_status geko_model_lift_state(const geko_model* model, const double* x, int64_t x_len,
                                  double* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "geko_model_lift_state: null argument");
    const geko::Vector z = model->model.psi_x.eval(
        to_vector(x, x_len, "geko_model_lift_state: point is null"));
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = z[i];
  });
}

geko_status geko_model_lift_input(const geko_model* model, const double* u, int64_t u_len,
                                  double* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "geko_model_lift_input: null argument");
    const geko::Vector v = model->model.psi_u.eval(
        to_vector(u, u_len, "geko_model_lift_input: point is null"));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i];
  });
}

geko_status geko_propagate(const geko_model* model, const double* z0, int64_t z0_len,
                           const geko_matrix* v_seq, geko_matrix** z_out,
                           geko_matrix** w_out) {
  return guarded([&] {
    require(model != nullptr && v_seq != nullptr && z_out != nullptr,
            "geko_propagate: null argument");
    geko::LiftedTrajectory lifted = geko::propagate(
        model->model, to_vector(z0, z0_len, "geko_propagate: z0 is null"), v_seq->m);
    *z_out = wrap(std::move(lifted.z));
    if (w_out != nullptr) {
      *w_out = lifted.w.size() > 0 ? wrap(std::move(lifted.w)) : nullptr;
    }
  });
}

geko_status geko_error_surface(const geko_model* model, const geko_trajectory* traj,
                               geko_matrix** out) {
  return guarded([&] {
    require(model != nullptr && traj != nullptr && out != nullptr,
            "geko_error_surface: null argument");
    *out = wrap(geko::lifted_error_surface(model->model, traj->traj));
  });
}

geko_status geko_decode(const geko_model* model, const geko_matrix* z, geko_matrix** out) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && out != nullptr,
            "geko_decode: null argument");
    require(model->model.has_d(), "geko_decode: the model has no decoder block");
    if (z->m.rows() != model->model.d.cols()) {
      throw geko::DimensionError("geko_decode: z rows do not match the decoder");
    }
    *out = wrap(model->model.d * z->m);
  });
}

/* ------------------------------------------------------------------ lemma */

geko_status geko_lemma_build(const geko_matrix* z, const geko_matrix* v,
                             const geko_matrix* w, int64_t depth, geko_lemma** out) {
  return guarded([&] {
    require(z != nullptr && v != nullptr && w != nullptr && out != nullptr,
            "geko_lemma_build: null argument");
    *out = new geko_lemma{
        geko::build_lemma_data(z->m, v->m, w->m, static_cast<Eigen::Index>(depth))};
  });
}

geko_status geko_lemma_build_trajectory(const geko_trajectory* traj,
                                        const geko_observable* psi_x,
                                        const geko_observable* psi_u,
                                        const geko_observable* psi_y, int64_t depth,
                                        geko_lemma** out) {
  return guarded([&] {
    require(traj != nullptr && psi_x != nullptr && psi_u != nullptr && psi_y != nullptr &&
                out != nullptr,
            "geko_lemma_build_trajectory: null argument");
    *out = new geko_lemma{geko::build_lemma_data(traj->traj, psi_x->map, psi_u->map,
                                                 psi_y->map,
                                                 static_cast<Eigen::Index>(depth))};
  });
}

void geko_lemma_free(geko_lemma* lemma) { delete lemma; }

int64_t geko_lemma_depth(const geko_lemma* lemma) { return lemma ? lemma->data.depth : 0; }

int64_t geko_lemma_width(const geko_lemma* lemma) { return lemma ? lemma->data.width : 0; }

int64_t geko_lemma_nz(const geko_lemma* lemma) { return lemma ? lemma->data.n_z : 0; }

int64_t geko_lemma_nv(const geko_lemma* lemma) { return lemma ? lemma->data.n_v : 0; }

int64_t geko_lemma_nw(const geko_lemma* lemma) { return lemma ? lemma->data.n_w : 0; }

int64_t geko_lemma_rank(const geko_lemma* lemma) { return lemma ? lemma->data.rank : 0; }

geko_status geko_lemma_pe(const geko_lemma* lemma, double tolerance, int* full_row_rank,
                          int64_t* rank, double* smallest_sv) {
  return guarded([&] {
    require(lemma != nullptr, "geko_lemma_pe: lemma is null");
    const geko::PeReport report = geko::pe_check(lemma->data, tolerance);
    if (full_row_rank) *full_row_rank = report.full_row_rank ? 1 : 0;
    if (rank) *rank = report.rank;
    if (smallest_sv) *smallest_sv = report.smallest_sv;
  });
}

geko_status geko_lemma_predict(const geko_lemma* lemma, const double* window,
                               int64_t window_len, double gamma, double* out,
                               double* residual) {
  return guarded([&] {
    require(lemma != nullptr && out != nullptr, "geko_lemma_predict: null argument");
    geko::WindowQuery query;
    query.window = to_vector(window, window_len, "geko_lemma_predict: window is null");
    const geko::GSolution sol = geko::solve_g(lemma->data, query, gamma);
    const geko::Vector prediction = lemma->data.output_block() * sol.g;
    for (Eigen::Index i = 0; i < prediction.size(); ++i) out[i] = prediction[i];
    if (residual) *residual = sol.residual;
  });
}

geko_status geko_lemma_save(const geko_lemma* lemma, const char* dir) {
  return guarded([&] {
    require(lemma != nullptr && dir != nullptr, "geko_lemma_save: null argument");
    geko::save_lemma_data(lemma->data, dir);
  });
}

geko_status geko_lemma_load(const char* dir, geko_lemma** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "geko_lemma_load: null argument");
    *out = new geko_lemma{geko::load_lemma_data(dir)};
  });
}

} /* extern "C" */
