#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geko/linalg.hpp"
#include "geko/observables.hpp"
#include "support/test_util.hpp"

#include <cmath>

using namespace geko;
using namespace geko::testsupport;

namespace {

Vector vecl(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ObservableMap random_imq_map(Rng& rng, Eigen::Index dim, Eigen::Index k) {
  const Box box = Box::cube(dim, -2.0, 2.0);
  return imq_map(sample_centers(box, k, CenterMethod::kUniform, rng.next_u64()),
                 rng.uniform(0.5, 2.0), 1.0, box);
}

}  // namespace

TEST_CASE("imq_features fixed values") {
  Matrix centers(2, 2);
  centers << 0.0, 1.0, 0.0, 0.0;  // centers (0,0) and (1,0)
  const Vector at_center = imq_features(vecl({0, 0}), centers, 1.0, 1.0);
  CHECK(at_center[0] == 1.0);
  CHECK(at_center[1] == 0.5);  // distance^2 = 1, sigma = 1, beta = 1

  const Vector half_beta = imq_features(vecl({1, 0}), centers, 1.0, 0.5);
  CHECK(half_beta[0] == doctest::Approx(0.70710678118654752).epsilon(1e-15));
  CHECK(half_beta[1] == 1.0);

  CHECK_THROWS_AS(imq_features(vecl({0, 0}), centers, 0.0, 1.0), ParamError);
  CHECK_THROWS_AS(imq_features(vecl({0, 0}), centers, 1.0, -1.0), ParamError);
  CHECK_THROWS_AS(imq_features(vecl({0}), centers, 1.0, 1.0), DimensionError);
}

TEST_CASE("imq features lie in (0,1], reaching 1 exactly at centers") {
  run_cases(301, [](Rng& rng, int) {
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    const Matrix centers = random_matrix(rng, dim, k);
    const double sigma = rng.uniform(0.3, 3.0);
    const double beta = rng.uniform(0.3, 2.0);
    const Vector point = 5.0 * random_vector(rng, dim);
    const Vector f = imq_features(point, centers, sigma, beta);
    for (Eigen::Index i = 0; i < k; ++i) {
      CHECK(f[i] > 0.0);
      CHECK(f[i] <= 1.0);
      // Pointwise oracle straight from the formula.
      const double q = 1.0 + (centers.col(i) - point).squaredNorm() / (sigma * sigma);
      CHECK(f[i] == doctest::Approx(std::pow(q, -beta)).epsilon(1e-14));
    }
    const Eigen::Index pick = static_cast<Eigen::Index>(rng.next_u64() % k);
    const Vector at = imq_features(centers.col(pick), centers, sigma, beta);
    CHECK(at[pick] == 1.0);
    for (Eigen::Index i = 0; i < k; ++i) {
      if ((centers.col(i) - centers.col(pick)).squaredNorm() > 0.0) CHECK(at[i] < 1.0);
    }
  });
}

TEST_CASE("delay_features windows") {
  Matrix s(1, 3);
  s << 1, 2, 3;
  CHECK(delay_features(s, 1, 1) == vecl({2}));
  CHECK(delay_features(s, 0, 3) == vecl({1, 2, 3}));
  CHECK_THROWS_AS(delay_features(s, 1, 3), DimensionError);
  CHECK_THROWS_AS(delay_features(s, 0, 0), ParamError);
}

TEST_CASE("delay_features equal hankel columns") {
  run_cases(302, [](Rng& rng, int) {
    const Eigen::Index ns = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    const Eigen::Index depth = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    const Eigen::Index width = static_cast<Eigen::Index>(rng.next_u64() % 4);
    const Matrix s = random_matrix(rng, ns, depth + width);
    const Matrix h = hankel(s, depth, width);
    for (Eigen::Index j = 0; j <= width; ++j) {
      CHECK((h.col(j) - delay_features(s, j, depth)).lpNorm<Eigen::Infinity>() == 0.0);
    }
  });
}

TEST_CASE("kic_features reduce to IMQ on the concatenation") {
  Matrix origin = Matrix::Zero(3, 1);
  const Vector f = kic_features(vecl({1, 0}), vecl({0}), origin, 1.0);
  CHECK(f[0] == 0.5);

  Matrix c(3, 1);
  c << 0.5, -0.25, 0.75;
  const Vector hit = kic_features(vecl({0.5, -0.25}), vecl({0.75}), c, 2.0);
  CHECK(hit[0] == 1.0);

  run_cases(303, [](Rng& rng, int) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const Matrix centers = random_matrix(rng, n + m, k);
    const double sigma = rng.uniform(0.5, 2.0);
    const Vector x = random_vector(rng, n);
    const Vector u = random_vector(rng, m);
    Vector stacked(n + m);
    stacked << x, u;
    CHECK(kic_features(x, u, centers, sigma) == imq_features(stacked, centers, sigma, 1.0));
  });
}

TEST_CASE("sample_centers determinism, degenerate box, empirical mean") {
  const Box degenerate(vecl({1.5, -2.0}), vecl({1.5, -2.0}));
  for (CenterMethod m : {CenterMethod::kUniform, CenterMethod::kGaussian}) {
    const Matrix c = sample_centers(degenerate, 1, m, 99);
    CHECK(c.col(0) == vecl({1.5, -2.0}));
  }

  const Box box = Box::cube(2, -1.0, 3.0);
  CHECK(sample_centers(box, 7, CenterMethod::kUniform, 5) ==
        sample_centers(box, 7, CenterMethod::kUniform, 5));
  CHECK(sample_centers(box, 7, CenterMethod::kGaussian, 5) ==
        sample_centers(box, 7, CenterMethod::kGaussian, 5));
  CHECK(sample_centers(box, 7, CenterMethod::kUniform, 5) !=
        sample_centers(box, 7, CenterMethod::kUniform, 6));

  const Eigen::Index big = 10000;
  const Matrix draws = sample_centers(box, big, CenterMethod::kUniform, 11);
  const Vector mean = draws.rowwise().mean();
  // Standard error of the mean of U(-1,3): width/sqrt(12)/sqrt(N).
  const double se = 4.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(big));
  CHECK((mean - box.center()).lpNorm<Eigen::Infinity>() < 3.0 * se);

  CHECK_THROWS_AS(sample_centers(box, 0, CenterMethod::kUniform, 1), ParamError);
}

TEST_CASE("observable map kinds evaluate as documented") {
  const Vector x = vecl({0.5, -1.5});
  CHECK(identity_map(2).eval(x) == x);

  const Vector ax = affine_map(2).eval(x);
  CHECK(ax == vecl({1.0, 0.5, -1.5}));

  CHECK(constant_one_map(2).eval(x) == vecl({1.0}));

  const ObservableMap dmap = delay_map(2, 3);
  CHECK(dmap.output_dim == 6);
  CHECK_FALSE(dmap.pointwise());
  CHECK_THROWS_AS(dmap.eval(x), ParamError);

  CHECK_THROWS_AS(identity_map(2).eval(vecl({1.0})), DimensionError);
}

TEST_CASE("imq_map validates its invariants") {
  const Box box = Box::cube(2, -1.0, 1.0);
  Matrix inside(2, 2);
  inside << 0.5, -0.5, 0.0, 0.25;
  const ObservableMap m = imq_map(inside, 1.0, 1.0, box);
  CHECK(m.output_dim == 2);
  CHECK(m.eval(vecl({0.5, 0.0}))[0] == 1.0);

  Matrix outside(2, 1);
  outside << 2.0, 0.0;
  CHECK_THROWS_AS(imq_map(outside, 1.0, 1.0, box), ParamError);
  CHECK_THROWS_AS(imq_map(inside, -1.0, 1.0, box), ParamError);
  CHECK_THROWS_AS(imq_map(inside, 1.0, 0.0, box), ParamError);
  CHECK_THROWS_AS(imq_map(inside, 1.0, 1.0, Box::cube(3, -1, 1)), DimensionError);

  const ObservableMap st = stacked_imq_map(inside, 2.0, box);
  CHECK(st.beta == 1.0);
  CHECK(st.eval(vecl({0.5, 0.0})) == imq_features(vecl({0.5, 0.0}), inside, 2.0, 1.0));
}

TEST_CASE("legendre map values, ordering, orthonormality ingredients") {
  // 1-D on [0, 2]: shifted argument t = x - 1.
  const ObservableMap leg1 = legendre_map(Box::cube(1, 0.0, 2.0), 2);
  CHECK(leg1.output_dim == 3);
  const double x = 1.7, t = 0.7;
  const Vector f = leg1.eval(vecl({x}));
  CHECK(f[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(std::sqrt(1.5) * t).epsilon(1e-14));
  CHECK(f[2] == doctest::Approx(std::sqrt(2.5) * 0.5 * (3 * t * t - 1)).epsilon(1e-14));

  // 2-D tensor basis equals the Kronecker product of the axis bases.
  const ObservableMap leg2 = legendre_map(Box::cube(2, -1.0, 1.0), 2);
  CHECK(leg2.output_dim == 9);
  const ObservableMap axis = legendre_map(Box::cube(1, -1.0, 1.0), 2);
  run_cases(304, 32, [&](Rng& rng, int) {
    const Vector p = vecl({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Vector expect = kron_vec(axis.eval(p.head(1)), axis.eval(p.tail(1)));
    CHECK((leg2.eval(p) - expect).lpNorm<Eigen::Infinity>() == 0.0);
  });

  CHECK_THROWS_AS(legendre_map(Box(vecl({0.0}), vecl({0.0})), 1), ParamError);
}

TEST_CASE("product basis enumerates row-major state-outer input-inner") {
  run_cases(305, [](Rng& rng, int) {
    ObservableMap psi_x = random_imq_map(rng, 2, 1 + rng.next_u64() % 4);
    ObservableMap psi_u = random_imq_map(rng, 1, 1 + rng.next_u64() % 3);
    const Vector x = random_vector(rng, 2);
    const Vector u = random_vector(rng, 1);
    const Vector zx = psi_x.eval(x);
    const Vector vu = psi_u.eval(u);
    const Vector prod = kron_vec(zx, vu);
    REQUIRE(prod.size() == zx.size() * vu.size());
    for (Eigen::Index i = 0; i < zx.size(); ++i) {
      for (Eigen::Index j = 0; j < vu.size(); ++j) {
        CHECK(prod[i * vu.size() + j] == zx[i] * vu[j]);
      }
    }
  });
}

TEST_CASE("lift_trajectory with identity maps exposes raw shifts") {
  Matrix a(2, 2), b(2, 1);
  a << 0.9, 0.05, -0.1, 0.8;
  b << 0.0, 1.0;
  const System sys = lti_system(a, b, Box::cube(2, -5, 5), Box::cube(1, -1, 1));
  const Trajectory traj = rollout(sys, vecl({1.0, 0.0}), sinusoid_input(0.3, 0.2, 10));

  const LiftedData data = lift_trajectory(traj, identity_map(2), identity_map(1));
  REQUIRE(data.count() == 10);
  CHECK(data.z_x == traj.states.leftCols(10));
  CHECK(data.z_x_plus == traj.states.rightCols(10));
  CHECK(data.v_u == traj.inputs);
  CHECK(data.x_raw == traj.states.leftCols(10));
  CHECK(data.x_plus == traj.states.rightCols(10));
  CHECK_FALSE(data.has_w());

  const LiftedData with_w =
      lift_trajectory(traj, identity_map(2), identity_map(1), affine_map(2));
  CHECK(with_w.has_w());
  REQUIRE(with_w.w.rows() == 3);
  CHECK(with_w.w.row(0) == Matrix::Ones(1, 10));
  CHECK(with_w.w.bottomRows(2) == traj.outputs.leftCols(10));
}

TEST_CASE("lift_trajectory errors name the offending map") {
  const System sys = vdp_system();
  const Trajectory traj = rollout(sys, vecl({1.0, 0.0}), sinusoid_input(0.3, 0.2, 5));
  try {
    lift_trajectory(traj, identity_map(3), identity_map(1));
    CHECK(false);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("psi_x") != std::string::npos);
  }
  try {
    lift_trajectory(traj, identity_map(2), identity_map(2));
    CHECK(false);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("psi_u") != std::string::npos);
  }
  try {
    lift_trajectory(traj, identity_map(2), identity_map(1), identity_map(5));
    CHECK(false);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("psi_y") != std::string::npos);
  }
}

TEST_CASE("lift alignment: lifted next-state column is the lift of raw x_plus") {
  run_cases(306, [](Rng& rng, int) {
    const System sys = vdp_system(rng.uniform(0.8, 1.6), 0.1, 5);
    Rng local(rng.next_u64());
    const Vector x0 = local.uniform_in(sys.state_box);
    const Trajectory traj = rollout(sys, x0, sinusoid_input(0.3, 0.2, 6));

    ObservableMap psi_x = random_imq_map(rng, 2, 4);
    ObservableMap psi_u = random_imq_map(rng, 1, 2);
    const LiftedData data = lift_trajectory(traj, psi_x, psi_u);
    for (Eigen::Index t = 0; t < data.count(); ++t) {
      CHECK((data.z_x.col(t) - psi_x.eval(data.x_raw.col(t))).lpNorm<Eigen::Infinity>() ==
            0.0);
      CHECK((data.z_x_plus.col(t) - psi_x.eval(data.x_plus.col(t)))
                .lpNorm<Eigen::Infinity>() == 0.0);
      CHECK((data.v_u.col(t) - psi_u.eval(traj.inputs.col(t))).lpNorm<Eigen::Infinity>() ==
            0.0);
      CHECK(data.x_plus.col(t) == traj.states.col(t + 1));
    }
  });
}

TEST_CASE("lift_snapshots matches per-snapshot evaluation") {
  const System sys = vdp_system();
  const SnapshotBatch batch = sample_snapshots(sys, 25, Sampler::kUniformBox, 13);
  const ObservableMap psi_x = affine_map(2);
  const ObservableMap psi_u = affine_map(1);
  const LiftedData data = lift_snapshots(batch, psi_x, psi_u, identity_map(2));
  REQUIRE(data.count() == 25);
  for (Eigen::Index t = 0; t < 25; ++t) {
    CHECK(data.z_x.col(t) == psi_x.eval(batch.x.col(t)));
    CHECK(data.v_u.col(t) == psi_u.eval(batch.u.col(t)));
    CHECK(data.z_x_plus.col(t) == psi_x.eval(batch.x_next.col(t)));
    CHECK(data.w.col(t) == batch.y.col(t));
  }
  CHECK_THROWS_AS(lift_snapshots(batch, delay_map(2, 2), psi_u), ParamError);

  // Single snapshot gives single-column matrices.
  const SnapshotBatch one = sample_snapshots(sys, 1, Sampler::kCenter, 3);
  CHECK(lift_snapshots(one, psi_x, psi_u).count() == 1);
}

TEST_CASE("delay lifting reproduces Hankel blocks and shifted pairing") {
  run_cases(307, [](Rng& rng, int) {
    const Eigen::Index steps = 8 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const System sys = vdp_system();
    Rng local(rng.next_u64());
    const Trajectory traj =
        rollout(sys, local.uniform_in(sys.state_box), sinusoid_input(0.3, 0.2, steps));
    const Eigen::Index q = 2 + static_cast<Eigen::Index>(rng.next_u64() % 2);

    const LiftedData data = lift_trajectory(traj, delay_map(2, q), identity_map(1));
    const Eigen::Index s = traj.states.cols();
    REQUIRE(data.count() == s - q);
    const Matrix h = hankel(traj.states, q, s - q);
    for (Eigen::Index t = 0; t < data.count(); ++t) {
      CHECK(data.z_x.col(t) == h.col(t));
      CHECK(data.z_x_plus.col(t) == h.col(t + 1));
    }
  });
}

TEST_CASE("havok_lift reduces the state Hankel matrix and keeps alignment") {
  const System sys = vdp_system();
  Rng rng(308);
  const Trajectory traj =
      rollout(sys, rng.uniform_in(sys.state_box), sinusoid_input(0.3, 0.2, 40));

  const Eigen::Index order = 3;
  const HavokLift full = havok_lift(traj, order, 0, 0);
  const Eigen::Index s = traj.states.cols();
  CHECK(full.hankel_x == hankel(traj.states, order, s - order));

  // Full-order reduction loses nothing: U_r * Z_r rebuilds the Hankel matrix.
  const SvdResult svd = svd_of(full.hankel_x);
  const Matrix z_r = svd.singular_values.asDiagonal() * svd.v.transpose();
  const Matrix rebuilt = svd.u * z_r;
  CHECK((rebuilt - full.hankel_x).norm() < 1e-9 * full.hankel_x.norm());

  // Pairing: z_x_plus is z_x advanced one column.
  CHECK(full.data.z_x.rightCols(full.data.count() - 1) ==
        full.data.z_x_plus.leftCols(full.data.count() - 1));
  CHECK(full.data.v_u == traj.inputs.leftCols(full.data.count()));
  CHECK(full.data.x_plus == traj.states.middleCols(1, full.data.count()));

  // Truncated reduction keeps the requested number of rows.
  const HavokLift reduced = havok_lift(traj, order, 0, 2);
  CHECK(reduced.order == 2);
  CHECK(reduced.data.z_x.rows() == 2);
  for (Eigen::Index i = 1; i < reduced.singular_values.size(); ++i) {
    CHECK(reduced.singular_values[i] <= reduced.singular_values[i - 1]);
  }

  // Delayed inputs when requested.
  const HavokLift delayed = havok_lift(traj, order, 2, 0);
  for (Eigen::Index t = 0; t < delayed.data.count(); ++t) {
    CHECK(delayed.data.v_u.col(t) == delay_features(traj.inputs, t, 2));
  }

  const Trajectory tiny = rollout(sys, rng.uniform_in(sys.state_box),
                                  sinusoid_input(0.3, 0.2, 2));
  CHECK_THROWS_AS(havok_lift(tiny, 3, 0, 0), DimensionError);
}
