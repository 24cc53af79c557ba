#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geko/koopman.hpp"
#include "geko/observables.hpp"
#include "geko/serialize.hpp"
#include "support/test_util.hpp"

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

using namespace geko;
using geko::testsupport::random_matrix;
using geko::testsupport::random_vector;
using geko::testsupport::run_cases;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || (a.array() == b.array()).all());
}

bool maps_equal(const ObservableMap& a, const ObservableMap& b) {
  return a.kind == b.kind && a.input_dim == b.input_dim && a.output_dim == b.output_dim &&
         bitwise_equal(a.centers, b.centers) && a.sigma == b.sigma && a.beta == b.beta &&
         bitwise_equal(a.box.lo, b.box.lo) && bitwise_equal(a.box.hi, b.box.hi) &&
         a.order == b.order && a.max_degree == b.max_degree && a.center_seed == b.center_seed;
}

Box random_box(Rng& rng, Eigen::Index dim) {
  Vector lo(dim), hi(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    lo[i] = rng.uniform(-3.0, 0.0);
    hi[i] = lo[i] + rng.uniform(0.5, 4.0);
  }
  return Box(lo, hi);
}

ObservableMap random_map(Rng& rng) {
  const auto pick = rng.next_u64() % 6;
  const auto dim = static_cast<Eigen::Index>(1 + rng.next_u64() % 3);
  switch (pick) {
    case 0: return identity_map(dim);
    case 1: return affine_map(dim);
    case 2: return constant_one_map(dim);
    case 3: {
      const Box box = random_box(rng, dim);
      const auto k = static_cast<Eigen::Index>(2 + rng.next_u64() % 5);
      const std::uint64_t seed = rng.next_u64();
      return imq_map(sample_centers(box, k, CenterMethod::kUniform, seed),
                     rng.uniform(0.5, 3.0), rng.uniform(0.5, 1.0), box, seed);
    }
    case 4: return delay_map(dim, static_cast<Eigen::Index>(1 + rng.next_u64() % 3));
    default: return legendre_map(random_box(rng, dim), static_cast<Eigen::Index>(rng.next_u64() % 3));
  }
}

}  // namespace

TEST_CASE("observable maps survive the text round trip bit for bit") {
  run_cases(0x0B5Eull, [](Rng& rng, int) {
    const ObservableMap map = random_map(rng);
    const ObservableMap back = observable_from_string(observable_to_string(map));
    CHECK(maps_equal(map, back));
    if (map.pointwise() && map.input_dim > 0) {
      const Vector point = random_vector(rng, map.input_dim);
      CHECK((map.eval(point).array() == back.eval(point).array()).all());
    }
  });
}

TEST_CASE("a fitted model round-trips through text with every matrix intact") {
  Rng rng(0x5E71ull);
  const Eigen::Index n_z = 3, n_v = 2, length = 30;
  LiftedData data;
  data.z_x = random_matrix(rng, n_z, length);
  data.v_u = random_matrix(rng, n_v, length);
  data.z_x_plus = random_matrix(rng, n_z, length);
  data.w = random_matrix(rng, 2, length);
  data.x_raw = random_matrix(rng, 2, length);
  data.x_plus = random_matrix(rng, 2, length);

  KoopmanModel model = fit_geko(data, identity_map(n_z), identity_map(n_v), 1e-8);
  model.c = fit_output(data, 1e-8);
  model.d = fit_decoder(data, 1e-8);
  model.psi_y = affine_map(2);

  const std::string text = model_to_string(model);
  const KoopmanModel back = model_from_string(text);
  CHECK(bitwise_equal(back.k, model.k));
  CHECK(bitwise_equal(back.c, model.c));
  CHECK(bitwise_equal(back.d, model.d));
  CHECK_FALSE(back.has_k_x());
  CHECK(maps_equal(back.psi_x, model.psi_x));
  CHECK(maps_equal(back.psi_u, model.psi_u));
  REQUIRE(back.psi_y.has_value());
  CHECK(maps_equal(*back.psi_y, *model.psi_y));
  CHECK(back.diagnostics.method == model.diagnostics.method);
  CHECK(back.diagnostics.residual == model.diagnostics.residual);
  CHECK(back.diagnostics.rank == model.diagnostics.rank);
  CHECK(back.diagnostics.smallest_sv == model.diagnostics.smallest_sv);
  CHECK(back.diagnostics.gamma == model.diagnostics.gamma);
  CHECK(back.diagnostics.columns == model.diagnostics.columns);

  // Serialization is a pure function of the model, so the text is stable.
  CHECK(model_to_string(back) == text);
}

TEST_CASE("models with only a direct-to-state operator keep absent blocks absent") {
  Rng rng(0x5E72ull);
  LiftedData data;
  data.z_x = random_matrix(rng, 2, 20);
  data.v_u = random_matrix(rng, 1, 20);
  data.z_x_plus = random_matrix(rng, 2, 20);
  data.x_raw = random_matrix(rng, 2, 20);
  data.x_plus = random_matrix(rng, 2, 20);
  const KoopmanModel model = fit_direct(data, identity_map(2), identity_map(1), 1e-10);

  const KoopmanModel back = model_from_string(model_to_string(model));
  CHECK(bitwise_equal(back.k_x, model.k_x));
  CHECK_FALSE(back.has_k());
  CHECK_FALSE(back.has_c());
  CHECK_FALSE(back.has_d());
  CHECK_FALSE(back.psi_y.has_value());
}

TEST_CASE("random stacked-IMQ models round-trip through a file on disk") {
  Rng rng(0x5E73ull);
  const Box box(Vector::Constant(3, -2.0), Vector::Constant(3, 2.0));
  const Matrix centers = sample_centers(box, 12, CenterMethod::kUniform, 99);
  KoopmanModel model;
  model.psi_x = stacked_imq_map(centers, 1.5, box, 99);
  model.psi_u = constant_one_map(1);
  model.k = random_matrix(rng, 12, 12);
  model.diagnostics.method = "kic-lifted";
  model.diagnostics.gamma = 1e-6;

  const auto path = std::filesystem::temp_directory_path() /
                    ("geko_model_" + std::to_string(::getpid()) + ".json");
  save_model(model, path.string());
  const KoopmanModel back = load_model(path.string());
  CHECK(bitwise_equal(back.k, model.k));
  CHECK(maps_equal(back.psi_x, model.psi_x));
  CHECK(back.diagnostics.method == "kic-lifted");

  // The document on disk is byte-identical when written again.
  std::ifstream first(path);
  std::string text((std::istreambuf_iterator<char>(first)), std::istreambuf_iterator<char>());
  CHECK(text == model_to_string(back));
  std::filesystem::remove(path);
}

TEST_CASE("loading rejects missing files and malformed documents") {
  CHECK_THROWS_AS(load_model("/nonexistent/geko_model.json"), IoError);
  CHECK_THROWS_AS(model_from_string("{ not json"), IoError);
  CHECK_THROWS_AS(model_from_string("{\"format\": \"something-else\"}"), IoError);
  CHECK_THROWS_AS(model_from_string("{\"format\": \"geko-model\"}"), IoError);
  CHECK_THROWS_AS(observable_from_string("{\"format\": \"geko-observable\", \"kind\": \"warp\"}"),
                  IoError);

  // A model document with a corrupt CSV block inside.
  KoopmanModel model;
  model.psi_x = identity_map(2);
  model.psi_u = identity_map(1);
  model.k = Matrix::Constant(2, 2, 1.5);
  std::string text = model_to_string(model);
  const auto pos = text.find("1.5");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 3, "zzz");
  CHECK_THROWS_AS(model_from_string(text), IoError);
}

TEST_CASE("observable documents carry a format tag distinct from models") {
  const ObservableMap map = identity_map(2);
  const std::string text = observable_to_string(map);
  CHECK(text.find("geko-observable") != std::string::npos);
  CHECK_THROWS_AS(model_from_string(text), IoError);
  CHECK_THROWS_AS(observable_from_string(model_to_string(KoopmanModel{})), IoError);
}
