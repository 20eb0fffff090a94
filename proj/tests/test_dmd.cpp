#include <doctest.h>

#include <algorithm>
#include <complex>

#include "helpers.hpp"
#include "resdmd/dmd.hpp"
#include "resdmd/rng.hpp"
#include "resdmd/synth.hpp"

using namespace resdmd;

namespace {

using testutil::mixed_system_snapshots;
using testutil::relative_error;

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return relative_error(a, b);
}

Eigen::MatrixXd iterate(const Eigen::MatrixXd& m, const Eigen::VectorXd& x0, int steps) {
  return testutil::iterate_linear(m, x0, steps);
}

// Greedy nearest-neighbor multiset match; returns the largest pairing error.
double eigenvalue_match_error(Eigen::VectorXcd found, const Eigen::VectorXcd& truth) {
  REQUIRE(found.size() == truth.size());
  std::vector<bool> used(found.size(), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (Eigen::Index j = 0; j < found.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(found(j) - truth(i));
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    used[best_j] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("diagonal linear system eigenvalues are recovered") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.9;
  a(1, 1) = 0.5;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto model = fit_dmd(iterate(a, x0, 10), 2);

  Eigen::VectorXcd truth(2);
  truth << 0.9, 0.5;
  CHECK(eigenvalue_match_error(model.lambda, truth) < 1e-10);
}

TEST_CASE("repeated-column data is a fixed point") {
  Eigen::VectorXd c(3);
  c << 1.0, -2.0, 0.5;
  Eigen::MatrixXd snaps(3, 6);
  for (int t = 0; t < 6; ++t) snaps.col(t) = c;
  const auto model = fit_dmd(snaps, 1);
  CHECK(std::abs(model.lambda(0) - std::complex<double>(1.0, 0.0)) < 1e-12);
  CHECK(rel_err(forecast(model, c, 1), c) < 1e-12);
}

TEST_CASE("embedded rotation eigenvalues are e^{+-i theta}") {
  SynthSpec spec;
  spec.kind = SynthKind::Rotation;
  spec.latent_dim = 2;
  spec.theta = M_PI / 6.0;
  spec.nlat = 4;
  spec.nlon = 4;
  spec.t_steps = 50;
  spec.seed = 21;
  const auto synth = gen_linear(spec);
  const auto model = fit_dmd(synth.data, 2);
  CHECK(eigenvalue_match_error(model.lambda, synth.true_eigenvalues) < 1e-10);
}

TEST_CASE("rank bound and rank deficiency are reported") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.9;
  a(1, 1) = 0.5;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto snaps = iterate(a, x0, 10);
  CHECK_ERROR_KIND(fit_dmd(snaps, 0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(fit_dmd(snaps, 3), ErrorKind::InvalidArgument);

  Eigen::VectorXd c(4);
  c << 1.0, 2.0, 3.0, 4.0;
  Eigen::MatrixXd rank1(4, 8);
  for (int t = 0; t < 8; ++t) rank1.col(t) = c;
  CHECK_ERROR_KIND(fit_dmd(rank1, 2), ErrorKind::RankDeficientData);
}

TEST_CASE("encoder is a left inverse of the modes") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto snaps = mixed_system_snapshots(10, 60, seed);
    const auto model = fit_dmd(snaps, 4);
    const Eigen::MatrixXcd gram = model.encoder * model.phi;
    const double err =
        (gram - Eigen::MatrixXcd::Identity(4, 4)).norm() / std::sqrt(4.0);
    CHECK(err < 1e-8);
  }
}

TEST_CASE("projection of a real mode column is a unit vector") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.9;
  a(1, 1) = 0.5;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto model = fit_dmd(iterate(a, x0, 10), 2);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(model.phi.col(k).imag().norm() < 1e-12);  // real eigensystem
    const Eigen::VectorXcd b = project(model, model.phi.col(k).real());
    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(2);
    unit(k) = 1.0;
    CHECK((b - unit).norm() < 1e-8);
  }
  CHECK(project(model, Eigen::VectorXd::Zero(2)).norm() == 0.0);
  CHECK_ERROR_KIND(project(model, Eigen::VectorXd::Zero(3)), ErrorKind::SizeMismatch);
}

TEST_CASE("project/reconstruct round trip on the mode subspace") {
  const auto snaps = mixed_system_snapshots(12, 60, 6);
  const auto model = fit_dmd(snaps, 4);

  CHECK(reconstruct(model, Eigen::VectorXcd::Zero(4)).values.norm() == 0.0);

  for (int t : {0, 7, 31}) {
    const Eigen::VectorXd x = snaps.col(t);
    const auto rec = reconstruct(model, project(model, x));
    CHECK(rel_err(rec.values, x) < 1e-8);
    CHECK(rec.imag_norm < 1e-6 * rec.total_norm);  // conjugate-symmetric latent
  }
  CHECK_ERROR_KIND(reconstruct(model, Eigen::VectorXcd::Zero(3)), ErrorKind::SizeMismatch);
}

TEST_CASE("three-step forecast of the diagonal system is the closed form") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.9;
  a(1, 1) = 0.5;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto model = fit_dmd(iterate(a, x0, 10), 2);

  Eigen::VectorXd start(2);
  start << 1.0, 1.0;
  Eigen::VectorXd expected(2);
  expected << 0.729, 0.125;  // 0.9^3, 0.5^3
  CHECK((forecast(model, start, 3) - expected).norm() < 1e-9);

  // n = 0 projects onto the mode subspace; on-subspace states return unchanged
  CHECK(rel_err(forecast(model, start, 0), start) < 1e-8);
}

TEST_CASE("forecast matches stepping the true rotation map") {
  SynthSpec spec;
  spec.kind = SynthKind::Rotation;
  spec.theta = M_PI / 7.0;
  spec.nlat = 4;
  spec.nlon = 4;
  spec.t_steps = 80;
  spec.seed = 31;
  const auto synth = gen_linear(spec);
  const auto model = fit_dmd(synth.data, 2);
  for (int n : {1, 5, 12, 40}) {
    for (int t : {0, 10, 25}) {
      const Eigen::VectorXd pred = forecast(model, synth.data.data.col(t), n);
      CHECK(rel_err(pred, synth.data.data.col(t + n)) < 1e-8);
    }
  }
}

TEST_CASE("forecast semigroup property on the mode subspace") {
  const auto snaps = mixed_system_snapshots(10, 60, 8);
  const auto model = fit_dmd(snaps, 4);
  const Eigen::VectorXd x = snaps.col(3);
  for (auto [m, n] : {std::pair{1, 1}, {3, 4}, {10, 7}}) {
    const Eigen::VectorXd direct = forecast(model, x, m + n);
    const Eigen::VectorXd chained = forecast(model, forecast(model, x, m), n);
    CHECK(rel_err(direct, chained) < 1e-7);
  }
}

TEST_CASE("negative step counts are rejected") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.5;
  const auto model = fit_dmd(iterate(0.9 * a, x0, 6), 1);
  CHECK_ERROR_KIND(forecast(model, x0, -1), ErrorKind::InvalidArgument);
}

TEST_CASE("spectrum formulas") {
  // lambda = 0.5: decay 1/ln 2 months, no oscillation
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.5;
  a(1, 1) = 0.25;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto model = fit_dmd(iterate(a, x0, 12), 2);
  const auto report = spectrum(model);
  REQUIRE(report.size() == 2);
  CHECK(report[0].modulus == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(report[0].decay_months == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-10));
  CHECK(std::isinf(report[0].period_months));

  // lambda = e^{i pi/6} exactly: 12-month period, non-damped
  DmdModel rot_model;
  rot_model.rank = 2;
  rot_model.dt_months = 1;
  rot_model.lambda.resize(2);
  rot_model.lambda(0) = std::polar(1.0, M_PI / 6.0);
  rot_model.lambda(1) = std::polar(1.0, -M_PI / 6.0);
  rot_model.phi = Eigen::MatrixXcd::Identity(2, 2);
  rot_model.encoder = Eigen::MatrixXcd::Identity(2, 2);
  const auto rot_report = spectrum(rot_model);
  CHECK(rot_report[0].period_months == doctest::Approx(12.0).epsilon(1e-9));
  CHECK(std::isinf(rot_report[0].decay_months));

  // report entries equal an independent recomputation from the eigenvalues
  const auto snaps = mixed_system_snapshots(10, 60, 10);
  const auto mixed = fit_dmd(snaps, 4);
  for (const auto& entry : spectrum(mixed)) {
    const double modulus = std::abs(entry.eigenvalue);
    CHECK(entry.modulus == modulus);
    if (modulus < 1.0) {
      CHECK(entry.decay_months == doctest::Approx(-1.0 / std::log(modulus)).epsilon(1e-12));
    } else {
      CHECK(std::isinf(entry.decay_months));
    }
    const double arg = std::arg(entry.eigenvalue);
    if (arg != 0.0) {
      CHECK(entry.period_months ==
            doctest::Approx(2.0 * M_PI / std::abs(arg)).epsilon(1e-12));
    } else {
      CHECK(std::isinf(entry.period_months));
    }
  }
}

TEST_CASE("realify of a real spectrum is the diagonal eigenvalue matrix") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 0.9;
  a(1, 1) = 0.5;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.7;
  const auto model = fit_dmd(iterate(a, x0, 10), 2);
  const auto sys = realify(model);
  CHECK(sys.block_sizes == std::vector<int>{1, 1});
  CHECK(sys.dynamics(0, 0) == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(sys.dynamics(1, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sys.dynamics(0, 1) == 0.0);
  CHECK(sys.dynamics(1, 0) == 0.0);
}

TEST_CASE("realify block of a single conjugate pair") {
  SynthSpec spec;
  spec.kind = SynthKind::Rotation;
  spec.theta = M_PI / 4.0;
  spec.radius = 0.8;
  spec.t_steps = 40;
  spec.seed = 12;
  const auto model = fit_dmd(gen_linear(spec).data, 2);
  const auto sys = realify(model);
  REQUIRE(sys.block_sizes == std::vector<int>{2});
  const double expected = 0.8 * std::sqrt(2.0) / 2.0;
  CHECK(sys.dynamics(0, 0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(sys.dynamics(0, 1) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(sys.dynamics(1, 0) == doctest::Approx(-expected).epsilon(1e-9));
  CHECK(sys.dynamics(1, 1) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("realified system reproduces complex forecasts") {
  const auto snaps = mixed_system_snapshots(12, 80, 13);
  const auto model = fit_dmd(snaps, 4);
  const auto sys = realify(model);
  REQUIRE(sys.latent_dim() == 4);

  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x(12);
    for (int i = 0; i < 12; ++i) x(i) = rng.gaussian();
    for (int n : {1, 5, 50, 100}) {
      Eigen::VectorXd b = sys.encoder * x;
      for (int s = 0; s < n; ++s) b = sys.dynamics * b;
      const Eigen::VectorXd via_real = sys.decoder * b;
      CHECK(rel_err(via_real, forecast(model, x, n)) < 1e-8);
    }
  }
}

TEST_CASE("realify rejects an unpaired complex eigenvalue") {
  const auto snaps = mixed_system_snapshots(12, 80, 14);
  auto model = fit_dmd(snaps, 4);
  // corrupt one member of the conjugate pair
  for (int i = 0; i < 4; ++i) {
    if (model.lambda(i).imag() > 1e-6) {
      model.lambda(i) += std::complex<double>(0.0, 0.01);
    }
  }
  CHECK_ERROR_KIND(realify(model), ErrorKind::UnpairedEigenvalue);
}

TEST_CASE("noiseless rank-k recovery as a multiset") {
  Rng rng(15);
  for (int trial = 0; trial < 4; ++trial) {
    const int k = 3;
    Eigen::MatrixXd latent_step = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXcd truth(k);
    for (int i = 0; i < k; ++i) {
      latent_step(i, i) = rng.uniform(-0.95, 0.95);
      truth(i) = latent_step(i, i);
    }
    Eigen::MatrixXd g(9, k);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < k; ++j) g(i, j) = rng.gaussian();
    }
    const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                                  Eigen::MatrixXd::Identity(9, k);
    Eigen::VectorXd z0(k);
    for (int i = 0; i < k; ++i) z0(i) = 1.0 + rng.uniform01();
    const Eigen::MatrixXd snaps = basis * iterate(latent_step, z0, 40);
    const auto model = fit_dmd(snaps, k);
    CHECK(eigenvalue_match_error(model.lambda, truth) < 1e-8);
  }
}

TEST_CASE("model serialization round trips") {
  const auto dir = testutil::temp_dir("dmd_io");
  const auto path = dir / "model.dmd";
  const auto snaps = mixed_system_snapshots(10, 60, 16);
  const auto model = fit_dmd(snaps, 4);
  save_dmd_model(model, path);
  const auto loaded = load_dmd_model(path);

  CHECK(loaded.rank == model.rank);
  CHECK(loaded.dt_months == model.dt_months);
  CHECK((loaded.lambda - model.lambda).norm() == 0.0);
  CHECK((loaded.phi - model.phi).norm() == 0.0);
  CHECK((loaded.encoder - model.encoder).norm() == 0.0);

  // saving the loaded model reproduces the file bytes
  const auto path2 = dir / "model2.dmd";
  save_dmd_model(loaded, path2);
  CHECK(testutil::read_bytes(path) == testutil::read_bytes(path2));
}
