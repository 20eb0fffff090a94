#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resdmd/error.hpp"
#include "resdmd/grid.hpp"
#include "resdmd/rng.hpp"

// Expects `expr` to throw resdmd::Error with the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                      \
  do {                                                             \
    bool caught_ = false;                                          \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const resdmd::Error& e_) {                            \
      caught_ = true;                                              \
      CHECK(e_.kind() == (expected_kind));                         \
    }                                                              \
    CHECK_MESSAGE(caught_, "expected an error from " #expr);       \
  } while (0)

namespace testutil {

// float32-representable double, so storage round trips are bit-exact
inline double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Random grid series with float32-representable values and (optionally) a
// random mask with at least one valid point.
inline resdmd::GridSeries random_series(int nlat, int nlon, int months,
                                        std::uint64_t seed, bool random_mask = false,
                                        resdmd::YearMonth start = {1980, 1}) {
  resdmd::Rng rng(seed);
  resdmd::GridSeries s;
  s.nlat = nlat;
  s.nlon = nlon;
  s.mask.assign(static_cast<std::size_t>(nlat) * nlon, 1);
  if (random_mask) {
    bool any = false;
    for (auto& m : s.mask) {
      m = rng.uniform01() < 0.7 ? 1 : 0;
      any |= (m != 0);
    }
    if (!any) s.mask[0] = 1;
  }
  s.times.resize(months);
  s.times[0] = start;
  for (int t = 1; t < months; ++t) s.times[t] = s.times[t - 1].next();
  s.values.assign(static_cast<std::size_t>(months) * nlat * nlon, resdmd::fill_value());
  for (int t = 0; t < months; ++t) {
    for (int i = 0; i < nlat; ++i) {
      for (int j = 0; j < nlon; ++j) {
        if (s.mask[static_cast<std::size_t>(i) * nlon + j]) {
          s.at(t, i, j) = f32(rng.uniform(-10.0, 30.0));
        }
      }
    }
  }
  return s;
}

// Snapshots of x_{t+1} = M x_t from a given start state.
inline Eigen::MatrixXd iterate_linear(const Eigen::MatrixXd& m, const Eigen::VectorXd& x0,
                                      int steps) {
  Eigen::MatrixXd snaps(x0.size(), steps);
  snaps.col(0) = x0;
  for (int t = 1; t < steps; ++t) snaps.col(t) = m * snaps.col(t - 1);
  return snaps;
}

// Mixed real/complex latent dynamics embedded orthonormally; eigenvalues
// {0.95, 0.8, 0.9 e^{+-i pi/5}}. Shared by the block/backprop tests.
inline Eigen::MatrixXd mixed_system_snapshots(int embed_dim, int steps, std::uint64_t seed) {
  Eigen::MatrixXd latent_step = Eigen::MatrixXd::Zero(4, 4);
  latent_step(0, 0) = 0.95;
  latent_step(1, 1) = 0.8;
  const double theta = M_PI / 5.0;
  latent_step.block<2, 2>(2, 2) << 0.9 * std::cos(theta), -0.9 * std::sin(theta),
      0.9 * std::sin(theta), 0.9 * std::cos(theta);

  resdmd::Rng rng(seed);
  Eigen::MatrixXd g(embed_dim, 4);
  for (int i = 0; i < embed_dim; ++i) {
    for (int j = 0; j < 4; ++j) g(i, j) = rng.gaussian();
  }
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                                Eigen::MatrixXd::Identity(embed_dim, 4);
  Eigen::VectorXd z0(4);
  for (int i = 0; i < 4; ++i) z0(i) = rng.gaussian();
  return basis * iterate_linear(latent_step, z0, steps);
}

inline resdmd::StateMatrix wrap_state_matrix(const Eigen::MatrixXd& snaps,
                                             resdmd::YearMonth start = {1980, 1}) {
  resdmd::StateMatrix sm;
  sm.data = snaps;
  sm.nlat = 1;
  sm.nlon = static_cast<int>(snaps.rows());
  for (int j = 0; j < snaps.rows(); ++j) sm.point_index.emplace_back(0, j);
  sm.times.resize(snaps.cols());
  sm.times[0] = start;
  for (int t = 1; t < snaps.cols(); ++t) sm.times[t] = sm.times[t - 1].next();
  return sm;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("resdmd_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
