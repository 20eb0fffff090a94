#include <doctest.h>

#include <cstring>
#include <fstream>

#include "helpers.hpp"
#include "resdmd/container.hpp"
#include "resdmd/grid.hpp"

using namespace resdmd;

namespace {

// Handcrafted minimal container so the byte layout itself is pinned by tests,
// not just save/load symmetry.
void write_raw(const std::filesystem::path& path, const std::string& header,
               const std::vector<float>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << header << "\n";
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

std::string minimal_header(int ntime) {
  return std::string("{\"format_version\":1,\"kind\":\"grid_series\",\"variable\":\"sst\","
                     "\"units\":\"K\",\"nlat\":2,\"nlon\":2,\"ntime\":") +
         std::to_string(ntime) +
         ",\"fill_value\":\"nan\",\"dtype\":\"float32\",\"mask_rle\":[0,4],"
         "\"times\":[[1980,1],[1980,2],[1980,3]]}";
}

}  // namespace

TEST_CASE("load accepts a minimal well-formed file") {
  const auto dir = testutil::temp_dir("grid_minimal");
  const auto path = dir / "minimal.rdc";
  write_raw(path,
            "{\"format_version\":1,\"kind\":\"grid_series\",\"variable\":\"sst\","
            "\"units\":\"K\",\"nlat\":2,\"nlon\":2,\"ntime\":2,\"fill_value\":\"nan\","
            "\"dtype\":\"float32\",\"mask_rle\":[0,4],\"times\":[[1980,1],[1980,2]]}",
            {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f, 7.0f, 8.0f});
  const auto series = load_grid_series(path);
  CHECK(series.ntime() == 2);
  CHECK(series.nlat == 2);
  CHECK(series.at(0, 0, 0) == 1.0);
  CHECK(series.at(1, 1, 1) == 8.0);
  CHECK(series.times[0] == YearMonth{1980, 1});
}

TEST_CASE("header/payload slice mismatch is a dimension error") {
  const auto dir = testutil::temp_dir("grid_mismatch");
  const auto path = dir / "short.rdc";
  write_raw(path, minimal_header(3), std::vector<float>(8, 0.0f));  // 2 slices of 4
  CHECK_ERROR_KIND(load_grid_series(path), ErrorKind::DimensionMismatch);
}

TEST_CASE("broken JSON header is a malformed-header error") {
  const auto dir = testutil::temp_dir("grid_badjson");
  const auto path = dir / "bad.rdc";
  write_raw(path, "{\"format_version\":1, not json", {});
  CHECK_ERROR_KIND(load_grid_series(path), ErrorKind::MalformedHeader);
}

TEST_CASE("non-monotonic and gapped time axes are rejected") {
  const auto dir = testutil::temp_dir("grid_time");
  const auto path = dir / "time.rdc";
  const std::vector<float> payload(12, 1.0f);

  write_raw(path,
            "{\"format_version\":1,\"kind\":\"grid_series\",\"variable\":\"sst\","
            "\"units\":\"K\",\"nlat\":2,\"nlon\":2,\"ntime\":3,\"fill_value\":\"nan\","
            "\"dtype\":\"float32\",\"mask_rle\":[0,4],"
            "\"times\":[[1980,2],[1980,1],[1980,3]]}",
            payload);
  CHECK_ERROR_KIND(load_grid_series(path), ErrorKind::NonMonotonicTimeAxis);

  write_raw(path,
            "{\"format_version\":1,\"kind\":\"grid_series\",\"variable\":\"sst\","
            "\"units\":\"K\",\"nlat\":2,\"nlon\":2,\"ntime\":3,\"fill_value\":\"nan\","
            "\"dtype\":\"float32\",\"mask_rle\":[0,4],"
            "\"times\":[[1980,1],[1980,2],[1980,4]]}",
            payload);
  CHECK_ERROR_KIND(load_grid_series(path), ErrorKind::NonMonotonicTimeAxis);
}

TEST_CASE("save/load round trip is bit-exact on a random series") {
  const auto dir = testutil::temp_dir("grid_roundtrip");
  const auto path = dir / "series.rdc";
  const auto series = testutil::random_series(10, 20, 30, 42, /*random_mask=*/true);
  save_grid_series(series, path);
  const auto loaded = load_grid_series(path);

  REQUIRE(loaded.ntime() == series.ntime());
  REQUIRE(loaded.mask == series.mask);
  REQUIRE(loaded.times == series.times);
  CHECK(loaded.variable == series.variable);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    const std::size_t p = i % series.points();
    if (series.mask[p]) {
      CHECK(loaded.values[i] == series.values[i]);
    } else {
      CHECK(std::isnan(loaded.values[i]));
    }
  }
}

TEST_CASE("save(load(file)) reproduces the file byte for byte") {
  const auto dir = testutil::temp_dir("grid_bytes");
  const auto a = dir / "a.rdc";
  const auto b = dir / "b.rdc";
  save_grid_series(testutil::random_series(5, 7, 13, 7, true), a);
  save_grid_series(load_grid_series(a), b);
  CHECK(testutil::read_bytes(a) == testutil::read_bytes(b));
}

TEST_CASE("fill values are written at masked points") {
  const auto dir = testutil::temp_dir("grid_fill");
  const auto path = dir / "fill.rdc";
  auto series = testutil::random_series(2, 2, 2, 3);
  series.mask[2] = 0;  // (1, 0)
  series.at(0, 1, 0) = fill_value();
  series.at(1, 1, 0) = fill_value();
  save_grid_series(series, path);

  const auto raw = read_container(path);
  const auto values = decode_f32(raw.payload.data(), 8);
  CHECK(std::isnan(values[2]));      // t=0, point (1,0)
  CHECK(std::isnan(values[4 + 2]));  // t=1, point (1,0)
  CHECK(!std::isnan(values[0]));
}

TEST_CASE("mask RLE round trips on random masks") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(64);
    std::vector<std::uint8_t> mask(n);
    for (auto& m : mask) m = rng.uniform01() < 0.5 ? 1 : 0;
    CHECK(rle_to_mask(mask_to_rle(mask), n) == mask);
  }
}

TEST_CASE("a series needs at least two slices") {
  const auto dir = testutil::temp_dir("grid_short");
  const auto path = dir / "one.rdc";
  write_raw(path,
            "{\"format_version\":1,\"kind\":\"grid_series\",\"variable\":\"sst\","
            "\"units\":\"K\",\"nlat\":2,\"nlon\":2,\"ntime\":1,\"fill_value\":\"nan\","
            "\"dtype\":\"float32\",\"mask_rle\":[0,4],\"times\":[[1980,1]]}",
            std::vector<float>(4, 1.0f));
  CHECK_ERROR_KIND(load_grid_series(path), ErrorKind::DimensionMismatch);
}

// --- climatology -----------------------------------------------------------

TEST_CASE("constant series gives constant monthly means") {
  auto series = testutil::random_series(3, 4, 48, 5);
  for (auto& v : series.values) v = 5.0;
  const auto clim = compute_monthly_climatology(series, {1980, 1}, {1983, 12});
  for (int m = 0; m < 12; ++m) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(clim.mean_at(m, i, j) == 5.0);
      }
    }
  }
}

TEST_CASE("two-sample January mean") {
  auto series = testutil::random_series(1, 1, 24, 6);
  series.at(0, 0, 0) = 1.0;   // 1980-01
  series.at(12, 0, 0) = 3.0;  // 1981-01
  const auto clim = compute_monthly_climatology(series, {1980, 1}, {1981, 12});
  CHECK(clim.mean_at(0, 0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("climatology matches an independent re-averaging oracle") {
  const auto series = testutil::random_series(4, 5, 480, 123, true);  // 1980..2019
  const YearMonth ref_start{1980, 1};
  const YearMonth ref_end{2010, 12};
  const auto clim = compute_monthly_climatology(series, ref_start, ref_end);

  for (int m = 0; m < 12; ++m) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 5; ++j) {
        if (!series.valid(i, j)) {
          CHECK(std::isnan(clim.mean_at(m, i, j)));
          continue;
        }
        // brute force: collect every sample of this calendar month in window
        double sum = 0.0;
        int count = 0;
        for (int t = 0; t < series.ntime(); ++t) {
          const auto& ym = series.times[t];
          if (ym.month == m + 1 && !(ym < ref_start) && !(ref_end < ym)) {
            sum += series.at(t, i, j);
            ++count;
          }
        }
        REQUIRE(count == 31);
        CHECK(clim.mean_at(m, i, j) == doctest::Approx(sum / count).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("climatology is invariant to sample order within the window") {
  auto a = testutil::random_series(2, 2, 60, 9);
  auto b = a;
  // swap the 1980 and 1983 slices month by month: same window samples, other order
  for (int m = 0; m < 12; ++m) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        std::swap(b.at(m, i, j), b.at(36 + m, i, j));
      }
    }
  }
  const auto clim_a = compute_monthly_climatology(a, {1980, 1}, {1984, 12});
  const auto clim_b = compute_monthly_climatology(b, {1980, 1}, {1984, 12});
  for (std::size_t p = 0; p < clim_a.monthly_means.size(); ++p) {
    CHECK(clim_a.monthly_means[p] == doctest::Approx(clim_b.monthly_means[p]).epsilon(1e-12));
  }
}

TEST_CASE("climatology window errors") {
  const auto series = testutil::random_series(2, 2, 24, 8);  // 1980-01..1981-12
  CHECK_ERROR_KIND(compute_monthly_climatology(series, {1979, 1}, {1981, 12}),
                   ErrorKind::WindowOutOfRange);
  CHECK_ERROR_KIND(compute_monthly_climatology(series, {1980, 1}, {1985, 12}),
                   ErrorKind::WindowOutOfRange);
  CHECK_ERROR_KIND(compute_monthly_climatology(series, {1980, 1}, {1980, 3}),
                   ErrorKind::MissingCalendarMonth);
}

// --- anomalies --------------------------------------------------------------

TEST_CASE("a series equal to its climatology has zero anomalies") {
  auto series = testutil::random_series(2, 3, 36, 10);
  const auto clim = compute_monthly_climatology(series, {1980, 1}, {1982, 12});
  // rebuild the series from the climatology itself
  for (int t = 0; t < series.ntime(); ++t) {
    const int m = series.times[t].month - 1;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        series.at(t, i, j) = clim.mean_at(m, i, j);
      }
    }
  }
  const auto anom = compute_anomalies(series, clim);
  for (int t = 0; t < anom.ntime(); ++t) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(anom.at(t, i, j) == 0.0);
      }
    }
  }
}

TEST_CASE("single point anomaly arithmetic") {
  auto series = testutil::random_series(1, 1, 24, 11);
  series.at(0, 0, 0) = 4.0;
  auto clim = compute_monthly_climatology(series, {1980, 1}, {1981, 12});
  clim.mean_at(0, 0, 0) = 1.5;
  const auto anom = compute_anomalies(series, clim);
  CHECK(anom.at(0, 0, 0) == 2.5);
}

TEST_CASE("adding the climatology back reproduces the series") {
  const auto series = testutil::random_series(3, 3, 120, 12, true);
  const auto clim = compute_monthly_climatology(series, {1982, 1}, {1987, 12});
  const auto anom = compute_anomalies(series, clim);
  for (int t = 0; t < series.ntime(); ++t) {
    const int m = series.times[t].month - 1;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (!series.valid(i, j)) {
          CHECK(std::isnan(anom.at(t, i, j)));
          continue;
        }
        const double rebuilt = anom.at(t, i, j) + clim.mean_at(m, i, j);
        CHECK(rebuilt == doctest::Approx(series.at(t, i, j)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("anomaly grid/mask mismatches are rejected") {
  const auto series = testutil::random_series(2, 2, 24, 13);
  auto clim = compute_monthly_climatology(series, {1980, 1}, {1981, 12});
  clim.nlat = 3;
  CHECK_ERROR_KIND(compute_anomalies(series, clim), ErrorKind::GridMismatch);

  auto clim2 = compute_monthly_climatology(series, {1980, 1}, {1981, 12});
  clim2.mask[0] = 0;
  CHECK_ERROR_KIND(compute_anomalies(series, clim2), ErrorKind::GridMismatch);
}

// --- state matrix -----------------------------------------------------------

TEST_CASE("masked flattening counts valid points") {
  auto series = testutil::random_series(2, 2, 4, 14);
  series.mask = {1, 0, 1, 1};
  series.at(0, 0, 1) = fill_value();
  series.at(1, 0, 1) = fill_value();
  series.at(2, 0, 1) = fill_value();
  series.at(3, 0, 1) = fill_value();
  const auto sm = to_state_matrix(series);
  CHECK(sm.data.rows() == 3);
  CHECK(sm.data.cols() == 4);
  CHECK(sm.point_index.size() == 3);

  const auto full = testutil::random_series(3, 5, 4, 15);
  CHECK(to_state_matrix(full).data.rows() == 15);
}

TEST_CASE("all-false masks cannot be flattened") {
  auto series = testutil::random_series(2, 2, 4, 16);
  series.mask.assign(4, 0);
  series.values.assign(series.values.size(), fill_value());
  CHECK_ERROR_KIND(to_state_matrix(series), ErrorKind::EmptyMask);
}

TEST_CASE("state vector scatter/gather round trip") {
  const auto series = testutil::random_series(4, 6, 5, 17, true);
  const auto sm = to_state_matrix(series);

  // column -> field reproduces the original slice
  for (int t = 0; t < 5; ++t) {
    const auto field = from_state_vector(sm, sm.data.col(t));
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (series.valid(i, j)) {
          CHECK(field[i * 6 + j] == series.at(t, i, j));
        } else {
          CHECK(std::isnan(field[i * 6 + j]));
        }
      }
    }
  }

  // zero and unit vectors
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sm.state_dim());
  const auto zero_field = from_state_vector(sm, zero);
  for (const auto& [i, j] : sm.point_index) CHECK(zero_field[i * 6 + j] == 0.0);

  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(sm.state_dim());
  e1(0) = 1.0;
  const auto e1_field = from_state_vector(sm, e1);
  const auto [i0, j0] = sm.point_index[0];
  CHECK(e1_field[i0 * 6 + j0] == 1.0);
  for (std::size_t row = 1; row < sm.point_index.size(); ++row) {
    const auto [i, j] = sm.point_index[row];
    CHECK(e1_field[i * 6 + j] == 0.0);
  }

  CHECK_ERROR_KIND(from_state_vector(sm, Eigen::VectorXd::Zero(sm.state_dim() + 1)),
                   ErrorKind::SizeMismatch);
}

TEST_CASE("time range subsetting") {
  const auto series = testutil::random_series(2, 2, 24, 18);
  const auto sub = subset_time_range(series, {1980, 7}, {1981, 3});
  CHECK(sub.ntime() == 9);
  CHECK(sub.times.front() == YearMonth{1980, 7});
  CHECK(sub.at(0, 1, 1) == series.at(6, 1, 1));
  CHECK_ERROR_KIND(subset_time_range(series, {1979, 1}, {1980, 5}),
                   ErrorKind::WindowOutOfRange);
}
