#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "resdmd/error.hpp"

namespace resdmd {

// Calendar position of a monthly sample. No day/leap logic anywhere: the
// toolkit's time axis is (year, month) pairs at strictly monthly spacing.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) {
    int y = idx / 12;
    int m = idx % 12;
    if (m < 0) {
      m += 12;
      --y;
    }
    return {y, m + 1};
  }
  YearMonth next() const { return from_index(index() + 1); }
  auto operator<=>(const YearMonth&) const = default;
};

std::string to_string(const YearMonth& ym);           // "1980-01"
YearMonth parse_year_month(const std::string& text);  // accepts "YYYY-MM"

inline double fill_value() { return std::numeric_limits<double>::quiet_NaN(); }

// A time-ordered stack of gridded monthly fields plus a validity mask.
// Values are held as doubles in memory; the container stores float32.
// Masked-out points carry NaN and never enter arithmetic.
struct GridSeries {
  int nlat = 0;
  int nlon = 0;
  std::vector<YearMonth> times;
  std::vector<double> values;        // time-major: [t][lat][lon]
  std::vector<std::uint8_t> mask;    // nlat*nlon, 1 = valid
  std::string variable = "sst";
  std::string units = "K";

  int ntime() const { return static_cast<int>(times.size()); }
  std::size_t points() const { return static_cast<std::size_t>(nlat) * nlon; }
  double& at(int t, int i, int j) { return values[(static_cast<std::size_t>(t) * nlat + i) * nlon + j]; }
  double at(int t, int i, int j) const { return values[(static_cast<std::size_t>(t) * nlat + i) * nlon + j]; }
  bool valid(int i, int j) const { return mask[static_cast<std::size_t>(i) * nlon + j] != 0; }
  std::size_t n_valid() const;

  void validate() const;  // throws Error on any broken invariant
};

// Per-calendar-month means over a fixed reference window.
struct Climatology {
  int nlat = 0;
  int nlon = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> monthly_means;  // 12 slices, month-major
  YearMonth ref_start;
  YearMonth ref_end;
  std::string variable;
  std::string units;

  double& mean_at(int m, int i, int j) { return monthly_means[(static_cast<std::size_t>(m) * nlat + i) * nlon + j]; }
  double mean_at(int m, int i, int j) const { return monthly_means[(static_cast<std::size_t>(m) * nlat + i) * nlon + j]; }
};

// Snapshot matrix: column t is the flattening of slice t over valid points.
struct StateMatrix {
  Eigen::MatrixXd data;                            // D x T
  std::vector<std::pair<int, int>> point_index;    // row -> (lat, lon)
  std::vector<YearMonth> times;
  int nlat = 0;
  int nlon = 0;

  int state_dim() const { return static_cast<int>(data.rows()); }
  int ntime() const { return static_cast<int>(data.cols()); }
};

GridSeries load_grid_series(const std::filesystem::path& path);
void save_grid_series(const GridSeries& series, const std::filesystem::path& path);

Climatology load_climatology(const std::filesystem::path& path);
void save_climatology(const Climatology& clim, const std::filesystem::path& path);

Climatology compute_monthly_climatology(const GridSeries& series,
                                        YearMonth ref_start, YearMonth ref_end);
GridSeries compute_anomalies(const GridSeries& series, const Climatology& clim);

StateMatrix to_state_matrix(const GridSeries& series);

// Scatters a state vector back onto the grid; masked-out points get the fill
// value. Returns an nlat*nlon row-major field.
std::vector<double> from_state_vector(const StateMatrix& layout, const Eigen::VectorXd& state);

// Rebuilds a GridSeries from state columns (used for forecast output).
GridSeries grid_series_from_columns(const StateMatrix& layout, const Eigen::MatrixXd& columns,
                                    const std::vector<YearMonth>& times,
                                    const std::string& variable, const std::string& units);

// Inclusive [first, last] sub-series; throws WindowOutOfRange when the window
// does not lie inside the series.
GridSeries subset_time_range(const GridSeries& series, YearMonth first, YearMonth last);

// Mask run-length encoding used by the container header: run lengths of
// alternating values starting with `false` (the first run may be 0).
std::vector<std::int64_t> mask_to_rle(const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> rle_to_mask(const std::vector<std::int64_t>& rle, std::size_t n_points);

}  // namespace resdmd
