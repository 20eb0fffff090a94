#include "resdmd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "resdmd/container.hpp"

namespace resdmd {

std::string to_string(const YearMonth& ym) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
  return buf;
}

YearMonth parse_year_month(const std::string& text) {
  int y = 0, m = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%d%c", &y, &m, &tail) != 2 || m < 1 || m > 12) {
    fail(ErrorKind::InvalidArgument, "expected YYYY-MM, got \"" + text + "\"");
  }
  return {y, m};
}

std::size_t GridSeries::n_valid() const {
  std::size_t n = 0;
  for (auto b : mask) n += (b != 0);
  return n;
}

void GridSeries::validate() const {
  if (nlat < 1 || nlon < 1) {
    fail(ErrorKind::DimensionMismatch, "grid dimensions must be positive");
  }
  if (ntime() < 2) {
    fail(ErrorKind::DimensionMismatch, "a grid series needs at least 2 time slices");
  }
  if (mask.size() != points()) {
    fail(ErrorKind::DimensionMismatch, "mask size does not match grid dimensions");
  }
  if (values.size() != static_cast<std::size_t>(ntime()) * points()) {
    fail(ErrorKind::DimensionMismatch, "value count does not match dimensions");
  }
  for (int t = 0; t + 1 < ntime(); ++t) {
    if (times[t + 1] != times[t].next()) {
      fail(ErrorKind::NonMonotonicTimeAxis,
           "time axis must advance in consecutive monthly steps (" +
               to_string(times[t]) + " -> " + to_string(times[t + 1]) + ")");
    }
  }
  for (const auto& ym : times) {
    if (ym.month < 1 || ym.month > 12) {
      fail(ErrorKind::NonMonotonicTimeAxis, "month out of range in time axis");
    }
  }
  for (int t = 0; t < ntime(); ++t) {
    for (int i = 0; i < nlat; ++i) {
      for (int j = 0; j < nlon; ++j) {
        const double v = at(t, i, j);
        if (valid(i, j) ? !std::isfinite(v) : !std::isnan(v)) {
          fail(ErrorKind::InvalidArgument,
               valid(i, j) ? "non-finite value at a valid grid point"
                           : "masked-out grid point does not hold the fill value");
        }
      }
    }
  }
}

std::vector<std::int64_t> mask_to_rle(const std::vector<std::uint8_t>& mask) {
  std::vector<std::int64_t> rle;
  bool current = false;  // runs alternate starting with false
  std::int64_t run = 0;
  for (auto b : mask) {
    const bool v = (b != 0);
    if (v == current) {
      ++run;
    } else {
      rle.push_back(run);
      current = v;
      run = 1;
    }
  }
  rle.push_back(run);
  return rle;
}

std::vector<std::uint8_t> rle_to_mask(const std::vector<std::int64_t>& rle,
                                      std::size_t n_points) {
  std::vector<std::uint8_t> mask;
  mask.reserve(n_points);
  bool current = false;
  for (auto run : rle) {
    if (run < 0) {
      fail(ErrorKind::MalformedHeader, "negative run length in mask encoding");
    }
    mask.insert(mask.end(), static_cast<std::size_t>(run), current ? 1 : 0);
    current = !current;
  }
  if (mask.size() != n_points) {
    fail(ErrorKind::MalformedHeader, "mask run lengths do not cover the grid");
  }
  return mask;
}

namespace {

nlohmann::ordered_json times_to_json(const std::vector<YearMonth>& times) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& ym : times) {
    arr.push_back({ym.year, ym.month});
  }
  return arr;
}

std::vector<YearMonth> times_from_json(const nlohmann::ordered_json& arr) {
  if (!arr.is_array()) {
    fail(ErrorKind::MalformedHeader, "\"times\" is not an array");
  }
  std::vector<YearMonth> times;
  times.reserve(arr.size());
  for (const auto& entry : arr) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
        !entry[1].is_number_integer()) {
      fail(ErrorKind::MalformedHeader, "time axis entries must be [year, month] pairs");
    }
    times.push_back({entry[0].get<int>(), entry[1].get<int>()});
  }
  return times;
}

std::vector<std::int64_t> rle_from_json(const nlohmann::ordered_json& field) {
  if (!field.is_array()) {
    fail(ErrorKind::MalformedHeader, "\"mask_rle\" is not an array");
  }
  std::vector<std::int64_t> rle;
  rle.reserve(field.size());
  for (const auto& entry : field) {
    if (!entry.is_number_integer()) {
      fail(ErrorKind::MalformedHeader, "mask run lengths must be integers");
    }
    rle.push_back(entry.get<std::int64_t>());
  }
  return rle;
}

// Shared header skeleton for gridded payloads.
nlohmann::ordered_json grid_header(const std::string& kind, const std::string& variable,
                                   const std::string& units, int nlat, int nlon,
                                   int ntime, const std::vector<std::uint8_t>& mask) {
  nlohmann::ordered_json h;
  h["format_version"] = kFormatVersion;
  h["kind"] = kind;
  h["variable"] = variable;
  h["units"] = units;
  h["nlat"] = nlat;
  h["nlon"] = nlon;
  h["ntime"] = ntime;
  h["fill_value"] = "nan";
  h["dtype"] = "float32";
  h["mask_rle"] = mask_to_rle(mask);
  return h;
}

struct GridPayload {
  int nlat = 0;
  int nlon = 0;
  int ntime = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> values;
  std::string variable;
  std::string units;
};

GridPayload parse_grid_payload(const RawContainer& c, const std::string& expected_kind,
                               const std::string& path_for_errors) {
  GridPayload p;
  const std::string kind = require_string(c.header, "kind");
  if (kind != expected_kind) {
    fail(ErrorKind::MalformedHeader,
         path_for_errors + ": expected kind \"" + expected_kind + "\", found \"" + kind + "\"");
  }
  p.variable = require_string(c.header, "variable");
  p.units = require_string(c.header, "units");
  p.nlat = static_cast<int>(require_int(c.header, "nlat"));
  p.nlon = static_cast<int>(require_int(c.header, "nlon"));
  p.ntime = static_cast<int>(require_int(c.header, "ntime"));
  if (p.nlat < 1 || p.nlon < 1 || p.ntime < 1) {
    fail(ErrorKind::MalformedHeader, path_for_errors + ": non-positive dimensions");
  }
  if (require_string(c.header, "dtype") != "float32") {
    fail(ErrorKind::MalformedHeader, path_for_errors + ": gridded payloads must be float32");
  }
  const std::size_t n_points = static_cast<std::size_t>(p.nlat) * p.nlon;
  p.mask = rle_to_mask(rle_from_json(require_field(c.header, "mask_rle")), n_points);
  const std::size_t expected_bytes = sizeof(float) * n_points * p.ntime;
  if (c.payload.size() != expected_bytes) {
    fail(ErrorKind::DimensionMismatch,
         path_for_errors + ": header declares " + std::to_string(p.ntime) +
             " slice(s) but payload holds " +
             std::to_string(c.payload.size() / (sizeof(float) * n_points)));
  }
  p.values = decode_f32(c.payload.data(), n_points * static_cast<std::size_t>(p.ntime));
  return p;
}

}  // namespace

void save_grid_series(const GridSeries& series, const std::filesystem::path& path) {
  series.validate();
  auto header = grid_header("grid_series", series.variable, series.units, series.nlat,
                            series.nlon, series.ntime(), series.mask);
  header["times"] = times_to_json(series.times);

  // Fill values are written at masked points no matter what memory holds.
  std::vector<double> out(series.values.size());
  const std::size_t n_points = series.points();
  for (int t = 0; t < series.ntime(); ++t) {
    for (std::size_t p = 0; p < n_points; ++p) {
      const std::size_t idx = t * n_points + p;
      out[idx] = series.mask[p] ? series.values[idx] : fill_value();
    }
  }
  const auto payload = encode_f32(out);
  write_container(path, header, payload.data(), payload.size());
}

GridSeries load_grid_series(const std::filesystem::path& path) {
  const auto c = read_container(path);
  const auto p = parse_grid_payload(c, "grid_series", path.string());

  GridSeries series;
  series.nlat = p.nlat;
  series.nlon = p.nlon;
  series.mask = p.mask;
  series.values = p.values;
  series.variable = p.variable;
  series.units = p.units;
  series.times = times_from_json(require_field(c.header, "times"));
  if (static_cast<int>(series.times.size()) != p.ntime) {
    fail(ErrorKind::MalformedHeader, path.string() + ": time axis length disagrees with ntime");
  }
  series.validate();
  return series;
}

void save_climatology(const Climatology& clim, const std::filesystem::path& path) {
  if (clim.monthly_means.size() != 12u * clim.nlat * clim.nlon) {
    fail(ErrorKind::DimensionMismatch, "climatology must hold exactly 12 monthly slices");
  }
  auto header = grid_header("climatology", clim.variable, clim.units, clim.nlat,
                            clim.nlon, 12, clim.mask);
  header["ref_start"] = {clim.ref_start.year, clim.ref_start.month};
  header["ref_end"] = {clim.ref_end.year, clim.ref_end.month};

  std::vector<double> out(clim.monthly_means.size());
  const std::size_t n_points = static_cast<std::size_t>(clim.nlat) * clim.nlon;
  for (int m = 0; m < 12; ++m) {
    for (std::size_t p = 0; p < n_points; ++p) {
      const std::size_t idx = m * n_points + p;
      out[idx] = clim.mask[p] ? clim.monthly_means[idx] : fill_value();
    }
  }
  const auto payload = encode_f32(out);
  write_container(path, header, payload.data(), payload.size());
}

Climatology load_climatology(const std::filesystem::path& path) {
  const auto c = read_container(path);
  const auto p = parse_grid_payload(c, "climatology", path.string());
  if (p.ntime != 12) {
    fail(ErrorKind::DimensionMismatch, path.string() + ": climatology must have 12 slices");
  }
  Climatology clim;
  clim.nlat = p.nlat;
  clim.nlon = p.nlon;
  clim.mask = p.mask;
  clim.monthly_means = p.values;
  clim.variable = p.variable;
  clim.units = p.units;
  const auto start = times_from_json(nlohmann::ordered_json::array(
      {require_field(c.header, "ref_start")}));
  const auto end = times_from_json(nlohmann::ordered_json::array(
      {require_field(c.header, "ref_end")}));
  clim.ref_start = start[0];
  clim.ref_end = end[0];
  return clim;
}

Climatology compute_monthly_climatology(const GridSeries& series, YearMonth ref_start,
                                        YearMonth ref_end) {
  if (ref_start > ref_end) {
    fail(ErrorKind::WindowOutOfRange, "reference window start is after its end");
  }
  if (series.times.empty() || ref_start < series.times.front() ||
      ref_end > series.times.back()) {
    fail(ErrorKind::WindowOutOfRange,
         "reference window " + to_string(ref_start) + ".." + to_string(ref_end) +
             " lies outside the series time axis");
  }

  const std::size_t n_points = series.points();
  std::vector<double> sums(12 * n_points, 0.0);
  std::vector<int> counts(12, 0);
  for (int t = 0; t < series.ntime(); ++t) {
    const auto& ym = series.times[t];
    if (ym < ref_start || ym > ref_end) continue;
    const int m = ym.month - 1;
    ++counts[m];
    for (std::size_t p = 0; p < n_points; ++p) {
      if (series.mask[p]) {
        sums[m * n_points + p] += series.values[t * n_points + p];
      }
    }
  }
  for (int m = 0; m < 12; ++m) {
    if (counts[m] == 0) {
      fail(ErrorKind::MissingCalendarMonth,
           "reference window has no sample for calendar month " + std::to_string(m + 1));
    }
  }

  Climatology clim;
  clim.nlat = series.nlat;
  clim.nlon = series.nlon;
  clim.mask = series.mask;
  clim.ref_start = ref_start;
  clim.ref_end = ref_end;
  clim.variable = series.variable;
  clim.units = series.units;
  clim.monthly_means.assign(12 * n_points, fill_value());
  for (int m = 0; m < 12; ++m) {
    for (std::size_t p = 0; p < n_points; ++p) {
      if (series.mask[p]) {
        clim.monthly_means[m * n_points + p] = sums[m * n_points + p] / counts[m];
      }
    }
  }
  return clim;
}

GridSeries compute_anomalies(const GridSeries& series, const Climatology& clim) {
  if (clim.nlat != series.nlat || clim.nlon != series.nlon) {
    fail(ErrorKind::GridMismatch, "climatology grid shape does not match the series");
  }
  if (clim.mask != series.mask) {
    fail(ErrorKind::GridMismatch, "climatology mask does not match the series");
  }
  GridSeries anom = series;
  const std::size_t n_points = series.points();
  for (int t = 0; t < series.ntime(); ++t) {
    const int m = series.times[t].month - 1;
    for (std::size_t p = 0; p < n_points; ++p) {
      if (series.mask[p]) {
        anom.values[t * n_points + p] =
            series.values[t * n_points + p] - clim.monthly_means[m * n_points + p];
      }
    }
  }
  return anom;
}

StateMatrix to_state_matrix(const GridSeries& series) {
  StateMatrix sm;
  sm.nlat = series.nlat;
  sm.nlon = series.nlon;
  sm.times = series.times;
  for (int i = 0; i < series.nlat; ++i) {
    for (int j = 0; j < series.nlon; ++j) {
      if (series.valid(i, j)) {
        sm.point_index.emplace_back(i, j);
      }
    }
  }
  if (sm.point_index.empty()) {
    fail(ErrorKind::EmptyMask, "mask has no valid points");
  }
  const int d = static_cast<int>(sm.point_index.size());
  sm.data.resize(d, series.ntime());
  for (int t = 0; t < series.ntime(); ++t) {
    for (int row = 0; row < d; ++row) {
      const auto [i, j] = sm.point_index[row];
      sm.data(row, t) = series.at(t, i, j);
    }
  }
  return sm;
}

std::vector<double> from_state_vector(const StateMatrix& layout, const Eigen::VectorXd& state) {
  if (state.size() != static_cast<Eigen::Index>(layout.point_index.size())) {
    fail(ErrorKind::SizeMismatch,
         "state vector length " + std::to_string(state.size()) + " does not match " +
             std::to_string(layout.point_index.size()) + " valid points");
  }
  std::vector<double> field(static_cast<std::size_t>(layout.nlat) * layout.nlon, fill_value());
  for (std::size_t row = 0; row < layout.point_index.size(); ++row) {
    const auto [i, j] = layout.point_index[row];
    field[static_cast<std::size_t>(i) * layout.nlon + j] = state[static_cast<Eigen::Index>(row)];
  }
  return field;
}

GridSeries grid_series_from_columns(const StateMatrix& layout, const Eigen::MatrixXd& columns,
                                    const std::vector<YearMonth>& times,
                                    const std::string& variable, const std::string& units) {
  if (columns.rows() != static_cast<Eigen::Index>(layout.point_index.size())) {
    fail(ErrorKind::SizeMismatch, "column height does not match the point index");
  }
  if (columns.cols() != static_cast<Eigen::Index>(times.size())) {
    fail(ErrorKind::SizeMismatch, "column count does not match the time axis");
  }
  GridSeries series;
  series.nlat = layout.nlat;
  series.nlon = layout.nlon;
  series.times = times;
  series.variable = variable;
  series.units = units;
  series.mask.assign(static_cast<std::size_t>(layout.nlat) * layout.nlon, 0);
  for (const auto& [i, j] : layout.point_index) {
    series.mask[static_cast<std::size_t>(i) * layout.nlon + j] = 1;
  }
  series.values.assign(times.size() * series.points(), fill_value());
  for (int t = 0; t < static_cast<int>(times.size()); ++t) {
    for (std::size_t row = 0; row < layout.point_index.size(); ++row) {
      const auto [i, j] = layout.point_index[row];
      series.at(t, i, j) = columns(static_cast<Eigen::Index>(row), t);
    }
  }
  return series;
}

GridSeries subset_time_range(const GridSeries& series, YearMonth first, YearMonth last) {
  if (first > last) {
    fail(ErrorKind::WindowOutOfRange, "time range start is after its end");
  }
  if (series.times.empty() || first < series.times.front() || last > series.times.back()) {
    fail(ErrorKind::WindowOutOfRange,
         "range " + to_string(first) + ".." + to_string(last) + " lies outside the series");
  }
  const int offset = first.index() - series.times.front().index();
  const int n = last.index() - first.index() + 1;
  GridSeries out;
  out.nlat = series.nlat;
  out.nlon = series.nlon;
  out.mask = series.mask;
  out.variable = series.variable;
  out.units = series.units;
  out.times.assign(series.times.begin() + offset, series.times.begin() + offset + n);
  const std::size_t n_points = series.points();
  out.values.assign(series.values.begin() + offset * n_points,
                    series.values.begin() + (offset + n) * n_points);
  return out;
}

}  // namespace resdmd
