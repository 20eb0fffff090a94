#include "resdmd/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "resdmd/container.hpp"

namespace resdmd {

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Acc: return "acc";
    case MetricKind::DeltaAcc: return "delta_acc";
    case MetricKind::Rmse: return "rmse";
  }
  return "acc";
}

MetricKind parse_metric_kind(const std::string& text) {
  if (text == "acc") return MetricKind::Acc;
  if (text == "delta_acc") return MetricKind::DeltaAcc;
  if (text == "rmse") return MetricKind::Rmse;
  fail(ErrorKind::MalformedHeader, "unknown metric kind \"" + text + "\"");
}

namespace {

void check_aligned(const GridSeries& pred, const GridSeries& obs) {
  if (pred.nlat != obs.nlat || pred.nlon != obs.nlon) {
    fail(ErrorKind::GridMismatch, "prediction and observation grids differ in shape");
  }
  if (pred.mask != obs.mask) {
    fail(ErrorKind::GridMismatch, "prediction and observation masks differ");
  }
  if (pred.times != obs.times) {
    fail(ErrorKind::GridMismatch, "prediction and observation time axes differ");
  }
}

SkillMap empty_like(const GridSeries& series, MetricKind kind, int lead, int n_samples) {
  SkillMap map;
  map.nlat = series.nlat;
  map.nlon = series.nlon;
  map.mask = series.mask;
  map.values.assign(series.points(), fill_value());
  map.kind = kind;
  map.lead_months = lead;
  map.n_samples = n_samples;
  return map;
}

}  // namespace

SkillMap acc_map(const GridSeries& pred, const GridSeries& obs, int lead_months,
                 std::optional<int> calendar_month) {
  check_aligned(pred, obs);
  if (calendar_month && (*calendar_month < 1 || *calendar_month > 12)) {
    fail(ErrorKind::InvalidArgument, "calendar month must lie in 1..12");
  }

  std::vector<int> samples;
  for (int t = 0; t < obs.ntime(); ++t) {
    if (!calendar_month || obs.times[t].month == *calendar_month) {
      samples.push_back(t);
    }
  }
  const int n = static_cast<int>(samples.size());
  if (n < 3) {
    fail(ErrorKind::InsufficientSamples,
         "need at least 3 verification samples per point, have " + std::to_string(n));
  }

  SkillMap map = empty_like(obs, MetricKind::Acc, lead_months, n);
  for (int i = 0; i < obs.nlat; ++i) {
    for (int j = 0; j < obs.nlon; ++j) {
      if (!obs.valid(i, j)) continue;
      double mean_p = 0.0, mean_o = 0.0;
      for (int t : samples) {
        mean_p += pred.at(t, i, j);
        mean_o += obs.at(t, i, j);
      }
      mean_p /= n;
      mean_o /= n;
      double spo = 0.0, spp = 0.0, soo = 0.0;
      for (int t : samples) {
        const double dp = pred.at(t, i, j) - mean_p;
        const double dobs = obs.at(t, i, j) - mean_o;
        spo += dp * dobs;
        spp += dp * dp;
        soo += dobs * dobs;
      }
      // zero variance on either side: the point carries no correlation value
      if (spp == 0.0 || soo == 0.0) {
        map.mask[static_cast<std::size_t>(i) * map.nlon + j] = 0;
        continue;
      }
      map.at(i, j) = spo / std::sqrt(spp * soo);
    }
  }
  return map;
}

SkillMap delta_acc_map(const SkillMap& model_acc, const SkillMap& baseline_acc) {
  if (model_acc.nlat != baseline_acc.nlat || model_acc.nlon != baseline_acc.nlon) {
    fail(ErrorKind::GridMismatch, "skill maps differ in shape");
  }
  if (model_acc.kind != MetricKind::Acc || baseline_acc.kind != MetricKind::Acc) {
    fail(ErrorKind::InvalidArgument, "delta maps are defined between two ACC maps");
  }
  if (model_acc.lead_months != baseline_acc.lead_months) {
    fail(ErrorKind::InvalidArgument, "skill maps differ in lead time");
  }

  SkillMap out;
  out.nlat = model_acc.nlat;
  out.nlon = model_acc.nlon;
  out.kind = MetricKind::DeltaAcc;
  out.lead_months = model_acc.lead_months;
  out.n_samples = model_acc.n_samples;
  out.mask.assign(model_acc.mask.size(), 0);
  out.values.assign(model_acc.values.size(), fill_value());
  for (std::size_t p = 0; p < out.mask.size(); ++p) {
    if (model_acc.mask[p] && baseline_acc.mask[p]) {
      out.mask[p] = 1;
      out.values[p] = model_acc.values[p] - baseline_acc.values[p];
    }
  }
  return out;
}

SkillMap rmse_map(const GridSeries& pred, const GridSeries& obs, int lead_months) {
  check_aligned(pred, obs);
  const int n = obs.ntime();
  SkillMap map = empty_like(obs, MetricKind::Rmse, lead_months, n);
  for (int i = 0; i < obs.nlat; ++i) {
    for (int j = 0; j < obs.nlon; ++j) {
      if (!obs.valid(i, j)) continue;
      double sse = 0.0;
      for (int t = 0; t < n; ++t) {
        const double d = pred.at(t, i, j) - obs.at(t, i, j);
        sse += d * d;
      }
      map.at(i, j) = std::sqrt(sse / n);
    }
  }
  return map;
}

GridSeries rolling_forecast_set(const StepForecaster& forecaster,
                                const GridSeries& obs_anomalies, int lead_months) {
  if (lead_months < 1) {
    fail(ErrorKind::InvalidArgument, "lead must be >= 1 month");
  }
  const int n_out = obs_anomalies.ntime() - lead_months;
  if (n_out < 1) {
    fail(ErrorKind::EmptyWindow,
         "no verification times: series has " + std::to_string(obs_anomalies.ntime()) +
             " months, lead is " + std::to_string(lead_months));
  }
  const StateMatrix states = to_state_matrix(obs_anomalies);
  Eigen::MatrixXd predictions(states.state_dim(), n_out);
  for (int t = 0; t < n_out; ++t) {
    predictions.col(t) = forecaster(states.data.col(t), lead_months);
  }
  const std::vector<YearMonth> verif_times(obs_anomalies.times.begin() + lead_months,
                                           obs_anomalies.times.end());
  return grid_series_from_columns(states, predictions, verif_times,
                                  obs_anomalies.variable, obs_anomalies.units);
}

GridSeries rolling_forecast_set(const DmdModel& model, const GridSeries& obs_anomalies,
                                int lead_months) {
  return rolling_forecast_set(
      [&model](const Eigen::VectorXd& x, int n) { return forecast(model, x, n); },
      obs_anomalies, lead_months);
}

GridSeries rolling_forecast_set(const ResDmdModel& model, const GridSeries& obs_anomalies,
                                int lead_months) {
  return rolling_forecast_set(
      [&model](const Eigen::VectorXd& x, int n) { return forward(model, x, n); },
      obs_anomalies, lead_months);
}

double area_weighted_mean(const SkillMap& map) {
  // cell centers of an equally spaced latitude grid spanning pole to pole
  double weighted = 0.0;
  double total = 0.0;
  for (int i = 0; i < map.nlat; ++i) {
    const double lat_deg = -90.0 + (i + 0.5) * 180.0 / map.nlat;
    const double w = std::cos(lat_deg * M_PI / 180.0);
    for (int j = 0; j < map.nlon; ++j) {
      if (map.valid(i, j)) {
        weighted += w * map.at(i, j);
        total += w;
      }
    }
  }
  if (total == 0.0) {
    fail(ErrorKind::EmptyMask, "skill map has no valid points");
  }
  return weighted / total;
}

void save_skill_map(const SkillMap& map, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "skill_map";
  header["variable"] = to_string(map.kind);
  header["units"] = "1";
  header["nlat"] = map.nlat;
  header["nlon"] = map.nlon;
  header["ntime"] = 1;
  header["fill_value"] = "nan";
  header["dtype"] = "float32";
  header["mask_rle"] = mask_to_rle(map.mask);
  header["metric"] = to_string(map.kind);
  header["lead_months"] = map.lead_months;
  header["n_samples"] = map.n_samples;

  std::vector<double> out(map.values.size());
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    out[p] = map.mask[p] ? map.values[p] : fill_value();
  }
  const auto payload = encode_f32(out);
  write_container(path, header, payload.data(), payload.size());
}

SkillMap load_skill_map(const std::filesystem::path& path) {
  const auto c = read_container(path);
  if (require_string(c.header, "kind") != "skill_map") {
    fail(ErrorKind::MalformedHeader, path.string() + ": not a skill_map container");
  }
  SkillMap map;
  map.nlat = static_cast<int>(require_int(c.header, "nlat"));
  map.nlon = static_cast<int>(require_int(c.header, "nlon"));
  if (map.nlat < 1 || map.nlon < 1) {
    fail(ErrorKind::MalformedHeader, path.string() + ": non-positive dimensions");
  }
  if (require_int(c.header, "ntime") != 1) {
    fail(ErrorKind::DimensionMismatch, path.string() + ": skill maps hold exactly one slice");
  }
  map.kind = parse_metric_kind(require_string(c.header, "metric"));
  map.lead_months = static_cast<int>(require_int(c.header, "lead_months"));
  map.n_samples = static_cast<int>(require_int(c.header, "n_samples"));
  const std::size_t n_points = static_cast<std::size_t>(map.nlat) * map.nlon;
  auto rle_field = require_field(c.header, "mask_rle");
  std::vector<std::int64_t> rle;
  for (const auto& e : rle_field) rle.push_back(e.get<std::int64_t>());
  map.mask = rle_to_mask(rle, n_points);
  if (c.payload.size() != n_points * sizeof(float)) {
    fail(ErrorKind::DimensionMismatch, path.string() + ": payload size does not match header");
  }
  map.values = decode_f32(c.payload.data(), n_points);
  return map;
}

}  // namespace resdmd
