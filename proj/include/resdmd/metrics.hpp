#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "resdmd/dmd.hpp"
#include "resdmd/grid.hpp"
#include "resdmd/net.hpp"

namespace resdmd {

enum class MetricKind { Acc, DeltaAcc, Rmse };

std::string to_string(MetricKind k);
MetricKind parse_metric_kind(const std::string& text);

// Per-grid-point verification field. Points with no defined value (masked in
// the inputs, or zero variance for ACC) are masked here and hold NaN.
struct SkillMap {
  int nlat = 0;
  int nlon = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> values;
  MetricKind kind = MetricKind::Acc;
  int lead_months = 0;
  int n_samples = 0;

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * nlon + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * nlon + j]; }
  bool valid(int i, int j) const { return mask[static_cast<std::size_t>(i) * nlon + j] != 0; }
};

// Pearson correlation over time between predicted and observed anomalies at
// each valid point, both series centered by their own means over the
// verification window. pred and obs must share grid, mask, and time axis
// (pred is indexed by verification time). calendar_month, when set, restricts
// the samples to one calendar month (1..12).
SkillMap acc_map(const GridSeries& pred, const GridSeries& obs, int lead_months,
                 std::optional<int> calendar_month = std::nullopt);

SkillMap delta_acc_map(const SkillMap& model_acc, const SkillMap& baseline_acc);

SkillMap rmse_map(const GridSeries& pred, const GridSeries& obs, int lead_months = 0);

// Forecast engine abstraction: maps (state, n_steps) to a predicted state.
using StepForecaster = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

// Runs the model forward `lead_months` steps from every admissible
// initialization state in obs; the output series is indexed by verification
// time (obs.times shifted by the lead).
GridSeries rolling_forecast_set(const StepForecaster& forecaster,
                                const GridSeries& obs_anomalies, int lead_months);
GridSeries rolling_forecast_set(const DmdModel& model, const GridSeries& obs_anomalies,
                                int lead_months);
GridSeries rolling_forecast_set(const ResDmdModel& model, const GridSeries& obs_anomalies,
                                int lead_months);

// Area-weighted mean over valid points, with cosine-latitude weights for
// equally spaced cell centers pole to pole.
double area_weighted_mean(const SkillMap& map);

void save_skill_map(const SkillMap& map, const std::filesystem::path& path);
SkillMap load_skill_map(const std::filesystem::path& path);

}  // namespace resdmd
