// resdmd command-line pipeline: synthetic data, anomaly preparation, model
// fitting and training, rolling-forecast evaluation, and heatmap rendering.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "resdmd/container.hpp"
#include "resdmd/dmd.hpp"
#include "resdmd/error.hpp"
#include "resdmd/grid.hpp"
#include "resdmd/metrics.hpp"
#include "resdmd/net.hpp"
#include "resdmd/synth.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 ok, 2 usage, then one code per error family
int exit_code_for(resdmd::ErrorFamily family) {
  switch (family) {
    case resdmd::ErrorFamily::Format: return 3;
    case resdmd::ErrorFamily::Domain: return 4;
    case resdmd::ErrorFamily::Numeric: return 5;
    case resdmd::ErrorFamily::Io: return 6;
  }
  return 1;
}

std::uint64_t fnv1a_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    resdmd::fail(resdmd::ErrorKind::IoError, "cannot open " + path.string());
  }
  std::uint64_t hash = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Every artifact-producing command records how it was invoked next to its
// primary output: resolved parameters, input digests, seed, version, time.
struct ManifestBuilder {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed;

  void input(const std::filesystem::path& path) {
    inputs[path.string()] = hex64(fnv1a_digest(path));
  }

  void write(const std::string& command, const std::filesystem::path& primary_output) const {
    nlohmann::ordered_json m;
    m["format_version"] = resdmd::kFormatVersion;
    m["command"] = command;
    m["parameters"] = params;
    m["inputs"] = inputs;
    if (seed) {
      m["seed"] = *seed;
    } else {
      m["seed"] = nullptr;
    }
    m["toolkit_version"] = kVersion;
    m["timestamp_utc"] = utc_timestamp();
    std::ofstream out(primary_output.string() + ".manifest.json", std::ios::trunc);
    if (!out) {
      resdmd::fail(resdmd::ErrorKind::IoError,
                   "cannot write manifest next to " + primary_output.string());
    }
    out << m.dump(2) << "\n";
  }
};

std::pair<resdmd::YearMonth, resdmd::YearMonth> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    resdmd::fail(resdmd::ErrorKind::InvalidArgument,
                 "expected a range YYYY-MM:YYYY-MM, got \"" + text + "\"");
  }
  return {resdmd::parse_year_month(text.substr(0, colon)),
          resdmd::parse_year_month(text.substr(colon + 1))};
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stoi(item));
  }
  if (values.empty()) {
    resdmd::fail(resdmd::ErrorKind::InvalidArgument, "empty integer list \"" + text + "\"");
  }
  return values;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RESDMD_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 1;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string kind = "linear_diag";
  int nlat = 4, nlon = 4, steps = 100;
  std::uint64_t seed = default_seed();
  double noise = 0.0, theta = M_PI / 6.0, radius = 1.0, gamma = 0.0, init_norm = 1.0;
  std::string eigs = "0.9,0.5";
  std::string start = "1980-01";
  std::string variable = "anom";
  std::string units = "K";
  std::string out;
};

int run_synth(const SynthArgs& a) {
  resdmd::SynthSpec spec;
  spec.kind = resdmd::parse_synth_kind(a.kind);
  spec.nlat = a.nlat;
  spec.nlon = a.nlon;
  spec.t_steps = a.steps;
  spec.seed = a.seed;
  spec.noise_std = a.noise;
  spec.theta = a.theta;
  spec.radius = a.radius;
  spec.gamma = a.gamma;
  spec.init_norm = a.init_norm;
  spec.eigs = parse_double_list(a.eigs);
  spec.latent_dim = spec.kind == resdmd::SynthKind::LinearDiag
                        ? static_cast<int>(spec.eigs.size())
                        : 2;
  spec.start = resdmd::parse_year_month(a.start);
  spec.variable = a.variable;
  spec.units = a.units;

  resdmd::StateMatrix data;
  if (spec.kind == resdmd::SynthKind::NonlinearCubic) {
    data = resdmd::gen_nonlinear_cubic(spec).data;
  } else {
    auto synth = resdmd::gen_linear(spec);
    data = std::move(synth.data);
    std::printf("true eigenvalues:");
    for (Eigen::Index i = 0; i < synth.true_eigenvalues.size(); ++i) {
      std::printf(" %.12g%+.12gi", synth.true_eigenvalues(i).real(),
                  synth.true_eigenvalues(i).imag());
    }
    std::printf("\n");
  }
  resdmd::save_grid_series(resdmd::synth_to_grid_series(spec, data), a.out);

  ManifestBuilder mb;
  mb.params["kind"] = a.kind;
  mb.params["nlat"] = a.nlat;
  mb.params["nlon"] = a.nlon;
  mb.params["steps"] = a.steps;
  mb.params["noise"] = a.noise;
  mb.params["eigs"] = a.eigs;
  mb.params["theta"] = a.theta;
  mb.params["radius"] = a.radius;
  mb.params["gamma"] = a.gamma;
  mb.params["init_norm"] = a.init_norm;
  mb.params["start"] = a.start;
  mb.params["variable"] = a.variable;
  mb.params["units"] = a.units;
  mb.params["out"] = a.out;
  mb.seed = a.seed;
  mb.write("synth", a.out);
  std::printf("wrote %s (%dx%d grid, %d months)\n", a.out.c_str(), a.nlat, a.nlon, a.steps);
  return 0;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string input;
  std::string clim_start = "1980-01";
  std::string clim_end = "2010-12";
  std::string train_range;
  std::string test_range;
  std::string out_prefix;
};

int run_prepare(const PrepareArgs& a) {
  const auto raw = resdmd::load_grid_series(a.input);
  const auto clim = resdmd::compute_monthly_climatology(
      raw, resdmd::parse_year_month(a.clim_start), resdmd::parse_year_month(a.clim_end));
  const auto anom = resdmd::compute_anomalies(raw, clim);

  const std::string clim_path = a.out_prefix + ".clim.rdc";
  const std::string anom_path = a.out_prefix + ".anom.rdc";
  resdmd::save_climatology(clim, clim_path);
  resdmd::save_grid_series(anom, anom_path);
  std::printf("wrote %s\nwrote %s\n", clim_path.c_str(), anom_path.c_str());

  if (!a.train_range.empty()) {
    const auto [first, last] = parse_range(a.train_range);
    resdmd::save_grid_series(resdmd::subset_time_range(anom, first, last),
                             a.out_prefix + ".train.rdc");
    std::printf("wrote %s.train.rdc\n", a.out_prefix.c_str());
  }
  if (!a.test_range.empty()) {
    const auto [first, last] = parse_range(a.test_range);
    resdmd::save_grid_series(resdmd::subset_time_range(anom, first, last),
                             a.out_prefix + ".test.rdc");
    std::printf("wrote %s.test.rdc\n", a.out_prefix.c_str());
  }

  ManifestBuilder mb;
  mb.params["input"] = a.input;
  mb.params["clim_start"] = a.clim_start;
  mb.params["clim_end"] = a.clim_end;
  mb.params["train_range"] = a.train_range;
  mb.params["test_range"] = a.test_range;
  mb.params["out_prefix"] = a.out_prefix;
  mb.input(a.input);
  mb.write("prepare", anom_path);
  return 0;
}

// ---------------------------------------------------------------------------
// fit-dmd

struct FitArgs {
  std::string train;
  int rank = 0;
  std::string out;
};

int run_fit_dmd(const FitArgs& a) {
  if (a.rank < 1) {
    resdmd::fail(resdmd::ErrorKind::InvalidArgument, "--rank must be >= 1");
  }
  const auto series = resdmd::load_grid_series(a.train);
  const auto states = resdmd::to_state_matrix(series);
  const auto sv = resdmd::singular_values(states.data);
  const auto model = resdmd::fit_dmd(states, a.rank);
  resdmd::save_dmd_model(model, a.out);

  // singular-value energy report, to guide the rank choice
  double total = 0.0;
  for (double s : sv) total += s * s;
  const std::string report_path = a.out + ".sv.txt";
  std::ofstream report(report_path, std::ios::trunc);
  if (!report) {
    resdmd::fail(resdmd::ErrorKind::IoError, "cannot write " + report_path);
  }
  report << "# index  sigma  energy_fraction  cumulative\n";
  double cum = 0.0;
  char line[128];
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double frac = total > 0.0 ? sv[i] * sv[i] / total : 0.0;
    cum += frac;
    std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g\n", i + 1, sv[i], frac, cum);
    report << line;
  }
  report.close();

  std::printf("fitted rank-%d model on %d points x %d months\n", a.rank,
              states.state_dim(), states.ntime());
  std::printf("eigenvalues:");
  for (int i = 0; i < model.rank; ++i) {
    std::printf(" %.12g%+.12gi", model.lambda(i).real(), model.lambda(i).imag());
  }
  std::printf("\nwrote %s and %s\n", a.out.c_str(), report_path.c_str());

  ManifestBuilder mb;
  mb.params["train"] = a.train;
  mb.params["rank"] = a.rank;
  mb.params["out"] = a.out;
  mb.input(a.train);
  mb.write("fit-dmd", a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model;
  std::string train;
  std::string val;
  std::string out;
  std::string hidden = "";  // empty = default 2 x (2 * latent_dim)
  std::string activation = "tanh";
  std::string loss_space = "state";
  double lr = 0.05, momentum = 0.9, eps = 1e-3;
  int batch = 16, epochs = 200, rollout = 1;
  std::uint64_t seed = default_seed();
};

int run_train(const TrainArgs& a) {
  const auto dmd_model = resdmd::load_dmd_model(a.model);
  const auto series = resdmd::load_grid_series(a.train);
  const auto states = resdmd::to_state_matrix(series);

  resdmd::MlpSpec spec;
  spec.activation = resdmd::parse_activation(a.activation);
  if (a.hidden.empty()) {
    const int width = 2 * dmd_model.rank;  // latent dim equals the DMD rank
    spec.hidden = {width, width};
  } else if (a.hidden != "none") {
    for (int w : parse_int_list(a.hidden)) spec.hidden.push_back(w);
  }

  resdmd::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.rollout_steps = a.rollout;
  cfg.seed = a.seed;
  cfg.loss_space = resdmd::parse_loss_space(a.loss_space);

  auto model = resdmd::init_from_dmd(dmd_model, spec, a.eps, a.seed);
  const double initial_loss = resdmd::loss(model, states, cfg);

  std::optional<resdmd::StateMatrix> val_states;
  if (!a.val.empty()) {
    val_states = resdmd::to_state_matrix(resdmd::load_grid_series(a.val));
  }
  const auto history =
      resdmd::train(model, states, val_states ? &*val_states : nullptr, cfg);
  resdmd::save_checkpoint(model, a.out);

  const std::string history_path = a.out + ".history.txt";
  std::ofstream hist(history_path, std::ios::trunc);
  if (!hist) {
    resdmd::fail(resdmd::ErrorKind::IoError, "cannot write " + history_path);
  }
  char line[160];
  hist << "# epoch  train_loss  val_loss\n";
  std::snprintf(line, sizeof(line), "0 %.17g %s\n", initial_loss, "-");
  hist << line;
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& s = history.epochs[e];
    if (s.val_loss) {
      std::snprintf(line, sizeof(line), "%zu %.17g %.17g\n", e + 1, s.train_loss, *s.val_loss);
    } else {
      std::snprintf(line, sizeof(line), "%zu %.17g %s\n", e + 1, s.train_loss, "-");
    }
    hist << line;
  }
  hist.close();

  double wall = 0.0;
  for (const auto& s : history.epochs) wall += s.seconds;
  std::fprintf(stderr, "trained %d epoch(s) in %.2f s\n",
               static_cast<int>(history.epochs.size()), wall);
  const double final_loss =
      history.epochs.empty() ? initial_loss : history.epochs.back().train_loss;
  std::printf("loss: initial %.12g, final %.12g\n", initial_loss, final_loss);
  std::printf("wrote %s and %s\n", a.out.c_str(), history_path.c_str());

  ManifestBuilder mb;
  mb.params["model"] = a.model;
  mb.params["train"] = a.train;
  mb.params["val"] = a.val;
  mb.params["out"] = a.out;
  mb.params["hidden"] = a.hidden;
  mb.params["activation"] = a.activation;
  mb.params["loss_space"] = a.loss_space;
  mb.params["lr"] = a.lr;
  mb.params["momentum"] = a.momentum;
  mb.params["eps"] = a.eps;
  mb.params["batch"] = a.batch;
  mb.params["epochs"] = a.epochs;
  mb.params["rollout"] = a.rollout;
  mb.input(a.model);
  mb.input(a.train);
  if (!a.val.empty()) mb.input(a.val);
  mb.seed = a.seed;
  mb.write("train", a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// forecast / evaluate share the model dispatch

resdmd::StepForecaster load_forecaster(const std::filesystem::path& path, int* state_dim) {
  const auto c = resdmd::read_container(path);
  const std::string kind = resdmd::require_string(c.header, "kind");
  if (kind == "dmd_model") {
    auto model = std::make_shared<resdmd::DmdModel>(resdmd::load_dmd_model(path));
    *state_dim = model->state_dim();
    return [model](const Eigen::VectorXd& x, int n) { return resdmd::forecast(*model, x, n); };
  }
  if (kind == "resdmd_model") {
    auto model = std::make_shared<resdmd::ResDmdModel>(resdmd::load_checkpoint(path));
    *state_dim = model->state_dim();
    return [model](const Eigen::VectorXd& x, int n) { return resdmd::forward(*model, x, n); };
  }
  resdmd::fail(resdmd::ErrorKind::MalformedHeader,
               path.string() + ": expected a dmd_model or resdmd_model container");
}

struct ForecastArgs {
  std::string model;
  std::string obs;
  int lead = 1;
  std::string out;
};

int run_forecast(const ForecastArgs& a) {
  int state_dim = 0;
  const auto forecaster = load_forecaster(a.model, &state_dim);
  const auto obs = resdmd::load_grid_series(a.obs);
  if (static_cast<int>(obs.n_valid()) != state_dim) {
    resdmd::fail(resdmd::ErrorKind::GridMismatch,
                 "model dimension does not match the observation mask");
  }
  const auto pred = resdmd::rolling_forecast_set(forecaster, obs, a.lead);
  resdmd::save_grid_series(pred, a.out);
  std::printf("wrote %s (%d verification months at lead %d)\n", a.out.c_str(),
              pred.ntime(), a.lead);

  ManifestBuilder mb;
  mb.params["model"] = a.model;
  mb.params["obs"] = a.obs;
  mb.params["lead"] = a.lead;
  mb.params["out"] = a.out;
  mb.input(a.model);
  mb.input(a.obs);
  mb.write("forecast", a.out);
  return 0;
}

struct EvaluateArgs {
  std::string model;
  std::string obs;
  std::string leads = "1,6,12";
  std::string verify_range;
  std::string baseline;
  std::string out_prefix;
  int calendar_month = 0;
  bool with_rmse = false;
};

int run_evaluate(const EvaluateArgs& a) {
  int state_dim = 0;
  const auto forecaster = load_forecaster(a.model, &state_dim);
  const auto obs = resdmd::load_grid_series(a.obs);
  if (static_cast<int>(obs.n_valid()) != state_dim) {
    resdmd::fail(resdmd::ErrorKind::GridMismatch,
                 "model dimension does not match the observation mask");
  }
  const auto leads = parse_int_list(a.leads);
  std::optional<std::pair<resdmd::YearMonth, resdmd::YearMonth>> window;
  if (!a.verify_range.empty()) {
    window = parse_range(a.verify_range);
  }
  const std::optional<int> month =
      a.calendar_month > 0 ? std::optional<int>(a.calendar_month) : std::nullopt;

  ManifestBuilder mb;
  bool first_output = true;
  std::string primary;
  for (int lead : leads) {
    auto pred = resdmd::rolling_forecast_set(forecaster, obs, lead);
    auto truth = resdmd::subset_time_range(obs, pred.times.front(), pred.times.back());
    if (window) {
      pred = resdmd::subset_time_range(pred, window->first, window->second);
      truth = resdmd::subset_time_range(truth, window->first, window->second);
    }
    const auto acc = resdmd::acc_map(pred, truth, lead, month);
    const std::string acc_path = a.out_prefix + ".acc.lead" + std::to_string(lead) + ".rdc";
    resdmd::save_skill_map(acc, acc_path);
    if (first_output) {
      primary = acc_path;
      first_output = false;
    }
    std::printf("lead %2d: n_samples=%d, area-weighted mean ACC = %.6f\n", lead,
                acc.n_samples, resdmd::area_weighted_mean(acc));

    if (!a.baseline.empty()) {
      std::string baseline_path = a.baseline;
      const auto marker = baseline_path.find("{lead}");
      if (marker != std::string::npos) {
        baseline_path.replace(marker, 6, std::to_string(lead));
      } else if (leads.size() > 1) {
        resdmd::fail(resdmd::ErrorKind::InvalidArgument,
                     "--baseline needs a {lead} placeholder when several leads are evaluated");
      }
      auto base = resdmd::load_grid_series(baseline_path);
      base = resdmd::subset_time_range(base, truth.times.front(), truth.times.back());
      const auto base_acc = resdmd::acc_map(base, truth, lead, month);
      const auto delta = resdmd::delta_acc_map(acc, base_acc);
      const std::string delta_path =
          a.out_prefix + ".dacc.lead" + std::to_string(lead) + ".rdc";
      resdmd::save_skill_map(delta, delta_path);
      std::printf("lead %2d: area-weighted mean dACC = %.6f\n", lead,
                  resdmd::area_weighted_mean(delta));
      mb.input(baseline_path);
    }

    if (a.with_rmse) {
      const auto rmse = resdmd::rmse_map(pred, truth, lead);
      resdmd::save_skill_map(rmse, a.out_prefix + ".rmse.lead" + std::to_string(lead) + ".rdc");
    }
  }

  mb.params["model"] = a.model;
  mb.params["obs"] = a.obs;
  mb.params["leads"] = a.leads;
  mb.params["verify_range"] = a.verify_range;
  mb.params["baseline"] = a.baseline;
  mb.params["out_prefix"] = a.out_prefix;
  mb.params["calendar_month"] = a.calendar_month;
  mb.params["rmse"] = a.with_rmse;
  mb.input(a.model);
  mb.input(a.obs);
  mb.write("evaluate", primary);
  return 0;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string input;
  std::string out;
  double vmin = -1.0, vmax = 1.0;
  int scale = 8;
};

void diverging_color(double t, unsigned char rgb[3]) {
  // blue -> white -> red
  const double lo[3] = {37, 52, 148};
  const double mid[3] = {255, 255, 255};
  const double hi[3] = {165, 0, 38};
  const double* a = t < 0.5 ? lo : mid;
  const double* b = t < 0.5 ? mid : hi;
  const double u = t < 0.5 ? t * 2.0 : (t - 0.5) * 2.0;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<unsigned char>(std::lround(a[c] + (b[c] - a[c]) * u));
  }
}

int run_render(const RenderArgs& a) {
  if (!(a.vmin < a.vmax)) {
    resdmd::fail(resdmd::ErrorKind::InvalidArgument, "--min must be below --max");
  }
  if (a.scale < 1) {
    resdmd::fail(resdmd::ErrorKind::InvalidArgument, "--pixel-scale must be >= 1");
  }
  const auto map = resdmd::load_skill_map(a.input);
  const int width = map.nlon * a.scale;
  const int height = map.nlat * a.scale;

  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    resdmd::fail(resdmd::ErrorKind::IoError, "cannot write " + a.out);
  }
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 3);
  for (int i = 0; i < map.nlat; ++i) {
    for (int j = 0; j < map.nlon; ++j) {
      unsigned char rgb[3] = {128, 128, 128};  // masked points stay gray
      if (map.valid(i, j) && std::isfinite(map.at(i, j))) {
        double t = (map.at(i, j) - a.vmin) / (a.vmax - a.vmin);
        t = std::min(1.0, std::max(0.0, t));
        diverging_color(t, rgb);
      }
      for (int px = 0; px < a.scale; ++px) {
        std::copy(rgb, rgb + 3, row.begin() + (static_cast<std::size_t>(j) * a.scale + px) * 3);
      }
    }
    for (int py = 0; py < a.scale; ++py) {
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
    }
  }
  out.flush();
  if (!out) {
    resdmd::fail(resdmd::ErrorKind::IoError, "short write to " + a.out);
  }
  std::printf("wrote %s (%dx%d)\n", a.out.c_str(), width, height);

  ManifestBuilder mb;
  mb.params["input"] = a.input;
  mb.params["out"] = a.out;
  mb.params["min"] = a.vmin;
  mb.params["max"] = a.vmax;
  mb.params["pixel_scale"] = a.scale;
  mb.input(a.input);
  mb.write("render", a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear (DMD) and residual-network (ResDMD) forecasting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset container");
  synth->add_option("--kind", synth_args.kind,
                    "linear_diag, rotation, or nonlinear_cubic");
  synth->add_option("--nlat", synth_args.nlat, "grid rows");
  synth->add_option("--nlon", synth_args.nlon, "grid columns");
  synth->add_option("--steps", synth_args.steps, "number of monthly snapshots");
  synth->add_option("--seed", synth_args.seed, "RNG seed (default: RESDMD_SEED or 1)");
  synth->add_option("--noise", synth_args.noise, "Gaussian noise level in embedded space");
  synth->add_option("--eigs", synth_args.eigs, "comma list of linear_diag multipliers");
  synth->add_option("--theta", synth_args.theta, "rotation angle per step (radians)");
  synth->add_option("--radius", synth_args.radius, "rotation modulus / cubic linear gain");
  synth->add_option("--gamma", synth_args.gamma, "cubic radial gain coefficient");
  synth->add_option("--init-norm", synth_args.init_norm, "norm of the latent start state");
  synth->add_option("--start", synth_args.start, "first month, YYYY-MM");
  synth->add_option("--variable", synth_args.variable, "variable name in the header");
  synth->add_option("--units", synth_args.units, "units string in the header");
  synth->add_option("--out", synth_args.out, "output container path")->required();

  PrepareArgs prep_args;
  auto* prepare = app.add_subcommand("prepare",
                                     "climatology, anomalies, and train/test splits");
  prepare->add_option("--input", prep_args.input, "raw grid series container")->required();
  prepare->add_option("--clim-start", prep_args.clim_start, "reference window start YYYY-MM");
  prepare->add_option("--clim-end", prep_args.clim_end, "reference window end YYYY-MM");
  prepare->add_option("--train-range", prep_args.train_range,
                      "write <prefix>.train.rdc (YYYY-MM:YYYY-MM)");
  prepare->add_option("--test-range", prep_args.test_range,
                      "write <prefix>.test.rdc (YYYY-MM:YYYY-MM)");
  prepare->add_option("--out-prefix", prep_args.out_prefix, "output path prefix")->required();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit-dmd", "fit the truncated linear model");
  fit->add_option("--train", fit_args.train, "training anomaly container")->required();
  fit->add_option("--rank", fit_args.rank, "number of modes to keep")->required();
  fit->add_option("--out", fit_args.out, "output model path")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the residual block on anomalies");
  train_cmd->add_option("--model", train_args.model, "fitted dmd model path")->required();
  train_cmd->add_option("--train", train_args.train, "training anomaly container")->required();
  train_cmd->add_option("--val", train_args.val, "optional validation anomaly container");
  train_cmd->add_option("--out", train_args.out, "output checkpoint path")->required();
  train_cmd->add_option("--hidden", train_args.hidden,
                        "comma list of hidden widths, or 'none' (default 2 layers of 2x latent)");
  train_cmd->add_option("--activation", train_args.activation, "tanh or relu");
  train_cmd->add_option("--loss-space", train_args.loss_space, "state or latent");
  train_cmd->add_option("--lr", train_args.lr, "SGD learning rate");
  train_cmd->add_option("--momentum", train_args.momentum, "SGD momentum in [0,1)");
  train_cmd->add_option("--eps", train_args.eps, "nonlinear-path init scale");
  train_cmd->add_option("--batch", train_args.batch, "minibatch size in pairs");
  train_cmd->add_option("--epochs", train_args.epochs, "SGD epochs");
  train_cmd->add_option("--rollout", train_args.rollout, "latent steps per training target");
  train_cmd->add_option("--seed", train_args.seed, "RNG seed (default: RESDMD_SEED or 1)");

  ForecastArgs fc_args;
  auto* fc = app.add_subcommand("forecast", "rolling forecasts at one lead time");
  fc->add_option("--model", fc_args.model, "dmd model or resdmd checkpoint")->required();
  fc->add_option("--obs", fc_args.obs, "anomaly container with initialization states")
      ->required();
  fc->add_option("--lead", fc_args.lead, "lead time in months")->required();
  fc->add_option("--out", fc_args.out, "output prediction container")->required();

  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "skill maps over a verification window");
  eval->add_option("--model", eval_args.model, "dmd model or resdmd checkpoint")->required();
  eval->add_option("--obs", eval_args.obs, "anomaly container (inits + verification)")
      ->required();
  eval->add_option("--leads", eval_args.leads, "comma list of lead months");
  eval->add_option("--verify-range", eval_args.verify_range,
                   "verification window YYYY-MM:YYYY-MM (default: all available)");
  eval->add_option("--baseline", eval_args.baseline,
                   "baseline anomaly-forecast container; use {lead} for multi-lead runs");
  eval->add_option("--calendar-month", eval_args.calendar_month,
                   "restrict ACC to one calendar month (1..12, 0 = pooled)");
  eval->add_flag("--rmse", eval_args.with_rmse, "also write RMSE maps");
  eval->add_option("--out-prefix", eval_args.out_prefix, "output path prefix")->required();

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "render a skill map to a binary PPM heatmap");
  render->add_option("--input", render_args.input, "skill map container")->required();
  render->add_option("--out", render_args.out, "output .ppm path")->required();
  render->add_option("--min", render_args.vmin, "color range minimum");
  render->add_option("--max", render_args.vmax, "color range maximum");
  render->add_option("--pixel-scale", render_args.scale, "pixels per grid cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (prepare->parsed()) return run_prepare(prep_args);
    if (fit->parsed()) return run_fit_dmd(fit_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (fc->parsed()) return run_forecast(fc_args);
    if (eval->parsed()) return run_evaluate(eval_args);
    if (render->parsed()) return run_render(render_args);
  } catch (const resdmd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.family());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
