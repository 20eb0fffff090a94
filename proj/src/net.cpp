#include "resdmd/net.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "resdmd/container.hpp"
#include "resdmd/rng.hpp"

namespace resdmd {

std::string to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

Activation parse_activation(const std::string& text) {
  if (text == "tanh") return Activation::Tanh;
  if (text == "relu") return Activation::Relu;
  fail(ErrorKind::InvalidArgument, "unknown activation \"" + text + "\" (tanh or relu)");
}

std::string to_string(LossSpace s) {
  return s == LossSpace::State ? "state" : "latent";
}

LossSpace parse_loss_space(const std::string& text) {
  if (text == "state") return LossSpace::State;
  if (text == "latent") return LossSpace::Latent;
  fail(ErrorKind::InvalidArgument, "unknown loss space \"" + text + "\" (state or latent)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::InvalidArgument, "learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    fail(ErrorKind::InvalidArgument, "momentum must lie in [0, 1)");
  }
  if (batch_size < 1) {
    fail(ErrorKind::InvalidArgument, "batch size must be >= 1");
  }
  if (epochs < 0) {
    fail(ErrorKind::InvalidArgument, "epochs must be >= 0");
  }
  if (rollout_steps < 1) {
    fail(ErrorKind::InvalidArgument, "rollout steps must be >= 1");
  }
}

namespace {

double activate(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

double activate_deriv(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

Eigen::VectorXd apply_activation(Activation a, const Eigen::VectorXd& z) {
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = activate(a, z(i));
  return out;
}

void zero_off_block(Eigen::MatrixXd& m, const std::vector<int>& block_sizes) {
  Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  int offset = 0;
  for (int size : block_sizes) {
    masked.block(offset, offset, size, size) = m.block(offset, offset, size, size);
    offset += size;
  }
  m.swap(masked);
}

// Cached forward pass through the MLP: layer inputs and pre-activations,
// needed for the backward sweep.
struct MlpTrace {
  std::vector<Eigen::VectorXd> inputs;   // z_l, input of layer l
  std::vector<Eigen::VectorXd> pre_act;  // a_l = W_l z_l + b_l
  Eigen::VectorXd output;
};

MlpTrace mlp_trace(const Mlp& mlp, const Eigen::VectorXd& input) {
  MlpTrace trace;
  const int n = mlp.n_layers();
  trace.inputs.reserve(n);
  trace.pre_act.reserve(n);
  Eigen::VectorXd z = input;
  for (int l = 0; l < n; ++l) {
    trace.inputs.push_back(z);
    Eigen::VectorXd a = mlp.weights[l] * z + mlp.biases[l];
    trace.pre_act.push_back(a);
    z = (l + 1 < n) ? apply_activation(mlp.activation, a) : a;
  }
  trace.output = z;
  return trace;
}

// Backward through the MLP; accumulates parameter gradients scaled by
// `upstream` and returns the gradient w.r.t. the MLP input.
Eigen::VectorXd mlp_backward(const Mlp& mlp, const MlpTrace& trace,
                             const Eigen::VectorXd& upstream,
                             std::vector<Eigen::MatrixXd>& g_weights,
                             std::vector<Eigen::VectorXd>& g_biases) {
  const int n = mlp.n_layers();
  Eigen::VectorXd g = upstream;
  for (int l = n - 1; l >= 0; --l) {
    g_weights[l].noalias() += g * trace.inputs[l].transpose();
    g_biases[l] += g;
    Eigen::VectorXd g_in = mlp.weights[l].transpose() * g;
    if (l > 0) {
      const Eigen::VectorXd& a_prev = trace.pre_act[l - 1];
      for (Eigen::Index i = 0; i < g_in.size(); ++i) {
        g_in(i) *= activate_deriv(mlp.activation, a_prev(i));
      }
    }
    g = std::move(g_in);
  }
  return g;
}

Gradients zero_gradients(const ResDmdModel& model) {
  Gradients g;
  g.encoder = Eigen::MatrixXd::Zero(model.encoder.rows(), model.encoder.cols());
  g.decoder = Eigen::MatrixXd::Zero(model.decoder.rows(), model.decoder.cols());
  g.dynamics = Eigen::MatrixXd::Zero(model.dynamics.rows(), model.dynamics.cols());
  for (const auto& w : model.mlp.weights) {
    g.mlp_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : model.mlp.biases) {
    g.mlp_biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  return g;
}

// One (x_t, x_{t+k}) pair: forward with caching, then reverse-mode
// accumulation of `weight * 2 * e * de/dtheta` into g. Returns the pair's
// squared error in the configured loss space.
double accumulate_pair(const ResDmdModel& model, const Eigen::VectorXd& x0,
                       const Eigen::VectorXd& target, int k_steps, LossSpace space,
                       double weight, Gradients& g) {
  const int k = k_steps;
  std::vector<Eigen::VectorXd> latents(k + 1);
  std::vector<MlpTrace> traces(k);
  latents[0] = model.encoder * x0;
  for (int s = 0; s < k; ++s) {
    traces[s] = mlp_trace(model.mlp, latents[s]);
    latents[s + 1] = model.dynamics * latents[s] + traces[s].output;
  }

  Eigen::VectorXd g_latent;
  double sq_err = 0.0;
  Eigen::VectorXd target_latent;  // latent-space target, kept for the encoder term
  if (space == LossSpace::State) {
    const Eigen::VectorXd predicted = model.decoder * latents[k];
    const Eigen::VectorXd err = predicted - target;
    sq_err = err.squaredNorm();
    const Eigen::VectorXd g_out = (2.0 * weight) * err;
    g.decoder.noalias() += g_out * latents[k].transpose();
    g_latent = model.decoder.transpose() * g_out;
  } else {
    target_latent = model.encoder * target;
    const Eigen::VectorXd err = latents[k] - target_latent;
    sq_err = err.squaredNorm();
    g_latent = (2.0 * weight) * err;
    // the target branch also flows through the encoder
    g.encoder.noalias() -= g_latent * target.transpose();
  }

  for (int s = k - 1; s >= 0; --s) {
    g.dynamics.noalias() += g_latent * latents[s].transpose();
    Eigen::VectorXd g_lin = model.dynamics.transpose() * g_latent;
    Eigen::VectorXd g_mlp_in =
        mlp_backward(model.mlp, traces[s], g_latent, g.mlp_weights, g.mlp_biases);
    g_latent = g_lin + g_mlp_in;
  }
  g.encoder.noalias() += g_latent * x0.transpose();
  return sq_err;
}

int pair_count_or_fail(const StateMatrix& X, const TrainConfig& cfg) {
  const int n_pairs = X.ntime() - cfg.rollout_steps;
  if (n_pairs < 1) {
    fail(ErrorKind::InsufficientSamples,
         "series of length " + std::to_string(X.ntime()) + " is too short for " +
             std::to_string(cfg.rollout_steps) + "-step targets");
  }
  return n_pairs;
}

int loss_dims(const ResDmdModel& model, LossSpace space) {
  return space == LossSpace::State ? model.state_dim() : model.latent_dim();
}

void check_model_matches(const ResDmdModel& model, const StateMatrix& X) {
  if (X.state_dim() != model.state_dim()) {
    fail(ErrorKind::SizeMismatch,
         "snapshot dimension " + std::to_string(X.state_dim()) +
             " does not match model dimension " + std::to_string(model.state_dim()));
  }
}

}  // namespace

ResDmdModel init_from_dmd(const DmdModel& dmd, const MlpSpec& spec, double eps,
                          std::uint64_t seed) {
  if (eps < 0.0 || !std::isfinite(eps)) {
    fail(ErrorKind::InvalidArgument, "init scale must be finite and >= 0");
  }
  for (int w : spec.hidden) {
    if (w < 1) fail(ErrorKind::InvalidArgument, "hidden widths must be >= 1");
  }

  const RealLatentSystem sys = realify(dmd);
  ResDmdModel model;
  model.encoder = sys.encoder;
  model.decoder = sys.decoder;
  model.dynamics = sys.dynamics;
  model.block_sizes = sys.block_sizes;
  model.init_scale = eps;
  model.seed = seed;
  model.dt_months = dmd.dt_months;
  model.mlp.activation = spec.activation;

  std::vector<int> widths;
  widths.push_back(sys.latent_dim());
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(sys.latent_dim());

  // Hidden layers draw at a fixed 1/sqrt(fan_in) scale; only the output layer
  // is drawn at eps. The nonlinear path is then exactly proportional to eps,
  // and identically zero at eps = 0.
  Rng rng(seed);
  const int n_layers = static_cast<int>(widths.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const bool output_layer = (l == n_layers - 1);
    const double scale = output_layer ? eps : 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        w(i, j) = scale * rng.uniform(-1.0, 1.0);
      }
    }
    model.mlp.weights.push_back(std::move(w));
    model.mlp.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return model;
}

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& input) {
  return mlp_trace(mlp, input).output;
}

Eigen::VectorXd latent_step(const ResDmdModel& model, const Eigen::VectorXd& b) {
  if (b.size() != model.latent_dim()) {
    fail(ErrorKind::SizeMismatch, "latent vector length does not match the model");
  }
  return model.dynamics * b + mlp_forward(model.mlp, b);
}

Eigen::VectorXd forward(const ResDmdModel& model, const Eigen::VectorXd& x0, int n_steps) {
  if (n_steps < 0) {
    fail(ErrorKind::InvalidArgument, "forward steps must be non-negative");
  }
  if (x0.size() != model.state_dim()) {
    fail(ErrorKind::SizeMismatch, "state length does not match the model");
  }
  Eigen::VectorXd b = model.encoder * x0;
  for (int s = 0; s < n_steps; ++s) {
    b = model.dynamics * b + mlp_forward(model.mlp, b);
  }
  return model.decoder * b;
}

double loss(const ResDmdModel& model, const StateMatrix& X, const TrainConfig& cfg) {
  cfg.validate();
  check_model_matches(model, X);
  const int n_pairs = pair_count_or_fail(X, cfg);
  const int k = cfg.rollout_steps;

  double sse = 0.0;
  for (int t = 0; t < n_pairs; ++t) {
    if (cfg.loss_space == LossSpace::State) {
      const Eigen::VectorXd predicted = forward(model, X.data.col(t), k);
      sse += (predicted - X.data.col(t + k)).squaredNorm();
    } else {
      Eigen::VectorXd b = model.encoder * X.data.col(t);
      for (int s = 0; s < k; ++s) {
        b = model.dynamics * b + mlp_forward(model.mlp, b);
      }
      sse += (b - (model.encoder * X.data.col(t + k)).eval()).squaredNorm();
    }
  }
  return sse / (static_cast<double>(n_pairs) * loss_dims(model, cfg.loss_space));
}

Gradients grad(const ResDmdModel& model, const StateMatrix& X, const TrainConfig& cfg) {
  cfg.validate();
  check_model_matches(model, X);
  const int n_pairs = pair_count_or_fail(X, cfg);
  const double weight = 1.0 / (static_cast<double>(n_pairs) * loss_dims(model, cfg.loss_space));

  Gradients g = zero_gradients(model);
  for (int t = 0; t < n_pairs; ++t) {
    accumulate_pair(model, X.data.col(t), X.data.col(t + cfg.rollout_steps),
                    cfg.rollout_steps, cfg.loss_space, weight, g);
  }
  zero_off_block(g.dynamics, model.block_sizes);
  return g;
}

TrainHistory train(ResDmdModel& model, const StateMatrix& train_data,
                   const StateMatrix* val_data, const TrainConfig& cfg) {
  cfg.validate();
  check_model_matches(model, train_data);
  const int n_pairs = pair_count_or_fail(train_data, cfg);
  if (val_data) check_model_matches(model, *val_data);

  Gradients velocity = zero_gradients(model);
  std::vector<int> order(n_pairs);
  for (int i = 0; i < n_pairs; ++i) order[i] = i;
  Rng rng(cfg.seed);

  TrainHistory history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    rng.shuffle(order);

    int step = 0;
    for (int begin = 0; begin < n_pairs; begin += cfg.batch_size, ++step) {
      const int batch = std::min(cfg.batch_size, n_pairs - begin);
      const double weight =
          1.0 / (static_cast<double>(batch) * loss_dims(model, cfg.loss_space));

      Gradients g = zero_gradients(model);
      double batch_sse = 0.0;
      for (int i = 0; i < batch; ++i) {
        const int t = order[begin + i];
        batch_sse += accumulate_pair(model, train_data.data.col(t),
                                     train_data.data.col(t + cfg.rollout_steps),
                                     cfg.rollout_steps, cfg.loss_space, weight, g);
      }
      if (!std::isfinite(batch_sse)) {
        fail(ErrorKind::TrainingDiverged,
             "loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                 std::to_string(step));
      }
      zero_off_block(g.dynamics, model.block_sizes);

      const double lr = cfg.learning_rate;
      const double mu = cfg.momentum;
      auto update = [lr, mu](Eigen::MatrixXd& param, Eigen::MatrixXd& vel,
                             const Eigen::MatrixXd& grad_m) {
        vel = mu * vel - lr * grad_m;
        param += vel;
      };
      update(model.encoder, velocity.encoder, g.encoder);
      update(model.decoder, velocity.decoder, g.decoder);
      update(model.dynamics, velocity.dynamics, g.dynamics);
      for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
        update(model.mlp.weights[l], velocity.mlp_weights[l], g.mlp_weights[l]);
        Eigen::VectorXd& vb = velocity.mlp_biases[l];
        vb = mu * vb - lr * g.mlp_biases[l];
        model.mlp.biases[l] += vb;
      }
    }

    EpochStats stats;
    stats.train_loss = loss(model, train_data, cfg);
    if (!std::isfinite(stats.train_loss)) {
      fail(ErrorKind::TrainingDiverged,
           "loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
               std::to_string(step));
    }
    if (val_data) {
      stats.val_loss = loss(model, *val_data, cfg);
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    history.epochs.push_back(stats);
  }
  return history;
}

void save_checkpoint(const ResDmdModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "resdmd_model";
  header["state_dim"] = model.state_dim();
  header["latent_dim"] = model.latent_dim();
  header["block_sizes"] = model.block_sizes;
  std::vector<int> hidden;
  for (std::size_t l = 0; l + 1 < model.mlp.weights.size(); ++l) {
    hidden.push_back(static_cast<int>(model.mlp.weights[l].rows()));
  }
  header["mlp_hidden"] = hidden;
  header["activation"] = to_string(model.mlp.activation);
  header["init_scale"] = model.init_scale;
  header["seed"] = model.seed;
  header["dt_months"] = model.dt_months;
  header["dtype"] = "float64";

  std::vector<std::uint8_t> payload;
  auto append_matrix = [&payload](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        append_f64(payload, &m(i, j), 1);
      }
    }
  };
  append_matrix(model.encoder);
  append_matrix(model.decoder);
  append_matrix(model.dynamics);
  for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
    append_matrix(model.mlp.weights[l]);
    append_f64(payload, model.mlp.biases[l].data(), model.mlp.biases[l].size());
  }
  write_container(path, header, payload.data(), payload.size());
}

ResDmdModel load_checkpoint(const std::filesystem::path& path) {
  const auto c = read_container(path);
  if (require_string(c.header, "kind") != "resdmd_model") {
    fail(ErrorKind::MalformedHeader, path.string() + ": not a resdmd_model container");
  }
  if (require_string(c.header, "dtype") != "float64") {
    fail(ErrorKind::MalformedHeader, path.string() + ": model payloads must be float64");
  }
  ResDmdModel model;
  const int d = static_cast<int>(require_int(c.header, "state_dim"));
  const int latent = static_cast<int>(require_int(c.header, "latent_dim"));
  if (d < 1 || latent < 1) {
    fail(ErrorKind::MalformedHeader, path.string() + ": non-positive dimensions");
  }
  const auto blocks = require_field(c.header, "block_sizes");
  int block_total = 0;
  for (const auto& b : blocks) {
    const int size = b.get<int>();
    if (size != 1 && size != 2) {
      fail(ErrorKind::MalformedHeader, path.string() + ": block sizes must be 1 or 2");
    }
    model.block_sizes.push_back(size);
    block_total += size;
  }
  if (block_total != latent) {
    fail(ErrorKind::MalformedHeader, path.string() + ": block sizes do not sum to latent_dim");
  }
  model.mlp.activation = parse_activation(require_string(c.header, "activation"));
  model.init_scale = require_field(c.header, "init_scale").get<double>();
  model.seed = require_field(c.header, "seed").get<std::uint64_t>();
  model.dt_months = static_cast<int>(require_int(c.header, "dt_months"));

  std::vector<int> widths;
  widths.push_back(latent);
  for (const auto& h : require_field(c.header, "mlp_hidden")) {
    widths.push_back(h.get<int>());
  }
  widths.push_back(latent);

  std::size_t expected = static_cast<std::size_t>(latent) * d * 2 +
                         static_cast<std::size_t>(latent) * latent;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    expected += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  if (c.payload.size() != expected * sizeof(double)) {
    fail(ErrorKind::DimensionMismatch, path.string() + ": payload size does not match header");
  }

  const auto values = decode_f64(c.payload.data(), expected);
  std::size_t pos = 0;
  auto read_matrix = [&values, &pos](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = values[pos++];
      }
    }
    return m;
  };
  model.encoder = read_matrix(latent, d);
  model.decoder = read_matrix(d, latent);
  model.dynamics = read_matrix(latent, latent);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    model.mlp.weights.push_back(read_matrix(widths[l + 1], widths[l]));
    Eigen::VectorXd b(widths[l + 1]);
    for (int i = 0; i < widths[l + 1]; ++i) b(i) = values[pos++];
    model.mlp.biases.push_back(std::move(b));
  }
  return model;
}

}  // namespace resdmd
