#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "resdmd/dmd.hpp"
#include "resdmd/grid.hpp"

namespace resdmd {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// Nonlinear-path architecture. Input and output widths are the latent
// dimension; an empty hidden list means a single linear layer.
struct MlpSpec {
  std::vector<int> hidden;
  Activation activation = Activation::Tanh;
};

struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::Tanh;

  int n_layers() const { return static_cast<int>(weights.size()); }
};

// One ResDMD block over the realified DMD latent space: the linear map is the
// DMD bypass, the MLP is the trainable nonlinear path. All matrices listed
// here are trainable; `dynamics` keeps its block-diagonal structure exactly
// (off-block entries stay 0 through training).
struct ResDmdModel {
  Eigen::MatrixXd encoder;   // latent x D
  Eigen::MatrixXd decoder;   // D x latent
  Eigen::MatrixXd dynamics;  // latent x latent, block diagonal
  std::vector<int> block_sizes;
  Mlp mlp;
  double init_scale = 0.0;
  std::uint64_t seed = 0;
  int dt_months = 1;

  int latent_dim() const { return static_cast<int>(dynamics.rows()); }
  int state_dim() const { return static_cast<int>(decoder.rows()); }
};

enum class LossSpace { State, Latent };

std::string to_string(LossSpace s);
LossSpace parse_loss_space(const std::string& text);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  int epochs = 200;
  int rollout_steps = 1;  // k: latent steps between input and target
  std::uint64_t seed = 1;
  LossSpace loss_space = LossSpace::State;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// Stage one of training: copy the realified DMD system into the block and
// draw the MLP weights. Hidden layers get a fixed 1/sqrt(fan_in) scale; the
// output layer is drawn in [-eps, +eps] so the whole nonlinear path vanishes
// at eps = 0 and its magnitude is proportional to eps.
ResDmdModel init_from_dmd(const DmdModel& dmd, const MlpSpec& spec, double eps,
                          std::uint64_t seed);

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& input);

// b' = dynamics * b + mlp(b)
Eigen::VectorXd latent_step(const ResDmdModel& model, const Eigen::VectorXd& b);

// Encode once, step n times in latent space, decode once.
Eigen::VectorXd forward(const ResDmdModel& model, const Eigen::VectorXd& x0, int n_steps);

// Mean squared error over all (t, t+k) snapshot pairs, averaged over pairs
// and over dimensions of the chosen loss space.
double loss(const ResDmdModel& model, const StateMatrix& X, const TrainConfig& cfg);

struct Gradients {
  Eigen::MatrixXd encoder;
  Eigen::MatrixXd decoder;
  Eigen::MatrixXd dynamics;  // nonzero only at structurally valid block entries
  std::vector<Eigen::MatrixXd> mlp_weights;
  std::vector<Eigen::VectorXd> mlp_biases;
};

// Exact reverse-mode gradient of `loss` for every trainable parameter.
Gradients grad(const ResDmdModel& model, const StateMatrix& X, const TrainConfig& cfg);

// Stage two: minibatch SGD with momentum over (t, t+k) pairs, shuffled per
// epoch from cfg.seed. Deterministic: fixed-order reductions, no threading.
// Throws TrainingDiverged (with epoch/step in the message) when the loss
// stops being finite.
TrainHistory train(ResDmdModel& model, const StateMatrix& train_data,
                   const StateMatrix* val_data, const TrainConfig& cfg);

void save_checkpoint(const ResDmdModel& model, const std::filesystem::path& path);
ResDmdModel load_checkpoint(const std::filesystem::path& path);

}  // namespace resdmd
