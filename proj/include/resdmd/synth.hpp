#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "resdmd/grid.hpp"

namespace resdmd {

enum class SynthKind { LinearDiag, Rotation, NonlinearCubic };

std::string to_string(SynthKind k);
SynthKind parse_synth_kind(const std::string& text);

// Synthetic dataset recipe: a small latent system stepped exactly, embedded
// into D = nlat*nlon dimensions by seeded random orthonormal columns, with
// optional i.i.d. Gaussian noise added in the embedded space.
struct SynthSpec {
  SynthKind kind = SynthKind::LinearDiag;
  int latent_dim = 2;                  // k
  std::vector<double> eigs = {0.9, 0.5};  // LinearDiag multipliers
  double theta = M_PI / 6.0;           // rotation angle per step
  double radius = 1.0;                 // rotation modulus / cubic linear gain r0
  double gamma = 0.0;                  // cubic radial gain coefficient
  double init_norm = 1.0;              // norm of the latent start state
  int nlat = 4;
  int nlon = 4;
  int t_steps = 100;
  double noise_std = 0.0;
  std::uint64_t seed = 1;
  YearMonth start{1980, 1};
  std::string variable = "anom";
  std::string units = "K";

  int embed_dim() const { return nlat * nlon; }
  void validate() const;
};

struct LinearSynth {
  StateMatrix data;
  Eigen::VectorXcd true_eigenvalues;  // discrete per-step multipliers
  Eigen::MatrixXd basis;              // D x k orthonormal embedding
};

// Exact discrete stepping of a diagonal or rotation latent map.
LinearSynth gen_linear(const SynthSpec& spec);

struct CubicSynth {
  StateMatrix data;
  // Exact one-step oracle acting on embedded states (noise-free dynamics).
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> step;
  Eigen::MatrixXd basis;
};

// Latent map b -> R(theta) * (r0 + gamma*|b|^2) * b with k = 2: a rotation
// with amplitude-dependent radial gain (linear part r0*R(theta), cubic
// correction gamma).
CubicSynth gen_nonlinear_cubic(const SynthSpec& spec);

// Full-mask GridSeries wrapper around synthetic state columns.
GridSeries synth_to_grid_series(const SynthSpec& spec, const StateMatrix& data);

// e^(A*t) for test-scale matrices. The default route is Pade scaling and
// squaring; the eigendecomposition route exists as an independent cross-check
// and the two must agree on diagonalizable inputs.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t);
Eigen::MatrixXd matrix_exponential_eig(const Eigen::MatrixXd& A, double t);

}  // namespace resdmd
