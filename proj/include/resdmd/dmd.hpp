#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "resdmd/grid.hpp"

namespace resdmd {

// Truncated linear model fitted to a snapshot matrix. The decoder columns
// (modes), discrete eigenvalues, and encoder (pseudo-inverse of the modes)
// advance a state n months as: real(phi * lambda^n * encoder * x).
struct DmdModel {
  int rank = 0;
  Eigen::MatrixXcd phi;      // D x r modes
  Eigen::VectorXcd lambda;   // r discrete eigenvalues, conjugate-paired
  Eigen::MatrixXcd encoder;  // r x D pseudo-inverse of phi
  int dt_months = 1;

  int state_dim() const { return static_cast<int>(phi.rows()); }
};

struct SpectrumEntry {
  std::complex<double> eigenvalue;
  double modulus = 0.0;
  double decay_months = 0.0;   // e-folding time; +inf when |lambda| >= 1 (non-damped)
  double period_months = 0.0;  // +inf for non-oscillating (arg == 0) modes
  double energy = 0.0;         // norm of the mode column
};

// Real-valued equivalent of the complex eigensystem: conjugate pairs a+-bi
// become 2x2 blocks [[a, b], [-b, a]], real eigenvalues 1x1 blocks.
// decoder * dynamics^n * encoder reproduces the complex n-step forecast.
struct RealLatentSystem {
  Eigen::MatrixXd encoder;   // 2r' x D
  Eigen::MatrixXd dynamics;  // 2r' x 2r' block diagonal
  Eigen::MatrixXd decoder;   // D x 2r'
  std::vector<int> block_sizes;  // 1 or 2 per eigen-group, in order

  int latent_dim() const { return static_cast<int>(dynamics.rows()); }
};

// Exact-DMD fit of rank `rank` on the snapshot columns of X.
DmdModel fit_dmd(const StateMatrix& X, int rank);
DmdModel fit_dmd(const Eigen::MatrixXd& snapshots, int rank, int dt_months = 1);

// Singular values of the first T-1 snapshot columns, descending; the CLI
// turns these into the energy report guiding the rank choice.
std::vector<double> singular_values(const Eigen::MatrixXd& snapshots);

Eigen::VectorXcd project(const DmdModel& model, const Eigen::VectorXd& x);

struct Reconstruction {
  Eigen::VectorXd values;      // real part of phi * b
  double imag_norm = 0.0;      // norm of the discarded imaginary part
  double total_norm = 0.0;     // norm of phi * b
};
Reconstruction reconstruct(const DmdModel& model, const Eigen::VectorXcd& b);

Eigen::VectorXd forecast(const DmdModel& model, const Eigen::VectorXd& x0, int n_steps);

std::vector<SpectrumEntry> spectrum(const DmdModel& model);

RealLatentSystem realify(const DmdModel& model);

void save_dmd_model(const DmdModel& model, const std::filesystem::path& path);
DmdModel load_dmd_model(const std::filesystem::path& path);

}  // namespace resdmd
