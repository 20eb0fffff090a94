#include "resdmd/synth.hpp"

#include <cmath>

#include "resdmd/error.hpp"
#include "resdmd/rng.hpp"

namespace resdmd {

std::string to_string(SynthKind k) {
  switch (k) {
    case SynthKind::LinearDiag: return "linear_diag";
    case SynthKind::Rotation: return "rotation";
    case SynthKind::NonlinearCubic: return "nonlinear_cubic";
  }
  return "linear_diag";
}

SynthKind parse_synth_kind(const std::string& text) {
  if (text == "linear_diag") return SynthKind::LinearDiag;
  if (text == "rotation") return SynthKind::Rotation;
  if (text == "nonlinear_cubic") return SynthKind::NonlinearCubic;
  fail(ErrorKind::InvalidArgument,
       "unknown synthetic kind \"" + text + "\" (linear_diag, rotation, nonlinear_cubic)");
}

void SynthSpec::validate() const {
  if (nlat < 1 || nlon < 1) {
    fail(ErrorKind::InvalidArgument, "grid dimensions must be positive");
  }
  if (latent_dim < 1) {
    fail(ErrorKind::InvalidArgument, "latent dimension must be >= 1");
  }
  if (embed_dim() < latent_dim) {
    fail(ErrorKind::InvalidArgument, "embedding dimension must be >= latent dimension");
  }
  if (t_steps < 2) {
    fail(ErrorKind::InvalidArgument, "need at least 2 time steps");
  }
  if (noise_std < 0.0) {
    fail(ErrorKind::InvalidArgument, "noise level must be >= 0");
  }
  if (kind == SynthKind::LinearDiag &&
      static_cast<int>(eigs.size()) != latent_dim) {
    fail(ErrorKind::InvalidArgument, "linear_diag needs one multiplier per latent dimension");
  }
  if ((kind == SynthKind::Rotation || kind == SynthKind::NonlinearCubic) && latent_dim != 2) {
    fail(ErrorKind::InvalidArgument, "rotation-based kinds are 2-dimensional in latent space");
  }
}

namespace {

// Seeded orthonormal embedding: QR of a Gaussian draw. The draw order is
// fixed (row-major basis, then start state, then per-column noise) so every
// generator is reproducible from its seed alone.
Eigen::MatrixXd random_orthonormal(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      g(i, j) = rng.gaussian();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::VectorXd random_start(int dim, double norm, Rng& rng) {
  Eigen::VectorXd z(dim);
  for (int i = 0; i < dim; ++i) z(i) = rng.gaussian();
  const double n = z.norm();
  if (n > 0.0 && norm > 0.0) z *= norm / n;
  return z;
}

Eigen::Matrix2d rotation2(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

StateMatrix embed_trajectory(const SynthSpec& spec, const Eigen::MatrixXd& basis,
                             const Eigen::MatrixXd& latents, Rng& rng) {
  StateMatrix sm;
  sm.nlat = spec.nlat;
  sm.nlon = spec.nlon;
  for (int i = 0; i < spec.nlat; ++i) {
    for (int j = 0; j < spec.nlon; ++j) {
      sm.point_index.emplace_back(i, j);
    }
  }
  sm.times.resize(spec.t_steps);
  sm.times[0] = spec.start;
  for (int t = 1; t < spec.t_steps; ++t) sm.times[t] = sm.times[t - 1].next();

  sm.data = basis * latents;
  if (spec.noise_std > 0.0) {
    for (int t = 0; t < spec.t_steps; ++t) {
      for (int i = 0; i < sm.data.rows(); ++i) {
        sm.data(i, t) += spec.noise_std * rng.gaussian();
      }
    }
  }
  return sm;
}

}  // namespace

LinearSynth gen_linear(const SynthSpec& spec) {
  spec.validate();
  if (spec.kind != SynthKind::LinearDiag && spec.kind != SynthKind::Rotation) {
    fail(ErrorKind::InvalidArgument, "gen_linear handles linear_diag and rotation kinds");
  }
  Rng rng(spec.seed);
  const int k = spec.latent_dim;
  const Eigen::MatrixXd basis = random_orthonormal(spec.embed_dim(), k, rng);
  Eigen::VectorXd z = random_start(k, spec.init_norm, rng);

  Eigen::MatrixXd step;
  LinearSynth out;
  if (spec.kind == SynthKind::LinearDiag) {
    step = Eigen::MatrixXd::Zero(k, k);
    out.true_eigenvalues.resize(k);
    for (int i = 0; i < k; ++i) {
      step(i, i) = spec.eigs[i];
      out.true_eigenvalues(i) = spec.eigs[i];
    }
  } else {
    step = spec.radius * rotation2(spec.theta);
    out.true_eigenvalues.resize(2);
    out.true_eigenvalues(0) = std::polar(spec.radius, spec.theta);
    out.true_eigenvalues(1) = std::polar(spec.radius, -spec.theta);
  }

  Eigen::MatrixXd latents(k, spec.t_steps);
  latents.col(0) = z;
  for (int t = 1; t < spec.t_steps; ++t) {
    latents.col(t) = step * latents.col(t - 1);
  }
  out.basis = basis;
  out.data = embed_trajectory(spec, basis, latents, rng);
  return out;
}

CubicSynth gen_nonlinear_cubic(const SynthSpec& spec) {
  spec.validate();
  if (spec.kind != SynthKind::NonlinearCubic) {
    fail(ErrorKind::InvalidArgument, "gen_nonlinear_cubic needs kind = nonlinear_cubic");
  }
  Rng rng(spec.seed);
  const Eigen::MatrixXd basis = random_orthonormal(spec.embed_dim(), 2, rng);
  Eigen::VectorXd z = random_start(2, spec.init_norm, rng);

  const Eigen::Matrix2d rot = rotation2(spec.theta);
  const double r0 = spec.radius;
  const double gamma = spec.gamma;
  auto latent_step = [rot, r0, gamma](const Eigen::Vector2d& b) -> Eigen::Vector2d {
    return (r0 + gamma * b.squaredNorm()) * (rot * b);
  };

  Eigen::MatrixXd latents(2, spec.t_steps);
  latents.col(0) = z;
  for (int t = 1; t < spec.t_steps; ++t) {
    latents.col(t) = latent_step(latents.col(t - 1));
  }

  CubicSynth out;
  out.basis = basis;
  out.data = embed_trajectory(spec, basis, latents, rng);
  out.step = [basis, latent_step](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::Vector2d b = basis.transpose() * x;
    return basis * latent_step(b);
  };
  return out;
}

GridSeries synth_to_grid_series(const SynthSpec& spec, const StateMatrix& data) {
  return grid_series_from_columns(data, data.data, data.times, spec.variable, spec.units);
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t) {
  if (A.rows() != A.cols()) {
    fail(ErrorKind::InvalidArgument, "matrix exponential needs a square matrix");
  }
  if (A.rows() > 10) {
    fail(ErrorKind::InvalidArgument, "matrix exponential is test-scale only (k <= 10)");
  }
  // degree-13 Pade approximant with scaling and squaring
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd at = A * t;
  const double norm = at.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int squarings = 0;
  const double theta13 = 5.371920351148152;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    at /= std::pow(2.0, squarings);
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = at * at;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a2 * a4;
  const Eigen::MatrixXd u =
      at * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
            b[3] * a2 + b[1] * identity);
  const Eigen::MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                            b[4] * a4 + b[2] * a2 + b[0] * identity;
  Eigen::MatrixXd f = (v - u).lu().solve(v + u);
  for (int i = 0; i < squarings; ++i) f = f * f;
  return f;
}

Eigen::MatrixXd matrix_exponential_eig(const Eigen::MatrixXd& A, double t) {
  if (A.rows() != A.cols()) {
    fail(ErrorKind::InvalidArgument, "matrix exponential needs a square matrix");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) {
    fail(ErrorKind::RankDeficientData, "eigendecomposition failed");
  }
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::VectorXcd exp_l = es.eigenvalues();
  for (Eigen::Index i = 0; i < exp_l.size(); ++i) {
    exp_l(i) = std::exp(exp_l(i) * t);
  }
  const Eigen::MatrixXcd f = v * exp_l.asDiagonal() * v.inverse();
  return f.real();
}

}  // namespace resdmd
