#include "resdmd/dmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "resdmd/container.hpp"
#include "resdmd/error.hpp"

namespace resdmd {

namespace {

using Complex = std::complex<double>;

// lambda^n by binary exponentiation: exact for n = 0, deterministic, and free
// of pow()'s polar round trip.
Complex cpow_int(Complex base, int n) {
  Complex result(1.0, 0.0);
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

// Deterministic eigensystem order: descending modulus, then descending real
// part, then descending imaginary part (so the +imag member of a pair leads).
std::vector<int> sorted_eigen_order(const Eigen::VectorXcd& lambda) {
  std::vector<int> order(lambda.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(lambda(a));
    const double mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    if (lambda(a).real() != lambda(b).real()) return lambda(a).real() > lambda(b).real();
    return lambda(a).imag() > lambda(b).imag();
  });
  return order;
}

// Moore-Penrose pseudo-inverse with singular values below 1e-12 * sigma_max
// treated as zero.
Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const double cutoff = sigma.size() > 0 ? 1e-12 * sigma(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace

DmdModel fit_dmd(const Eigen::MatrixXd& snapshots, int rank, int dt_months) {
  const Eigen::Index d = snapshots.rows();
  const Eigen::Index t = snapshots.cols();
  if (t < 2) {
    fail(ErrorKind::DimensionMismatch, "need at least 2 snapshots to fit");
  }
  const int max_rank = static_cast<int>(std::min<Eigen::Index>(d, t - 1));
  if (rank < 1 || rank > max_rank) {
    fail(ErrorKind::InvalidArgument,
         "rank must lie in [1, min(D, T-1)] = [1, " + std::to_string(max_rank) + "], got " +
             std::to_string(rank));
  }

  const Eigen::MatrixXd x1 = snapshots.leftCols(t - 1);
  const Eigen::MatrixXd x2 = snapshots.rightCols(t - 1);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma(rank - 1) <= 1e-12 * sigma(0)) {
    fail(ErrorKind::RankDeficientData,
         "singular value " + std::to_string(rank) + " is numerically zero; the data has lower "
         "rank than requested - lower the rank");
  }

  const Eigen::MatrixXd ur = svd.matrixU().leftCols(rank);
  const Eigen::MatrixXd vr = svd.matrixV().leftCols(rank);
  const Eigen::VectorXd sigma_inv = sigma.head(rank).cwiseInverse();

  // X2 * V_r * Sigma_r^-1 appears in both the reduced operator and the modes.
  const Eigen::MatrixXd propagated = x2 * vr * sigma_inv.asDiagonal();
  const Eigen::MatrixXd a_tilde = ur.transpose() * propagated;

  Eigen::EigenSolver<Eigen::MatrixXd> es(a_tilde);
  if (es.info() != Eigen::Success) {
    fail(ErrorKind::RankDeficientData, "eigendecomposition of the reduced operator failed");
  }
  const Eigen::VectorXcd lambda_raw = es.eigenvalues();
  const Eigen::MatrixXcd modes_raw = propagated.cast<Complex>() * es.eigenvectors();

  const auto order = sorted_eigen_order(lambda_raw);
  DmdModel model;
  model.rank = rank;
  model.dt_months = dt_months;
  model.lambda.resize(rank);
  model.phi.resize(d, rank);
  for (int i = 0; i < rank; ++i) {
    model.lambda(i) = lambda_raw(order[i]);
    model.phi.col(i) = modes_raw.col(order[i]);
  }
  model.encoder = pseudo_inverse(model.phi);
  return model;
}

DmdModel fit_dmd(const StateMatrix& X, int rank) {
  return fit_dmd(X.data, rank, 1);
}

std::vector<double> singular_values(const Eigen::MatrixXd& snapshots) {
  if (snapshots.cols() < 2) {
    fail(ErrorKind::DimensionMismatch, "need at least 2 snapshots");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots.leftCols(snapshots.cols() - 1));
  const auto& sigma = svd.singularValues();
  return {sigma.data(), sigma.data() + sigma.size()};
}

Eigen::VectorXcd project(const DmdModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.phi.rows()) {
    fail(ErrorKind::SizeMismatch,
         "state length " + std::to_string(x.size()) + " does not match model dimension " +
             std::to_string(model.phi.rows()));
  }
  return model.encoder * x.cast<Complex>();
}

Reconstruction reconstruct(const DmdModel& model, const Eigen::VectorXcd& b) {
  if (b.size() != model.rank) {
    fail(ErrorKind::SizeMismatch, "latent length does not match model rank");
  }
  const Eigen::VectorXcd z = model.phi * b;
  Reconstruction rec;
  rec.values = z.real();
  rec.imag_norm = z.imag().norm();
  rec.total_norm = z.norm();
  return rec;
}

Eigen::VectorXd forecast(const DmdModel& model, const Eigen::VectorXd& x0, int n_steps) {
  if (n_steps < 0) {
    fail(ErrorKind::InvalidArgument, "forecast steps must be non-negative");
  }
  Eigen::VectorXcd b = project(model, x0);
  for (int i = 0; i < model.rank; ++i) {
    b(i) *= cpow_int(model.lambda(i), n_steps);
  }
  return (model.phi * b).real();
}

std::vector<SpectrumEntry> spectrum(const DmdModel& model) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<SpectrumEntry> report(model.rank);
  for (int i = 0; i < model.rank; ++i) {
    auto& e = report[i];
    e.eigenvalue = model.lambda(i);
    e.modulus = std::abs(e.eigenvalue);
    e.energy = model.phi.col(i).norm();
    e.decay_months = e.modulus < 1.0
                         ? -static_cast<double>(model.dt_months) / std::log(e.modulus)
                         : inf;
    const double arg = std::arg(e.eigenvalue);
    e.period_months = arg != 0.0 ? 2.0 * M_PI * model.dt_months / std::abs(arg) : inf;
  }
  std::stable_sort(report.begin(), report.end(),
                   [](const SpectrumEntry& a, const SpectrumEntry& b) {
                     return a.modulus > b.modulus;
                   });
  return report;
}

RealLatentSystem realify(const DmdModel& model) {
  const int r = model.rank;
  const Eigen::Index d = model.phi.rows();

  RealLatentSystem sys;
  sys.encoder = Eigen::MatrixXd::Zero(r, d);
  sys.decoder = Eigen::MatrixXd::Zero(d, r);
  sys.dynamics = Eigen::MatrixXd::Zero(r, r);

  std::vector<bool> consumed(r, false);
  int row = 0;
  for (int i = 0; i < r; ++i) {
    if (consumed[i]) continue;
    const Complex lam = model.lambda(i);
    const double scale = std::max(1.0, std::abs(lam));
    if (std::abs(lam.imag()) <= 1e-12 * scale) {
      consumed[i] = true;
      sys.dynamics(row, row) = lam.real();
      sys.decoder.col(row) = model.phi.col(i).real();
      sys.encoder.row(row) = model.encoder.row(i).real();
      sys.block_sizes.push_back(1);
      row += 1;
      continue;
    }
    // find the closest unconsumed conjugate partner
    int partner = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < r; ++j) {
      if (j == i || consumed[j]) continue;
      const double dist = std::abs(model.lambda(j) - std::conj(lam));
      if (dist < best) {
        best = dist;
        partner = j;
      }
    }
    if (partner < 0 || best > 1e-8 * scale) {
      fail(ErrorKind::UnpairedEigenvalue,
           "eigenvalue " + std::to_string(lam.real()) + (lam.imag() < 0 ? "-" : "+") +
               std::to_string(std::abs(lam.imag())) +
               "i has no conjugate partner within tolerance; the model is corrupted");
    }
    consumed[i] = true;
    consumed[partner] = true;

    // Work from the +imag member. With z evolving as z' = lambda * z, the
    // real pair (Re z, -Im z) evolves by [[a, b], [-b, a]]; the factor 2 from
    // summing the conjugate contributions lives in the encoder rows.
    const int lead = model.lambda(i).imag() > 0.0 ? i : partner;
    const Complex lp = model.lambda(lead);
    const double a = lp.real();
    const double b = lp.imag();
    sys.dynamics(row, row) = a;
    sys.dynamics(row, row + 1) = b;
    sys.dynamics(row + 1, row) = -b;
    sys.dynamics(row + 1, row + 1) = a;
    sys.decoder.col(row) = model.phi.col(lead).real();
    sys.decoder.col(row + 1) = model.phi.col(lead).imag();
    sys.encoder.row(row) = 2.0 * model.encoder.row(lead).real();
    sys.encoder.row(row + 1) = -2.0 * model.encoder.row(lead).imag();
    sys.block_sizes.push_back(2);
    row += 2;
  }
  return sys;
}

void save_dmd_model(const DmdModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "dmd_model";
  header["rank"] = model.rank;
  header["state_dim"] = model.phi.rows();
  header["dt_months"] = model.dt_months;
  header["dtype"] = "float64";
  auto eigs = nlohmann::ordered_json::array();
  for (int i = 0; i < model.rank; ++i) {
    eigs.push_back({model.lambda(i).real(), model.lambda(i).imag()});
  }
  header["eigenvalues"] = eigs;

  // payload: phi then encoder, row-major, (re, im) per element
  std::vector<std::uint8_t> payload;
  payload.reserve(4 * sizeof(double) * model.phi.size());
  auto append_complex = [&payload](const Eigen::MatrixXcd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double re_im[2] = {m(i, j).real(), m(i, j).imag()};
        append_f64(payload, re_im, 2);
      }
    }
  };
  append_complex(model.phi);
  append_complex(model.encoder);
  write_container(path, header, payload.data(), payload.size());
}

DmdModel load_dmd_model(const std::filesystem::path& path) {
  const auto c = read_container(path);
  if (require_string(c.header, "kind") != "dmd_model") {
    fail(ErrorKind::MalformedHeader, path.string() + ": not a dmd_model container");
  }
  if (require_string(c.header, "dtype") != "float64") {
    fail(ErrorKind::MalformedHeader, path.string() + ": model payloads must be float64");
  }
  DmdModel model;
  model.rank = static_cast<int>(require_int(c.header, "rank"));
  const auto d = require_int(c.header, "state_dim");
  model.dt_months = static_cast<int>(require_int(c.header, "dt_months"));
  if (model.rank < 1 || d < 1) {
    fail(ErrorKind::MalformedHeader, path.string() + ": non-positive dimensions");
  }
  const auto eigs = require_field(c.header, "eigenvalues");
  if (!eigs.is_array() || static_cast<int>(eigs.size()) != model.rank) {
    fail(ErrorKind::MalformedHeader, path.string() + ": eigenvalue list does not match rank");
  }
  model.lambda.resize(model.rank);
  for (int i = 0; i < model.rank; ++i) {
    if (!eigs[i].is_array() || eigs[i].size() != 2) {
      fail(ErrorKind::MalformedHeader, path.string() + ": eigenvalues must be [re, im] pairs");
    }
    model.lambda(i) = Complex(eigs[i][0].get<double>(), eigs[i][1].get<double>());
  }

  const std::size_t n_complex = 2 * static_cast<std::size_t>(d) * model.rank;
  if (c.payload.size() != n_complex * 2 * sizeof(double)) {
    fail(ErrorKind::DimensionMismatch, path.string() + ": payload size does not match header");
  }
  const auto values = decode_f64(c.payload.data(), n_complex * 2);
  std::size_t pos = 0;
  auto read_complex = [&values, &pos](Eigen::MatrixXcd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = Complex(values[pos], values[pos + 1]);
        pos += 2;
      }
    }
  };
  read_complex(model.phi, d, model.rank);
  read_complex(model.encoder, model.rank, d);
  return model;
}

}  // namespace resdmd
