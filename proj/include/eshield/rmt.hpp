#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "eshield/common.hpp"
#include "eshield/quadrature.hpp"

namespace eshield::rmt {

// Marchenko-Pastur bulk model: noise variance, aspect ratio p/n, support edges.
struct MpModel {
  double sigma2 = 1.0;
  double c = 1.0;
  double lambda_minus = 0.0;
  double lambda_plus = 4.0;
};

struct SpikePrediction {
  double beta = 0.0;
  bool supercritical = false;
  std::optional<double> outlier_location;
};

struct RmtFit {
  Eigen::MatrixXd basis;        // p x r, orthonormal columns
  Eigen::VectorXd signal_eigs;  // r
  double sigma2 = 0.0;
  double loss = 0.0;
  bool negative_signal = false;  // any fitted signal eigenvalue < 0
};

// Semicircle density with scale sigma, supported on |lambda| <= 2 sigma.
template <class Scalar>
Scalar wigner_pdf(Scalar lambda, Scalar sigma) {
  if (!(sigma > Scalar(0))) throw std::domain_error("wigner_pdf: sigma must be positive");
  const Scalar s2 = sigma * sigma;
  const Scalar disc = Scalar(4) * s2 - lambda * lambda;
  if (disc <= Scalar(0)) return Scalar(0);
  return std::sqrt(disc) / (Scalar(2) * std::numbers::pi_v<Scalar> * s2);
}

template <class Scalar>
Scalar mp_lambda_minus(Scalar sigma2, Scalar c) {
  const Scalar r = Scalar(1) - std::sqrt(c);
  return sigma2 * r * r;
}

template <class Scalar>
Scalar mp_lambda_plus(Scalar sigma2, Scalar c) {
  const Scalar r = Scalar(1) + std::sqrt(c);
  return sigma2 * r * r;
}

inline MpModel mp_bulk_edges(double sigma2, double c) {
  if (!(sigma2 > 0.0)) throw std::domain_error("mp_bulk_edges: sigma2 must be positive");
  if (!(c > 0.0)) throw std::domain_error("mp_bulk_edges: c must be positive");
  return MpModel{sigma2, c, mp_lambda_minus(sigma2, c), mp_lambda_plus(sigma2, c)};
}

// Continuous part of the MP density. Integrates to 1 on the support for
// c <= 1 and to 1/c for c > 1 (the rest sits in an atom at zero).
inline double mp_pdf(double lambda, const MpModel& model) {
  if (lambda <= model.lambda_minus || lambda >= model.lambda_plus) return 0.0;
  if (lambda <= 0.0) return 0.0;
  const double disc = (model.lambda_plus - lambda) * (lambda - model.lambda_minus);
  return std::sqrt(disc) / (2.0 * std::numbers::pi * model.sigma2 * model.c * lambda);
}

// Median of the unit-variance MP law at aspect ratio c, by adaptive-Simpson
// CDF evaluation and bisection. For c > 1 the atom of mass 1 - 1/c at zero
// is counted; a median pinned at zero (c >= 2) is rejected.
inline double mp_median(double c) {
  if (!(c > 0.0)) throw std::domain_error("mp_median: c must be positive");
  const MpModel unit = mp_bulk_edges(1.0, c);
  const double atom = c > 1.0 ? 1.0 - 1.0 / c : 0.0;
  if (atom >= 0.5) throw std::domain_error("mp_median: median degenerate at zero for c >= 2");
  auto cdf = [&](double t) {
    return atom + adaptive_simpson([&](double x) { return mp_pdf(x, unit); },
                                   unit.lambda_minus, t, 1e-10);
  };
  return bisect([&](double t) { return cdf(t) - 0.5; },
                unit.lambda_minus, unit.lambda_plus, 1e-10);
}

// sigma^2 estimate as median(eigenvalues) / median of the unit MP law.
// Robust to a handful of spikes.
inline double estimate_noise_variance(const std::vector<double>& eigenvalues, double c) {
  if (eigenvalues.empty()) throw std::invalid_argument("estimate_noise_variance: empty spectrum");
  if (!(c > 0.0)) throw std::domain_error("estimate_noise_variance: c must be positive");
  const double med = median(eigenvalues);
  if (med <= 0.0) {
    throw std::invalid_argument("estimate_noise_variance: degenerate spectrum (median <= 0)");
  }
  return med / mp_median(c);
}

inline SpikePrediction spiked_outlier_location(double lambda_prime, double sigma2, double c) {
  if (!(lambda_prime > 0.0) || !(sigma2 > 0.0) || !(c > 0.0)) {
    throw std::domain_error("spiked_outlier_location: inputs must be positive");
  }
  SpikePrediction pred;
  pred.beta = lambda_prime / sigma2;
  const double root = 1.0 + std::sqrt(c);
  pred.supercritical = pred.beta > root * root;
  if (pred.supercritical) {
    pred.outlier_location = sigma2 * (pred.beta + c * pred.beta / (pred.beta - 1.0));
  }
  return pred;
}

// Indices of eigenvalues above lambda_plus * (1 + slack). The input is
// descending, so the result is a contiguous prefix.
inline std::vector<int> detect_outliers(const std::vector<double>& eigenvalues,
                                        const MpModel& model, double slack) {
  if (slack < 0.0) throw std::domain_error("detect_outliers: slack must be >= 0");
  for (std::size_t i = 1; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] > eigenvalues[i - 1]) {
      throw std::invalid_argument("detect_outliers: eigenvalues must be sorted descending");
    }
  }
  const double cut = model.lambda_plus * (1.0 + slack);
  std::vector<int> out;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] > cut) {
      out.push_back(static_cast<int>(i));
    } else {
      break;
    }
  }
  return out;
}

// Squared Frobenius residual of cov - (U Lambda U^T + sigma^2 I).
inline double rmt_loss(const Eigen::MatrixXd& cov, const RmtFit& fit) {
  const auto p = cov.rows();
  if (cov.cols() != p) throw std::invalid_argument("rmt_loss: covariance must be square");
  if (fit.basis.rows() != p || fit.basis.cols() != fit.signal_eigs.size()) {
    throw std::invalid_argument("rmt_loss: fit dimensions incompatible with covariance");
  }
  Eigen::MatrixXd model = fit.basis * fit.signal_eigs.asDiagonal() * fit.basis.transpose();
  model.diagonal().array() += fit.sigma2;
  return (cov - model).squaredNorm();
}

// Closed-form Frobenius minimizer: top-r eigenvectors, trailing-mean noise,
// signal eigenvalues shifted by the noise estimate.
RmtFit fit_rmt_decomposition(const Eigen::MatrixXd& cov, int r);

// Symmetric p x p matrix with i.i.d. N(0, sigma^2) upper-triangular entries.
Eigen::MatrixXd sample_wigner(int p, double sigma, std::uint64_t seed);

struct SpikedDataset {
  Eigen::MatrixXd data;        // n x p
  Eigen::MatrixXd directions;  // p x k planted orthonormal frame
};

// n i.i.d. rows with covariance V diag(spikes) V^T + sigma2 I, V a seeded
// random orthonormal frame (returned for oracle tests).
SpikedDataset sample_spiked_dataset(int n, int p, const std::vector<double>& spikes,
                                    double sigma2, std::uint64_t seed);

// k-th moment of the semicircle law by adaptive quadrature; odd k is 0.
inline double semicircle_moment(int k, double sigma) {
  if (k < 0) throw std::domain_error("semicircle_moment: order must be >= 0");
  if (!(sigma > 0.0)) throw std::domain_error("semicircle_moment: sigma must be positive");
  if (k % 2 == 1) return 0.0;
  return adaptive_simpson(
      [&](double x) { return std::pow(x, k) * wigner_pdf(x, sigma); },
      -2.0 * sigma, 2.0 * sigma, 1e-10);
}

}  // namespace eshield::rmt
