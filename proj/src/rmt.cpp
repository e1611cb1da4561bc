#include "eshield/rmt.hpp"

#include <Eigen/QR>

namespace eshield::rmt {

RmtFit fit_rmt_decomposition(const Eigen::MatrixXd& cov, int r) {
  const auto p = cov.rows();
  if (cov.cols() != p) throw std::invalid_argument("fit_rmt_decomposition: covariance must be square");
  if (r < 1 || r >= p) throw std::domain_error("fit_rmt_decomposition: rank must satisfy 1 <= r < p");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (cov + cov.transpose()));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("fit_rmt_decomposition: eigensolver failed");
  }
  // SelfAdjointEigenSolver is ascending; take the top-r from the tail.
  const Eigen::VectorXd evals = solver.eigenvalues();
  const Eigen::MatrixXd evecs = solver.eigenvectors();

  RmtFit fit;
  fit.basis.resize(p, r);
  fit.signal_eigs.resize(r);
  fit.sigma2 = evals.head(p - r).mean();
  for (int j = 0; j < r; ++j) {
    fit.basis.col(j) = evecs.col(p - 1 - j);
    fit.signal_eigs(j) = evals(p - 1 - j) - fit.sigma2;
    if (fit.signal_eigs(j) < 0.0) fit.negative_signal = true;
  }
  fit.loss = rmt_loss(cov, fit);
  return fit;
}

Eigen::MatrixXd sample_wigner(int p, double sigma, std::uint64_t seed) {
  if (p < 2) throw std::domain_error("sample_wigner: dimension must be >= 2");
  if (!(sigma > 0.0)) throw std::domain_error("sample_wigner: sigma must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixXd m(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) {
      const double v = gauss(rng);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

SpikedDataset sample_spiked_dataset(int n, int p, const std::vector<double>& spikes,
                                    double sigma2, std::uint64_t seed) {
  if (n < 1 || p < 2) throw std::domain_error("sample_spiked_dataset: need n >= 1, p >= 2");
  if (!(sigma2 > 0.0)) throw std::domain_error("sample_spiked_dataset: sigma2 must be positive");
  const int k = static_cast<int>(spikes.size());
  if (k >= p) throw std::domain_error("sample_spiked_dataset: need fewer spikes than dimensions");
  for (double s : spikes) {
    if (!(s > 0.0)) throw std::domain_error("sample_spiked_dataset: spikes must be positive");
  }

  const double sigma = std::sqrt(sigma2);
  std::mt19937_64 frame_rng(subseed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);

  SpikedDataset out;
  if (k > 0) {
    Eigen::MatrixXd g(p, k);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < p; ++i) g(i, j) = gauss(frame_rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    out.directions = qr.householderQ() * Eigen::MatrixXd::Identity(p, k);
    // Fix the QR sign ambiguity so the frame is a pure function of the seed.
    Eigen::MatrixXd rmat = out.directions.transpose() * g;
    for (int j = 0; j < k; ++j) {
      if (rmat(j, j) < 0.0) out.directions.col(j) = -out.directions.col(j);
    }
  } else {
    out.directions.resize(p, 0);
  }

  // Square root of V diag(spikes) V^T + sigma2 I applied to standard rows:
  // x = sigma z + sum_j (sqrt(sigma2 + spike_j) - sigma) <z, v_j> v_j.
  Eigen::VectorXd scale(k);
  for (int j = 0; j < k; ++j) scale(j) = std::sqrt(sigma2 + spikes[j]) - sigma;

  std::mt19937_64 data_rng(subseed(seed, 1));
  out.data.resize(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < p; ++d) z(d) = gauss(data_rng);
    Eigen::VectorXd row = sigma * z;
    if (k > 0) {
      row.noalias() += out.directions * (scale.asDiagonal() * (out.directions.transpose() * z));
    }
    out.data.row(i) = row.transpose();
  }
  return out;
}

}  // namespace eshield::rmt
