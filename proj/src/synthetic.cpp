#include "eshield/synthetic.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numbers>
#include <random>

#include "eshield/common.hpp"

namespace eshield::synthetic {

Eigen::MatrixXd random_orthonormal(int p, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(p, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < p; ++i) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, k);
  const Eigen::MatrixXd r = q.transpose() * g;
  for (int j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

RbnsFixture make_rbns_fixture(const RbnsFixtureParams& params, std::uint64_t seed) {
  const int p = params.p;
  const double sigma = std::sqrt(params.sigma2);

  RbnsFixture fixture;
  const int frame_cols = params.with_spurious ? 3 : 1;
  Eigen::MatrixXd frame = random_orthonormal(p, frame_cols, subseed(seed, 0));

  // Sharpen the causal direction so its largest-magnitude component is
  // unambiguous: per-input eigenvector sign canonicalization then agrees
  // with the pooled direction for every input, and the projections u_{i,j}
  // concentrate near +1 instead of splitting into +-1 clusters.
  Eigen::VectorXd v = frame.col(0);
  Eigen::Index peak = 0;
  v.cwiseAbs().maxCoeff(&peak);
  v(peak) += 3.0 * (v(peak) < 0.0 ? -1.0 : 1.0);
  v.normalize();
  fixture.causal_direction = v;
  if (params.with_spurious) {
    fixture.spurious_frame = frame.rightCols(2);
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd w = fixture.spurious_frame.col(j);
      w -= v.dot(w) * v;
      for (int k = 0; k < j; ++k) {
        w -= fixture.spurious_frame.col(k).dot(w) * fixture.spurious_frame.col(k);
      }
      fixture.spurious_frame.col(j) = w.normalized();
    }
  } else {
    fixture.spurious_frame.resize(p, 0);
  }

  std::mt19937_64 rng(subseed(seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> latent(params.latent_lo, params.latent_hi);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  fixture.inputs.reserve(params.n_inputs);
  fixture.latents.reserve(params.n_inputs);
  Eigen::VectorXd z(p);
  for (int i = 0; i < params.n_inputs; ++i) {
    const double s = latent(rng);
    fixture.latents.push_back(s);
    const double a_causal = params.causal_strength * s;
    const double scale_c = std::sqrt(params.sigma2 + a_causal) - sigma;

    Eigen::VectorXd v_spur_a, v_spur_b;
    double scale_a = 0.0, scale_b = 0.0;
    if (params.with_spurious) {
      const double theta = angle(rng);
      v_spur_a = std::cos(theta) * fixture.spurious_frame.col(0) +
                 std::sin(theta) * fixture.spurious_frame.col(1);
      v_spur_b = -std::sin(theta) * fixture.spurious_frame.col(0) +
                 std::cos(theta) * fixture.spurious_frame.col(1);
      scale_a = std::sqrt(params.sigma2 + params.spurious_hi) - sigma;
      scale_b = std::sqrt(params.sigma2 + params.spurious_lo) - sigma;
    }

    spectral::SampleMatrix input;
    input.data.resize(params.rows_per_input, p);
    for (int r = 0; r < params.rows_per_input; ++r) {
      for (int d = 0; d < p; ++d) z(d) = gauss(rng);
      Eigen::VectorXd row = sigma * z;
      row += scale_c * fixture.causal_direction.dot(z) * fixture.causal_direction;
      if (params.with_spurious) {
        row += scale_a * v_spur_a.dot(z) * v_spur_a;
        row += scale_b * v_spur_b.dot(z) * v_spur_b;
      }
      input.data.row(r) = row.transpose();
    }
    fixture.inputs.push_back(std::move(input));
  }
  return fixture;
}

}  // namespace eshield::synthetic
