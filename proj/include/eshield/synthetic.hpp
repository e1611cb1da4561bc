#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "eshield/spectral.hpp"

namespace eshield::synthetic {

// Validation-set generator with one planted causal spike and, optionally, a
// spurious outlier pair. Per input i:
//   - causal spike of strength causal_strength * s_i along a fixed direction
//     v_c, with latent s_i ~ U(latent_lo, latent_hi);
//   - a spurious pair of spikes with strengths spurious_hi and spurious_lo
//     along a per-input randomly rotated orthogonal pair spanning a fixed
//     2-D subspace, so each input's spurious eigenvectors land at a random
//     angle against the pooled outlier directions.
// The causal direction carries a stable input-to-input relationship; the
// spurious subspace produces pooled MP outliers whose per-input eigenvector
// projections are unpredictable.
struct RbnsFixtureParams {
  int n_inputs = 200;
  int rows_per_input = 256;
  int p = 64;
  double sigma2 = 1.0;
  double causal_strength = 12.0;
  double latent_lo = 0.9;
  double latent_hi = 1.5;
  bool with_spurious = true;
  double spurious_lo = 3.0;
  double spurious_hi = 8.0;
};

struct RbnsFixture {
  std::vector<spectral::SampleMatrix> inputs;
  Eigen::VectorXd causal_direction;  // v_c
  Eigen::MatrixXd spurious_frame;    // p x 2 (empty when disabled)
  std::vector<double> latents;       // s_i
};

RbnsFixture make_rbns_fixture(const RbnsFixtureParams& params, std::uint64_t seed);

// Seeded random orthonormal p x k frame (QR with positive diagonal).
Eigen::MatrixXd random_orthonormal(int p, int k, std::uint64_t seed);

}  // namespace eshield::synthetic
