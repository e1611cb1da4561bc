#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <stdexcept>
#include <vector>

#include "eshield/common.hpp"
#include "eshield/spectral.hpp"

namespace eshield::rbns {

struct DirectionProjection {
  int direction_index = 0;          // eigenvalue rank j
  std::vector<double> values;       // u_{i,j} per input
  Eigen::VectorXd direction;        // unit p-vector v_j
};

struct TrainConfig {
  int hidden_width = 16;
  int epochs = 200;
  double step_size = 0.01;
  std::uint64_t seed = 0;
};

// Conditional diagonal-Gaussian decoder: scalar u -> tanh MLP -> per-dimension
// mean and log-variance (clamped to [-10, 10]).
class DensityEstimator {
 public:
  DensityEstimator() = default;
  DensityEstimator(int feature_dim, const TrainConfig& config);

  // Estimator that ignores u and always emits the given Gaussian. Handy for
  // closed-form KL checks.
  static DensityEstimator constant(const Eigen::VectorXd& mean,
                                   const Eigen::VectorXd& log_var);

  // Predicted mean / log-variance for one conditioning scalar.
  void predict(double u, Eigen::VectorXd& mean, Eigen::VectorXd& log_var) const;

  // Full-batch gradient descent on Gaussian negative log-likelihood.
  // Returns per-checkpoint training losses (every 10 epochs plus the last).
  std::vector<double> train(const std::vector<double>& projections,
                            const Eigen::MatrixXd& features);

  int feature_dim() const { return static_cast<int>(b2_.size()) / 2; }
  const TrainConfig& config() const { return config_; }
  bool operator==(const DensityEstimator& other) const {
    return w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_;
  }

 private:
  TrainConfig config_;
  Eigen::VectorXd w1_, b1_;  // 1 -> hidden
  Eigen::MatrixXd w2_;       // hidden -> 2d (means then log-variances)
  Eigen::VectorXd b2_;
};

struct RbnsRecord {
  int direction_index = 0;
  std::vector<double> performances;  // Perf_{j,k}, nats
  double rho = 0.0;
  double alpha = 1.0;
};

struct FoldPlan {
  int fold_count = 10;
  std::vector<int> assignments;  // per-sample fold index
  std::uint64_t seed = 0;
};

// Seeded permutation dealt round-robin; fold sizes differ by at most 1.
FoldPlan make_folds(int sample_count, int k, std::uint64_t seed);

// u_{i,j} = <rank-j eigenvector of input i, v_j>, canonical signs assumed.
inline std::vector<DirectionProjection> project_directions(
    const std::vector<spectral::SpectralDecomposition>& decomps,
    const std::vector<std::pair<int, Eigen::VectorXd>>& outlier_directions) {
  std::vector<DirectionProjection> out;
  out.reserve(outlier_directions.size());
  for (const auto& [rank, v] : outlier_directions) {
    DirectionProjection proj;
    proj.direction_index = rank;
    proj.direction = v;
    proj.values.reserve(decomps.size());
    for (const auto& d : decomps) {
      if (rank < 0 || rank >= d.eigenvectors.cols()) {
        throw std::out_of_range("project_directions: rank exceeds dimension");
      }
      if (v.size() != d.eigenvectors.rows()) {
        throw std::invalid_argument("project_directions: dimension mismatch");
      }
      proj.values.push_back(d.eigenvectors.col(rank).dot(v));
    }
    out.push_back(std::move(proj));
  }
  return out;
}

inline DensityEstimator train_density(const std::vector<double>& projections,
                                      const Eigen::MatrixXd& features,
                                      const TrainConfig& config) {
  if (static_cast<Eigen::Index>(projections.size()) != features.rows()) {
    throw std::invalid_argument("train_density: projection/feature length mismatch");
  }
  if (projections.size() < 4) {
    throw std::invalid_argument("train_density: need at least 4 training samples");
  }
  DensityEstimator est(static_cast<int>(features.cols()), config);
  est.train(projections, features);
  return est;
}

// Mean over fold samples of closed-form KL(P_hat || Q_{.|u_i}), nats.
// P_hat is the diagonal Gaussian fitted on the held-out fold (variance
// floored at 1e-8).
double kl_performance(const DensityEstimator& estimator,
                      const std::vector<double>& held_out_projections,
                      const Eigen::MatrixXd& held_out_features);

// Eq-style spread: median minus type-7 lower quantile of fold performances.
inline double robustness_statistic(const std::vector<double>& performances, double q = 0.10) {
  if (performances.size() < 2) {
    throw std::invalid_argument("robustness_statistic: need at least 2 performances");
  }
  return median(performances) - quantile_type7(performances, q);
}

inline double nonconformity(double rho) {
  if (!std::isfinite(rho)) throw std::domain_error("nonconformity: rho must be finite");
  return std::exp(rho);
}

inline double quantile_threshold(const std::vector<double>& alphas, double gamma) {
  return quantile_type7(alphas, gamma);
}

struct CausalSelection {
  std::vector<int> causal;  // positions into the record list
  double tau_star = 0.0;
};

// Causal set {j : alpha_j <= t_hat}; tau* = min eigenvalue over the set.
inline CausalSelection causal_eigenvalue_threshold(const std::vector<RbnsRecord>& records,
                                                   const std::vector<double>& outlier_eigenvalues,
                                                   double t_hat) {
  if (records.size() != outlier_eigenvalues.size()) {
    throw std::invalid_argument("causal_eigenvalue_threshold: records/eigenvalues misaligned");
  }
  CausalSelection sel;
  double tau = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < records.size(); ++j) {
    if (records[j].alpha <= t_hat) {
      sel.causal.push_back(static_cast<int>(j));
      tau = std::min(tau, outlier_eigenvalues[j]);
    }
  }
  if (sel.causal.empty()) {
    throw CalibrationError("causal_eigenvalue_threshold: empty causal set", outlier_eigenvalues);
  }
  sel.tau_star = tau;
  return sel;
}

}  // namespace eshield::rbns
