#include "eshield/rbns.hpp"

#include <random>

namespace eshield::rbns {

namespace {
constexpr double kLogVarLo = -10.0;
constexpr double kLogVarHi = 10.0;
constexpr double kVarFloor = 1e-8;
constexpr double kLog2Pi = 1.8378770664093453;
}  // namespace

FoldPlan make_folds(int sample_count, int k, std::uint64_t seed) {
  if (k < 2) throw std::domain_error("make_folds: need at least 2 folds");
  if (sample_count < k) throw std::invalid_argument("make_folds: fewer samples than folds");
  std::vector<int> order(sample_count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = sample_count - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  FoldPlan plan;
  plan.fold_count = k;
  plan.seed = seed;
  plan.assignments.assign(sample_count, 0);
  for (int pos = 0; pos < sample_count; ++pos) {
    plan.assignments[order[pos]] = pos % k;
  }
  return plan;
}

DensityEstimator::DensityEstimator(int feature_dim, const TrainConfig& config)
    : config_(config) {
  if (feature_dim < 1) throw std::domain_error("DensityEstimator: feature dim must be >= 1");
  const int h = config.hidden_width;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  w1_.resize(h);
  b1_ = Eigen::VectorXd::Zero(h);
  w2_.resize(2 * feature_dim, h);
  b2_ = Eigen::VectorXd::Zero(2 * feature_dim);
  for (int i = 0; i < h; ++i) w1_(i) = gauss(rng);
  const double scale2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (int i = 0; i < w2_.rows(); ++i)
    for (int j = 0; j < h; ++j) w2_(i, j) = scale2 * gauss(rng);
}

DensityEstimator DensityEstimator::constant(const Eigen::VectorXd& mean,
                                            const Eigen::VectorXd& log_var) {
  if (mean.size() != log_var.size() || mean.size() < 1) {
    throw std::invalid_argument("DensityEstimator::constant: shape mismatch");
  }
  TrainConfig config;
  config.hidden_width = 1;
  DensityEstimator est(static_cast<int>(mean.size()), config);
  est.w1_.setZero();
  est.w2_.setZero();
  est.b2_ << mean, log_var;
  return est;
}

void DensityEstimator::predict(double u, Eigen::VectorXd& mean, Eigen::VectorXd& log_var) const {
  const Eigen::VectorXd hidden = (w1_ * u + b1_).array().tanh().matrix();
  const Eigen::VectorXd out = w2_ * hidden + b2_;
  const int d = feature_dim();
  mean = out.head(d);
  log_var = out.tail(d).cwiseMax(kLogVarLo).cwiseMin(kLogVarHi);
}

std::vector<double> DensityEstimator::train(const std::vector<double>& projections,
                                            const Eigen::MatrixXd& features) {
  const int n = static_cast<int>(projections.size());
  const int d = feature_dim();
  const int h = config_.hidden_width;
  if (features.rows() != n || features.cols() != d) {
    throw std::invalid_argument("DensityEstimator::train: shape mismatch");
  }

  std::vector<double> checkpoints;
  Eigen::VectorXd gw1(h), gb1(h), gb2(2 * d);
  Eigen::MatrixXd gw2(2 * d, h);

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    gw1.setZero();
    gb1.setZero();
    gw2.setZero();
    gb2.setZero();
    double loss = 0.0;

    for (int i = 0; i < n; ++i) {
      const double u = projections[i];
      const Eigen::VectorXd hidden = (w1_ * u + b1_).array().tanh().matrix();
      const Eigen::VectorXd out = w2_ * hidden + b2_;

      Eigen::VectorXd gout = Eigen::VectorXd::Zero(2 * d);
      for (int m = 0; m < d; ++m) {
        const double mu = out(m);
        const double lv_raw = out(d + m);
        const bool clamped = lv_raw < kLogVarLo || lv_raw > kLogVarHi;
        const double lv = std::clamp(lv_raw, kLogVarLo, kLogVarHi);
        const double inv_var = std::exp(-lv);
        const double resid = features(i, m) - mu;
        loss += 0.5 * (kLog2Pi + lv + resid * resid * inv_var);
        gout(m) = -resid * inv_var;
        if (!clamped) gout(d + m) = 0.5 * (1.0 - resid * resid * inv_var);
      }

      gw2.noalias() += gout * hidden.transpose();
      gb2 += gout;
      const Eigen::VectorXd ghidden =
          (w2_.transpose() * gout).cwiseProduct(
              (1.0 - hidden.array().square()).matrix());
      gw1 += ghidden * u;
      gb1 += ghidden;
    }

    const double inv_n = 1.0 / n;
    loss *= inv_n;
    w1_ -= config_.step_size * inv_n * gw1;
    b1_ -= config_.step_size * inv_n * gb1;
    w2_ -= config_.step_size * inv_n * gw2;
    b2_ -= config_.step_size * inv_n * gb2;
    if (epoch % 10 == 0 || epoch == config_.epochs - 1) checkpoints.push_back(loss);
  }
  return checkpoints;
}

double kl_performance(const DensityEstimator& estimator,
                      const std::vector<double>& held_out_projections,
                      const Eigen::MatrixXd& held_out_features) {
  const int m = static_cast<int>(held_out_projections.size());
  if (m < 2) throw std::invalid_argument("kl_performance: fold needs at least 2 samples");
  if (held_out_features.rows() != m) {
    throw std::invalid_argument("kl_performance: projection/feature length mismatch");
  }
  const int d = static_cast<int>(held_out_features.cols());

  // Fold-fitted diagonal Gaussian P_hat.
  const Eigen::VectorXd p_mean = held_out_features.colwise().mean().transpose();
  Eigen::VectorXd p_var = (held_out_features.rowwise() - p_mean.transpose())
                              .array()
                              .square()
                              .colwise()
                              .mean()
                              .transpose()
                              .matrix();
  p_var = p_var.cwiseMax(kVarFloor);

  double total = 0.0;
  Eigen::VectorXd q_mean(d), q_log_var(d);
  for (int i = 0; i < m; ++i) {
    estimator.predict(held_out_projections[i], q_mean, q_log_var);
    double kl = 0.0;
    for (int j = 0; j < d; ++j) {
      const double q_var = std::exp(q_log_var(j));
      const double diff = p_mean(j) - q_mean(j);
      kl += 0.5 * (q_log_var(j) - std::log(p_var(j)) +
                   (p_var(j) + diff * diff) / q_var - 1.0);
    }
    total += kl;
  }
  return total / m;
}

}  // namespace eshield::rbns
