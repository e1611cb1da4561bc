#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace eshield::metrics {

struct IndicatorSet {
  std::vector<int> outcomes;  // binary harm indicators
};

// Finite joint distribution over (X, U); entries sum to 1.
struct JointTable {
  Eigen::MatrixXd probabilities;  // rows = X values, cols = U values
};

inline void validate_table(const JointTable& table) {
  if (table.probabilities.size() == 0) throw std::invalid_argument("joint table is empty");
  if ((table.probabilities.array() < 0.0).any()) {
    throw std::invalid_argument("joint table has negative entries");
  }
  if (std::abs(table.probabilities.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("joint table does not sum to 1");
  }
}

inline double attack_success_rate(const IndicatorSet& indicators) {
  if (indicators.outcomes.empty()) throw std::invalid_argument("attack_success_rate: empty set");
  double sum = 0.0;
  for (int v : indicators.outcomes) {
    if (v != 0 && v != 1) throw std::invalid_argument("attack_success_rate: indicator not in {0,1}");
    sum += v;
  }
  return sum / static_cast<double>(indicators.outcomes.size());
}

// Shannon entropy in bits; 0 log 0 := 0.
inline double entropy(const std::vector<double>& marginal) {
  double sum = 0.0, h = 0.0;
  for (double p : marginal) {
    if (p < 0.0) throw std::invalid_argument("entropy: negative probability");
    sum += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("entropy: does not sum to 1");
  return h;
}

// H(X | U) = sum_u P(U=u) H(X | U=u), bits. Zero-marginal columns contribute 0.
inline double conditional_entropy(const JointTable& table) {
  validate_table(table);
  const auto& p = table.probabilities;
  double h = 0.0;
  for (Eigen::Index u = 0; u < p.cols(); ++u) {
    const double pu = p.col(u).sum();
    if (pu <= 0.0) continue;
    for (Eigen::Index x = 0; x < p.rows(); ++x) {
      const double cond = p(x, u) / pu;
      if (cond > 0.0) h -= pu * cond * std::log2(cond);
    }
  }
  return h;
}

inline double marginal_entropy_x(const JointTable& table) {
  validate_table(table);
  double h = 0.0;
  for (Eigen::Index x = 0; x < table.probabilities.rows(); ++x) {
    const double px = table.probabilities.row(x).sum();
    if (px > 0.0) h -= px * std::log2(px);
  }
  return h;
}

// I(X;U) = H(X) - H(X|U), bits.
inline double mutual_information(const JointTable& table) {
  return marginal_entropy_x(table) - conditional_entropy(table);
}

}  // namespace eshield::metrics
