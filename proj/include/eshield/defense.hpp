#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eshield/rbns.hpp"
#include "eshield/rmt.hpp"
#include "eshield/spectral.hpp"

namespace eshield::defense {

struct FeatureConfig {
  int dim = 16;  // retained principal-component feature dimensions
};

struct CalibrationConfig {
  double gamma = 0.75;
  int fold_count = 10;
  double lower_quantile = 0.10;
  double slack = 0.01;
  FeatureConfig feature;
  rbns::TrainConfig estimator;  // estimator.seed is derived from `seed`
  std::uint64_t seed = 0;
};

struct StoredDirection {
  int index = 0;  // eigenvalue rank in the pooled spectrum
  double eigenvalue = 0.0;
  double alpha = 1.0;
  Eigen::VectorXd vector;
};

struct CalibrationResult {
  int pipeline_version = 1;
  double gamma = 0.75;
  double t_hat = 0.0;
  double tau_star = 0.0;
  rmt::MpModel mp_model;
  std::vector<StoredDirection> directions;  // all MP outliers, with alphas
  std::vector<int> causal;                  // positions into `directions`
  CalibrationConfig config;
};

struct FilterReport {
  std::string input_id;
  int retained_rank = 0;
  std::vector<double> eigenvalues_kept;
  std::vector<double> eigenvalues_dropped;
  bool passthrough = false;
  double energy_retained = 1.0;
};

enum class FilterMode { per_input, global };

// Phase-1 heavy lifting: pooled spectrum, outlier extraction, per-direction
// cross-validated RbNS scoring. Threshold selection is factored out so gamma
// sweeps reuse these scores.
struct RbnsScores {
  rmt::MpModel mp_model;
  std::vector<double> pooled_eigenvalues;
  std::vector<StoredDirection> directions;
  std::vector<rbns::RbnsRecord> records;
};

RbnsScores compute_rbns_scores(const std::vector<spectral::SampleMatrix>& inputs,
                               const CalibrationConfig& config);

CalibrationResult finalize_threshold(const RbnsScores& scores,
                                     const CalibrationConfig& config);

CalibrationResult calibrate(const std::vector<spectral::SampleMatrix>& inputs,
                            const CalibrationConfig& config);

std::pair<spectral::SampleMatrix, FilterReport> filter_input(
    const spectral::SampleMatrix& input, const CalibrationResult& calib,
    FilterMode mode = FilterMode::per_input, const std::string& input_id = "");

std::string calibration_to_json(const CalibrationResult& calib);
CalibrationResult calibration_from_json(const std::string& text);
void save_calibration(const CalibrationResult& calib, const std::string& path);
CalibrationResult load_calibration(const std::string& path);

}  // namespace eshield::defense
