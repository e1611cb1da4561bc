#include "eshield/defense.hpp"

#include <fstream>
#include <json.hpp>
#include <mutex>

#include "eshield/io.hpp"

namespace eshield::defense {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

RbnsScores compute_rbns_scores(const std::vector<spectral::SampleMatrix>& inputs,
                               const CalibrationConfig& config) {
  const int n_inputs = static_cast<int>(inputs.size());
  const int min_inputs = std::max(config.fold_count, 20);
  if (n_inputs < min_inputs) {
    throw std::invalid_argument("compute_rbns_scores: need at least max(K, 20) validation inputs");
  }
  const Eigen::Index p = inputs.front().data.cols();
  Eigen::Index total_rows = 0;
  for (const auto& in : inputs) {
    if (in.data.cols() != p) {
      throw std::invalid_argument("compute_rbns_scores: inconsistent feature dimensions");
    }
    total_rows += in.data.rows();
  }

  // Pooled spectrum over the concatenated validation rows.
  Eigen::MatrixXd pooled(total_rows, p);
  Eigen::Index at = 0;
  for (const auto& in : inputs) {
    pooled.middleRows(at, in.data.rows()) = in.data;
    at += in.data.rows();
  }
  spectral::SampleMatrix pooled_sample;
  pooled_sample.data = std::move(pooled);
  const Eigen::MatrixXd pooled_cov = spectral::covariance(pooled_sample, true);
  const spectral::SpectralDecomposition pooled_decomp = spectral::symmetric_eig(pooled_cov);

  RbnsScores scores;
  scores.pooled_eigenvalues = to_std(pooled_decomp.eigenvalues);

  const double c = static_cast<double>(p) / static_cast<double>(total_rows);
  const double sigma2 = rmt::estimate_noise_variance(scores.pooled_eigenvalues, c);
  scores.mp_model = rmt::mp_bulk_edges(sigma2, c);

  const std::vector<int> outliers =
      rmt::detect_outliers(scores.pooled_eigenvalues, scores.mp_model, config.slack);
  if (outliers.empty()) {
    throw CalibrationError("calibration failure: no Marchenko-Pastur outliers found",
                           scores.pooled_eigenvalues);
  }

  // Per-input eigendecompositions of each input's own centered covariance.
  std::vector<spectral::SpectralDecomposition> decomps(n_inputs);
  parallel_for(static_cast<std::size_t>(n_inputs), [&](std::size_t i) {
    decomps[i] = spectral::symmetric_eig(spectral::covariance(inputs[i], true));
  });

  // Whitened principal-component features: per input, mean squared projection
  // of its centered rows onto the top-d pooled directions, standardized to
  // zero mean and unit variance across the validation inputs.
  const int d = std::min<int>(config.feature.dim, static_cast<int>(p));
  const Eigen::VectorXd pooled_mean = pooled_sample.data.colwise().mean().transpose();
  Eigen::MatrixXd features(n_inputs, d);
  parallel_for(static_cast<std::size_t>(n_inputs), [&](std::size_t i) {
    const Eigen::MatrixXd centered =
        inputs[i].data.rowwise() - pooled_mean.transpose();
    for (int m = 0; m < d; ++m) {
      features(static_cast<Eigen::Index>(i), m) =
          (centered * pooled_decomp.eigenvectors.col(m)).squaredNorm() /
          static_cast<double>(centered.rows());
    }
  });
  for (int m = 0; m < d; ++m) {
    const double mean = features.col(m).mean();
    features.col(m).array() -= mean;
    const double sd = std::sqrt(features.col(m).squaredNorm() / n_inputs);
    features.col(m) /= std::max(sd, 1e-12);
  }

  std::vector<std::pair<int, Eigen::VectorXd>> outlier_dirs;
  outlier_dirs.reserve(outliers.size());
  for (int rank : outliers) {
    outlier_dirs.emplace_back(rank, pooled_decomp.eigenvectors.col(rank));
  }
  const std::vector<rbns::DirectionProjection> projections =
      rbns::project_directions(decomps, outlier_dirs);

  const rbns::FoldPlan folds =
      rbns::make_folds(n_inputs, config.fold_count, subseed(config.seed, 100));

  const int n_dirs = static_cast<int>(outliers.size());
  scores.records.assign(n_dirs, {});
  scores.directions.assign(n_dirs, {});

  parallel_for(static_cast<std::size_t>(n_dirs), [&](std::size_t j) {
    const auto& proj = projections[j];
    rbns::RbnsRecord rec;
    rec.direction_index = proj.direction_index;
    for (int k = 0; k < config.fold_count; ++k) {
      std::vector<double> train_u, test_u;
      std::vector<int> train_rows, test_rows;
      for (int i = 0; i < n_inputs; ++i) {
        if (folds.assignments[i] == k) {
          test_u.push_back(proj.values[i]);
          test_rows.push_back(i);
        } else {
          train_u.push_back(proj.values[i]);
          train_rows.push_back(i);
        }
      }
      Eigen::MatrixXd train_z(train_rows.size(), d), test_z(test_rows.size(), d);
      for (std::size_t r = 0; r < train_rows.size(); ++r) train_z.row(r) = features.row(train_rows[r]);
      for (std::size_t r = 0; r < test_rows.size(); ++r) test_z.row(r) = features.row(test_rows[r]);

      rbns::TrainConfig tc = config.estimator;
      tc.seed = subseed(config.seed,
                        1000 + static_cast<std::uint64_t>(proj.direction_index) *
                                   static_cast<std::uint64_t>(config.fold_count) +
                               static_cast<std::uint64_t>(k));
      const rbns::DensityEstimator est = rbns::train_density(train_u, train_z, tc);
      rec.performances.push_back(rbns::kl_performance(est, test_u, test_z));
    }
    rec.rho = rbns::robustness_statistic(rec.performances, config.lower_quantile);
    rec.alpha = rbns::nonconformity(rec.rho);
    scores.records[j] = std::move(rec);

    StoredDirection dir;
    dir.index = proj.direction_index;
    dir.eigenvalue = scores.pooled_eigenvalues[proj.direction_index];
    dir.alpha = scores.records[j].alpha;
    dir.vector = proj.direction;
    scores.directions[j] = std::move(dir);
  });

  return scores;
}

CalibrationResult finalize_threshold(const RbnsScores& scores,
                                     const CalibrationConfig& config) {
  std::vector<double> alphas, eigenvalues;
  for (const auto& dir : scores.directions) {
    alphas.push_back(dir.alpha);
    eigenvalues.push_back(dir.eigenvalue);
  }
  CalibrationResult result;
  result.gamma = config.gamma;
  result.t_hat = rbns::quantile_threshold(alphas, config.gamma);
  const rbns::CausalSelection sel =
      rbns::causal_eigenvalue_threshold(scores.records, eigenvalues, result.t_hat);
  result.tau_star = sel.tau_star;
  result.causal = sel.causal;
  result.mp_model = scores.mp_model;
  result.directions = scores.directions;
  result.config = config;
  return result;
}

CalibrationResult calibrate(const std::vector<spectral::SampleMatrix>& inputs,
                            const CalibrationConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) {
    throw std::domain_error("calibrate: gamma must lie in (0, 1]");
  }
  return finalize_threshold(compute_rbns_scores(inputs, config), config);
}

std::pair<spectral::SampleMatrix, FilterReport> filter_input(
    const spectral::SampleMatrix& input, const CalibrationResult& calib,
    FilterMode mode, const std::string& input_id) {
  const Eigen::Index p = calib.directions.empty()
                             ? input.data.cols()
                             : calib.directions.front().vector.size();
  if (input.data.cols() != p) {
    throw std::invalid_argument("filter_input: dimension mismatch with calibration");
  }

  FilterReport report;
  report.input_id = input_id;
  const double in_energy = input.data.squaredNorm();

  spectral::CausalProjector projector;
  if (mode == FilterMode::global) {
    projector.basis.resize(p, static_cast<Eigen::Index>(calib.causal.size()));
    Eigen::Index col = 0;
    for (int pos : calib.causal) {
      projector.basis.col(col++) = calib.directions[pos].vector;
      report.eigenvalues_kept.push_back(calib.directions[pos].eigenvalue);
    }
  } else {
    const spectral::SpectralDecomposition decomp =
        spectral::symmetric_eig(spectral::covariance(input, true));
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < decomp.eigenvalues.size(); ++i) {
      if (decomp.eigenvalues(i) > calib.tau_star) {
        keep.push_back(static_cast<int>(i));
        report.eigenvalues_kept.push_back(decomp.eigenvalues(i));
      } else {
        report.eigenvalues_dropped.push_back(decomp.eigenvalues(i));
      }
    }
    if (keep.empty()) {
      // Clean input with no causal spectrum: pass through, never fail.
      report.passthrough = true;
      report.retained_rank = 0;
      report.energy_retained = 1.0;
      return {input, report};
    }
    projector = spectral::build_projector(decomp, keep);
  }

  report.retained_rank = projector.rank();
  spectral::SampleMatrix filtered = spectral::project_rows(input, projector);
  report.energy_retained =
      in_energy > 0.0 ? filtered.data.squaredNorm() / in_energy : 1.0;
  return {std::move(filtered), report};
}

std::string calibration_to_json(const CalibrationResult& calib) {
  json doc;
  doc["version"] = calib.pipeline_version;
  doc["gamma"] = calib.gamma;
  doc["t_hat"] = calib.t_hat;
  doc["tau_star"] = calib.tau_star;
  doc["sigma2"] = calib.mp_model.sigma2;
  doc["c"] = calib.mp_model.c;
  doc["lambda_plus"] = calib.mp_model.lambda_plus;
  doc["directions"] = json::array();
  for (const auto& dir : calib.directions) {
    doc["directions"].push_back({{"index", dir.index},
                                 {"eigenvalue", dir.eigenvalue},
                                 {"alpha", dir.alpha},
                                 {"vector", to_std(dir.vector)}});
  }
  doc["causal"] = calib.causal;
  doc["seeds"] = {{"master", calib.config.seed}};
  doc["feature_config"] = {{"dim", calib.config.feature.dim}};
  doc["estimator_config"] = {{"hidden_width", calib.config.estimator.hidden_width},
                             {"epochs", calib.config.estimator.epochs},
                             {"step_size", calib.config.estimator.step_size}};
  doc["fold_count"] = calib.config.fold_count;
  doc["lower_quantile"] = calib.config.lower_quantile;
  doc["slack"] = calib.config.slack;
  return doc.dump(2);
}

CalibrationResult calibration_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CorruptFileError(std::string("calibration artifact is not valid JSON: ") + e.what());
  }
  try {
    CalibrationResult calib;
    calib.pipeline_version = doc.at("version").get<int>();
    if (calib.pipeline_version != CalibrationResult{}.pipeline_version) {
      throw VersionMismatchError("calibration artifact version mismatch");
    }
    calib.gamma = doc.at("gamma").get<double>();
    calib.t_hat = doc.at("t_hat").get<double>();
    calib.tau_star = doc.at("tau_star").get<double>();
    const double sigma2 = doc.at("sigma2").get<double>();
    const double c = doc.at("c").get<double>();
    calib.mp_model = rmt::mp_bulk_edges(sigma2, c);
    if (std::abs(calib.mp_model.lambda_plus - doc.at("lambda_plus").get<double>()) >
        1e-9 * std::max(1.0, calib.mp_model.lambda_plus)) {
      throw CorruptFileError("calibration artifact: inconsistent lambda_plus");
    }
    Eigen::Index dim = -1;
    for (const auto& entry : doc.at("directions")) {
      StoredDirection dir;
      dir.index = entry.at("index").get<int>();
      dir.eigenvalue = entry.at("eigenvalue").get<double>();
      dir.alpha = entry.at("alpha").get<double>();
      const auto vec = entry.at("vector").get<std::vector<double>>();
      if (dim < 0) dim = static_cast<Eigen::Index>(vec.size());
      if (static_cast<Eigen::Index>(vec.size()) != dim) {
        throw CorruptFileError("calibration artifact: inconsistent direction dimensions");
      }
      dir.vector = Eigen::Map<const Eigen::VectorXd>(vec.data(), dim);
      calib.directions.push_back(std::move(dir));
    }
    calib.causal = doc.at("causal").get<std::vector<int>>();
    for (int pos : calib.causal) {
      if (pos < 0 || pos >= static_cast<int>(calib.directions.size())) {
        throw CorruptFileError("calibration artifact: causal index out of range");
      }
    }
    calib.config.seed = doc.at("seeds").at("master").get<std::uint64_t>();
    calib.config.feature.dim = doc.at("feature_config").at("dim").get<int>();
    calib.config.estimator.hidden_width =
        doc.at("estimator_config").at("hidden_width").get<int>();
    calib.config.estimator.epochs = doc.at("estimator_config").at("epochs").get<int>();
    calib.config.estimator.step_size =
        doc.at("estimator_config").at("step_size").get<double>();
    calib.config.gamma = calib.gamma;
    calib.config.fold_count = doc.at("fold_count").get<int>();
    calib.config.lower_quantile = doc.at("lower_quantile").get<double>();
    calib.config.slack = doc.at("slack").get<double>();
    return calib;
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("calibration artifact missing fields: ") + e.what());
  }
}

void save_calibration(const CalibrationResult& calib, const std::string& path) {
  io::atomic_write_text(path, calibration_to_json(calib));
}

CalibrationResult load_calibration(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFileError("cannot open calibration artifact: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return calibration_from_json(text);
}

}  // namespace eshield::defense
