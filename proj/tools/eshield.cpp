// Command-line surface for the spectral filtering pipeline.
//
// Exit codes: 0 success, 1 validation-suite failure, 2 input error,
// 3 numeric or calibration failure.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "eshield/common.hpp"
#include "eshield/defense.hpp"
#include "eshield/io.hpp"
#include "eshield/metrics.hpp"
#include "eshield/rmt.hpp"
#include "eshield/spectral.hpp"
#include "eshield/validate.hpp"

namespace {

using nlohmann::json;

json histogram_json(const Eigen::VectorXd& values, int bins) {
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  const double width = (hi - lo) / bins;
  std::vector<int> counts(bins, 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = width > 0.0 ? static_cast<int>((values(i) - lo) / width) : 0;
    counts[std::clamp(b, 0, bins - 1)]++;
  }
  return json{{"lo", lo}, {"hi", hi}, {"bins", bins}, {"counts", counts}};
}

void emit_report(const std::string& out_path, const json& report) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    eshield::io::atomic_write_text(out_path, report.dump(2));
  }
}

Eigen::VectorXd covariance_spectrum(const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd cov =
      (data.transpose() * data) / static_cast<double>(data.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return solver.eigenvalues();
}

Eigen::MatrixXd gaussian_data(int n, int p, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = gauss(rng);
  return x;
}

struct CliRunConfig {
  eshield::defense::CalibrationConfig calib;
  int rows_per_input = 0;
  int patch_side = 8;
  std::string mode = "per_input";
};

json run_config_json(const CliRunConfig& rc) {
  return json{{"seed", rc.calib.seed},
              {"gamma", rc.calib.gamma},
              {"fold_count", rc.calib.fold_count},
              {"lower_quantile", rc.calib.lower_quantile},
              {"slack", rc.calib.slack},
              {"feature_dim", rc.calib.feature.dim},
              {"rows_per_input", rc.rows_per_input},
              {"patch_side", rc.patch_side},
              {"mode", rc.mode},
              {"estimator",
               {{"hidden_width", rc.calib.estimator.hidden_width},
                {"epochs", rc.calib.estimator.epochs},
                {"step_size", rc.calib.estimator.step_size}}}};
}

CliRunConfig load_run_config(const std::string& path) {
  CliRunConfig rc;
  if (path.empty()) return rc;
  std::ifstream in(path);
  if (!in) throw eshield::CorruptFileError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw eshield::CorruptFileError(std::string("config is not valid JSON: ") + e.what());
  }
  rc.calib.seed = doc.value("seed", rc.calib.seed);
  rc.calib.gamma = doc.value("gamma", rc.calib.gamma);
  rc.calib.fold_count = doc.value("fold_count", rc.calib.fold_count);
  rc.calib.lower_quantile = doc.value("lower_quantile", rc.calib.lower_quantile);
  rc.calib.slack = doc.value("slack", rc.calib.slack);
  rc.calib.feature.dim = doc.value("feature_dim", rc.calib.feature.dim);
  rc.rows_per_input = doc.value("rows_per_input", rc.rows_per_input);
  rc.patch_side = doc.value("patch_side", rc.patch_side);
  rc.mode = doc.value("mode", rc.mode);
  if (doc.contains("estimator")) {
    const auto& est = doc["estimator"];
    rc.calib.estimator.hidden_width =
        est.value("hidden_width", rc.calib.estimator.hidden_width);
    rc.calib.estimator.epochs = est.value("epochs", rc.calib.estimator.epochs);
    rc.calib.estimator.step_size = est.value("step_size", rc.calib.estimator.step_size);
  }
  return rc;
}

int cmd_simulate_mp(int n, int p, double sigma2, std::uint64_t seed, const std::string& out) {
  const auto model = eshield::rmt::mp_bulk_edges(sigma2, static_cast<double>(p) / n);
  const Eigen::VectorXd evals =
      covariance_spectrum(gaussian_data(n, p, std::sqrt(sigma2), eshield::subseed(seed, 0)));
  const double emp_max = evals(evals.size() - 1);
  const double emp_min = evals(0);
  json report{{"kind", "mp"},
              {"config", {{"n", n}, {"p", p}, {"sigma2", sigma2}, {"seed", seed}}},
              {"predicted", {{"lambda_minus", model.lambda_minus}, {"lambda_plus", model.lambda_plus}}},
              {"empirical", {{"min", emp_min}, {"max", emp_max}}},
              {"relative_error",
               {{"upper", std::abs(emp_max - model.lambda_plus) / model.lambda_plus},
                {"lower", std::abs(emp_min - model.lambda_minus) / model.lambda_minus}}},
              {"histogram", histogram_json(evals, 50)}};
  emit_report(out, report);
  return 0;
}

int cmd_simulate_wigner(int p, double sigma, std::uint64_t seed, const std::string& out) {
  const Eigen::MatrixXd m =
      eshield::rmt::sample_wigner(p, sigma, eshield::subseed(seed, 0)) / std::sqrt(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  const Eigen::VectorXd evals = solver.eigenvalues();
  json report{{"kind", "wigner"},
              {"config", {{"p", p}, {"sigma", sigma}, {"seed", seed}}},
              {"predicted", {{"support", {-2.0 * sigma, 2.0 * sigma}}}},
              {"empirical",
               {{"min", evals(0)},
                {"max", evals(evals.size() - 1)},
                {"max_abs_over_edge",
                 std::max(std::abs(evals(0)), std::abs(evals(evals.size() - 1))) /
                     (2.0 * sigma)}}},
              {"histogram", histogram_json(evals, 50)}};
  emit_report(out, report);
  return 0;
}

int cmd_simulate_spike(double beta, double c, int n, double sigma2, std::uint64_t seed,
                       const std::string& out) {
  const int p = static_cast<int>(std::lround(c * n));
  if (p < 2) throw std::domain_error("spike: c * n must be at least 2");
  if (!(beta > 1.0)) throw std::domain_error("spike: beta must exceed 1");
  const auto pred = eshield::rmt::spiked_outlier_location(beta * sigma2, sigma2, c);
  // The sampler plants excess variance on top of the sigma2 I noise floor, so
  // an excess of (beta - 1) sigma2 puts the total population eigenvalue along
  // the planted direction at beta sigma2, the quantity the prediction uses.
  const auto data = eshield::rmt::sample_spiked_dataset(
      n, p, {(beta - 1.0) * sigma2}, sigma2, eshield::subseed(seed, 0));
  const Eigen::VectorXd evals = covariance_spectrum(data.data);
  const double emp_top = evals(evals.size() - 1);
  json report{{"kind", "spike"},
              {"config", {{"beta", beta}, {"c", c}, {"n", n}, {"p", p}, {"sigma2", sigma2}, {"seed", seed}}},
              {"predicted",
               {{"supercritical", pred.supercritical},
                {"location", pred.supercritical ? json(*pred.outlier_location) : json()}}},
              {"empirical", {{"top", emp_top}}},
              {"histogram", histogram_json(evals, 50)}};
  if (pred.supercritical) {
    report["relative_error"] = std::abs(emp_top - *pred.outlier_location) / *pred.outlier_location;
  }
  emit_report(out, report);
  return 0;
}

int cmd_calibrate(const std::string& data_path, const std::string& config_path,
                  const std::string& out_path) {
  CliRunConfig rc = load_run_config(config_path);
  const Eigen::MatrixXd data = eshield::io::load_matrix_any(data_path);
  if (rc.rows_per_input <= 0) {
    throw eshield::CorruptFileError("config must set rows_per_input > 0 for calibrate");
  }
  if (data.rows() % rc.rows_per_input != 0) {
    throw eshield::CorruptFileError("data rows not divisible by rows_per_input");
  }
  std::vector<eshield::spectral::SampleMatrix> inputs;
  for (Eigen::Index at = 0; at < data.rows(); at += rc.rows_per_input) {
    eshield::spectral::SampleMatrix input;
    input.data = data.middleRows(at, rc.rows_per_input);
    inputs.push_back(std::move(input));
  }
  const auto calib = eshield::defense::calibrate(inputs, rc.calib);
  eshield::defense::save_calibration(calib, out_path);
  std::cout << "tau_star " << calib.tau_star << "\n"
            << "t_hat " << calib.t_hat << "\n"
            << "outliers " << calib.directions.size() << "\n"
            << "causal " << calib.causal.size() << "\n";
  return 0;
}

int cmd_filter(const std::string& data_path, const std::string& calib_path,
               const std::string& out_path, const std::string& mode_name,
               const std::string& report_path) {
  const auto calib = eshield::defense::load_calibration(calib_path);
  eshield::spectral::SampleMatrix input;
  input.data = eshield::io::load_matrix_any(data_path);
  const auto mode = mode_name == "global" ? eshield::defense::FilterMode::global
                                          : eshield::defense::FilterMode::per_input;
  const auto [filtered, rep] = eshield::defense::filter_input(input, calib, mode, data_path);
  eshield::io::save_matrix(out_path, filtered.data);
  json report{{"input_id", rep.input_id},
              {"mode", mode_name},
              {"retained_rank", rep.retained_rank},
              {"eigenvalues_kept", rep.eigenvalues_kept},
              {"eigenvalues_dropped", rep.eigenvalues_dropped},
              {"passthrough", rep.passthrough},
              {"energy_retained", rep.energy_retained},
              {"tau_star", calib.tau_star}};
  emit_report(report_path, report);
  return 0;
}

int cmd_validate(const std::string& suite, std::uint64_t seed, const std::string& out) {
  std::vector<eshield::validate::CheckResult> results;
  if (suite == "rmt") {
    results = eshield::validate::run_rmt_suite(seed);
  } else if (suite == "rbns") {
    results = eshield::validate::run_rbns_suite(seed);
  } else {
    results = eshield::validate::run_all(seed);
  }
  json checks = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.details << ")\n";
    checks.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"margin", r.margin},
                      {"details", r.details}});
    all_pass = all_pass && r.passed;
  }
  emit_report(out, json{{"suite", suite}, {"seed", seed}, {"checks", checks}, {"all_passed", all_pass}});
  return all_pass ? 0 : 1;
}

int cmd_metrics_asr(const std::string& input_path, const std::string& out) {
  std::ifstream in(input_path);
  if (!in) throw eshield::CorruptFileError("cannot open " + input_path);
  eshield::metrics::IndicatorSet indicators;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line != "0" && line != "1") {
      throw eshield::CorruptFileError("indicator file must contain one 0/1 per line");
    }
    indicators.outcomes.push_back(line == "1" ? 1 : 0);
  }
  if (indicators.outcomes.empty()) throw eshield::CorruptFileError("empty indicator file");
  const double asr = eshield::metrics::attack_success_rate(indicators);
  std::cout << "ASR " << asr << " (fraction of " << indicators.outcomes.size() << ")\n";
  emit_report(out, json{{"metric", "asr"},
                        {"value", asr},
                        {"count", indicators.outcomes.size()},
                        {"input", input_path}});
  return 0;
}

int cmd_metrics_mi(const std::string& input_path, const std::string& out) {
  std::ifstream in(input_path);
  if (!in) throw eshield::CorruptFileError("cannot open " + input_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw eshield::CorruptFileError("joint table must be a CSV grid of probabilities");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw eshield::CorruptFileError("joint table has ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw eshield::CorruptFileError("empty joint table");
  eshield::metrics::JointTable table;
  table.probabilities.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  double mi = 0.0;
  try {
    mi = eshield::metrics::mutual_information(table);
  } catch (const std::invalid_argument& e) {
    throw eshield::CorruptFileError(e.what());
  }
  std::cout << "MI " << mi << " bits\n";
  emit_report(out, json{{"metric", "mutual_information"},
                        {"value_bits", mi},
                        {"entropy_x_bits", eshield::metrics::marginal_entropy_x(table)},
                        {"conditional_entropy_bits", eshield::metrics::conditional_entropy(table)},
                        {"input", input_path}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-matrix spectral filtering toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Spectral-law simulations");
  simulate->require_subcommand(1);
  int sim_n = 4000, sim_p = 1000;
  double sim_sigma2 = 1.0, sim_sigma = 1.0, sim_beta = 9.0, sim_c = 0.25;
  std::uint64_t sim_seed = 0;
  std::string sim_out;

  auto* sim_mp = simulate->add_subcommand("mp", "Sample-covariance bulk vs predicted edges");
  sim_mp->add_option("--n", sim_n, "observations")->required()->check(CLI::PositiveNumber);
  sim_mp->add_option("--p", sim_p, "dimensions")->required()->check(CLI::PositiveNumber);
  sim_mp->add_option("--sigma2", sim_sigma2, "noise variance")->check(CLI::PositiveNumber);
  sim_mp->add_option("--seed", sim_seed, "master seed");
  sim_mp->add_option("--out", sim_out, "report path (stdout if omitted)");

  auto* sim_wigner = simulate->add_subcommand("wigner", "Wigner spectrum vs semicircle support");
  sim_wigner->add_option("--p", sim_p, "dimension")->required()->check(CLI::PositiveNumber);
  sim_wigner->add_option("--sigma", sim_sigma, "entry stddev")->check(CLI::PositiveNumber);
  sim_wigner->add_option("--seed", sim_seed, "master seed");
  sim_wigner->add_option("--out", sim_out, "report path");

  auto* sim_spike = simulate->add_subcommand("spike", "Planted spike vs predicted outlier location");
  sim_spike->add_option("--beta", sim_beta, "spike-to-noise ratio")->required()->check(CLI::PositiveNumber);
  sim_spike->add_option("--c", sim_c, "aspect ratio p/n")->required()->check(CLI::PositiveNumber);
  sim_spike->add_option("--n", sim_n, "observations")->required()->check(CLI::PositiveNumber);
  sim_spike->add_option("--sigma2", sim_sigma2, "noise variance")->check(CLI::PositiveNumber);
  sim_spike->add_option("--seed", sim_seed, "master seed");
  sim_spike->add_option("--out", sim_out, "report path");

  // calibrate
  std::string cal_data, cal_config, cal_out;
  auto* calibrate = app.add_subcommand("calibrate", "Phase-1 threshold calibration");
  calibrate->add_option("--data", cal_data, "validation data (ESMX or CSV)")->required();
  calibrate->add_option("--config", cal_config, "run config JSON")->required();
  calibrate->add_option("--out", cal_out, "calibration artifact path")->required();

  // filter
  std::string fil_data, fil_calib, fil_out, fil_report;
  std::string fil_mode = "per_input";
  auto* filter = app.add_subcommand("filter", "Phase-2 causal-subspace filtering");
  filter->add_option("--data", fil_data, "input matrix (ESMX or CSV)")->required();
  filter->add_option("--calib", fil_calib, "calibration artifact")->required();
  filter->add_option("--out", fil_out, "filtered matrix path")->required();
  filter->add_option("--mode", fil_mode, "per_input or global")
      ->check(CLI::IsMember({"per_input", "global"}));
  filter->add_option("--report", fil_report, "filter report path (stdout if omitted)");

  // validate
  std::string val_suite = "all", val_out;
  std::uint64_t val_seed = 7;
  auto* validate = app.add_subcommand("validate", "Acceptance-check suites");
  validate->add_option("--suite", val_suite, "rmt, rbns, or all")
      ->check(CLI::IsMember({"rmt", "rbns", "all"}));
  validate->add_option("--seed", val_seed, "master seed");
  validate->add_option("--out", val_out, "summary JSON path");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Evaluation metrics");
  metrics->require_subcommand(1);
  std::string met_input, met_out;
  auto* met_asr = metrics->add_subcommand("asr", "Attack success rate over harm indicators");
  met_asr->add_option("--input", met_input, "indicator file, one 0/1 per line")->required();
  met_asr->add_option("--out", met_out, "report path");
  auto* met_mi = metrics->add_subcommand("mi", "Mutual information of a joint table");
  met_mi->add_option("--input", met_input, "CSV grid of probabilities")->required();
  met_mi->add_option("--out", met_out, "report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_mp->parsed()) return cmd_simulate_mp(sim_n, sim_p, sim_sigma2, sim_seed, sim_out);
    if (sim_wigner->parsed()) return cmd_simulate_wigner(sim_p, sim_sigma, sim_seed, sim_out);
    if (sim_spike->parsed())
      return cmd_simulate_spike(sim_beta, sim_c, sim_n, sim_sigma2, sim_seed, sim_out);
    if (calibrate->parsed()) return cmd_calibrate(cal_data, cal_config, cal_out);
    if (filter->parsed()) return cmd_filter(fil_data, fil_calib, fil_out, fil_mode, fil_report);
    if (validate->parsed()) return cmd_validate(val_suite, val_seed, val_out);
    if (met_asr->parsed()) return cmd_metrics_asr(met_input, met_out);
    if (met_mi->parsed()) return cmd_metrics_mi(met_input, met_out);
  } catch (const eshield::CalibrationError& e) {
    std::cerr << "calibration failure: " << e.what() << "\nspectrum:";
    for (double v : e.spectrum()) std::cerr << ' ' << v;
    std::cerr << "\n";
    return 3;
  } catch (const eshield::VersionMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const eshield::CorruptFileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
