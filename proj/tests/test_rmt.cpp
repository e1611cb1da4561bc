#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "eshield/common.hpp"
#include "eshield/quadrature.hpp"
#include "eshield/rmt.hpp"

using namespace eshield;

namespace {

std::vector<double> covariance_spectrum_desc(const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd cov =
      (data.transpose() * data) / static_cast<double>(data.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  REQUIRE(solver.info() == Eigen::Success);
  std::vector<double> out(solver.eigenvalues().size());
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    out[i] = solver.eigenvalues()(solver.eigenvalues().size() - 1 - i);
  }
  return out;
}

}  // namespace

TEST_CASE("wigner_pdf pinned values") {
  CHECK(rmt::wigner_pdf(0.0, 1.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-12));
  CHECK(rmt::wigner_pdf(2.5, 1.0) == 0.0);
  CHECK(rmt::wigner_pdf(-2.0, 1.0) == 0.0);
  CHECK(rmt::wigner_pdf(1.0, 1.0) ==
        doctest::Approx(std::sqrt(3.0) / (2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK_THROWS_AS(rmt::wigner_pdf(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(rmt::wigner_pdf(0.0, -1.0), std::domain_error);
}

TEST_CASE("mp_bulk_edges pinned values and identities") {
  const auto a = rmt::mp_bulk_edges(1.0, 0.25);
  CHECK(a.lambda_minus == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(a.lambda_plus == doctest::Approx(2.25).epsilon(1e-12));

  const auto b = rmt::mp_bulk_edges(1.0, 1.0);
  CHECK(b.lambda_minus == doctest::Approx(0.0));
  CHECK(b.lambda_plus == doctest::Approx(4.0));

  const auto c = rmt::mp_bulk_edges(2.0, 0.25);
  CHECK(c.lambda_minus == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.lambda_plus == doctest::Approx(4.5).epsilon(1e-12));

  // lambda+ * lambda- = sigma^4 (1-c)^2 and lambda+ + lambda- = 2 sigma^2 (1+c).
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.05, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double s2 = unif(rng);
    const double ratio = unif(rng);
    const auto m = rmt::mp_bulk_edges(s2, ratio);
    CHECK(m.lambda_plus * m.lambda_minus ==
          doctest::Approx(s2 * s2 * (1.0 - ratio) * (1.0 - ratio)).epsilon(1e-10));
    CHECK(m.lambda_plus + m.lambda_minus ==
          doctest::Approx(2.0 * s2 * (1.0 + ratio)).epsilon(1e-10));
  }

  CHECK_THROWS_AS(rmt::mp_bulk_edges(0.0, 0.25), std::domain_error);
  CHECK_THROWS_AS(rmt::mp_bulk_edges(1.0, 0.0), std::domain_error);
}

TEST_CASE("mp_pdf support, normalization, and bulk density") {
  const auto model = rmt::mp_bulk_edges(1.0, 0.25);
  CHECK(rmt::mp_pdf(model.lambda_minus - 0.01, model) == 0.0);
  CHECK(rmt::mp_pdf(model.lambda_plus + 0.01, model) == 0.0);
  CHECK(rmt::mp_pdf(model.lambda_minus, model) == 0.0);
  CHECK(rmt::mp_pdf(model.lambda_plus, model) == 0.0);

  const double mass = adaptive_simpson([&](double x) { return rmt::mp_pdf(x, model); },
                                       model.lambda_minus, model.lambda_plus, 1e-10);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  // Density at lambda = 1 against a Monte-Carlo eigenvalue histogram.
  const int n = 4000, p = 1000;
  std::mt19937_64 rng(subseed(5, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = gauss(rng);
  const auto evals = covariance_spectrum_desc(x);
  const double half_width = 0.05;
  int in_bin = 0;
  for (double v : evals) {
    if (std::abs(v - 1.0) <= half_width) ++in_bin;
  }
  const double empirical = in_bin / (2.0 * half_width * p);
  CHECK(std::abs(empirical - rmt::mp_pdf(1.0, model)) / rmt::mp_pdf(1.0, model) < 0.05);
}

TEST_CASE("mp_median brackets and scales") {
  const double med = rmt::mp_median(0.25);
  const auto model = rmt::mp_bulk_edges(1.0, 0.25);
  CHECK(med > model.lambda_minus);
  CHECK(med < model.lambda_plus);
  // CDF at the reported median is 1/2.
  const double cdf = adaptive_simpson([&](double x) { return rmt::mp_pdf(x, model); },
                                      model.lambda_minus, med, 1e-10);
  CHECK(cdf == doctest::Approx(0.5).epsilon(1e-7));
  CHECK_THROWS_AS(rmt::mp_median(0.0), std::domain_error);
  CHECK_THROWS_AS(rmt::mp_median(2.0), std::domain_error);
}

TEST_CASE("estimate_noise_variance on pure noise and spiked spectra") {
  const int n = 2000, p = 500;
  const double c = static_cast<double>(p) / n;
  const auto noise = rmt::sample_spiked_dataset(n, p, {}, 1.0, subseed(21, 0));
  const auto eigs = covariance_spectrum_desc(noise.data);
  const double s2 = rmt::estimate_noise_variance(eigs, c);
  CHECK(s2 > 0.95);
  CHECK(s2 < 1.05);

  // Exact scale equivariance: multiply every eigenvalue by 4.
  std::vector<double> scaled = eigs;
  for (double& v : scaled) v *= 4.0;
  CHECK(rmt::estimate_noise_variance(scaled, c) == doctest::Approx(4.0 * s2).epsilon(1e-12));

  // A handful of spikes barely moves the median-based estimate.
  const auto spiked = rmt::sample_spiked_dataset(n, p, {15.0, 8.0, 3.0}, 1.0, subseed(21, 1));
  const double s2_spiked =
      rmt::estimate_noise_variance(covariance_spectrum_desc(spiked.data), c);
  CHECK(std::abs(s2_spiked - 1.0) < 0.06);

  CHECK_THROWS_AS(rmt::estimate_noise_variance({}, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(rmt::estimate_noise_variance({0.0, 0.0, 0.0}, 0.25), std::invalid_argument);
}

TEST_CASE("spiked_outlier_location pinned values and limits") {
  const auto super = rmt::spiked_outlier_location(9.0, 1.0, 0.25);
  CHECK(super.supercritical);
  REQUIRE(super.outlier_location.has_value());
  CHECK(*super.outlier_location == doctest::Approx(9.28125).epsilon(1e-12));

  const auto sub = rmt::spiked_outlier_location(2.0, 1.0, 0.25);
  CHECK_FALSE(sub.supercritical);
  CHECK_FALSE(sub.outlier_location.has_value());

  CHECK_THROWS_AS(rmt::spiked_outlier_location(-1.0, 1.0, 0.25), std::domain_error);
  CHECK_THROWS_AS(rmt::spiked_outlier_location(9.0, 0.0, 0.25), std::domain_error);

  // Strictly increasing in lambda' on the supercritical region.
  double prev = 0.0;
  bool first = true;
  for (double beta = 2.3; beta < 12.0; beta += 0.1) {
    const auto pred = rmt::spiked_outlier_location(beta, 1.0, 0.25);
    REQUIRE(pred.supercritical);
    if (!first) CHECK(*pred.outlier_location > prev);
    prev = *pred.outlier_location;
    first = false;
  }

  // The location formula beta + c beta / (beta - 1) meets lambda+ at its
  // detachment point beta = 1 + sqrt(c). (The supercritical gate itself sits
  // higher, so evaluate the formula directly.)
  const double c = 0.25;
  const double beta_edge = 1.0 + std::sqrt(c) + 1e-8;
  const double loc = beta_edge + c * beta_edge / (beta_edge - 1.0);
  const double lambda_plus = rmt::mp_bulk_edges(1.0, c).lambda_plus;
  CHECK(std::abs(loc - lambda_plus) < 1e-6);
}

TEST_CASE("detect_outliers prefix semantics") {
  const auto model = rmt::mp_bulk_edges(1.0, 0.25);
  const std::vector<double> eigs{9.3, 2.1, 1.0, 0.5};
  CHECK(rmt::detect_outliers(eigs, model, 0.01) == std::vector<int>{0});
  CHECK(rmt::detect_outliers({2.2, 1.4, 0.6}, model, 0.01).empty());
  CHECK_THROWS_AS(rmt::detect_outliers({1.0, 2.0}, model, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(rmt::detect_outliers(eigs, model, -0.1), std::domain_error);
}

TEST_CASE("detect_outliers recovers three planted spikes" * doctest::timeout(300)) {
  // Total population eigenvalues 16, 9, 4 at c = 1/4 (excess spikes 15, 8, 3).
  const int n = 2000, p = 500;
  const double c = static_cast<double>(p) / n;
  int exact = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto data = rmt::sample_spiked_dataset(n, p, {15.0, 8.0, 3.0}, 1.0, subseed(31, s));
    const auto eigs = covariance_spectrum_desc(data.data);
    const double s2 = rmt::estimate_noise_variance(eigs, c);
    const auto found = rmt::detect_outliers(eigs, rmt::mp_bulk_edges(s2, c), 0.01);
    if (found == std::vector<int>{0, 1, 2}) ++exact;
  }
  CHECK(exact >= 19);
}

TEST_CASE("rmt_loss pinned values and brute-force agreement") {
  {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3);
    rmt::RmtFit fit;
    fit.basis = Eigen::MatrixXd::Zero(3, 1);
    fit.basis(0, 0) = 1.0;
    fit.signal_eigs = Eigen::VectorXd::Zero(1);
    fit.sigma2 = 1.0;
    CHECK(rmt::rmt_loss(cov, fit) == doctest::Approx(0.0).epsilon(1e-14));
  }
  {
    Eigen::VectorXd d(4);
    d << 5.0, 1.0, 1.0, 1.0;
    const Eigen::MatrixXd cov = d.asDiagonal();
    rmt::RmtFit fit;
    fit.basis = Eigen::MatrixXd::Zero(4, 1);
    fit.basis(0, 0) = 1.0;
    fit.signal_eigs = Eigen::VectorXd::Constant(1, 4.0);
    fit.sigma2 = 1.0;
    CHECK(rmt::rmt_loss(cov, fit) == doctest::Approx(0.0).epsilon(1e-14));
  }
  {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd a(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = gauss(rng);
    const Eigen::MatrixXd cov = 0.5 * (a + a.transpose());
    rmt::RmtFit fit;
    Eigen::MatrixXd g(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) g(i, j) = gauss(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    fit.basis = qr.householderQ() * Eigen::MatrixXd::Identity(4, 2);
    fit.signal_eigs = Eigen::VectorXd::Zero(2);
    fit.signal_eigs << 1.3, 0.2;
    fit.sigma2 = 0.7;
    Eigen::MatrixXd model =
        fit.basis * fit.signal_eigs.asDiagonal() * fit.basis.transpose();
    model.diagonal().array() += fit.sigma2;
    double brute = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double r = cov(i, j) - model(i, j);
        brute += r * r;
      }
    CHECK(rmt::rmt_loss(cov, fit) == doctest::Approx(brute).epsilon(1e-12));
  }
  // Shape errors.
  rmt::RmtFit bad;
  bad.basis = Eigen::MatrixXd::Zero(3, 1);
  bad.signal_eigs = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(rmt::rmt_loss(Eigen::MatrixXd::Identity(3, 3), bad), std::invalid_argument);
}

TEST_CASE("fit_rmt_decomposition closed form and oracle optimality") {
  {
    Eigen::VectorXd d(4);
    d << 5.0, 1.0, 1.0, 1.0;
    const auto fit = rmt::fit_rmt_decomposition(d.asDiagonal(), 1);
    CHECK(fit.signal_eigs(0) == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(fit.sigma2 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit.loss == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(std::abs(fit.basis(0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_FALSE(fit.negative_signal);
  }
  {
    // Pure isotropic covariance: nothing left for the signal part.
    const auto fit = rmt::fit_rmt_decomposition(2.0 * Eigen::MatrixXd::Identity(5, 5), 1);
    CHECK(fit.sigma2 == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.signal_eigs(0) == doctest::Approx(0.0).epsilon(1e-10));
  }
  CHECK_THROWS_AS(rmt::fit_rmt_decomposition(Eigen::MatrixXd::Identity(4, 4), 4),
                  std::domain_error);
  CHECK_THROWS_AS(rmt::fit_rmt_decomposition(Eigen::MatrixXd::Identity(4, 4), 0),
                  std::domain_error);

  // Randomized oracle sweep: the closed form is never beaten by random
  // orthonormal candidates on spiked sample covariances.
  std::mt19937_64 rng(43);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 3.0);
  for (int inst = 0; inst < 10; ++inst) {
    const auto data = rmt::sample_spiked_dataset(40, 4, {4.0}, 1.0, subseed(47, inst));
    const Eigen::MatrixXd cov =
        (data.data.transpose() * data.data) / static_cast<double>(data.data.rows());
    const auto fit = rmt::fit_rmt_decomposition(cov, 1);
    for (int cand = 0; cand < 200; ++cand) {
      Eigen::VectorXd g(4);
      for (int i = 0; i < 4; ++i) g(i) = gauss(rng);
      rmt::RmtFit alt;
      alt.basis = g.normalized();
      alt.signal_eigs = Eigen::VectorXd::Constant(1, unif(rng));
      alt.sigma2 = unif(rng);
      CHECK(fit.loss <= rmt::rmt_loss(cov, alt) + 1e-12);
    }
  }
}

TEST_CASE("sample_wigner determinism and confinement") {
  const auto a = rmt::sample_wigner(64, 1.0, 99);
  const auto b = rmt::sample_wigner(64, 1.0, 99);
  CHECK(a == b);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(rmt::sample_wigner(1, 1.0, 0), std::domain_error);
  CHECK_THROWS_AS(rmt::sample_wigner(8, 0.0, 0), std::domain_error);

  const int p = 1000;
  const Eigen::MatrixXd m = rmt::sample_wigner(p, 1.0, subseed(51, 0)) / std::sqrt(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  REQUIRE(solver.info() == Eigen::Success);
  const double extreme =
      std::max(std::abs(solver.eigenvalues()(0)), std::abs(solver.eigenvalues()(p - 1)));
  CHECK(extreme <= 2.0 * 1.05);
}

TEST_CASE("sample_wigner empirical density matches the semicircle law" *
          doctest::timeout(300)) {
  const int p = 2000;
  const Eigen::MatrixXd m = rmt::sample_wigner(p, 1.0, subseed(53, 0)) / std::sqrt(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  REQUIRE(solver.info() == Eigen::Success);

  const int bins = 40;
  const double lo = -2.0, hi = 2.0;
  const double width = (hi - lo) / bins;
  std::vector<double> hist(bins, 0.0);
  for (Eigen::Index i = 0; i < p; ++i) {
    const int b = std::clamp(static_cast<int>((solver.eigenvalues()(i) - lo) / width), 0,
                             bins - 1);
    hist[b] += 1.0 / (p * width);
  }
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double mid = lo + (b + 0.5) * width;
    l1 += std::abs(hist[b] - rmt::wigner_pdf(mid, 1.0)) * width;
  }
  CHECK(l1 < 0.05);
}

TEST_CASE("sample_spiked_dataset determinism, support, alignment") {
  const auto a = rmt::sample_spiked_dataset(50, 8, {3.0}, 1.0, 17);
  const auto b = rmt::sample_spiked_dataset(50, 8, {3.0}, 1.0, 17);
  CHECK(a.data == b.data);
  CHECK(a.directions == b.directions);
  CHECK_THROWS_AS(rmt::sample_spiked_dataset(10, 2, {1.0, 2.0}, 1.0, 0), std::domain_error);
  CHECK_THROWS_AS(rmt::sample_spiked_dataset(10, 4, {-1.0}, 1.0, 0), std::domain_error);
  CHECK_THROWS_AS(rmt::sample_spiked_dataset(10, 4, {1.0}, 0.0, 0), std::domain_error);

  // Zero spikes: sample-covariance spectrum stays within MP support + 5%.
  const int n = 2000, p = 500;
  const auto noise = rmt::sample_spiked_dataset(n, p, {}, 1.0, subseed(61, 0));
  const auto eigs = covariance_spectrum_desc(noise.data);
  const auto model = rmt::mp_bulk_edges(1.0, static_cast<double>(p) / n);
  CHECK(eigs.front() <= model.lambda_plus * 1.05);
  CHECK(eigs.back() >= model.lambda_minus * 0.95);

  // Supercritical spike: top sample eigenvector aligns with the planted one.
  const auto spiked = rmt::sample_spiked_dataset(1600, 400, {8.0}, 1.0, subseed(61, 1));
  const Eigen::MatrixXd cov =
      (spiked.data.transpose() * spiked.data) / static_cast<double>(spiked.data.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  REQUIRE(solver.info() == Eigen::Success);
  const Eigen::VectorXd top = solver.eigenvectors().col(399);
  CHECK(std::abs(top.dot(spiked.directions.col(0))) > 0.9);
}

TEST_CASE("semicircle_moment pinned values and trace matching" * doctest::timeout(300)) {
  CHECK(rmt::semicircle_moment(2, 1.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(rmt::semicircle_moment(4, 1.0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(rmt::semicircle_moment(3, 1.0) == 0.0);
  CHECK(rmt::semicircle_moment(0, 1.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(rmt::semicircle_moment(-2, 1.0), std::domain_error);
  CHECK_THROWS_AS(rmt::semicircle_moment(2, 0.0), std::domain_error);

  const int p = 2000;
  const Eigen::MatrixXd m = rmt::sample_wigner(p, 1.0, subseed(67, 0)) / std::sqrt(p);
  const Eigen::MatrixXd m2 = m * m;
  const double tr2 = m2.trace() / p;
  const double tr4 = m2.squaredNorm() / p;
  CHECK(std::abs(tr2 - rmt::semicircle_moment(2, 1.0)) / rmt::semicircle_moment(2, 1.0) <
        0.05);
  CHECK(std::abs(tr4 - rmt::semicircle_moment(4, 1.0)) / rmt::semicircle_moment(4, 1.0) <
        0.05);
}
