#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "eshield/metrics.hpp"

using namespace eshield;

namespace {

metrics::JointTable table_2x2(double a, double b, double c, double d) {
  metrics::JointTable t;
  t.probabilities.resize(2, 2);
  t.probabilities << a, b, c, d;
  return t;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

}  // namespace

TEST_CASE("attack_success_rate") {
  CHECK(metrics::attack_success_rate({{1, 1, 1}}) == doctest::Approx(1.0));
  CHECK(metrics::attack_success_rate({{1, 0, 0, 1}}) == doctest::Approx(0.5));
  CHECK(metrics::attack_success_rate({{0, 0, 0, 0, 0}}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(metrics::attack_success_rate({{}}), std::invalid_argument);
  CHECK_THROWS_AS(metrics::attack_success_rate({{0, 2}}), std::invalid_argument);

  // Permutation invariance.
  std::vector<int> outcomes{1, 0, 1, 1, 0, 0, 0, 1, 1, 0};
  const double base = metrics::attack_success_rate({outcomes});
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(outcomes.begin(), outcomes.end(), rng);
    CHECK(metrics::attack_success_rate({outcomes}) == doctest::Approx(base));
  }
}

TEST_CASE("entropy pinned values") {
  CHECK(metrics::entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(metrics::entropy({1.0, 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(metrics::entropy({0.5, 0.25, 0.25}) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(metrics::entropy({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(metrics::entropy({1.5, -0.5}), std::invalid_argument);
}

TEST_CASE("entropy concavity on random mixtures") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(4), q(4);
    double sp = 0.0, sq = 0.0;
    for (int i = 0; i < 4; ++i) {
      p[i] = unif(rng) + 1e-3;
      q[i] = unif(rng) + 1e-3;
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 4; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const double lam = unif(rng);
    std::vector<double> mix(4);
    for (int i = 0; i < 4; ++i) mix[i] = lam * p[i] + (1.0 - lam) * q[i];
    CHECK(metrics::entropy(mix) >=
          lam * metrics::entropy(p) + (1.0 - lam) * metrics::entropy(q) - 1e-12);
  }
}

TEST_CASE("conditional_entropy pinned values") {
  // Independent: H(X|U) = H(X).
  const auto indep = table_2x2(0.35 * 0.6, 0.35 * 0.4, 0.65 * 0.6, 0.65 * 0.4);
  CHECK(metrics::conditional_entropy(indep) ==
        doctest::Approx(binary_entropy(0.35)).epsilon(1e-12));

  // Deterministic function of U: zero residual uncertainty.
  CHECK(metrics::conditional_entropy(table_2x2(0.3, 0.0, 0.0, 0.7)) ==
        doctest::Approx(0.0));

  // Hand computation: each column conditions X as (0.8, 0.2).
  CHECK(metrics::conditional_entropy(table_2x2(0.4, 0.1, 0.1, 0.4)) ==
        doctest::Approx(binary_entropy(0.8)).epsilon(1e-12));

  // Zero-marginal columns contribute nothing.
  metrics::JointTable padded;
  padded.probabilities.resize(2, 3);
  padded.probabilities << 0.4, 0.1, 0.0, 0.1, 0.4, 0.0;
  CHECK(metrics::conditional_entropy(padded) ==
        doctest::Approx(binary_entropy(0.8)).epsilon(1e-12));

  CHECK_THROWS_AS(metrics::conditional_entropy(table_2x2(0.5, 0.5, 0.5, -0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(metrics::conditional_entropy(table_2x2(0.5, 0.5, 0.5, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(metrics::conditional_entropy(metrics::JointTable{}),
                  std::invalid_argument);
}

TEST_CASE("mutual_information pinned values and identities") {
  const auto indep = table_2x2(0.25, 0.25, 0.25, 0.25);
  CHECK(std::abs(metrics::mutual_information(indep)) < 1e-12);

  const auto correlated = table_2x2(0.5, 0.0, 0.0, 0.5);
  CHECK(metrics::mutual_information(correlated) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    metrics::JointTable t;
    t.probabilities.resize(3, 3);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        t.probabilities(i, j) = unif(rng) + 1e-4;
        sum += t.probabilities(i, j);
      }
    t.probabilities /= sum;
    // Renormalize exactly enough for the 1e-12 gate.
    t.probabilities /= t.probabilities.sum();
    const double mi = metrics::mutual_information(t);
    const double hx = metrics::marginal_entropy_x(t);
    const double hxu = metrics::conditional_entropy(t);
    CHECK(mi >= -1e-12);
    CHECK(mi == doctest::Approx(hx - hxu));
    // I > 0 exactly when conditioning lowers the entropy.
    CHECK((mi > 1e-12) == (hxu < hx - 1e-12));
  }
}
