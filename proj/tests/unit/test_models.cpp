// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "spitfilter/error.hpp"
#include "spitfilter/models.hpp"

namespace spitfilter {
namespace {

TEST(ExponentialPair, RejectsInvalidRates) {
  EXPECT_THROW(ExponentialPair(0.0, 1.0), ModelError);
  EXPECT_THROW(ExponentialPair(1.0, -2.0), ModelError);
  EXPECT_THROW(ExponentialPair(NAN, 1.0), ModelError);
  EXPECT_THROW(ExponentialPair(1.0, INFINITY), ModelError);
}

TEST(ExponentialPair, RejectsEqualRatesWithinRelativeTolerance) {
  EXPECT_THROW(ExponentialPair(1.0, 1.0), ModelError);
  EXPECT_THROW(ExponentialPair(1.0, 1.0 - 1e-13), ModelError);
  EXPECT_THROW(ExponentialPair(3e5, 3e5 * (1.0 + 5e-13)), ModelError);
  EXPECT_NO_THROW(ExponentialPair(1.0, 1.0 - 1e-11));
}

TEST(LogLikelihoodRatio, ClosedFormValues) {
  const ExponentialPair m(1.0, 0.1);
  EXPECT_NEAR(m.log_likelihood_ratio(0.0), -2.302585092994046, 1e-15);
  // Break-even duration log(10)/0.9.
  EXPECT_NEAR(m.break_even_duration(), 2.558427881104495, 1e-12);
  EXPECT_NEAR(m.log_likelihood_ratio(2.558), -0.000385092994046, 1e-12);
  EXPECT_NEAR(m.log_likelihood_ratio(m.break_even_duration()), 0.0, 1e-15);
}

TEST(LogLikelihoodRatio, RejectsNegativeAndNonFiniteDurations) {
  const ExponentialPair m(1.0, 0.1);
  EXPECT_THROW(m.log_likelihood_ratio(-1e-9), RejectedInputError);
  EXPECT_THROW(m.log_likelihood_ratio(NAN), RejectedInputError);
  EXPECT_THROW(m.log_likelihood_ratio(INFINITY), RejectedInputError);
  EXPECT_NO_THROW(m.log_likelihood_ratio(0.0));
}

TEST(LogLikelihoodRatio, MonotoneWithSlopeRateDifference) {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const double l0 = 0.01 + 10.0 * uniform_open_closed(rng);
    const double l1 = 0.01 + 10.0 * uniform_open_closed(rng);
    const ExponentialPair m(l0, l1);
    const double x = 50.0 * uniform_open_closed(rng);
    const double dx = 0.5 + uniform_open_closed(rng);
    const double slope = (m.log_likelihood_ratio(x + dx) - m.log_likelihood_ratio(x)) / dx;
    EXPECT_NEAR(slope, l0 - l1, 1e-9 * (1.0 + std::abs(l0 - l1)) + 1e-9 * std::abs(m.log_likelihood_ratio(x)));
    if (l0 > l1) {
      EXPECT_GT(m.log_likelihood_ratio(x + dx), m.log_likelihood_ratio(x));
    }
  }
}

TEST(KlNumbers, TableOneRowsAndRatioOnlyDependence) {
  const KlInfo a = kl_numbers(ExponentialPair(1.0, 0.1));
  EXPECT_NEAR(a.kappa0, -1.40258, 1e-5);
  EXPECT_NEAR(a.kappa1, 6.69741, 1e-5);
  const KlInfo b = kl_numbers(ExponentialPair(1.0, 0.99));
  EXPECT_NEAR(b.kappa0, -0.00005, 1e-5);
  EXPECT_NEAR(b.kappa1, 0.00005, 1e-5);
  const KlInfo c = kl_numbers(ExponentialPair(2.0, 0.2));
  EXPECT_EQ(a.kappa0, c.kappa0);
  EXPECT_EQ(a.kappa1, c.kappa1);
}

TEST(KlNumbers, AgreeWithQuadratureOracle) {
  for (auto [l0, l1] : {std::pair{1.0, 0.1}, std::pair{2.5, 0.75}, std::pair{1.0, 0.99},
                        std::pair{0.2, 0.9}}) {
    const KlInfo kl = kl_numbers(ExponentialPair(l0, l1));
    const double q0 = oracle::quadrature_kl(l0, l1, l0);
    const double q1 = oracle::quadrature_kl(l0, l1, l1);
    EXPECT_NEAR(kl.kappa0, q0, 1e-5 * std::max(1.0, std::abs(q0))) << l0 << "/" << l1;
    EXPECT_NEAR(kl.kappa1, q1, 1e-5 * std::max(1.0, std::abs(q1))) << l0 << "/" << l1;
  }
  // Frozen high-precision values.
  const KlInfo kl = kl_numbers(ExponentialPair(2.5, 0.75));
  EXPECT_NEAR(kl.kappa0, -0.503972804325936, 1e-14);
  EXPECT_NEAR(kl.kappa1, 1.129360529007397, 1e-14);
}

TEST(KlNumbers, ScaleInvarianceAndSignProperty) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    // Ratios kept away from 1 so that the rounding of c*lambda itself stays
    // below the 1e-12 relative budget.
    double r = 0.01 + 0.98 * uniform_open_closed(rng);
    if (i % 2) r = 1.0 / r;
    const double l0 = std::exp(-5.0 + 10.0 * uniform_open_closed(rng));
    const double c = std::exp(-8.0 + 16.0 * uniform_open_closed(rng));
    const KlInfo a = kl_numbers(ExponentialPair(l0, r * l0));
    const KlInfo b = kl_numbers(ExponentialPair(c * l0, c * (r * l0)));
    EXPECT_LT(a.kappa0, 0.0);
    EXPECT_GT(a.kappa1, 0.0);
    EXPECT_LT(std::abs(a.kappa0 - b.kappa0), 1e-12 * std::abs(a.kappa0));
    EXPECT_LT(std::abs(a.kappa1 - b.kappa1), 1e-12 * std::abs(a.kappa1));
  }
  // Sign property at the construction tolerance boundary.
  const KlInfo near = kl_numbers(ExponentialPair(1.0, 1.0 - 2e-12));
  EXPECT_LT(near.kappa0, 0.0);
  EXPECT_GT(near.kappa1, 0.0);
}

TEST(KlMonteCarlo, ExponentialPairWithinThreeStandardErrors) {
  const ExponentialPair m(1.0, 0.1);
  const KlEstimate est = kl_numbers_monte_carlo(m, 1'000'000, 42);
  const KlInfo exact = kl_numbers(m);
  EXPECT_NEAR(est.kl.kappa0, -1.40258, 3.0 * est.se0 + 1e-5);
  EXPECT_LE(std::abs(est.kl.kappa0 - exact.kappa0), 3.0 * est.se0);
  EXPECT_LE(std::abs(est.kl.kappa1 - exact.kappa1), 3.0 * est.se1);
  EXPECT_GT(est.se0, 0.0);
}

TEST(KlMonteCarlo, DeterministicForSeed) {
  const LikelihoodPair m = ExponentialPair(1.0, 0.3);
  const KlEstimate a = kl_numbers_monte_carlo(m, 5000, 9);
  const KlEstimate b = kl_numbers_monte_carlo(m, 5000, 9);
  EXPECT_EQ(a.kl.kappa0, b.kl.kappa0);
  EXPECT_EQ(a.kl.kappa1, b.kl.kappa1);
  const KlEstimate c = kl_numbers_monte_carlo(m, 5000, 10);
  EXPECT_NE(a.kl.kappa0, c.kl.kappa0);
}

TEST(KlMonteCarlo, NearEqualPairStraddlesZero) {
  const ExponentialPair m(1.0, 1.0 - 2e-12);
  const KlEstimate est = kl_numbers_monte_carlo(m, 100'000, 3);
  EXPECT_LE(std::abs(est.kl.kappa0), 3.0 * est.se0 + 1e-20);
  EXPECT_LE(std::abs(est.kl.kappa1), 3.0 * est.se1 + 1e-20);
}

TEST(KlMonteCarlo, EmpiricalPairMatchesSurrogateClosedForm) {
  Rng rng(5);
  std::vector<double> spit(100'000), nonspit(100'000);
  for (auto& x : spit) x = draw_exponential(rng, 1.0);
  for (auto& x : nonspit) x = draw_exponential(rng, 0.1);
  const EmpiricalPair pair(spit, nonspit);
  const KlEstimate est = kl_numbers_monte_carlo(pair, 1'000'000, 8);
  const KlInfo surrogate = kl_numbers(pair.surrogate().model);
  EXPECT_LE(std::abs(est.kl.kappa0 - surrogate.kappa0), 3.0 * est.se0);
  EXPECT_LE(std::abs(est.kl.kappa1 - surrogate.kappa1), 3.0 * est.se1);
  // And close to the generating laws.
  EXPECT_NEAR(est.kl.kappa0, -1.40258, 0.02 * 1.40258);
  EXPECT_NEAR(est.kl.kappa1, 6.69741, 0.02 * 6.69741);
}

TEST(KlMonteCarlo, Preconditions) {
  EXPECT_THROW(kl_numbers_monte_carlo(ExponentialPair(1.0, 0.5), 999, 1), ParameterError);
  const FunctionalPair evaluate_only{[](double x) { return x - 1.0; }, {}};
  EXPECT_THROW(kl_numbers_monte_carlo(evaluate_only, 1000, 1), UnsupportedModelError);
  EXPECT_DOUBLE_EQ(log_likelihood_ratio(LikelihoodPair{evaluate_only}, 3.0), 2.0);
}

TEST(KlMonteCarlo, FunctionalPairWithSampler) {
  // Exponential pair expressed through callbacks only.
  const FunctionalPair f{
      [](double x) { return std::log(0.5) + 0.5 * x; },
      [](Hypothesis h, Rng& rng) { return draw_exponential(rng, h == Hypothesis::Spit ? 1.0 : 0.5); }};
  const KlEstimate est = kl_numbers_monte_carlo(f, 200'000, 4);
  const KlInfo exact = kl_numbers(ExponentialPair(1.0, 0.5));
  EXPECT_LE(std::abs(est.kl.kappa0 - exact.kappa0), 3.0 * est.se0);
  EXPECT_LE(std::abs(est.kl.kappa1 - exact.kappa1), 3.0 * est.se1);
}

TEST(FitExponentialMl, FormulaAndEdgeCases) {
  const std::vector<double> xs{1, 2, 3, 2};
  const MlFit fit = fit_exponential_ml(xs);
  EXPECT_EQ(fit.lambda_ml, 0.5);
  EXPECT_EQ(fit.n, 4u);
  EXPECT_EQ(fit.mean, 2.0);
  for (double c : {0.5, 3.0, 129.64}) {
    const std::vector<double> same(17, c);
    EXPECT_NEAR(fit_exponential_ml(same).lambda_ml, 1.0 / c, 1e-15 / c);
  }
  EXPECT_THROW(fit_exponential_ml(std::vector<double>{}), FitError);
  EXPECT_THROW(fit_exponential_ml(std::vector<double>{0.0, 0.0}), FitError);
  EXPECT_THROW(fit_exponential_ml(std::vector<double>{1.0, -1.0}), FitError);
  EXPECT_THROW(fit_exponential_ml(std::vector<double>{1.0, NAN}), FitError);
  EXPECT_NO_THROW(fit_exponential_ml(std::vector<double>{0.0, 4.0}));
}

TEST(FitExponentialMl, ConsistentOnLargeSample) {
  Rng rng(2024);
  const double rate = 1.0 / 30.23;
  std::vector<double> xs(1'000'000);
  for (auto& x : xs) x = draw_exponential(rng, rate);
  const MlFit fit = fit_exponential_ml(xs);
  EXPECT_LT(std::abs(fit.lambda_ml - rate) / rate, 0.01);
  const double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  EXPECT_EQ(fit.lambda_ml, static_cast<double>(xs.size()) / sum);
}

TEST(BuildSurrogateModel, FitsBothClasses) {
  const auto fit = build_surrogate_model(std::vector<double>{10.0}, std::vector<double>{100.0});
  EXPECT_DOUBLE_EQ(fit.model.spit_rate(), 0.1);
  EXPECT_DOUBLE_EQ(fit.model.nonspit_rate(), 0.01);
  EXPECT_FALSE(fit.role_inverted);

  const std::vector<double> spit{20.23, 40.23}, nonspit{100.0, 159.28};
  const auto means = build_surrogate_model(spit, nonspit);
  EXPECT_NEAR(means.model.spit_rate(), 0.03308, 1e-5);
  EXPECT_NEAR(means.model.nonspit_rate(), 0.007714, 1e-6);

  const std::vector<double> same{5.0, 7.0};
  EXPECT_THROW(build_surrogate_model(same, same), ModelError);
  EXPECT_THROW(build_surrogate_model(std::vector<double>{}, same), FitError);

  const auto inverted = build_surrogate_model(std::vector<double>{100.0}, std::vector<double>{10.0});
  EXPECT_TRUE(inverted.role_inverted);
}

}  // namespace
}  // namespace spitfilter
