// SPDX-License-Identifier: Apache-2.0
#pragma once

// Likelihood models for the call-duration feature. Every quantity is kept in
// log space; densities themselves are never formed.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "spitfilter/random.hpp"

namespace spitfilter {

/// H0 is SPIT, H1 is NON-SPIT.
enum class Hypothesis : std::uint8_t { Spit, NonSpit };

/// Two exponential duration densities, rate lambda0 for SPIT and lambda1 for
/// NON-SPIT (1/seconds). Rates must be positive and distinct (relative
/// tolerance 1e-12), otherwise the test could never terminate.
class ExponentialPair {
 public:
  ExponentialPair(double spit_rate, double nonspit_rate);

  double spit_rate() const noexcept { return spit_rate_; }
  double nonspit_rate() const noexcept { return nonspit_rate_; }
  double rate(Hypothesis h) const noexcept {
    return h == Hypothesis::Spit ? spit_rate_ : nonspit_rate_;
  }
  /// lambda1 / lambda0; the KL numbers depend on nothing else.
  double rate_ratio() const noexcept { return nonspit_rate_ / spit_rate_; }

  /// log p(x|NON-SPIT) - log p(x|SPIT) = log(lambda1/lambda0) + (lambda0 - lambda1) x.
  /// Throws RejectedInputError for negative or non-finite x.
  double log_likelihood_ratio(double x) const;

  /// Duration at which the ratio crosses zero.
  double break_even_duration() const noexcept;

  double sample(Hypothesis h, Rng& rng) const noexcept { return draw_exponential(rng, rate(h)); }

  friend bool operator==(const ExponentialPair&, const ExponentialPair&) = default;

 private:
  double spit_rate_;
  double nonspit_rate_;
  double log_rate_ratio_;
};

/// Kullback-Leibler information numbers, kappa0 = E_SPIT[log ratio] < 0 and
/// kappa1 = E_NON-SPIT[log ratio] > 0 (nats).
struct KlInfo {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
};

/// Monte Carlo estimate of the KL numbers together with standard errors.
struct KlEstimate {
  KlInfo kl;
  double se0 = 0.0;
  double se1 = 0.0;
  std::size_t n_samples = 0;
};

struct MlFit {
  double lambda_ml = 0.0;
  std::size_t n = 0;
  double mean = 0.0;
};

/// Maximum-likelihood exponential rate, n / sum(x). The sum is a plain
/// left-to-right fold. Throws FitError on empty input, invalid samples or a
/// zero sum.
MlFit fit_exponential_ml(std::span<const double> samples);

/// Surrogate exponential pair fitted from labeled durations.
struct SurrogateFit {
  ExponentialPair model;
  MlFit spit;
  MlFit nonspit;
  /// SPIT calls are expected to be shorter; set when the fitted NON-SPIT rate
  /// is not below the SPIT rate. The pair is still usable.
  bool role_inverted = false;
};

SurrogateFit build_surrogate_model(std::span<const double> spit_samples,
                                   std::span<const double> nonspit_samples);

/// Labeled duration pools. The log ratio is that of the fitted exponential
/// surrogate; sampling resamples the pools uniformly with replacement.
class EmpiricalPair {
 public:
  EmpiricalPair(std::vector<double> spit_samples, std::vector<double> nonspit_samples);

  std::span<const double> pool(Hypothesis h) const noexcept {
    return h == Hypothesis::Spit ? *spit_ : *nonspit_;
  }
  const SurrogateFit& surrogate() const noexcept { return fit_; }
  double log_likelihood_ratio(double x) const { return fit_.model.log_likelihood_ratio(x); }
  double sample(Hypothesis h, Rng& rng) const noexcept;

 private:
  std::shared_ptr<const std::vector<double>> spit_;
  std::shared_ptr<const std::vector<double>> nonspit_;
  SurrogateFit fit_;
};

/// Arbitrary pair given by its log ratio. Without a sampler it can be
/// evaluated but not simulated.
struct FunctionalPair {
  std::function<double(double)> log_ratio;
  std::function<double(Hypothesis, Rng&)> sampler;
};

using LikelihoodPair = std::variant<ExponentialPair, EmpiricalPair, FunctionalPair>;

double log_likelihood_ratio(const LikelihoodPair& model, double x);

/// Closed form: with r = lambda1/lambda0,
///   kappa0 = log r + 1 - r,   kappa1 = log r - 1 + 1/r.
KlInfo kl_numbers(const ExponentialPair& model) noexcept;

/// Sample-mean estimate of both KL numbers, n_samples draws per hypothesis
/// (n_samples >= 1000). Deterministic for a given seed.
KlEstimate kl_numbers_monte_carlo(const LikelihoodPair& model, std::size_t n_samples,
                                  std::uint64_t seed);

}  // namespace spitfilter
