// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "spitfilter/error.hpp"

namespace spitfilter {

namespace {

constexpr double kEqualRateTolerance = 1e-12;

void check_rate(double rate, const char* name) {
  if (!std::isfinite(rate) || rate <= 0.0) {
    std::ostringstream msg;
    msg << name << " must be a finite positive rate, got " << rate;
    throw ModelError(msg.str());
  }
}

void check_duration(double x) {
  if (!std::isfinite(x) || x < 0.0) {
    std::ostringstream msg;
    msg << "duration must be finite and >= 0, got " << x;
    throw RejectedInputError(msg.str());
  }
}

// Running mean/variance (Welford).
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) noexcept {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  double standard_error() const noexcept {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

}  // namespace

ExponentialPair::ExponentialPair(double spit_rate, double nonspit_rate)
    : spit_rate_(spit_rate), nonspit_rate_(nonspit_rate) {
  check_rate(spit_rate, "lambda0 (SPIT)");
  check_rate(nonspit_rate, "lambda1 (NON-SPIT)");
  if (std::abs(spit_rate - nonspit_rate) <=
      kEqualRateTolerance * std::max(spit_rate, nonspit_rate)) {
    std::ostringstream msg;
    msg << "SPIT and NON-SPIT rates are equal (" << spit_rate << " vs " << nonspit_rate
        << "); the test cannot discriminate";
    throw ModelError(msg.str());
  }
  log_rate_ratio_ = std::log(nonspit_rate_ / spit_rate_);
}

double ExponentialPair::log_likelihood_ratio(double x) const {
  check_duration(x);
  return log_rate_ratio_ + (spit_rate_ - nonspit_rate_) * x;
}

double ExponentialPair::break_even_duration() const noexcept {
  return -log_rate_ratio_ / (spit_rate_ - nonspit_rate_);
}

MlFit fit_exponential_ml(std::span<const double> samples) {
  if (samples.empty()) throw FitError("cannot fit an exponential rate to an empty sample");
  for (double x : samples) {
    if (!std::isfinite(x) || x < 0.0) {
      std::ostringstream msg;
      msg << "cannot fit: sample " << x << " is not a finite non-negative duration";
      throw FitError(msg.str());
    }
  }
  const double sum = std::accumulate(samples.begin(), samples.end(), 0.0);
  if (sum <= 0.0) throw FitError("cannot fit: all samples are zero");
  const auto n = samples.size();
  return MlFit{static_cast<double>(n) / sum, n, sum / static_cast<double>(n)};
}

SurrogateFit build_surrogate_model(std::span<const double> spit_samples,
                                   std::span<const double> nonspit_samples) {
  const MlFit spit = fit_exponential_ml(spit_samples);
  const MlFit nonspit = fit_exponential_ml(nonspit_samples);
  ExponentialPair model(spit.lambda_ml, nonspit.lambda_ml);
  return SurrogateFit{model, spit, nonspit, nonspit.lambda_ml >= spit.lambda_ml};
}

EmpiricalPair::EmpiricalPair(std::vector<double> spit_samples,
                             std::vector<double> nonspit_samples)
    : spit_(std::make_shared<const std::vector<double>>(std::move(spit_samples))),
      nonspit_(std::make_shared<const std::vector<double>>(std::move(nonspit_samples))),
      fit_(build_surrogate_model(*spit_, *nonspit_)) {}

double EmpiricalPair::sample(Hypothesis h, Rng& rng) const noexcept {
  const auto& pool = h == Hypothesis::Spit ? *spit_ : *nonspit_;
  return pool[uniform_index(rng, pool.size())];
}

double log_likelihood_ratio(const LikelihoodPair& model, double x) {
  return std::visit(
      [x](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FunctionalPair>) {
          if (!m.log_ratio) throw UnsupportedModelError("functional pair has no log ratio");
          return m.log_ratio(x);
        } else {
          return m.log_likelihood_ratio(x);
        }
      },
      model);
}

KlInfo kl_numbers(const ExponentialPair& model) noexcept {
  // d = r - 1 keeps both numbers accurate when the rates are close.
  const double d = (model.nonspit_rate() - model.spit_rate()) / model.spit_rate();
  const double r = model.rate_ratio();
  const double log_r = std::log1p(d);
  return KlInfo{log_r - d, log_r - d / r};
}

KlEstimate kl_numbers_monte_carlo(const LikelihoodPair& model, std::size_t n_samples,
                                  std::uint64_t seed) {
  if (n_samples < 1000) {
    throw ParameterError("Monte Carlo KL estimation needs at least 1000 samples, got " +
                         std::to_string(n_samples));
  }
  std::function<double(Hypothesis, Rng&)> draw;
  std::visit(
      [&draw](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FunctionalPair>) {
          if (!m.sampler) throw UnsupportedModelError("model densities cannot be sampled");
          draw = m.sampler;
        } else {
          draw = [&m](Hypothesis h, Rng& rng) { return m.sample(h, rng); };
        }
      },
      model);

  KlEstimate out;
  out.n_samples = n_samples;
  for (auto h : {Hypothesis::Spit, Hypothesis::NonSpit}) {
    Rng rng = make_stream(seed, h == Hypothesis::Spit ? 0 : 1);
    Moments acc;
    for (std::size_t i = 0; i < n_samples; ++i) {
      acc.add(log_likelihood_ratio(model, draw(h, rng)));
    }
    if (h == Hypothesis::Spit) {
      out.kl.kappa0 = acc.mean;
      out.se0 = acc.standard_error();
    } else {
      out.kl.kappa1 = acc.mean;
      out.se1 = acc.standard_error();
    }
  }
  return out;
}

}  // namespace spitfilter
