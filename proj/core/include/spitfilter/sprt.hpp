// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "spitfilter/models.hpp"

namespace spitfilter {

/// Error probabilities of the test and the Wald thresholds derived from them,
/// A = beta / (1 - alpha) and B = (1 - beta) / alpha, held as logarithms.
///   alpha = P(decide NON-SPIT | source is SPIT)
///   beta  = P(decide SPIT | source is NON-SPIT)
class AccuracySpec {
 public:
  /// Throws ParameterError unless 0 < alpha, beta < 1 and alpha + beta < 1.
  AccuracySpec(double alpha, double beta);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double log_a() const noexcept { return log_a_; }
  double log_b() const noexcept { return log_b_; }

  friend bool operator==(const AccuracySpec&, const AccuracySpec&) = default;

 private:
  double alpha_;
  double beta_;
  double log_a_;
  double log_b_;
};

inline AccuracySpec make_accuracy(double alpha, double beta) { return AccuracySpec(alpha, beta); }

enum class Status : std::uint8_t { Observing, DecidedSpit, DecidedNonSpit };
enum class Verdict : std::uint8_t { Continue, DecideSpit, DecideNonSpit };

std::string_view to_string(Status s) noexcept;
std::string_view to_string(Verdict v) noexcept;

/// The standing verdict implied by a status (Continue while observing).
Verdict verdict_of(Status s) noexcept;

/// Per-source test state: running log-likelihood ratio, observation count
/// and status. Two numbers and a tag.
struct SprtState {
  double log_lambda = 0.0;
  std::uint64_t t = 0;
  Status status = Status::Observing;

  friend bool operator==(const SprtState&, const SprtState&) = default;
};

struct SprtStep {
  SprtState state;
  Verdict verdict = Verdict::Continue;
};

/// Adds one log-likelihood-ratio increment and classifies the result:
/// NON-SPIT when log_lambda >= log_b, SPIT when log_lambda <= log_a.
/// Throws StateError if the state is already decided and RejectedInputError
/// for a non-finite increment.
SprtStep update(const SprtState& state, const AccuracySpec& spec, double llr_increment);

struct ReplayResult {
  Verdict verdict = Verdict::Continue;
  /// Number of observations consumed; the sequence length when undecided.
  std::uint64_t stopping_time = 0;
  double log_lambda = 0.0;
};

/// Folds update over the observation sequence and stops at the first
/// verdict. No truncation: an exhausted sequence returns Continue.
ReplayResult replay(std::span<const double> observations, const ExponentialPair& model,
                    const AccuracySpec& spec);

}  // namespace spitfilter
