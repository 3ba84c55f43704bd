// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/sprt.hpp"

#include <cmath>
#include <sstream>

#include "spitfilter/error.hpp"

namespace spitfilter {

AccuracySpec::AccuracySpec(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  const auto open_unit = [](double p) { return std::isfinite(p) && p > 0.0 && p < 1.0; };
  if (!open_unit(alpha) || !open_unit(beta) || alpha + beta >= 1.0) {
    std::ostringstream msg;
    msg << "accuracy requires 0 < alpha, beta < 1 and alpha + beta < 1 (alpha=" << alpha
        << ", beta=" << beta << ")";
    throw ParameterError(msg.str());
  }
  log_a_ = std::log(beta) - std::log1p(-alpha);
  log_b_ = std::log1p(-beta) - std::log(alpha);
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::Observing: return "OBSERVING";
    case Status::DecidedSpit: return "SPIT";
    case Status::DecidedNonSpit: return "NONSPIT";
  }
  return "?";
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Continue: return "CONTINUE";
    case Verdict::DecideSpit: return "SPIT";
    case Verdict::DecideNonSpit: return "NONSPIT";
  }
  return "?";
}

Verdict verdict_of(Status s) noexcept {
  switch (s) {
    case Status::DecidedSpit: return Verdict::DecideSpit;
    case Status::DecidedNonSpit: return Verdict::DecideNonSpit;
    case Status::Observing: break;
  }
  return Verdict::Continue;
}

SprtStep update(const SprtState& state, const AccuracySpec& spec, double llr_increment) {
  if (state.status != Status::Observing) {
    throw StateError("SPRT update after a verdict was reached (status " +
                     std::string(to_string(state.status)) + ")");
  }
  if (!std::isfinite(llr_increment)) {
    throw RejectedInputError("log-likelihood increment must be finite");
  }
  SprtStep step{SprtState{state.log_lambda + llr_increment, state.t + 1, Status::Observing},
                Verdict::Continue};
  if (step.state.log_lambda >= spec.log_b()) {
    step.state.status = Status::DecidedNonSpit;
    step.verdict = Verdict::DecideNonSpit;
  } else if (step.state.log_lambda <= spec.log_a()) {
    step.state.status = Status::DecidedSpit;
    step.verdict = Verdict::DecideSpit;
  }
  return step;
}

ReplayResult replay(std::span<const double> observations, const ExponentialPair& model,
                    const AccuracySpec& spec) {
  SprtState state;
  for (double x : observations) {
    const SprtStep step = update(state, spec, model.log_likelihood_ratio(x));
    state = step.state;
    if (step.verdict != Verdict::Continue) {
      return ReplayResult{step.verdict, state.t, state.log_lambda};
    }
  }
  return ReplayResult{Verdict::Continue, state.t, state.log_lambda};
}

}  // namespace spitfilter
