// SPDX-License-Identifier: Apache-2.0
#pragma once

// Wald's expected stopping times, the expected loss of the
// observe-then-commit policy over a horizon of N calls, and the search for
// the loss-minimizing accuracy (alpha*, beta*).

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spitfilter/models.hpp"

namespace spitfilter {

/// Per-call mistake costs and horizon.
struct CostSpec {
  double c0 = 1.0;  ///< accepting a SPIT call
  double c1 = 1.0;  ///< blocking a NON-SPIT call
  std::uint64_t n_calls = 500;
  double prior_spit = 0.5;

  /// Throws ParameterError on negative costs, n_calls == 0 or a prior outside [0, 1].
  void validate() const;
};

/// E_SPIT[T] = (alpha log((1-beta)/alpha) + (1-alpha) log(beta/(1-alpha))) / kappa0.
double expected_stopping_time_spit(double alpha, double beta, double kappa0);

/// E_NON[T] = (beta log(beta/(1-alpha)) + (1-beta) log((1-beta)/alpha)) / kappa1.
double expected_stopping_time_nonspit(double alpha, double beta, double kappa1);

/// alpha c0 N + c0 (1 - alpha) E_SPIT[T]
double expected_loss_spit(double alpha, double beta, const CostSpec& cost, double kappa0);

/// beta c1 (N - E_NON[T]). Evaluated even when E_NON[T] > N; see exceeds_horizon.
double expected_loss_nonspit(double alpha, double beta, const CostSpec& cost, double kappa1);

/// True when an expected stopping time does not fit in the horizon.
bool exceeds_horizon(double expected_stop, const CostSpec& cost) noexcept;

/// Prior-weighted mixture of the two conditional losses.
double total_expected_loss(double alpha, double beta, const CostSpec& cost, const KlInfo& kl);

struct OptimizerOptions {
  std::size_t grid_points = 64;  ///< per axis, log-spaced, at least 60
  int max_iterations = 500;
  double relative_tolerance = 1e-12;
};

struct PlanResult {
  double alpha_star = 0.0;
  double beta_star = 0.0;
  double expected_loss = 0.0;
  double e_t_spit = 0.0;
  double e_t_nonspit = 0.0;
  /// Some expected stopping time at the optimum exceeds n_calls.
  bool horizon_warning = false;
  /// Every grid point had the same loss; the lower-bound corner is returned.
  bool flat_objective = false;
  int iterations = 0;
};

/// Log-spaced grid from lower_bound to 0.5, both ends included.
std::vector<double> accuracy_grid(double lower_bound, std::size_t points);

/// Minimizes total_expected_loss over [lower_bound, 0.5]^2: grid search, then
/// a bounded Nelder-Mead refinement in log coordinates from the best grid
/// point. Ties resolve to the smallest alpha, then the smallest beta.
PlanResult optimize_accuracy(const CostSpec& cost, const KlInfo& kl, double lower_bound = 1e-4,
                             const OptimizerOptions& options = {});

}  // namespace spitfilter
