// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/planning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "spitfilter/error.hpp"

namespace spitfilter {

namespace {

// The search box reaches alpha = beta = 0.5, where alpha + beta = 1 and the
// test degenerates to deciding on zero observations. The formulas are finite
// there, so equality is allowed; beyond it they are not meaningful.
void check_accuracy(double alpha, double beta) {
  const auto open_unit = [](double p) { return std::isfinite(p) && p > 0.0 && p < 1.0; };
  if (!open_unit(alpha) || !open_unit(beta) || alpha + beta > 1.0) {
    std::ostringstream msg;
    msg << "expected 0 < alpha, beta < 1 and alpha + beta <= 1 (alpha=" << alpha
        << ", beta=" << beta << ")";
    throw ParameterError(msg.str());
  }
}

double log_upper(double alpha, double beta) { return std::log1p(-beta) - std::log(alpha); }
double log_lower(double alpha, double beta) { return std::log(beta) - std::log1p(-alpha); }

double stop_spit_unchecked(double alpha, double beta, double kappa0) {
  return (alpha * log_upper(alpha, beta) + (1.0 - alpha) * log_lower(alpha, beta)) / kappa0;
}

double stop_nonspit_unchecked(double alpha, double beta, double kappa1) {
  return (beta * log_lower(alpha, beta) + (1.0 - beta) * log_upper(alpha, beta)) / kappa1;
}

double loss_unchecked(double alpha, double beta, const CostSpec& cost, const KlInfo& kl) {
  const auto n = static_cast<double>(cost.n_calls);
  const double spit =
      alpha * cost.c0 * n + cost.c0 * (1.0 - alpha) * stop_spit_unchecked(alpha, beta, kl.kappa0);
  const double nonspit = beta * cost.c1 * (n - stop_nonspit_unchecked(alpha, beta, kl.kappa1));
  return cost.prior_spit * spit + (1.0 - cost.prior_spit) * nonspit;
}

void check_kl(const KlInfo& kl) {
  if (!(kl.kappa0 < 0.0)) throw DomainError("kappa0 must be negative");
  if (!(kl.kappa1 > 0.0)) throw DomainError("kappa1 must be positive");
}

struct Vertex {
  std::array<double, 2> u;  // (log alpha, log beta)
  double f;
};

bool vertex_less(const Vertex& a, const Vertex& b) {
  if (a.f != b.f) return a.f < b.f;
  return a.u < b.u;
}

}  // namespace

void CostSpec::validate() const {
  if (!(c0 >= 0.0) || !std::isfinite(c0)) throw ParameterError("c0 must be finite and >= 0");
  if (!(c1 >= 0.0) || !std::isfinite(c1)) throw ParameterError("c1 must be finite and >= 0");
  if (n_calls < 1) throw ParameterError("n_calls must be >= 1");
  if (!(prior_spit >= 0.0 && prior_spit <= 1.0)) {
    throw ParameterError("prior_spit must lie in [0, 1]");
  }
}

double expected_stopping_time_spit(double alpha, double beta, double kappa0) {
  check_accuracy(alpha, beta);
  if (!(kappa0 < 0.0)) throw DomainError("E_SPIT[T] requires kappa0 < 0");
  return stop_spit_unchecked(alpha, beta, kappa0);
}

double expected_stopping_time_nonspit(double alpha, double beta, double kappa1) {
  check_accuracy(alpha, beta);
  if (!(kappa1 > 0.0)) throw DomainError("E_NON[T] requires kappa1 > 0");
  return stop_nonspit_unchecked(alpha, beta, kappa1);
}

double expected_loss_spit(double alpha, double beta, const CostSpec& cost, double kappa0) {
  cost.validate();
  const double stop = expected_stopping_time_spit(alpha, beta, kappa0);
  return alpha * cost.c0 * static_cast<double>(cost.n_calls) + cost.c0 * (1.0 - alpha) * stop;
}

double expected_loss_nonspit(double alpha, double beta, const CostSpec& cost, double kappa1) {
  cost.validate();
  const double stop = expected_stopping_time_nonspit(alpha, beta, kappa1);
  return beta * cost.c1 * (static_cast<double>(cost.n_calls) - stop);
}

bool exceeds_horizon(double expected_stop, const CostSpec& cost) noexcept {
  return expected_stop > static_cast<double>(cost.n_calls);
}

double total_expected_loss(double alpha, double beta, const CostSpec& cost, const KlInfo& kl) {
  const double spit = expected_loss_spit(alpha, beta, cost, kl.kappa0);
  const double nonspit = expected_loss_nonspit(alpha, beta, cost, kl.kappa1);
  return cost.prior_spit * spit + (1.0 - cost.prior_spit) * nonspit;
}

std::vector<double> accuracy_grid(double lower_bound, std::size_t points) {
  if (!(lower_bound > 0.0 && lower_bound < 0.5)) {
    throw ParameterError("lower_bound must lie in (0, 0.5)");
  }
  if (points < 2) throw ParameterError("grid needs at least two points");
  std::vector<double> grid(points);
  const double lo = std::log(lower_bound);
  const double hi = std::log(0.5);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  grid.front() = lower_bound;
  grid.back() = 0.5;
  return grid;
}

PlanResult optimize_accuracy(const CostSpec& cost, const KlInfo& kl, double lower_bound,
                             const OptimizerOptions& options) {
  cost.validate();
  check_kl(kl);
  if (options.grid_points < 60) throw ParameterError("optimizer grid needs >= 60 points per axis");
  const std::vector<double> grid = accuracy_grid(lower_bound, options.grid_points);

  // Grid pass. Strict improvement only, so ties keep the smallest alpha, then beta.
  double best_alpha = grid.front();
  double best_beta = grid.front();
  double best_f = loss_unchecked(best_alpha, best_beta, cost, kl);
  double worst_f = best_f;
  for (double a : grid) {
    for (double b : grid) {
      const double f = loss_unchecked(a, b, cost, kl);
      if (f < best_f) {
        best_f = f;
        best_alpha = a;
        best_beta = b;
      }
      worst_f = std::max(worst_f, f);
    }
  }

  PlanResult result;
  result.flat_objective = (worst_f == best_f);

  if (!result.flat_objective) {
    const double lo = std::log(lower_bound);
    const double hi = std::log(0.5);
    const double step = (hi - lo) / static_cast<double>(options.grid_points - 1);
    const auto clamp = [&](std::array<double, 2> u) {
      for (double& c : u) c = std::clamp(c, lo, hi);
      return u;
    };
    const auto eval = [&](std::array<double, 2> u) {
      u = clamp(u);
      return Vertex{u, loss_unchecked(std::exp(u[0]), std::exp(u[1]), cost, kl)};
    };
    const std::array<double, 2> start{std::log(best_alpha), std::log(best_beta)};
    std::array<Vertex, 3> simplex;
    simplex[0] = eval(start);
    for (int axis = 0; axis < 2; ++axis) {
      auto u = start;
      u[axis] += (u[axis] + step <= hi) ? step : -step;
      simplex[axis + 1] = eval(u);
    }

    int it = 0;
    for (; it < options.max_iterations; ++it) {
      std::sort(simplex.begin(), simplex.end(), vertex_less);
      const double fb = simplex[0].f;
      const double fw = simplex[2].f;
      if (fw == fb || std::abs(fw - fb) <= options.relative_tolerance * std::abs(fb)) break;

      std::array<double, 2> centroid{};
      for (int k = 0; k < 2; ++k) centroid[k] = 0.5 * (simplex[0].u[k] + simplex[1].u[k]);
      const auto along = [&](double t) {
        std::array<double, 2> u{};
        for (int k = 0; k < 2; ++k) u[k] = centroid[k] + t * (simplex[2].u[k] - centroid[k]);
        return eval(u);
      };

      const Vertex reflected = along(-1.0);
      if (vertex_less(reflected, simplex[0])) {
        const Vertex expanded = along(-2.0);
        simplex[2] = vertex_less(expanded, reflected) ? expanded : reflected;
      } else if (vertex_less(reflected, simplex[1])) {
        simplex[2] = reflected;
      } else {
        const bool outside = vertex_less(reflected, simplex[2]);
        const Vertex contracted = along(outside ? -0.5 : 0.5);
        const Vertex& bar = outside ? reflected : simplex[2];
        if (vertex_less(contracted, bar)) {
          simplex[2] = contracted;
        } else {
          for (int v = 1; v < 3; ++v) {
            std::array<double, 2> u{};
            for (int k = 0; k < 2; ++k) {
              u[k] = simplex[0].u[k] + 0.5 * (simplex[v].u[k] - simplex[0].u[k]);
            }
            simplex[v] = eval(u);
          }
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(), vertex_less);
    result.iterations = it;
    // exp(log(x)) may land a hair off the box edge; snap to it and
    // re-evaluate before comparing against the grid optimum.
    const auto to_box = [&](double u) {
      const double p = std::clamp(std::exp(u), lower_bound, 0.5);
      if (p - lower_bound <= 1e-12 * lower_bound) return lower_bound;
      return 0.5 - p <= 1e-12 ? 0.5 : p;
    };
    const double a = to_box(simplex[0].u[0]);
    const double b = to_box(simplex[0].u[1]);
    const double f = loss_unchecked(a, b, cost, kl);
    if (f < best_f) {
      best_f = f;
      best_alpha = a;
      best_beta = b;
    }
  }

  result.alpha_star = best_alpha;
  result.beta_star = best_beta;
  result.expected_loss = best_f;
  result.e_t_spit = stop_spit_unchecked(best_alpha, best_beta, kl.kappa0);
  result.e_t_nonspit = stop_nonspit_unchecked(best_alpha, best_beta, kl.kappa1);
  result.horizon_warning =
      exceeds_horizon(result.e_t_spit, cost) || exceeds_horizon(result.e_t_nonspit, cost);
  return result;
}

}  // namespace spitfilter
