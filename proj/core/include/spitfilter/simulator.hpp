// SPDX-License-Identifier: Apache-2.0
#pragma once

// Monte Carlo harness: seeded single trials of the SPRT, order-independent
// aggregation, and the experiment tables built on top of them.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "spitfilter/ingestion.hpp"
#include "spitfilter/models.hpp"
#include "spitfilter/planning.hpp"
#include "spitfilter/report.hpp"
#include "spitfilter/sprt.hpp"

namespace spitfilter {

struct ExponentialSource {
  double rate = 1.0;
};

struct PoolSource {
  std::shared_ptr<const std::vector<double>> durations;
};

/// Generator of observed durations: an exponential law or resampling of a pool.
using DurationSource = std::variant<ExponentialSource, PoolSource>;

DurationSource exponential_source(double rate);
/// Throws InputError on an empty pool or invalid durations.
DurationSource pool_source(std::vector<double> durations);

/// Exponential: x = -ln(U)/rate with U on (0, 1]. Pool: uniform draw with
/// replacement.
double sample_duration(const DurationSource& source, Rng& rng);

struct TrialConfig {
  DurationSource truth;
  Hypothesis truth_class = Hypothesis::Spit;
  ExponentialPair filter;
  AccuracySpec spec;
  std::uint64_t max_calls = 1'000'000;
};

struct TrialOutcome {
  Verdict verdict = Verdict::Continue;
  std::uint64_t stopping_time = 0;
  bool undecided = false;  ///< cap reached; stopping_time == max_calls
  double final_log_lambda = 0.0;
};

/// True when the verdict contradicts the source's real class.
bool is_wrong(Verdict verdict, Hypothesis truth) noexcept;

TrialOutcome run_trial(const TrialConfig& config, Rng& rng);

struct AggregateReport {
  std::uint64_t n_trials = 0;
  std::uint64_t n_errors = 0;
  std::uint64_t n_undecided = 0;
  double mean_stop = 0.0;
  double std_stop = 0.0;  ///< sample standard deviation of the stopping time
  double sem_stop = 0.0;  ///< standard error of mean_stop
  double error_rate = 0.0;
  double correct_rate = 0.0;
  double undecided_rate = 0.0;
  /// Mean of the log-likelihood ratio at stopping (Wald's identity:
  /// E[log_lambda_T] = kappa * E[T]).
  double mean_final_log_lambda = 0.0;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

/// Runs n_trials >= 1 trials. Trial i draws from the stream
/// stream_seed(master_seed, i); blocks of trials are reduced in index order,
/// so the report is bitwise identical for any thread count.
AggregateReport monte_carlo(const TrialConfig& config, std::uint64_t n_trials,
                            std::uint64_t master_seed, unsigned threads = 1);

// --- experiment tables -------------------------------------------------------

std::vector<double> table1_ratios();    ///< 0.99 ... 0.01
std::vector<double> table1_accuracies();  ///< 0.05, 0.01, 0.001
std::vector<double> figure3_ratios();   ///< 0.9, 0.8, ..., 0.1

struct Table1Row {
  double ratio = 0.0;  ///< lambda1 / lambda0
  KlInfo kl;
  /// (E_SPIT[T], E_NON[T]) per accuracy setting alpha = beta.
  std::vector<std::pair<double, double>> stops;
};

/// Analytical stopping times, lambda0 = 1 and lambda1 = ratio.
std::vector<Table1Row> compute_table1(std::span<const double> ratios,
                                      std::span<const double> accuracies);
Table table1_report(std::span<const Table1Row> rows, std::span<const double> accuracies);

struct Figure3Cell {
  double ratio = 0.0;
  double accuracy = 0.0;
  Hypothesis truth = Hypothesis::Spit;
  double analytic_stop = 0.0;
  AggregateReport report;
};

/// Matched-model trials (truth and filter share the rates) for every
/// ratio x accuracy x truth class.
std::vector<Figure3Cell> run_figure3(std::span<const double> ratios,
                                     std::span<const double> accuracies, std::uint64_t n_trials,
                                     std::uint64_t seed, unsigned threads = 1,
                                     std::uint64_t max_calls = 1'000'000);
Table figure3_report(std::span<const Figure3Cell> cells);

struct CostSetting {
  std::uint64_t n_calls = 500;
  double c1_over_c0 = 1.0;
};

std::vector<double> table2_ratios();          ///< 0.1, 0.2, 0.3, 0.4
std::vector<CostSetting> table2_settings();   ///< N=500 x {1,10,100}, N=5000 x {1,10}

struct Table2Cell {
  double ratio = 0.0;
  CostSetting setting;
  PlanResult plan;
  std::optional<AggregateReport> report;  ///< absent when no trials were run
};

/// Optimizes (alpha, beta) per cell with c0 = 1 and equal priors, then runs
/// n_trials SPIT-source trials at the optimum.
std::vector<Table2Cell> run_table2(std::span<const double> ratios,
                                   std::span<const CostSetting> settings, std::uint64_t n_trials,
                                   std::uint64_t seed, double lower_bound = 1e-4,
                                   unsigned threads = 1);
Table table2_report(std::span<const Table2Cell> cells);

/// Which class is generated from the fitted model and which from the data
/// pool; the first word names the SPIT generator.
enum class Scenario : std::uint8_t { ModelModel, ModelData, DataModel, DataData };

std::string_view to_string(Scenario s) noexcept;
std::optional<Scenario> parse_scenario(std::string_view s) noexcept;

struct SurrogateRow {
  Scenario scenario = Scenario::DataData;
  Hypothesis source = Hypothesis::Spit;
  double accuracy = 0.0;
  AggregateReport report;
};

std::vector<double> table3_accuracies();  ///< 1e-6 ... 1e-1

/// Filter uses the exponential surrogate fitted to the dataset; truth
/// generators follow the scenario. Rows are per (source class, accuracy).
std::vector<SurrogateRow> surrogate_experiment(const LabeledDataset& dataset, Scenario scenario,
                                               std::span<const double> accuracies,
                                               std::uint64_t n_trials, std::uint64_t seed,
                                               unsigned threads = 1,
                                               std::uint64_t max_calls = 1'000'000);
Table surrogate_report(std::span<const SurrogateRow> rows);

}  // namespace spitfilter
