// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "spitfilter/error.hpp"

namespace spitfilter {

namespace {

constexpr std::uint64_t kBlockSize = 1024;

__extension__ using u128 = unsigned __int128;

// Partial sums of one block of trials. Stopping-time sums are exact
// integers; only the log-lambda sum is floating point, and blocks are
// combined in index order.
struct BlockSums {
  std::uint64_t n = 0;
  std::uint64_t errors = 0;
  std::uint64_t undecided = 0;
  std::uint64_t sum_t = 0;
  u128 sum_t2 = 0;
  double sum_llr = 0.0;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string_view source_name(Hypothesis h) { return h == Hypothesis::Spit ? "SPIT" : "NON-SPIT"; }

}  // namespace

DurationSource exponential_source(double rate) {
  if (!std::isfinite(rate) || rate <= 0.0) throw InputError("exponential source needs a positive rate");
  return ExponentialSource{rate};
}

DurationSource pool_source(std::vector<double> durations) {
  if (durations.empty()) throw InputError("empty duration pool");
  for (double d : durations) {
    if (!std::isfinite(d) || d < 0.0) throw InputError("duration pool holds an invalid value");
  }
  return PoolSource{std::make_shared<const std::vector<double>>(std::move(durations))};
}

double sample_duration(const DurationSource& source, Rng& rng) {
  if (const auto* e = std::get_if<ExponentialSource>(&source)) return draw_exponential(rng, e->rate);
  const auto& pool = std::get<PoolSource>(source).durations;
  if (!pool || pool->empty()) throw InputError("empty duration pool");
  return (*pool)[uniform_index(rng, pool->size())];
}

bool is_wrong(Verdict verdict, Hypothesis truth) noexcept {
  return (truth == Hypothesis::Spit && verdict == Verdict::DecideNonSpit) ||
         (truth == Hypothesis::NonSpit && verdict == Verdict::DecideSpit);
}

TrialOutcome run_trial(const TrialConfig& config, Rng& rng) {
  SprtState state;
  while (state.t < config.max_calls) {
    const double x = sample_duration(config.truth, rng);
    const SprtStep step = update(state, config.spec, config.filter.log_likelihood_ratio(x));
    state = step.state;
    if (step.verdict != Verdict::Continue) {
      return TrialOutcome{step.verdict, state.t, false, state.log_lambda};
    }
  }
  return TrialOutcome{Verdict::Continue, config.max_calls, true, state.log_lambda};
}

AggregateReport monte_carlo(const TrialConfig& config, std::uint64_t n_trials,
                            std::uint64_t master_seed, unsigned threads) {
  if (n_trials < 1) throw ParameterError("monte_carlo needs at least one trial");
  if (config.max_calls < 1) throw ParameterError("max_calls must be >= 1");
  const std::uint64_t n_blocks = (n_trials + kBlockSize - 1) / kBlockSize;
  std::vector<BlockSums> blocks(n_blocks);
  std::atomic<std::uint64_t> next{0};

  const auto worker = [&] {
    for (std::uint64_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
      BlockSums sums;
      const std::uint64_t end = std::min(n_trials, (b + 1) * kBlockSize);
      for (std::uint64_t i = b * kBlockSize; i < end; ++i) {
        Rng rng = make_stream(master_seed, i);
        const TrialOutcome o = run_trial(config, rng);
        ++sums.n;
        sums.errors += is_wrong(o.verdict, config.truth_class) ? 1 : 0;
        sums.undecided += o.undecided ? 1 : 0;
        sums.sum_t += o.stopping_time;
        sums.sum_t2 += static_cast<u128>(o.stopping_time) * o.stopping_time;
        sums.sum_llr += o.final_log_lambda;
      }
      blocks[b] = sums;
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(threads == 0 ? std::thread::hardware_concurrency() : threads,
                                      static_cast<unsigned>(n_blocks)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BlockSums total;
  for (const auto& b : blocks) {
    total.n += b.n;
    total.errors += b.errors;
    total.undecided += b.undecided;
    total.sum_t += b.sum_t;
    total.sum_t2 += b.sum_t2;
    total.sum_llr += b.sum_llr;
  }

  AggregateReport r;
  const auto n = static_cast<double>(total.n);
  r.n_trials = total.n;
  r.n_errors = total.errors;
  r.n_undecided = total.undecided;
  r.mean_stop = static_cast<double>(total.sum_t) / n;
  if (total.n > 1) {
    // n * sum(T^2) - sum(T)^2 is exact in 128 bits.
    const u128 s = total.sum_t;
    const u128 numer = static_cast<u128>(total.n) * total.sum_t2 - s * s;
    const double var = static_cast<double>(numer) / (n * (n - 1.0));
    r.std_stop = std::sqrt(var);
    r.sem_stop = r.std_stop / std::sqrt(n);
  }
  r.error_rate = static_cast<double>(total.errors) / n;
  r.undecided_rate = static_cast<double>(total.undecided) / n;
  r.correct_rate = static_cast<double>(total.n - total.errors - total.undecided) / n;
  r.mean_final_log_lambda = total.sum_llr / n;
  return r;
}

std::vector<double> table1_ratios() { return {0.99, 0.95, 0.90, 0.70, 0.50, 0.30, 0.10, 0.01}; }
std::vector<double> table1_accuracies() { return {0.05, 0.01, 0.001}; }
std::vector<double> figure3_ratios() { return {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1}; }

std::vector<Table1Row> compute_table1(std::span<const double> ratios,
                                      std::span<const double> accuracies) {
  std::vector<Table1Row> rows;
  for (double ratio : ratios) {
    const ExponentialPair model(1.0, ratio);
    Table1Row row{ratio, kl_numbers(model), {}};
    for (double acc : accuracies) {
      row.stops.emplace_back(expected_stopping_time_spit(acc, acc, row.kl.kappa0),
                             expected_stopping_time_nonspit(acc, acc, row.kl.kappa1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Table table1_report(std::span<const Table1Row> rows, std::span<const double> accuracies) {
  Table t;
  t.name = "table1";
  t.caption = "expected number of calls until stopping vs. lambda1/lambda0 and accuracy";
  t.columns = {"lambda1/lambda0", "kappa0", "kappa1"};
  for (double acc : accuracies) {
    t.columns.push_back("E_SPIT[T] | alpha,beta=" + fmt(acc));
    t.columns.push_back("E_NON[T] | alpha,beta=" + fmt(acc));
  }
  for (const auto& row : rows) {
    std::vector<Cell> cells{row.ratio, row.kl.kappa0, row.kl.kappa1};
    for (const auto& [spit, nonspit] : row.stops) {
      cells.emplace_back(spit);
      cells.emplace_back(nonspit);
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::vector<Figure3Cell> run_figure3(std::span<const double> ratios,
                                     std::span<const double> accuracies, std::uint64_t n_trials,
                                     std::uint64_t seed, unsigned threads,
                                     std::uint64_t max_calls) {
  std::vector<Figure3Cell> cells;
  std::uint64_t cell_index = 0;
  for (double ratio : ratios) {
    const ExponentialPair model(1.0, ratio);
    const KlInfo kl = kl_numbers(model);
    for (double acc : accuracies) {
      const AccuracySpec spec(acc, acc);
      for (auto truth : {Hypothesis::Spit, Hypothesis::NonSpit}) {
        TrialConfig config{ExponentialSource{model.rate(truth)}, truth, model, spec, max_calls};
        Figure3Cell cell;
        cell.ratio = ratio;
        cell.accuracy = acc;
        cell.truth = truth;
        cell.analytic_stop = truth == Hypothesis::Spit
                                 ? expected_stopping_time_spit(acc, acc, kl.kappa0)
                                 : expected_stopping_time_nonspit(acc, acc, kl.kappa1);
        cell.report = monte_carlo(config, n_trials, stream_seed(seed, cell_index++), threads);
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

Table figure3_report(std::span<const Figure3Cell> cells) {
  Table t;
  t.name = "figure3";
  t.caption = "Monte Carlo stopping times and error rates, matched models";
  t.columns = {"lambda1/lambda0", "alpha,beta", "source",   "E[T] analytic", "mean T",
               "std T",           "se T",       "error rate", "error bound",  "trials"};
  for (const auto& c : cells) {
    t.rows.push_back({c.ratio, c.accuracy, std::string(source_name(c.truth)), c.analytic_stop,
                      c.report.mean_stop, c.report.std_stop, c.report.sem_stop,
                      c.report.error_rate, c.accuracy,
                      static_cast<std::int64_t>(c.report.n_trials)});
  }
  return t;
}

std::vector<double> table2_ratios() { return {0.1, 0.2, 0.3, 0.4}; }

std::vector<CostSetting> table2_settings() {
  return {{500, 1.0}, {500, 10.0}, {500, 100.0}, {5000, 1.0}, {5000, 10.0}};
}

std::vector<Table2Cell> run_table2(std::span<const double> ratios,
                                   std::span<const CostSetting> settings, std::uint64_t n_trials,
                                   std::uint64_t seed, double lower_bound, unsigned threads) {
  std::vector<Table2Cell> cells;
  std::uint64_t cell_index = 0;
  for (double ratio : ratios) {
    const ExponentialPair model(1.0, ratio);
    const KlInfo kl = kl_numbers(model);
    for (const auto& setting : settings) {
      const CostSpec cost{1.0, setting.c1_over_c0, setting.n_calls, 0.5};
      Table2Cell cell{ratio, setting, optimize_accuracy(cost, kl, lower_bound), std::nullopt};
      if (n_trials > 0) {
        const AccuracySpec spec(cell.plan.alpha_star, cell.plan.beta_star);
        TrialConfig config{ExponentialSource{model.spit_rate()}, Hypothesis::Spit, model, spec};
        cell.report = monte_carlo(config, n_trials, stream_seed(seed, cell_index), threads);
      }
      ++cell_index;
      cells.push_back(cell);
    }
  }
  return cells;
}

Table table2_report(std::span<const Table2Cell> cells) {
  Table t;
  t.name = "table2";
  t.caption = "optimized SPRT filter, source=SPIT, c0=1, priors 1/2";
  t.columns = {"lambda1/lambda0", "N", "c1/c0", "alpha*", "beta*", "nErr", "T", "E_SPIT[T]",
               "trials"};
  for (const auto& c : cells) {
    std::vector<Cell> row{c.ratio,
                          static_cast<std::int64_t>(c.setting.n_calls),
                          c.setting.c1_over_c0,
                          c.plan.alpha_star,
                          c.plan.beta_star};
    if (c.report) {
      row.emplace_back(static_cast<std::int64_t>(c.report->n_errors));
      row.emplace_back(c.report->mean_stop);
      row.emplace_back(c.plan.e_t_spit);
      row.emplace_back(static_cast<std::int64_t>(c.report->n_trials));
    } else {
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      row.emplace_back(c.plan.e_t_spit);
      row.emplace_back(std::int64_t{0});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::ModelModel: return "model-model";
    case Scenario::ModelData: return "model-data";
    case Scenario::DataModel: return "data-model";
    case Scenario::DataData: return "data-data";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view s) noexcept {
  for (auto sc : {Scenario::ModelModel, Scenario::ModelData, Scenario::DataModel,
                  Scenario::DataData}) {
    if (to_string(sc) == s) return sc;
  }
  return std::nullopt;
}

std::vector<double> table3_accuracies() { return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}; }

std::vector<SurrogateRow> surrogate_experiment(const LabeledDataset& dataset, Scenario scenario,
                                               std::span<const double> accuracies,
                                               std::uint64_t n_trials, std::uint64_t seed,
                                               unsigned threads, std::uint64_t max_calls) {
  if (dataset.spit.empty() || dataset.nonspit.empty()) {
    throw LabelingError("surrogate experiment needs a labeled dataset with both classes");
  }
  const DatasetModels models = dataset_to_models(dataset);
  const ExponentialPair& filter = models.fit.model;
  const bool spit_from_data = scenario == Scenario::DataModel || scenario == Scenario::DataData;
  const bool nonspit_from_data = scenario == Scenario::ModelData || scenario == Scenario::DataData;
  const DurationSource spit_truth = spit_from_data
                                        ? pool_source(dataset.durations(Hypothesis::Spit))
                                        : DurationSource{ExponentialSource{filter.spit_rate()}};
  const DurationSource nonspit_truth =
      nonspit_from_data ? pool_source(dataset.durations(Hypothesis::NonSpit))
                        : DurationSource{ExponentialSource{filter.nonspit_rate()}};

  std::vector<SurrogateRow> rows;
  std::uint64_t cell_index = 0;
  for (auto source : {Hypothesis::Spit, Hypothesis::NonSpit}) {
    for (double acc : accuracies) {
      TrialConfig config{source == Hypothesis::Spit ? spit_truth : nonspit_truth, source, filter,
                         AccuracySpec(acc, acc), max_calls};
      rows.push_back(SurrogateRow{scenario, source, acc,
                                  monte_carlo(config, n_trials, stream_seed(seed, cell_index++),
                                              threads)});
    }
  }
  return rows;
}

Table surrogate_report(std::span<const SurrogateRow> rows) {
  Table t;
  t.name = "table3";
  t.caption = "SPRT filter with a fitted exponential surrogate on call data";
  t.columns = {"scenario", "Source", "alpha,beta", "Error", "Stopping time", "undecided",
               "trials"};
  for (const auto& r : rows) {
    t.rows.push_back({std::string(to_string(r.scenario)), std::string(source_name(r.source)),
                      r.accuracy, r.report.error_rate, r.report.mean_stop,
                      r.report.undecided_rate, static_cast<std::int64_t>(r.report.n_trials)});
  }
  return t;
}

}  // namespace spitfilter
