// SPDX-License-Identifier: Apache-2.0
#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "spitfilter/engine.hpp"
#include "spitfilter/error.hpp"
#include "spitfilter/ingestion.hpp"
#include "spitfilter/planning.hpp"
#include "spitfilter/report.hpp"
#include "spitfilter/simulator.hpp"
#include "spitfilter/sprt.hpp"
#include "spitfilter/version.hpp"

namespace spitfilter::cli {

namespace {

using json = nlohmann::ordered_json;

struct Common {
  std::uint64_t seed = 1;
  bool json_output = false;
};

/// How the likelihood model is obtained: explicit rates or a CDR fit.
struct ModelFlags {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  std::string dataset;
  double threshold = 80.0;
  double fraction = 0.20;
  CLI::Option* lambda0_opt = nullptr;
  CLI::Option* lambda1_opt = nullptr;
  CLI::Option* dataset_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;

  bool rule_flags_given() const { return threshold_opt->count() + fraction_opt->count() > 0; }
};

void add_common(CLI::App& cmd, Common& common) {
  cmd.add_option("--seed", common.seed, "Random seed")->envname("SPITFILTER_SEED");
  cmd.add_flag("--json", common.json_output, "Machine-readable JSON output");
}

void add_dataset_flags(CLI::App& cmd, ModelFlags& m) {
  m.threshold_opt = cmd.add_option("--threshold", m.threshold,
                                    "Labeling rule: calls shorter than this many seconds are SPIT "
                                    "candidates (default 80)");
  m.fraction_opt = cmd.add_option("--fraction", m.fraction,
                                  "Labeling rule: fraction of the candidates labeled SPIT "
                                  "(default 0.2)");
}

void add_model_flags(CLI::App& cmd, ModelFlags& m) {
  m.lambda0_opt = cmd.add_option("--lambda0", m.lambda0, "SPIT duration rate (1/s)");
  m.lambda1_opt = cmd.add_option("--lambda1", m.lambda1, "NON-SPIT duration rate (1/s)");
  m.dataset_opt = cmd.add_option("--dataset", m.dataset, "Fit the rates from a CDR CSV file");
  m.lambda0_opt->needs(m.lambda1_opt);
  m.lambda1_opt->needs(m.lambda0_opt);
  m.dataset_opt->excludes(m.lambda0_opt)->excludes(m.lambda1_opt);
  add_dataset_flags(cmd, m);
}

std::string header_line(std::string_view command, std::uint64_t seed) {
  std::ostringstream s;
  s << "# spitfilter " << kVersion << ' ' << command << " seed=" << seed;
  return s.str();
}

json envelope(std::string_view command, std::uint64_t seed) {
  return json{{"spitfilter", kVersion}, {"command", command}, {"seed", seed}};
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

struct LoadedDataset {
  LabeledDataset dataset;
  std::size_t row_errors = 0;
};

LoadedDataset load_dataset(const ModelFlags& m, std::uint64_t seed, std::ostream& err) {
  auto in = open_input(m.dataset);
  ParseResult parsed = parse_cdr(in);
  for (const auto& e : parsed.errors) {
    err << m.dataset << ":" << e.line << ": skipped row: " << e.message << '\n';
  }
  LoadedDataset out;
  out.row_errors = parsed.errors.size();
  if (parsed.has_label_column) {
    if (m.rule_flags_given()) {
      throw InputError("'" + m.dataset +
                       "' carries explicit labels; --threshold/--fraction cannot be combined "
                       "with it");
    }
    out.dataset = label_explicit(parsed.records);
  } else {
    out.dataset = label_by_duration_rule(parsed.records, LabelingRule{m.threshold, m.fraction, seed});
  }
  return out;
}

ExponentialPair resolve_model(const ModelFlags& m, std::uint64_t seed, std::ostream& err) {
  if (m.dataset_opt->count() > 0) {
    const auto loaded = load_dataset(m, seed, err);
    const auto models = dataset_to_models(loaded.dataset);
    if (models.fit.role_inverted) {
      err << "warning: fitted SPIT mean is not shorter than the NON-SPIT mean\n";
    }
    return models.fit.model;
  }
  if (m.lambda0_opt->count() == 0) {
    throw InputError("a model is required: give --lambda0/--lambda1 or --dataset");
  }
  if (m.rule_flags_given()) throw InputError("--threshold/--fraction only apply with --dataset");
  return ExponentialPair(m.lambda0, m.lambda1);
}

// --- fit --------------------------------------------------------------------

void cmd_fit(const Common& common, const ModelFlags& m, Streams io) {
  const auto loaded = load_dataset(m, common.seed, io.err);
  const auto models = dataset_to_models(loaded.dataset);
  if (common.json_output) {
    json doc = envelope("fit", common.seed);
    doc["dataset"] = m.dataset;
    doc["row_errors"] = loaded.row_errors;
    doc["manifest"] = json::parse(dataset_manifest_json(loaded.dataset, models));
    io.out << doc.dump(2) << '\n';
    return;
  }
  const auto& d = loaded.dataset;
  io.out << header_line("fit", common.seed) << '\n';
  io.out << std::setprecision(8);
  io.out << "dataset        " << m.dataset << '\n';
  io.out << "records        " << d.spit.size() + d.nonspit.size() << " (" << loaded.row_errors
         << " rows skipped)\n";
  io.out << "labeling       " << d.rule;
  if (d.rule_params) {
    io.out << " (threshold " << d.rule_params->threshold_s << " s, fraction "
           << d.rule_params->fraction << ", seed " << d.rule_params->seed << ")";
  }
  io.out << '\n';
  io.out << "SPIT           " << d.spit.size() << " calls, mean " << models.fit.spit.mean
         << " s, lambda0 = " << models.fit.spit.lambda_ml << '\n';
  io.out << "NON-SPIT       " << d.nonspit.size() << " calls, mean " << models.fit.nonspit.mean
         << " s, lambda1 = " << models.fit.nonspit.lambda_ml << '\n';
  io.out << "lambda1/lambda0 " << models.fit.model.rate_ratio() << '\n';
  io.out << "kappa0         " << models.kl.kappa0 << '\n';
  io.out << "kappa1         " << models.kl.kappa1 << '\n';
  if (models.fit.role_inverted) io.out << "warning        SPIT calls are not shorter on average\n";
}

// --- plan -------------------------------------------------------------------

struct PlanFlags {
  CostSpec cost;
  double lower_bound = 1e-4;
};

void cmd_plan(const Common& common, const ModelFlags& m, const PlanFlags& p, Streams io) {
  p.cost.validate();
  const ExponentialPair model = resolve_model(m, common.seed, io.err);
  const KlInfo kl = kl_numbers(model);
  const PlanResult plan = optimize_accuracy(p.cost, kl, p.lower_bound);
  const bool testable = plan.alpha_star + plan.beta_star < 1.0;
  std::optional<AccuracySpec> spec;
  if (testable) spec.emplace(plan.alpha_star, plan.beta_star);

  if (common.json_output) {
    json doc = envelope("plan", common.seed);
    doc["model"] = {{"lambda0", model.spit_rate()},
                    {"lambda1", model.nonspit_rate()},
                    {"kappa0", kl.kappa0},
                    {"kappa1", kl.kappa1}};
    doc["cost"] = {{"c0", p.cost.c0},
                   {"c1", p.cost.c1},
                   {"n_calls", p.cost.n_calls},
                   {"prior_spit", p.cost.prior_spit},
                   {"lower_bound", p.lower_bound}};
    doc["plan"] = {{"alpha_star", plan.alpha_star},
                   {"beta_star", plan.beta_star},
                   {"expected_loss", plan.expected_loss},
                   {"e_t_spit", plan.e_t_spit},
                   {"e_t_nonspit", plan.e_t_nonspit},
                   {"flat_objective", plan.flat_objective},
                   {"horizon_warning", plan.horizon_warning}};
    if (spec) {
      doc["thresholds"] = {{"log_a", spec->log_a()},
                           {"log_b", spec->log_b()},
                           {"A", std::exp(spec->log_a())},
                           {"B", std::exp(spec->log_b())}};
    } else {
      doc["thresholds"] = nullptr;
    }
    io.out << doc.dump(2) << '\n';
    return;
  }
  io.out << header_line("plan", common.seed) << '\n' << std::setprecision(6);
  io.out << "model          lambda0 = " << model.spit_rate() << ", lambda1 = "
         << model.nonspit_rate() << " (ratio " << model.rate_ratio() << ")\n";
  io.out << "kappa0/kappa1  " << kl.kappa0 << " / " << kl.kappa1 << '\n';
  io.out << "alpha*         " << plan.alpha_star << '\n';
  io.out << "beta*          " << plan.beta_star << '\n';
  io.out << "expected loss  " << plan.expected_loss << '\n';
  io.out << "E_SPIT[T]      " << plan.e_t_spit << '\n';
  io.out << "E_NON[T]       " << plan.e_t_nonspit << '\n';
  if (spec) {
    io.out << "thresholds     A = " << std::exp(spec->log_a()) << ", B = " << std::exp(spec->log_b())
           << " (log " << spec->log_a() << ", " << spec->log_b() << ")\n";
  } else {
    io.out << "thresholds     none: alpha* + beta* = 1, testing does not pay off\n";
  }
  if (plan.flat_objective) {
    io.out << "note           loss is identically zero; lower-bound corner returned\n";
  }
  if (plan.horizon_warning) {
    io.out << "warning        an expected stopping time exceeds the horizon N\n";
  }
}

// --- simulate ---------------------------------------------------------------

struct SimulateFlags {
  std::string table = "1";
  std::uint64_t trials = 0;
  CLI::Option* trials_opt = nullptr;
  unsigned threads = 1;
  std::string out_prefix;
  std::vector<double> ratios;
  std::vector<double> mc_ratios;
  std::vector<double> specs;
  std::string scenario = "all";
  std::uint64_t max_calls = 1'000'000;
  double lower_bound = 1e-4;
};

void emit_tables(const Common& common, const SimulateFlags& s, const std::vector<Table>& tables,
                 Streams io) {
  if (!s.out_prefix.empty()) {
    for (const auto& t : tables) {
      auto csv = open_output(s.out_prefix + "." + t.name + ".csv");
      csv << to_csv(t);
      auto js = open_output(s.out_prefix + "." + t.name + ".json");
      js << to_json(t) << '\n';
    }
  }
  if (common.json_output) {
    json doc = envelope("simulate", common.seed);
    doc["table"] = s.table;
    doc["trials"] = s.trials;
    doc["tables"] = json::parse(to_json(tables));
    io.out << doc.dump(2) << '\n';
    return;
  }
  io.out << header_line("simulate", common.seed) << '\n';
  for (const auto& t : tables) io.out << '\n' << to_text(t);
}

std::vector<Table> simulate_table1(const Common& common, const SimulateFlags& s) {
  const auto ratios = s.ratios.empty() ? table1_ratios() : s.ratios;
  const auto specs = s.specs.empty() ? table1_accuracies() : s.specs;
  std::vector<Table> tables{table1_report(compute_table1(ratios, specs), specs)};
  if (s.trials > 0) {
    const auto mc_ratios = s.mc_ratios.empty() ? figure3_ratios() : s.mc_ratios;
    tables.push_back(figure3_report(
        run_figure3(mc_ratios, specs, s.trials, common.seed, s.threads, s.max_calls)));
  }
  return tables;
}

std::vector<Table> simulate_table2(const Common& common, const SimulateFlags& s) {
  const auto ratios = s.ratios.empty() ? table2_ratios() : s.ratios;
  const auto settings = table2_settings();
  const std::uint64_t trials = s.trials_opt->count() ? s.trials : 100'000;
  return {table2_report(run_table2(ratios, settings, trials, common.seed, s.lower_bound, s.threads))};
}

std::vector<Table> simulate_surrogate(const Common& common, const ModelFlags& m,
                                      const SimulateFlags& s, Streams io) {
  LabeledDataset dataset;
  std::string source;
  if (m.dataset_opt->count() > 0) {
    dataset = load_dataset(m, common.seed, io.err).dataset;
    source = m.dataset;
  } else {
    SyntheticCdrOptions synth;
    synth.seed = common.seed;
    const auto records = synthesize_cdr(synth);
    dataset = label_by_duration_rule(records, LabelingRule{m.threshold, m.fraction, common.seed});
    source = "synthetic stand-in (exponential means 30.23 s / 129.64 s)";
  }
  std::vector<Scenario> scenarios;
  if (s.scenario == "all") {
    scenarios = {Scenario::ModelData, Scenario::DataModel, Scenario::DataData};
  } else {
    const auto sc = parse_scenario(s.scenario);
    if (!sc) throw InputError("unknown scenario '" + s.scenario + "'");
    scenarios = {*sc};
  }
  const auto specs = s.specs.empty() ? table3_accuracies() : s.specs;
  const std::uint64_t trials = s.trials_opt->count() ? s.trials : 100'000;
  std::vector<SurrogateRow> rows;
  std::uint64_t k = 0;
  for (auto sc : scenarios) {
    auto part = surrogate_experiment(dataset, sc, specs, trials, stream_seed(common.seed, k++),
                                     s.threads, s.max_calls);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  Table t = surrogate_report(rows);
  const auto models = dataset_to_models(dataset);
  t.meta = {{"dataset", source},
            {"spit_calls", std::to_string(dataset.spit.size())},
            {"nonspit_calls", std::to_string(dataset.nonspit.size())},
            {"lambda0", format_double(models.fit.model.spit_rate())},
            {"lambda1", format_double(models.fit.model.nonspit_rate())}};
  return {t};
}

void cmd_simulate(const Common& common, const ModelFlags& m, const SimulateFlags& s, Streams io) {
  if (s.max_calls < 1) throw InputError("--max-calls must be >= 1");
  if (s.table != "surrogate" && m.dataset_opt->count() > 0) {
    throw InputError("--dataset only applies to --table surrogate");
  }
  std::vector<Table> tables;
  if (s.table == "1") {
    tables = simulate_table1(common, s);
  } else if (s.table == "2") {
    tables = simulate_table2(common, s);
  } else {
    tables = simulate_surrogate(common, m, s, io);
  }
  for (auto& t : tables) {
    t.meta.insert(t.meta.begin(), {{"spitfilter", kVersion}, {"seed", std::to_string(common.seed)}});
  }
  emit_tables(common, s, tables, io);
}

// --- filter -----------------------------------------------------------------

struct FilterFlags {
  std::string input = "-";
  double alpha = 0.001;
  double beta = 0.001;
  std::string snapshot;
  std::string resume;
  std::string events;
};

void cmd_filter(const Common& common, const ModelFlags& m, const FilterFlags& f, Streams io) {
  const ExponentialPair model = resolve_model(m, common.seed, io.err);
  const AccuracySpec spec(f.alpha, f.beta);
  FilterEngine engine(model, spec);
  if (!f.resume.empty()) {
    auto in = open_input(f.resume);
    engine.restore_snapshot(in);
  }

  ParseResult parsed;
  if (f.input == "-") {
    parsed = parse_cdr(io.in);
  } else {
    auto in = open_input(f.input);
    parsed = parse_cdr(in);
  }
  for (const auto& e : parsed.errors) {
    io.err << f.input << ":" << e.line << ": skipped row: " << e.message << '\n';
  }

  std::unique_ptr<std::ofstream> events;
  if (!f.events.empty()) {
    events = std::make_unique<std::ofstream>(open_output(f.events, true));
    *events << header_line("filter", common.seed) << '\n';
  }

  io.out << header_line("filter", common.seed) << '\n';
  for (const auto& record : parsed.records) {
    const SourceId id(record.source_id);
    const EngineAction action = engine.on_call_request(id);
    if (events) {
      *events << format_event({record.timestamp, record.source_id, EventKind::Request, action, 0.0})
              << '\n';
    }
    if (action == EngineAction::Accept) {
      engine.on_call_completed(id, record.duration);
      if (events) {
        *events << format_event({record.timestamp, record.source_id, EventKind::Complete, action,
                                 record.duration})
                << '\n';
      }
    }
    io.out << record.timestamp << ',' << record.source_id << ',' << to_string(action) << ','
           << to_string(*engine.status(id)) << '\n';
  }

  if (!f.snapshot.empty()) {
    auto out = open_output(f.snapshot);
    engine.write_snapshot(out);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"Sequential SPIT detection: fit, plan, simulate and filter", "spitfilter"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  ModelFlags fit_model;
  ModelFlags plan_model;
  ModelFlags sim_model;
  ModelFlags filter_model;
  PlanFlags plan;
  SimulateFlags sim;
  FilterFlags filter;

  auto* fit = app.add_subcommand("fit", "Label a CDR file and fit exponential duration models");
  add_common(*fit, common);
  fit_model.dataset_opt = fit->add_option("--dataset", fit_model.dataset, "CDR CSV file")->required();
  add_dataset_flags(*fit, fit_model);

  auto* plan_cmd = app.add_subcommand("plan", "Choose loss-optimal alpha and beta");
  add_common(*plan_cmd, common);
  add_model_flags(*plan_cmd, plan_model);
  plan_cmd->add_option("--c0", plan.cost.c0, "Cost of accepting a SPIT call")->default_val(1.0);
  plan_cmd->add_option("--c1", plan.cost.c1, "Cost of blocking a NON-SPIT call")->default_val(1.0);
  plan_cmd->add_option("--n-calls", plan.cost.n_calls, "Horizon N (calls per source)")
      ->default_val(500);
  plan_cmd->add_option("--prior-spit", plan.cost.prior_spit, "Prior probability of SPIT")
      ->default_val(0.5);
  plan_cmd->add_option("--lower-bound", plan.lower_bound, "Lower bound on alpha and beta")
      ->default_val(1e-4);

  auto* simulate = app.add_subcommand("simulate", "Run the experiment tables");
  add_common(*simulate, common);
  simulate->add_option("--table", sim.table, "1, 2 or surrogate")
      ->check(CLI::IsMember({"1", "2", "surrogate"}))
      ->default_val("1");
  sim.trials_opt = simulate->add_option("--trials", sim.trials, "Trials per cell");
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = hardware)")->default_val(1);
  simulate->add_option("--out", sim.out_prefix, "Write PREFIX.<table>.csv and .json");
  simulate->add_option("--ratios", sim.ratios, "lambda1/lambda0 rows")->delimiter(',');
  simulate->add_option("--mc-ratios", sim.mc_ratios, "Monte Carlo ratios for table 1")
      ->delimiter(',');
  simulate->add_option("--specs", sim.specs, "alpha = beta settings")->delimiter(',');
  simulate->add_option("--scenario", sim.scenario,
                       "model-model, model-data, data-model, data-data or all")
      ->default_val("all");
  simulate->add_option("--max-calls", sim.max_calls, "Per-trial cap on observations")
      ->default_val(1'000'000);
  simulate->add_option("--lower-bound", sim.lower_bound, "Optimizer lower bound (table 2)")
      ->default_val(1e-4);
  sim_model.dataset_opt =
      simulate->add_option("--dataset", sim_model.dataset, "CDR CSV file for the surrogate table");
  add_dataset_flags(*simulate, sim_model);

  auto* filter_cmd = app.add_subcommand("filter", "Run the outbound filter over a CDR stream");
  add_common(*filter_cmd, common);
  add_model_flags(*filter_cmd, filter_model);
  filter_cmd->add_option("--input", filter.input, "CDR CSV file, '-' for standard input")
      ->default_val("-");
  filter_cmd->add_option("--alpha", filter.alpha, "P(decide NON-SPIT | SPIT)")->default_val(0.001);
  filter_cmd->add_option("--beta", filter.beta, "P(decide SPIT | NON-SPIT)")->default_val(0.001);
  filter_cmd->add_option("--snapshot", filter.snapshot, "Write the final engine snapshot here");
  filter_cmd->add_option("--resume", filter.resume, "Start from this snapshot");
  filter_cmd->add_option("--events", filter.events, "Append REQUEST/COMPLETE events to this file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, io.out, io.err) == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (fit->parsed()) {
      cmd_fit(common, fit_model, io);
    } else if (plan_cmd->parsed()) {
      cmd_plan(common, plan_model, plan, io);
    } else if (simulate->parsed()) {
      cmd_simulate(common, sim_model, sim, io);
    } else if (filter_cmd->parsed()) {
      cmd_filter(common, filter_model, filter, io);
    }
  } catch (const InputError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    io.err << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
  io.out.flush();
  return kExitOk;
}

}  // namespace spitfilter::cli
