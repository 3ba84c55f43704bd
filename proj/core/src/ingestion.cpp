// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spitfilter/engine.hpp"
#include "spitfilter/error.hpp"
#include "text.hpp"

namespace spitfilter {

namespace {

std::optional<Hypothesis> parse_label(std::string_view s) {
  const std::string u = text::upper(s);
  if (u == "SPIT") return Hypothesis::Spit;
  if (u == "NONSPIT") return Hypothesis::NonSpit;
  return std::nullopt;
}

std::string_view label_text(Hypothesis h) { return h == Hypothesis::Spit ? "SPIT" : "NONSPIT"; }

}  // namespace

ParseResult parse_cdr(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;

  // Header: first non-blank line. A UTF-8 BOM is tolerated.
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (text::trim(view).empty()) continue;
    for (auto f : text::split(view)) columns.emplace_back(f);
    break;
  }
  if (columns.empty()) throw FormatError("CDR input is empty (no header row)");

  const auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
  };
  const auto source_col = column("source_id");
  const auto time_col = column("timestamp");
  const auto duration_col = column("duration");
  const auto label_col = column("label");
  for (auto [col, name] : {std::pair{source_col, "source_id"}, std::pair{time_col, "timestamp"},
                           std::pair{duration_col, "duration"}}) {
    if (!col) throw FormatError(std::string("CDR header is missing required column '") + name + "'");
  }
  result.has_label_column = label_col.has_value();

  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line);
    const auto reject = [&](std::string message) {
      result.errors.push_back(RowError{line_no, std::move(message)});
    };
    if (fields.size() != columns.size()) {
      reject("expected " + std::to_string(columns.size()) + " fields, found " +
             std::to_string(fields.size()));
      continue;
    }
    CallRecord record;
    record.source_id = std::string(fields[*source_col]);
    if (record.source_id.empty()) {
      reject("empty source_id");
      continue;
    }
    const auto ts = text::parse_number<std::int64_t>(fields[*time_col]);
    if (!ts) {
      reject("timestamp '" + std::string(fields[*time_col]) + "' is not an integer");
      continue;
    }
    record.timestamp = *ts;
    const auto duration = text::parse_number<double>(fields[*duration_col]);
    if (!duration || !std::isfinite(*duration)) {
      reject("duration '" + std::string(fields[*duration_col]) + "' is not a number");
      continue;
    }
    if (*duration < 0.0) {
      reject("duration " + std::string(fields[*duration_col]) + " is negative");
      continue;
    }
    record.duration = *duration;
    if (label_col) {
      const auto raw = fields[*label_col];
      if (raw.empty()) {
        throw FormatError("line " + std::to_string(line_no) +
                          ": empty label in a labeled file (explicit and rule-based labels "
                          "cannot be mixed)");
      }
      record.label = parse_label(raw);
      if (!record.label) {
        reject("label '" + std::string(raw) + "' is neither SPIT nor NONSPIT");
        continue;
      }
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

void write_cdr(std::ostream& out, std::span<const CallRecord> records, bool with_labels) {
  out << "source_id,timestamp,duration" << (with_labels ? ",label" : "") << '\n';
  for (const auto& r : records) {
    out << r.source_id << ',' << r.timestamp << ',' << format_double(r.duration);
    if (with_labels) {
      if (!r.label) throw InputError("record of '" + r.source_id + "' has no label to write");
      out << ',' << label_text(*r.label);
    }
    out << '\n';
  }
}

std::vector<double> LabeledDataset::durations(Hypothesis h) const {
  const auto& pool = h == Hypothesis::Spit ? spit : nonspit;
  std::vector<double> out;
  out.reserve(pool.size());
  for (const auto& r : pool) out.push_back(r.duration);
  return out;
}

LabeledDataset label_by_duration_rule(std::span<const CallRecord> records,
                                      const LabelingRule& rule) {
  if (!(rule.threshold_s > 0.0) || !std::isfinite(rule.threshold_s)) {
    throw ParameterError("labeling threshold must be a positive number of seconds");
  }
  if (!(rule.fraction > 0.0 && rule.fraction <= 1.0)) {
    throw ParameterError("labeling fraction must lie in (0, 1]");
  }
  if (records.empty()) throw LabelingError("no records to label");
  if (std::any_of(records.begin(), records.end(), [](const auto& r) { return r.label; })) {
    throw LabelingError("records carry explicit labels; the duration rule cannot be applied");
  }

  std::vector<std::size_t> short_calls;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].duration < rule.threshold_s) short_calls.push_back(i);
  }
  if (short_calls.empty()) {
    std::ostringstream msg;
    msg << "no calls shorter than " << rule.threshold_s << " s; the SPIT pool would be empty";
    throw LabelingError(msg.str());
  }
  const auto take = static_cast<std::size_t>(
      std::floor(rule.fraction * static_cast<double>(short_calls.size())));

  // Partial Fisher-Yates over the short-call indices.
  Rng rng = make_stream(rule.seed, 0);
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, short_calls.size() - i));
    std::swap(short_calls[i], short_calls[j]);
  }
  std::vector<bool> is_spit(records.size(), false);
  for (std::size_t i = 0; i < take; ++i) is_spit[short_calls[i]] = true;

  LabeledDataset dataset;
  dataset.rule = "duration-rule";
  dataset.rule_params = rule;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (is_spit[i] ? dataset.spit : dataset.nonspit).push_back(records[i]);
  }
  if (dataset.spit.empty()) throw LabelingError("labeling selected no SPIT calls");
  if (dataset.nonspit.empty()) throw LabelingError("labeling left no NON-SPIT calls");
  return dataset;
}

LabeledDataset label_explicit(std::span<const CallRecord> records) {
  LabeledDataset dataset;
  dataset.rule = "explicit";
  for (const auto& r : records) {
    if (!r.label) throw LabelingError("record of '" + r.source_id + "' has no label");
    (*r.label == Hypothesis::Spit ? dataset.spit : dataset.nonspit).push_back(r);
  }
  if (dataset.spit.empty()) throw LabelingError("no records labeled SPIT");
  if (dataset.nonspit.empty()) throw LabelingError("no records labeled NONSPIT");
  return dataset;
}

DatasetModels dataset_to_models(const LabeledDataset& dataset) {
  const auto spit = dataset.durations(Hypothesis::Spit);
  const auto nonspit = dataset.durations(Hypothesis::NonSpit);
  SurrogateFit fit = build_surrogate_model(spit, nonspit);
  const KlInfo kl = kl_numbers(fit.model);
  return DatasetModels{std::move(fit), kl};
}

std::string dataset_manifest_json(const LabeledDataset& dataset, const DatasetModels& models) {
  nlohmann::ordered_json doc;
  doc["document"] = "dataset-manifest";
  doc["counts"] = {{"spit", dataset.spit.size()}, {"nonspit", dataset.nonspit.size()}};
  doc["fit"] = {
      {"lambda0", models.fit.spit.lambda_ml},
      {"lambda1", models.fit.nonspit.lambda_ml},
      {"mean_spit_s", models.fit.spit.mean},
      {"mean_nonspit_s", models.fit.nonspit.mean},
      {"rate_ratio", models.fit.model.rate_ratio()},
      {"role_inverted", models.fit.role_inverted},
  };
  doc["kl"] = {{"kappa0", models.kl.kappa0}, {"kappa1", models.kl.kappa1}};
  nlohmann::ordered_json labeling = {{"rule", dataset.rule}};
  if (dataset.rule_params) {
    labeling["threshold_s"] = dataset.rule_params->threshold_s;
    labeling["fraction"] = dataset.rule_params->fraction;
    labeling["seed"] = dataset.rule_params->seed;
  }
  doc["labeling"] = std::move(labeling);
  return doc.dump(2);
}

std::vector<CallRecord> synthesize_cdr(const SyntheticCdrOptions& options) {
  if (!(options.spit_mean_s > 0.0) || !(options.nonspit_mean_s > 0.0)) {
    throw ParameterError("synthetic means must be positive");
  }
  if (options.sources == 0) throw ParameterError("synthetic CDR needs at least one source");
  Rng rng = make_stream(options.seed, 0);
  std::vector<CallRecord> out;
  out.reserve(options.spit_calls + options.nonspit_calls);
  std::size_t spit_left = options.spit_calls;
  std::size_t nonspit_left = options.nonspit_calls;
  std::int64_t ts = 1'200'000'000;
  while (spit_left + nonspit_left > 0) {
    const bool spit = uniform_index(rng, spit_left + nonspit_left) < spit_left;
    const std::size_t k = spit ? options.spit_calls - spit_left : options.nonspit_calls - nonspit_left;
    CallRecord r;
    r.source_id = (spit ? "spit-" : "user-") + std::to_string(k % options.sources);
    r.timestamp = ts;
    ts += 37;
    r.duration = draw_exponential(rng, 1.0 / (spit ? options.spit_mean_s : options.nonspit_mean_s));
    if (options.with_labels) r.label = spit ? Hypothesis::Spit : Hypothesis::NonSpit;
    (spit ? spit_left : nonspit_left) -= 1;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spitfilter
