// SPDX-License-Identifier: Apache-2.0
#pragma once

// Call-detail records: CSV parsing, the duration-based SPIT labeling rule,
// surrogate model fitting and a synthetic stand-in generator.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spitfilter/models.hpp"

namespace spitfilter {

struct CallRecord {
  std::string source_id;
  std::int64_t timestamp = 0;  ///< seconds since epoch
  double duration = 0.0;       ///< seconds
  std::optional<Hypothesis> label;

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

struct RowError {
  std::size_t line = 0;  ///< 1-based, header is line 1
  std::string message;
};

struct ParseResult {
  std::vector<CallRecord> records;  ///< valid rows, file order
  std::vector<RowError> errors;     ///< skipped rows
  bool has_label_column = false;
};

/// Reads `source_id,timestamp,duration[,label]` (columns found by header
/// name, any order). Bad rows are skipped and reported. Throws FormatError
/// when a required column is missing, or when a label column is present but
/// some rows leave it empty (explicit and rule labels cannot be mixed).
ParseResult parse_cdr(std::istream& in);

void write_cdr(std::ostream& out, std::span<const CallRecord> records, bool with_labels);

struct LabelingRule {
  double threshold_s = 80.0;
  double fraction = 0.20;
  std::uint64_t seed = 1;
};

struct LabeledDataset {
  std::vector<CallRecord> spit;
  std::vector<CallRecord> nonspit;
  /// "explicit" or "duration-rule".
  std::string rule;
  std::optional<LabelingRule> rule_params;

  std::vector<double> durations(Hypothesis h) const;
};

/// Of the calls shorter than threshold_s, floor(fraction * count) chosen
/// uniformly without replacement (seeded) become SPIT; everything else is
/// NON-SPIT. Pools keep input order. Throws LabelingError when either pool
/// ends up empty, ParameterError on bad rule parameters, and LabelingError
/// if the records already carry labels.
LabeledDataset label_by_duration_rule(std::span<const CallRecord> records,
                                      const LabelingRule& rule);

/// Partition by the records' own labels; every record must have one.
LabeledDataset label_explicit(std::span<const CallRecord> records);

struct DatasetModels {
  SurrogateFit fit;
  KlInfo kl;
};

/// Fits lambda0 to the SPIT durations and lambda1 to the NON-SPIT durations.
DatasetModels dataset_to_models(const LabeledDataset& dataset);

/// Structured manifest: class counts, fitted rates and means, KL numbers,
/// labeling rule and seed. JSON text.
std::string dataset_manifest_json(const LabeledDataset& dataset, const DatasetModels& models);

struct SyntheticCdrOptions {
  double spit_mean_s = 30.23;
  double nonspit_mean_s = 129.64;
  std::size_t spit_calls = 20000;
  std::size_t nonspit_calls = 80000;
  std::size_t sources = 100;
  bool with_labels = false;
  std::uint64_t seed = 1;
};

/// Stand-in CDR: exponential durations of the two classes, round-robin over
/// `sources` ids per class, interleaved in timestamp order.
std::vector<CallRecord> synthesize_cdr(const SyntheticCdrOptions& options);

}  // namespace spitfilter
