// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multi-source outbound filter. Each source gets its own SPRT; calls are
// accepted while the test runs, then either all blocked (SPIT) or all
// accepted (NON-SPIT). Requests and completions are separate events because
// the duration of a call is only known once an accepted call has ended.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spitfilter/models.hpp"
#include "spitfilter/planning.hpp"
#include "spitfilter/sprt.hpp"

namespace spitfilter {

/// Opaque source identifier (registered user, customer). Non-empty; may not
/// contain the record delimiters ',' '\n' '\r'.
class SourceId {
 public:
  explicit SourceId(std::string id);
  const std::string& str() const noexcept { return id_; }
  friend auto operator<=>(const SourceId&, const SourceId&) = default;

 private:
  std::string id_;
};

enum class EngineAction : std::uint8_t { Accept, Block };
std::string_view to_string(EngineAction a) noexcept;

struct SourceSlot {
  SprtState state;
  std::uint64_t accepted = 0;
  std::uint64_t blocked = 0;

  friend bool operator==(const SourceSlot&, const SourceSlot&) = default;
};

struct SourceLoss {
  std::string source;
  Hypothesis truth = Hypothesis::Spit;
  double loss = 0.0;
  bool mistaken = false;  ///< terminal verdict contradicts the truth
};

struct LossLedger {
  double realized_loss = 0.0;
  std::uint64_t mistakes = 0;
  std::vector<SourceLoss> per_source;  ///< sorted by source id
};

inline constexpr int kSnapshotVersion = 1;

class FilterEngine {
 public:
  FilterEngine(ExponentialPair model, AccuracySpec spec);

  FilterEngine(const FilterEngine&) = delete;
  FilterEngine& operator=(const FilterEngine&) = delete;

  const ExponentialPair& model() const noexcept { return model_; }
  const AccuracySpec& spec() const noexcept { return spec_; }

  /// Unknown sources are registered with a fresh test. Block iff the source
  /// was decided SPIT.
  EngineAction on_call_request(const SourceId& source);

  /// Feeds the duration of an accepted call into the source's test. Once the
  /// source is decided the observation is discarded and the standing verdict
  /// returned. Throws ProtocolError when there is no outstanding accepted
  /// call for the source, RejectedInputError for a bad duration.
  Verdict on_call_completed(const SourceId& source, double duration);

  /// Exported verdict flag, nullopt for unknown sources.
  std::optional<Status> status(const SourceId& source) const;
  std::optional<SourceSlot> slot(const SourceId& source) const;
  /// Consistent copy of every slot, sorted by source id.
  std::vector<std::pair<std::string, SourceSlot>> slots() const;
  std::size_t size() const;

  /// Operator action: forget the verdict and counters of one source.
  void reset_source(const SourceId& source);

  /// Realized loss: c0 per accepted call of a SPIT source, c1 per blocked
  /// call of a NON-SPIT source. Throws InputError when a source has no truth.
  LossLedger settle_loss(const std::map<std::string, Hypothesis>& truth,
                         const CostSpec& cost) const;

  /// Versioned header line followed by one record per source,
  /// `source_id,log_lambda,t,status,accepted,blocked`, sorted by id.
  void write_snapshot(std::ostream& out) const;
  /// Replaces all state with the snapshot's. Throws FormatError on a
  /// version mismatch or malformed record.
  void restore_snapshot(std::istream& in);

 private:
  struct Entry {
    mutable std::mutex mutex;
    SourceSlot slot;
    std::uint64_t in_flight = 0;  // accepted calls still awaiting completion
  };

  std::shared_ptr<Entry> entry_for(const SourceId& source);
  std::shared_ptr<Entry> find(const SourceId& source) const;

  ExponentialPair model_;
  AccuracySpec spec_;
  mutable std::shared_mutex map_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> entries_;
};

enum class EventKind : std::uint8_t { Request, Complete };

/// One line of the append-only event log:
/// `timestamp,source_id,REQUEST,ACCEPT|BLOCK` or `timestamp,source_id,COMPLETE,<duration>`.
struct EngineEvent {
  std::int64_t timestamp = 0;
  std::string source;
  EventKind kind = EventKind::Request;
  EngineAction action = EngineAction::Accept;
  double duration = 0.0;
};

std::string format_event(const EngineEvent& event);
/// Throws FormatError on a malformed line.
EngineEvent parse_event(std::string_view line);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace spitfilter
