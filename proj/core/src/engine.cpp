// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/engine.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "spitfilter/error.hpp"
#include "text.hpp"

namespace spitfilter {

namespace {

constexpr std::string_view kSnapshotMagic = "#spitfilter-snapshot";

std::optional<Status> parse_status(std::string_view s) {
  if (s == "OBSERVING") return Status::Observing;
  if (s == "SPIT") return Status::DecidedSpit;
  if (s == "NONSPIT") return Status::DecidedNonSpit;
  return std::nullopt;
}

}  // namespace

SourceId::SourceId(std::string id) : id_(std::move(id)) {
  if (id_.empty()) throw InputError("source id must not be empty");
  if (id_.find_first_of(",\n\r") != std::string::npos) {
    throw InputError("source id '" + id_ + "' contains a delimiter character");
  }
}

std::string_view to_string(EngineAction a) noexcept {
  return a == EngineAction::Accept ? "ACCEPT" : "BLOCK";
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ec == std::errc{} ? ptr : buf.data());
}

FilterEngine::FilterEngine(ExponentialPair model, AccuracySpec spec)
    : model_(std::move(model)), spec_(std::move(spec)) {}

std::shared_ptr<FilterEngine::Entry> FilterEngine::entry_for(const SourceId& source) {
  if (auto entry = find(source)) return entry;
  std::unique_lock lock(map_mutex_);
  auto& entry = entries_[source.str()];
  if (!entry) entry = std::make_shared<Entry>();
  return entry;
}

std::shared_ptr<FilterEngine::Entry> FilterEngine::find(const SourceId& source) const {
  std::shared_lock lock(map_mutex_);
  const auto it = entries_.find(source.str());
  return it == entries_.end() ? nullptr : it->second;
}

EngineAction FilterEngine::on_call_request(const SourceId& source) {
  const auto entry = entry_for(source);
  std::lock_guard lock(entry->mutex);
  if (entry->slot.state.status == Status::DecidedSpit) {
    ++entry->slot.blocked;
    return EngineAction::Block;
  }
  ++entry->slot.accepted;
  ++entry->in_flight;
  return EngineAction::Accept;
}

Verdict FilterEngine::on_call_completed(const SourceId& source, double duration) {
  const auto entry = find(source);
  if (entry == nullptr) {
    throw ProtocolError("completion for unknown source '" + source.str() + "'");
  }
  std::lock_guard lock(entry->mutex);
  if (entry->in_flight == 0) {
    throw ProtocolError("completion for source '" + source.str() +
                        "' without an accepted call in flight");
  }
  if (!std::isfinite(duration) || duration < 0.0) {
    std::ostringstream msg;
    msg << "call duration must be finite and >= 0, got " << duration;
    throw RejectedInputError(msg.str());
  }
  --entry->in_flight;
  SourceSlot& slot = entry->slot;
  if (slot.state.status != Status::Observing) return verdict_of(slot.state.status);
  const SprtStep step = update(slot.state, spec_, model_.log_likelihood_ratio(duration));
  slot.state = step.state;
  return step.verdict;
}

std::optional<Status> FilterEngine::status(const SourceId& source) const {
  const auto entry = find(source);
  if (entry == nullptr) return std::nullopt;
  std::lock_guard lock(entry->mutex);
  return entry->slot.state.status;
}

std::optional<SourceSlot> FilterEngine::slot(const SourceId& source) const {
  const auto entry = find(source);
  if (entry == nullptr) return std::nullopt;
  std::lock_guard lock(entry->mutex);
  return entry->slot;
}

std::vector<std::pair<std::string, SourceSlot>> FilterEngine::slots() const {
  std::vector<std::pair<std::string, SourceSlot>> out;
  {
    std::shared_lock lock(map_mutex_);
    out.reserve(entries_.size());
    for (const auto& [id, entry] : entries_) {
      std::lock_guard slot_lock(entry->mutex);
      out.emplace_back(id, entry->slot);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::size_t FilterEngine::size() const {
  std::shared_lock lock(map_mutex_);
  return entries_.size();
}

void FilterEngine::reset_source(const SourceId& source) {
  std::unique_lock lock(map_mutex_);
  entries_.erase(source.str());
}

LossLedger FilterEngine::settle_loss(const std::map<std::string, Hypothesis>& truth,
                                     const CostSpec& cost) const {
  cost.validate();
  LossLedger ledger;
  for (const auto& [id, slot] : slots()) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw InputError("no ground truth for source '" + id + "'");
    SourceLoss row{id, it->second, 0.0, false};
    if (it->second == Hypothesis::Spit) {
      row.loss = cost.c0 * static_cast<double>(slot.accepted);
      row.mistaken = slot.state.status == Status::DecidedNonSpit;
    } else {
      row.loss = cost.c1 * static_cast<double>(slot.blocked);
      row.mistaken = slot.state.status == Status::DecidedSpit;
    }
    ledger.realized_loss += row.loss;
    ledger.mistakes += row.mistaken ? 1 : 0;
    ledger.per_source.push_back(std::move(row));
  }
  return ledger;
}

void FilterEngine::write_snapshot(std::ostream& out) const {
  out << kSnapshotMagic << ',' << kSnapshotVersion << '\n';
  for (const auto& [id, slot] : slots()) {
    out << id << ',' << format_double(slot.state.log_lambda) << ',' << slot.state.t << ','
        << to_string(slot.state.status) << ',' << slot.accepted << ',' << slot.blocked << '\n';
  }
}

void FilterEngine::restore_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("snapshot is empty (missing version header)");
  const auto header = text::split(line);
  if (header.size() != 2 || header[0] != kSnapshotMagic) {
    throw FormatError("not a snapshot file: bad header '" + line + "'");
  }
  const auto version = text::parse_number<int>(header[1]);
  if (!version || *version != kSnapshotVersion) {
    throw FormatError("snapshot version mismatch: file has '" + std::string(header[1]) +
                      "', expected " + std::to_string(kSnapshotVersion));
  }

  std::unordered_map<std::string, std::shared_ptr<Entry>> loaded;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line);
    const auto fail = [&](const std::string& why) {
      throw FormatError("snapshot line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 6) fail("expected 6 fields");
    const SourceId id{std::string(fields[0])};
    const auto log_lambda = text::parse_number<double>(fields[1]);
    const auto t = text::parse_number<std::uint64_t>(fields[2]);
    const auto status = parse_status(fields[3]);
    const auto accepted = text::parse_number<std::uint64_t>(fields[4]);
    const auto blocked = text::parse_number<std::uint64_t>(fields[5]);
    if (!log_lambda || !std::isfinite(*log_lambda)) fail("bad log_lambda");
    if (!t || !status || !accepted || !blocked) fail("bad counter or status");
    if (*accepted < *t) fail("accepted count below observation count");
    if (*blocked > 0 && *status != Status::DecidedSpit) fail("blocked calls on a non-SPIT source");
    auto entry = std::make_shared<Entry>();
    entry->slot = SourceSlot{SprtState{*log_lambda, *t, *status}, *accepted, *blocked};
    if (!loaded.emplace(id.str(), std::move(entry)).second) fail("duplicate source id");
  }

  std::unique_lock lock(map_mutex_);
  entries_ = std::move(loaded);
}

std::string format_event(const EngineEvent& event) {
  std::string line = std::to_string(event.timestamp) + ',' + event.source + ',';
  if (event.kind == EventKind::Request) {
    line += "REQUEST,";
    line += to_string(event.action);
  } else {
    line += "COMPLETE,";
    line += format_double(event.duration);
  }
  return line;
}

EngineEvent parse_event(std::string_view line) {
  const auto fields = text::split(line);
  if (fields.size() != 4) throw FormatError("event line needs 4 fields: '" + std::string(line) + "'");
  EngineEvent event;
  const auto ts = text::parse_number<std::int64_t>(fields[0]);
  if (!ts) throw FormatError("bad event timestamp '" + std::string(fields[0]) + "'");
  event.timestamp = *ts;
  event.source = std::string(fields[1]);
  if (fields[2] == "REQUEST") {
    event.kind = EventKind::Request;
    if (fields[3] == "ACCEPT") {
      event.action = EngineAction::Accept;
    } else if (fields[3] == "BLOCK") {
      event.action = EngineAction::Block;
    } else {
      throw FormatError("bad event action '" + std::string(fields[3]) + "'");
    }
  } else if (fields[2] == "COMPLETE") {
    event.kind = EventKind::Complete;
    const auto d = text::parse_number<double>(fields[3]);
    if (!d) throw FormatError("bad event duration '" + std::string(fields[3]) + "'");
    event.duration = *d;
  } else {
    throw FormatError("bad event kind '" + std::string(fields[2]) + "'");
  }
  return event;
}

}  // namespace spitfilter
