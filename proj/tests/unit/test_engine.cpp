// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spitfilter/engine.hpp"
#include "spitfilter/error.hpp"

namespace spitfilter {
namespace {

FilterEngine make_engine(double alpha = 0.05, double beta = 0.05) {
  return FilterEngine(ExponentialPair(1.0, 0.1), AccuracySpec(alpha, beta));
}

TEST(SourceId, Validation) {
  EXPECT_THROW(SourceId(""), InputError);
  EXPECT_THROW(SourceId("a,b"), InputError);
  EXPECT_THROW(SourceId("a\nb"), InputError);
  EXPECT_EQ(SourceId("alice").str(), "alice");
}

TEST(Engine, FreshSourceIsAcceptedAndRegistered) {
  auto e = make_engine();
  EXPECT_FALSE(e.status(SourceId("u")).has_value());
  EXPECT_EQ(e.on_call_request(SourceId("u")), EngineAction::Accept);
  EXPECT_EQ(e.status(SourceId("u")), Status::Observing);
  EXPECT_EQ(e.size(), 1u);
  EXPECT_EQ(e.slot(SourceId("u"))->accepted, 1u);
}

TEST(Engine, ShortCallsLeadToBlocking) {
  auto e = make_engine();
  const SourceId s("spammer");
  EXPECT_EQ(e.on_call_request(s), EngineAction::Accept);
  EXPECT_EQ(e.on_call_completed(s, 0.0), Verdict::Continue);
  EXPECT_EQ(e.on_call_request(s), EngineAction::Accept);
  EXPECT_EQ(e.on_call_completed(s, 0.0), Verdict::DecideSpit);
  EXPECT_EQ(e.on_call_request(s), EngineAction::Block);
  EXPECT_EQ(e.on_call_request(s), EngineAction::Block);
  const SourceSlot slot = *e.slot(s);
  EXPECT_EQ(slot.accepted, 2u);
  EXPECT_EQ(slot.blocked, 2u);
  EXPECT_EQ(slot.state.t, 2u);
}

TEST(Engine, NonSpitVerdictKeepsAccepting) {
  auto e = make_engine();
  const SourceId s("friend");
  e.on_call_request(s);
  EXPECT_EQ(e.on_call_completed(s, 100.0), Verdict::DecideNonSpit);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(e.on_call_request(s), EngineAction::Accept);
}

TEST(Engine, ProtocolErrors) {
  auto e = make_engine();
  EXPECT_THROW(e.on_call_completed(SourceId("ghost"), 1.0), ProtocolError);
  e.on_call_request(SourceId("a"));
  e.on_call_completed(SourceId("a"), 1.0);
  EXPECT_THROW(e.on_call_completed(SourceId("a"), 1.0), ProtocolError);
  e.on_call_request(SourceId("a"));
  EXPECT_THROW(e.on_call_completed(SourceId("a"), -1.0), RejectedInputError);
  // The rejected duration did not consume the outstanding call.
  EXPECT_NO_THROW(e.on_call_completed(SourceId("a"), 2.0));
}

TEST(Engine, LateCompletionAfterVerdictIsDiscarded) {
  auto e = make_engine();
  const SourceId s("x");
  e.on_call_request(s);
  e.on_call_request(s);
  e.on_call_request(s);
  e.on_call_completed(s, 0.0);
  EXPECT_EQ(e.on_call_completed(s, 0.0), Verdict::DecideSpit);
  const SourceSlot before = *e.slot(s);
  EXPECT_EQ(e.on_call_completed(s, 500.0), Verdict::DecideSpit);
  EXPECT_EQ(*e.slot(s), before);
}

TEST(Engine, ResetForgetsVerdict) {
  auto e = make_engine();
  const SourceId s("x");
  for (int i = 0; i < 2; ++i) {
    e.on_call_request(s);
    e.on_call_completed(s, 0.0);
  }
  ASSERT_EQ(e.status(s), Status::DecidedSpit);
  e.reset_source(s);
  EXPECT_FALSE(e.status(s).has_value());
  EXPECT_EQ(e.on_call_request(s), EngineAction::Accept);
  EXPECT_EQ(e.slot(s)->accepted, 1u);
  EXPECT_EQ(e.slot(s)->blocked, 0u);
}

TEST(Engine, SettleLoss) {
  auto e = make_engine();
  const SourceId spam("spam"), good("good");
  for (int i = 0; i < 2; ++i) {
    e.on_call_request(spam);
    e.on_call_completed(spam, 0.0);
  }
  e.on_call_request(spam);  // blocked
  e.on_call_request(good);
  e.on_call_completed(good, 0.0);
  e.on_call_request(good);
  e.on_call_completed(good, 0.0);  // wrongly decided SPIT
  e.on_call_request(good);         // blocked
  CostSpec cost;
  cost.c0 = 2.0;
  cost.c1 = 7.0;
  const auto ledger = e.settle_loss({{"spam", Hypothesis::Spit}, {"good", Hypothesis::NonSpit}}, cost);
  EXPECT_DOUBLE_EQ(ledger.realized_loss, 2.0 * 2 + 7.0 * 1);
  EXPECT_EQ(ledger.mistakes, 1u);
  ASSERT_EQ(ledger.per_source.size(), 2u);
  EXPECT_EQ(ledger.per_source[0].source, "good");
  EXPECT_TRUE(ledger.per_source[0].mistaken);
  EXPECT_THROW(e.settle_loss({{"spam", Hypothesis::Spit}}, cost), InputError);
}

TEST(Snapshot, RoundTrip) {
  auto e = make_engine(0.001, 0.001);
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    const SourceId s("src" + std::to_string(uniform_index(rng, 20)));
    if (e.on_call_request(s) == EngineAction::Accept) e.on_call_completed(s, draw_exponential(rng, 0.3));
  }
  std::ostringstream first;
  e.write_snapshot(first);
  auto f = make_engine(0.001, 0.001);
  std::istringstream in(first.str());
  f.restore_snapshot(in);
  EXPECT_EQ(e.slots(), f.slots());
  std::ostringstream second;
  f.write_snapshot(second);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(first.str().rfind("#spitfilter-snapshot,1\n", 0), 0u);
}

TEST(Snapshot, RejectsVersionMismatchAndGarbage) {
  auto e = make_engine();
  std::istringstream v2("#spitfilter-snapshot,2\n");
  EXPECT_THROW(e.restore_snapshot(v2), FormatError);
  std::istringstream empty("");
  EXPECT_THROW(e.restore_snapshot(empty), FormatError);
  std::istringstream bad_status("#spitfilter-snapshot,1\na,0.5,1,MAYBE,1,0\n");
  EXPECT_THROW(e.restore_snapshot(bad_status), FormatError);
  std::istringstream bad_number("#spitfilter-snapshot,1\na,zz,1,OBSERVING,1,0\n");
  EXPECT_THROW(e.restore_snapshot(bad_number), FormatError);
  std::istringstream ok("#spitfilter-snapshot,1\na,-0.5,1,OBSERVING,1,0\n");
  EXPECT_NO_THROW(e.restore_snapshot(ok));
  EXPECT_EQ(e.slot(SourceId("a"))->state.log_lambda, -0.5);
}

TEST(Events, FormatParseRoundTrip) {
  const EngineEvent req{1700000000, "alice", EventKind::Request, EngineAction::Block, 0.0};
  EXPECT_EQ(format_event(req), "1700000000,alice,REQUEST,BLOCK");
  const EngineEvent back = parse_event(format_event(req));
  EXPECT_EQ(back.source, "alice");
  EXPECT_EQ(back.action, EngineAction::Block);
  const EngineEvent done{5, "b", EventKind::Complete, EngineAction::Accept, 0.1};
  EXPECT_EQ(parse_event(format_event(done)).duration, 0.1);
  EXPECT_THROW(parse_event("1,a,WHAT,1"), FormatError);
  EXPECT_THROW(parse_event("x,a,COMPLETE,1"), FormatError);
  EXPECT_EQ(format_double(0.1), "0.1");
}

// Random interleavings; the accounting identity is rebuilt from the event
// log alone: counts per action, and the SPRT state by replaying the
// completion durations in order.
TEST(EngineFuzz, AccountingMatchesEventLog) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const ExponentialPair model(1.0, 0.3);
    const AccuracySpec spec(0.01, 0.01);
    FilterEngine e(model, spec);
    std::vector<EngineEvent> log;
    std::map<std::string, int> outstanding;
    for (int step = 0; step < 2000; ++step) {
      const std::string id = "s" + std::to_string(uniform_index(rng, 15));
      const double rate = (id.size() % 2) ? 1.0 : 0.3;
      if (outstanding[id] > 0 && uniform_index(rng, 2) == 0) {
        const double d = draw_exponential(rng, rate);
        e.on_call_completed(SourceId(id), d);
        --outstanding[id];
        log.push_back({step, id, EventKind::Complete, EngineAction::Accept, d});
      } else {
        const EngineAction a = e.on_call_request(SourceId(id));
        if (a == EngineAction::Accept) ++outstanding[id];
        log.push_back({step, id, EventKind::Request, a, 0.0});
      }
    }
    std::map<std::string, SourceSlot> rebuilt;
    std::map<std::string, std::vector<double>> durations;
    for (const auto& line : log) {
      const EngineEvent ev = parse_event(format_event(line));
      auto& slot = rebuilt[ev.source];
      if (ev.kind == EventKind::Request) {
        (ev.action == EngineAction::Accept ? slot.accepted : slot.blocked)++;
      } else {
        durations[ev.source].push_back(ev.duration);
      }
    }
    for (auto& [id, slot] : rebuilt) {
      const ReplayResult r = replay(durations[id], model, spec);
      slot.state.t = r.stopping_time;
      slot.state.log_lambda = r.log_lambda;
      slot.state.status = r.verdict == Verdict::DecideSpit      ? Status::DecidedSpit
                          : r.verdict == Verdict::DecideNonSpit ? Status::DecidedNonSpit
                                                                : Status::Observing;
    }
    const auto slots = e.slots();
    ASSERT_EQ(slots.size(), rebuilt.size());
    for (const auto& [id, slot] : slots) {
      EXPECT_EQ(slot, rebuilt[id]) << "seed " << seed << " source " << id;
      // Nothing is blocked before a SPIT verdict exists.
      if (slot.state.status != Status::DecidedSpit) {
        EXPECT_EQ(slot.blocked, 0u);
      }
    }
  }
}

TEST(EngineConcurrency, ParallelSourcesMatchSequential) {
  const ExponentialPair model(1.0, 0.3);
  const AccuracySpec spec(0.001, 0.001);
  const auto drive = [&](FilterEngine& e, int worker) {
    Rng rng(stream_seed(99, static_cast<std::uint64_t>(worker)));
    for (int i = 0; i < 5000; ++i) {
      const SourceId s("w" + std::to_string(worker) + "-" + std::to_string(uniform_index(rng, 50)));
      if (e.on_call_request(s) == EngineAction::Accept) e.on_call_completed(s, draw_exponential(rng, 0.5));
    }
  };
  FilterEngine sequential(model, spec);
  for (int w = 0; w < 4; ++w) drive(sequential, w);
  FilterEngine parallel(model, spec);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w) pool.emplace_back([&, w] { drive(parallel, w); });
  }
  EXPECT_EQ(sequential.slots(), parallel.slots());
}

TEST(EngineConcurrency, SharedSourceKeepsCountsConsistent) {
  FilterEngine e(ExponentialPair(1.0, 0.999), AccuracySpec(1e-9, 1e-9));
  const SourceId s("shared");
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w) {
      pool.emplace_back([&] {
        for (int i = 0; i < 2000; ++i) {
          if (e.on_call_request(s) == EngineAction::Accept) e.on_call_completed(s, 1.0);
        }
      });
    }
  }
  const SourceSlot slot = *e.slot(s);
  EXPECT_EQ(slot.accepted + slot.blocked, 8000u);
  EXPECT_EQ(slot.state.t, 8000u);
}

}  // namespace
}  // namespace spitfilter
