#include "cecc/upf_cecc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

using namespace cecc;
using namespace cecc::upf;
using cecc::transport::AckSegment;
using cecc::transport::Segment;

TEST(QueueDelay, WorkedExample) {
  EXPECT_NEAR(queue_delay_us(50'000, 30'000, 100'000, 880e6, 2), 3272.7, 1.0);
  EXPECT_DOUBLE_EQ(queue_delay_us(0, 0, 0, 880e6, 3), 0.0);
  EXPECT_THROW(queue_delay_us(1, 1, 1, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(queue_delay_us(1, 1, 1, 880e6, 0), std::invalid_argument);
}

TEST(QueueDelay, TotalIsSum) {
  DelayPrediction p;
  p.wired_d_us = 1000;
  p.queue_d_us = 3273;
  p.processing_d_us = 2000;
  p.total_us = p.wired_d_us + p.queue_d_us + p.processing_d_us;
  EXPECT_DOUBLE_EQ(p.total_us, 6273.0);
}

TEST(FlowMonitor, Traces) {
  std::map<FlowId, std::uint64_t> p{{0, 5}, {1, 2}, {2, 0}};
  flow_monitor(p, 1);
  EXPECT_EQ(p, (std::map<FlowId, std::uint64_t>{{0, 6}, {1, 0}, {2, 1}}));

  std::map<FlowId, std::uint64_t> one{{0, 0}};
  flow_monitor(one, 0);
  EXPECT_EQ(one.at(0), 0u);

  std::map<FlowId, std::uint64_t> q{{0, 0}, {1, 0}, {2, 3}};
  flow_monitor(q, 2);
  flow_monitor(q, 2);
  EXPECT_EQ(q, (std::map<FlowId, std::uint64_t>{{0, 2}, {1, 2}, {2, 0}}));
}

TEST(FlowSchedule, StubTrace) {
  const std::map<FlowId, double> base{{0, 3000}, {1, 4000}, {2, 6000}};
  const std::map<FlowId, std::uint64_t> prio{{0, 2}, {1, 1}, {2, 0}};
  const auto r = flow_schedule({0, 1, 2}, prio, 10'000, [&](FlowId id, std::size_t n) { return base.at(id) * n; });
  EXPECT_EQ(r.admitted, (std::vector<FlowId>{0, 1}));
  ASSERT_EQ(r.evicted.size(), 1u);
  EXPECT_EQ(r.evicted[0].flow_id, 2u);
  EXPECT_DOUBLE_EQ(r.evicted[0].predicted_total_us, 18'000);
  EXPECT_DOUBLE_EQ(r.final_prediction.at(0), 6000);
  EXPECT_DOUBLE_EQ(r.final_prediction.at(1), 8000);
}

TEST(FlowSchedule, AllWithinStandard) {
  const auto r = flow_schedule({3, 1}, {}, 10'000, [](FlowId, std::size_t) { return 500.0; });
  EXPECT_EQ(r.admitted, (std::vector<FlowId>{1, 3}));
  EXPECT_TRUE(r.evicted.empty());
}

TEST(FlowSchedule, LoneOverStandardIsEvicted) {
  const auto r = flow_schedule({4}, {{4, 9}}, 10'000, [](FlowId, std::size_t) { return 12'000.0; });
  EXPECT_TRUE(r.admitted.empty());
  ASSERT_EQ(r.evicted.size(), 1u);
  EXPECT_EQ(r.evicted[0].flow_id, 4u);
}

namespace {
struct Instance {
  std::vector<FlowId> flows;
  std::map<FlowId, std::uint64_t> prio;
  std::map<FlowId, double> base;
};

// plain re-statement of the eviction loop with a full sort per round
std::pair<std::set<FlowId>, std::vector<FlowId>> brute(const Instance& in, double standard) {
  std::vector<FlowId> set = in.flows;
  std::vector<FlowId> evicted;
  for (;;) {
    if (set.empty()) break;
    const double n = static_cast<double>(set.size());
    bool over = false;
    for (FlowId f : set) over |= in.base.at(f) * n > standard;
    if (!over) break;
    std::vector<FlowId> order = set;
    std::sort(order.begin(), order.end(), [&](FlowId a, FlowId b) {
      if (in.prio.at(a) != in.prio.at(b)) return in.prio.at(a) < in.prio.at(b);
      if (in.base.at(a) != in.base.at(b)) return in.base.at(a) > in.base.at(b);
      return a < b;
    });
    evicted.push_back(order.front());
    set.erase(std::find(set.begin(), set.end(), order.front()));
  }
  return {std::set<FlowId>(set.begin(), set.end()), evicted};
}
}  // namespace

TEST(FlowSchedule, MatchesBruteForceOnRandomInstances) {
  RngStream rng(2024, "alg1");
  for (int trial = 0; trial < 20; ++trial) {
    Instance in;
    const auto k = 1 + rng.next_u64() % 5;
    for (FlowId f = 0; f < k; ++f) {
      in.flows.push_back(f);
      in.prio[f] = rng.next_u64() % 4;
      in.base[f] = 500.0 + static_cast<double>(rng.next_u64() % 12) * 500.0;
    }
    const auto want = brute(in, 10'000);
    const auto got = flow_schedule(in.flows, in.prio, 10'000, [&](FlowId id, std::size_t n) { return in.base.at(id) * n; });
    EXPECT_EQ(std::set<FlowId>(got.admitted.begin(), got.admitted.end()), want.first) << "trial " << trial;
    std::vector<FlowId> ev;
    for (const auto& e : got.evicted) ev.push_back(e.flow_id);
    EXPECT_EQ(ev, want.second) << "trial " << trial;
    for (std::size_t i = 1; i < got.evicted.size(); ++i) EXPECT_LE(got.evicted[i - 1].priority, got.evicted[i].priority);
  }
}

TEST(SynthesizeAcks, Enumerations) {
  AckSegment real;
  real.flow_id = 7;
  real.rwnd_bytes = 5555;
  auto seqs = [](const std::vector<AckSegment>& v) {
    std::vector<std::uint64_t> s;
    for (const auto& a : v) s.push_back(a.cum_ack_seq);
    return s;
  };
  const auto a = synthesize_acks(10'000, 15'000, 1000, real);
  EXPECT_EQ(seqs(a), (std::vector<std::uint64_t>{11'000, 12'000, 13'000, 14'000, 15'000}));
  for (const auto& x : a) {
    EXPECT_EQ(x.flow_id, 7u);
    EXPECT_EQ(x.rwnd_bytes, 5555u);
  }
  EXPECT_EQ(seqs(synthesize_acks(10'000, 12'500, 1000, real)), (std::vector<std::uint64_t>{11'000, 12'000, 12'500}));
  EXPECT_TRUE(synthesize_acks(10'000, 10'000, 1000, real).empty());
  EXPECT_THROW(synthesize_acks(10'000, 9'000, 1000, real), std::invalid_argument);
}

TEST(ReleaseAcks, WindowPair) {
  AckSegment hi;
  hi.cum_ack_seq = 42;
  const auto p = release_acks(hi, 104'167);
  EXPECT_EQ(p.open.rwnd_bytes, 125'001u);
  EXPECT_EQ(p.close.rwnd_bytes, 0u);
  EXPECT_EQ(p.open.cum_ack_seq, 42u);
  EXPECT_EQ(p.close.cum_ack_seq, 42u);
}

TEST(TxLog, StrictBoundary) {
  TxLog log;
  log.append(SimTime(100), 1448);
  log.append(SimTime(101), 1448);
  log.append(SimTime(102), 1448);
  log.append(SimTime(103), 1448);
  EXPECT_EQ(log.bytes_after(SimTime(100)), 4344u);
  EXPECT_EQ(log.bytes_after(SimTime(103)), 0u);
  log.prune_through(SimTime(101));
  EXPECT_EQ(log.size(), 2u);
  EXPECT_THROW(log.append(SimTime(50), 1), std::logic_error);
}

TEST(FrameSizeEstimator, BootstrapThenObserved) {
  FrameSizeEstimator est(104'167, 2.0);
  EXPECT_EQ(est.estimate(), 104'167u);
  EXPECT_TRUE(est.observe(0, 50'000, SimTime(0)));
  EXPECT_FALSE(est.observe(0, 30'000, SimTime(10)));
  EXPECT_EQ(est.estimate(), 104'167u);
  EXPECT_TRUE(est.observe(1, 1000, SimTime(20'000)));
  EXPECT_EQ(est.estimate(), 80'000u);
  EXPECT_TRUE(est.observe(2, 1000, SimTime::from_s(5)));
  EXPECT_EQ(est.estimate(), 1000u);
}

namespace {
struct Harness {
  Engine engine;
  std::vector<Segment> to_gnb;
  std::vector<std::pair<SimTime, AckSegment>> to_server;
  std::unique_ptr<Upf> upf;

  explicit Harness(UpfConfig cfg = {}) {
    ran::GnbConfig g;
    g.capacity_override_bps = 880e6;
    upf = std::make_unique<Upf>(
        engine, cfg, g, [this](const Segment& s) { to_gnb.push_back(s); },
        [this](const AckSegment& a) { to_server.emplace_back(engine.now(), a); });
  }

  template <class F>
  void at(std::int64_t t, F&& f) {
    engine.schedule(SimTime(t), "test", std::forward<F>(f));
    engine.run_until(SimTime(t));
  }

  void segment(FlowId id, std::uint64_t seq, std::uint32_t len, std::uint64_t frame) {
    Segment s;
    s.flow_id = id;
    s.seq = seq;
    s.len_bytes = len;
    s.frame_index = frame;
    upf->on_downlink_segment(s);
  }

  void ack(FlowId id, std::uint64_t seq) {
    AckSegment a;
    a.flow_id = id;
    a.cum_ack_seq = seq;
    upf->on_uplink_ack(a);
  }

  void report(std::int64_t ts, std::int64_t rx, std::vector<signaling::RbsEntry> e = {}) {
    at(rx, [this, ts, rx, e] { upf->on_gnb_report(signaling::GnbReport{SimTime(ts), e}, SimTime(rx)); });
  }
};
}  // namespace

TEST(Upf, TxSizeCountsOnlyAfterReportEpoch) {
  Harness h;
  h.upf->register_flow(0, true, 104'167);
  h.report(10'000, 10'000);
  EXPECT_EQ(h.upf->tx_size_since_report(0), 0u);
  h.at(10'000, [&] { h.segment(0, 0, 1448, 0); });
  for (int i = 1; i <= 3; ++i) h.at(10'000 + i, [&, i] { h.segment(0, 1448u * i, 1448, 0); });
  EXPECT_EQ(h.upf->tx_size_since_report(0), 4344u);
  EXPECT_EQ(h.to_gnb.size(), 4u);
  EXPECT_EQ(h.to_gnb.back().upf_egress, SimTime(10'003));
  EXPECT_THROW(h.upf->tx_size_since_report(99), std::out_of_range);
}

TEST(Upf, StaleReportIgnored) {
  Harness h;
  h.upf->register_flow(0, true, 104'167);
  h.report(5'000, 6'000, {{0, 777}});
  bool accepted = true;
  h.at(6'500, [&] { accepted = h.upf->on_gnb_report(signaling::GnbReport{SimTime(5'000), {{0, 1}}}, SimTime(6'500)); });
  EXPECT_FALSE(accepted);
  EXPECT_EQ(h.upf->last_report()->rbs(0), 777u);
  EXPECT_DOUBLE_EQ(h.upf->wired_delay_estimate_us(), 1000.0);
  EXPECT_EQ(h.upf->cycles(), 1u);
}

TEST(Upf, PredictionNeedsReport) {
  Harness h;
  h.upf->register_flow(0, true, 104'167);
  EXPECT_THROW(h.upf->predict_delay(0, 1), std::logic_error);
  h.report(1'000, 2'000, {{0, 50'000}});
  const auto p = h.upf->predict_delay(0, 2);
  EXPECT_DOUBLE_EQ(p.wired_d_us, 1000.0);
  EXPECT_NEAR(p.queue_d_us, (50'000.0 + 104'167.0) * 8 / 440e6 * 1e6, 1e-6);
  EXPECT_DOUBLE_EQ(p.total_us, p.wired_d_us + p.queue_d_us + p.processing_d_us);
}

TEST(Upf, NoCachedAcksNoEmissions) {
  Harness h;
  h.upf->register_flow(0, true, 104'167);
  h.report(1'000, 2'000);
  EXPECT_EQ(h.upf->cycles(), 1u);
  EXPECT_TRUE(h.to_server.empty());
}

TEST(Upf, UngovernedAcksPassThrough) {
  Harness h(UpfConfig{.cecc_enabled = false});
  h.upf->register_flow(0, true, 104'167);
  h.at(10, [&] { h.ack(0, 1448); });
  ASSERT_EQ(h.to_server.size(), 1u);
  EXPECT_EQ(h.to_server[0].second.cum_ack_seq, 1448u);
  EXPECT_EQ(h.to_server[0].second.rwnd_bytes, transport::kNativeRwnd);
}

TEST(Upf, AdmissionReleasesSynthesizedAndPair) {
  Harness h;
  h.upf->register_flow(0, true, 104'167);
  h.upf->register_flow(1, true, 104'167);
  h.at(100, [&] {
    for (int i = 0; i < 3; ++i) h.segment(0, 1448u * i, 1448, 0);
    h.segment(1, 0, 1448, 0);
  });
  h.at(500, [&] {
    h.ack(0, 2896);
    h.ack(0, 1448);  // older, cached value keeps the highest
    h.ack(1, 1448);
  });
  EXPECT_TRUE(h.to_server.empty());
  h.report(1'000, 2'000);
  h.engine.run_until(SimTime(3'000));

  std::map<FlowId, std::vector<AckSegment>> per;
  for (const auto& [t, a] : h.to_server) per[a.flow_id].push_back(a);
  ASSERT_EQ(per[0].size(), 3u);
  EXPECT_EQ(per[0][0].cum_ack_seq, 1448u);
  EXPECT_TRUE(per[0][0].synthesized);
  EXPECT_EQ(per[0][1].cum_ack_seq, 2896u);
  EXPECT_EQ(per[0][1].rwnd_bytes, 125'001u);
  EXPECT_EQ(per[0][2].cum_ack_seq, 2896u);
  EXPECT_EQ(per[0][2].rwnd_bytes, 0u);
  ASSERT_EQ(per[1].size(), 2u);
  EXPECT_EQ(per[1][1].rwnd_bytes, 0u);

  for (FlowId f : {0u, 1u}) {
    const auto s = h.upf->stats(f);
    EXPECT_EQ(s.max_forwarded_ack, s.max_received_ack);
    EXPECT_EQ(s.ack_regressions, 0u);
    EXPECT_EQ(s.admissions, 1u);
    EXPECT_FALSE(s.has_unreleased);
  }
  EXPECT_EQ(h.upf->soundness_violations(), 0u);
}

TEST(Upf, EvictedFlowKeepsAcksForLaterCycle) {
  UpfConfig cfg;
  cfg.delay_standard_us = 8'000;
  Harness h(cfg);
  std::vector<DecisionRow> rows;
  h.upf->set_decision_sink([&](const DecisionRow& r) { rows.push_back(r); });
  for (FlowId f = 0; f < 5; ++f) h.upf->register_flow(f, true, 104'167);
  h.at(100, [&] {
    for (FlowId f = 0; f < 5; ++f) h.segment(f, 0, 1448, 0);
  });
  h.at(200, [&] {
    for (FlowId f = 0; f < 5; ++f) h.ack(f, 1448);
  });
  std::set<FlowId> released;
  std::size_t first_cycle_admitted = 0;
  for (int k = 0; k < 10; ++k) {
    const std::size_t before = rows.size();
    h.report(1'000 + 1000 * k, 2'000 + 1000 * k);
    std::size_t admitted = 0;
    for (std::size_t i = before; i < rows.size(); ++i) {
      if (!rows[i].admitted) continue;
      ++admitted;
      released.insert(rows[i].flow_id);
    }
    if (k == 0) first_cycle_admitted = admitted;
  }
  EXPECT_GE(first_cycle_admitted, 1u);
  EXPECT_LT(first_cycle_admitted, 5u);
  EXPECT_EQ(released.size(), 5u);
  EXPECT_EQ(h.upf->soundness_violations(), 0u);
  for (FlowId f = 0; f < 5; ++f) EXPECT_LE(h.upf->stats(f).max_wait_cycles, 5u);
}
