#include "cecc/ran_gnb.hpp"

#include <gtest/gtest.h>

#include <map>
#include <vector>

using namespace cecc;
using namespace cecc::ran;

namespace {
GnbConfig dddsu_880() {
  GnbConfig c;
  c.capacity_override_bps = 880e6;
  return c;
}

GnbConfig all_d(double tb_bits) {
  GnbConfig c;
  c.pattern = TddPattern::all_downlink();
  c.link.tb_size_bits = tb_bits;
  return c;
}
}  // namespace

TEST(Tdd, SlotKinds) {
  const auto p = TddPattern::dddsu();
  const LinkState l;
  EXPECT_EQ(slot_kind_at(p, l, SimTime(0)), SlotKind::D);
  EXPECT_EQ(slot_kind_at(p, l, SimTime(4200)), SlotKind::U);
  EXPECT_EQ(slot_kind_at(p, l, SimTime(3500)), SlotKind::S_dl);
  EXPECT_EQ(slot_kind_at(p, l, SimTime(3750)), SlotKind::S_guard);
  EXPECT_EQ(slot_kind_at(p, l, SimTime(3900)), SlotKind::S_ul);
  EXPECT_EQ(slot_kind_at(p, l, SimTime(9200)), SlotKind::U);
}

TEST(Tdd, ParseAndValidate) {
  EXPECT_EQ(TddPattern::parse("DDDSU").to_string(), "DDDSU");
  EXPECT_THROW(TddPattern::parse("DDXU"), std::invalid_argument);
  EXPECT_THROW(TddPattern::parse("DDDSU", SpecialSplit{10, 2, 3}), std::invalid_argument);
}

TEST(Capacity, Examples) {
  LinkState l;
  l.tb_size_bits = 1e6;
  EXPECT_NEAR(capacity(l, TddPattern::all_downlink()), 1e9, 1e-3);
  EXPECT_NEAR(capacity(l, TddPattern::dddsu()) / 1e6, 742.857, 1e-3);
  const auto c = dddsu_880().normalized();
  EXPECT_DOUBLE_EQ(c.capacity_bps(), 880e6);
  EXPECT_NEAR(capacity(c.link, c.pattern), 880e6, 1e-3);
}

TEST(Gnb, EnqueueAndLimit) {
  auto cfg = dddsu_880();
  cfg.per_queue_limit_bytes = 3000;
  Gnb<OpaquePacket> g(cfg);
  g.register_flow(1);
  g.register_flow(2);
  EXPECT_TRUE(g.enqueue(1, {1500, 0}, SimTime(0)));
  EXPECT_EQ(g.queued_bytes(1), 1500u);
  EXPECT_TRUE(g.enqueue(1, {1500, 0}, SimTime(0)));
  EXPECT_FALSE(g.enqueue(1, {1500, 0}, SimTime(0)));
  EXPECT_EQ(g.queued_bytes(1), 3000u);
  EXPECT_EQ(g.counters(1).dropped_packets, 1u);
  EXPECT_TRUE(g.enqueue(2, {100, 0}, SimTime(0)));
  EXPECT_EQ(g.queued_bytes(2), 100u);
  EXPECT_THROW(g.enqueue(9, {1, 0}, SimTime(0)), std::invalid_argument);
}

TEST(Gnb, SnapshotIncludesZeros) {
  Gnb<OpaquePacket> g(dddsu_880());
  for (FlowId f : {0u, 1u, 2u}) g.register_flow(f);
  for (const auto& [id, b] : g.snapshot_rbs()) EXPECT_EQ(b, 0u) << id;
  for (int i = 0; i < 3; ++i) g.enqueue(1, {1500, 0}, SimTime(0));
  const auto s = g.snapshot_rbs();
  EXPECT_EQ(s.at(0), 0u);
  EXPECT_EQ(s.at(1), 4500u);
  EXPECT_EQ(s.at(2), 0u);
  g.serve_slot(SimTime(1000));
  EXPECT_EQ(g.snapshot_rbs().at(1), 0u);
}

TEST(Gnb, WholeFrameDeliveredAtSlotEnd) {
  Gnb<OpaquePacket> g(all_d(1e6));
  g.register_flow(0);
  for (int i = 0; i < 50; ++i) g.enqueue(0, {1448, static_cast<std::uint64_t>(i)}, SimTime(10));
  const auto out = g.serve_slot(SimTime(1000));
  ASSERT_EQ(out.size(), 50u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].delivery_time, SimTime(2000));
    EXPECT_EQ(out[i].packet.tag, i);
  }
}

TEST(Gnb, RoundRobinSplitsBudget) {
  Gnb<OpaquePacket> g(all_d(10 * 1000 * 8.0));
  g.register_flow(0);
  g.register_flow(1);
  for (int i = 0; i < 10; ++i) {
    g.enqueue(0, {1000, 0}, SimTime(0));
    g.enqueue(1, {1000, 1}, SimTime(0));
  }
  std::map<FlowId, int> n;
  for (const auto& d : g.serve_slot(SimTime(1000))) ++n[d.flow_id];
  EXPECT_EQ(n[0], 5);
  EXPECT_EQ(n[1], 5);
  // the pointer persists, so the next slot starts where the last one stopped
  const auto next = g.serve_slot(SimTime(2000));
  ASSERT_FALSE(next.empty());
  EXPECT_EQ(next.size(), 10u);
}

TEST(Gnb, OnlyPacketsEnqueuedBeforeSlotStartAreEligible) {
  Gnb<OpaquePacket> g(all_d(1e6));
  g.register_flow(0);
  g.enqueue(0, {1000, 0}, SimTime(1000));
  EXPECT_TRUE(g.serve_slot(SimTime(1000)).empty());
  EXPECT_EQ(g.serve_slot(SimTime(2000)).size(), 1u);
}

TEST(Gnb, UplinkSlotsCarryNothing) {
  Gnb<OpaquePacket> g(dddsu_880());
  g.register_flow(0);
  g.enqueue(0, {1000, 0}, SimTime(0));
  EXPECT_TRUE(g.serve_slot(SimTime(4000)).empty());
  EXPECT_EQ(g.queued_bytes(0), 1000u);
}

TEST(Gnb, SpecialSlotDeliversAfterDownlinkSymbols) {
  Gnb<OpaquePacket> g(dddsu_880());
  g.register_flow(0);
  g.enqueue(0, {1000, 0}, SimTime(2500));
  const auto out = g.serve_slot(SimTime(3000));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].delivery_time, SimTime(3000 + 10 * 1000 / 14));
}

TEST(Gnb, DriverNeverDeliversDuringBlackout) {
  Engine e;
  Gnb<OpaquePacket> g(dddsu_880());
  g.register_flow(0);
  std::uint64_t delivered = 0;
  GnbDriver<OpaquePacket> d(e, g, [&](std::vector<Delivery<OpaquePacket>>&& b) {
    for (const auto& x : b) {
      delivered += x.packet.bytes;
      const auto k = slot_kind_at(g.config().pattern, g.config().link, SimTime(x.delivery_time.us - 1));
      EXPECT_TRUE(k == SlotKind::D || k == SlotKind::S_dl);
    }
  });
  RngStream rng(1, "arrivals");
  for (int i = 0; i < 2000; ++i) {
    const auto t = SimTime(static_cast<std::int64_t>(rng.uniform01() * 1e6));
    e.schedule(t, "arrive", [&g, &e] { g.enqueue(0, {1448, 0}, e.now()); });
  }
  d.start(SimTime::from_s(1.1));
  e.run_until(SimTime::from_s(1.1));
  EXPECT_EQ(delivered, 2000u * 1448u);
  EXPECT_EQ(d.delivery_events_in_blackout(), 0u);
}

TEST(Gnb, UplinkDeliveryRidesNextUplinkPortion) {
  const auto p = TddPattern::dddsu();
  const LinkState l;
  EXPECT_EQ(next_uplink_delivery(p, l, SimTime(0)), SimTime(4000));      // S_ul of slot 3
  EXPECT_EQ(next_uplink_delivery(p, l, SimTime(3900)), SimTime(5000));   // U slot
  EXPECT_EQ(next_uplink_delivery(p, l, SimTime(4100)), SimTime(9000));   // next period's S
}

TEST(DelayBounds, AllDownlinkSpreadWithinOneSlot) {
  const auto b = processing_delay_bounds(all_d(1e6), 10'000);
  EXPECT_LE(b.spread_us(), 1000);
}

TEST(DelayBounds, DddsuSingleTbSpreadCoversBlackout) {
  const auto b = processing_delay_bounds(dddsu_880(), 1448);
  EXPECT_GE(b.spread_us(), 1286);
}

TEST(DelayBounds, FrameBurstsPinned) {
  const auto cfg = dddsu_880();
  const std::uint64_t frame = 104'167;
  const std::vector<std::pair<std::int64_t, std::int64_t>> want{{814, 3000}, {1814, 4000}, {2814, 5000},
                                                                {3100, 6000}, {3814, 6000}, {5814, 8000}};
  for (std::size_t k = 0; k < want.size(); ++k) {
    const auto b = processing_delay_bounds(cfg, frame * (k + 1));
    EXPECT_EQ(b.min_us, want[k].first) << (k + 1) << " frames";
    EXPECT_EQ(b.max_us, want[k].second) << (k + 1) << " frames";
  }
  EXPECT_GT(processing_delay_bounds(cfg, frame).spread_us(), 0);
}

TEST(DelayBounds, PipelineDelayShiftsBounds) {
  auto cfg = dddsu_880();
  const auto base = processing_delay_bounds(cfg, 104'167);
  cfg.pipeline_delay_us = 3900;
  const auto shifted = processing_delay_bounds(cfg, 104'167);
  EXPECT_EQ(shifted.min_us, base.min_us + 3900);
  EXPECT_EQ(shifted.max_us, base.max_us + 3900);
}
