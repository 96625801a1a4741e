#include "cecc/transport_cc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace cecc;
using namespace cecc::transport;

namespace {
constexpr std::uint32_t kFrame = 104'167;

struct Wire {
  std::vector<Segment> sent;
  Sender::Emit emit() {
    return [this](const Segment& s) { sent.push_back(s); };
  }
  std::uint64_t bytes() const {
    std::uint64_t b = 0;
    for (const auto& s : sent) b += s.len_bytes;
    return b;
  }
};

vr::VrFrame frame(std::uint64_t idx, std::uint32_t size = kFrame) { return vr::VrFrame{0, idx, size, SimTime(0)}; }

AckSegment ack(std::uint64_t seq, std::uint32_t rwnd = kNativeRwnd) { return AckSegment{0, seq, rwnd, SimTime(0), false}; }
}  // namespace

TEST(Cubic, WindowFunctionExamples) {
  const double wmax = 100.0 * kMss;
  const double k = std::cbrt(100.0 * (1 - kCubicBeta) / kCubicC);
  EXPECT_NEAR(cubic_window(k, wmax) / kMss, 100.0, 1e-9);
  EXPECT_NEAR(cubic_window(0, wmax) / kMss, 70.0, 1e-9);
  EXPECT_NEAR(cubic_window(k + 1, wmax) / kMss, 100.4, 1e-9);
}

TEST(SlowStart, ThreeRoundsToReachOneFrame) {
  EXPECT_EQ(slow_start_rounds_to_reach(kInitialWindow, kFrame), 3);
  EXPECT_EQ(kInitialWindow, 10u * 1448u);
  EXPECT_LT(40u * 1448u, kFrame);
  EXPECT_GE(80u * 1448u, kFrame);
}

TEST(Sender, UdpSendsWholeFrameImmediately) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::UdpBestEffort, w.emit());
  s.on_app_frame(frame(0));
  EXPECT_EQ(w.bytes(), kFrame);
  std::uint64_t next = 0;
  for (const auto& seg : w.sent) {
    EXPECT_EQ(seg.seq, next);
    EXPECT_LE(seg.len_bytes, kMss);
    EXPECT_GT(seg.len_bytes, 0u);
    EXPECT_EQ(seg.send_time, SimTime(0));
    next = seg.end_seq();
  }
}

TEST(Sender, CubicLargeWindowSendsWholeFrame) {
  Engine e;
  Wire w;
  SenderConfig c;
  c.initial_window = 200 * kMss;
  Sender s(e, 0, CcKind::CubicLike, w.emit(), c);
  s.on_app_frame(frame(0));
  EXPECT_EQ(w.bytes(), kFrame);
  EXPECT_EQ(s.buffered_bytes(), 0u);
}

TEST(Sender, CubicInitialWindowLimitsFirstFlight) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::CubicLike, w.emit());
  s.on_app_frame(frame(0));
  EXPECT_EQ(w.sent.size(), 10u);
  EXPECT_EQ(w.bytes(), 10u * kMss);
  EXPECT_EQ(s.buffered_bytes(), kFrame - 10u * kMss);
}

TEST(Sender, SlowStartDoublesPerWindow) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::CubicLike, w.emit());
  s.on_app_frame(frame(0));
  s.on_ack(ack(10 * kMss));
  EXPECT_EQ(s.cwnd_bytes(), 20u * kMss);
  EXPECT_EQ(s.bytes_in_flight(), 20u * kMss);
  EXPECT_TRUE(s.stabilized_at() == std::nullopt);
}

TEST(Sender, ZeroWindowStallsRegardlessOfCwnd) {
  Engine e;
  Wire w;
  SenderConfig c;
  c.initial_window = 100 * kMss;
  Sender s(e, 0, CcKind::CubicLike, w.emit(), c);
  s.on_app_frame(frame(0, 10 * kMss));
  s.on_ack(ack(10 * kMss, 0));
  const auto before = w.sent.size();
  s.on_app_frame(frame(1, 10 * kMss));
  EXPECT_EQ(w.sent.size(), before);
  EXPECT_EQ(s.zero_window_violations(), 0u);
  s.on_ack(ack(10 * kMss, 1 << 20));
  EXPECT_EQ(w.sent.size(), before + 10);
}

TEST(Sender, RwndBoundsInFlight) {
  Engine e;
  Wire w;
  SenderConfig c;
  c.initial_window = 100 * kMss;
  Sender s(e, 0, CcKind::CubicLike, w.emit(), c);
  s.on_app_frame(frame(0, 2 * kMss));
  s.on_ack(ack(2 * kMss, 3 * kMss));
  s.on_app_frame(frame(1, 10 * kMss));
  EXPECT_EQ(s.bytes_in_flight(), 3u * kMss);
}

TEST(Sender, TripleDupAckEntersFastRecovery) {
  Engine e;
  Wire w;
  SenderConfig c;
  c.initial_window = 100 * kMss;
  Sender s(e, 0, CcKind::CubicLike, w.emit(), c);
  s.on_app_frame(frame(0, 100 * kMss));
  s.on_ack(ack(10 * kMss));
  const auto cwnd = s.cwnd_bytes();
  const auto before = w.sent.size();
  s.on_ack(ack(10 * kMss));
  s.on_ack(ack(10 * kMss));
  EXPECT_EQ(w.sent.size(), before);
  s.on_ack(ack(10 * kMss));
  EXPECT_EQ(s.ssthresh_bytes(), static_cast<std::uint64_t>(cwnd * kCubicBeta));
  ASSERT_EQ(w.sent.size(), before + 1);
  EXPECT_TRUE(w.sent.back().retransmission);
  EXPECT_EQ(w.sent.back().seq, 10u * kMss);
}

TEST(Sender, StaleAcksIgnored) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::CubicLike, w.emit());
  s.on_app_frame(frame(0));
  s.on_ack(ack(5 * kMss));
  s.on_ack(ack(2 * kMss));
  EXPECT_EQ(s.snd_una(), 5u * kMss);
  s.on_ack(ack(1u << 30));
  EXPECT_EQ(s.snd_una(), 5u * kMss);
}

TEST(Sender, SegmentsNeverCrossFrames) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::UdpBestEffort, w.emit());
  s.on_app_frame(frame(0, 2000));
  s.on_app_frame(frame(1, 2000));
  ASSERT_EQ(w.sent.size(), 4u);
  EXPECT_EQ(w.sent[1].len_bytes, 2000u - kMss);
  EXPECT_EQ(w.sent[2].frame_index, 1u);
  EXPECT_EQ(w.sent[2].seq, 2000u);
}

TEST(Bbr, StartupPacesAtGainTimesInitialEstimate) {
  Engine e;
  Wire w;
  Sender s(e, 0, CcKind::BbrLike, w.emit());
  const double initial = kInitialWindow * 8.0 / 0.010;
  EXPECT_NEAR(s.pacing_rate_bps(), kBbrStartupGain * initial, 1e-6);
  EXPECT_FALSE(s.bbr_steady());
}

TEST(Bbr, SteadyPacingSpreadsFrame) {
  Engine e;
  Wire w;
  SenderConfig c;
  c.initial_window = 1 << 20;
  Sender s(e, 0, CcKind::BbrLike, w.emit(), c);
  s.set_bbr_steady_for_test(50e6);
  s.on_app_frame(frame(0));
  e.run_until(SimTime::from_s(0.1));
  ASSERT_EQ(w.bytes(), kFrame);
  const double span_ms = (w.sent.back().send_time - w.sent.front().send_time).ms();
  // 104,167 B at 50 Mbps is 16.7 ms; the last segment leaves one segment-time early
  EXPECT_NEAR(span_ms, kFrame * 8.0 / 50e6 * 1e3, 0.3);
  for (std::size_t i = 1; i < w.sent.size(); ++i) EXPECT_GT(w.sent[i].send_time, w.sent[i - 1].send_time);
}

TEST(FrameDelay, InstantSendGivesEqualDelays) {
  const auto d = record_frame_delivery(0, 0, SimTime(100), SimTime(5100), {{SimTime(100), SimTime(4000)}, {SimTime(100), SimTime(5100)}});
  EXPECT_EQ(d.frame_delay_us, 5000);
  EXPECT_EQ(d.network_delay_us, 5000);
  EXPECT_GE(d.frame_delay_us, d.network_delay_us);
}

TEST(FrameDelay, PacedFrameHasHighFrameDelay) {
  // 72 packets spread over 16 ms, each 3 ms in transit
  std::vector<SegmentDelivery> dl;
  for (int i = 0; i < 72; ++i) dl.push_back({SimTime(i * 222), SimTime(i * 222 + 3000)});
  const auto d = record_frame_delivery(0, 0, SimTime(0), dl.back().arrival, dl);
  EXPECT_EQ(d.network_delay_us, 3000);
  EXPECT_GT(d.frame_delay_us, 5 * d.network_delay_us);
}

TEST(Receiver, DelayedAckEveryTwoSegmentsOrTimer) {
  Engine e;
  std::vector<AckSegment> acks;
  std::vector<DelaySample> frames;
  Receiver r(e, 0, ReceiverConfig{}, [&](const AckSegment& a) { acks.push_back(a); }, [&](const DelaySample& d) { frames.push_back(d); },
             nullptr);
  auto seg = [](std::uint64_t seq, std::uint32_t len) {
    Segment s;
    s.seq = seq;
    s.len_bytes = len;
    s.frame_start_seq = 0;
    s.frame_bytes = 3000;
    return s;
  };
  e.schedule(SimTime(10), "a", [&] { r.on_segment(seg(0, 1000)); });
  e.schedule(SimTime(20), "b", [&] { r.on_segment(seg(1000, 1000)); });
  e.schedule(SimTime(30), "c", [&] { r.on_segment(seg(2000, 1000)); });
  e.run_until(SimTime(5000));
  ASSERT_EQ(acks.size(), 2u);
  EXPECT_EQ(acks[0].cum_ack_seq, 2000u);
  EXPECT_EQ(acks[0].ts, SimTime(20));
  EXPECT_EQ(acks[1].cum_ack_seq, 3000u);
  EXPECT_EQ(acks[1].ts, SimTime(1030));
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].frame_delay_us, 30);
}

TEST(Receiver, OutOfOrderAcksImmediatelyAndReassembles) {
  Engine e;
  std::vector<AckSegment> acks;
  Receiver r(e, 0, ReceiverConfig{}, [&](const AckSegment& a) { acks.push_back(a); }, nullptr, nullptr);
  Segment a;
  a.seq = 1000;
  a.len_bytes = 1000;
  a.frame_bytes = 2000;
  r.on_segment(a);
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].cum_ack_seq, 0u);
  Segment b = a;
  b.seq = 0;
  r.on_segment(b);
  EXPECT_EQ(r.rcv_nxt(), 2000u);
  EXPECT_EQ(acks.back().cum_ack_seq, 2000u);
}

TEST(Loopback, LargeWindowCubicFrameDelayMatchesNetworkDelay) {
  Engine e;
  std::vector<DelaySample> frames;
  std::unique_ptr<Receiver> rx;
  std::unique_ptr<Sender> tx;
  SenderConfig c;
  c.initial_window = 200 * kMss;
  tx = std::make_unique<Sender>(e, 0, CcKind::CubicLike, [&](const Segment& s) {
    e.schedule_in(SimTime(4000), "fwd", [&, s] { rx->on_segment(s); });
  }, c);
  rx = std::make_unique<Receiver>(e, 0, ReceiverConfig{}, [&](const AckSegment& a) {
    e.schedule_in(SimTime(4000), "rev", [&, a] { tx->on_ack(a); });
  }, [&](const DelaySample& d) { frames.push_back(d); }, nullptr);
  for (int i = 0; i < 20; ++i)
    e.schedule(SimTime(i * 16'667), "frame", [&, i] { tx->on_app_frame(vr::VrFrame{0, static_cast<std::uint64_t>(i), kFrame, e.now()}); });
  e.run_until(SimTime::from_s(1));
  ASSERT_EQ(frames.size(), 20u);
  for (const auto& d : frames) {
    EXPECT_EQ(d.frame_delay_us, d.network_delay_us);
    EXPECT_EQ(d.network_delay_us, 4000);
  }
}
