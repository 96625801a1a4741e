#pragma once

// Endpoint transport: a reliable byte stream with cumulative ACKs and receive
// window, pluggable congestion control (CUBIC-like, BBR-like, UDP passthrough),
// and per-frame frame-delay / network-delay instrumentation at the UE.

#include "cecc/sim_engine.hpp"
#include "cecc/vr_traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cecc::transport {

using vr::FlowId;

inline constexpr std::uint32_t kMss = 1448;
inline constexpr std::uint64_t kInitialWindow = 10ULL * kMss;
inline constexpr std::uint32_t kNativeRwnd = 1u << 20;
inline constexpr double kCubicC = 0.4;
inline constexpr double kCubicBeta = 0.7;
inline constexpr double kBbrStartupGain = 2.89;

enum class CcKind { UdpBestEffort, CubicLike, BbrLike };

inline const char* to_string(CcKind k) {
  switch (k) {
    case CcKind::UdpBestEffort: return "udp";
    case CcKind::CubicLike: return "cubic";
    case CcKind::BbrLike: return "bbr";
  }
  return "?";
}

inline CcKind parse_cc_kind(const std::string& s) {
  if (s == "udp") return CcKind::UdpBestEffort;
  if (s == "cubic") return CcKind::CubicLike;
  if (s == "bbr") return CcKind::BbrLike;
  throw std::invalid_argument("unknown congestion control '" + s + "' (expected udp, cubic or bbr)");
}

struct Segment {
  FlowId flow_id = 0;
  std::uint64_t seq = 0;
  std::uint32_t len_bytes = 0;
  std::uint64_t frame_index = 0;
  // Frame metadata carried for measurement only.
  std::uint64_t frame_start_seq = 0;
  std::uint32_t frame_bytes = 0;
  SimTime frame_entry_time{};
  SimTime send_time{};   // server wire egress
  SimTime upf_egress{};  // stamped by the UPF
  bool retransmission = false;

  std::uint32_t wire_bytes() const { return len_bytes; }
  std::uint64_t end_seq() const { return seq + len_bytes; }
};

struct AckSegment {
  FlowId flow_id = 0;
  std::uint64_t cum_ack_seq = 0;
  std::uint32_t rwnd_bytes = kNativeRwnd;
  SimTime ts{};
  bool synthesized = false;
};

/// W(t) = C (t - K)^3 + w_max in MSS units, K = cbrt(w_max (1 - beta) / C).
inline double cubic_window(double t_since_epoch_s, double w_max_bytes, std::uint32_t mss = kMss) {
  const double w_max = w_max_bytes / mss;
  const double k = std::cbrt(w_max * (1.0 - kCubicBeta) / kCubicC);
  const double d = t_since_epoch_s - k;
  return (kCubicC * d * d * d + w_max) * mss;
}

/// Round trips of loss-free slow start needed before iw x 2^k >= target.
inline int slow_start_rounds_to_reach(std::uint64_t iw_bytes, std::uint64_t target_bytes) {
  int k = 0;
  for (std::uint64_t w = iw_bytes; w < target_bytes; w *= 2) ++k;
  return k;
}

struct SenderConfig {
  std::uint32_t mss = kMss;
  std::uint64_t initial_window = kInitialWindow;
  std::uint64_t max_cwnd = 64ULL << 20;
  std::int64_t rto_min_us = 200'000;
  std::int64_t rto_initial_us = 1'000'000;
  std::int64_t bbr_initial_rtt_us = 10'000;
  int bbr_bw_window_rounds = 10;
};

struct FrameRecord {
  std::uint64_t index = 0;
  std::uint64_t start_seq = 0;
  std::uint32_t size = 0;
  SimTime entry_time{};
};

/// One connection's sender side.
class Sender {
 public:
  using Emit = std::function<void(const Segment&)>;

  Sender(Engine& engine, FlowId flow, CcKind kind, Emit emit, SenderConfig cfg = {})
      : engine_(engine), flow_(flow), kind_(kind), cfg_(cfg), emit_(std::move(emit)) {
    cwnd_ = cfg_.initial_window;
    rto_us_ = cfg_.rto_initial_us;
    if (kind_ == CcKind::BbrLike) {
      btl_bw_bps_ = static_cast<double>(cfg_.initial_window) * 8.0 / (cfg_.bbr_initial_rtt_us / 1e6);
      pacing_rate_bps_ = kBbrStartupGain * btl_bw_bps_;
    }
  }

  Sender(const Sender&) = delete;
  Sender& operator=(const Sender&) = delete;

  // ---- inputs ----
  void on_app_frame(const vr::VrFrame& frame) {
    frames_.push_back(FrameRecord{frame.index, stream_end_, frame.size_bytes, engine_.now()});
    stream_end_ += frame.size_bytes;
    last_frame_size_ = frame.size_bytes;
    pump();
  }

  void on_ack(const AckSegment& ack) {
    if (kind_ == CcKind::UdpBestEffort) return;
    ++acks_received_;
    if (ack.cum_ack_seq < snd_una_) return;  // stale
    if (ack.cum_ack_seq > snd_max_) return;  // acks data never sent
    last_ack_rwnd_zero_ = ack.rwnd_bytes == 0;
    const std::uint64_t newly = ack.cum_ack_seq - snd_una_;
    const bool window_update = ack.rwnd_bytes != rwnd_;
    rwnd_ = ack.rwnd_bytes;

    if (newly == 0) {
      if (!window_update && snd_una_ < snd_max_) {
        if (++dup_acks_ == 3 && kind_ == CcKind::CubicLike) enter_fast_recovery();
      }
      pump();
      return;
    }

    dup_acks_ = 0;
    sample_rtt(ack.cum_ack_seq);
    snd_una_ = ack.cum_ack_seq;
    if (snd_nxt_ < snd_una_) snd_nxt_ = snd_una_;
    delivered_ += newly;
    while (!frames_.empty() && frames_.front().start_seq + frames_.front().size <= snd_una_) frames_.pop_front();

    if (kind_ == CcKind::CubicLike) cubic_on_ack(newly);
    if (kind_ == CcKind::BbrLike) bbr_on_ack();
    cwnd_limited_ = false;

    restart_rto();
    pump();
    check_stabilized();
  }

  // ---- state ----
  FlowId flow_id() const { return flow_; }
  CcKind kind() const { return kind_; }
  std::uint64_t cwnd_bytes() const { return cwnd_; }
  std::uint64_t ssthresh_bytes() const { return ssthresh_; }
  std::uint32_t rwnd_bytes() const { return rwnd_; }
  std::uint64_t snd_una() const { return snd_una_; }
  std::uint64_t snd_nxt() const { return snd_nxt_; }
  std::uint64_t bytes_in_flight() const { return snd_nxt_ - snd_una_; }
  std::uint64_t buffered_bytes() const { return stream_end_ - snd_nxt_; }
  std::uint64_t stream_end() const { return stream_end_; }
  double srtt_us() const { return srtt_us_; }
  double pacing_rate_bps() const { return pacing_rate_bps_; }
  double btl_bw_bps() const { return btl_bw_bps_; }
  bool bbr_steady() const { return bbr_steady_; }
  std::uint64_t retransmitted_bytes() const { return retransmitted_bytes_; }
  std::uint64_t new_bytes_sent() const { return snd_max_; }
  std::uint64_t zero_window_violations() const { return zero_window_violations_; }
  std::uint64_t acks_received() const { return acks_received_; }

  /// First instant the window could carry a whole frame with nothing backlogged.
  std::optional<SimTime> stabilized_at() const { return stabilized_at_; }

  /// Forces a BBR-like sender's phase (tests).
  void set_bbr_steady_for_test(double bw_bps) {
    bbr_steady_ = true;
    btl_bw_bps_ = bw_bps;
    pacing_rate_bps_ = bw_bps;
  }

 private:
  // ---- send path ----
  std::uint64_t window_limit() const {
    if (kind_ == CcKind::UdpBestEffort) return std::numeric_limits<std::uint64_t>::max();
    return std::min(snd_una_ + cwnd_, snd_una_ + rwnd_);
  }

  const FrameRecord& frame_for(std::uint64_t seq) const {
    for (const auto& f : frames_)
      if (seq >= f.start_seq && seq < f.start_seq + f.size) return f;
    throw std::logic_error("no frame covers sequence " + std::to_string(seq));
  }

  void pump() {
    while (snd_nxt_ < stream_end_) {
      const FrameRecord& f = frame_for(snd_nxt_);
      const std::uint64_t frame_left = f.start_seq + f.size - snd_nxt_;
      const std::uint32_t want = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss, frame_left));
      const std::uint64_t limit = window_limit();
      const std::uint64_t room = limit > snd_nxt_ ? limit - snd_nxt_ : 0;
      if (room < want) {
        if (kind_ != CcKind::UdpBestEffort && snd_una_ + cwnd_ <= snd_una_ + rwnd_) cwnd_limited_ = true;
        break;
      }
      if (kind_ == CcKind::BbrLike && engine_.now() < next_pace_time_) {
        arm_pacing_timer();
        break;
      }
      send_segment(f, snd_nxt_, want);
      snd_nxt_ += want;
      if (kind_ == CcKind::BbrLike) {
        pace_clock_us_ = std::max(pace_clock_us_, static_cast<double>(engine_.now().us)) + want * 8.0 / pacing_rate_bps_ * 1e6;
        next_pace_time_ = SimTime(static_cast<std::int64_t>(std::ceil(pace_clock_us_)));
      }
    }
    check_stabilized();
  }

  void send_segment(const FrameRecord& f, std::uint64_t seq, std::uint32_t len) {
    Segment s;
    s.flow_id = flow_;
    s.seq = seq;
    s.len_bytes = len;
    s.frame_index = f.index;
    s.frame_start_seq = f.start_seq;
    s.frame_bytes = f.size;
    s.frame_entry_time = f.entry_time;
    s.send_time = engine_.now();
    s.retransmission = seq < snd_max_;
    if (s.retransmission) {
      retransmitted_bytes_ += len;
      retransmitted_seqs_[seq] = true;
    } else {
      if (last_ack_rwnd_zero_ && kind_ != CcKind::UdpBestEffort) ++zero_window_violations_;
      sent_at_[seq + len] = engine_.now();
      if (kind_ == CcKind::BbrLike) {
        if (snd_max_ == snd_una_) first_sent_time_ = delivered_time_ = engine_.now();
        rate_at_send_[seq + len] = RateState{delivered_, delivered_time_, first_sent_time_, engine_.now()};
      }
      snd_max_ = seq + len;
    }
    if (kind_ != CcKind::UdpBestEffort && rto_event_ == 0) restart_rto();
    emit_(s);
  }

  void arm_pacing_timer() {
    if (pacing_event_ != 0) return;
    pacing_event_ = engine_.schedule(next_pace_time_, "tx.pace", [this] {
      pacing_event_ = 0;
      pump();
    });
  }

  // ---- RTT / RTO ----
  void sample_rtt(std::uint64_t acked_to) {
    std::optional<SimTime> sent;
    for (auto it = sent_at_.begin(); it != sent_at_.end() && it->first <= acked_to;) {
      sent = it->second;
      it = sent_at_.erase(it);
    }
    bool retrans = false;
    for (auto it = retransmitted_seqs_.begin(); it != retransmitted_seqs_.end() && it->first < acked_to;) {
      retrans = true;
      it = retransmitted_seqs_.erase(it);
    }
    if (!sent || retrans) return;  // Karn
    const double r = static_cast<double>((engine_.now() - *sent).us);
    if (srtt_us_ <= 0.0) {
      srtt_us_ = r;
      rttvar_us_ = r / 2.0;
    } else {
      rttvar_us_ = 0.75 * rttvar_us_ + 0.25 * std::abs(srtt_us_ - r);
      srtt_us_ = 0.875 * srtt_us_ + 0.125 * r;
    }
    min_rtt_us_ = min_rtt_us_ <= 0.0 ? r : std::min(min_rtt_us_, r);
    rto_us_ = std::max<std::int64_t>(cfg_.rto_min_us, static_cast<std::int64_t>(srtt_us_ + 4.0 * rttvar_us_));
  }

  void restart_rto() {
    if (rto_event_ != 0) {
      engine_.cancel(rto_event_);
      rto_event_ = 0;
    }
    if (snd_una_ >= snd_max_) return;
    rto_event_ = engine_.schedule_in(SimTime(rto_us_), "tx.rto", [this] {
      rto_event_ = 0;
      on_rto();
    });
  }

  void on_rto() {
    if (snd_una_ >= snd_max_) return;
    if (kind_ == CcKind::CubicLike) {
      w_max_ = static_cast<double>(cwnd_);
      ssthresh_ = std::max<std::uint64_t>(static_cast<std::uint64_t>(cwnd_ * kCubicBeta), 2ULL * cfg_.mss);
      cwnd_ = cfg_.mss;
      epoch_start_.reset();
    }
    rto_us_ = std::min<std::int64_t>(rto_us_ * 2, 60'000'000);
    snd_nxt_ = snd_una_;
    in_recovery_ = false;
    restart_rto();
    pump();
  }

  // ---- CUBIC-like ----
  void enter_fast_recovery() {
    w_max_ = static_cast<double>(cwnd_);
    ssthresh_ = std::max<std::uint64_t>(static_cast<std::uint64_t>(cwnd_ * kCubicBeta), 2ULL * cfg_.mss);
    cwnd_ = ssthresh_;
    epoch_start_.reset();
    in_recovery_ = true;
    recover_seq_ = snd_max_;
    retransmit_head();
  }

  void retransmit_head() {
    if (snd_una_ >= snd_max_) return;
    const FrameRecord& f = frame_for(snd_una_);
    const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss, f.start_seq + f.size - snd_una_));
    send_segment(f, snd_una_, len);
  }

  void cubic_on_ack(std::uint64_t newly) {
    if (in_recovery_) {
      if (snd_una_ < recover_seq_) {
        retransmit_head();  // partial ack
        return;
      }
      in_recovery_ = false;
    }
    if (cwnd_ < ssthresh_) {
      if (cwnd_limited_) cwnd_ = std::min(cwnd_ + newly, cfg_.max_cwnd);
      return;
    }
    if (!cwnd_limited_) return;
    if (!epoch_start_) {
      epoch_start_ = engine_.now();
      if (w_max_ < static_cast<double>(cwnd_)) w_max_ = static_cast<double>(cwnd_);
    }
    const double t = (engine_.now() - *epoch_start_).s();
    const double target = cubic_window(t, w_max_, cfg_.mss);
    const double cw = static_cast<double>(cwnd_);
    double inc = target > cw ? (target - cw) * static_cast<double>(newly) / cw : 0.01 * cfg_.mss * static_cast<double>(newly) / cw;
    cwnd_ = std::min<std::uint64_t>(cfg_.max_cwnd, cwnd_ + static_cast<std::uint64_t>(std::max(1.0, inc)));
  }

  // ---- BBR-like ----
  struct RateState {
    std::uint64_t delivered = 0;
    SimTime delivered_time{};
    SimTime first_sent_time{};
    SimTime sent_time{};
  };

  /// Delivery-rate sample from the newest packet this ACK covers.
  std::optional<double> rate_sample() {
    std::optional<RateState> p;
    for (auto it = rate_at_send_.begin(); it != rate_at_send_.end() && it->first <= snd_una_;) {
      p = it->second;
      it = rate_at_send_.erase(it);
    }
    const SimTime now = engine_.now();
    delivered_time_ = now;
    if (!p) return std::nullopt;
    first_sent_time_ = p->sent_time;
    const std::int64_t interval = std::max((now - p->delivered_time).us, (p->sent_time - p->first_sent_time).us);
    if (interval <= 0) return std::nullopt;
    return static_cast<double>(delivered_ - p->delivered) * 8.0 / (static_cast<double>(interval) / 1e6);
  }

  void bbr_on_ack() {
    const std::optional<double> s = rate_sample();
    if (s) round_max_ = std::max(round_max_, *s);
    if (!round_active_) {
      round_active_ = true;
      round_end_seq_ = snd_nxt_;
    } else if (snd_una_ >= round_end_seq_) {
      bw_samples_.push_back(round_max_);
      while (static_cast<int>(bw_samples_.size()) > cfg_.bbr_bw_window_rounds) bw_samples_.pop_front();
      round_end_seq_ = snd_nxt_;
      on_round_end(round_max_);
      round_max_ = 0.0;
    }
    update_bbr_control();
  }

  void on_round_end(double sample) {
    if (!bbr_steady_) {
      btl_bw_bps_ = std::max(btl_bw_bps_, sample);
      if (btl_bw_bps_ >= 1.25 * full_bw_) {
        full_bw_ = btl_bw_bps_;
        full_bw_rounds_ = 0;
      } else if (++full_bw_rounds_ >= 3) {
        bbr_steady_ = true;
        if (!stabilized_at_) stabilized_at_ = engine_.now();
      }
    }
    if (bbr_steady_) btl_bw_bps_ = *std::max_element(bw_samples_.begin(), bw_samples_.end());
  }

  void update_bbr_control() {
    const double gain = bbr_steady_ ? 1.0 : kBbrStartupGain;
    pacing_rate_bps_ = std::max(gain * btl_bw_bps_, 8.0 * cfg_.mss / 1.0);  // never below 1 MSS/s
    const double rtt_s = (min_rtt_us_ > 0.0 ? min_rtt_us_ : static_cast<double>(cfg_.bbr_initial_rtt_us)) / 1e6;
    const double cwnd_gain = bbr_steady_ ? 2.0 : kBbrStartupGain;
    const double bdp = btl_bw_bps_ / 8.0 * rtt_s;
    cwnd_ = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(cwnd_gain * bdp), 4ULL * cfg_.mss, cfg_.max_cwnd);
  }

  void check_stabilized() {
    if (stabilized_at_ || kind_ != CcKind::CubicLike || last_frame_size_ == 0) return;
    if (cwnd_ >= last_frame_size_ && snd_nxt_ == stream_end_) stabilized_at_ = engine_.now();
  }

  Engine& engine_;
  FlowId flow_;
  CcKind kind_;
  SenderConfig cfg_;
  Emit emit_;

  std::deque<FrameRecord> frames_;
  std::uint64_t stream_end_ = 0;
  std::uint64_t snd_una_ = 0;
  std::uint64_t snd_nxt_ = 0;
  std::uint64_t snd_max_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t cwnd_ = 0;
  std::uint64_t ssthresh_ = std::numeric_limits<std::uint64_t>::max();
  std::uint32_t rwnd_ = kNativeRwnd;
  bool cwnd_limited_ = false;
  bool last_ack_rwnd_zero_ = false;
  int dup_acks_ = 0;
  bool in_recovery_ = false;
  std::uint64_t recover_seq_ = 0;
  double w_max_ = 0.0;
  std::optional<SimTime> epoch_start_{};
  std::uint32_t last_frame_size_ = 0;
  std::optional<SimTime> stabilized_at_{};

  std::map<std::uint64_t, SimTime> sent_at_;
  std::map<std::uint64_t, bool> retransmitted_seqs_;
  double srtt_us_ = 0.0;
  double rttvar_us_ = 0.0;
  double min_rtt_us_ = 0.0;
  std::int64_t rto_us_ = 0;
  EventId rto_event_ = 0;

  double btl_bw_bps_ = 0.0;
  double pacing_rate_bps_ = 0.0;
  double full_bw_ = 0.0;
  int full_bw_rounds_ = 0;
  bool bbr_steady_ = false;
  bool round_active_ = false;
  std::uint64_t round_end_seq_ = 0;
  double round_max_ = 0.0;
  std::map<std::uint64_t, RateState> rate_at_send_;
  SimTime delivered_time_{};
  SimTime first_sent_time_{};
  std::deque<double> bw_samples_;
  SimTime next_pace_time_{};
  double pace_clock_us_ = 0.0;
  EventId pacing_event_ = 0;

  std::uint64_t retransmitted_bytes_ = 0;
  std::uint64_t zero_window_violations_ = 0;
  std::uint64_t acks_received_ = 0;
};

// ---- receiver / measurement -----------------------------------------------

struct PacketSample {
  FlowId flow_id = 0;
  std::uint64_t frame_index = 0;
  SimTime frame_entry_time{};
  SimTime send_time{};   // server wire egress
  SimTime upf_egress{};
  SimTime arrival{};
  std::int64_t one_way_us() const { return (arrival - upf_egress).us; }
};

struct DelaySample {
  FlowId flow_id = 0;
  std::uint64_t frame_index = 0;
  SimTime gen_time{};
  std::int64_t frame_delay_us = 0;
  std::int64_t network_delay_us = 0;
  std::vector<std::int64_t> one_way_delay_us;
  std::int64_t max_pkt_one_way_us() const {
    return one_way_delay_us.empty() ? 0 : *std::max_element(one_way_delay_us.begin(), one_way_delay_us.end());
  }
};

struct SegmentDelivery {
  SimTime send_time{};
  SimTime arrival{};
};

/// Frame delay = in-order arrival of the last byte minus send-buffer entry.
/// Network delay = the largest per-packet transit (UE arrival minus wire egress)
/// among the frame's packets.
inline DelaySample record_frame_delivery(FlowId flow, std::uint64_t frame_index, SimTime entry_time, SimTime last_in_order,
                                         const std::vector<SegmentDelivery>& deliveries) {
  DelaySample d;
  d.flow_id = flow;
  d.frame_index = frame_index;
  d.gen_time = entry_time;
  d.frame_delay_us = (last_in_order - entry_time).us;
  for (const auto& s : deliveries) d.one_way_delay_us.push_back((s.arrival - s.send_time).us);
  d.network_delay_us = d.max_pkt_one_way_us();
  return d;
}

struct ReceiverConfig {
  bool send_acks = true;
  std::uint32_t advertised_rwnd = kNativeRwnd;
  int ack_every_segments = 2;
  std::int64_t delayed_ack_us = 1000;
};

/// UE transport endpoint: in-order reassembly, delayed ACKs, frame completion.
class Receiver {
 public:
  using AckOut = std::function<void(const AckSegment&)>;
  using FrameDone = std::function<void(const DelaySample&)>;
  using PacketSeen = std::function<void(const PacketSample&)>;

  Receiver(Engine& engine, FlowId flow, ReceiverConfig cfg, AckOut ack_out, FrameDone on_frame, PacketSeen on_packet)
      : engine_(engine),
        flow_(flow),
        cfg_(cfg),
        ack_out_(std::move(ack_out)),
        on_frame_(std::move(on_frame)),
        on_packet_(std::move(on_packet)) {}

  Receiver(const Receiver&) = delete;
  Receiver& operator=(const Receiver&) = delete;

  void on_segment(const Segment& s) {
    const SimTime now = engine_.now();
    if (on_packet_) on_packet_(PacketSample{flow_, s.frame_index, s.frame_entry_time, s.send_time, s.upf_egress, now});
    auto& pf = pending_frames_[s.frame_index];
    if (pf.end_seq == 0) {
      pf.end_seq = s.frame_start_seq + s.frame_bytes;
      pf.entry_time = s.frame_entry_time;
    }
    pf.deliveries.push_back(SegmentDelivery{s.send_time, now});

    const bool in_order = s.seq == rcv_nxt_;
    const bool had_gap = !ooo_.empty();
    if (s.end_seq() > rcv_nxt_) {
      if (s.seq <= rcv_nxt_) {
        rcv_nxt_ = s.end_seq();
        for (auto it = ooo_.begin(); it != ooo_.end() && it->first <= rcv_nxt_;) {
          rcv_nxt_ = std::max(rcv_nxt_, it->second);
          it = ooo_.erase(it);
        }
      } else {
        auto& e = ooo_[s.seq];
        e = std::max(e, s.end_seq());
      }
    }
    complete_frames(now);

    if (!cfg_.send_acks) return;
    if (!in_order || had_gap || !ooo_.empty()) {
      send_ack();
      return;
    }
    if (++unacked_segments_ >= cfg_.ack_every_segments) {
      send_ack();
    } else if (delack_event_ == 0) {
      delack_event_ = engine_.schedule_in(SimTime(cfg_.delayed_ack_us), "ue.delack", [this] {
        delack_event_ = 0;
        if (unacked_segments_ > 0) send_ack();
      });
    }
  }

  std::uint64_t rcv_nxt() const { return rcv_nxt_; }
  std::uint64_t acks_sent() const { return acks_sent_; }

 private:
  struct PendingFrame {
    std::uint64_t end_seq = 0;
    SimTime entry_time{};
    std::vector<SegmentDelivery> deliveries;
  };

  void complete_frames(SimTime now) {
    while (!pending_frames_.empty()) {
      auto it = pending_frames_.begin();
      if (it->second.end_seq == 0 || it->second.end_seq > rcv_nxt_) break;
      if (on_frame_) on_frame_(record_frame_delivery(flow_, it->first, it->second.entry_time, now, it->second.deliveries));
      pending_frames_.erase(it);
    }
  }

  void send_ack() {
    if (delack_event_ != 0) {
      engine_.cancel(delack_event_);
      delack_event_ = 0;
    }
    unacked_segments_ = 0;
    ++acks_sent_;
    ack_out_(AckSegment{flow_, rcv_nxt_, cfg_.advertised_rwnd, engine_.now(), false});
  }

  Engine& engine_;
  FlowId flow_;
  ReceiverConfig cfg_;
  AckOut ack_out_;
  FrameDone on_frame_;
  PacketSeen on_packet_;
  std::uint64_t rcv_nxt_ = 0;
  std::map<std::uint64_t, std::uint64_t> ooo_;
  std::map<std::uint64_t, PendingFrame> pending_frames_;
  int unacked_segments_ = 0;
  EventId delack_event_ = 0;
  std::uint64_t acks_sent_ = 0;
};

inline void write_frame_log_header(std::ostream& os) {
  os << "flow_id,frame_index,gen_time_us,frame_delay_us,network_delay_us,max_pkt_one_way_us\n";
}

inline void write_frame_log_row(std::ostream& os, const DelaySample& d) {
  os << d.flow_id << ',' << d.frame_index << ',' << d.gen_time.us << ',' << d.frame_delay_us << ',' << d.network_delay_us
     << ',' << d.max_pkt_one_way_us() << '\n';
}

}  // namespace cecc::transport
