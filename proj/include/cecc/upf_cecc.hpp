#pragma once

// UPF-resident early congestion control: gNB report ingestion, per-flow delay
// prediction, priority-based admission and two-ACK sender gating with ACK
// synthesis.

#include "cecc/edge_signaling.hpp"
#include "cecc/ran_gnb.hpp"
#include "cecc/sim_engine.hpp"
#include "cecc/transport_cc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cecc::upf {

using transport::AckSegment;
using transport::Segment;
using vr::FlowId;

inline constexpr std::int64_t kDefaultDelayStandardUs = 10'000;

/// Per-flow egress log of (timestamp, bytes).
class TxLog {
 public:
  void append(SimTime ts, std::uint32_t bytes) {
    if (!entries_.empty() && ts < entries_.back().first) throw std::logic_error("TxLog timestamps must be non-decreasing");
    entries_.emplace_back(ts, bytes);
  }

  /// Sum of entries with ts strictly greater than `cutoff`.
  std::uint64_t bytes_after(SimTime cutoff) const {
    std::uint64_t sum = 0;
    for (auto it = entries_.rbegin(); it != entries_.rend() && it->first > cutoff; ++it) sum += it->second;
    return sum;
  }

  /// Drops entries at or before `cutoff` (never needed again once a newer report exists).
  void prune_through(SimTime cutoff) {
    while (!entries_.empty() && entries_.front().first <= cutoff) entries_.pop_front();
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::deque<std::pair<SimTime, std::uint32_t>> entries_;
};

/// Max observed bytes per frame over a trailing window; bootstrap until a frame completes.
class FrameSizeEstimator {
 public:
  FrameSizeEstimator(std::uint32_t bootstrap_bytes = 0, double window_s = 2.0)
      : bootstrap_(bootstrap_bytes), window_(SimTime::from_s(window_s)) {}

  /// Returns true when the segment opens a frame not seen before.
  bool observe(std::uint64_t frame_index, std::uint32_t bytes, SimTime t) {
    bool fresh = false;
    if (frames_.empty() || frame_index > frames_.back().index) {
      if (!frames_.empty()) completed_any_ = true;
      frames_.push_back(Entry{frame_index, t, 0});
      fresh = true;
    }
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      if (it->index == frame_index) {
        it->bytes += bytes;
        break;
      }
    }
    while (frames_.size() > 1 && frames_.front().first_seen + window_ < t) frames_.pop_front();
    return fresh;
  }

  std::uint32_t estimate() const {
    std::uint64_t m = 0;
    for (const auto& f : frames_) m = std::max(m, f.bytes);
    if (!completed_any_) m = std::max<std::uint64_t>(m, bootstrap_);
    return static_cast<std::uint32_t>(m);
  }

  std::uint32_t bootstrap_bytes() const { return bootstrap_; }

 private:
  struct Entry {
    std::uint64_t index;
    SimTime first_seen;
    std::uint64_t bytes;
  };
  std::uint32_t bootstrap_;
  SimTime window_;
  std::deque<Entry> frames_;
  bool completed_any_ = false;
};

struct DelayPrediction {
  FlowId flow_id = 0;
  double wired_d_us = 0.0;
  double queue_d_us = 0.0;
  double processing_d_us = 0.0;
  double total_us = 0.0;
};

/// QueueD = (RBS + TxSize + FrameSize) x 8 / (TH / N), in microseconds.
inline double queue_delay_us(std::uint64_t rbs, std::uint64_t tx_size, std::uint64_t frame_size, double th_bps, std::size_t n) {
  if (!(th_bps > 0.0)) throw std::invalid_argument("capacity TH unknown");
  if (n == 0) throw std::invalid_argument("candidate set size N must be >= 1");
  return static_cast<double>(rbs + tx_size + frame_size) * 8.0 / (th_bps / static_cast<double>(n)) * 1e6;
}

/// priority[all]++, then priority[passed] = 0.
inline void flow_monitor(std::map<FlowId, std::uint64_t>& priorities, FlowId passed) {
  for (auto& [id, p] : priorities) ++p;
  priorities[passed] = 0;
}

struct ScheduleStep {
  FlowId flow_id = 0;
  double predicted_total_us = 0.0;
  std::uint64_t priority = 0;
};

struct ScheduleResult {
  std::vector<FlowId> admitted;              // ascending flow_id
  std::vector<ScheduleStep> evicted;         // eviction order
  std::map<FlowId, double> final_prediction; // admitted flows, last evaluation
};

/// Eviction loop: while the largest prediction over the current set exceeds the
/// standard, drop the minimal-priority flow (ties: larger prediction, then lower
/// flow_id) and re-predict with the shrunk set. `predict(flow, set_size)` returns
/// the total predicted delay in microseconds.
template <class Predict>
ScheduleResult flow_schedule(std::vector<FlowId> candidates, const std::map<FlowId, std::uint64_t>& priorities,
                             double standard_us, Predict&& predict) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  auto prio = [&](FlowId id) {
    auto it = priorities.find(id);
    return it == priorities.end() ? std::uint64_t{0} : it->second;
  };
  ScheduleResult res;
  std::vector<FlowId> set = std::move(candidates);
  while (!set.empty()) {
    std::map<FlowId, double> pred;
    double worst = -1.0;
    for (FlowId id : set) {
      pred[id] = predict(id, set.size());
      worst = std::max(worst, pred[id]);
    }
    if (worst <= standard_us) {
      res.final_prediction = std::move(pred);
      break;
    }
    auto victim = set.begin();
    for (auto it = set.begin(); it != set.end(); ++it) {
      const auto pv = prio(*victim), pi = prio(*it);
      if (pi < pv || (pi == pv && (pred[*it] > pred[*victim] || (pred[*it] == pred[*victim] && *it < *victim)))) victim = it;
    }
    res.evicted.push_back(ScheduleStep{*victim, pred[*victim], prio(*victim)});
    set.erase(victim);
  }
  res.admitted = std::move(set);
  return res;
}

/// Intermediate cumulative ACKs from last_returned (exclusive) to max_received (inclusive) in MSS steps.
inline std::vector<AckSegment> synthesize_acks(std::uint64_t last_returned_seq, std::uint64_t max_received_seq, std::uint32_t mss,
                                               const AckSegment& real) {
  if (max_received_seq < last_returned_seq) throw std::invalid_argument("max_received_seq precedes last_returned_seq");
  if (mss == 0) throw std::invalid_argument("mss must be > 0");
  std::vector<AckSegment> out;
  for (std::uint64_t s = last_returned_seq; s < max_received_seq;) {
    s = std::min<std::uint64_t>(s + mss, max_received_seq);
    AckSegment a = real;
    a.cum_ack_seq = s;
    a.synthesized = true;
    out.push_back(a);
  }
  return out;
}

inline std::uint32_t release_window(std::uint32_t frame_size_est, double headroom = 1.2) {
  return static_cast<std::uint32_t>(std::ceil(headroom * static_cast<double>(frame_size_est) - 1e-9));
}

struct AckPair {
  AckSegment open;
  AckSegment close;
};

/// The two released ACKs: the highest cached ACK with rwnd = ceil(1.2 x estimate), then with rwnd = 0.
inline AckPair release_acks(const AckSegment& highest, std::uint32_t frame_size_est, double headroom = 1.2) {
  AckPair p{highest, highest};
  p.open.rwnd_bytes = release_window(frame_size_est, headroom);
  p.close.rwnd_bytes = 0;
  return p;
}

struct UpfConfig {
  bool cecc_enabled = true;
  std::int64_t delay_standard_us = kDefaultDelayStandardUs;
  double release_headroom = 1.2;
  double frame_window_s = 2.0;
  std::uint32_t mss = transport::kMss;
  bool rotate_on_admission = true;
};

struct DecisionRow {
  SimTime cycle{};
  FlowId flow_id = 0;
  double predicted_total_us = 0.0;
  std::uint64_t priority = 0;
  bool admitted = false;
};

inline void write_decision_log_header(std::ostream& os) { os << "cycle_ts_us,flow_id,predicted_total_us,priority,admitted\n"; }

inline void write_decision_row(std::ostream& os, const DecisionRow& r) {
  os << r.cycle.us << ',' << r.flow_id << ',' << static_cast<std::int64_t>(std::llround(r.predicted_total_us)) << ',' << r.priority
     << ',' << (r.admitted ? 1 : 0) << '\n';
}

struct UpfFlowStats {
  std::uint64_t max_received_ack = 0;   // from the UE
  std::uint64_t max_forwarded_ack = 0;  // to the sender
  std::uint64_t ack_regressions = 0;
  std::uint64_t admissions = 0;
  std::uint64_t max_wait_cycles = 0;
  std::uint64_t acks_forwarded = 0;
  bool has_unreleased = false;
};

/// The UPF entity. Downlink segments pass through (logged, stamped and
/// forwarded); uplink ACKs of CECC-governed flows are held until admission.
class Upf {
 public:
  using ToGnb = std::function<void(const Segment&)>;
  using ToServer = std::function<void(const AckSegment&)>;
  using DecisionSink = std::function<void(const DecisionRow&)>;

  Upf(Engine& engine, UpfConfig cfg, ran::GnbConfig gnb_model, ToGnb to_gnb, ToServer to_server)
      : engine_(engine), cfg_(cfg), gnb_model_(gnb_model.normalized()), to_gnb_(std::move(to_gnb)), to_server_(std::move(to_server)) {}

  Upf(const Upf&) = delete;
  Upf& operator=(const Upf&) = delete;

  void register_flow(FlowId id, bool governed, std::uint32_t bootstrap_frame_bytes) {
    Flow f;
    f.governed = governed && cfg_.cecc_enabled;
    f.frames = FrameSizeEstimator(bootstrap_frame_bytes, cfg_.frame_window_s);
    flows_.emplace(id, std::move(f));
    if (flows_.at(id).governed) priorities_[id] = 0;
  }

  void set_decision_sink(DecisionSink s) { decision_sink_ = std::move(s); }

  // ---- data path ----
  void on_downlink_segment(Segment s) {
    Flow& f = flow(s.flow_id);
    s.upf_egress = engine_.now();
    f.log.append(engine_.now(), s.len_bytes);
    if (!s.retransmission) {
      const bool new_frame = f.frames.observe(s.frame_index, s.len_bytes, engine_.now());
      if (new_frame && f.governed) flow_monitor(priorities_, s.flow_id);
    }
    f.max_forwarded_data = std::max(f.max_forwarded_data, s.end_seq());
    to_gnb_(s);
  }

  void on_uplink_ack(const AckSegment& a) {
    Flow& f = flow(a.flow_id);
    if (a.cum_ack_seq > f.stats.max_received_ack) f.stats.max_received_ack = a.cum_ack_seq;
    if (!f.governed) {
      forward(f, a);
      return;
    }
    if (!f.latest || a.cum_ack_seq >= f.latest->cum_ack_seq) f.latest = a;
  }

  // ---- signaling ----
  void on_link_state(const signaling::LinkStateReport& r, SimTime) {
    gnb_model_.link.tb_size_bits = r.tb_size_bits;
    gnb_model_.link.scs_khz = r.scs_khz;
    gnb_model_.link.bandwidth_hz = r.bandwidth_hz;
    gnb_model_.link.mcs_index = r.mcs_index;
    have_link_ = true;
    processing_cache_.clear();
  }

  /// Returns false for stale reports. A fresh report triggers one control cycle.
  bool on_gnb_report(const signaling::GnbReport& r, SimTime receive_time) {
    if (last_report_ && r.timestamp <= last_report_->timestamp) return false;
    wired_.update(signaling::measure_wired_delay(r, receive_time));
    last_report_ = r;
    const SimTime cutoff = tx_cutoff();
    for (auto& [id, f] : flows_) f.log.prune_through(cutoff);
    if (cfg_.cecc_enabled) run_control_cycle(engine_.now());
    return true;
  }

  std::uint64_t tx_size_since_report(FlowId id) const {
    const Flow& f = flow(id);
    if (!last_report_) return f.log.bytes_after(SimTime(std::numeric_limits<std::int64_t>::min()));
    return f.log.bytes_after(tx_cutoff());
  }

  /// Capacity TH used in the queue term.
  double capacity_bps() const {
    if (!have_link_ && !gnb_model_.capacity_override_bps) throw std::logic_error("capacity TH unknown: no link state");
    return gnb_model_.capacity_bps();
  }

  double processing_delay_us(std::uint32_t frame_size_est) const {
    auto it = processing_cache_.find(frame_size_est);
    if (it != processing_cache_.end()) return it->second;
    const double v = static_cast<double>(ran::processing_delay_bounds(gnb_model_, frame_size_est, cfg_.mss).max_us);
    processing_cache_.emplace(frame_size_est, v);
    return v;
  }

  DelayPrediction predict_delay(FlowId id, std::size_t n) const {
    if (!last_report_) throw std::logic_error("no gNB report received yet");
    const Flow& f = flow(id);
    DelayPrediction p;
    p.flow_id = id;
    p.wired_d_us = wired_.estimate_us();
    const std::uint32_t fs = f.frames.estimate();
    p.queue_d_us = queue_delay_us(last_report_->rbs(id), tx_size_since_report(id), fs, capacity_bps(), n);
    p.processing_d_us = processing_delay_us(fs);
    p.total_us = p.wired_d_us + p.queue_d_us + p.processing_d_us;
    return p;
  }

  /// Flows with something to release: new ACKs from the UE, or fully acked
  /// (nothing in flight) and therefore needing a window to send the next frame.
  std::vector<FlowId> candidates() const {
    std::vector<FlowId> out;
    for (const auto& [id, f] : flows_) {
      if (!f.governed || !f.latest) continue;
      const bool fresh = f.latest->cum_ack_seq > f.last_returned;
      const bool idle = f.latest->cum_ack_seq >= f.max_forwarded_data;
      if (fresh || idle) out.push_back(id);
    }
    return out;
  }

  ScheduleResult run_control_cycle(SimTime t) {
    ++cycles_;
    const std::vector<FlowId> cand = candidates();
    ScheduleResult res;
    if (!cand.empty()) {
      res = flow_schedule(cand, priorities_, static_cast<double>(cfg_.delay_standard_us),
                          [this](FlowId id, std::size_t n) { return predict_delay(id, n).total_us; });
    }
    if (decision_sink_) {
      for (const auto& e : res.evicted) decision_sink_(DecisionRow{t, e.flow_id, e.predicted_total_us, e.priority, false});
      for (FlowId id : res.admitted) decision_sink_(DecisionRow{t, id, res.final_prediction.at(id), priorities_.at(id), true});
    }
    for (FlowId id : res.admitted) {
      if (res.final_prediction.at(id) > static_cast<double>(cfg_.delay_standard_us)) ++soundness_violations_;
    }

    std::set<FlowId> admitted(res.admitted.begin(), res.admitted.end());
    for (FlowId id : cand) {
      Flow& f = flows_.at(id);
      if (admitted.count(id)) {
        f.waiting = 0;
      } else if (!res.admitted.empty()) {
        f.stats.max_wait_cycles = std::max<std::uint64_t>(f.stats.max_wait_cycles, ++f.waiting);
      }
    }
    for (const auto& [id, f] : flows_) {
      if (f.governed && !std::count(cand.begin(), cand.end(), id)) flows_.at(id).waiting = 0;
    }

    for (FlowId id : res.admitted) {
      release(id);
      if (cfg_.rotate_on_admission) flow_monitor(priorities_, id);
    }
    return res;
  }

  // ---- introspection ----
  const std::map<FlowId, std::uint64_t>& priorities() const { return priorities_; }
  std::map<FlowId, std::uint64_t>& priorities_for_test() { return priorities_; }
  const std::optional<signaling::GnbReport>& last_report() const { return last_report_; }
  double wired_delay_estimate_us() const { return wired_.estimate_us(); }
  std::uint32_t frame_size_estimate(FlowId id) const { return flow(id).frames.estimate(); }
  std::uint64_t cycles() const { return cycles_; }
  std::uint64_t soundness_violations() const { return soundness_violations_; }
  UpfFlowStats stats(FlowId id) const {
    UpfFlowStats s = flow(id).stats;
    const Flow& f = flow(id);
    s.has_unreleased = f.latest && f.latest->cum_ack_seq > f.last_returned;
    return s;
  }
  void note_frame_passed_for_test(FlowId id) { flow_monitor(priorities_, id); }

 private:
  struct Flow {
    bool governed = false;
    TxLog log;
    FrameSizeEstimator frames;
    std::optional<AckSegment> latest;
    std::uint64_t last_returned = 0;
    std::uint64_t max_forwarded_data = 0;
    std::uint64_t waiting = 0;
    UpfFlowStats stats;
  };

  Flow& flow(FlowId id) {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw std::out_of_range("unknown flow " + std::to_string(id));
    return it->second;
  }
  const Flow& flow(FlowId id) const {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw std::out_of_range("unknown flow " + std::to_string(id));
    return it->second;
  }

  SimTime tx_cutoff() const { return last_report_->timestamp - SimTime(std::llround(wired_.estimate_us())); }

  void forward(Flow& f, const AckSegment& a) {
    if (a.cum_ack_seq < f.stats.max_forwarded_ack) ++f.stats.ack_regressions;
    f.stats.max_forwarded_ack = std::max(f.stats.max_forwarded_ack, a.cum_ack_seq);
    ++f.stats.acks_forwarded;
    to_server_(a);
  }

  void release(FlowId id) {
    Flow& f = flows_.at(id);
    ++f.stats.admissions;
    const AckSegment real = *f.latest;
    const std::uint32_t fs = f.frames.estimate();
    const std::uint32_t window = release_window(fs, cfg_.release_headroom);
    auto synth = synthesize_acks(f.last_returned, real.cum_ack_seq, cfg_.mss, real);
    if (!synth.empty()) synth.pop_back();  // the release pair carries the final value
    for (auto& a : synth) {
      a.rwnd_bytes = window;
      forward(f, a);
    }
    const AckPair pair = release_acks(real, fs, cfg_.release_headroom);
    forward(f, pair.open);
    f.last_returned = real.cum_ack_seq;
    const double th = capacity_bps();
    const auto gap = SimTime(static_cast<std::int64_t>(std::ceil(cfg_.mss * 8.0 / th * 1e6)));
    engine_.schedule_in(gap, "upf.ack.close", [this, id, close = pair.close] { forward(flows_.at(id), close); });
  }

  Engine& engine_;
  UpfConfig cfg_;
  ran::GnbConfig gnb_model_;
  ToGnb to_gnb_;
  ToServer to_server_;
  DecisionSink decision_sink_;
  std::map<FlowId, Flow> flows_;
  std::map<FlowId, std::uint64_t> priorities_;
  std::optional<signaling::GnbReport> last_report_;
  signaling::WiredDelayEstimator wired_;
  bool have_link_ = false;
  mutable std::map<std::uint32_t, double> processing_cache_;
  std::uint64_t cycles_ = 0;
  std::uint64_t soundness_violations_ = 0;
};

}  // namespace cecc::upf
