#pragma once

// 5G base-station bottleneck: TDD slot structure, per-flow RLC queues served
// round-robin at transport-block granularity, and the processing-delay envelope.

#include "cecc/sim_engine.hpp"
#include "cecc/vr_traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cecc::ran {

using vr::FlowId;

enum class Subframe { D, S, U };
enum class SlotKind { D, S_dl, S_guard, S_ul, U };

inline const char* to_string(SlotKind k) {
  switch (k) {
    case SlotKind::D: return "D";
    case SlotKind::S_dl: return "S_dl";
    case SlotKind::S_guard: return "S_guard";
    case SlotKind::S_ul: return "S_ul";
    case SlotKind::U: return "U";
  }
  return "?";
}

struct SpecialSplit {
  int dl_symbols = 10;
  int guard_symbols = 2;
  int ul_symbols = 2;
};

struct TddPattern {
  std::vector<Subframe> subframes{Subframe::D, Subframe::D, Subframe::D, Subframe::S, Subframe::U};
  SpecialSplit s_split{};

  static TddPattern dddsu() { return TddPattern{}; }
  static TddPattern all_downlink(std::size_t n = 5) { return TddPattern{std::vector<Subframe>(n, Subframe::D), {}}; }

  /// Parses a pattern string such as "DDDSU".
  static TddPattern parse(const std::string& s, SpecialSplit split = {}) {
    TddPattern p{{}, split};
    for (char c : s) {
      switch (c) {
        case 'D': p.subframes.push_back(Subframe::D); break;
        case 'S': p.subframes.push_back(Subframe::S); break;
        case 'U': p.subframes.push_back(Subframe::U); break;
        default: throw std::invalid_argument(std::string("invalid TDD subframe '") + c + "'");
      }
    }
    p.validate();
    return p;
  }

  std::string to_string() const {
    std::string out;
    for (auto k : subframes) out += (k == Subframe::D ? 'D' : k == Subframe::S ? 'S' : 'U');
    return out;
  }

  void validate() const {
    if (subframes.empty()) throw std::invalid_argument("TDD pattern must not be empty");
    if (s_split.dl_symbols < 0 || s_split.guard_symbols < 0 || s_split.ul_symbols < 0 ||
        s_split.dl_symbols + s_split.guard_symbols + s_split.ul_symbols != 14)
      throw std::invalid_argument("special subframe split must sum to 14 symbols");
  }

  std::size_t size() const { return subframes.size(); }

  /// Fraction of airtime usable for downlink data.
  double dl_fraction() const {
    double dl = 0.0;
    for (auto k : subframes) {
      if (k == Subframe::D) dl += 1.0;
      if (k == Subframe::S) dl += s_split.dl_symbols / 14.0;
    }
    return dl / static_cast<double>(subframes.size());
  }
};

struct LinkState {
  int scs_khz = 15;
  double bandwidth_hz = 200e6;
  int mcs_index = 27;
  double tb_size_bits = 1e6;

  std::int64_t slot_us() const { return 1000 * 15 / scs_khz; }
  double slots_per_second() const { return 1e6 / static_cast<double>(slot_us()); }

  void validate() const {
    if (scs_khz != 15 && scs_khz != 30 && scs_khz != 60 && scs_khz != 120)
      throw std::invalid_argument("scs_khz must be one of 15, 30, 60, 120");
    if (!(tb_size_bits > 0.0)) throw std::invalid_argument("tb_size_bits must be > 0");
  }

  friend bool operator==(const LinkState&, const LinkState&) = default;
};

/// TH = TBSize x slots/s x downlink fraction.
inline double capacity(const LinkState& link, const TddPattern& pattern) {
  return link.tb_size_bits * link.slots_per_second() * pattern.dl_fraction();
}

inline double tb_size_for_capacity(double capacity_bps, const LinkState& link, const TddPattern& pattern) {
  return capacity_bps / (link.slots_per_second() * pattern.dl_fraction());
}

inline SlotKind slot_kind_at(const TddPattern& pattern, const LinkState& link, SimTime t) {
  const std::int64_t slot = link.slot_us();
  const std::int64_t period = slot * static_cast<std::int64_t>(pattern.size());
  const std::int64_t pos = ((t.us % period) + period) % period;
  const auto idx = static_cast<std::size_t>(pos / slot);
  switch (pattern.subframes[idx]) {
    case Subframe::D: return SlotKind::D;
    case Subframe::U: return SlotKind::U;
    case Subframe::S: break;
  }
  const std::int64_t symbol = (pos % slot) * 14 / slot;
  if (symbol < pattern.s_split.dl_symbols) return SlotKind::S_dl;
  if (symbol < pattern.s_split.dl_symbols + pattern.s_split.guard_symbols) return SlotKind::S_guard;
  return SlotKind::S_ul;
}

/// Start of the slot containing t.
inline SimTime slot_start(const LinkState& link, SimTime t) { return SimTime(t.us - t.us % link.slot_us()); }

/// ACKs ready at t ride the next uplink portion (S_ul symbols or a U slot) that
/// starts at or after t; returns the end of that portion.
inline SimTime next_uplink_delivery(const TddPattern& pattern, const LinkState& link, SimTime t) {
  const std::int64_t slot = link.slot_us();
  const std::int64_t ul_start_off = slot * (pattern.s_split.dl_symbols + pattern.s_split.guard_symbols) / 14;
  std::int64_t s = slot_start(link, t).us;
  for (std::size_t guard = 0; guard <= 2 * pattern.size() + 1; ++guard, s += slot) {
    const auto kind = pattern.subframes[static_cast<std::size_t>((s / slot) % static_cast<std::int64_t>(pattern.size()))];
    if (kind == Subframe::U && s >= t.us) return SimTime(s + slot);
    if (kind == Subframe::S && pattern.s_split.ul_symbols > 0 && s + ul_start_off >= t.us) return SimTime(s + slot);
  }
  throw std::invalid_argument("TDD pattern has no uplink opportunity");
}

struct GnbConfig {
  TddPattern pattern{};
  LinkState link{};
  std::optional<double> capacity_override_bps{};
  std::optional<std::uint64_t> per_queue_limit_bytes{};
  /// Fixed latency between the end of an over-the-air slot and arrival at the UE
  /// (decode and L1/L2 pipeline); zero means delivery at slot end.
  std::int64_t pipeline_delay_us = 0;

  /// Applies the capacity override by back-deriving the transport block size.
  GnbConfig normalized() const {
    GnbConfig c = *this;
    c.pattern.validate();
    if (c.capacity_override_bps) {
      if (!(*c.capacity_override_bps > 0.0)) throw std::invalid_argument("capacity_override_bps must be > 0");
      c.link.tb_size_bits = tb_size_for_capacity(*c.capacity_override_bps, c.link, c.pattern);
    }
    c.link.validate();
    if (c.pipeline_delay_us < 0) throw std::invalid_argument("pipeline_delay_us must be >= 0");
    return c;
  }

  double capacity_bps() const {
    if (capacity_override_bps) return *capacity_override_bps;
    return capacity(link, pattern);
  }
};

/// Downlink budget of the slot starting at t, in bits (zero for U slots).
inline double slot_budget_bits(const GnbConfig& cfg, SimTime slot_begin) {
  switch (slot_kind_at(cfg.pattern, cfg.link, slot_begin)) {
    case SlotKind::D: return cfg.link.tb_size_bits;
    case SlotKind::S_dl: return cfg.link.tb_size_bits * cfg.pattern.s_split.dl_symbols / 14.0;
    default: return 0.0;
  }
}

inline SimTime slot_delivery_time(const GnbConfig& cfg, SimTime slot_begin) {
  const std::int64_t slot = cfg.link.slot_us();
  if (slot_kind_at(cfg.pattern, cfg.link, slot_begin) == SlotKind::S_dl)
    return SimTime(slot_begin.us + slot * cfg.pattern.s_split.dl_symbols / 14);
  return SimTime(slot_begin.us + slot);
}

template <class P>
concept RanPacket = requires(const P& p) {
  { p.wire_bytes() } -> std::convertible_to<std::uint32_t>;
};

struct OpaquePacket {
  std::uint32_t bytes = 0;
  std::uint64_t tag = 0;
  std::uint32_t wire_bytes() const { return bytes; }
};

template <RanPacket Packet>
struct Delivery {
  FlowId flow_id;
  Packet packet;
  SimTime delivery_time;
};

struct FlowCounters {
  std::uint64_t enqueued_bytes = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t dropped_bytes = 0;
  std::uint64_t dropped_packets = 0;
};

struct ServiceLogRow {
  SimTime slot_start;
  SlotKind kind;
  FlowId flow_id;
  std::uint64_t bytes;
};

/// Per-flow RLC queues with packet-level round-robin service.
template <RanPacket Packet>
class Gnb {
 public:
  explicit Gnb(GnbConfig config) : cfg_(config.normalized()) {}

  const GnbConfig& config() const { return cfg_; }

  void register_flow(FlowId id) {
    if (queues_.count(id)) return;
    queues_.emplace(id, Queue{});
    order_.push_back(id);
  }

  bool has_flow(FlowId id) const { return queues_.count(id) > 0; }

  /// Appends to the flow's queue; false (and a drop) when the queue limit would be exceeded.
  bool enqueue(FlowId flow, Packet packet, SimTime t) {
    auto it = queues_.find(flow);
    if (it == queues_.end()) throw std::invalid_argument("enqueue on unregistered flow " + std::to_string(flow));
    Queue& q = it->second;
    const std::uint32_t bytes = packet.wire_bytes();
    const bool over_limit = cfg_.per_queue_limit_bytes && q.byte_count + bytes > *cfg_.per_queue_limit_bytes;
    if (over_limit) {
      q.counters.dropped_bytes += bytes;
      q.counters.dropped_packets += 1;
      q.counters.enqueued_bytes += bytes;
      return false;
    }
    q.fifo.push_back(Entry{std::move(packet), t});
    q.byte_count += bytes;
    q.counters.enqueued_bytes += bytes;
    return true;
  }

  /// Serves one downlink slot starting at t. Only packets enqueued strictly before
  /// t are eligible; the round-robin pointer persists across slots.
  std::vector<Delivery<Packet>> serve_slot(SimTime t) {
    std::vector<Delivery<Packet>> out;
    double budget = slot_budget_bits(cfg_, t);
    if (budget <= 0.0 || order_.empty()) return out;
    const SimTime delivered_at = slot_delivery_time(cfg_, t);
    const SlotKind kind = slot_kind_at(cfg_.pattern, cfg_.link, t);
    std::map<FlowId, std::uint64_t> served;
    std::size_t misses = 0;
    while (misses < order_.size()) {
      const FlowId id = order_[rr_];
      rr_ = (rr_ + 1) % order_.size();
      Queue& q = queues_.at(id);
      if (q.fifo.empty() || !(q.fifo.front().enqueued < t) ||
          static_cast<double>(q.fifo.front().packet.wire_bytes()) * 8.0 > budget) {
        ++misses;
        continue;
      }
      misses = 0;
      Entry e = std::move(q.fifo.front());
      q.fifo.pop_front();
      const std::uint32_t bytes = e.packet.wire_bytes();
      budget -= bytes * 8.0;
      q.byte_count -= bytes;
      q.counters.delivered_bytes += bytes;
      served[id] += bytes;
      out.push_back(Delivery<Packet>{id, std::move(e.packet), delivered_at});
    }
    if (service_log_) {
      for (auto& [id, bytes] : served) service_log_->push_back(ServiceLogRow{t, kind, id, bytes});
    }
    return out;
  }

  std::map<FlowId, std::uint64_t> snapshot_rbs() const {
    std::map<FlowId, std::uint64_t> out;
    for (const auto& [id, q] : queues_) out[id] = q.byte_count;
    return out;
  }

  const FlowCounters& counters(FlowId id) const { return queues_.at(id).counters; }
  std::uint64_t queued_bytes(FlowId id) const { return queues_.at(id).byte_count; }
  std::size_t flow_count() const { return order_.size(); }

  void set_service_log(std::vector<ServiceLogRow>* log) { service_log_ = log; }

 private:
  struct Entry {
    Packet packet;
    SimTime enqueued;
  };
  struct Queue {
    std::deque<Entry> fifo;
    std::uint64_t byte_count = 0;
    FlowCounters counters;
  };

  GnbConfig cfg_;
  std::map<FlowId, Queue> queues_;
  std::vector<FlowId> order_;
  std::size_t rr_ = 0;
  std::vector<ServiceLogRow>* service_log_ = nullptr;
};

/// Drives a gNB on the engine: a service event at every downlink-capable slot
/// start, with each slot's deliveries handed to `sink` at delivery time plus the
/// pipeline delay.
template <RanPacket Packet>
class GnbDriver {
 public:
  using Sink = std::function<void(std::vector<Delivery<Packet>>&&)>;

  GnbDriver(Engine& engine, Gnb<Packet>& gnb, Sink sink) : engine_(engine), gnb_(gnb), sink_(std::move(sink)) {}

  void start(SimTime stop_at) {
    stop_at_ = stop_at;
    engine_.schedule(SimTime(0), "gnb.slot", [this] { on_slot(); });
  }

  std::uint64_t delivery_events_in_blackout() const { return blackout_deliveries_; }

 private:
  void on_slot() {
    const SimTime t = engine_.now();
    const auto kind = slot_kind_at(gnb_.config().pattern, gnb_.config().link, t);
    if (kind == SlotKind::D || kind == SlotKind::S_dl) {
      auto batch = gnb_.serve_slot(t);
      if (!batch.empty()) {
        const SimTime over_air = batch.front().delivery_time;
        const auto air_kind = slot_kind_at(gnb_.config().pattern, gnb_.config().link, SimTime(over_air.us - 1));
        if (air_kind != SlotKind::D && air_kind != SlotKind::S_dl) ++blackout_deliveries_;
        const SimTime at = over_air + SimTime(gnb_.config().pipeline_delay_us);
        engine_.schedule(at, "gnb.deliver", [this, b = std::move(batch)]() mutable { sink_(std::move(b)); });
      }
    }
    const SimTime next = t + SimTime(gnb_.config().link.slot_us());
    if (next <= stop_at_) engine_.schedule(next, "gnb.slot", [this] { on_slot(); });
  }

  Engine& engine_;
  Gnb<Packet>& gnb_;
  Sink sink_;
  SimTime stop_at_{};
  std::uint64_t blackout_deliveries_ = 0;
};

struct DelayBounds {
  std::int64_t min_us = 0;
  std::int64_t max_us = 0;
  std::int64_t spread_us() const { return max_us - min_us; }
};

/// Phase sweep: a burst (split into `mss`-byte packets) is offered to an idle
/// gNB at every `step_us` offset across one pattern period; returns min/max of
/// last-byte arrival minus enqueue time, pipeline delay included.
inline DelayBounds processing_delay_bounds(const GnbConfig& config, std::uint64_t burst_bytes, std::uint32_t mss = 1448,
                                           std::int64_t step_us = 100) {
  if (burst_bytes == 0) throw std::invalid_argument("burst_bytes must be > 0");
  const GnbConfig cfg = config.normalized();
  const std::int64_t slot = cfg.link.slot_us();
  const std::int64_t period = slot * static_cast<std::int64_t>(cfg.pattern.size());
  if (cfg.pattern.dl_fraction() <= 0.0) throw std::invalid_argument("pattern has no downlink capacity");
  DelayBounds b{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::min()};
  for (std::int64_t off = 0; off < period; off += step_us) {
    Gnb<OpaquePacket> g(cfg);
    g.register_flow(0);
    const SimTime t0(period + off);
    std::uint64_t left = burst_bytes;
    while (left > 0) {
      const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(left, mss));
      g.enqueue(0, OpaquePacket{len, 0}, t0);
      left -= len;
    }
    SimTime s = slot_start(cfg.link, t0);
    if (!(s > t0)) s = s + SimTime(slot);
    SimTime last{};
    while (g.queued_bytes(0) > 0) {
      for (auto& d : g.serve_slot(s)) last = std::max(last, d.delivery_time);
      s = s + SimTime(slot);
    }
    const std::int64_t delay = (last - t0).us + cfg.pipeline_delay_us;
    b.min_us = std::min(b.min_us, delay);
    b.max_us = std::max(b.max_us, delay);
  }
  return b;
}

inline void write_service_log(std::ostream& os, const std::vector<ServiceLogRow>& rows) {
  os << "slot_start_us,kind,flow_id,bytes_served\n";
  for (const auto& r : rows) os << r.slot_start.us << ',' << to_string(r.kind) << ',' << r.flow_id << ',' << r.bytes << '\n';
}

}  // namespace cecc::ran
