#pragma once

// gNB -> UPF cross-layer signaling: periodic multi-flow RLC buffer reports,
// change-triggered link-state reports, wired-delay measurement and the binary
// report codec.

#include "cecc/ran_gnb.hpp"
#include "cecc/sim_engine.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace cecc::signaling {

using vr::FlowId;

struct RbsEntry {
  FlowId flow_id = 0;
  std::uint32_t rbs_bytes = 0;
  friend bool operator==(const RbsEntry&, const RbsEntry&) = default;
};

struct GnbReport {
  SimTime timestamp{};
  std::vector<RbsEntry> entries;

  std::uint32_t rbs(FlowId id) const {
    for (const auto& e : entries)
      if (e.flow_id == id) return e.rbs_bytes;
    return 0;
  }
  friend bool operator==(const GnbReport&, const GnbReport&) = default;
};

struct LinkStateReport {
  SimTime timestamp{};
  std::uint32_t tb_size_bits = 0;
  std::uint16_t scs_khz = 0;
  std::uint32_t bandwidth_hz = 0;
  std::uint8_t mcs_index = 0;
  friend bool operator==(const LinkStateReport&, const LinkStateReport&) = default;
};

struct WiredPathModel {
  std::int64_t one_way_delay_us = 1000;
  bool symmetric = true;
};

class ClockViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Packs one RBS snapshot of every registered flow into a single report.
inline GnbReport emit_rbs_report(const std::map<FlowId, std::uint64_t>& snapshot, SimTime t) {
  GnbReport r{t, {}};
  r.entries.reserve(snapshot.size());
  for (const auto& [id, bytes] : snapshot) {
    r.entries.push_back(RbsEntry{id, static_cast<std::uint32_t>(std::min<std::uint64_t>(bytes, UINT32_MAX))});
  }
  return r;
}

inline LinkStateReport to_report(const ran::LinkState& s, SimTime t) {
  return LinkStateReport{t, static_cast<std::uint32_t>(std::llround(s.tb_size_bits)), static_cast<std::uint16_t>(s.scs_khz),
                         static_cast<std::uint32_t>(std::llround(s.bandwidth_hz)), static_cast<std::uint8_t>(s.mcs_index)};
}

/// A report iff there is no previous observation or any field changed.
inline std::optional<LinkStateReport> emit_link_state_if_changed(const ran::LinkState& current,
                                                                 const std::optional<ran::LinkState>& previous, SimTime t) {
  if (previous && *previous == current) return std::nullopt;
  return to_report(current, t);
}

inline std::int64_t measure_wired_delay(const GnbReport& report, SimTime receive_time) {
  if (receive_time < report.timestamp) {
    throw ClockViolation("report received at " + std::to_string(receive_time.us) + "us before its timestamp " +
                         std::to_string(report.timestamp.us) + "us");
  }
  return (receive_time - report.timestamp).us;
}

/// EWMA (alpha = 1/8) of measured wired delay; the first sample seeds it exactly.
class WiredDelayEstimator {
 public:
  static constexpr double kAlpha = 1.0 / 8.0;

  double update(std::int64_t sample_us) {
    if (!seeded_) {
      estimate_ = static_cast<double>(sample_us);
      seeded_ = true;
    } else {
      estimate_ += kAlpha * (static_cast<double>(sample_us) - estimate_);
    }
    return estimate_;
  }

  bool seeded() const { return seeded_; }
  double estimate_us() const { return estimate_; }

  /// Seeds with an arbitrary prior (used only by tests of convergence).
  void seed_with(double prior_us) {
    estimate_ = prior_us;
    seeded_ = true;
  }

 private:
  bool seeded_ = false;
  double estimate_ = 0.0;
};

// ---- Binary codec -----------------------------------------------------------
// Little-endian, fixed width.
//   header   : msg_type u8 (1=RBS, 2=LINKSTATE), timestamp_us u64, flow_count u16
//   RBS      : flow_count x { flow_id u32, rbs_bytes u32 }
//   LINKSTATE: { tb_size_bits u32, scs_khz u16, bandwidth_hz u32, mcs_index u8 }

inline constexpr std::uint8_t kMsgRbs = 1;
inline constexpr std::uint8_t kMsgLinkState = 2;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) throw CodecError("truncated signaling message");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::vector<std::uint8_t> encode(const GnbReport& r) {
  if (r.entries.size() > UINT16_MAX) throw CodecError("too many flows for one report");
  if (r.timestamp.us < 0) throw CodecError("negative timestamp");
  std::vector<std::uint8_t> out;
  out.reserve(11 + 8 * r.entries.size());
  detail::put_le<std::uint8_t>(out, kMsgRbs);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(r.timestamp.us));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.entries.size()));
  for (const auto& e : r.entries) {
    detail::put_le<std::uint32_t>(out, e.flow_id);
    detail::put_le<std::uint32_t>(out, e.rbs_bytes);
  }
  return out;
}

inline std::vector<std::uint8_t> encode(const LinkStateReport& r) {
  if (r.timestamp.us < 0) throw CodecError("negative timestamp");
  std::vector<std::uint8_t> out;
  out.reserve(22);
  detail::put_le<std::uint8_t>(out, kMsgLinkState);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(r.timestamp.us));
  detail::put_le<std::uint16_t>(out, 0);
  detail::put_le<std::uint32_t>(out, r.tb_size_bits);
  detail::put_le<std::uint16_t>(out, r.scs_khz);
  detail::put_le<std::uint32_t>(out, r.bandwidth_hz);
  detail::put_le<std::uint8_t>(out, r.mcs_index);
  return out;
}

using SignalingMessage = std::variant<GnbReport, LinkStateReport>;

inline SignalingMessage decode(std::span<const std::uint8_t> buf) {
  detail::Reader rd(buf);
  const auto type = rd.get<std::uint8_t>();
  const auto ts = rd.get<std::uint64_t>();
  const auto count = rd.get<std::uint16_t>();
  if (ts > static_cast<std::uint64_t>(INT64_MAX)) throw CodecError("timestamp out of range");
  SignalingMessage msg;
  if (type == kMsgRbs) {
    GnbReport r{SimTime(static_cast<std::int64_t>(ts)), {}};
    r.entries.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
      const auto id = rd.get<std::uint32_t>();
      const auto rbs = rd.get<std::uint32_t>();
      r.entries.push_back(RbsEntry{id, rbs});
    }
    msg = std::move(r);
  } else if (type == kMsgLinkState) {
    if (count != 0) throw CodecError("link-state message carries a non-zero flow count");
    LinkStateReport r;
    r.timestamp = SimTime(static_cast<std::int64_t>(ts));
    r.tb_size_bits = rd.get<std::uint32_t>();
    r.scs_khz = rd.get<std::uint16_t>();
    r.bandwidth_hz = rd.get<std::uint32_t>();
    r.mcs_index = rd.get<std::uint8_t>();
    msg = r;
  } else {
    throw CodecError("unknown signaling message type " + std::to_string(type));
  }
  if (!rd.done()) throw CodecError("trailing bytes after signaling message");
  return msg;
}

/// Runs the gNB side of the channel on the engine: an RBS report every
/// `period_us` (starting at `phase_us`) and link-state reports on change, each
/// delivered to the UPF after the wired one-way delay. Delivery is reliable and
/// in order.
template <ran::RanPacket Packet>
class GnbReporter {
 public:
  using RbsSink = std::function<void(const GnbReport&, SimTime receive_time)>;
  using LinkSink = std::function<void(const LinkStateReport&, SimTime receive_time)>;

  GnbReporter(Engine& engine, const ran::Gnb<Packet>& gnb, WiredPathModel wire, RbsSink on_rbs, LinkSink on_link,
              std::int64_t period_us = 1000, std::int64_t phase_us = 0)
      : engine_(engine),
        gnb_(gnb),
        wire_(wire),
        on_rbs_(std::move(on_rbs)),
        on_link_(std::move(on_link)),
        period_us_(period_us),
        phase_us_(phase_us) {}

  void start(SimTime stop_at) {
    stop_at_ = stop_at;
    observe_link(gnb_.config().link);
    engine_.schedule(SimTime(phase_us_), "sig.rbs", [this] { tick(); });
  }

  /// Call when the air-interface parameters may have changed.
  void observe_link(const ran::LinkState& current) {
    if (auto rep = emit_link_state_if_changed(current, last_link_, engine_.now())) {
      last_link_ = current;
      ++link_reports_;
      const SimTime rx = engine_.now() + SimTime(wire_.one_way_delay_us);
      engine_.schedule(rx, "sig.link.rx", [this, r = *rep, rx] { on_link_(r, rx); });
    }
  }

  std::uint64_t rbs_reports() const { return rbs_reports_; }
  std::uint64_t link_reports() const { return link_reports_; }

 private:
  void tick() {
    GnbReport r = emit_rbs_report(gnb_.snapshot_rbs(), engine_.now());
    ++rbs_reports_;
    const SimTime rx = engine_.now() + SimTime(wire_.one_way_delay_us);
    engine_.schedule(rx, "sig.rbs.rx", [this, r = std::move(r), rx] { on_rbs_(r, rx); });
    const SimTime next = engine_.now() + SimTime(period_us_);
    if (next < stop_at_) engine_.schedule(next, "sig.rbs", [this] { tick(); });
  }

  Engine& engine_;
  const ran::Gnb<Packet>& gnb_;
  WiredPathModel wire_;
  RbsSink on_rbs_;
  LinkSink on_link_;
  std::int64_t period_us_;
  std::int64_t phase_us_;
  SimTime stop_at_{};
  std::optional<ran::LinkState> last_link_{};
  std::uint64_t rbs_reports_ = 0;
  std::uint64_t link_reports_ = 0;
};

}  // namespace cecc::signaling
