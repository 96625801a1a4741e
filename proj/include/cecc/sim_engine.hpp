#pragma once

// Deterministic discrete-event core: integer-microsecond clock, FIFO tie-broken
// event queue and named random streams.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cecc {

/// Simulation time in integer microseconds since the start of a run.
struct SimTime {
  std::int64_t us = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t micros) : us(micros) {}

  static constexpr SimTime from_ms(double ms) { return SimTime(static_cast<std::int64_t>(ms * 1000.0)); }
  static constexpr SimTime from_s(double s) { return SimTime(static_cast<std::int64_t>(s * 1e6)); }
  static constexpr SimTime max() { return SimTime(std::numeric_limits<std::int64_t>::max()); }

  constexpr double ms() const { return static_cast<double>(us) / 1000.0; }
  constexpr double s() const { return static_cast<double>(us) / 1e6; }

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime(a.us + b.us); }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime(a.us - b.us); }
  constexpr SimTime& operator+=(SimTime d) {
    us += d.us;
    return *this;
  }
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.us << "us"; }

using EventId = std::uint64_t;

/// Thrown when an event would be scheduled before the current clock.
class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One executed event as recorded in the optional trace.
struct TraceEntry {
  SimTime time;
  std::uint64_t ordinal;
  std::string_view label;
};

/// Single-threaded event loop. Events with equal fire time run in the order
/// they were scheduled. Labels must outlive the engine (string literals).
class Engine {
 public:
  using Action = std::function<void()>;

  SimTime now() const { return now_; }

  EventId schedule(SimTime at, std::string_view label, Action action) {
    if (at < now_) {
      throw SchedulingError("event '" + std::string(label) + "' scheduled at " + std::to_string(at.us) +
                            "us while clock is " + std::to_string(now_.us) + "us");
    }
    const EventId id = next_ordinal_++;
    queue_.push(Key{at, id});
    pending_.emplace(id, Pending{label, std::move(action)});
    return id;
  }

  EventId schedule_in(SimTime delay, std::string_view label, Action action) {
    return schedule(now_ + delay, label, std::move(action));
  }

  /// True iff the event existed and had not yet fired.
  bool cancel(EventId id) { return pending_.erase(id) > 0; }

  /// Executes every event with fire time <= t_end; leaves the clock at t_end.
  std::uint64_t run_until(SimTime t_end) {
    if (t_end < now_) {
      throw SchedulingError("run_until target precedes current clock");
    }
    std::uint64_t executed = 0;
    while (!queue_.empty() && queue_.top().at <= t_end) {
      const Key key = queue_.top();
      queue_.pop();
      auto it = pending_.find(key.ordinal);
      if (it == pending_.end()) continue;  // cancelled
      Pending p = std::move(it->second);
      pending_.erase(it);
      now_ = key.at;
      if (trace_ != nullptr) trace_->push_back(TraceEntry{key.at, key.ordinal, p.label});
      if (trace_hash_enabled_) fold_trace(key.at, key.ordinal, p.label);
      ++executed;
      p.action();
    }
    now_ = t_end;
    return executed;
  }

  std::size_t pending_count() const { return pending_.size(); }

  /// Records every executed event into `sink` (nullptr disables).
  void set_trace(std::vector<TraceEntry>* sink) { trace_ = sink; }

  /// Keeps a running FNV-1a digest of (time, ordinal, label) for determinism checks
  /// without storing the full trace.
  void enable_trace_hash() { trace_hash_enabled_ = true; }
  std::uint64_t trace_hash() const { return trace_hash_; }

 private:
  struct Key {
    SimTime at;
    std::uint64_t ordinal;
    bool operator>(const Key& o) const { return at != o.at ? at > o.at : ordinal > o.ordinal; }
  };
  struct Pending {
    std::string_view label;
    Action action;
  };

  void fold_bytes(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      trace_hash_ ^= b[i];
      trace_hash_ *= 0x100000001b3ULL;
    }
  }
  void fold_trace(SimTime t, std::uint64_t ordinal, std::string_view label) {
    fold_bytes(&t.us, sizeof t.us);
    fold_bytes(&ordinal, sizeof ordinal);
    fold_bytes(label.data(), label.size());
  }

  SimTime now_{};
  std::uint64_t next_ordinal_ = 0;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> queue_;
  std::unordered_map<EventId, Pending> pending_;
  std::vector<TraceEntry>* trace_ = nullptr;
  bool trace_hash_enabled_ = false;
  std::uint64_t trace_hash_ = 0xcbf29ce484222325ULL;
};

/// Writes a trace as `time_us\tordinal\taction_label` lines.
inline void write_trace(std::ostream& os, const std::vector<TraceEntry>& trace) {
  for (const auto& e : trace) os << e.time.us << '\t' << e.ordinal << '\t' << e.label << '\n';
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// A reproducible random stream keyed by (seed, stream_id). Distinct stochastic
/// sources use distinct ids so adding a source never perturbs another's draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_id)
      : seed_(seed), id_(stream_id), gen_(detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a(stream_id)))) {}

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_id() const { return id_; }

  double normal(double mean, double stddev) {
    if (stddev <= 0.0) return mean;
    // Box-Muller; std::normal_distribution output is implementation-defined.
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::uint64_t seed_;
  std::string id_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cecc
