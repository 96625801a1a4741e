#pragma once

// Cloud-VR frame source: one constant-size frame per tick, emitted as a single
// burst, with normally distributed inter-frame spacing. Also the analytical tools
// for burst throughput and multi-flow frame collision probability.

#include "cecc/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace cecc::vr {

using FlowId = std::uint32_t;

struct VrSourceProfile {
  double bitrate_bps = 50e6;
  double frame_rate_fps = 60.0;
  double jitter_sigma_us = 1000.0;
  SimTime start_time{};

  /// Nominal frame interval.
  double jitter_mu_us() const { return 1e6 / frame_rate_fps; }

  void validate() const {
    if (!(bitrate_bps > 0.0)) throw std::invalid_argument("bitrate_bps must be > 0");
    if (!(frame_rate_fps > 0.0)) throw std::invalid_argument("frame_rate_fps must be > 0");
    if (jitter_sigma_us < 0.0) throw std::invalid_argument("jitter_sigma_us must be >= 0");
    if (!(jitter_sigma_us < jitter_mu_us() / 3.0))
      throw std::invalid_argument("jitter_sigma_us must be below a third of the frame interval");
    if (start_time.us < 0) throw std::invalid_argument("start_time must be >= 0");
  }
};

struct VrFrame {
  FlowId flow_id = 0;
  std::uint64_t index = 0;
  std::uint32_t size_bytes = 0;
  SimTime gen_time{};
};

/// Bytes per frame: ceil(bitrate / fps / 8).
inline std::uint32_t mean_frame_size(const VrSourceProfile& p) {
  // Snap before the ceiling so exact quotients (8 Mbps at 1000 fps) are not bumped
  // up by floating-point error.
  const double bytes = p.bitrate_bps / p.frame_rate_fps / 8.0;
  const double snapped = std::round(bytes);
  return static_cast<std::uint32_t>(std::abs(bytes - snapped) < 1e-9 ? snapped : std::ceil(bytes));
}

/// One frame squeezed into a 1 ms window, in bit/s.
inline double instantaneous_throughput(const VrSourceProfile& p) {
  return p.bitrate_bps * 1000.0 / p.frame_rate_fps;
}

/// Draw from N(mu, sigma^2) truncated below at max(mu - 3 sigma, 1 us), rounded to whole microseconds.
inline std::int64_t next_frame_interval(const VrSourceProfile& p, RngStream& rng) {
  const double mu = p.jitter_mu_us();
  const double sigma = p.jitter_sigma_us;
  const double floor_us = std::max(mu - 3.0 * sigma, 1.0);
  const double draw = std::max(rng.normal(mu, sigma), floor_us);
  return std::max<std::int64_t>(1, std::llround(draw));
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-flow closed form: Y2 - Y1 ~ N(0, 2 sigma^2 T), so P(|diff| < w) = 2 Phi(w / (sigma sqrt(2T))) - 1.
inline double collision_probability_closed_form(double sigma_us, int horizon_frames, double window_us = 1000.0) {
  if (!(sigma_us > 0.0)) throw std::invalid_argument("closed form requires sigma > 0");
  if (horizon_frames < 1) throw std::invalid_argument("horizon_frames must be >= 1");
  return 2.0 * standard_normal_cdf(window_us / (sigma_us * std::sqrt(2.0 * horizon_frames))) - 1.0;
}

struct CollisionModel {
  int n_flows = 2;
  double mu_us = 1e6 / 60.0;
  double sigma_us = 1000.0;
  int horizon_frames = 1;
  double window_us = 1000.0;
};

struct CollisionEstimate {
  double probability = 0.0;
  double stderr_ = 0.0;
  std::int64_t trials = 0;
};

/// Monte Carlo estimate of P(max_i Y_iT - min_i Y_iT < window), each Y_iT the sum
/// of T independent N(mu, sigma^2) frame intervals.
inline CollisionEstimate collision_probability_mc(const CollisionModel& m, std::int64_t trials, std::uint64_t seed) {
  if (m.n_flows < 2) throw std::invalid_argument("collision model needs at least two flows");
  if (m.horizon_frames < 1) throw std::invalid_argument("horizon_frames must be >= 1");
  if (trials < 1000) throw std::invalid_argument("at least 1000 trials required");
  RngStream rng(seed, "collision-mc");
  std::int64_t hits = 0;
  for (std::int64_t k = 0; k < trials; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < m.n_flows; ++i) {
      double y = 0.0;
      for (int j = 0; j < m.horizon_frames; ++j) y += rng.normal(m.mu_us, m.sigma_us);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    if (hi - lo < m.window_us) ++hits;
  }
  CollisionEstimate e;
  e.trials = trials;
  e.probability = static_cast<double>(hits) / static_cast<double>(trials);
  e.stderr_ = std::sqrt(e.probability * (1.0 - e.probability) / static_cast<double>(trials));
  return e;
}

/// Emits frames for one flow on the engine. Each frame is handed to `sink` at
/// its generation instant in full.
class VrSource {
 public:
  using Sink = std::function<void(const VrFrame&)>;

  VrSource(Engine& engine, FlowId flow, VrSourceProfile profile, std::uint64_t seed, Sink sink)
      : engine_(engine),
        flow_(flow),
        profile_(profile),
        rng_(seed, "vr-jitter-" + std::to_string(flow)),
        frame_bytes_(mean_frame_size(profile)),
        sink_(std::move(sink)) {
    profile_.validate();
  }

  void start(SimTime stop_at) {
    stop_at_ = stop_at;
    if (profile_.start_time <= stop_at_) {
      engine_.schedule(profile_.start_time, "vr.frame", [this] { emit(); });
    }
  }

  std::uint64_t frames_emitted() const { return next_index_; }
  std::uint64_t bytes_emitted() const { return next_index_ * frame_bytes_; }
  std::uint32_t frame_bytes() const { return frame_bytes_; }
  const VrSourceProfile& profile() const { return profile_; }

 private:
  void emit() {
    VrFrame f{flow_, next_index_++, frame_bytes_, engine_.now()};
    sink_(f);
    const SimTime next = engine_.now() + SimTime(next_frame_interval(profile_, rng_));
    if (next <= stop_at_) engine_.schedule(next, "vr.frame", [this] { emit(); });
  }

  Engine& engine_;
  FlowId flow_;
  VrSourceProfile profile_;
  RngStream rng_;
  std::uint32_t frame_bytes_;
  Sink sink_;
  SimTime stop_at_{};
  std::uint64_t next_index_ = 0;
};

}  // namespace cecc::vr
