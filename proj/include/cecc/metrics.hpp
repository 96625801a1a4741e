#pragma once

// Evaluation aggregates: per-flow QoE satisfaction, delay box summaries and the
// binned egress-load CDF, plus their CSV forms.

#include "cecc/sim_engine.hpp"
#include "cecc/vr_traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cecc::metrics {

using vr::FlowId;

struct QoeStandard {
  std::int64_t delay_threshold_us = 10'000;
  double violation_budget = 0.0001;
  bool include_slow_start = true;

  void validate() const {
    if (!(violation_budget >= 0.0 && violation_budget <= 1.0)) throw std::invalid_argument("violation_budget must be in [0,1]");
    if (delay_threshold_us < 0) throw std::invalid_argument("delay_threshold_us must be >= 0");
  }
};

/// One packet's one-way delay, tagged with its frame's generation time.
struct OneWaySample {
  SimTime at{};
  std::int64_t delay_us = 0;
};

struct FlowSamples {
  std::vector<OneWaySample> samples;
  /// End of slow start; samples tagged strictly before it belong to the slow-start phase.
  std::optional<SimTime> slow_start_end{};
};

struct FlowSatisfaction {
  FlowId flow_id = 0;
  std::uint64_t counted = 0;
  std::uint64_t violations = 0;
  std::uint64_t slow_start_violations = 0;
  std::uint64_t steady_violations = 0;
  double violation_fraction = 0.0;
  bool satisfied = false;
};

struct SatisfactionResult {
  std::vector<FlowSatisfaction> flows;
  double rate = 0.0;
};

inline bool in_slow_start(const FlowSamples& f, const OneWaySample& s) {
  // No recorded stabilization means the whole run was slow start.
  return !f.slow_start_end || s.at < *f.slow_start_end;
}

inline SatisfactionResult satisfaction(const std::map<FlowId, FlowSamples>& per_flow, const QoeStandard& std_) {
  std_.validate();
  if (per_flow.empty()) throw std::invalid_argument("satisfaction needs at least one flow");
  SatisfactionResult res;
  std::size_t ok = 0;
  for (const auto& [id, f] : per_flow) {
    if (f.samples.empty()) throw std::invalid_argument("flow " + std::to_string(id) + " has no delay samples");
    FlowSatisfaction s;
    s.flow_id = id;
    for (const auto& x : f.samples) {
      const bool ss = in_slow_start(f, x);
      const bool bad = x.delay_us > std_.delay_threshold_us;
      if (bad) (ss ? s.slow_start_violations : s.steady_violations)++;
      if (!std_.include_slow_start && ss) continue;
      ++s.counted;
      if (bad) ++s.violations;
    }
    if (s.counted == 0) {
      // never left slow start
      s.counted = f.samples.size();
      s.violations = s.slow_start_violations + s.steady_violations;
      s.violation_fraction = static_cast<double>(s.violations) / static_cast<double>(s.counted);
      s.satisfied = false;
    } else {
      s.violation_fraction = static_cast<double>(s.violations) / static_cast<double>(s.counted);
      s.satisfied = s.violation_fraction <= std_.violation_budget;
    }
    ok += s.satisfied ? 1 : 0;
    res.flows.push_back(s);
  }
  res.rate = static_cast<double>(ok) / static_cast<double>(per_flow.size());
  return res;
}

/// Linear-interpolated quantile of sorted data, q in [0,1].
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BoxSummary {
  FlowId flow_id = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;  // min/max are whisker ends
  std::vector<double> outliers;
  std::size_t n = 0;
};

inline BoxSummary box_summary(FlowId id, std::vector<double> xs) {
  if (xs.size() < 5) throw std::invalid_argument("box summary needs at least 5 samples");
  std::sort(xs.begin(), xs.end());
  BoxSummary b;
  b.flow_id = id;
  b.n = xs.size();
  b.q1 = quantile_sorted(xs, 0.25);
  b.median = quantile_sorted(xs, 0.5);
  b.q3 = quantile_sorted(xs, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.min = b.q1;
  b.max = b.q3;
  bool first = true;
  for (double x : xs) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
      continue;
    }
    if (first) b.min = x;
    first = false;
    b.max = x;
  }
  return b;
}

inline std::vector<BoxSummary> delay_distribution(const std::map<FlowId, std::vector<double>>& per_flow) {
  std::vector<BoxSummary> out;
  for (const auto& [id, xs] : per_flow) out.push_back(box_summary(id, xs));
  return out;
}

struct LoadHistogram {
  std::int64_t bin_width_us = 5000;
  std::vector<std::uint64_t> bins;
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto b : bins) s += b;
    return s;
  }
  std::uint64_t max_bin() const { return bins.empty() ? 0 : *std::max_element(bins.begin(), bins.end()); }
};

/// Bins (ts, bytes) egress entries over [0, duration).
inline LoadHistogram bin_load(const std::vector<std::pair<SimTime, std::uint32_t>>& egress, SimTime duration,
                              std::int64_t bin_width_us = 5000) {
  if (bin_width_us <= 0) throw std::invalid_argument("bin width must be > 0");
  LoadHistogram h;
  h.bin_width_us = bin_width_us;
  const auto n = static_cast<std::size_t>((duration.us + bin_width_us - 1) / bin_width_us);
  h.bins.assign(std::max<std::size_t>(n, 1), 0);
  for (const auto& [t, b] : egress) {
    auto idx = static_cast<std::size_t>(std::max<std::int64_t>(0, t.us) / bin_width_us);
    if (idx >= h.bins.size()) h.bins.resize(idx + 1, 0);
    h.bins[idx] += b;
  }
  return h;
}

struct CdfPoint {
  std::uint64_t bin_bytes = 0;
  double cum_fraction = 0.0;
};

/// Empirical CDF of per-bin totals; one point per distinct value.
inline std::vector<CdfPoint> load_cdf(const LoadHistogram& h) {
  if (h.bins.size() < 10) throw std::invalid_argument("load CDF needs at least 10 bins");
  std::vector<std::uint64_t> v = h.bins;
  std::sort(v.begin(), v.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back(CdfPoint{v[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

/// Nearest-rank percentile of integer samples, p in (0,100].
inline std::int64_t percentile(std::vector<std::int64_t> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(xs.begin(), xs.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(xs.size())));
  rank = std::clamp<std::size_t>(rank, 1, xs.size());
  return xs[rank - 1];
}

// ---- CSV --------------------------------------------------------------------

inline void write_satisfaction_csv(std::ostream& os, const SatisfactionResult& r) {
  os << "flow_id,violation_fraction,satisfied\n";
  for (const auto& f : r.flows) os << f.flow_id << ',' << f.violation_fraction << ',' << (f.satisfied ? 1 : 0) << '\n';
}

inline void write_delay_boxes_csv(std::ostream& os, const std::vector<BoxSummary>& boxes) {
  os << "flow_id,min,q1,median,q3,max,outliers\n";
  for (const auto& b : boxes) {
    os << b.flow_id << ',' << b.min << ',' << b.q1 << ',' << b.median << ',' << b.q3 << ',' << b.max << ',';
    for (std::size_t i = 0; i < b.outliers.size(); ++i) os << (i ? ";" : "") << b.outliers[i];
    os << '\n';
  }
}

inline void write_load_cdf_csv(std::ostream& os, const std::vector<CdfPoint>& cdf) {
  os << "bin_bytes,cum_fraction\n";
  for (const auto& p : cdf) os << p.bin_bytes << ',' << p.cum_fraction << '\n';
}

}  // namespace cecc::metrics
