#pragma once

// Run orchestration: summary scalars, on-disk run outputs and flow-count x CCA sweeps.

#include "cecc/metrics.hpp"
#include "cecc/scenario.hpp"
#include "cecc/simulation.hpp"
#include "cecc/transport_cc.hpp"
#include "cecc/upf_cecc.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cecc::runner {

namespace fs = std::filesystem;
using vr::FlowId;

inline constexpr const char* kPartialMarker = "PARTIAL_OUTPUT";

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowSummary {
  FlowId flow_id = 0;
  std::int64_t p9999_delay_us = 0;
  double violation_fraction = 0.0;
  bool satisfied = false;
  std::uint64_t frames_delivered = 0;
};

struct RunSummary {
  std::string digest;
  std::uint64_t seed = 0;
  double satisfaction_rate = 0.0;
  double satisfaction_rate_excluding_slow_start = 0.0;
  /// Max load bin at or after the run-wide slow-start end; the whole run when no flow set stabilized.
  std::uint64_t max_bin_bytes = 0;
  std::uint64_t max_bin_bytes_whole_run = 0;
  std::uint64_t total_bytes = 0;
  double median_p9999_delay_us = 0.0;
  std::optional<SimTime> slow_start_end;
  std::vector<FlowSummary> flows;
};

inline std::map<FlowId, metrics::FlowSamples> one_way_samples(const sim::RunResult& r) {
  std::map<FlowId, metrics::FlowSamples> m;
  for (const auto& f : r.flows) m[f.flow_id] = f.one_way;
  return m;
}

inline metrics::LoadHistogram load_histogram(const scenario::ScenarioConfig& cfg, const sim::RunResult& r) {
  return metrics::bin_load(r.egress, cfg.duration(), cfg.metrics.load_bin_us);
}

inline std::uint64_t max_bin_from(const metrics::LoadHistogram& h, std::optional<SimTime> from) {
  if (!from) return h.max_bin();
  std::uint64_t m = 0;
  for (std::size_t i = static_cast<std::size_t>(from->us / h.bin_width_us); i < h.bins.size(); ++i) m = std::max(m, h.bins[i]);
  return m;
}

inline RunSummary summarize(const scenario::ScenarioConfig& cfg, const sim::RunResult& r) {
  RunSummary s;
  s.digest = scenario::digest(cfg);
  s.seed = cfg.seed;
  s.slow_start_end = r.slow_start_end;
  const auto samples = one_way_samples(r);
  metrics::QoeStandard q = cfg.metrics.qoe;
  const auto sat = metrics::satisfaction(samples, q);
  q.include_slow_start = false;
  s.satisfaction_rate_excluding_slow_start = metrics::satisfaction(samples, q).rate;
  s.satisfaction_rate = sat.rate;

  const auto h = load_histogram(cfg, r);
  s.total_bytes = h.total();
  s.max_bin_bytes_whole_run = h.max_bin();
  s.max_bin_bytes = max_bin_from(h, r.slow_start_end);

  std::vector<double> p;
  for (std::size_t i = 0; i < r.flows.size(); ++i) {
    const auto& f = r.flows[i];
    FlowSummary fsum;
    fsum.flow_id = f.flow_id;
    std::vector<std::int64_t> d;
    d.reserve(f.one_way.samples.size());
    for (const auto& x : f.one_way.samples) d.push_back(x.delay_us);
    fsum.p9999_delay_us = metrics::percentile(d, 99.99);
    fsum.violation_fraction = sat.flows[i].violation_fraction;
    fsum.satisfied = sat.flows[i].satisfied;
    fsum.frames_delivered = f.frames.size();
    p.push_back(static_cast<double>(fsum.p9999_delay_us));
    s.flows.push_back(fsum);
  }
  std::sort(p.begin(), p.end());
  s.median_p9999_delay_us = metrics::quantile_sorted(p, 0.5);
  return s;
}

inline nlohmann::ordered_json report_json(const RunSummary& s, const sim::RunResult& r) {
  nlohmann::ordered_json j;
  j["config_digest"] = s.digest;
  j["seed"] = s.seed;
  j["files"] = {"config.json", "satisfaction.csv", "delay_boxes.csv", "load_cdf.csv", "decisions.csv", "frames.csv"};
  j["decision_log"] = "decisions.csv";
  j["satisfaction_rate"] = s.satisfaction_rate;
  j["satisfaction_rate_excluding_slow_start"] = s.satisfaction_rate_excluding_slow_start;
  j["max_bin_bytes"] = s.max_bin_bytes;
  j["max_bin_bytes_whole_run"] = s.max_bin_bytes_whole_run;
  j["total_bytes"] = s.total_bytes;
  j["median_p9999_delay_us"] = s.median_p9999_delay_us;
  j["slow_start_end_us"] = s.slow_start_end ? nlohmann::ordered_json(s.slow_start_end->us) : nlohmann::ordered_json(nullptr);
  j["trace_hash"] = r.trace_hash;
  j["events"] = r.events;
  auto& flows = j["flows"] = nlohmann::ordered_json::array();
  for (const auto& f : s.flows)
    flows.push_back({{"flow_id", f.flow_id},
                     {"p9999_delay_us", f.p9999_delay_us},
                     {"violation_fraction", f.violation_fraction},
                     {"satisfied", f.satisfied},
                     {"frames_delivered", f.frames_delivered}});
  return j;
}

/// Writes files in order; on the first failure leaves a marker naming what was completed.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw OutputError("cannot create output directory '" + dir_.string() + "'");
    fs::remove(dir_ / kPartialMarker, ec);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (out) out << content;
    if (out) out.flush();
    if (!out) fail(name);
    done_.push_back(name);
  }

  const fs::path& path() const { return dir_; }

 private:
  [[noreturn]] void fail(const std::string& name) {
    std::ofstream marker(dir_ / kPartialMarker, std::ios::trunc);
    marker << "failed: " << name << '\n';
    for (const auto& d : done_) marker << "written: " << d << '\n';
    throw OutputError("failed writing '" + (dir_ / name).string() + "'");
  }

  fs::path dir_;
  std::vector<std::string> done_;
};

template <class F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

inline void write_run_outputs(OutputDir& out, const scenario::ScenarioConfig& cfg, const sim::RunResult& r, const RunSummary& s) {
  out.write("config.json", scenario::normalized_dump(cfg) + "\n");
  out.write("satisfaction.csv", render([&](std::ostream& os) { metrics::write_satisfaction_csv(os, metrics::satisfaction(one_way_samples(r), cfg.metrics.qoe)); }));
  out.write("delay_boxes.csv", render([&](std::ostream& os) {
              std::map<FlowId, std::vector<double>> per_flow;
              for (const auto& f : r.flows) {
                auto& v = per_flow[f.flow_id];
                for (const auto& x : f.one_way.samples) v.push_back(static_cast<double>(x.delay_us));
              }
              metrics::write_delay_boxes_csv(os, metrics::delay_distribution(per_flow));
            }));
  out.write("load_cdf.csv", render([&](std::ostream& os) { metrics::write_load_cdf_csv(os, metrics::load_cdf(load_histogram(cfg, r))); }));
  out.write("decisions.csv", render([&](std::ostream& os) {
              upf::write_decision_log_header(os);
              for (const auto& d : r.decisions) upf::write_decision_row(os, d);
            }));
  out.write("frames.csv", render([&](std::ostream& os) {
              transport::write_frame_log_header(os);
              for (const auto& f : r.flows)
                for (const auto& d : f.frames) transport::write_frame_log_row(os, d);
            }));
  out.write("report.json", report_json(s, r).dump(2) + "\n");
}

inline RunSummary run_to_dir(const scenario::ScenarioConfig& cfg, const fs::path& dir) {
  OutputDir out(dir);
  const auto normalized = scenario::normalize(cfg);
  const auto result = sim::run_scenario(normalized);
  const auto summary = summarize(normalized, result);
  write_run_outputs(out, normalized, result, summary);
  return summary;
}

// ---- sweep ----

/// "cecc" is CUBIC-like senders governed by CECC; the rest name a bare CCA.
inline scenario::ScenarioConfig sweep_cell_config(const scenario::ScenarioConfig& base, const std::string& label, int n_flows) {
  if (n_flows < 1) throw scenario::ConfigError("flows", "flow count must be >= 1");
  scenario::ScenarioConfig c = base;
  const bool governed = label == "cecc";
  const transport::CcKind cc = governed ? transport::CcKind::CubicLike : transport::parse_cc_kind(label);
  const scenario::FlowConfig proto = base.flows.empty() ? scenario::FlowConfig{} : base.flows.front();
  c.flows.assign(static_cast<std::size_t>(n_flows), proto);
  for (auto& f : c.flows) f.cc = cc;
  c.cecc.enabled = governed;
  return scenario::normalize(c);
}

struct SweepCell {
  std::string cc;
  int flows = 0;
  std::optional<RunSummary> summary;
  std::string error;
};

inline std::vector<int> parse_flow_counts(const std::string& s) {
  std::vector<int> out;
  const auto dots = s.find("..");
  try {
    if (dots != std::string::npos) {
      const int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
      if (lo > hi) throw scenario::ConfigError("flows", "empty range '" + s + "'");
      for (int n = lo; n <= hi; ++n) out.push_back(n);
    } else {
      std::stringstream ss(s);
      for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stoi(tok));
    }
  } catch (const std::logic_error&) {
    throw scenario::ConfigError("flows", "expected 'lo..hi' or a comma list, got '" + s + "'");
  }
  for (int n : out)
    if (n < 1) throw scenario::ConfigError("flows", "flow counts must be >= 1");
  if (out.empty()) throw scenario::ConfigError("flows", "no flow counts given");
  return out;
}

inline std::vector<std::string> parse_cc_labels(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok != "cecc" && tok != "cubic" && tok != "bbr" && tok != "udp")
      throw scenario::ConfigError("cc", "unknown kind '" + tok + "' (expected cecc, cubic, bbr or udp)");
    out.push_back(tok);
  }
  if (out.empty()) throw scenario::ConfigError("cc", "no congestion controls given");
  return out;
}

inline void write_sweep_summary(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "cc,flows,satisfaction_rate,max_bin_bytes,median_p9999_delay_us\n";
  for (const auto& c : cells) {
    os << c.cc << ',' << c.flows << ',';
    if (c.summary)
      os << c.summary->satisfaction_rate << ',' << c.summary->max_bin_bytes << ',' << c.summary->median_p9999_delay_us << '\n';
    else
      os << "nan,nan,nan\n";
  }
}

/// Cross product, cc-major. A failing cell is recorded and the sweep continues.
inline std::vector<SweepCell> sweep(const scenario::ScenarioConfig& base, const std::vector<int>& flow_counts,
                                    const std::vector<std::string>& ccs, const fs::path& out_dir) {
  OutputDir top(out_dir);
  std::vector<SweepCell> cells;
  for (const auto& cc : ccs) {
    for (int n : flow_counts) {
      SweepCell cell{cc, n, std::nullopt, {}};
      const fs::path dir = out_dir / (cc + "_" + std::to_string(n));
      try {
        cell.summary = run_to_dir(sweep_cell_config(base, cc, n), dir);
      } catch (const std::exception& e) {
        cell.error = e.what();
        std::error_code ec;
        fs::create_directories(dir, ec);
        std::ofstream(dir / "error.txt") << cell.error << '\n';
      }
      cells.push_back(std::move(cell));
    }
  }
  top.write("sweep_summary.csv", render([&](std::ostream& os) { write_sweep_summary(os, cells); }));
  return cells;
}

}  // namespace cecc::runner
