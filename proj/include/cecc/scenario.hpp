#pragma once

// Scenario configuration: JSON schema with explicit units, strict parsing
// (unknown fields are errors), normalization and digest, and the built-in
// reference preset.

#include "cecc/metrics.hpp"
#include "cecc/ran_gnb.hpp"
#include "cecc/sim_engine.hpp"
#include "cecc/transport_cc.hpp"
#include "cecc/vr_traffic.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace cecc::scenario {

/// Invalid configuration; `field` names the offending JSON path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what) : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct FlowConfig {
  vr::VrSourceProfile profile{};
  transport::CcKind cc = transport::CcKind::CubicLike;
};

struct WiredConfig {
  std::int64_t one_way_delay_us = 1000;
  std::int64_t server_upf_delay_us = 0;
};

struct UeConfig {
  std::int64_t processing_delay_us = 7000;
  std::uint32_t rwnd_bytes = transport::kNativeRwnd;
  int ack_every_segments = 2;
  std::int64_t delayed_ack_us = 1000;
};

struct CeccConfig {
  bool enabled = false;
  std::int64_t cycle_us = 1000;
  std::int64_t delay_standard_us = 10'000;
  double rwnd_headroom = 1.2;
  double frame_estimate_window_s = 2.0;
  bool rotate_on_admission = true;
};

struct MetricsConfig {
  metrics::QoeStandard qoe{};
  std::int64_t load_bin_us = 5000;
};

struct ScenarioConfig {
  double duration_s = 30.0;
  std::uint64_t seed = 1;
  WiredConfig wired{};
  ran::GnbConfig gnb{};
  UeConfig ue{};
  std::vector<FlowConfig> flows;
  CeccConfig cecc{};
  MetricsConfig metrics{};

  SimTime duration() const { return SimTime::from_s(duration_s); }
};

// ---- validation ---------------------------------------------------------

inline void validate(const ScenarioConfig& c) {
  if (!(c.duration_s >= 1.0)) throw ConfigError("duration_s", "must be >= 1");
  if (c.flows.empty()) throw ConfigError("flows", "at least one flow required");
  if (c.wired.one_way_delay_us < 0) throw ConfigError("wired.one_way_delay_us", "must be >= 0");
  if (c.wired.server_upf_delay_us < 0) throw ConfigError("wired.server_upf_delay_us", "must be >= 0");
  if (c.ue.processing_delay_us < 0) throw ConfigError("ue.processing_delay_us", "must be >= 0");
  if (c.ue.rwnd_bytes == 0) throw ConfigError("ue.rwnd_bytes", "must be > 0");
  if (c.ue.ack_every_segments < 1) throw ConfigError("ue.ack_every_segments", "must be >= 1");
  if (c.ue.delayed_ack_us < 0) throw ConfigError("ue.delayed_ack_us", "must be >= 0");
  if (c.cecc.cycle_us <= 0) throw ConfigError("cecc.cycle_us", "must be > 0");
  if (c.cecc.delay_standard_us <= 0) throw ConfigError("cecc.delay_standard_us", "must be > 0");
  if (!(c.cecc.rwnd_headroom > 1.0)) throw ConfigError("cecc.rwnd_headroom", "must exceed 1");
  if (!(c.cecc.frame_estimate_window_s > 0.0)) throw ConfigError("cecc.frame_estimate_window_s", "must be > 0");
  if (c.metrics.load_bin_us <= 0) throw ConfigError("metrics.load_bin_us", "must be > 0");
  try {
    c.metrics.qoe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("metrics", e.what());
  }
  try {
    (void)c.gnb.normalized();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("gnb", e.what());
  }
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    try {
      c.flows[i].profile.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("flows[" + std::to_string(i) + "]", e.what());
    }
  }
}

// ---- JSON ---------------------------------------------------------------

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

template <class T>
void read(const json& j, const char* key, const std::string& path, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string where = path.empty() ? key : path + "." + key;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(where, "expected a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer() && !(it->is_number_float() && std::floor(it->template get<double>()) == it->template get<double>()))
        throw ConfigError(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->template get<double>() < 0) throw ConfigError(where, "expected a non-negative integer");
      }
      out = static_cast<T>(it->template get<double>());
      return;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(where, "expected a string");
    }
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where, e.what());
  }
}

}  // namespace detail

inline ScenarioConfig from_json(const json& j) {
  using detail::check_keys;
  using detail::read;
  ScenarioConfig c;
  check_keys(j, "", {"duration_s", "seed", "wired", "gnb", "ue", "flows", "cecc", "metrics"});
  read(j, "duration_s", "", c.duration_s);
  read(j, "seed", "", c.seed);

  if (auto w = j.find("wired"); w != j.end()) {
    check_keys(*w, "wired", {"one_way_delay_us", "server_upf_delay_us"});
    read(*w, "one_way_delay_us", "wired", c.wired.one_way_delay_us);
    read(*w, "server_upf_delay_us", "wired", c.wired.server_upf_delay_us);
  }

  if (auto g = j.find("gnb"); g != j.end()) {
    check_keys(*g, "gnb",
               {"tdd_pattern", "special_split", "scs_khz", "bandwidth_hz", "mcs_index", "tb_size_bits", "capacity_override_bps",
                "per_queue_limit_bytes", "pipeline_delay_us"});
    std::string pat = c.gnb.pattern.to_string();
    read(*g, "tdd_pattern", "gnb", pat);
    if (auto s = g->find("special_split"); s != g->end()) {
      check_keys(*s, "gnb.special_split", {"dl_symbols", "guard_symbols", "ul_symbols"});
      read(*s, "dl_symbols", "gnb.special_split", c.gnb.pattern.s_split.dl_symbols);
      read(*s, "guard_symbols", "gnb.special_split", c.gnb.pattern.s_split.guard_symbols);
      read(*s, "ul_symbols", "gnb.special_split", c.gnb.pattern.s_split.ul_symbols);
    }
    try {
      c.gnb.pattern = ran::TddPattern::parse(pat, c.gnb.pattern.s_split);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("gnb.tdd_pattern", e.what());
    }
    read(*g, "scs_khz", "gnb", c.gnb.link.scs_khz);
    read(*g, "bandwidth_hz", "gnb", c.gnb.link.bandwidth_hz);
    read(*g, "mcs_index", "gnb", c.gnb.link.mcs_index);
    read(*g, "tb_size_bits", "gnb", c.gnb.link.tb_size_bits);
    read(*g, "pipeline_delay_us", "gnb", c.gnb.pipeline_delay_us);
    if (auto o = g->find("capacity_override_bps"); o != g->end()) {
      if (o->is_null()) {
        c.gnb.capacity_override_bps.reset();
      } else {
        double v = 0;
        read(*g, "capacity_override_bps", "gnb", v);
        c.gnb.capacity_override_bps = v;
      }
    }
    if (auto o = g->find("per_queue_limit_bytes"); o != g->end()) {
      if (o->is_null()) {
        c.gnb.per_queue_limit_bytes.reset();
      } else {
        std::uint64_t v = 0;
        read(*g, "per_queue_limit_bytes", "gnb", v);
        c.gnb.per_queue_limit_bytes = v;
      }
    }
  }

  if (auto u = j.find("ue"); u != j.end()) {
    check_keys(*u, "ue", {"processing_delay_us", "rwnd_bytes", "ack_every_segments", "delayed_ack_us"});
    read(*u, "processing_delay_us", "ue", c.ue.processing_delay_us);
    read(*u, "rwnd_bytes", "ue", c.ue.rwnd_bytes);
    read(*u, "ack_every_segments", "ue", c.ue.ack_every_segments);
    read(*u, "delayed_ack_us", "ue", c.ue.delayed_ack_us);
  }

  if (auto fl = j.find("flows"); fl != j.end()) {
    if (!fl->is_array()) throw ConfigError("flows", "expected an array");
    for (std::size_t i = 0; i < fl->size(); ++i) {
      const std::string p = "flows[" + std::to_string(i) + "]";
      const json& f = (*fl)[i];
      check_keys(f, p, {"bitrate_bps", "frame_rate_fps", "jitter_sigma_us", "cc", "start_time_us"});
      FlowConfig fc;
      read(f, "bitrate_bps", p, fc.profile.bitrate_bps);
      read(f, "frame_rate_fps", p, fc.profile.frame_rate_fps);
      read(f, "jitter_sigma_us", p, fc.profile.jitter_sigma_us);
      std::int64_t start = 0;
      read(f, "start_time_us", p, start);
      fc.profile.start_time = SimTime(start);
      std::string cc = transport::to_string(fc.cc);
      read(f, "cc", p, cc);
      try {
        fc.cc = transport::parse_cc_kind(cc);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(p + ".cc", e.what());
      }
      c.flows.push_back(fc);
    }
  }

  if (auto e = j.find("cecc"); e != j.end()) {
    check_keys(*e, "cecc",
               {"enabled", "cycle_us", "delay_standard_us", "rwnd_headroom", "frame_estimate_window_s", "rotate_on_admission"});
    read(*e, "enabled", "cecc", c.cecc.enabled);
    read(*e, "cycle_us", "cecc", c.cecc.cycle_us);
    read(*e, "delay_standard_us", "cecc", c.cecc.delay_standard_us);
    read(*e, "rwnd_headroom", "cecc", c.cecc.rwnd_headroom);
    read(*e, "frame_estimate_window_s", "cecc", c.cecc.frame_estimate_window_s);
    read(*e, "rotate_on_admission", "cecc", c.cecc.rotate_on_admission);
  }

  if (auto m = j.find("metrics"); m != j.end()) {
    check_keys(*m, "metrics", {"delay_threshold_us", "violation_budget", "include_slow_start", "load_bin_us"});
    read(*m, "delay_threshold_us", "metrics", c.metrics.qoe.delay_threshold_us);
    read(*m, "violation_budget", "metrics", c.metrics.qoe.violation_budget);
    read(*m, "include_slow_start", "metrics", c.metrics.qoe.include_slow_start);
    read(*m, "load_bin_us", "metrics", c.metrics.load_bin_us);
  }
  validate(c);
  return c;
}

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["duration_s"] = c.duration_s;
  j["seed"] = c.seed;
  j["wired"] = {{"one_way_delay_us", c.wired.one_way_delay_us}, {"server_upf_delay_us", c.wired.server_upf_delay_us}};
  json g;
  g["tdd_pattern"] = c.gnb.pattern.to_string();
  g["special_split"] = {{"dl_symbols", c.gnb.pattern.s_split.dl_symbols},
                        {"guard_symbols", c.gnb.pattern.s_split.guard_symbols},
                        {"ul_symbols", c.gnb.pattern.s_split.ul_symbols}};
  g["scs_khz"] = c.gnb.link.scs_khz;
  g["bandwidth_hz"] = c.gnb.link.bandwidth_hz;
  g["mcs_index"] = c.gnb.link.mcs_index;
  g["tb_size_bits"] = c.gnb.link.tb_size_bits;
  g["capacity_override_bps"] = c.gnb.capacity_override_bps ? json(*c.gnb.capacity_override_bps) : json(nullptr);
  g["per_queue_limit_bytes"] = c.gnb.per_queue_limit_bytes ? json(*c.gnb.per_queue_limit_bytes) : json(nullptr);
  g["pipeline_delay_us"] = c.gnb.pipeline_delay_us;
  j["gnb"] = g;
  j["ue"] = {{"processing_delay_us", c.ue.processing_delay_us},
             {"rwnd_bytes", c.ue.rwnd_bytes},
             {"ack_every_segments", c.ue.ack_every_segments},
             {"delayed_ack_us", c.ue.delayed_ack_us}};
  j["flows"] = json::array();
  for (const auto& f : c.flows) {
    j["flows"].push_back({{"bitrate_bps", f.profile.bitrate_bps},
                          {"frame_rate_fps", f.profile.frame_rate_fps},
                          {"jitter_sigma_us", f.profile.jitter_sigma_us},
                          {"cc", transport::to_string(f.cc)},
                          {"start_time_us", f.profile.start_time.us}});
  }
  j["cecc"] = {{"enabled", c.cecc.enabled},
               {"cycle_us", c.cecc.cycle_us},
               {"delay_standard_us", c.cecc.delay_standard_us},
               {"rwnd_headroom", c.cecc.rwnd_headroom},
               {"frame_estimate_window_s", c.cecc.frame_estimate_window_s},
               {"rotate_on_admission", c.cecc.rotate_on_admission}};
  j["metrics"] = {{"delay_threshold_us", c.metrics.qoe.delay_threshold_us},
                  {"violation_budget", c.metrics.qoe.violation_budget},
                  {"include_slow_start", c.metrics.qoe.include_slow_start},
                  {"load_bin_us", c.metrics.load_bin_us}};
  return j;
}

/// Canonical form: every default explicit, override-derived fields filled in.
/// The capacity override stays authoritative; tb_size_bits mirrors it.
inline ScenarioConfig normalize(const ScenarioConfig& in) {
  validate(in);
  ScenarioConfig c = in;
  c.gnb = c.gnb.normalized();
  return c;
}

inline std::string normalized_dump(const ScenarioConfig& c) { return to_json(normalize(c)).dump(2); }

inline std::string digest(const ScenarioConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(cecc::detail::fnv1a(normalized_dump(c))));
  return buf;
}

/// Reference topology: DDDSU at 15 kHz, 880 Mbps, 50 Mbps / 60 fps VR flows.
inline ScenarioConfig reference_scenario(int n_flows = 1, transport::CcKind cc = transport::CcKind::CubicLike, bool cecc_on = false) {
  ScenarioConfig c;
  c.duration_s = 30.0;
  c.seed = 1;
  c.gnb.pattern = ran::TddPattern::dddsu();
  c.gnb.link.scs_khz = 15;
  c.gnb.capacity_override_bps = 880e6;
  c.gnb.pipeline_delay_us = 3900;
  c.ue.processing_delay_us = 7000;
  for (int i = 0; i < n_flows; ++i) {
    FlowConfig f;
    f.cc = cc;
    c.flows.push_back(f);
  }
  c.cecc.enabled = cecc_on;
  return normalize(c);
}

inline ScenarioConfig parse_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return from_json(j);
}

/// Loads a JSON file, or the built-in preset when given "reference".
inline ScenarioConfig load(const std::string& path_or_preset) {
  if (path_or_preset == "reference") return reference_scenario();
  std::ifstream in(path_or_preset);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path_or_preset + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

}  // namespace cecc::scenario
