#pragma once

// End-to-end topology for one scenario:
//   VR source -> server transport -> UPF (CECC) -> wire -> gNB RLC/TDD -> UE
//   UE ACK -> uplink TDD portion -> wire -> UPF (held or forwarded) -> server

#include "cecc/edge_signaling.hpp"
#include "cecc/metrics.hpp"
#include "cecc/ran_gnb.hpp"
#include "cecc/scenario.hpp"
#include "cecc/sim_engine.hpp"
#include "cecc/transport_cc.hpp"
#include "cecc/upf_cecc.hpp"
#include "cecc/vr_traffic.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace cecc::sim {

using transport::AckSegment;
using transport::Segment;
using vr::FlowId;

struct FlowResult {
  FlowId flow_id = 0;
  transport::CcKind cc = transport::CcKind::CubicLike;
  bool governed = false;
  metrics::FlowSamples one_way;               // UPF egress -> UE, per packet
  std::vector<transport::DelaySample> frames;  // completed frames
  std::uint64_t frames_generated = 0;
  std::uint64_t bytes_generated = 0;
  std::uint64_t bytes_delivered_in_order = 0;
  std::uint64_t retransmitted_bytes = 0;
  std::uint64_t gating_violations = 0;
  std::uint64_t sender_max_ack = 0;
  double srtt_us = 0.0;
  std::optional<SimTime> stabilized_at;
  upf::UpfFlowStats upf{};
  std::uint64_t dropped_packets = 0;
};

struct RunResult {
  std::vector<FlowResult> flows;
  std::vector<std::pair<SimTime, std::uint32_t>> egress;  // UPF egress, all flows
  std::vector<upf::DecisionRow> decisions;
  std::vector<ran::ServiceLogRow> service_log;
  std::uint64_t trace_hash = 0;
  std::uint64_t events = 0;
  std::uint64_t rbs_reports = 0;
  std::uint64_t link_reports = 0;
  std::uint64_t control_cycles = 0;
  std::uint64_t soundness_violations = 0;
  std::uint64_t blackout_deliveries = 0;
  std::optional<double> wired_estimate_after_first_report_us;
  double final_wired_estimate_us = 0.0;
  std::optional<SimTime> slow_start_end;
};

struct RunOptions {
  bool keep_service_log = false;
  bool keep_decisions = true;
};

/// Owns every entity of one run; single use.
class Simulation {
 public:
  explicit Simulation(scenario::ScenarioConfig cfg, RunOptions opt = {})
      : cfg_(scenario::normalize(cfg)),
        opt_(opt),
        gnb_(cfg_.gnb),
        upf_(engine_, make_upf_config(cfg_), cfg_.gnb, [this](const Segment& s) { upf_to_gnb(s); },
             [this](const AckSegment& a) { upf_to_server(a); }) {
    build();
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  RunResult run() {
    const SimTime stop = cfg_.duration();
    engine_.enable_trace_hash();
    if (opt_.keep_service_log) gnb_.set_service_log(&result_.service_log);
    driver_->start(stop);
    reporter_->start(stop);
    for (auto& f : flows_) f->source->start(stop);
    result_.events = engine_.run_until(stop);
    finish();
    return std::move(result_);
  }

  const scenario::ScenarioConfig& config() const { return cfg_; }

 private:
  struct FlowRig {
    FlowId id = 0;
    scenario::FlowConfig cfg;
    std::unique_ptr<vr::VrSource> source;
    std::unique_ptr<transport::Sender> sender;
    std::unique_ptr<transport::Receiver> receiver;
    std::size_t index = 0;
  };

  static upf::UpfConfig make_upf_config(const scenario::ScenarioConfig& c) {
    upf::UpfConfig u;
    u.cecc_enabled = c.cecc.enabled;
    u.delay_standard_us = c.cecc.delay_standard_us;
    u.release_headroom = c.cecc.rwnd_headroom;
    u.frame_window_s = c.cecc.frame_estimate_window_s;
    u.rotate_on_admission = c.cecc.rotate_on_admission;
    return u;
  }

  void build() {
    result_.flows.resize(cfg_.flows.size());
    for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
      auto rig = std::make_unique<FlowRig>();
      rig->id = static_cast<FlowId>(i);
      rig->cfg = cfg_.flows[i];
      rig->index = i;
      FlowRig* r = rig.get();
      FlowResult& fr = result_.flows[i];
      fr.flow_id = r->id;
      fr.cc = r->cfg.cc;
      fr.governed = cfg_.cecc.enabled && r->cfg.cc != transport::CcKind::UdpBestEffort;

      gnb_.register_flow(r->id);
      upf_.register_flow(r->id, fr.governed, vr::mean_frame_size(r->cfg.profile));

      r->sender = std::make_unique<transport::Sender>(engine_, r->id, r->cfg.cc, [this](const Segment& s) { server_to_upf(s); });
      transport::ReceiverConfig rc;
      rc.send_acks = r->cfg.cc != transport::CcKind::UdpBestEffort;
      rc.advertised_rwnd = cfg_.ue.rwnd_bytes;
      rc.ack_every_segments = cfg_.ue.ack_every_segments;
      rc.delayed_ack_us = cfg_.ue.delayed_ack_us;
      r->receiver = std::make_unique<transport::Receiver>(
          engine_, r->id, rc, [this](const AckSegment& a) { ue_to_uplink(a); },
          [&fr](const transport::DelaySample& d) { fr.frames.push_back(d); },
          [&fr](const transport::PacketSample& p) { fr.one_way.samples.push_back(metrics::OneWaySample{p.frame_entry_time, p.one_way_us()}); });
      r->source = std::make_unique<vr::VrSource>(engine_, r->id, r->cfg.profile, cfg_.seed,
                                                 [r](const vr::VrFrame& f) { r->sender->on_app_frame(f); });
      flows_.push_back(std::move(rig));
    }

    driver_ = std::make_unique<ran::GnbDriver<Segment>>(engine_, gnb_, [this](std::vector<ran::Delivery<Segment>>&& batch) {
      for (auto& d : batch) flows_.at(d.flow_id)->receiver->on_segment(d.packet);
    });

    reporter_ = std::make_unique<signaling::GnbReporter<Segment>>(
        engine_, gnb_, signaling::WiredPathModel{cfg_.wired.one_way_delay_us, true},
        [this](const signaling::GnbReport& r, SimTime rx) {
          const bool fresh = upf_.on_gnb_report(r, rx);
          if (fresh && !result_.wired_estimate_after_first_report_us) result_.wired_estimate_after_first_report_us = upf_.wired_delay_estimate_us();
        },
        [this](const signaling::LinkStateReport& r, SimTime rx) { upf_.on_link_state(r, rx); }, cfg_.cecc.cycle_us, 0);

    if (opt_.keep_decisions) upf_.set_decision_sink([this](const upf::DecisionRow& row) { result_.decisions.push_back(row); });
  }

  // ---- hops ----
  void server_to_upf(const Segment& s) {
    engine_.schedule_in(SimTime(cfg_.wired.server_upf_delay_us), "net.server_upf", [this, s] { upf_.on_downlink_segment(s); });
  }

  void upf_to_gnb(const Segment& s) {
    result_.egress.emplace_back(engine_.now(), s.len_bytes);
    engine_.schedule_in(SimTime(cfg_.wired.one_way_delay_us), "net.upf_gnb", [this, s] {
      if (!gnb_.enqueue(s.flow_id, s, engine_.now())) ++result_.flows.at(s.flow_id).dropped_packets;
    });
  }

  void ue_to_uplink(const AckSegment& a) {
    const SimTime ready = engine_.now() + SimTime(cfg_.ue.processing_delay_us);
    const SimTime over_air = ran::next_uplink_delivery(gnb_.config().pattern, gnb_.config().link, ready);
    const SimTime at_upf = over_air + SimTime(cfg_.wired.one_way_delay_us);
    engine_.schedule(at_upf, "net.ack_upf", [this, a] { upf_.on_uplink_ack(a); });
  }

  void upf_to_server(const AckSegment& a) {
    engine_.schedule_in(SimTime(cfg_.wired.server_upf_delay_us), "net.ack_server",
                        [this, a] { flows_.at(a.flow_id)->sender->on_ack(a); });
  }

  void finish() {
    result_.trace_hash = engine_.trace_hash();
    result_.rbs_reports = reporter_->rbs_reports();
    result_.link_reports = reporter_->link_reports();
    result_.control_cycles = upf_.cycles();
    result_.soundness_violations = upf_.soundness_violations();
    result_.blackout_deliveries = driver_->delivery_events_in_blackout();
    result_.final_wired_estimate_us = upf_.wired_delay_estimate_us();
    for (auto& r : flows_) {
      FlowResult& fr = result_.flows[r->index];
      fr.stabilized_at = r->cfg.cc == transport::CcKind::UdpBestEffort ? std::optional<SimTime>(SimTime(0)) : r->sender->stabilized_at();
      fr.frames_generated = r->source->frames_emitted();
      fr.bytes_generated = r->source->bytes_emitted();
      fr.bytes_delivered_in_order = r->receiver->rcv_nxt();
      fr.retransmitted_bytes = r->sender->retransmitted_bytes();
      fr.gating_violations = r->sender->zero_window_violations();
      fr.sender_max_ack = r->sender->snd_una();
      fr.srtt_us = r->sender->srtt_us();
      fr.upf = upf_.stats(r->id);
    }
    // Slow start is a run-wide phase: it lasts until the last flow has stabilized.
    std::optional<SimTime> end = SimTime(0);
    for (const auto& fr : result_.flows) end = (end && fr.stabilized_at) ? std::optional<SimTime>(std::max(*end, *fr.stabilized_at)) : std::nullopt;
    result_.slow_start_end = end;
    for (auto& fr : result_.flows) fr.one_way.slow_start_end = end;
  }

  scenario::ScenarioConfig cfg_;
  RunOptions opt_;
  Engine engine_;
  ran::Gnb<Segment> gnb_;
  upf::Upf upf_;
  std::unique_ptr<ran::GnbDriver<Segment>> driver_;
  std::unique_ptr<signaling::GnbReporter<Segment>> reporter_;
  std::vector<std::unique_ptr<FlowRig>> flows_;
  RunResult result_;
};

inline RunResult run_scenario(const scenario::ScenarioConfig& cfg, RunOptions opt = {}) {
  Simulation s(cfg, opt);
  return s.run();
}

}  // namespace cecc::sim
