#include "cecc/vr_traffic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace cecc;
using namespace cecc::vr;

namespace {
VrSourceProfile profile(double mbps, double fps, double sigma = 1000.0) {
  VrSourceProfile p;
  p.bitrate_bps = mbps * 1e6;
  p.frame_rate_fps = fps;
  p.jitter_sigma_us = fps >= 1000 ? 0.0 : sigma;
  return p;
}
}  // namespace

TEST(FrameSize, Examples) {
  EXPECT_EQ(mean_frame_size(profile(50, 60)), 104'167u);
  EXPECT_EQ(mean_frame_size(profile(8, 1000)), 1'000u);
  EXPECT_EQ(mean_frame_size(profile(35, 60)), 72'917u);
}

TEST(InstantaneousThroughput, Examples) {
  EXPECT_NEAR(instantaneous_throughput(profile(50, 60)) / 1e6, 833.33, 0.01);
  EXPECT_NEAR(instantaneous_throughput(profile(8, 1000)) / 1e6, 8.0, 1e-9);
  EXPECT_NEAR(instantaneous_throughput(profile(35, 60)) / 1e6, 583.33, 0.01);
}

TEST(FrameInterval, ZeroSigmaIsExact) {
  auto p = profile(50, 60, 0.0);
  RngStream rng(1, "x");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(next_frame_interval(p, rng), std::llround(p.jitter_mu_us()));
}

TEST(FrameInterval, MomentsAndTruncation) {
  auto p = profile(50, 60);
  RngStream rng(42, "moments");
  const int n = 1'000'000;
  double s = 0, s2 = 0;
  std::int64_t lo = INT64_MAX;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(next_frame_interval(p, rng));
    s += x;
    s2 += x * x;
    lo = std::min<std::int64_t>(lo, static_cast<std::int64_t>(x));
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(mean, p.jitter_mu_us(), 10.0);
  EXPECT_NEAR(sd, 1000.0, 20.0);
  EXPECT_GE(lo, std::llround(p.jitter_mu_us() - 3000.0));
}

TEST(FrameInterval, ProfileValidation) {
  auto p = profile(50, 60, 6000.0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = profile(-1, 60);
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Collision, ClosedFormExamples) {
  EXPECT_NEAR(collision_probability_closed_form(1000, 1), 0.5205, 1e-4);
  EXPECT_NEAR(collision_probability_closed_form(1000, 4), 0.2763, 1e-4);
  EXPECT_LT(collision_probability_closed_form(1e9, 1), 1e-5);
  EXPECT_THROW(collision_probability_closed_form(0, 1), std::invalid_argument);
}

TEST(Collision, MonteCarloMatchesClosedForm) {
  for (int t : {1, 4}) {
    CollisionModel m;
    m.horizon_frames = t;
    const auto e = collision_probability_mc(m, 1'000'000, 9);
    const double cf = collision_probability_closed_form(1000, t);
    EXPECT_NEAR(e.probability, cf, 3.0 * std::sqrt(cf * (1 - cf) / 1e6)) << "T=" << t;
  }
}

TEST(Collision, ManyFlowsStillCollide) {
  CollisionModel m;
  m.n_flows = 5;
  EXPECT_GT(collision_probability_mc(m, 100'000, 3).probability, 0.0);
  m.n_flows = 1;
  EXPECT_THROW(collision_probability_mc(m, 100'000, 3), std::invalid_argument);
}

TEST(VrSource, EmitsWholeFramesAtGenerationInstants) {
  Engine e;
  std::vector<VrFrame> got;
  VrSource src(e, 3, profile(50, 60), 1, [&](const VrFrame& f) {
    EXPECT_EQ(f.gen_time, e.now());
    got.push_back(f);
  });
  src.start(SimTime::from_s(1.0));
  e.run_until(SimTime::from_s(1.0));
  ASSERT_GE(got.size(), 58u);
  ASSERT_LE(got.size(), 62u);
  EXPECT_EQ(got.front().gen_time, SimTime(0));
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].index, i);
    EXPECT_EQ(got[i].size_bytes, 104'167u);
    EXPECT_EQ(got[i].flow_id, 3u);
  }
  EXPECT_EQ(src.frames_emitted(), got.size());
}

TEST(VrSource, SameSeedSameSchedule) {
  auto times = [](std::uint64_t seed) {
    Engine e;
    std::vector<std::int64_t> t;
    VrSource src(e, 0, profile(50, 60), seed, [&](const VrFrame& f) { t.push_back(f.gen_time.us); });
    src.start(SimTime::from_s(2.0));
    e.run_until(SimTime::from_s(2.0));
    return t;
  };
  EXPECT_EQ(times(5), times(5));
  EXPECT_NE(times(5), times(6));
}
