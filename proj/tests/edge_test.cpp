#include <gtest/gtest.h>

#include "hiot/edge.hpp"

using namespace hiot;
using namespace hiot::edge;

namespace {

std::vector<VitalsSample> window_with_hr(const std::vector<double>& hr, std::string pid = "p00") {
  std::vector<VitalsSample> w;
  for (std::size_t i = 0; i < hr.size(); ++i) w.push_back({pid, 100 * i, hr[i], 120, 80, 97, 1.0});
  return w;
}

}  // namespace

TEST(Edge, RobustZOnHandWindow) {
  // median 70.5, MAD 0.5 over the history; 0.6745 * 49.5 / 0.5 for the last
  const auto w = window_with_hr({70, 71, 70, 71, 72, 69, 120});
  const auto fv = preprocess(w);
  EXPECT_DOUBLE_EQ(fv.median(0), 70.5);
  EXPECT_NEAR(fv.z(0), 66.7755, 1e-9);
  EXPECT_EQ(fv.window_end_ms, 600u);
  // constant vitals: MAD 0 and the last value on the median
  EXPECT_EQ(fv.z(1), 0.0);
  EXPECT_EQ(fv.median(2), 97.0);

  const auto v = detect(fv);
  EXPECT_TRUE(v.flagged);
  EXPECT_EQ(v.triggering_vital, "heart_rate");
  EXPECT_NEAR(v.score, 66.7755, 1e-9);
}

TEST(Edge, ZeroMadSentinel) {
  const RobustStats rs{80, 0};
  EXPECT_EQ(robust_z(80, rs), 0.0);
  EXPECT_EQ(robust_z(81, rs), kZCap);
  EXPECT_EQ(robust_z(79, rs), -kZCap);
  EXPECT_EQ(robust_z(1e300, {0, 1e-300}), kZCap);
}

TEST(Edge, ThresholdIsStrict) {
  FeatureVector fv;
  fv.values[3] = -3.5;  // systolic z
  EXPECT_FALSE(detect(fv, 3.5).flagged);
  fv.values[3] = -3.5000001;
  const auto v = detect(fv, 3.5);
  EXPECT_TRUE(v.flagged);
  EXPECT_EQ(v.triggering_vital, "systolic");
  EXPECT_THROW(detect(fv, 0), std::invalid_argument);
  fv.values[0] = NAN;
  EXPECT_THROW(detect(fv), std::invalid_argument);
}

TEST(Edge, WindowValidation) {
  EXPECT_THROW(preprocess(window_with_hr({1, 2, 3, 4})), InvalidWindow);
  auto mixed = window_with_hr({70, 70, 70, 70, 70});
  mixed[2].patient_id = "p01";
  EXPECT_THROW(preprocess(mixed), InvalidWindow);
  auto unordered = window_with_hr({70, 70, 70, 70, 70});
  unordered[3].t_ms = unordered[2].t_ms;
  EXPECT_THROW(preprocess(unordered), InvalidWindow);
}

TEST(Edge, AlertCodec) {
  const auto fv = preprocess(window_with_hr({70, 71, 70, 71, 72, 69, 120}));
  const auto alert = emit_alert(detect(fv), "edge-1");
  ASSERT_TRUE(alert);
  EXPECT_EQ(Alert::decode(alert->encode()), *alert);
  EXPECT_FALSE(emit_alert(AnomalyVerdict{}, "edge-1"));
}

TEST(Edge, MonitorEmitsOncePerEpisode) {
  EdgeMonitor mon("e0", 6, 3.5);
  std::vector<double> hr{70, 71, 70, 71, 72, 69, 70, 71, 140, 141, 142, 70, 71, 70, 70, 71, 70, 150};
  int alerts = 0;
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < hr.size(); ++i) {
    auto step = mon.ingest({"p00", 100 * i, hr[i], 120, 80, 97, 1.0});
    if (i < 6) {
      EXPECT_FALSE(step.features);
    }
    if (step.alert) {
      ++alerts;
      at.push_back(i);
    }
  }
  EXPECT_EQ(at, (std::vector<std::size_t>{8, 17}));
  EXPECT_EQ(alerts, 2);
  EXPECT_THROW(EdgeMonitor("x", 3), std::invalid_argument);
}

TEST(Edge, MonitorKeepsPatientsSeparate) {
  EdgeMonitor mon("e0", 4);
  for (std::uint64_t i = 0; i < 4; ++i) {
    EXPECT_FALSE(mon.ingest({"a", i, 70.0 + i % 2, 120, 80, 97, 1}).features);
    EXPECT_FALSE(mon.ingest({"b", i, 70.0 + i % 2, 120, 80, 97, 1}).features);
  }
  EXPECT_TRUE(mon.ingest({"a", 9, 70, 120, 80, 97, 1}).features);
}

// Shifting and positively scaling the whole window leaves z unchanged.
TEST(EdgeProperty, AffineInvariance) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> hr(9);
    for (auto& x : hr) x = rng.normal(75, 5);
    const double a = rng.uniform(0.5, 3), b = rng.uniform(-20, 20);
    auto scaled = hr;
    for (auto& x : scaled) x = a * x + b;
    const auto z0 = preprocess(window_with_hr(hr)).z(0);
    const auto z1 = preprocess(window_with_hr(scaled)).z(0);
    ASSERT_NEAR(z0, z1, 1e-9 * std::max(1.0, std::abs(z0)));
  }
}
