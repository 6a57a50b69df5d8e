#include <gtest/gtest.h>

#include "hiot/telemetry.hpp"

using namespace hiot;
using namespace hiot::telemetry;

namespace {
PatientProfile profile(std::string id = "p00") {
  PatientProfile p;
  p.patient_id = std::move(id);
  return p;
}
}  // namespace

TEST(Telemetry, FirstSamplesMatchReference) {
  // reference: Python port of mt19937_64 + Box-Muller, seed 7, default profile
  const auto s = gen_stream(profile(), 7, 500);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].heart_rate, 74.13908950166274);
  EXPECT_DOUBLE_EQ(s[0].systolic, 118.82428200607261);
  EXPECT_DOUBLE_EQ(s[0].diastolic, 84.44222525656099);
  EXPECT_DOUBLE_EQ(s[0].spo2, 95.95993790078853);
  EXPECT_DOUBLE_EQ(s[0].ecg_amp, 1.0930531993821897);
  EXPECT_DOUBLE_EQ(s[1].heart_rate, 74.013765179629);
  EXPECT_DOUBLE_EQ(s[1].ecg_amp, 0.9192663708297608);
  EXPECT_EQ(s[1].t_ms, 250u);
}

TEST(Telemetry, StreamShapeAndPurity) {
  auto p = profile("p03");
  p.sample_period_ms = 100;
  const auto a = gen_stream(p, 11, 1050);
  EXPECT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].t_ms, i * 100);
    EXPECT_EQ(a[i].patient_id, "p03");
  }
  EXPECT_EQ(a, gen_stream(p, 11, 1050));
  EXPECT_NE(a, gen_stream(p, 12, 1050));
  EXPECT_THROW(gen_stream(p, 1, 99), std::invalid_argument);
}

TEST(Telemetry, ProfileValidation) {
  auto p = profile();
  p.heart_rate.sd = -1;
  EXPECT_THROW(gen_stream(p, 1, 1000), InvalidProfile);
  p = profile("");
  EXPECT_THROW(gen_stream(p, 1, 1000), InvalidProfile);
  p = profile();
  p.chronic_risk_label = 2;
  EXPECT_FALSE(p.problem().empty());
  p = profile();
  p.spo2.mean = std::nan("");
  EXPECT_FALSE(p.problem().empty());
}

TEST(Telemetry, ChronicLabelRule) {
  auto p = profile();
  EXPECT_EQ(chronic_label_for(p), 0);
  p.heart_rate.mean = 86;
  EXPECT_EQ(chronic_label_for(p), 1);
  p = profile();
  p.systolic.mean = 140;
  EXPECT_EQ(chronic_label_for(p), 0);
  p.systolic.mean = 141;
  EXPECT_EQ(chronic_label_for(p), 1);
}

TEST(Telemetry, ClampKeepsDiastolicBelowSystolic) {
  VitalsSample s{"p00", 0, 400, 40, 90, 120, 1};
  clamp_in_place(s);
  EXPECT_EQ(s.heart_rate, limits::kHrMax);
  EXPECT_EQ(s.systolic, limits::kSysMin);
  EXPECT_EQ(s.diastolic, limits::kSysMin - 1);
  EXPECT_EQ(s.spo2, limits::kSpo2Max);
  EXPECT_TRUE(in_range(s));
  s.ecg_amp = INFINITY;
  EXPECT_FALSE(in_range(s));
}

TEST(Telemetry, InjectionWindow) {
  auto p = profile();
  p.sample_period_ms = 100;
  const auto base = gen_stream(p, 3, 2000);
  const auto r = inject(base, {AnomalyKind::tachycardia, 500, 300, 1.5});
  EXPECT_FALSE(r.window_missed);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const bool inside = base[i].t_ms >= 500 && base[i].t_ms < 800;
    if (inside) {
      EXPECT_DOUBLE_EQ(r.samples[i].heart_rate, base[i].heart_rate * 1.5);
    } else {
      EXPECT_EQ(r.samples[i], base[i]);
    }
  }

  const auto hypo = inject(base, {AnomalyKind::hypotension, 0, 100, 0.3});
  EXPECT_DOUBLE_EQ(hypo.samples[0].systolic, std::max(base[0].systolic * 0.3, limits::kSysMin));
  EXPECT_LT(hypo.samples[0].diastolic, hypo.samples[0].systolic);

  const auto miss = inject(base, {AnomalyKind::desaturation, 5000, 100, 0.5});
  EXPECT_TRUE(miss.window_missed);
  EXPECT_EQ(miss.samples, base);

  EXPECT_THROW(inject(base, {AnomalyKind::tachycardia, 0, 0, 1.2}), std::invalid_argument);
  EXPECT_THROW(inject(base, {AnomalyKind::tachycardia, 0, 10, 0}), std::invalid_argument);
  EXPECT_EQ(anomaly_kind_from("hypotension"), AnomalyKind::hypotension);
  EXPECT_THROW(anomaly_kind_from("fever"), std::invalid_argument);
}

TEST(Telemetry, CodecAndCsv) {
  const auto s = gen_stream(profile("p07"), 5, 500);
  EXPECT_EQ(VitalsSample::decode(s[1].encode()), s[1]);
  std::ostringstream os;
  write_csv(os, s);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(patient_name(3), "p03");
  EXPECT_EQ(patient_name(123), "p123");
}

// Generated samples always satisfy the physiological ranges, even for
// extreme profiles.
TEST(TelemetryProperty, SamplesAlwaysInRange) {
  Rng meta(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = profile();
    p.heart_rate = {meta.uniform(0, 300), meta.uniform(0, 80)};
    p.systolic = {meta.uniform(20, 300), meta.uniform(0, 80)};
    p.diastolic = {meta.uniform(10, 200), meta.uniform(0, 80)};
    p.spo2 = {meta.uniform(40, 110), meta.uniform(0, 20)};
    p.sample_period_ms = 1 + meta.below(500);
    for (const auto& s : gen_stream(p, meta.next_u64(), 200 * p.sample_period_ms)) ASSERT_TRUE(in_range(s));
  }
}
