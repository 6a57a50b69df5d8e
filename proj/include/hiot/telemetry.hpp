#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiot/util/bytes.hpp"
#include "hiot/util/rng.hpp"

namespace hiot::telemetry {

struct VitalsSample {
  std::string patient_id;
  std::uint64_t t_ms = 0;
  double heart_rate = 0;
  double systolic = 0;
  double diastolic = 0;
  double spo2 = 0;
  double ecg_amp = 0;

  bool operator==(const VitalsSample&) const = default;

  Bytes encode() const {
    return ByteWriter()
        .str(patient_id)
        .u64(t_ms)
        .f64(heart_rate)
        .f64(systolic)
        .f64(diastolic)
        .f64(spo2)
        .f64(ecg_amp)
        .bytes();
  }

  static VitalsSample decode(ByteView b) {
    ByteReader r(b);
    VitalsSample s;
    s.patient_id = r.str();
    s.t_ms = r.u64();
    s.heart_rate = r.f64();
    s.systolic = r.f64();
    s.diastolic = r.f64();
    s.spo2 = r.f64();
    s.ecg_amp = r.f64();
    r.expect_done();
    return s;
  }
};

namespace limits {
inline constexpr double kHrMin = 20, kHrMax = 250;
inline constexpr double kSysMin = 50, kSysMax = 260;
inline constexpr double kDiaMin = 30, kDiaMax = 160;
inline constexpr double kSpo2Min = 50, kSpo2Max = 100;
}  // namespace limits

/// True iff every physiological range holds and diastolic < systolic.
inline bool in_range(const VitalsSample& s) {
  using namespace limits;
  return s.heart_rate >= kHrMin && s.heart_rate <= kHrMax && s.systolic >= kSysMin &&
         s.systolic <= kSysMax && s.diastolic >= kDiaMin && s.diastolic <= kDiaMax &&
         s.spo2 >= kSpo2Min && s.spo2 <= kSpo2Max && s.diastolic < s.systolic &&
         std::isfinite(s.ecg_amp);
}

/// Clamps each vital into its range; diastolic is additionally kept at least
/// one mmHg below systolic.
inline void clamp_in_place(VitalsSample& s) {
  using namespace limits;
  s.heart_rate = std::clamp(s.heart_rate, kHrMin, kHrMax);
  s.systolic = std::clamp(s.systolic, kSysMin, kSysMax);
  s.diastolic = std::clamp(s.diastolic, kDiaMin, std::min(kDiaMax, s.systolic - 1.0));
  s.spo2 = std::clamp(s.spo2, kSpo2Min, kSpo2Max);
}

/// Canonical patient id for index k: p00, p01, ...
inline std::string patient_name(std::size_t k) {
  std::string n = std::to_string(k);
  return "p" + (n.size() < 2 ? "0" + n : n);
}

struct VitalStats {
  double mean = 0;
  double sd = 0;
};

struct PatientProfile {
  std::string patient_id;
  VitalStats heart_rate{72, 3};
  VitalStats systolic{120, 5};
  VitalStats diastolic{78, 4};
  VitalStats spo2{97, 0.8};
  VitalStats ecg_amp{1.0, 0.05};
  int chronic_risk_label = 0;
  std::uint64_t sample_period_ms = 250;

  /// Diagnostic for the first violated invariant, empty if valid.
  std::string problem() const {
    if (patient_id.empty()) return "patient_id is empty";
    for (const auto* v : {&heart_rate, &systolic, &diastolic, &spo2, &ecg_amp}) {
      if (!(v->sd >= 0) || !std::isfinite(v->mean) || !std::isfinite(v->sd))
        return "vital statistics must be finite with sd >= 0";
    }
    if (sample_period_ms < 1) return "sample_period_ms must be >= 1";
    if (chronic_risk_label != 0 && chronic_risk_label != 1) return "chronic_risk_label must be 0 or 1";
    return {};
  }
};

/// Ground-truth chronic-risk rule: elevated baseline heart rate or systolic.
inline int chronic_label_for(const PatientProfile& p) {
  return (p.heart_rate.mean > 85.0 || p.systolic.mean > 140.0) ? 1 : 0;
}

class InvalidProfile : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// floor(duration_ms / sample_period_ms) samples at t = 0, period, 2*period, ...
/// Pure in (profile, seed, duration_ms).
inline std::vector<VitalsSample> gen_stream(const PatientProfile& profile, std::uint64_t seed,
                                            std::uint64_t duration_ms) {
  if (auto err = profile.problem(); !err.empty()) throw InvalidProfile("invalid profile: " + err);
  if (duration_ms < profile.sample_period_ms)
    throw std::invalid_argument("duration_ms shorter than one sample period");
  const auto n = duration_ms / profile.sample_period_ms;
  Rng rng(seed);
  std::vector<VitalsSample> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    VitalsSample s;
    s.patient_id = profile.patient_id;
    s.t_ms = i * profile.sample_period_ms;
    s.heart_rate = rng.normal(profile.heart_rate.mean, profile.heart_rate.sd);
    s.systolic = rng.normal(profile.systolic.mean, profile.systolic.sd);
    s.diastolic = rng.normal(profile.diastolic.mean, profile.diastolic.sd);
    s.spo2 = rng.normal(profile.spo2.mean, profile.spo2.sd);
    s.ecg_amp = rng.normal(profile.ecg_amp.mean, profile.ecg_amp.sd);
    clamp_in_place(s);
    out.push_back(std::move(s));
  }
  return out;
}

enum class AnomalyKind { tachycardia, hypotension, desaturation };

inline const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::tachycardia: return "tachycardia";
    case AnomalyKind::hypotension: return "hypotension";
    case AnomalyKind::desaturation: return "desaturation";
  }
  return "?";
}

inline AnomalyKind anomaly_kind_from(std::string_view s) {
  if (s == "tachycardia") return AnomalyKind::tachycardia;
  if (s == "hypotension") return AnomalyKind::hypotension;
  if (s == "desaturation") return AnomalyKind::desaturation;
  throw std::invalid_argument("unknown anomaly kind: " + std::string(s));
}

struct AnomalyInjection {
  AnomalyKind kind = AnomalyKind::tachycardia;
  std::uint64_t start_ms = 0;
  std::uint64_t duration_ms = 1;
  double magnitude = 1.0;

  bool covers(std::uint64_t t) const { return t >= start_ms && t < start_ms + duration_ms; }
};

struct InjectResult {
  std::vector<VitalsSample> samples;
  bool window_missed = false;  // no sample fell inside the window; stream returned unchanged
};

/// Multiplies the targeted vital inside [start, start + duration) and re-clamps.
/// Hypotension targets systolic; diastolic follows only through the clamp.
inline InjectResult inject(std::vector<VitalsSample> stream, const AnomalyInjection& inj) {
  if (inj.duration_ms == 0) throw std::invalid_argument("injection duration must be > 0");
  if (!(inj.magnitude > 0)) throw std::invalid_argument("injection magnitude must be > 0");
  InjectResult res;
  bool touched = false;
  for (auto& s : stream) {
    if (!inj.covers(s.t_ms)) continue;
    touched = true;
    switch (inj.kind) {
      case AnomalyKind::tachycardia: s.heart_rate *= inj.magnitude; break;
      case AnomalyKind::hypotension: s.systolic *= inj.magnitude; break;
      case AnomalyKind::desaturation: s.spo2 *= inj.magnitude; break;
    }
    clamp_in_place(s);
  }
  res.window_missed = !touched;
  res.samples = std::move(stream);
  return res;
}

inline constexpr const char* kCsvHeader = "patient_id,t_ms,heart_rate,systolic,diastolic,spo2,ecg_amp";

inline void write_csv(std::ostream& os, const std::vector<VitalsSample>& samples, bool header = true) {
  if (header) os << kCsvHeader << '\n';
  std::ostringstream line;
  line.precision(17);
  for (const auto& s : samples) {
    line.str({});
    line << s.patient_id << ',' << s.t_ms << ',' << s.heart_rate << ',' << s.systolic << ','
         << s.diastolic << ',' << s.spo2 << ',' << s.ecg_amp << '\n';
    os << line.str();
  }
}

}  // namespace hiot::telemetry
