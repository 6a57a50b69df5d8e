#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "hiot/telemetry.hpp"
#include "hiot/util/stats.hpp"

namespace hiot::edge {

using telemetry::VitalsSample;

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr double kMadScale = 0.6745;
inline constexpr double kZCap = 1e6;
inline constexpr std::size_t kDefaultWindow = 8;
inline constexpr double kDefaultThreshold = 3.5;

/// Tracked vitals, in feature order.
inline constexpr std::array<const char*, 4> kTrackedVitals = {"heart_rate", "systolic", "spo2", "ecg_amp"};

/// values = [median, robust z] for each tracked vital, in kTrackedVitals order.
struct FeatureVector {
  std::string patient_id;
  std::uint64_t window_end_ms = 0;
  std::array<double, kFeatureCount> values{};

  double median(std::size_t vital) const { return values[2 * vital]; }
  double z(std::size_t vital) const { return values[2 * vital + 1]; }

  bool operator==(const FeatureVector&) const = default;
};

class InvalidWindow : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RobustStats {
  double median = 0;
  double mad = 0;
};

inline RobustStats robust_stats(std::span<const double> xs) {
  RobustStats r;
  r.median = stats::median(std::vector<double>(xs.begin(), xs.end()));
  std::vector<double> dev;
  dev.reserve(xs.size());
  for (double x : xs) dev.push_back(std::abs(x - r.median));
  r.mad = stats::median(std::move(dev));
  return r;
}

/// 0.6745 * (x - median) / MAD, with MAD = 0 mapped to 0 (x on the median)
/// or a signed 1e6 sentinel; all results are capped to +/-1e6.
inline double robust_z(double x, const RobustStats& rs) {
  if (rs.mad == 0.0) {
    if (x == rs.median) return 0.0;
    return x > rs.median ? kZCap : -kZCap;
  }
  return std::clamp(kMadScale * (x - rs.median) / rs.mad, -kZCap, kZCap);
}

/// The last sample is scored against the samples before it: the median and
/// MAD come from window[0 .. n-2], the z-score is that of window[n-1].
inline FeatureVector preprocess(std::span<const VitalsSample> window) {
  if (window.size() < 5) throw InvalidWindow("window needs at least 5 samples");
  const auto& pid = window.front().patient_id;
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (window[i].patient_id != pid) throw InvalidWindow("window mixes patients");
    if (i > 0 && window[i].t_ms <= window[i - 1].t_ms) throw InvalidWindow("window timestamps not increasing");
  }
  const auto& last = window.back();
  const auto history = window.first(window.size() - 1);

  FeatureVector fv;
  fv.patient_id = pid;
  fv.window_end_ms = last.t_ms;
  std::vector<double> xs(history.size());
  auto fill = [&](std::size_t slot, auto member) {
    for (std::size_t i = 0; i < history.size(); ++i) xs[i] = history[i].*member;
    const auto rs = robust_stats(xs);
    fv.values[2 * slot] = rs.median;
    fv.values[2 * slot + 1] = robust_z(last.*member, rs);
  };
  fill(0, &VitalsSample::heart_rate);
  fill(1, &VitalsSample::systolic);
  fill(2, &VitalsSample::spo2);
  fill(3, &VitalsSample::ecg_amp);
  return fv;
}

struct AnomalyVerdict {
  std::string patient_id;
  std::uint64_t window_end_ms = 0;
  bool flagged = false;
  double score = 0;
  std::optional<std::string> triggering_vital;

  bool operator==(const AnomalyVerdict&) const = default;
};

/// Flags iff max |z| over tracked vitals is strictly above threshold.
inline AnomalyVerdict detect(const FeatureVector& fv, double threshold = kDefaultThreshold) {
  if (!(threshold > 0)) throw std::invalid_argument("threshold must be positive");
  for (double v : fv.values)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature");
  AnomalyVerdict v;
  v.patient_id = fv.patient_id;
  v.window_end_ms = fv.window_end_ms;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < kTrackedVitals.size(); ++i) {
    const double z = std::abs(fv.z(i));
    if (z > v.score) {
      v.score = z;
      arg = i;
    }
  }
  v.flagged = v.score > threshold;
  if (v.flagged) v.triggering_vital = kTrackedVitals[arg];
  return v;
}

struct Alert {
  std::string patient_id;
  std::uint64_t created_ms = 0;
  AnomalyVerdict verdict;
  std::string edge_node_id;

  bool operator==(const Alert&) const = default;

  Bytes encode() const {
    return ByteWriter()
        .str(patient_id)
        .u64(created_ms)
        .str(edge_node_id)
        .u64(verdict.window_end_ms)
        .f64(verdict.score)
        .str(verdict.triggering_vital.value_or(""))
        .bytes();
  }

  static Alert decode(ByteView b) {
    ByteReader r(b);
    Alert a;
    a.patient_id = r.str();
    a.created_ms = r.u64();
    a.edge_node_id = r.str();
    a.verdict.patient_id = a.patient_id;
    a.verdict.window_end_ms = r.u64();
    a.verdict.score = r.f64();
    auto vital = r.str();
    r.expect_done();
    a.verdict.flagged = true;
    if (!vital.empty()) a.verdict.triggering_vital = vital;
    return a;
  }
};

inline std::optional<Alert> emit_alert(const AnomalyVerdict& verdict, std::string_view node_id) {
  if (!verdict.flagged) return std::nullopt;
  return Alert{verdict.patient_id, verdict.window_end_ms, verdict, std::string(node_id)};
}

/// Per-patient sliding windows owned by one edge node. Emits an alert when a
/// patient goes from not-flagged to flagged, so a sustained episode yields
/// one alert.
class EdgeMonitor {
 public:
  EdgeMonitor(std::string node_id, std::size_t window = kDefaultWindow, double threshold = kDefaultThreshold)
      : node_id_(std::move(node_id)), window_(window), threshold_(threshold) {
    if (window_ < 4) throw std::invalid_argument("edge window must be >= 4");
    if (!(threshold_ > 0)) throw std::invalid_argument("threshold must be positive");
  }

  struct Step {
    std::optional<FeatureVector> features;
    std::optional<AnomalyVerdict> verdict;
    std::optional<Alert> alert;
  };

  Step ingest(const VitalsSample& s) {
    auto& st = patients_[s.patient_id];
    st.buffer.push_back(s);
    Step out;
    if (st.buffer.size() > window_ + 1) st.buffer.pop_front();
    if (st.buffer.size() < window_ + 1) return out;
    std::vector<VitalsSample> win(st.buffer.begin(), st.buffer.end());
    out.features = preprocess(win);
    out.verdict = detect(*out.features, threshold_);
    if (out.verdict->flagged && !st.was_flagged) out.alert = emit_alert(*out.verdict, node_id_);
    st.was_flagged = out.verdict->flagged;
    return out;
  }

  const std::string& node_id() const { return node_id_; }
  std::size_t window() const { return window_; }
  double threshold() const { return threshold_; }

 private:
  struct PatientState {
    std::deque<VitalsSample> buffer;
    bool was_flagged = false;
  };

  std::string node_id_;
  std::size_t window_;
  double threshold_;
  std::map<std::string, PatientState> patients_;
};

}  // namespace hiot::edge
