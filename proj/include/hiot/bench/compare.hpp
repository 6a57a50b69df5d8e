#pragma once

#include "hiot/bench/scenario.hpp"

namespace hiot::bench {

struct CompareRow {
  MetricsReport report;
  ProbeResult probe;
  std::vector<std::string> probe_failures;
  // relative to the baseline row, in percent; positive = better
  double latency_reduction_pct = 0;
  double tps_improvement_pct = 0;
  double energy_reduction_pct = 0;
  double energy_ratio = 1;  // energy / baseline energy

  bool ok() const { return report.ok() && probe_failures.empty(); }
};

struct Comparison {
  std::string workload;
  std::size_t baseline = 0;
  std::vector<CompareRow> rows;

  bool ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const CompareRow& r) { return r.ok(); });
  }
};

inline double pct_change(double base, double v) { return base == 0 ? 0.0 : (v - base) / base * 100.0; }
inline double pct_reduction(double base, double v) { return base == 0 ? 0.0 : (base - v) / base * 100.0; }

/// The first cloud config is the baseline, or the first config if none is cloud.
inline std::size_t pick_baseline(const std::vector<ScenarioConfig>& cfgs) {
  for (std::size_t i = 0; i < cfgs.size(); ++i)
    if (cfgs[i].architecture == Architecture::cloud) return i;
  return 0;
}

/// Throws ConfigError unless every config describes the same workload.
inline void require_same_workload(const std::vector<ScenarioConfig>& cfgs) {
  if (cfgs.empty()) throw ConfigError("compare needs at least one config");
  const auto fp = workload_fingerprint(cfgs.front());
  for (const auto& c : cfgs)
    if (workload_fingerprint(c) != fp)
      throw ConfigError("workload mismatch: '" + c.id + "' (" + workload_fingerprint(c) + ") vs '" + cfgs.front().id +
                        "' (" + fp + ")");
}

/// Runs each scenario plus a throughput probe at its configured offered rate.
inline Comparison compare(const std::vector<ScenarioConfig>& cfgs) {
  require_same_workload(cfgs);
  Comparison out;
  out.workload = workload_fingerprint(cfgs.front());
  out.baseline = pick_baseline(cfgs);
  for (const auto& c : cfgs) {
    CompareRow row;
    row.report = run_scenario(c);
    RunOptions opt;
    opt.offered_tps = c.probe.offered_tps;
    auto probe = run_full(c, opt).report;
    row.probe = *probe.probe;
    row.probe_failures = probe.invariant_failures;
    out.rows.push_back(std::move(row));
  }
  const auto& b = out.rows[out.baseline];
  for (auto& r : out.rows) {
    r.latency_reduction_pct = pct_reduction(b.report.alert_latency.mean, r.report.alert_latency.mean);
    r.tps_improvement_pct = pct_change(b.probe.sustained_tps, r.probe.sustained_tps);
    r.energy_reduction_pct = pct_reduction(b.report.energy_total, r.report.energy_total);
    r.energy_ratio = b.report.energy_total == 0 ? 1.0 : r.report.energy_total / b.report.energy_total;
  }
  return out;
}

inline nlohmann::json to_json(const Comparison& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"scenario_id", r.report.scenario_id},
                    {"architecture", r.report.architecture},
                    {"latency_ms", to_json(r.report.alert_latency)},
                    {"throughput_tps", r.report.throughput_tps},
                    {"probe", to_json(r.probe)},
                    {"energy_j", r.report.energy_total},
                    {"violations", r.report.violations},
                    {"latency_reduction_pct", r.latency_reduction_pct},
                    {"tps_improvement_pct", r.tps_improvement_pct},
                    {"energy_reduction_pct", r.energy_reduction_pct},
                    {"energy_ratio", r.energy_ratio},
                    {"invariant_failures", r.report.invariant_failures},
                    {"probe_invariant_failures", r.probe_failures}});
  return {{"workload", c.workload}, {"baseline", c.rows[c.baseline].report.scenario_id}, {"rows", rows}, {"ok", c.ok()}};
}

inline std::string to_markdown(const Comparison& c) {
  std::ostringstream os;
  os << "# Comparison (workload " << c.workload << ", baseline " << c.rows[c.baseline].report.scenario_id << ")\n\n";
  os << "| scenario | arch | latency mean (ms) | p95 (ms) | sustained TPS | energy (J) | violations | latency reduction "
        "| TPS improvement | energy reduction |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : c.rows)
    os << "| " << r.report.scenario_id << " | " << r.report.architecture << " | " << fmt(r.report.alert_latency.mean)
       << " | " << fmt(r.report.alert_latency.p95) << " | " << fmt(r.probe.sustained_tps) << " | "
       << fmt(r.report.energy_total) << " | " << r.report.violations << " | " << fmt(r.latency_reduction_pct, 1)
       << "% | " << fmt(r.tps_improvement_pct, 1) << "% | " << fmt(r.energy_reduction_pct, 1) << "% |\n";
  for (const auto& r : c.rows) {
    for (const auto& f : r.report.invariant_failures) os << "\n- " << r.report.scenario_id << ": " << f;
    for (const auto& f : r.probe_failures) os << "\n- " << r.report.scenario_id << " (probe): " << f;
  }
  if (!c.ok()) os << "\n";
  return os.str();
}

inline std::string to_csv(const Comparison& c) {
  std::ostringstream os;
  os << "scenario_id,architecture,latency_mean_ms,latency_p95_ms,sustained_tps,offered_tps,energy_j,violations,"
        "latency_reduction_pct,tps_improvement_pct,energy_reduction_pct,ok\n";
  for (const auto& r : c.rows)
    os << r.report.scenario_id << ',' << r.report.architecture << ',' << fmt(r.report.alert_latency.mean) << ','
       << fmt(r.report.alert_latency.p95) << ',' << fmt(r.probe.sustained_tps) << ',' << fmt(r.probe.offered_tps) << ','
       << fmt(r.report.energy_total) << ',' << r.report.violations << ',' << fmt(r.latency_reduction_pct, 2) << ','
       << fmt(r.tps_improvement_pct, 2) << ',' << fmt(r.energy_reduction_pct, 2) << ',' << (r.ok() ? "true" : "false")
       << '\n';
  return os.str();
}

}  // namespace hiot::bench
