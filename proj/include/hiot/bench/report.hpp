#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hiot/netsim.hpp"
#include "hiot/util/stats.hpp"

namespace hiot::bench {

struct LatencyStats {
  std::size_t count = 0;
  double mean = 0;
  double p50 = 0;
  double p95 = 0;

  static LatencyStats of(std::vector<double> xs) {
    LatencyStats s;
    s.count = xs.size();
    if (xs.empty()) return s;
    s.mean = stats::mean(xs);
    s.p50 = stats::quantile(xs, 0.5);
    s.p95 = stats::quantile(xs, 0.95);
    return s;
  }
};

struct ProbeResult {
  double offered_tps = 0;
  double sustained_tps = 0;
  std::size_t submitted = 0;
  std::size_t committed_in_window = 0;
  std::uint64_t window_ms = 0;
  std::size_t backlog = 0;  // still uncommitted when the window closed
  bool saturated = false;
};

struct MetricsReport {
  std::string scenario_id;
  std::string architecture;
  std::uint64_t seed = 0;
  std::string workload;  // fingerprint

  std::size_t episodes = 0;
  std::size_t detected = 0;
  std::size_t missed = 0;
  std::size_t false_alarms = 0;
  std::size_t notifications = 0;
  LatencyStats alert_latency;

  std::size_t submitted = 0;
  std::size_t committed = 0;
  double busy_ms = 0;
  double throughput_tps = 0;

  std::map<std::string, double> energy_by_node;
  double energy_total = 0;
  netsim::EnergyCounters energy_counters;

  std::size_t blocks = 0;
  bool chain_ok = true;
  std::size_t pending = 0;

  std::size_t decisions = 0;
  std::size_t permits = 0;
  std::size_t denies = 0;
  std::size_t violations = 0;
  std::size_t mismatches = 0;
  std::size_t rejected_submissions = 0;

  std::size_t fl_rounds = 0;
  std::vector<double> fl_weights;
  double fl_loss = 0;
  std::optional<double> fl_epsilon;

  std::optional<ProbeResult> probe;
  std::vector<std::string> invariant_failures;

  bool ok() const { return invariant_failures.empty(); }
};

/// Fixed-precision rendering so text artifacts do not depend on locale or
/// shortest-roundtrip heuristics.
inline std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline nlohmann::json to_json(const LatencyStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}};
}

inline nlohmann::json to_json(const ProbeResult& p) {
  return {{"offered_tps", p.offered_tps},   {"sustained_tps", p.sustained_tps}, {"submitted", p.submitted},
          {"committed_in_window", p.committed_in_window}, {"window_ms", p.window_ms}, {"backlog", p.backlog},
          {"saturated", p.saturated}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json energy_nodes = nlohmann::json::object();
  for (const auto& [k, v] : r.energy_by_node) energy_nodes[k] = v;
  const auto& c = r.energy_counters;
  nlohmann::json j{
      {"scenario_id", r.scenario_id},
      {"architecture", r.architecture},
      {"seed", r.seed},
      {"workload", r.workload},
      {"alerts",
       {{"episodes", r.episodes},
        {"detected", r.detected},
        {"missed", r.missed},
        {"false_alarms", r.false_alarms},
        {"notifications", r.notifications},
        {"latency_ms", to_json(r.alert_latency)}}},
      {"throughput",
       {{"submitted", r.submitted}, {"committed", r.committed}, {"busy_ms", r.busy_ms}, {"tps", r.throughput_tps}}},
      {"energy_j",
       {{"total", r.energy_total},
        {"per_node", energy_nodes},
        {"counters",
         {{"cpu_ms", c.cpu_ms},
          {"lan_tx_bytes", c.lan_tx_bytes},
          {"lan_rx_bytes", c.lan_rx_bytes},
          {"wan_tx_bytes", c.wan_tx_bytes},
          {"wan_rx_bytes", c.wan_rx_bytes},
          {"hash_attempts", c.hash_attempts}}}}},
      {"ledger", {{"blocks", r.blocks}, {"chain_ok", r.chain_ok}, {"pending", r.pending}}},
      {"access",
       {{"decisions", r.decisions},
        {"permits", r.permits},
        {"denies", r.denies},
        {"violations", r.violations},
        {"mismatches", r.mismatches},
        {"rejected_submissions", r.rejected_submissions}}},
      {"fl",
       {{"rounds", r.fl_rounds},
        {"weights", r.fl_weights},
        {"mean_loss", r.fl_loss},
        {"epsilon", r.fl_epsilon ? nlohmann::json(*r.fl_epsilon) : nlohmann::json("off")}}},
      {"invariant_failures", r.invariant_failures}};
  if (r.probe) j["probe"] = to_json(*r.probe);
  return j;
}

inline std::string to_markdown(const MetricsReport& r) {
  std::ostringstream os;
  os << "# Scenario " << r.scenario_id << " (" << r.architecture << ", seed " << r.seed << ")\n\n";
  os << "| metric | value |\n|---|---|\n";
  os << "| alert latency mean (ms) | " << fmt(r.alert_latency.mean) << " |\n";
  os << "| alert latency p50 (ms) | " << fmt(r.alert_latency.p50) << " |\n";
  os << "| alert latency p95 (ms) | " << fmt(r.alert_latency.p95) << " |\n";
  os << "| episodes / detected / missed | " << r.episodes << " / " << r.detected << " / " << r.missed << " |\n";
  os << "| false alarms | " << r.false_alarms << " |\n";
  os << "| notifications | " << r.notifications << " |\n";
  os << "| committed txs | " << r.committed << " of " << r.submitted << " |\n";
  os << "| throughput (TPS, busy interval) | " << fmt(r.throughput_tps) << " |\n";
  if (r.probe) os << "| sustained TPS at " << fmt(r.probe->offered_tps, 0) << " offered | " << fmt(r.probe->sustained_tps) << " |\n";
  os << "| energy total (J) | " << fmt(r.energy_total) << " |\n";
  os << "| blocks | " << r.blocks << " |\n";
  os << "| chain verified | " << (r.chain_ok ? "yes" : "NO") << " |\n";
  os << "| access decisions (permit/deny) | " << r.decisions << " (" << r.permits << "/" << r.denies << ") |\n";
  os << "| policy violations | " << r.violations << " |\n";
  os << "| FL rounds | " << r.fl_rounds << " |\n";
  if (!r.invariant_failures.empty()) {
    os << "\n## Invariant failures\n\n";
    for (const auto& f : r.invariant_failures) os << "- " << f << "\n";
  }
  return os.str();
}

inline std::string to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "scenario_id,architecture,seed,latency_mean_ms,latency_p50_ms,latency_p95_ms,episodes,detected,"
        "false_alarms,committed,throughput_tps,sustained_tps,energy_j,blocks,chain_ok,decisions,permits,violations,"
        "fl_rounds\n";
  os << r.scenario_id << ',' << r.architecture << ',' << r.seed << ',' << fmt(r.alert_latency.mean) << ','
     << fmt(r.alert_latency.p50) << ',' << fmt(r.alert_latency.p95) << ',' << r.episodes << ',' << r.detected << ','
     << r.false_alarms << ',' << r.committed << ',' << fmt(r.throughput_tps) << ','
     << (r.probe ? fmt(r.probe->sustained_tps) : std::string()) << ',' << fmt(r.energy_total) << ',' << r.blocks << ','
     << (r.chain_ok ? "true" : "false") << ',' << r.decisions << ',' << r.permits << ',' << r.violations << ','
     << r.fl_rounds << '\n';
  return os.str();
}

}  // namespace hiot::bench
