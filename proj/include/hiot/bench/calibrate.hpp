#pragma once

#include "hiot/bench/scenario.hpp"

namespace hiot::bench {

/// What the calibration aims for, per architecture, plus the grids it searches.
struct CalibrationTargets {
  ScenarioConfig base;  // workload shared by all three; architecture is overwritten
  std::size_t seeds = 3;  // latency is averaged over base seed, +1, ...

  double proposed_latency_ms = 112;
  std::vector<double> slot_grid{40, 50, 60};
  std::vector<double> hh_base_grid{25, 30, 35, 40, 45, 50};

  double cloud_latency_ms = 208;
  double cloud_tps = 50;
  std::vector<double> wan_scale_grid{1.0, 1.1, 1.2, 1.25, 1.3, 1.35, 1.4, 1.5};
  std::vector<double> service_tps_grid{45, 50, 55};

  double pow_latency_ms = 600;
  double pow_tps_max = 15;
  std::vector<std::uint64_t> difficulty_grid{2560, 3072, 3328, 3584, 3840, 4096, 4608};
};

inline CalibrationTargets targets_from_json(const json& j) {
  detail::reject_unknown(j, {"base", "seeds", "proposed", "cloud", "pow_chain"}, "targets");
  CalibrationTargets t;
  json base = j.value("base", json::object());
  base["architecture"] = "proposed";
  t.base = config_from_json(base);
  if (!t.base.seed) t.base.seed = 42;
  validate(t.base);
  using detail::read;
  read(j, "seeds", t.seeds);
  if (t.seeds == 0) throw ConfigError("targets.seeds must be positive");
  if (j.contains("proposed")) {
    const auto& p = j.at("proposed");
    detail::reject_unknown(p, {"latency_ms", "slot_ms", "hospital_hospital_ms"}, "targets.proposed");
    read(p, "latency_ms", t.proposed_latency_ms);
    read(p, "slot_ms", t.slot_grid);
    read(p, "hospital_hospital_ms", t.hh_base_grid);
  }
  if (j.contains("cloud")) {
    const auto& c = j.at("cloud");
    detail::reject_unknown(c, {"latency_ms", "tps", "wan_scale", "service_tps"}, "targets.cloud");
    read(c, "latency_ms", t.cloud_latency_ms);
    read(c, "tps", t.cloud_tps);
    read(c, "wan_scale", t.wan_scale_grid);
    read(c, "service_tps", t.service_tps_grid);
  }
  if (j.contains("pow_chain")) {
    const auto& w = j.at("pow_chain");
    detail::reject_unknown(w, {"latency_ms", "tps_max", "difficulty"}, "targets.pow_chain");
    read(w, "latency_ms", t.pow_latency_ms);
    read(w, "tps_max", t.pow_tps_max);
    read(w, "difficulty", t.difficulty_grid);
  }
  for (const auto* g : {&t.slot_grid, &t.hh_base_grid, &t.wan_scale_grid, &t.service_tps_grid})
    if (g->empty()) throw ConfigError("calibration grids must not be empty");
  if (t.difficulty_grid.empty()) throw ConfigError("calibration grids must not be empty");
  return t;
}

struct CalibrationPoint {
  std::string architecture;
  std::string knob;  // "slot_ms=50 hospital_hospital_ms=35" etc.
  std::string metric;
  double value = 0;
  double target = 0;
  double rel_error = 0;
  bool ok = true;  // run passed its invariants
};

struct Calibration {
  std::vector<CalibrationPoint> sweep;
  ScenarioConfig proposed, cloud, pow_chain;
};

struct SeedMean {
  double latency_ms = 0;
  bool ok = true;
};

inline SeedMean mean_latency(ScenarioConfig c, std::size_t seeds) {
  SeedMean m;
  const auto base = c.seed_value();
  for (std::size_t s = 0; s < seeds; ++s) {
    c.seed = base + s;
    const auto r = run_scenario(c);
    m.latency_ms += r.alert_latency.mean / static_cast<double>(seeds);
    m.ok = m.ok && r.ok();
  }
  return m;
}

inline ScenarioConfig with_arch(ScenarioConfig c, Architecture a) {
  c.architecture = a;
  c.id = to_string(a);
  return c;
}

/// Grid search; each knob picks the grid point closest to its target
/// (relative error, latency averaged over the calibration seeds), first
/// point wins ties. Runs that break an invariant are never chosen, nor are
/// PoW difficulties whose probe exceeds the TPS cap.
inline Calibration calibrate(const CalibrationTargets& t) {
  Calibration out;
  auto rel = [](double v, double target) { return std::abs(v - target) / target; };
  auto pick = [&](std::size_t first) {
    std::size_t best = out.sweep.size();
    for (std::size_t i = first; i < out.sweep.size(); ++i)
      if (out.sweep[i].ok && (best == out.sweep.size() || out.sweep[i].rel_error < out.sweep[best].rel_error)) best = i;
    if (best == out.sweep.size()) throw std::runtime_error("calibration: every grid point broke an invariant");
    return best - first;
  };

  // Stages run in order and each carries its link choices forward, so the
  // three configs end up sharing one link table.
  auto shared = t.base;

  // proposed: slot length and inter-hospital WAN delay drive alert latency
  {
    const auto base = with_arch(shared, Architecture::proposed);
    const auto first = out.sweep.size();
    std::vector<ScenarioConfig> cands;
    for (double slot : t.slot_grid)
      for (double hh : t.hh_base_grid) {
        auto c = base;
        c.poa.slot_ms = slot;
        c.net.find("hospital_hospital")->base_ms = hh;
        const auto m = mean_latency(c, t.seeds);
        out.sweep.push_back({"proposed", "slot_ms=" + fmt(slot, 0) + " hospital_hospital_ms=" + fmt(hh, 0),
                             "latency_ms", m.latency_ms, t.proposed_latency_ms,
                             rel(m.latency_ms, t.proposed_latency_ms), m.ok});
        cands.push_back(c);
      }
    out.proposed = cands[pick(first)];
    shared.net = out.proposed.net;
  }

  // cloud: scale both WAN legs for latency, then the service rate for TPS
  {
    const auto base = with_arch(shared, Architecture::cloud);
    const double gw = base.net.get("gateway_cloud").base_ms, cp = base.net.get("cloud_provider").base_ms;
    auto first = out.sweep.size();
    std::vector<ScenarioConfig> cands;
    for (double s : t.wan_scale_grid) {
      auto c = base;
      c.net.find("gateway_cloud")->base_ms = gw * s;
      c.net.find("cloud_provider")->base_ms = cp * s;
      const auto m = mean_latency(c, t.seeds);
      out.sweep.push_back({"cloud", "wan_scale=" + fmt(s, 2), "latency_ms", m.latency_ms, t.cloud_latency_ms,
                           rel(m.latency_ms, t.cloud_latency_ms), m.ok});
      cands.push_back(c);
    }
    auto chosen = cands[pick(first)];
    first = out.sweep.size();
    cands.clear();
    for (double tps : t.service_tps_grid) {
      auto c = chosen;
      c.cloud.service_tps = tps;
      const auto r = run_full(c, RunOptions{false, c.probe.offered_tps}).report;
      out.sweep.push_back({"cloud", "service_tps=" + fmt(tps, 0), "sustained_tps", r.probe->sustained_tps, t.cloud_tps,
                           rel(r.probe->sustained_tps, t.cloud_tps), r.ok()});
      cands.push_back(c);
    }
    out.cloud = cands[pick(first)];
    shared.net = out.cloud.net;
    out.proposed.net = shared.net;
  }

  // PoW: difficulty sets the block interval
  {
    const auto base = with_arch(shared, Architecture::pow_chain);
    const auto first = out.sweep.size();
    std::vector<ScenarioConfig> cands;
    for (auto d : t.difficulty_grid) {
      auto c = base;
      c.pow.difficulty = d;
      const auto m = mean_latency(c, t.seeds);
      const auto p = run_full(c, RunOptions{false, c.probe.offered_tps}).report;
      const bool capped = p.probe->sustained_tps <= t.pow_tps_max;
      out.sweep.push_back({"pow_chain", "difficulty=" + std::to_string(d) + " sustained_tps=" + fmt(p.probe->sustained_tps, 1),
                           "latency_ms", m.latency_ms, t.pow_latency_ms, rel(m.latency_ms, t.pow_latency_ms),
                           m.ok && p.ok() && capped});
      cands.push_back(c);
    }
    out.pow_chain = cands[pick(first)];
  }
  return out;
}

inline nlohmann::json to_json(const Calibration& c) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& p : c.sweep)
    sweep.push_back({{"architecture", p.architecture},
                     {"knob", p.knob},
                     {"metric", p.metric},
                     {"value", p.value},
                     {"target", p.target},
                     {"rel_error", p.rel_error},
                     {"ok", p.ok}});
  return {{"sweep", sweep},
          {"configs",
           {{"proposed", config_to_json(c.proposed)},
            {"cloud", config_to_json(c.cloud)},
            {"pow_chain", config_to_json(c.pow_chain)}}}};
}

inline std::string to_markdown(const Calibration& c) {
  std::ostringstream os;
  os << "# Calibration sweep\n\n| architecture | knob | metric | value | target | rel. error | ok |\n"
        "|---|---|---|---|---|---|---|\n";
  for (const auto& p : c.sweep)
    os << "| " << p.architecture << " | " << p.knob << " | " << p.metric << " | " << fmt(p.value) << " | "
       << fmt(p.target) << " | " << fmt(p.rel_error, 4) << " | " << (p.ok ? "yes" : "NO") << " |\n";
  os << "\n## Chosen\n\n";
  os << "- proposed: slot_ms " << fmt(c.proposed.poa.slot_ms, 0) << ", hospital_hospital_ms "
     << fmt(c.proposed.net.get("hospital_hospital").base_ms, 0) << "\n";
  os << "- cloud: gateway_cloud_ms " << fmt(c.cloud.net.get("gateway_cloud").base_ms, 1) << ", cloud_provider_ms "
     << fmt(c.cloud.net.get("cloud_provider").base_ms, 1) << ", service_tps " << fmt(c.cloud.cloud.service_tps, 0)
     << "\n";
  os << "- pow_chain: difficulty " << c.pow_chain.pow.difficulty << "\n";
  return os.str();
}

inline std::string to_csv(const Calibration& c) {
  std::ostringstream os;
  os << "architecture,knob,metric,value,target,rel_error,ok\n";
  for (const auto& p : c.sweep)
    os << p.architecture << ',' << p.knob << ',' << p.metric << ',' << fmt(p.value) << ',' << fmt(p.target) << ','
       << fmt(p.rel_error, 4) << ',' << (p.ok ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace hiot::bench
