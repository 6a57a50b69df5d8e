#pragma once

#include <map>
#include <set>

#include "hiot/bench/config.hpp"
#include "hiot/edge.hpp"
#include "hiot/fedlearn.hpp"

namespace hiot::bench {

inline std::string hospital_org(std::size_t h) { return "hospital_" + std::to_string(h); }
inline std::string hospital_id(std::size_t h) { return "hosp_h" + std::to_string(h); }
inline std::string edge_id(std::size_t h) { return "edge_h" + std::to_string(h); }
inline std::string physician_id(std::size_t h) { return "dr_h" + std::to_string(h); }
inline std::string nurse_id(std::size_t h) { return "rn_h" + std::to_string(h); }
inline constexpr const char* kTelePhysician = "tele_01";
inline constexpr const char* kSuspended = "dr_susp";
inline constexpr const char* kResearcher = "res_01";

inline json default_policies_json() {
  return json::parse(R"([
    {"id": "deny-suspended-read", "priority": 100, "subject": {"status": "suspended"}, "resource": {},
     "action": "read", "effect": "deny"},
    {"id": "deny-suspended-write", "priority": 100, "subject": {"status": "suspended"}, "resource": {},
     "action": "write", "effect": "deny"},
    {"id": "deny-researcher-phi", "priority": 50, "subject": {"role": "researcher"},
     "resource": {"kind": ["record", "alert"]}, "action": "read", "effect": "deny"},
    {"id": "permit-physician-read", "priority": 10, "subject": {"role": "physician"},
     "resource": {"kind": ["record", "alert"]}, "action": "read", "effect": "permit", "requires_consent": true},
    {"id": "permit-nurse-icu-alert", "priority": 10, "subject": {"role": "nurse", "ward": "ICU"},
     "resource": {"kind": "alert", "ward": "ICU"}, "action": "read", "effect": "permit", "requires_consent": true},
    {"id": "permit-edge-write", "priority": 5, "subject": {"role": "edge"},
     "resource": {"kind": ["record", "alert"]}, "action": "write", "effect": "permit"},
    {"id": "permit-hospital-aggregate", "priority": 5, "subject": {"role": "hospital"},
     "resource": {"kind": "model"}, "action": "aggregate", "effect": "permit"},
    {"id": "permit-researcher-aggregate", "priority": 5, "subject": {"role": "researcher"},
     "resource": {"kind": "model"}, "action": "aggregate", "effect": "permit"}
  ])");
}

inline json default_subscriptions_json(std::size_t patients, std::size_t hospitals) {
  json arr = json::array();
  for (std::size_t h = 0; h < hospitals; ++h) {
    json pats = json::array();
    for (std::size_t i = h; i < patients; i += hospitals) pats.push_back(telemetry::patient_name(i));
    arr.push_back({{"principal", physician_id(h)}, {"patients", pats}});
    arr.push_back({{"principal", nurse_id(h)}, {"patients", pats}});
    if (h == 0) arr.push_back({{"principal", kSuspended}, {"patients", pats}});
  }
  arr.push_back({{"principal", kTelePhysician}});
  return arr;
}

struct Episode {
  std::size_t patient = 0;
  telemetry::AnomalyInjection injection;
  std::uint64_t onset_ms = 0;  // first sample inside the window
};

struct AccessEvent {
  std::uint64_t t_ms = 0;
  std::string principal;
  std::string patient;
};

struct ConsentEventSpec {
  std::uint64_t t_ms = 0;
  std::string signer;
  contracts::ConsentChange change;
};

/// Everything about a scenario that does not depend on the architecture.
struct World {
  std::vector<telemetry::PatientProfile> profiles;
  std::vector<std::size_t> patient_hospital;
  std::map<std::string, contracts::Principal> principals;
  std::map<std::string, std::size_t> home;  // principal -> hospital
  std::set<std::string> remote;             // providers outside any hospital LAN
  std::vector<std::string> providers;       // sorted
  std::vector<Episode> episodes;
  std::vector<std::vector<telemetry::VitalsSample>> streams;
  std::vector<AccessEvent> access;
  std::vector<ConsentEventSpec> consent;
  std::vector<fl::LocalDataset> fl_data;  // one per hospital
  std::vector<contracts::Policy> policies;
  std::vector<contracts::Subscription> subscriptions;
};

inline telemetry::PatientProfile patient_profile(std::size_t i, std::uint64_t period_ms) {
  telemetry::PatientProfile p;
  p.patient_id = telemetry::patient_name(i);
  p.sample_period_ms = period_ms;
  if (i % 4 == 1) p.heart_rate = {92, 3};
  if (i % 4 == 3) p.systolic = {148, 5};
  p.chronic_risk_label = telemetry::chronic_label_for(p);
  return p;
}

/// Feature rows for one patient: sliding windows over a fresh stream. Each
/// label is flipped with probability label_noise.
inline std::vector<fl::LabeledRow> feature_rows(const telemetry::PatientProfile& p, std::size_t rows,
                                                std::size_t window, std::uint64_t seed, double label_noise = 0.0) {
  const auto n = window + rows;
  auto stream = telemetry::gen_stream(p, seed, n * p.sample_period_ms);
  Rng flips(Rng::derive(seed, 1));
  std::vector<fl::LabeledRow> out;
  out.reserve(rows);
  for (std::size_t k = 0; k < rows; ++k) {
    std::span<const telemetry::VitalsSample> win(stream.data() + k, window + 1);
    const bool flip = label_noise > 0 && flips.uniform() < label_noise;
    out.push_back(fl::LabeledRow{fl::model_features(edge::preprocess(win).values),
                                 flip ? 1 - p.chronic_risk_label : p.chronic_risk_label});
  }
  return out;
}

inline World build_world(const ScenarioConfig& cfg) {
  const auto seed = cfg.seed_value();
  World w;
  const auto H = cfg.hospitals;
  const auto period = cfg.edge.sample_period_ms;

  for (std::size_t h = 0; h < H; ++h) {
    const auto org = hospital_org(h);
    w.principals[hospital_id(h)] = {hospital_id(h), {{"role", "hospital"}, {"org", org}}};
    w.principals[edge_id(h)] = {edge_id(h), {{"role", "edge"}, {"org", org}}};
    w.principals[physician_id(h)] = {physician_id(h), {{"role", "physician"}, {"org", org}, {"ward", "ICU"}, {"status", "active"}}};
    w.principals[nurse_id(h)] = {nurse_id(h), {{"role", "nurse"}, {"org", org}, {"ward", "ICU"}, {"status", "active"}}};
    for (auto id : {hospital_id(h), edge_id(h), physician_id(h), nurse_id(h)}) w.home[id] = h;
  }
  w.principals[kTelePhysician] = {kTelePhysician, {{"role", "physician"}, {"org", "telehealth"}, {"ward", "remote"}, {"status", "active"}}};
  w.principals[kSuspended] = {kSuspended, {{"role", "physician"}, {"org", hospital_org(0)}, {"ward", "ICU"}, {"status", "suspended"}}};
  w.principals[kResearcher] = {kResearcher, {{"role", "researcher"}, {"org", "university"}}};
  w.home[kTelePhysician] = 0;
  w.home[kSuspended] = 0;
  w.home[kResearcher] = 0;
  w.remote = {kTelePhysician, kResearcher};

  for (std::size_t h = 0; h < H; ++h) {
    w.providers.push_back(physician_id(h));
    w.providers.push_back(nurse_id(h));
  }
  w.providers.push_back(kTelePhysician);
  w.providers.push_back(kSuspended);
  w.providers.push_back(kResearcher);
  std::sort(w.providers.begin(), w.providers.end());

  for (std::size_t i = 0; i < cfg.patients; ++i) {
    auto prof = patient_profile(i, period);
    const auto h = i % H;
    w.patient_hospital.push_back(h);
    w.principals[prof.patient_id] = {prof.patient_id,
                                     {{"role", "patient"}, {"org", hospital_org(h)}, {"ward", i % 2 == 0 ? "ICU" : "cardiology"}}};
    w.home[prof.patient_id] = h;
    w.profiles.push_back(std::move(prof));
  }

  // anomaly episodes
  const auto& wl = cfg.workload;
  auto factor = [&](telemetry::AnomalyKind k) {
    switch (k) {
      case telemetry::AnomalyKind::tachycardia: return wl.tachycardia_factor;
      case telemetry::AnomalyKind::hypotension: return wl.hypotension_factor;
      case telemetry::AnomalyKind::desaturation: return wl.desaturation_factor;
    }
    return 1.0;
  };
  auto add_episode = [&](std::size_t i, const telemetry::AnomalyInjection& inj) {
    const auto onset = (inj.start_ms + period - 1) / period * period;
    if (onset >= inj.start_ms + inj.duration_ms || onset >= cfg.duration_ms) return;
    w.episodes.push_back(Episode{i, inj, onset});
  };
  if (!cfg.injections.empty()) {
    for (std::size_t k = 0; k < cfg.injections.size(); ++k)
      for (std::size_t i = 0; i < cfg.patients; ++i)
        if (w.profiles[i].patient_id == cfg.injection_patients[k]) add_episode(i, cfg.injections[k]);
  } else if (wl.episodes_per_patient > 0 && cfg.duration_ms > wl.warmup_ms + wl.episode_ms + 2000) {
    Rng rng(Rng::derive(seed, 11));
    const double span = static_cast<double>(cfg.duration_ms - wl.warmup_ms - wl.episode_ms - 2000);
    const double slot = span / static_cast<double>(wl.episodes_per_patient);
    for (std::size_t i = 0; i < cfg.patients; ++i) {
      for (std::size_t k = 0; k < wl.episodes_per_patient; ++k) {
        telemetry::AnomalyInjection inj;
        inj.kind = static_cast<telemetry::AnomalyKind>((i + k) % 3);
        inj.magnitude = factor(inj.kind);
        inj.duration_ms = wl.episode_ms;
        const double jitter = rng.uniform(0.0, std::max(0.0, slot - static_cast<double>(wl.episode_ms)));
        inj.start_ms = wl.warmup_ms + static_cast<std::uint64_t>(static_cast<double>(k) * slot + jitter);
        add_episode(i, inj);
      }
    }
  }
  std::sort(w.episodes.begin(), w.episodes.end(), [](const Episode& a, const Episode& b) {
    return std::tie(a.onset_ms, a.patient) < std::tie(b.onset_ms, b.patient);
  });

  for (std::size_t i = 0; i < cfg.patients; ++i) {
    if (cfg.duration_ms < period) {
      w.streams.emplace_back();
      continue;
    }
    auto s = telemetry::gen_stream(w.profiles[i], Rng::derive(seed, 1000 + i), cfg.duration_ms);
    for (const auto& e : w.episodes)
      if (e.patient == i) s = telemetry::inject(std::move(s), e.injection).samples;
    w.streams.push_back(std::move(s));
  }

  // consent: standing grants first, then toggles of the telehealth grant
  {
    Rng rng(Rng::derive(seed, 12));
    std::vector<bool> tele(cfg.patients, false);
    for (std::size_t i = 0; i < cfg.patients; ++i) {
      const auto pid = w.profiles[i].patient_id;
      const auto org = hospital_org(w.patient_hospital[i]);
      const auto t = static_cast<std::uint64_t>(rng.uniform(0, 1500));
      contracts::Predicate docs{{{"role", {"physician"}}, {"org", {org}}}};
      contracts::Predicate nurses{{{"role", {"nurse"}}, {"org", {org}}}};
      w.consent.push_back({t, pid, {contracts::ConsentOp::grant, pid, docs, {"record", "alert"}}});
      w.consent.push_back({t + 1, pid, {contracts::ConsentOp::grant, pid, nurses, {"alert"}}});
      if (i % 2 == 0) {
        w.consent.push_back({t + 2, pid, {contracts::ConsentOp::grant, pid, std::string(kTelePhysician), {"record", "alert"}}});
        tele[i] = true;
      }
    }
    if (cfg.patients > 0 && cfg.duration_ms > 4000) {
      for (std::size_t k = 0; k < wl.consent_toggles; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(cfg.patients));
        const auto pid = w.profiles[i].patient_id;
        const auto t = static_cast<std::uint64_t>(rng.uniform(3000, static_cast<double>(cfg.duration_ms)));
        auto op = tele[i] ? contracts::ConsentOp::revoke : contracts::ConsentOp::grant;
        tele[i] = !tele[i];
        w.consent.push_back({t, pid, {op, pid, std::string(kTelePhysician), {"record", "alert"}}});
      }
      if (wl.consent_toggles > 0) {
        // a third party trying to grant itself access; refused at admission
        const auto pid = w.profiles[0].patient_id;
        w.consent.push_back({2500, kResearcher, {contracts::ConsentOp::grant, pid, std::string(kResearcher), {"record"}}});
      }
    }
    std::stable_sort(w.consent.begin(), w.consent.end(),
                     [](const ConsentEventSpec& a, const ConsentEventSpec& b) { return a.t_ms < b.t_ms; });
  }

  // telemedicine access requests, Poisson arrivals
  if (wl.access_rate_per_s > 0 && cfg.patients > 0) {
    Rng rng(Rng::derive(seed, 13));
    double t = 2000;
    for (;;) {
      t += -std::log(1.0 - rng.uniform()) * 1000.0 / wl.access_rate_per_s;
      if (t >= static_cast<double>(cfg.duration_ms)) break;
      const auto& who = w.providers[rng.below(w.providers.size())];
      const auto& pid = w.profiles[rng.below(cfg.patients)].patient_id;
      w.access.push_back({static_cast<std::uint64_t>(t), who, pid});
    }
  }

  // FL datasets: each hospital trains on its own patients
  if (cfg.fl.enabled) {
    for (std::size_t h = 0; h < H; ++h) {
      fl::LocalDataset d{hospital_id(h), {}};
      for (std::size_t i = h; i < cfg.patients; i += H) {
        auto rows = feature_rows(w.profiles[i], cfg.fl.rows_per_patient, cfg.edge.window, Rng::derive(seed, 5000 + i),
                                 cfg.fl.label_noise);
        d.rows.insert(d.rows.end(), rows.begin(), rows.end());
      }
      w.fl_data.push_back(std::move(d));
    }
  }

  try {
    w.policies = cfg.raw_policies.empty() ? contracts::policies_from_json(default_policies_json()) : cfg.policies;
    w.subscriptions = cfg.raw_subscriptions.empty()
                          ? contracts::subscriptions_from_json(default_subscriptions_json(cfg.patients, H))
                          : cfg.subscriptions;
  } catch (const contracts::ConfigError& e) {
    throw ConfigError(e.what());
  }
  for (const auto& s : w.subscriptions)
    if (!w.principals.contains(s.principal_id))
      throw ConfigError("subscription for unknown principal '" + s.principal_id + "'");
  return w;
}

}  // namespace hiot::bench
