#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "hiot/contracts.hpp"
#include "hiot/crypto/hash.hpp"
#include "hiot/netsim.hpp"
#include "hiot/telemetry.hpp"

namespace hiot::bench {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Architecture { proposed, cloud, pow_chain };

inline const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::proposed: return "proposed";
    case Architecture::cloud: return "cloud";
    case Architecture::pow_chain: return "pow_chain";
  }
  return "?";
}

inline Architecture architecture_from(std::string_view s) {
  if (s == "proposed") return Architecture::proposed;
  if (s == "cloud") return Architecture::cloud;
  if (s == "pow_chain") return Architecture::pow_chain;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

struct EdgeParams {
  std::size_t window = 32;
  double z_threshold = 6.0;
  std::uint64_t sample_period_ms = 250;
};

struct WorkloadParams {
  std::size_t episodes_per_patient = 3;
  std::uint64_t episode_ms = 2000;
  std::uint64_t warmup_ms = 10000;
  std::uint64_t record_interval_ms = 15000;
  double access_rate_per_s = 1.0;
  std::size_t consent_toggles = 8;
  double tachycardia_factor = 1.6;
  double hypotension_factor = 0.65;
  double desaturation_factor = 0.85;
};

struct FlParams {
  bool enabled = true;
  std::size_t rounds = 5;
  std::size_t epochs = 20;
  double lr = 0.5;
  std::optional<double> epsilon;  // none = DP off
  double delta = 1e-5;
  double clip_norm = 1.0;
  std::size_t rows_per_patient = 10;
  double label_noise = 0.0;  // fraction of training labels flipped
  std::size_t paillier_bits = 512;
  std::uint64_t start_ms = 5000;
};

/// Named link classes; an architecture uses the subset it needs.
struct LinkSpec {
  std::string name;
  netsim::LinkClass cls = netsim::LinkClass::lan;
  double base_ms = 0;
  double jitter_ms = 0;
  double bandwidth_kbps = 100000;
};

struct NetParams {
  std::vector<LinkSpec> links;

  const LinkSpec& get(std::string_view name) const {
    for (const auto& l : links)
      if (l.name == name) return l;
    throw ConfigError("net.links has no entry '" + std::string(name) + "'");
  }
  LinkSpec* find(std::string_view name) {
    for (auto& l : links)
      if (l.name == name) return &l;
    return nullptr;
  }
};

/// Simulated CPU time per operation.
struct CpuCosts {
  double sensor_seal_ms = 0.05;
  double ingest_ms = 0.7;
  double sign_ms = 2.0;
  double verify_ms = 3.0;
  double seal_ms = 2.0;
  double contract_ms = 1.0;
  double train_ms_per_row_epoch = 0.002;
  double paillier_op_ms = 4.0;
};

struct PoaParams {
  double slot_ms = 50;
  std::size_t block_capacity = 16;
};

struct PowParams {
  std::uint64_t difficulty = 4096;
  double hashrate_per_ms = 8.0;  // whole network
  std::size_t max_tx = 6;
};

struct CloudParams {
  double service_tps = 50;
};

struct ProbeParams {
  std::uint64_t warmup_ms = 5000;
  std::uint64_t window_ms = 20000;
  double offered_tps = 150;
};

struct ScenarioConfig {
  std::string id = "scenario";
  Architecture architecture = Architecture::proposed;
  std::optional<std::uint64_t> seed;
  std::uint64_t duration_ms = 60000;
  std::size_t patients = 16;
  std::size_t hospitals = 4;
  std::size_t validators = 4;
  EdgeParams edge;
  WorkloadParams workload;
  std::vector<telemetry::AnomalyInjection> injections;  // explicit; empty = generated
  std::vector<std::string> injection_patients;          // parallel to injections
  FlParams fl;
  NetParams net;
  netsim::EnergyCosts energy;
  CpuCosts cpu;
  PoaParams poa;
  PowParams pow;
  CloudParams cloud;
  ProbeParams probe;
  std::vector<contracts::Policy> policies;
  std::vector<contracts::Subscription> subscriptions;
  json raw_policies = json::array();
  json raw_subscriptions = json::array();

  std::uint64_t seed_value() const {
    if (!seed) throw ConfigError("config has no seed");
    return *seed;
  }
};

inline std::vector<LinkSpec> default_links() {
  using netsim::LinkClass;
  return {
      {"sensor_edge", LinkClass::lan, 2, 0.2, 10000},
      {"edge_hospital", LinkClass::lan, 5, 0.5, 100000},
      {"hospital_hospital", LinkClass::wan, 45, 4, 100000},
      {"hospital_provider", LinkClass::lan, 5, 0.5, 100000},
      {"remote_provider", LinkClass::wan, 60, 6, 20000},
      {"gateway_cloud", LinkClass::wan, 80, 8, 20000},
      {"cloud_provider", LinkClass::wan, 60, 6, 20000},
  };
}

// ---- JSON ---------------------------------------------------------------------

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, std::string_view section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + std::string(section));
  }
}

}  // namespace detail

inline ScenarioConfig config_from_json(const json& j) {
  using detail::read;
  using detail::reject_unknown;
  reject_unknown(j,
                 {"id", "architecture", "seed", "duration_ms", "patients", "hospitals", "validators", "edge", "workload",
                  "injections", "fl", "net", "energy", "poa", "pow", "cloud", "probe", "policies", "subscriptions"},
                 "config");
  ScenarioConfig c;
  c.net.links = default_links();
  read(j, "id", c.id);
  if (!j.contains("architecture")) throw ConfigError("config needs an architecture");
  c.architecture = architecture_from(j.at("architecture").get<std::string>());
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  read(j, "duration_ms", c.duration_ms);
  read(j, "patients", c.patients);
  read(j, "hospitals", c.hospitals);
  read(j, "validators", c.validators);

  if (j.contains("edge")) {
    const auto& e = j.at("edge");
    reject_unknown(e, {"window", "z_threshold", "sample_period_ms"}, "edge");
    read(e, "window", c.edge.window);
    read(e, "z_threshold", c.edge.z_threshold);
    read(e, "sample_period_ms", c.edge.sample_period_ms);
  }
  if (j.contains("workload")) {
    const auto& w = j.at("workload");
    reject_unknown(w,
                   {"episodes_per_patient", "episode_ms", "warmup_ms", "record_interval_ms", "access_rate_per_s",
                    "consent_toggles", "tachycardia_factor", "hypotension_factor", "desaturation_factor"},
                   "workload");
    read(w, "episodes_per_patient", c.workload.episodes_per_patient);
    read(w, "episode_ms", c.workload.episode_ms);
    read(w, "warmup_ms", c.workload.warmup_ms);
    read(w, "record_interval_ms", c.workload.record_interval_ms);
    read(w, "access_rate_per_s", c.workload.access_rate_per_s);
    read(w, "consent_toggles", c.workload.consent_toggles);
    read(w, "tachycardia_factor", c.workload.tachycardia_factor);
    read(w, "hypotension_factor", c.workload.hypotension_factor);
    read(w, "desaturation_factor", c.workload.desaturation_factor);
  }
  if (j.contains("injections")) {
    for (const auto& inj : j.at("injections")) {
      reject_unknown(inj, {"patient", "kind", "start_ms", "duration_ms", "magnitude"}, "injection");
      telemetry::AnomalyInjection a;
      try {
        a.kind = telemetry::anomaly_kind_from(inj.at("kind").get<std::string>());
        a.start_ms = inj.at("start_ms").get<std::uint64_t>();
        a.duration_ms = inj.at("duration_ms").get<std::uint64_t>();
        a.magnitude = inj.at("magnitude").get<double>();
        c.injection_patients.push_back(inj.at("patient").get<std::string>());
      } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed injection: ") + e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      c.injections.push_back(a);
    }
  }
  if (j.contains("fl")) {
    const auto& f = j.at("fl");
    reject_unknown(f,
                   {"enabled", "rounds", "epochs", "lr", "epsilon", "delta", "clip_norm", "rows_per_patient",
                    "label_noise", "paillier_bits", "start_ms"},
                   "fl");
    read(f, "enabled", c.fl.enabled);
    read(f, "rounds", c.fl.rounds);
    read(f, "epochs", c.fl.epochs);
    read(f, "lr", c.fl.lr);
    if (f.contains("epsilon") && !f.at("epsilon").is_null()) {
      if (f.at("epsilon").is_string()) {
        if (f.at("epsilon").get<std::string>() != "off") throw ConfigError("fl.epsilon must be a number or \"off\"");
      } else {
        c.fl.epsilon = f.at("epsilon").get<double>();
      }
    }
    read(f, "delta", c.fl.delta);
    read(f, "clip_norm", c.fl.clip_norm);
    read(f, "rows_per_patient", c.fl.rows_per_patient);
    read(f, "label_noise", c.fl.label_noise);
    read(f, "paillier_bits", c.fl.paillier_bits);
    read(f, "start_ms", c.fl.start_ms);
  }
  if (j.contains("net")) {
    const auto& n = j.at("net");
    reject_unknown(n, {"links"}, "net");
    if (n.contains("links")) {
      for (const auto& l : n.at("links")) {
        reject_unknown(l, {"name", "class", "base_ms", "jitter_ms", "bandwidth_kbps"}, "net.links[]");
        std::string name;
        read(l, "name", name);
        auto* spec = c.net.find(name);
        if (!spec) throw ConfigError("unknown link name '" + name + "'");
        if (l.contains("class")) {
          const auto cls = l.at("class").get<std::string>();
          if (cls != "LAN" && cls != "WAN") throw ConfigError("link class must be LAN or WAN");
          spec->cls = cls == "LAN" ? netsim::LinkClass::lan : netsim::LinkClass::wan;
        }
        read(l, "base_ms", spec->base_ms);
        read(l, "jitter_ms", spec->jitter_ms);
        read(l, "bandwidth_kbps", spec->bandwidth_kbps);
      }
    }
  }
  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    reject_unknown(e, {"costs", "cpu"}, "energy");
    if (e.contains("costs")) {
      const auto& k = e.at("costs");
      reject_unknown(k, {"cpu_j_per_ms", "lan_j_per_kb", "wan_j_per_kb", "hash_j"}, "energy.costs");
      read(k, "cpu_j_per_ms", c.energy.cpu_j_per_ms);
      read(k, "lan_j_per_kb", c.energy.lan_j_per_kb);
      read(k, "wan_j_per_kb", c.energy.wan_j_per_kb);
      read(k, "hash_j", c.energy.hash_j);
    }
    if (e.contains("cpu")) {
      const auto& k = e.at("cpu");
      reject_unknown(k,
                     {"sensor_seal_ms", "ingest_ms", "sign_ms", "verify_ms", "seal_ms", "contract_ms",
                      "train_ms_per_row_epoch", "paillier_op_ms"},
                     "energy.cpu");
      read(k, "sensor_seal_ms", c.cpu.sensor_seal_ms);
      read(k, "ingest_ms", c.cpu.ingest_ms);
      read(k, "sign_ms", c.cpu.sign_ms);
      read(k, "verify_ms", c.cpu.verify_ms);
      read(k, "seal_ms", c.cpu.seal_ms);
      read(k, "contract_ms", c.cpu.contract_ms);
      read(k, "train_ms_per_row_epoch", c.cpu.train_ms_per_row_epoch);
      read(k, "paillier_op_ms", c.cpu.paillier_op_ms);
    }
  }
  // Sealer sections are architecture-specific; a stray one is an inconsistency.
  if (j.contains("poa")) {
    if (c.architecture != Architecture::proposed) throw ConfigError("poa section requires architecture=proposed");
    const auto& p = j.at("poa");
    reject_unknown(p, {"slot_ms", "block_capacity"}, "poa");
    read(p, "slot_ms", c.poa.slot_ms);
    read(p, "block_capacity", c.poa.block_capacity);
  }
  if (j.contains("pow")) {
    if (c.architecture != Architecture::pow_chain) throw ConfigError("pow section requires architecture=pow_chain");
    const auto& p = j.at("pow");
    reject_unknown(p, {"difficulty", "hashrate_per_ms", "max_tx"}, "pow");
    read(p, "difficulty", c.pow.difficulty);
    read(p, "hashrate_per_ms", c.pow.hashrate_per_ms);
    read(p, "max_tx", c.pow.max_tx);
  }
  if (j.contains("cloud")) {
    if (c.architecture != Architecture::cloud) throw ConfigError("cloud section requires architecture=cloud");
    const auto& p = j.at("cloud");
    reject_unknown(p, {"service_tps"}, "cloud");
    read(p, "service_tps", c.cloud.service_tps);
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    reject_unknown(p, {"warmup_ms", "window_ms", "offered_tps"}, "probe");
    read(p, "warmup_ms", c.probe.warmup_ms);
    read(p, "window_ms", c.probe.window_ms);
    read(p, "offered_tps", c.probe.offered_tps);
  }
  if (j.contains("policies")) {
    c.raw_policies = j.at("policies");
    try {
      c.policies = contracts::policies_from_json(c.raw_policies);
    } catch (const contracts::ConfigError& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("subscriptions")) {
    c.raw_subscriptions = j.at("subscriptions");
    try {
      c.subscriptions = contracts::subscriptions_from_json(c.raw_subscriptions);
    } catch (const contracts::ConfigError& e) {
      throw ConfigError(e.what());
    }
  }
  return c;
}

inline json links_to_json(const NetParams& n) {
  json arr = json::array();
  for (const auto& l : n.links)
    arr.push_back({{"name", l.name},
                   {"class", netsim::to_string(l.cls)},
                   {"base_ms", l.base_ms},
                   {"jitter_ms", l.jitter_ms},
                   {"bandwidth_kbps", l.bandwidth_kbps}});
  return arr;
}

/// Parameters that define the offered workload. Configs compared against
/// each other must agree on all of these.
inline json workload_json(const ScenarioConfig& c) {
  json inj = json::array();
  for (std::size_t i = 0; i < c.injections.size(); ++i)
    inj.push_back({{"patient", c.injection_patients[i]},
                   {"kind", telemetry::to_string(c.injections[i].kind)},
                   {"start_ms", c.injections[i].start_ms},
                   {"duration_ms", c.injections[i].duration_ms},
                   {"magnitude", c.injections[i].magnitude}});
  const auto& w = c.workload;
  return {{"seed", c.seed ? json(*c.seed) : json(nullptr)},
          {"duration_ms", c.duration_ms},
          {"patients", c.patients},
          {"hospitals", c.hospitals},
          {"edge", {{"window", c.edge.window}, {"z_threshold", c.edge.z_threshold}, {"sample_period_ms", c.edge.sample_period_ms}}},
          {"workload",
           {{"episodes_per_patient", w.episodes_per_patient},
            {"episode_ms", w.episode_ms},
            {"warmup_ms", w.warmup_ms},
            {"record_interval_ms", w.record_interval_ms},
            {"access_rate_per_s", w.access_rate_per_s},
            {"consent_toggles", w.consent_toggles},
            {"tachycardia_factor", w.tachycardia_factor},
            {"hypotension_factor", w.hypotension_factor},
            {"desaturation_factor", w.desaturation_factor}}},
          {"injections", inj},
          {"fl",
           {{"enabled", c.fl.enabled},
            {"rounds", c.fl.rounds},
            {"epochs", c.fl.epochs},
            {"lr", c.fl.lr},
            {"epsilon", c.fl.epsilon ? json(*c.fl.epsilon) : json("off")},
            {"delta", c.fl.delta},
            {"clip_norm", c.fl.clip_norm},
            {"rows_per_patient", c.fl.rows_per_patient},
            {"label_noise", c.fl.label_noise},
            {"paillier_bits", c.fl.paillier_bits},
            {"start_ms", c.fl.start_ms}}},
          {"probe",
           {{"warmup_ms", c.probe.warmup_ms}, {"window_ms", c.probe.window_ms}, {"offered_tps", c.probe.offered_tps}}},
          {"policies", c.raw_policies},
          {"subscriptions", c.raw_subscriptions}};
}

inline std::string workload_fingerprint(const ScenarioConfig& c) {
  return crypto::hash(std::string_view(workload_json(c).dump())).hex().substr(0, 16);
}

inline json config_to_json(const ScenarioConfig& c) {
  json j = workload_json(c);
  j.erase("seed");
  j["id"] = c.id;
  j["architecture"] = to_string(c.architecture);
  if (c.seed) j["seed"] = *c.seed;
  j["validators"] = c.validators;
  j["net"] = {{"links", links_to_json(c.net)}};
  j["energy"] = {{"costs",
                  {{"cpu_j_per_ms", c.energy.cpu_j_per_ms},
                   {"lan_j_per_kb", c.energy.lan_j_per_kb},
                   {"wan_j_per_kb", c.energy.wan_j_per_kb},
                   {"hash_j", c.energy.hash_j}}},
                 {"cpu",
                  {{"sensor_seal_ms", c.cpu.sensor_seal_ms},
                   {"ingest_ms", c.cpu.ingest_ms},
                   {"sign_ms", c.cpu.sign_ms},
                   {"verify_ms", c.cpu.verify_ms},
                   {"seal_ms", c.cpu.seal_ms},
                   {"contract_ms", c.cpu.contract_ms},
                   {"train_ms_per_row_epoch", c.cpu.train_ms_per_row_epoch},
                   {"paillier_op_ms", c.cpu.paillier_op_ms}}}};
  switch (c.architecture) {
    case Architecture::proposed:
      j["poa"] = {{"slot_ms", c.poa.slot_ms}, {"block_capacity", c.poa.block_capacity}};
      break;
    case Architecture::pow_chain:
      j["pow"] = {{"difficulty", c.pow.difficulty}, {"hashrate_per_ms", c.pow.hashrate_per_ms}, {"max_tx", c.pow.max_tx}};
      break;
    case Architecture::cloud: j["cloud"] = {{"service_tps", c.cloud.service_tps}}; break;
  }
  if (c.injections.empty()) j.erase("injections");
  return j;
}

/// Rejects inconsistent configs before anything runs.
inline void validate(const ScenarioConfig& c) {
  if (!c.seed) throw ConfigError("config must set a seed");
  if (c.hospitals == 0) throw ConfigError("hospitals must be positive");
  if (c.validators == 0 || c.validators > c.hospitals) throw ConfigError("validators must be in [1, hospitals]");
  if (c.duration_ms == 0) throw ConfigError("duration_ms must be positive");
  if (c.edge.window < 4) throw ConfigError("edge.window must be >= 4");
  if (!(c.edge.z_threshold > 0)) throw ConfigError("edge.z_threshold must be positive");
  if (c.edge.sample_period_ms == 0) throw ConfigError("edge.sample_period_ms must be positive");
  if (c.workload.episode_ms == 0) throw ConfigError("workload.episode_ms must be positive");
  if (c.workload.record_interval_ms == 0) throw ConfigError("workload.record_interval_ms must be positive");
  if (!(c.workload.access_rate_per_s >= 0)) throw ConfigError("workload.access_rate_per_s must be >= 0");
  if (c.fl.enabled) {
    if (c.fl.rounds == 0 || c.fl.epochs == 0) throw ConfigError("fl.rounds and fl.epochs must be positive");
    if (!(c.fl.lr > 0)) throw ConfigError("fl.lr must be positive");
    if (c.fl.epsilon && !(*c.fl.epsilon > 0)) throw ConfigError("fl.epsilon must be positive");
    if (!(c.fl.delta > 0 && c.fl.delta < 1)) throw ConfigError("fl.delta must be in (0, 1)");
    if (!(c.fl.clip_norm > 0)) throw ConfigError("fl.clip_norm must be positive");
    if (c.fl.paillier_bits < 64) throw ConfigError("fl.paillier_bits must be >= 64");
    if (c.fl.rows_per_patient == 0) throw ConfigError("fl.rows_per_patient must be positive");
    if (!(c.fl.label_noise >= 0 && c.fl.label_noise < 0.5)) throw ConfigError("fl.label_noise must be in [0, 0.5)");
  }
  for (const auto& l : c.net.links) {
    if (!(l.base_ms >= 0) || !(l.jitter_ms >= 0)) throw ConfigError("link " + l.name + " has a negative delay");
    if (!(l.bandwidth_kbps > 0)) throw ConfigError("link " + l.name + " needs positive bandwidth");
  }
  const auto& e = c.energy;
  if (!(e.cpu_j_per_ms >= 0 && e.lan_j_per_kb >= 0 && e.wan_j_per_kb >= 0 && e.hash_j >= 0))
    throw ConfigError("energy costs must be >= 0");
  if (!(c.poa.slot_ms > 0) || c.poa.block_capacity == 0) throw ConfigError("poa parameters must be positive");
  if (c.pow.difficulty < 1 || !(c.pow.hashrate_per_ms > 0) || c.pow.max_tx == 0)
    throw ConfigError("pow parameters must be positive");
  if (!(c.cloud.service_tps > 0)) throw ConfigError("cloud.service_tps must be positive");
  if (c.probe.window_ms == 0) throw ConfigError("probe.window_ms must be positive");
  if (!(c.probe.offered_tps > 0)) throw ConfigError("probe.offered_tps must be positive");
  if (c.injections.size() != c.injection_patients.size()) throw ConfigError("injection list is inconsistent");
  for (std::size_t i = 0; i < c.injections.size(); ++i) {
    const auto& p = c.injection_patients[i];
    bool known = false;
    for (std::size_t k = 0; k < c.patients; ++k) known = known || p == telemetry::patient_name(k);
    if (!known) throw ConfigError("injection names unknown patient '" + p + "'");
  }
}

inline ScenarioConfig load_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  auto c = config_from_json(j);
  validate(c);
  return c;
}

}  // namespace hiot::bench
