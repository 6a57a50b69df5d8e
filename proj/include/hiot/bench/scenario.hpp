#pragma once

#include <deque>
#include <memory>
#include <variant>

#include "hiot/bench/fl_pipeline.hpp"
#include "hiot/bench/report.hpp"
#include "hiot/crypto/channel.hpp"
#include "hiot/ledger/codec.hpp"
#include "hiot/ledger/sealing.hpp"

namespace hiot::bench {

using crypto::Digest;

namespace msg {

struct SampleDue {
  std::size_t patient = 0;
  std::size_t idx = 0;
};
struct Frame {
  std::size_t patient = 0;
  std::shared_ptr<const Bytes> bytes;
};
enum class Origin { client, verified, gossip };
struct TxIn {
  std::shared_ptr<const ledger::Transaction> tx;
  Origin origin = Origin::client;
};
struct BlockIn {
  std::shared_ptr<const ledger::Block> block;
};
struct SlotTick {};
struct MineDone {
  std::uint64_t generation = 0;
};
struct Notify {
  std::string patient;
  std::uint64_t alert_ms = 0;
};
struct Response {
  bool permit = false;
};
struct AccessDue {
  std::size_t idx = 0;
};
struct ConsentDue {
  std::size_t idx = 0;
};
struct RecordDue {
  std::size_t patient = 0;
};
struct FlTrain {
  std::shared_ptr<const fl::GlobalModel> model;
};
struct ModelOut {
  std::shared_ptr<const fl::GlobalModel> model;
};
/// Cloud-side unit of work; the cloud trusts its authenticated sessions, so
/// jobs carry no signatures.
struct Job {
  ledger::TxKind kind = ledger::TxKind::record_write;
  std::string sender;
  Bytes payload;
  std::size_t track = 0;
};
struct CloudJob {
  std::shared_ptr<const Job> job;
};
struct ServiceDone {};
struct ProbeGen {
  std::uint64_t k = 0;
};

using Payload = std::variant<SampleDue, Frame, TxIn, BlockIn, SlotTick, MineDone, Notify, Response, AccessDue,
                             ConsentDue, RecordDue, FlTrain, ModelOut, CloudJob, ServiceDone, ProbeGen>;

inline std::string kind_of(const Payload& p) {
  static constexpr std::array<const char*, std::variant_size_v<Payload>> names = {
      "SampleDue", "Frame",     "TxIn",      "BlockIn", "SlotTick", "MineDone",    "Notify",  "Response",
      "AccessDue", "ConsentDue", "RecordDue", "FlTrain", "ModelOut", "CloudJob", "ServiceDone", "ProbeGen"};
  return names[p.index()];
}

}  // namespace msg

struct RunOptions {
  bool trace = false;
  std::optional<double> offered_tps;  // set for a throughput probe
};

struct RunOutput {
  MetricsReport report;
  std::vector<ledger::Block> chain;  // validator 0's copy; empty for the cloud baseline
  std::string decisions_csv;
  std::vector<std::string> trace;
  fl::GlobalModel model;  // final global model
};

namespace node {
inline constexpr netsim::NodeId cloud = 1;
inline constexpr netsim::NodeId miner = 2;
inline constexpr netsim::NodeId probe = 3;
inline netsim::NodeId edge(std::size_t h) { return static_cast<netsim::NodeId>(100 + h); }
inline netsim::NodeId hospital(std::size_t h) { return static_cast<netsim::NodeId>(200 + h); }
inline netsim::NodeId provider(std::size_t k) { return static_cast<netsim::NodeId>(300 + k); }
inline netsim::NodeId sensor(std::size_t i) { return static_cast<netsim::NodeId>(1000 + i); }
}  // namespace node

inline constexpr double kDrainMs = 3000;
inline constexpr double kPowDrainMs = 5000;

class ScenarioRunner {
 public:
  using Sim = netsim::Simulator<msg::Payload>;
  using Event = Sim::Event;

  ScenarioRunner(const ScenarioConfig& cfg, RunOptions opt)
      : cfg_(cfg),
        opt_(opt),
        seed_(cfg.seed_value()),
        gp_(crypto::GroupParams::standard()),
        sim_(Rng::derive(cfg.seed_value(), 1)),
        energy_(cfg.energy),
        net_(sim_, energy_),
        mine_rng_(Rng::derive(cfg.seed_value(), 21)) {
    validate(cfg_);
    probe_ = opt_.offered_tps.has_value();
    if (probe_ && !(*opt_.offered_tps > 0)) throw ConfigError("offered load must be positive");
    auto wcfg = cfg_;
    if (probe_) {
      // pure transaction load: no telemetry, access, consent or training
      wcfg.patients = 0;
      wcfg.fl.enabled = false;
    }
    world_ = build_world(wcfg);
    chain_arch_ = cfg_.architecture != Architecture::cloud;
    k_ = cfg_.validators;
    setup_keys();
    setup_nodes();
  }

  RunOutput run() {
    if (opt_.trace) sim_.enable_trace(msg::kind_of);
    sim_.set_handler([this](const Event& ev) { dispatch(ev); });
    schedule_workload();
    sim_.run_until(end_ms_);
    if (cfg_.architecture == Architecture::pow_chain) charge_hashing(end_ms_);
    return finish();
  }

 private:
  struct Track {
    double submit_ms = 0;
    double commit_ms = -1;
  };

  struct Validator {
    std::size_t h = 0;
    std::unique_ptr<ledger::Chain> chain;
    std::unique_ptr<ledger::TxPool> pool;
    std::unique_ptr<ContractEngine> engine;
    std::map<std::uint64_t, std::shared_ptr<const ledger::Block>> buffered;
  };

  struct AlertSeen {
    std::size_t patient = 0;
    std::uint64_t created_ms = 0;
  };

  struct Delivery {
    std::string patient;
    std::uint64_t alert_ms = 0;
    double at_ms = 0;
  };

  // ---- setup -------------------------------------------------------------

  void setup_keys() {
    for (const auto& [id, _] : world_.principals) keys_.emplace(id, crypto::KeyPair::derive(gp_, id, seed_));
    keys_.emplace("cloud", crypto::KeyPair::derive(gp_, "cloud", seed_));
    for (std::size_t i = 0; i < world_.profiles.size(); ++i) {
      const auto& pid = world_.profiles[i].patient_id;
      const auto sensor = crypto::KeyPair::derive(gp_, "sensor:" + pid, seed_);
      const auto& receiver = chain_arch_ ? keys_.at(edge_id(world_.patient_hospital[i])) : keys_.at("cloud");
      const auto k_sensor = crypto::dh_derive(gp_, sensor.secret, receiver.pub);
      const auto k_receiver = crypto::dh_derive(gp_, receiver.secret, sensor.pub);
      if (k_sensor != k_receiver) fail("DH keys disagree for " + pid);
      sensor_keys_.push_back(k_sensor);
      receiver_keys_.push_back(k_receiver);
    }
    if (cfg_.fl.enabled) {
      for (auto h : fl_participants(world_)) fl_participants_.insert(h);
      if (!fl_participants_.empty()) fl_key_ = std::make_unique<crypto::PaillierKey>(fl_keygen(cfg_));
    }
  }

  void link(netsim::NodeId a, netsim::NodeId b, const std::string& name) {
    const auto& s = cfg_.net.get(name);
    net_.add_duplex(netsim::Link{a, b, s.base_ms, s.jitter_ms, s.bandwidth_kbps, s.cls});
  }

  void setup_nodes() {
    const auto H = cfg_.hospitals;
    for (std::size_t i = 0; i < world_.profiles.size(); ++i) {
      const auto h = world_.patient_hospital[i];
      link(node::sensor(i), node::edge(h), "sensor_edge");
      names_[node::sensor(i)] = "sensor:" + world_.profiles[i].patient_id;
    }
    for (std::size_t p = 0; p < world_.providers.size(); ++p) {
      names_[node::provider(p)] = "provider:" + world_.providers[p];
      provider_index_[world_.providers[p]] = p;
    }
    if (!chain_arch_) {
      names_[node::cloud] = "cloud";
      for (std::size_t h = 0; h < H; ++h) {
        link(node::edge(h), node::cloud, "gateway_cloud");
        names_[node::edge(h)] = "gateway:h" + std::to_string(h);
      }
      for (std::size_t p = 0; p < world_.providers.size(); ++p) link(node::provider(p), node::cloud, "cloud_provider");
      engines_cloud_ = std::make_unique<ContractEngine>(world_, fl_key_ ? &fl_key_->pub : nullptr);
      end_ms_ = probe_ ? probe_end() : static_cast<double>(cfg_.duration_ms) + kDrainMs;
      return;
    }

    for (std::size_t h = 0; h < H; ++h) {
      link(node::edge(h), node::hospital(h), "edge_hospital");
      names_[node::edge(h)] = "edge:h" + std::to_string(h);
      names_[node::hospital(h)] = "hospital:h" + std::to_string(h);
      for (std::size_t g = h + 1; g < H; ++g) link(node::hospital(h), node::hospital(g), "hospital_hospital");
    }
    for (std::size_t p = 0; p < world_.providers.size(); ++p) {
      const auto& id = world_.providers[p];
      const auto home = world_.home.at(id);
      const bool local = !world_.remote.contains(id) && home < k_;
      link(node::provider(p), node::hospital(notifier_of(id)), local ? "hospital_provider" : "remote_provider");
    }

    ledger::GenesisConfig g;
    g.consensus = cfg_.architecture == Architecture::proposed ? ledger::Consensus::poa : ledger::Consensus::pow;
    g.pow_min_difficulty = cfg_.architecture == Architecture::pow_chain ? cfg_.pow.difficulty : 1;
    g.group = gp_;
    for (std::size_t v = 0; v < k_; ++v) g.validators.push_back(hospital_id(v));
    for (const auto& [id, kp] : keys_)
      if (id != "cloud") g.registry[id] = kp.pub;
    for (std::size_t v = 0; v < k_; ++v) {
      Validator val;
      val.h = v;
      val.chain = std::make_unique<ledger::Chain>(g, 0);
      val.pool = std::make_unique<ledger::TxPool>(*val.chain);
      val.engine = std::make_unique<ContractEngine>(world_, fl_key_ ? &fl_key_->pub : nullptr);
      validators_.push_back(std::move(val));
    }
    const double drain = cfg_.architecture == Architecture::pow_chain ? kPowDrainMs : kDrainMs;
    end_ms_ = probe_ ? probe_end() : static_cast<double>(cfg_.duration_ms) + drain;
  }

  double probe_end() const { return static_cast<double>(cfg_.probe.warmup_ms + cfg_.probe.window_ms); }

  std::size_t notifier_of(const std::string& principal) const { return world_.home.at(principal) % k_; }

  void schedule_workload() {
    const double gen_end = static_cast<double>(cfg_.duration_ms);
    if (probe_) {
      sim_.schedule_at(0, node::probe, msg::ProbeGen{0});
    } else {
      for (std::size_t i = 0; i < world_.streams.size(); ++i)
        if (!world_.streams[i].empty())
          sim_.schedule_at(static_cast<double>(world_.streams[i][0].t_ms), node::sensor(i), msg::SampleDue{i, 0});
      for (std::size_t a = 0; a < world_.access.size(); ++a)
        sim_.schedule_at(static_cast<double>(world_.access[a].t_ms), node::provider(provider_index_.at(world_.access[a].principal)),
                         msg::AccessDue{a});
      for (std::size_t c = 0; c < world_.consent.size(); ++c)
        sim_.schedule_at(static_cast<double>(world_.consent[c].t_ms), consent_origin(world_.consent[c].signer),
                         msg::ConsentDue{c});
      const auto interval = static_cast<double>(cfg_.workload.record_interval_ms);
      for (std::size_t i = 0; i < world_.profiles.size(); ++i) {
        const double first = interval + interval * static_cast<double>(i) / static_cast<double>(world_.profiles.size());
        if (first < gen_end)
          sim_.schedule_at(first, chain_arch_ ? node::edge(world_.patient_hospital[i]) : node::cloud, msg::RecordDue{i});
      }
      if (!fl_participants_.empty() && static_cast<double>(cfg_.fl.start_ms) < gen_end) {
        auto m = std::make_shared<const fl::GlobalModel>(global_);
        for (auto h : fl_participants_) sim_.schedule_at(static_cast<double>(cfg_.fl.start_ms), fl_node(h), msg::FlTrain{m});
      }
    }
    if (cfg_.architecture == Architecture::proposed)
      for (std::size_t v = 0; v < k_; ++v) sim_.schedule_at(cfg_.poa.slot_ms, node::hospital(v), msg::SlotTick{});
    if (cfg_.architecture == Architecture::pow_chain) start_mining();
  }

  netsim::NodeId consent_origin(const std::string& signer) const {
    auto it = provider_index_.find(signer);
    if (it != provider_index_.end()) return node::provider(it->second);
    for (std::size_t i = 0; i < world_.profiles.size(); ++i)
      if (world_.profiles[i].patient_id == signer) return node::sensor(i);
    throw ConfigError("consent signer '" + signer + "' has no node");
  }

  netsim::NodeId fl_node(std::size_t h) const { return chain_arch_ ? node::hospital(h) : node::edge(h); }

  // ---- dispatch ----------------------------------------------------------

  void dispatch(const Event& ev) {
    std::visit([&](const auto& m) { on(ev.target, m); }, ev.payload);
  }

  void cpu(netsim::NodeId n, double ms) {
    if (ms > 0) energy_.charge(n, netsim::Charge::cpu_ms, ms);
  }

  double now() const { return sim_.now(); }
  std::uint64_t now_ms() const { return static_cast<std::uint64_t>(now()); }

  void on(netsim::NodeId at, const msg::SampleDue& m) {
    const auto& s = world_.streams[m.patient][m.idx];
    auto frame = std::make_shared<const Bytes>(crypto::seal(sensor_keys_[m.patient], s.encode(), m.idx));
    cpu(at, cfg_.cpu.sensor_seal_ms);
    net_.send(at, node::edge(world_.patient_hospital[m.patient]), frame->size(), msg::Frame{m.patient, frame},
              cfg_.cpu.sensor_seal_ms);
    if (m.idx + 1 < world_.streams[m.patient].size())
      sim_.schedule_at(static_cast<double>(world_.streams[m.patient][m.idx + 1].t_ms), at,
                       msg::SampleDue{m.patient, m.idx + 1});
  }

  void on(netsim::NodeId at, const msg::Frame& m) {
    if (!chain_arch_ && at != node::cloud) {
      net_.send(at, node::cloud, m.bytes->size(), m);  // the gateway only relays
      return;
    }
    telemetry::VitalsSample s;
    try {
      s = telemetry::VitalsSample::decode(crypto::open(receiver_keys_[m.patient], *m.bytes));
    } catch (const std::exception& e) {
      fail(std::string("frame rejected: ") + e.what());
      return;
    }
    cpu(at, cfg_.cpu.ingest_ms);
    const auto h = world_.patient_hospital[m.patient];
    auto& mon = monitor(chain_arch_ ? h : H_CLOUD);
    auto step = mon.ingest(s);
    if (step.features) latest_[m.patient] = *step.features;
    if (!step.alert) return;
    alerts_.push_back(AlertSeen{m.patient, step.alert->created_ms});
    auto payload = step.alert->encode();
    if (chain_arch_) {
      cpu(at, cfg_.cpu.sign_ms);
      submit_tx(at, node::hospital(h), ledger::TxKind::alert, std::move(payload), edge_id(h),
                cfg_.cpu.ingest_ms + cfg_.cpu.sign_ms);
    } else {
      enqueue_local(ledger::TxKind::alert, edge_id(h), std::move(payload), cfg_.cpu.ingest_ms);
    }
  }

  static constexpr std::size_t H_CLOUD = static_cast<std::size_t>(-1);

  edge::EdgeMonitor& monitor(std::size_t key) {
    auto it = monitors_.find(key);
    if (it == monitors_.end()) {
      const auto name = key == H_CLOUD ? std::string("cloud") : edge_id(key);
      it = monitors_.emplace(key, edge::EdgeMonitor(name, cfg_.edge.window, cfg_.edge.z_threshold)).first;
    }
    return it->second;
  }

  std::size_t new_track() {
    tracks_.push_back(Track{now(), -1});
    return tracks_.size() - 1;
  }

  /// Signs a transaction at `from` and sends it to `to` after `hold` ms.
  void submit_tx(netsim::NodeId from, netsim::NodeId to, ledger::TxKind kind, Bytes payload,
                 const std::string& sender, double hold) {
    auto tx = std::make_shared<ledger::Transaction>(
        ledger::make_transaction(gp_, kind, std::move(payload), sender, keys_.at(sender), now_ms()));
    const auto id = tx->id(gp_);
    if (!track_of_.contains(id)) track_of_[id] = new_track();
    if (from == to) {
      sim_.schedule(hold, to, msg::TxIn{tx, msg::Origin::client});
      return;
    }
    net_.send(from, to, tx->wire_size(gp_), msg::TxIn{tx, msg::Origin::client}, hold);
  }

  void enqueue_local(ledger::TxKind kind, const std::string& sender, Bytes payload, double delay) {
    auto job = std::make_shared<msg::Job>(msg::Job{kind, sender, std::move(payload), new_track()});
    sim_.schedule(delay, node::cloud, msg::CloudJob{job});
  }

  void send_job(netsim::NodeId from, ledger::TxKind kind, const std::string& sender, Bytes payload, double hold) {
    auto job = std::make_shared<msg::Job>(msg::Job{kind, sender, std::move(payload), new_track()});
    const auto size = job->payload.size() + job->sender.size() + 16;
    net_.send(from, node::cloud, size, msg::CloudJob{job}, hold);
  }

  bool is_validator_node(netsim::NodeId n) const {
    return n >= node::hospital(0) && n < node::hospital(k_);
  }

  Validator& validator_at(netsim::NodeId n) { return validators_.at(n - node::hospital(0)); }

  void on(netsim::NodeId at, const msg::TxIn& m) {
    if (at >= node::edge(0) && at < node::edge(cfg_.hospitals)) {
      net_.send(at, node::hospital(at - node::edge(0)), m.tx->wire_size(gp_), m);  // edge relays patient-signed txs
      return;
    }
    if (!is_validator_node(at)) {
      const auto h = at - node::hospital(0);
      net_.send(at, node::hospital(h % k_), m.tx->wire_size(gp_), m);
      return;
    }
    auto& v = validator_at(at);
    switch (m.origin) {
      case msg::Origin::client:
        cpu(at, cfg_.cpu.verify_ms);
        sim_.schedule(cfg_.cpu.verify_ms, at, msg::TxIn{m.tx, msg::Origin::verified});
        return;
      case msg::Origin::verified: {
        if (!admissible(*m.tx)) {
          ++rejected_;
          return;
        }
        const auto st = v.pool->submit(*m.tx);
        if (st == ledger::SubmitStatus::duplicate) return;
        if (st != ledger::SubmitStatus::accepted) {
          ++rejected_;
          return;
        }
        accepted_.insert(m.tx->id(gp_));
        for (std::size_t o = 0; o < k_; ++o)
          if (o != v.h) net_.send(at, node::hospital(o), m.tx->wire_size(gp_), msg::TxIn{m.tx, msg::Origin::gossip});
        on_admitted(v.h);
        return;
      }
      case msg::Origin::gossip:
        if (v.pool->admit_verified(*m.tx) == ledger::SubmitStatus::accepted)
          on_admitted(v.h);
        return;
    }
  }

  /// Consent changes are admitted only when signed by the patient or a guardian.
  bool admissible(const ledger::Transaction& tx) const { return admissible(tx.kind, tx.sender, tx.payload); }

  bool admissible(ledger::TxKind kind, const std::string& sender, ByteView payload) const {
    if (kind != ledger::TxKind::consent_change) return true;
    auto it = world_.principals.find(sender);
    if (it == world_.principals.end()) return false;
    try {
      return contracts::may_sign_consent(it->second, contracts::ConsentChange::decode(payload).patient_id);
    } catch (const DecodeError&) {
      return false;
    }
  }

  // ---- PoA ---------------------------------------------------------------

  void on(netsim::NodeId at, const msg::SlotTick&) {
    auto& v = validator_at(at);
    const auto& me = hospital_id(v.h);
    if (v.chain->expected_leader(v.chain->next_index()) == me && !v.pool->empty()) {
      auto block = ledger::poa_seal(*v.chain, *v.pool, me, keys_.at(me), now_ms(), cfg_.poa.block_capacity);
      cpu(at, cfg_.cpu.seal_ms);
      commit_local(v, std::make_shared<const ledger::Block>(std::move(block)), true, cfg_.cpu.seal_ms);
    }
    if (now() + cfg_.poa.slot_ms <= end_ms_) sim_.schedule(cfg_.poa.slot_ms, at, msg::SlotTick{});
  }

  /// Appends a block this validator produced, then broadcasts it compactly:
  /// peers already hold the transactions from gossip, so only ids travel.
  void commit_local(Validator& v, std::shared_ptr<const ledger::Block> block, bool produced, double hold) {
    const auto rule = v.chain->append(*block);
    if (rule != ledger::Rule::ok) {
      fail(hospital_id(v.h) + " rejected its own block: " + ledger::to_string(rule));
      return;
    }
    v.pool->remove_committed(*block);
    if (produced) {
      for (const auto& tx : block->txs) {
        auto it = track_of_.find(tx.id(gp_));
        if (it != track_of_.end() && tracks_[it->second].commit_ms < 0) tracks_[it->second].commit_ms = now();
      }
      const auto compact = block->header.encode(gp_).size() + 4 + 32 * block->txs.size();
      for (std::size_t o = 0; o < k_; ++o)
        if (o != v.h) net_.send(node::hospital(v.h), node::hospital(o), compact, msg::BlockIn{block}, hold);
    }
    run_contracts(v, *block, hold);
  }

  void on(netsim::NodeId at, const msg::BlockIn& m) {
    auto& v = validator_at(at);
    v.buffered[m.block->header.index] = m.block;
    for (;;) {
      auto it = v.buffered.find(v.chain->next_index());
      if (it == v.buffered.end()) break;
      auto b = it->second;
      v.buffered.erase(it);
      const double check = cfg_.cpu.verify_ms * static_cast<double>(1 + b->txs.size());
      cpu(at, check);
      const auto rule = v.chain->validate(*b);
      if (rule != ledger::Rule::ok) {
        fail(hospital_id(v.h) + " rejected block " + std::to_string(b->header.index) + ": " + ledger::to_string(rule));
        continue;
      }
      commit_local(v, b, false, check);
      if (cfg_.architecture == Architecture::pow_chain && waiting_winner_ && *waiting_winner_ == v.h &&
          v.chain->next_index() == height_ + 1) {
        waiting_winner_.reset();
        mine();
      }
    }
    for (auto it = v.buffered.begin(); it != v.buffered.end();)
      it = it->first < v.chain->next_index() ? v.buffered.erase(it) : std::next(it);
  }

  void run_contracts(Validator& v, const ledger::Block& block, double hold) {
    const auto at = node::hospital(v.h);
    for (const auto& tx : block.txs) {
      hold += cfg_.cpu.contract_ms;
      cpu(at, cfg_.cpu.contract_ms);
      auto fx = v.engine->apply(ContractInput{tx.kind, tx.sender, tx.payload, block.header.timestamp_ms});
      for (const auto& n : fx.notifications)
        if (notifier_of(n.provider_id) == v.h) notify(at, n, hold);
      if (fx.access_response && notifier_of(fx.access_response->first) == v.h)
        respond(at, fx.access_response->first, fx.access_response->second, hold);
      if (fx.model_update && v.h == 0) collect_update(at, *fx.model_update, hold);
    }
  }

  void notify(netsim::NodeId from, const contracts::Notification& n, double hold) {
    const auto p = provider_index_.at(n.provider_id);
    ++notifications_;
    net_.send(from, node::provider(p), 64, msg::Notify{n.patient_id, n.alert_created_ms}, hold);
  }

  void respond(netsim::NodeId from, const std::string& requester, bool permit, double hold) {
    auto it = provider_index_.find(requester);
    if (it == provider_index_.end()) return;
    net_.send(from, node::provider(it->second), 48, msg::Response{permit}, hold);
  }

  void on(netsim::NodeId, const msg::Notify& m) { deliveries_.push_back(Delivery{m.patient, m.alert_ms, now()}); }
  void on(netsim::NodeId, const msg::Response&) { ++responses_; }

  // ---- PoW ---------------------------------------------------------------

  /// One logical mining process stands in for the whole network: the next
  /// winner is drawn uniformly and the solve time is attempts / hashrate.
  void start_mining() {
    if (now() >= end_ms_) return;
    winner_ = static_cast<std::size_t>(mine_rng_.below(k_));
    if (validators_[winner_].chain->next_index() != height_ + 1) {
      waiting_winner_ = winner_;
      return;
    }
    mine();
  }

  void mine() {
    auto& v = validators_[winner_];
    const auto& me = hospital_id(v.h);
    auto txs = v.pool->peek(cfg_.pow.max_tx);
    template_size_ = txs.size();
    auto tpl = ledger::PowTemplate::next_for(*v.chain, me, now_ms());
    auto res = ledger::pow_seal(txs, cfg_.pow.difficulty, mine_rng_.next_u64(), gp_, tpl);
    mining_block_ = std::make_shared<const ledger::Block>(std::move(res.block));
    mining_ = true;
    sim_.schedule(static_cast<double>(res.attempts) / cfg_.pow.hashrate_per_ms, node::miner,
                  msg::MineDone{++generation_});
  }

  void on_admitted(std::size_t v) {
    if (cfg_.architecture != Architecture::pow_chain) return;
    // a fuller template is worth restarting for; the search is memoryless
    if (mining_ && v == winner_ && template_size_ < cfg_.pow.max_tx) mine();
  }

  void charge_hashing(double until) {
    if (until <= hashed_until_) return;
    const double per_miner = (until - hashed_until_) * cfg_.pow.hashrate_per_ms / static_cast<double>(k_);
    for (std::size_t v = 0; v < k_; ++v) energy_.charge(node::hospital(v), netsim::Charge::hash_attempts, per_miner);
    hashed_until_ = until;
  }

  void on(netsim::NodeId, const msg::MineDone& m) {
    if (m.generation != generation_ || !mining_) return;
    charge_hashing(now());
    mining_ = false;
    auto& v = validators_[winner_];
    ++height_;
    commit_local(v, mining_block_, true, cfg_.cpu.seal_ms);
    start_mining();
  }

  // ---- cloud -------------------------------------------------------------

  void on(netsim::NodeId at, const msg::CloudJob& m) {
    if (at != node::cloud) {
      net_.send(at, node::cloud, m.job->payload.size() + m.job->sender.size() + 16, m);  // gateway relay
      return;
    }
    if (!admissible(m.job->kind, m.job->sender, m.job->payload)) {
      ++rejected_;
      return;
    }
    queue_.push_back(m.job);
    if (!serving_) serve_next();
  }

  void serve_next() {
    if (queue_.empty()) {
      serving_ = false;
      return;
    }
    serving_ = true;
    const double service = 1000.0 / cfg_.cloud.service_tps;
    cpu(node::cloud, service);
    sim_.schedule(service, node::cloud, msg::ServiceDone{});
  }

  void on(netsim::NodeId, const msg::ServiceDone&) {
    auto job = queue_.front();
    queue_.pop_front();
    tracks_[job->track].commit_ms = now();
    committed_jobs_.emplace_back(job, now_ms());
    auto fx = engines_cloud_->apply(ContractInput{job->kind, job->sender, job->payload, now_ms()});
    for (const auto& n : fx.notifications) notify(node::cloud, n, 0);
    if (fx.access_response) respond(node::cloud, fx.access_response->first, fx.access_response->second, 0);
    if (fx.model_update) collect_update(node::cloud, *fx.model_update, 0);
    serve_next();
  }

  // ---- access, consent, records -------------------------------------------

  void on(netsim::NodeId at, const msg::AccessDue& m) {
    const auto& a = world_.access[m.idx];
    auto payload = AccessPayload{a.principal, a.patient, "record", m.idx}.encode();
    if (chain_arch_) {
      cpu(at, cfg_.cpu.sign_ms);
      submit_tx(at, node::hospital(notifier_of(a.principal)), ledger::TxKind::access_request, std::move(payload),
                a.principal, cfg_.cpu.sign_ms);
    } else {
      send_job(at, ledger::TxKind::access_request, a.principal, std::move(payload), 0);
    }
  }

  void on(netsim::NodeId at, const msg::ConsentDue& m) {
    const auto& c = world_.consent[m.idx];
    auto payload = c.change.encode();
    const bool from_sensor = at >= node::sensor(0);
    if (chain_arch_) {
      cpu(at, cfg_.cpu.sign_ms);
      const auto to = from_sensor ? node::edge(world_.patient_hospital[at - node::sensor(0)])
                                  : node::hospital(notifier_of(c.signer));
      submit_tx(at, to, ledger::TxKind::consent_change, std::move(payload), c.signer, cfg_.cpu.sign_ms);
    } else if (from_sensor) {
      // relayed by the gateway
      auto job = std::make_shared<msg::Job>(msg::Job{ledger::TxKind::consent_change, c.signer, std::move(payload), new_track()});
      const auto gw = node::edge(world_.patient_hospital[at - node::sensor(0)]);
      const auto size = job->payload.size() + job->sender.size() + 16;
      net_.send(at, gw, size, msg::CloudJob{job});
    } else {
      send_job(at, ledger::TxKind::consent_change, c.signer, std::move(payload), 0);
    }
  }

  void on(netsim::NodeId at, const msg::RecordDue& m) {
    auto it = latest_.find(m.patient);
    if (it != latest_.end()) {
      RecordPayload p{it->second.patient_id, it->second.window_end_ms, it->second.values};
      const auto h = world_.patient_hospital[m.patient];
      if (chain_arch_) {
        cpu(at, cfg_.cpu.sign_ms);
        submit_tx(at, node::hospital(h), ledger::TxKind::record_write, p.encode(), edge_id(h), cfg_.cpu.sign_ms);
      } else {
        enqueue_local(ledger::TxKind::record_write, edge_id(h), p.encode(), 0);
      }
    }
    const double next = now() + static_cast<double>(cfg_.workload.record_interval_ms);
    if (next < static_cast<double>(cfg_.duration_ms)) sim_.schedule_at(next, at, m);
  }

  /// Open-loop record writes, round-robin over the edges. The sequence
  /// number goes in the window slot so every payload is distinct.
  void on(netsim::NodeId, const msg::ProbeGen& m) {
    const auto h = static_cast<std::size_t>(m.k % cfg_.hospitals);
    const RecordPayload p{telemetry::patient_name(static_cast<std::size_t>(m.k % 16)), m.k, {}};
    const auto from = node::edge(h);
    ++probe_submitted_;
    if (chain_arch_) {
      cpu(from, cfg_.cpu.sign_ms);
      submit_tx(from, node::hospital(h), ledger::TxKind::record_write, p.encode(), edge_id(h), cfg_.cpu.sign_ms);
    } else {
      send_job(from, ledger::TxKind::record_write, edge_id(h), p.encode(), 0);
    }
    const double next = static_cast<double>(m.k + 1) * 1000.0 / *opt_.offered_tps;
    if (next < end_ms_) sim_.schedule_at(next, node::probe, msg::ProbeGen{m.k + 1});
  }

  // ---- federated learning -------------------------------------------------

  void on(netsim::NodeId at, const msg::FlTrain& m) {
    const std::size_t h = chain_arch_ ? at - node::hospital(0) : at - node::edge(0);
    const auto& data = world_.fl_data[h];
    const auto mp = fl_client_step(cfg_, data, *m.model, h, fl_key_->pub);
    const double work = cfg_.cpu.train_ms_per_row_epoch * static_cast<double>(data.rows.size() * cfg_.fl.epochs) +
                        cfg_.cpu.paillier_op_ms * static_cast<double>(fl::kWeights);
    cpu(at, work);
    if (chain_arch_) {
      cpu(at, cfg_.cpu.sign_ms);
      submit_tx(at, node::hospital(h % k_), ledger::TxKind::model_update, mp.encode(fl_key_->pub), hospital_id(h),
                work + cfg_.cpu.sign_ms);
    } else {
      send_job(at, ledger::TxKind::model_update, hospital_id(h), mp.encode(fl_key_->pub), work);
    }
  }

  /// The aggregator sums ciphertexts per round and only the sum is decrypted.
  void collect_update(netsim::NodeId at, const ModelPayload& p, double hold) {
    if (p.update.round != global_.round) return;
    auto& bucket = round_updates_[p.update.round];
    for (const auto& e : bucket)
      if (e.node_id == p.update.node_id) return;
    bucket.push_back(p.update);
    round_losses_[p.update.round].push_back(p.train_loss);
    if (bucket.size() < fl_participants_.size()) return;

    const double work = cfg_.cpu.paillier_op_ms * static_cast<double>(fl::kWeights * bucket.size());
    cpu(at, work);
    global_ = fl_server_step(global_, *fl_key_, bucket);
    last_loss_ = stats::mean(round_losses_[p.update.round]);
    if (global_.round >= cfg_.fl.rounds || now() >= static_cast<double>(cfg_.duration_ms)) return;
    auto m = std::make_shared<const fl::GlobalModel>(global_);
    for (auto h : fl_participants_) {
      const auto dst = fl_node(h);
      if (dst == at)
        sim_.schedule(hold + work, dst, msg::ModelOut{m});
      else
        net_.send(at, dst, 16 + 8 * fl::kWeights, msg::ModelOut{m}, hold + work);
    }
  }

  void on(netsim::NodeId at, const msg::ModelOut& m) {
    if (now() < static_cast<double>(cfg_.duration_ms)) sim_.schedule(0, at, msg::FlTrain{m.model});
  }

  // ---- results -----------------------------------------------------------

  void fail(std::string what) { failures_.push_back(std::move(what)); }

  RunOutput finish() {
    RunOutput out;
    auto& r = out.report;
    r.scenario_id = cfg_.id;
    r.architecture = to_string(cfg_.architecture);
    r.seed = seed_;
    r.workload = workload_fingerprint(cfg_);

    episode_metrics(r);
    throughput_metrics(r);

    for (const auto& [n, c] : energy_.all()) {
      auto it = names_.find(n);
      r.energy_by_node[it == names_.end() ? std::to_string(n) : it->second] += c.total(energy_.costs());
      r.energy_counters.cpu_ms += c.cpu_ms;
      r.energy_counters.lan_tx_bytes += c.lan_tx_bytes;
      r.energy_counters.lan_rx_bytes += c.lan_rx_bytes;
      r.energy_counters.wan_tx_bytes += c.wan_tx_bytes;
      r.energy_counters.wan_rx_bytes += c.wan_rx_bytes;
      r.energy_counters.hash_attempts += c.hash_attempts;
    }
    r.energy_total = energy_.energy_total();

    const ContractEngine& primary = chain_arch_ ? *validators_.front().engine : *engines_cloud_;
    const auto& log = primary.log();
    r.decisions = log.decisions().size();
    r.permits = log.permits();
    r.denies = log.denies();
    const auto audit = contracts::audit_decisions(log, world_.policies, world_.principals);
    r.violations = audit.violations.size();
    r.mismatches = audit.mismatches.size();
    r.rejected_submissions = rejected_;
    out.decisions_csv = log.to_csv();

    r.fl_rounds = global_.round;
    r.fl_weights.assign(global_.weights.begin(), global_.weights.end());
    r.fl_loss = last_loss_;
    if (cfg_.fl.epsilon && global_.round > 0)
      r.fl_epsilon = fl::composed_epsilon(fl::DpParams::make(*cfg_.fl.epsilon, cfg_.fl.delta, cfg_.fl.clip_norm),
                                          global_.round);

    if (chain_arch_) {
      chain_invariants(r);
      out.chain = validators_.front().chain->blocks();
    } else {
      r.pending = queue_.size();
      replay_check(primary, committed_jobs_inputs());
    }
    if (r.violations > 0) fail(std::to_string(r.violations) + " access decisions violate the policy set");
    if (r.mismatches > 0) fail(std::to_string(r.mismatches) + " access decisions disagree with the audit oracle");
    if (r.alert_latency.p50 > r.alert_latency.p95) fail("latency p50 above p95");
    r.invariant_failures = failures_;
    if (opt_.trace) out.trace = sim_.trace();
    out.model = global_;
    return out;
  }

  void episode_metrics(MetricsReport& r) {
    const auto W = static_cast<std::uint64_t>(cfg_.edge.window) * cfg_.edge.sample_period_ms;
    r.episodes = world_.episodes.size();
    std::vector<double> lat;
    for (const auto& e : world_.episodes) {
      const auto end = e.injection.start_ms + e.injection.duration_ms;
      bool hit = false;
      for (const auto& a : alerts_)
        hit = hit || (a.patient == e.patient && a.created_ms >= e.onset_ms && a.created_ms < end);
      if (!hit) continue;
      ++r.detected;
      const auto& pid = world_.profiles[e.patient].patient_id;
      double first = -1;
      for (const auto& d : deliveries_)
        if (d.patient == pid && d.alert_ms >= e.onset_ms && d.alert_ms < end && (first < 0 || d.at_ms < first))
          first = d.at_ms;
      if (first >= 0) lat.push_back(first - static_cast<double>(e.onset_ms));
    }
    r.missed = r.episodes - r.detected;
    for (const auto& a : alerts_) {
      bool explained = false;
      for (const auto& e : world_.episodes)
        explained = explained || (e.patient == a.patient && a.created_ms >= e.onset_ms &&
                                  a.created_ms < e.injection.start_ms + e.injection.duration_ms + W);
      if (!explained) ++r.false_alarms;
    }
    r.notifications = notifications_;
    r.alert_latency = LatencyStats::of(std::move(lat));
  }

  void throughput_metrics(MetricsReport& r) {
    r.submitted = tracks_.size();
    double first = -1, last = -1;
    for (const auto& t : tracks_) {
      if (first < 0 || t.submit_ms < first) first = t.submit_ms;
      if (t.commit_ms < 0) continue;
      ++r.committed;
      last = std::max(last, t.commit_ms);
    }
    r.busy_ms = r.committed > 0 ? last - first : 0;
    r.throughput_tps = r.busy_ms > 0 ? static_cast<double>(r.committed) / (r.busy_ms / 1000.0) : 0;
    if (!probe_) return;
    ProbeResult p;
    p.offered_tps = *opt_.offered_tps;
    p.window_ms = cfg_.probe.window_ms;
    const double lo = static_cast<double>(cfg_.probe.warmup_ms);
    const double hi = lo + static_cast<double>(cfg_.probe.window_ms);
    p.submitted = probe_submitted_;
    std::size_t submitted_by_close = 0, committed_by_close = 0;
    for (const auto& t : tracks_) {
      if (t.submit_ms < hi) ++submitted_by_close;
      if (t.commit_ms >= 0 && t.commit_ms < hi) ++committed_by_close;
      if (t.commit_ms >= lo && t.commit_ms < hi) ++p.committed_in_window;
    }
    p.backlog = submitted_by_close - committed_by_close;
    p.sustained_tps = static_cast<double>(p.committed_in_window) / (static_cast<double>(p.window_ms) / 1000.0);
    p.saturated = p.sustained_tps < 0.95 * p.offered_tps;
    r.probe = p;
  }

  std::vector<ContractInput> committed_jobs_inputs() const {
    std::vector<ContractInput> in;
    for (const auto& [j, t] : committed_jobs_) in.push_back(ContractInput{j->kind, j->sender, j->payload, t});
    return in;
  }

  /// Re-derives contract state from the committed sequence alone and compares
  /// it with the incrementally maintained copy.
  void replay_check(const ContractEngine& live, const std::vector<ContractInput>& inputs) {
    ContractEngine fresh(world_, fl_key_ ? &fl_key_->pub : nullptr);
    for (const auto& in : inputs) fresh.apply(in);
    if (fresh.log().to_csv() != live.log().to_csv()) fail("decision log differs from a replay of the commit sequence");
    if (!(fresh.registry() == live.registry())) fail("consent registry differs from a replay of the commit sequence");
  }

  void chain_invariants(MetricsReport& r) {
    std::size_t longest = 0;
    for (std::size_t v = 0; v < k_; ++v)
      if (validators_[v].chain->next_index() > validators_[longest].chain->next_index()) longest = v;
    const auto& ref = validators_[longest].chain->blocks();
    r.blocks = ref.size() - 1;
    for (std::size_t v = 0; v < k_; ++v) {
      const auto& c = *validators_[v].chain;
      const auto vr = ledger::verify_chain(c);
      if (!vr.ok) {
        r.chain_ok = false;
        fail(hospital_id(v) + " chain fails verification at block " + std::to_string(vr.first_invalid));
      }
      for (std::size_t i = 0; i < c.blocks().size(); ++i)
        if (c.blocks()[i].header.hash(gp_) != ref[i].header.hash(gp_)) {
          r.chain_ok = false;
          fail(hospital_id(v) + " forks from the longest chain at block " + std::to_string(i));
          break;
        }
      if (c.next_index() == ref.size()) {
        if (validators_[v].engine->log().to_csv() != validators_[longest].engine->log().to_csv())
          fail(hospital_id(v) + " decision log differs from " + hospital_id(longest));
        if (!(validators_[v].engine->registry() == validators_[longest].engine->registry()))
          fail(hospital_id(v) + " consent registry differs from " + hospital_id(longest));
      }
    }

    // conservation: every admitted tx is committed exactly once or still pending
    std::set<Digest> committed;
    for (std::size_t i = 1; i < ref.size(); ++i)
      for (const auto& tx : ref[i].txs)
        if (!committed.insert(tx.id(gp_)).second) fail("transaction committed twice in block " + std::to_string(i));
    // a run can end with gossip in flight, so pending is the union over pools
    std::set<Digest> pending;
    for (const auto& v : validators_)
      for (const auto& tx : v.pool->peek(v.pool->size()))
        if (!committed.contains(tx.id(gp_))) pending.insert(tx.id(gp_));
    r.pending = pending.size();
    for (const auto& id : accepted_)
      if (!committed.contains(id) && !pending.contains(id)) {
        fail("admitted transaction " + id.hex().substr(0, 12) + " neither committed nor pending");
        break;
      }
    for (const auto& id : committed)
      if (!accepted_.contains(id)) {
        fail("committed transaction " + id.hex().substr(0, 12) + " was never admitted");
        break;
      }

    std::vector<ContractInput> inputs;
    const auto& v0 = validators_.front().chain->blocks();
    for (std::size_t i = 1; i < v0.size(); ++i)
      for (const auto& tx : v0[i].txs) inputs.push_back(ContractInput{tx.kind, tx.sender, tx.payload, v0[i].header.timestamp_ms});
    replay_check(*validators_.front().engine, inputs);
  }

  const ScenarioConfig& cfg_;
  RunOptions opt_;
  std::uint64_t seed_;
  const crypto::GroupParams& gp_;
  Sim sim_;
  netsim::EnergyLedger energy_;
  netsim::Network<msg::Payload> net_;
  Rng mine_rng_;
  World world_;
  bool probe_ = false;
  bool chain_arch_ = true;
  std::size_t k_ = 1;
  double end_ms_ = 0;

  std::map<std::string, crypto::KeyPair> keys_;
  std::vector<crypto::SymmetricKey> sensor_keys_;
  std::vector<crypto::SymmetricKey> receiver_keys_;
  std::map<netsim::NodeId, std::string> names_;
  std::map<std::string, std::size_t> provider_index_;
  std::map<std::size_t, edge::EdgeMonitor> monitors_;
  std::map<std::size_t, edge::FeatureVector> latest_;

  std::vector<Validator> validators_;
  std::set<Digest> accepted_;
  std::map<Digest, std::size_t> track_of_;
  std::vector<Track> tracks_;
  std::size_t rejected_ = 0;
  std::size_t probe_submitted_ = 0;

  // PoW
  std::size_t winner_ = 0;
  std::optional<std::size_t> waiting_winner_;
  std::uint64_t height_ = 0;
  std::uint64_t generation_ = 0;
  bool mining_ = false;
  std::size_t template_size_ = 0;
  std::shared_ptr<const ledger::Block> mining_block_;
  double hashed_until_ = 0;

  // cloud
  std::unique_ptr<ContractEngine> engines_cloud_;
  std::deque<std::shared_ptr<const msg::Job>> queue_;
  bool serving_ = false;
  std::vector<std::pair<std::shared_ptr<const msg::Job>, std::uint64_t>> committed_jobs_;

  // FL
  std::set<std::size_t> fl_participants_;
  std::unique_ptr<crypto::PaillierKey> fl_key_;
  fl::GlobalModel global_;
  std::map<std::uint64_t, std::vector<fl::EncryptedUpdate>> round_updates_;
  std::map<std::uint64_t, std::vector<double>> round_losses_;
  double last_loss_ = 0;

  std::vector<AlertSeen> alerts_;
  std::vector<Delivery> deliveries_;
  std::size_t notifications_ = 0;
  std::size_t responses_ = 0;
  std::vector<std::string> failures_;
};

inline RunOutput run_full(const ScenarioConfig& cfg, RunOptions opt = {}) { return ScenarioRunner(cfg, opt).run(); }

inline MetricsReport run_scenario(const ScenarioConfig& cfg) { return run_full(cfg).report; }

inline ProbeResult throughput_probe(const ScenarioConfig& cfg, double offered_tps) {
  RunOptions opt;
  opt.offered_tps = offered_tps;
  return *run_full(cfg, opt).report.probe;
}

}  // namespace hiot::bench
