#pragma once

#include "hiot/bench/world.hpp"
#include "hiot/crypto/paillier.hpp"
#include "hiot/ledger/transaction.hpp"

namespace hiot::bench {

// ---- transaction payloads -------------------------------------------------

struct RecordPayload {
  std::string patient;
  std::uint64_t window_end_ms = 0;
  std::array<double, edge::kFeatureCount> features{};

  Bytes encode() const {
    ByteWriter w;
    w.str(patient).u64(window_end_ms);
    for (double v : features) w.f64(v);
    return std::move(w).bytes();
  }
  static RecordPayload decode(ByteView b) {
    ByteReader r(b);
    RecordPayload p;
    p.patient = r.str();
    p.window_end_ms = r.u64();
    for (auto& v : p.features) v = r.f64();
    r.expect_done();
    return p;
  }
};

struct AccessPayload {
  std::string principal;
  std::string patient;
  std::string kind = "record";
  std::uint64_t request_id = 0;

  Bytes encode() const { return ByteWriter().str(principal).str(patient).str(kind).u64(request_id).bytes(); }
  static AccessPayload decode(ByteView b) {
    ByteReader r(b);
    AccessPayload p;
    p.principal = r.str();
    p.patient = r.str();
    p.kind = r.str();
    p.request_id = r.u64();
    r.expect_done();
    return p;
  }
};

struct ModelPayload {
  fl::EncryptedUpdate update;
  double train_loss = 0;

  Bytes encode(const crypto::PaillierPublicKey& pk) const {
    ByteWriter w;
    w.str(update.node_id).u64(update.round).u64(update.sample_count).f64(train_loss);
    w.raw(pk.fingerprint.view());
    for (const auto& c : update.coords) w.raw(crypto::to_fixed_bytes(c.value, pk.ciphertext_width()));
    return std::move(w).bytes();
  }
  static ModelPayload decode(ByteView b, const crypto::PaillierPublicKey& pk) {
    ByteReader r(b);
    ModelPayload p;
    p.update.node_id = r.str();
    p.update.round = r.u64();
    p.update.sample_count = r.u64();
    p.train_loss = r.f64();
    const auto fp = crypto::Digest::from_view(r.raw(32));
    for (auto& c : p.update.coords) c = crypto::Ciphertext{crypto::from_bytes(r.raw(pk.ciphertext_width())), fp};
    r.expect_done();
    return p;
  }
};

// ---- commit-time contracts ---------------------------------------------------

struct ContractInput {
  ledger::TxKind kind = ledger::TxKind::record_write;
  std::string sender;
  ByteView payload;
  std::uint64_t t_ms = 0;
};

struct ContractEffects {
  std::vector<contracts::Notification> notifications;
  std::optional<std::pair<std::string, bool>> access_response;  // requester, permit
  std::optional<ModelPayload> model_update;
  std::string warning;
};

/// Deterministic host functions run on every committed transaction. State is
/// the consent registry plus the decision log, so two engines fed the same
/// commit sequence end byte-identical.
class ContractEngine {
 public:
  ContractEngine(const World& world, const crypto::PaillierPublicKey* fl_key)
      : world_(&world), fl_key_(fl_key) {}

  ContractEffects apply(const ContractInput& in) {
    ContractEffects fx;
    const double t = static_cast<double>(in.t_ms);
    const auto sender = principal(in.sender);
    try {
      switch (in.kind) {
        case ledger::TxKind::alert: {
          const auto a = edge::Alert::decode(in.payload);
          const auto res = resource(a.patient_id, "alert");
          auto d = contracts::eval_access(world_->policies, sender, res, contracts::Action::write, registry_);
          log_.record(t, sender, res, contracts::Action::write, d);
          if (!d.permit) break;
          fx.notifications = contracts::on_alert(a.patient_id, a.created_ms, world_->subscriptions, world_->policies,
                                                 world_->principals, registry_, t, &log_);
          break;
        }
        case ledger::TxKind::record_write: {
          const auto p = RecordPayload::decode(in.payload);
          const auto res = resource(p.patient, "record");
          auto d = contracts::eval_access(world_->policies, sender, res, contracts::Action::write, registry_);
          log_.record(t, sender, res, contracts::Action::write, d);
          break;
        }
        case ledger::TxKind::access_request: {
          const auto p = AccessPayload::decode(in.payload);
          const auto res = resource(p.patient, p.kind);
          // the signer is the subject; the payload's principal field is informational
          auto d = contracts::eval_access(world_->policies, sender, res, contracts::Action::read, registry_);
          log_.record(t, sender, res, contracts::Action::read, d);
          fx.access_response = std::make_pair(in.sender, d.permit);
          break;
        }
        case ledger::TxKind::consent_change: {
          const auto c = contracts::ConsentChange::decode(in.payload);
          auto r = registry_.apply(c, in.t_ms);
          log_.record_consent(t, c);
          fx.warning = r.warning;
          break;
        }
        case ledger::TxKind::model_update: {
          if (!fl_key_) break;
          auto p = ModelPayload::decode(in.payload, *fl_key_);
          auto it = world_->principals.find(in.sender);
          contracts::Attributes res{{"kind", "model"}};
          if (it != world_->principals.end() && it->second.attributes.contains("org"))
            res["org"] = it->second.attributes.at("org");
          auto d = contracts::eval_access(world_->policies, sender, res, contracts::Action::aggregate, registry_);
          log_.record(t, sender, res, contracts::Action::aggregate, d);
          if (d.permit) fx.model_update = std::move(p);
          break;
        }
      }
    } catch (const DecodeError& e) {
      fx.warning = std::string("undecodable payload: ") + e.what();
    }
    return fx;
  }

  const contracts::ConsentRegistry& registry() const { return registry_; }
  const contracts::DecisionLog& log() const { return log_; }

 private:
  contracts::Principal principal(const std::string& id) const {
    auto it = world_->principals.find(id);
    return it == world_->principals.end() ? contracts::Principal{id, {}} : it->second;
  }

  contracts::Attributes resource(const std::string& patient, const std::string& kind) const {
    auto it = world_->principals.find(patient);
    if (it == world_->principals.end()) return {{"kind", kind}, {"patient", patient}};
    return contracts::resource_for(it->second, kind);
  }

  const World* world_;
  const crypto::PaillierPublicKey* fl_key_;
  contracts::ConsentRegistry registry_;
  contracts::DecisionLog log_;
};

}  // namespace hiot::bench
