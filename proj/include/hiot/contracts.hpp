#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hiot/util/bytes.hpp"

namespace hiot::contracts {

/// Malformed policy, predicate or subscription. Distinct from a deny.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Attributes = std::map<std::string, std::string>;

inline const std::set<std::string>& subject_keys() {
  static const std::set<std::string> keys{"id", "role", "org", "ward", "status"};
  return keys;
}

inline const std::set<std::string>& resource_keys() {
  static const std::set<std::string> keys{"kind", "ward", "patient", "org"};
  return keys;
}

struct Principal {
  std::string id;
  Attributes attributes;

  /// Subject attributes, including the id under key "id".
  Attributes subject() const {
    auto a = attributes;
    a["id"] = id;
    return a;
  }

  bool operator==(const Principal&) const = default;
};

/// Conjunction of key in {values}; one value means equality.
struct Predicate {
  std::map<std::string, std::set<std::string>> clauses;

  bool matches(const Attributes& attrs) const {
    for (const auto& [key, allowed] : clauses) {
      auto it = attrs.find(key);
      if (it == attrs.end() || !allowed.contains(it->second)) return false;
    }
    return true;
  }

  void check(const std::set<std::string>& declared, std::string_view what) const {
    for (const auto& [key, allowed] : clauses) {
      if (!declared.contains(key)) throw ConfigError(std::string(what) + " predicate uses undeclared key '" + key + "'");
      if (allowed.empty()) throw ConfigError(std::string(what) + " predicate on '" + key + "' has an empty value set");
    }
  }

  bool operator==(const Predicate&) const = default;
};

enum class Action { read, write, aggregate };
enum class Effect { permit, deny };

inline const char* to_string(Action a) {
  switch (a) {
    case Action::read: return "read";
    case Action::write: return "write";
    case Action::aggregate: return "aggregate";
  }
  return "?";
}

inline Action action_from(std::string_view s) {
  if (s == "read") return Action::read;
  if (s == "write") return Action::write;
  if (s == "aggregate") return Action::aggregate;
  throw ConfigError("unknown action '" + std::string(s) + "'");
}

struct Policy {
  std::string id;
  int priority = 0;
  Predicate subject;
  Predicate resource;
  Action action = Action::read;
  Effect effect = Effect::permit;
  bool requires_consent = false;

  void check() const {
    if (id.empty()) throw ConfigError("policy id must not be empty");
    subject.check(subject_keys(), "subject");
    resource.check(resource_keys(), "resource");
  }

  bool operator==(const Policy&) const = default;
};

using Grantee = std::variant<std::string, Predicate>;

struct ConsentRecord {
  std::string patient_id;
  Grantee grantee;
  std::set<std::string> scope;  // resource kinds
  std::uint64_t granted_ms = 0;
  std::optional<std::uint64_t> revoked_ms;

  bool active() const { return !revoked_ms.has_value(); }

  bool covers(const Principal& p, const Attributes& resource) const {
    auto pid = resource.find("patient");
    auto kind = resource.find("kind");
    if (pid == resource.end() || pid->second != patient_id) return false;
    if (kind == resource.end() || !scope.contains(kind->second)) return false;
    if (const auto* id = std::get_if<std::string>(&grantee)) return *id == p.id;
    return std::get<Predicate>(grantee).matches(p.subject());
  }

  bool operator==(const ConsentRecord&) const = default;
};

// ---- consent change payloads ----------------------------------------------

enum class ConsentOp : std::uint8_t { grant = 1, revoke = 2 };

struct ConsentChange {
  ConsentOp op = ConsentOp::grant;
  std::string patient_id;
  Grantee grantee;
  std::set<std::string> scope;

  Bytes encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(op)).str(patient_id);
    encode_grantee(w, grantee);
    w.u32(static_cast<std::uint32_t>(scope.size()));
    for (const auto& s : scope) w.str(s);
    return std::move(w).bytes();
  }

  static ConsentChange decode(ByteView b) {
    ByteReader r(b);
    ConsentChange c;
    const auto op = r.u8();
    if (op != 1 && op != 2) throw DecodeError("unknown consent op");
    c.op = static_cast<ConsentOp>(op);
    c.patient_id = r.str();
    c.grantee = decode_grantee(r);
    const auto n = r.u32();
    if (n > r.remaining()) throw DecodeError("implausible scope size");
    for (std::uint32_t i = 0; i < n; ++i) c.scope.insert(r.str());
    r.expect_done();
    return c;
  }

  static void encode_grantee(ByteWriter& w, const Grantee& g) {
    if (const auto* id = std::get_if<std::string>(&g)) {
      w.u8(0).str(*id);
      return;
    }
    const auto& p = std::get<Predicate>(g);
    w.u8(1).u32(static_cast<std::uint32_t>(p.clauses.size()));
    for (const auto& [k, vs] : p.clauses) {
      w.str(k).u32(static_cast<std::uint32_t>(vs.size()));
      for (const auto& v : vs) w.str(v);
    }
  }

  static Grantee decode_grantee(ByteReader& r) {
    const auto tag = r.u8();
    if (tag == 0) return r.str();
    if (tag != 1) throw DecodeError("unknown grantee tag");
    Predicate p;
    const auto n = r.u32();
    if (n > r.remaining()) throw DecodeError("implausible predicate size");
    for (std::uint32_t i = 0; i < n; ++i) {
      auto key = r.str();
      const auto m = r.u32();
      if (m > r.remaining()) throw DecodeError("implausible value set");
      auto& vs = p.clauses[key];
      for (std::uint32_t j = 0; j < m; ++j) vs.insert(r.str());
    }
    return p;
  }
};

/// Patients sign their own consent; guardians sign for their ward.
inline bool may_sign_consent(const Principal& signer, std::string_view patient_id) {
  if (signer.id == patient_id) return true;
  auto role = signer.attributes.find("role");
  auto of = signer.attributes.find("guardian_of");
  return role != signer.attributes.end() && role->second == "guardian" && of != signer.attributes.end() &&
         of->second == patient_id;
}

class ConsentRegistry {
 public:
  struct ApplyResult {
    bool changed = false;
    std::string warning;
  };

  /// Grant appends a record; revoke closes every active record for the same
  /// patient and grantee. Revoking nothing is a no-op with a warning.
  ApplyResult apply(const ConsentChange& c, std::uint64_t at_ms) {
    if (c.op == ConsentOp::grant) {
      records_.push_back(ConsentRecord{c.patient_id, c.grantee, c.scope, at_ms, std::nullopt});
      return {true, {}};
    }
    bool any = false;
    for (auto& r : records_) {
      if (r.active() && r.patient_id == c.patient_id && r.grantee == c.grantee) {
        r.revoked_ms = std::max(at_ms, r.granted_ms + 1);
        any = true;
      }
    }
    if (!any) return {false, "revoke without an active grant for patient " + c.patient_id};
    return {true, {}};
  }

  bool consent_satisfied(const Principal& p, const Attributes& resource) const {
    return std::any_of(records_.begin(), records_.end(),
                       [&](const ConsentRecord& r) { return r.active() && r.covers(p, resource); });
  }

  const std::vector<ConsentRecord>& records() const { return records_; }

  /// Canonical state bytes for replay comparisons.
  Bytes encode() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(records_.size()));
    for (const auto& r : records_) {
      w.str(r.patient_id);
      ConsentChange::encode_grantee(w, r.grantee);
      w.u32(static_cast<std::uint32_t>(r.scope.size()));
      for (const auto& s : r.scope) w.str(s);
      w.u64(r.granted_ms).u8(r.revoked_ms ? 1 : 0).u64(r.revoked_ms.value_or(0));
    }
    return std::move(w).bytes();
  }

  bool operator==(const ConsentRegistry&) const = default;

 private:
  std::vector<ConsentRecord> records_;
};

/// Pure fold over committed consent changes, in commit order.
inline ConsentRegistry apply_consent(ConsentRegistry reg, const ConsentChange& c, std::uint64_t at_ms) {
  reg.apply(c, at_ms);
  return reg;
}

// ---- evaluation -------------------------------------------------------------

struct AccessDecision {
  bool permit = false;
  std::optional<std::string> matched_policy;
  bool consent_checked = false;
  std::vector<std::string> trace;

  bool operator==(const AccessDecision&) const = default;
};

inline std::vector<const Policy*> evaluation_order(const std::vector<Policy>& policies) {
  std::vector<const Policy*> order;
  order.reserve(policies.size());
  for (const auto& p : policies) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const Policy* a, const Policy* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    return a->id < b->id;
  });
  return order;
}

/// Deny-overrides over (priority desc, id asc). A matching deny ends
/// evaluation. The first matching permit whose consent requirement holds is
/// kept while later policies are still scanned for denies.
inline AccessDecision eval_access(const std::vector<Policy>& policies, const Principal& principal,
                                  const Attributes& resource, Action action, const ConsentRegistry& consent) {
  const auto subject = principal.subject();
  AccessDecision d;
  std::optional<std::string> permit_by;
  for (const Policy* p : evaluation_order(policies)) {
    p->check();
    d.trace.push_back(p->id);
    if (p->action != action || !p->subject.matches(subject) || !p->resource.matches(resource)) continue;
    if (p->effect == Effect::deny) {
      d.permit = false;
      d.matched_policy = p->id;
      return d;
    }
    if (permit_by) continue;
    if (p->requires_consent) {
      d.consent_checked = true;
      if (!consent.consent_satisfied(principal, resource)) continue;
    }
    permit_by = p->id;
  }
  d.permit = permit_by.has_value();
  d.matched_policy = permit_by;
  return d;
}

inline Attributes resource_for(const Principal& patient, std::string kind) {
  Attributes r{{"kind", std::move(kind)}, {"patient", patient.id}};
  for (const char* k : {"ward", "org"}) {
    auto it = patient.attributes.find(k);
    if (it != patient.attributes.end()) r[k] = it->second;
  }
  return r;
}

inline std::string resource_label(const Attributes& r) {
  auto kind = r.find("kind");
  auto pid = r.find("patient");
  return (kind == r.end() ? std::string("?") : kind->second) + ":" + (pid == r.end() ? std::string("*") : pid->second);
}

// ---- decision log and audit --------------------------------------------------

struct DecisionEntry {
  std::uint64_t seq = 0;
  double t_ms = 0;
  std::string principal;
  Attributes resource;
  Action action = Action::read;
  bool permit = false;
  std::optional<std::string> matched_policy;
};

struct ConsentEvent {
  std::uint64_t seq = 0;
  double t_ms = 0;
  ConsentChange change;
};

/// Commit-ordered record of access decisions and the consent changes that
/// were applied between them.
class DecisionLog {
 public:
  void record(double t_ms, const Principal& p, const Attributes& resource, Action action, const AccessDecision& d) {
    decisions_.push_back(DecisionEntry{seq_++, t_ms, p.id, resource, action, d.permit, d.matched_policy});
  }

  void record_consent(double t_ms, const ConsentChange& c) { consent_.push_back(ConsentEvent{seq_++, t_ms, c}); }

  const std::vector<DecisionEntry>& decisions() const { return decisions_; }
  const std::vector<ConsentEvent>& consent_events() const { return consent_; }

  std::size_t permits() const {
    return static_cast<std::size_t>(std::count_if(decisions_.begin(), decisions_.end(), [](auto& e) { return e.permit; }));
  }
  std::size_t denies() const { return decisions_.size() - permits(); }

  std::string to_csv() const {
    std::ostringstream os;
    os << "t_ms,principal,resource,action,permit,matched_policy\n";
    os.precision(17);
    for (const auto& e : decisions_)
      os << e.t_ms << ',' << e.principal << ',' << resource_label(e.resource) << ',' << to_string(e.action) << ','
         << (e.permit ? "true" : "false") << ',' << e.matched_policy.value_or("none") << '\n';
    return os.str();
  }

 private:
  std::uint64_t seq_ = 0;
  std::vector<DecisionEntry> decisions_;
  std::vector<ConsentEvent> consent_;
};

struct AuditFinding {
  std::uint64_t seq = 0;
  std::string principal;
  std::string resource;
  std::string reason;
};

struct AuditReport {
  std::vector<AuditFinding> violations;  // permits the policy set does not allow
  std::vector<AuditFinding> mismatches;  // denies the policy set would have allowed
  std::size_t checked = 0;
};

/// Brute-force re-check of a decision log. Replays consent events with its
/// own bookkeeping and, for every decision, enumerates all policies without
/// any ordering: a permit is legitimate iff no deny policy matches and some
/// permit policy matches whose consent requirement holds.
inline AuditReport audit_decisions(const DecisionLog& log, const std::vector<Policy>& policies,
                                   const std::map<std::string, Principal>& principals) {
  struct Grant {
    std::string patient;
    Grantee who;
    std::set<std::string> scope;
    bool live = true;
  };
  std::vector<Grant> grants;

  auto attr_ok = [](const Predicate& pred, const Attributes& attrs) {
    for (const auto& [k, vs] : pred.clauses) {
      bool hit = false;
      for (const auto& [ak, av] : attrs)
        if (ak == k && vs.count(av)) hit = true;
      if (!hit) return false;
    }
    return true;
  };
  auto consent_ok = [&](const Principal& p, const Attributes& res) {
    const auto subject = p.subject();
    for (const auto& g : grants) {
      if (!g.live || res.count("patient") == 0 || res.at("patient") != g.patient) continue;
      if (res.count("kind") == 0 || g.scope.count(res.at("kind")) == 0) continue;
      const bool who = std::holds_alternative<std::string>(g.who) ? std::get<std::string>(g.who) == p.id
                                                                  : attr_ok(std::get<Predicate>(g.who), subject);
      if (who) return true;
    }
    return false;
  };

  AuditReport rep;
  const auto& ds = log.decisions();
  const auto& cs = log.consent_events();
  std::size_t ci = 0;
  for (const auto& e : ds) {
    for (; ci < cs.size() && cs[ci].seq < e.seq; ++ci) {
      const auto& c = cs[ci].change;
      if (c.op == ConsentOp::grant) {
        grants.push_back(Grant{c.patient_id, c.grantee, c.scope});
      } else {
        for (auto& g : grants)
          if (g.patient == c.patient_id && g.who == c.grantee) g.live = false;
      }
    }
    ++rep.checked;
    auto pit = principals.find(e.principal);
    Principal p = pit == principals.end() ? Principal{e.principal, {}} : pit->second;
    const auto subject = p.subject();
    bool denied = false;
    bool allowed = false;
    for (const auto& pol : policies) {
      if (pol.action != e.action || !attr_ok(pol.subject, subject) || !attr_ok(pol.resource, e.resource)) continue;
      if (pol.effect == Effect::deny) denied = true;
      else if (!pol.requires_consent || consent_ok(p, e.resource)) allowed = true;
    }
    const bool legit = allowed && !denied;
    AuditFinding f{e.seq, e.principal, resource_label(e.resource), {}};
    if (e.permit && !legit) {
      f.reason = denied ? "permit despite matching deny" : "permit without satisfied permit policy";
      rep.violations.push_back(f);
    } else if (!e.permit && legit) {
      f.reason = "deny although a permit policy applies";
      rep.mismatches.push_back(f);
    }
  }
  return rep;
}

// ---- alert notifications ------------------------------------------------------

struct Subscription {
  std::string principal_id;
  std::set<std::string> patients;  // empty means every patient
};

struct Notification {
  std::string provider_id;
  std::string patient_id;
  std::uint64_t alert_created_ms = 0;

  bool operator==(const Notification&) const = default;
};

/// One notification per subscribed provider allowed to read the patient's
/// alert, ordered by provider id. Every evaluation is appended to `log`.
inline std::vector<Notification> on_alert(const std::string& patient_id, std::uint64_t alert_created_ms,
                                          const std::vector<Subscription>& subscriptions,
                                          const std::vector<Policy>& policies,
                                          const std::map<std::string, Principal>& principals,
                                          const ConsentRegistry& consent, double t_ms, DecisionLog* log = nullptr) {
  std::set<std::string> subscribers;
  for (const auto& s : subscriptions)
    if (s.patients.empty() || s.patients.contains(patient_id)) subscribers.insert(s.principal_id);

  auto pat = principals.find(patient_id);
  const auto resource =
      pat == principals.end() ? Attributes{{"kind", "alert"}, {"patient", patient_id}} : resource_for(pat->second, "alert");
  std::vector<Notification> out;
  for (const auto& id : subscribers) {
    auto it = principals.find(id);
    if (it == principals.end()) continue;
    auto d = eval_access(policies, it->second, resource, Action::read, consent);
    if (log) log->record(t_ms, it->second, resource, Action::read, d);
    if (d.permit) out.push_back(Notification{id, patient_id, alert_created_ms});
  }
  return out;
}

// ---- JSON loading -----------------------------------------------------------

inline Predicate predicate_from_json(const nlohmann::json& j, const std::set<std::string>& declared,
                                     std::string_view what) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw ConfigError(std::string(what) + " predicate must be an object");
  Predicate p;
  for (const auto& [k, v] : j.items()) {
    auto& vs = p.clauses[k];
    if (v.is_string()) {
      vs.insert(v.get<std::string>());
    } else if (v.is_array()) {
      for (const auto& x : v) {
        if (!x.is_string()) throw ConfigError(std::string(what) + " predicate values must be strings");
        vs.insert(x.get<std::string>());
      }
    } else {
      throw ConfigError(std::string(what) + " predicate on '" + k + "' must be a string or array");
    }
  }
  p.check(declared, what);
  return p;
}

inline nlohmann::json predicate_to_json(const Predicate& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, vs] : p.clauses) {
    if (vs.size() == 1) j[k] = *vs.begin();
    else j[k] = std::vector<std::string>(vs.begin(), vs.end());
  }
  return j;
}

/// Consent is required by default for reads of patient records and alerts,
/// and not for aggregate access.
inline bool default_requires_consent(const Policy& p) {
  if (p.action != Action::read) return false;
  auto it = p.resource.clauses.find("kind");
  if (it == p.resource.clauses.end()) return true;
  return it->second.contains("record") || it->second.contains("alert");
}

inline Policy policy_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("policy must be an object");
  Policy p;
  try {
    p.id = j.at("id").get<std::string>();
    p.priority = j.value("priority", 0);
    p.subject = predicate_from_json(j.value("subject", nlohmann::json()), subject_keys(), "subject");
    p.resource = predicate_from_json(j.value("resource", nlohmann::json()), resource_keys(), "resource");
    p.action = action_from(j.at("action").get<std::string>());
    const auto effect = j.at("effect").get<std::string>();
    if (effect != "permit" && effect != "deny") throw ConfigError("unknown effect '" + effect + "'");
    p.effect = effect == "permit" ? Effect::permit : Effect::deny;
    p.requires_consent = j.contains("requires_consent") ? j.at("requires_consent").get<bool>() : default_requires_consent(p);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed policy: ") + e.what());
  }
  p.check();
  return p;
}

inline nlohmann::json to_json(const Policy& p) {
  return {{"id", p.id},
          {"priority", p.priority},
          {"subject", predicate_to_json(p.subject)},
          {"resource", predicate_to_json(p.resource)},
          {"action", to_string(p.action)},
          {"effect", p.effect == Effect::permit ? "permit" : "deny"},
          {"requires_consent", p.requires_consent}};
}

inline std::vector<Policy> policies_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw ConfigError("policies must be an array");
  std::vector<Policy> out;
  std::set<std::string> ids;
  for (const auto& j : arr) {
    out.push_back(policy_from_json(j));
    if (!ids.insert(out.back().id).second) throw ConfigError("duplicate policy id '" + out.back().id + "'");
  }
  return out;
}

inline std::vector<Subscription> subscriptions_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw ConfigError("subscriptions must be an array");
  std::vector<Subscription> out;
  for (const auto& j : arr) {
    Subscription s;
    try {
      s.principal_id = j.at("principal").get<std::string>();
      if (j.contains("patients"))
        for (const auto& p : j.at("patients")) s.patients.insert(p.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed subscription: ") + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hiot::contracts
