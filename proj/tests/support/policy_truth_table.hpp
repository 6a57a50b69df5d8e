#pragma once

// Exhaustive check of eval_access against a direct restatement of the
// decision rule: every policy set of up to four policies drawn from a fixed
// pool, against every combination of three binary attributes and consent.

#include <string>
#include <vector>

#include "hiot/contracts.hpp"

namespace hiot::testing {

struct TruthTableResult {
  std::size_t policy_sets = 0;
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
};

inline std::vector<contracts::Policy> truth_table_pool() {
  using namespace contracts;
  struct Constraint {
    const char* name;
    Predicate subject;
    Predicate resource;
  };
  const std::vector<Constraint> constraints{
      {"any", {}, {}},
      {"doctor", Predicate{{{"role", {"doctor"}}}}, {}},
      {"wardA", Predicate{{{"ward", {"A"}}}}, {}},
      {"record", {}, Predicate{{{"kind", {"record"}}}}},
  };
  std::vector<Policy> pool;
  int n = 0;
  for (const auto& c : constraints) {
    for (bool consent : {false, true}) {
      Policy p;
      p.id = std::string("permit-") + c.name + (consent ? "-consent" : "");
      p.priority = (n++ * 7) % 5;
      p.subject = c.subject;
      p.resource = c.resource;
      p.requires_consent = consent;
      pool.push_back(p);
    }
    Policy d;
    d.id = std::string("deny-") + c.name;
    d.priority = (n++ * 7) % 5;
    d.subject = c.subject;
    d.resource = c.resource;
    d.effect = Effect::deny;
    pool.push_back(d);
  }
  return pool;
}

inline TruthTableResult run_policy_truth_table() {
  using namespace contracts;
  const auto pool = truth_table_pool();
  TruthTableResult res;

  std::vector<std::vector<Policy>> sets{{}};
  for (std::size_t a = 0; a < pool.size(); ++a) {
    sets.push_back({pool[a]});
    for (std::size_t b = a + 1; b < pool.size(); ++b) {
      sets.push_back({pool[a], pool[b]});
      for (std::size_t c = b + 1; c < pool.size(); ++c) {
        sets.push_back({pool[a], pool[b], pool[c]});
        for (std::size_t d = c + 1; d < pool.size(); ++d) sets.push_back({pool[a], pool[b], pool[c], pool[d]});
      }
    }
  }
  res.policy_sets = sets.size();

  auto matches = [](const Policy& p, const Principal& who, const Attributes& res) {
    auto subj = who.subject();
    for (const auto& [k, vs] : p.subject.clauses)
      if (!subj.count(k) || !vs.count(subj[k])) return false;
    for (const auto& [k, vs] : p.resource.clauses)
      if (!res.count(k) || !vs.count(res.at(k))) return false;
    return true;
  };

  for (const auto& policies : sets) {
    for (int bits = 0; bits < 16; ++bits) {
      const bool doctor = bits & 1, ward_a = bits & 2, record = bits & 4, consented = bits & 8;
      Principal who{"u1", {{"role", doctor ? "doctor" : "nurse"}, {"ward", ward_a ? "A" : "B"}}};
      Attributes resource{{"kind", record ? "record" : "alert"}, {"patient", "p00"}};
      ConsentRegistry consent;
      if (consented) consent.apply({ConsentOp::grant, "p00", std::string("u1"), {"record", "alert"}}, 1);

      bool any_deny = false;
      const Policy* best = nullptr;
      for (const auto& p : policies) {
        if (!matches(p, who, resource)) continue;
        if (p.effect == Effect::deny) {
          any_deny = true;
        } else if (!p.requires_consent || consented) {
          if (!best || p.priority > best->priority || (p.priority == best->priority && p.id < best->id)) best = &p;
        }
      }
      const bool expect = best && !any_deny;

      const auto d = eval_access(policies, who, resource, Action::read, consent);
      ++res.cases;
      const bool policy_ok = !expect || d.matched_policy == best->id;
      if (d.permit != expect || !policy_ok) {
        if (res.mismatches++ == 0) {
          res.first_mismatch = "bits=" + std::to_string(bits) + " policies=";
          for (const auto& p : policies) res.first_mismatch += p.id + ",";
        }
      }
    }
  }
  return res;
}

}  // namespace hiot::testing
