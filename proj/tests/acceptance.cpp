// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit on any
// failure. Uses the shipped configs under configs/.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>

#include "hiot/bench/attack.hpp"
#include "hiot/bench/compare.hpp"
#include "hiot/crypto/channel.hpp"
#include "hiot/ledger/codec.hpp"
#include "hiot/ledger/sealing.hpp"
#include "support/cli.hpp"
#include "support/policy_truth_table.hpp"

using namespace hiot;
using namespace hiot::bench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (cond) return;
    if (pass) detail = what;
    pass = false;
  }
};

ScenarioConfig shipped(const std::string& name) {
  return load_config(hiot::testing::read_text(fs::path(HIOT_SOURCE_DIR) / "configs" / (name + ".json")));
}

bool within(double v, double target, double tol) { return std::fabs(v - target) <= tol * target; }

std::string f3(double v) { return fmt(v, 3); }

Outcome headline() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cmp = compare({shipped("proposed"), shipped("cloud"), shipped("pow_chain")});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& p = cmp.rows[0];
  const auto& c = cmp.rows[1];
  const auto& w = cmp.rows[2];
  o.require(cmp.ok(), "invariant failure in a compared scenario");
  o.require(within(p.report.alert_latency.mean, 120, 0.15), "proposed latency " + f3(p.report.alert_latency.mean));
  o.require(within(c.report.alert_latency.mean, 200, 0.15), "cloud latency " + f3(c.report.alert_latency.mean));
  o.require(within(w.report.alert_latency.mean, 600, 0.20), "PoW latency " + f3(w.report.alert_latency.mean));
  o.require(p.probe.sustained_tps >= 120, "proposed TPS " + f3(p.probe.sustained_tps));
  o.require(within(c.probe.sustained_tps, 50, 0.10), "cloud TPS " + f3(c.probe.sustained_tps));
  o.require(w.probe.sustained_tps <= 15, "PoW TPS " + f3(w.probe.sustained_tps));
  o.require(p.energy_ratio <= 0.70, "energy ratio " + f3(p.energy_ratio));
  o.require(p.latency_reduction_pct >= 40, "latency reduction " + f3(p.latency_reduction_pct));
  o.require(secs < 120, "took " + f3(secs) + " s");
  if (o.pass)
    o.detail = "latency " + f3(p.report.alert_latency.mean) + "/" + f3(c.report.alert_latency.mean) + "/" +
               f3(w.report.alert_latency.mean) + " ms, TPS " + f3(p.probe.sustained_tps) + "/" +
               f3(c.probe.sustained_tps) + "/" + f3(w.probe.sustained_tps) + ", energy ratio " + f3(p.energy_ratio) +
               ", reduction " + f3(p.latency_reduction_pct) + "%, " + f3(secs) + " s";
  return o;
}

Outcome ordering_grid() {
  Outcome o;
  const std::vector<double> wan_scales{0.8, 1.2, 1.6};
  struct Costs {
    double cpu, lan, wan, hash;
  };
  const std::vector<Costs> energy_sets{{0.01, 0.1, 0.5, 0.001}, {0.005, 0.05, 0.8, 0.002}, {0.02, 0.2, 0.3, 0.004}};
  const std::vector<std::uint64_t> difficulties{3072, 3840, 4608};

  auto apply = [](ScenarioConfig c, double scale, const Costs& e) {
    for (auto& l : c.net.links)
      if (l.cls == netsim::LinkClass::wan) l.base_ms *= scale;
    c.energy.cpu_j_per_ms = e.cpu;
    c.energy.lan_j_per_kb = e.lan;
    c.energy.wan_j_per_kb = e.wan;
    c.energy.hash_j = e.hash;
    return c;
  };

  std::size_t cells = 0;
  for (double s : wan_scales) {
    for (const auto& e : energy_sets) {
      const auto prop = run_scenario(apply(shipped("proposed"), s, e));
      const auto cloud = run_scenario(apply(shipped("cloud"), s, e));
      for (auto d : difficulties) {
        auto pc = apply(shipped("pow_chain"), s, e);
        pc.pow.difficulty = d;
        const auto pow = run_scenario(pc);
        const std::string cell = "wan x" + fmt(s, 1) + " hash " + fmt(e.hash, 4) + " difficulty " + std::to_string(d);
        o.require(prop.ok() && cloud.ok() && pow.ok(), cell + ": invariant failure");
        o.require(prop.alert_latency.mean < cloud.alert_latency.mean, cell + ": proposed not below cloud");
        o.require(cloud.alert_latency.mean < pow.alert_latency.mean, cell + ": cloud not below PoW");
        o.require(prop.energy_total < pow.energy_total, cell + ": PoA energy not below PoW");
        ++cells;
      }
    }
  }
  if (o.pass) o.detail = std::to_string(cells) + " cells ordered";
  return o;
}

Outcome tamper_detection() {
  using namespace ledger;
  Outcome o;
  const auto& gp = crypto::GroupParams::standard();
  GenesisConfig cfg;
  cfg.group = gp;
  cfg.validators = {"v0", "v1", "v2", "v3"};
  std::map<std::string, crypto::KeyPair> keys;
  for (const auto* id : {"v0", "v1", "v2", "v3", "alice", "bob"}) {
    keys[id] = crypto::KeyPair::derive(gp, id, 1);
    cfg.registry[id] = keys[id].pub;
  }
  Chain chain(cfg);
  TxPool pool(chain);
  for (std::uint64_t i = 1; i <= 200; ++i) {
    for (const auto* who : {"alice", "bob"})
      pool.submit(make_transaction(gp, TxKind::record_write, to_bytes("rec-" + std::to_string(i)), who, keys.at(who),
                                   10 * i + (who[0] == 'b')));
    const auto& leader = chain.expected_leader(chain.next_index());
    if (chain.append(poa_seal(chain, pool, leader, keys.at(leader), 100 * i)) != Rule::ok) {
      o.require(false, "honest block " + std::to_string(i) + " rejected");
      return o;
    }
  }
  const auto bytes = export_chain(chain);
  o.require(verify_export(bytes).ok, "clean chain flagged");

  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t at = kChainMagic.size() + 8;
  for (const auto& b : chain.blocks()) {
    const auto n = 4 + b.encode(gp).size();
    spans.emplace_back(at, at + n);
    at += n;
  }
  Rng rng(2024);
  std::size_t caught = 0;
  const std::size_t trials = 1200;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto k = 1 + rng.below(spans.size() - 1);  // any block after genesis
    const auto [lo, hi] = spans[k];
    auto mutated = bytes;
    mutated[lo + rng.below(hi - lo)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    const auto v = verify_export(mutated);
    if (!v.ok && v.first_invalid == k) ++caught;
  }
  o.require(caught == trials, std::to_string(trials - caught) + " mutations missed or misattributed");
  if (o.pass) o.detail = std::to_string(caught) + "/" + std::to_string(trials) + " mutations caught at the right block";
  return o;
}

Outcome crypto_primitives() {
  using namespace crypto;
  Outcome o;
  std::size_t pairs = 0;
  for (std::size_t bits : {512u, 1024u}) {
    const auto key = paillier_keygen(bits, bits + 1);
    Drbg rng("acceptance", bits);
    for (int i = 0; i < 1000; ++i, ++pairs) {
      const BigInt a = rng.below(key.pub.n), b = rng.below(key.pub.n), k = rng.below(1 << 20);
      const auto ca = paillier_enc(key.pub, a, rng), cb = paillier_enc(key.pub, b, rng);
      o.require(paillier_dec(key, paillier_add(key.pub, ca, cb)) == (a + b) % key.pub.n, "Paillier add");
      o.require(paillier_dec(key, paillier_smul(key.pub, ca, k)) == (a * k) % key.pub.n, "Paillier scalar");
    }
  }

  const auto& gp = GroupParams::standard();
  std::size_t forged_accepted = 0, honest_rejected = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto kp = KeyPair::generate(gp, i);
    const auto ctx = ByteWriter().str("session").u64(i).bytes();
    const auto tr = schnorr_prove(gp, kp, ctx, i);
    if (!schnorr_verify(gp, kp.pub, tr, ByteView(ctx))) ++honest_rejected;
    auto forged = tr;
    forged.s = (tr.s + 1 + i) % gp.q;
    if (schnorr_verify(gp, kp.pub, forged, ByteView(ctx))) ++forged_accepted;
  }
  o.require(honest_rejected == 0, std::to_string(honest_rejected) + " honest proofs rejected");
  o.require(forged_accepted == 0, std::to_string(forged_accepted) + " forged proofs accepted");

  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto a = KeyPair::generate(gp, 50000 + 2 * i), b = KeyPair::generate(gp, 50001 + 2 * i);
    o.require(dh_derive(gp, a.secret, b.pub) == dh_derive(gp, b.secret, a.pub), "DH disagreement");
  }

  const auto key = hash(std::string_view("acceptance-channel"));
  Bytes pt(128);
  for (std::size_t i = 0; i < pt.size(); ++i) pt[i] = static_cast<std::uint8_t>(i * 13);
  const auto frame = seal(key, pt, 11);
  o.require(open(key, frame) == pt, "seal round trip");
  std::size_t undetected = 0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    auto bad = frame;
    bad[i] ^= 0x01;
    try {
      open(key, bad);
      ++undetected;
    } catch (const std::exception&) {
    }
  }
  o.require(undetected == 0, std::to_string(undetected) + " sealed-frame flips undetected");
  if (o.pass)
    o.detail = std::to_string(pairs) + " Paillier pairs, 10000 Schnorr trials, 200 DH pairs, " +
               std::to_string(frame.size()) + " frame flips";
  return o;
}

Outcome federated_math() {
  using namespace fl;
  Outcome o;
  Rng rng(31);
  double worst_avg = 0, worst_grad = 0, worst_secure = 0;
  const auto key = crypto::paillier_keygen(512, 5);
  crypto::Drbg enc_rng("acceptance-fl", 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ModelUpdate> ups;
    std::vector<EncryptedUpdate> enc;
    std::size_t total = 0;
    Weights sum{};
    for (int i = 0; i < 4; ++i) {
      ModelUpdate u;
      u.node_id = "h" + std::to_string(i);
      u.sample_count = 1 + rng.below(40);
      for (auto& v : u.delta) v = rng.normal(0, 0.5);
      for (std::size_t j = 0; j < kWeights; ++j) sum[j] += u.delta[j] * static_cast<double>(u.sample_count);
      total += u.sample_count;
      ups.push_back(u);
      enc.push_back(encrypt_update(key.pub, u, enc_rng));
    }
    const auto avg = fed_avg(ups, GlobalModel{});
    const auto secure = secure_aggregate(key, enc);
    for (std::size_t j = 0; j < kWeights; ++j) {
      worst_avg = std::max(worst_avg, std::fabs(avg.weights[j] - sum[j] / static_cast<double>(total)));
      worst_secure = std::max(worst_secure, std::fabs(secure[j] - avg.weights[j]));
    }

    std::vector<LabeledRow> rows(30);
    for (auto& r : rows) {
      for (auto& x : r.x) x = rng.normal();
      r.y = static_cast<int>(rng.below(2));
    }
    Weights w;
    for (auto& v : w) v = rng.normal(0, 1.5);
    const auto g = gradient(w, rows);
    for (std::size_t j = 0; j < kWeights; ++j) {
      auto hi = w, lo = w;
      hi[j] += 1e-6;
      lo[j] -= 1e-6;
      worst_grad = std::max(worst_grad, std::fabs(g[j] - (objective(hi, rows) - objective(lo, rows)) / 2e-6));
    }
  }
  o.require(worst_avg <= 1e-9, "fed_avg error " + std::to_string(worst_avg));
  o.require(worst_grad <= 1e-5, "gradient error " + std::to_string(worst_grad));
  o.require(worst_secure <= 1e-6, "secure aggregation error " + std::to_string(worst_secure));
  if (o.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "max errors: fed_avg %.2e, gradient %.2e, secure %.2e", worst_avg, worst_grad,
                  worst_secure);
    o.detail = buf;
  }
  return o;
}

Outcome privacy() {
  Outcome o;
  const auto dp = fl::DpParams::make(1.0, 1e-5, 1.0);
  std::vector<double> draws;
  for (std::uint64_t s = 0; draws.size() < 10000; ++s) {
    fl::ModelUpdate u;
    u.sample_count = 1;
    const auto noisy = fl::dp_noise(fl::clip(u, 1.0), dp, 777000 + s);
    draws.insert(draws.end(), noisy.delta.begin(), noisy.delta.end());
  }
  draws.resize(10000);
  const double sd = stats::stddev(draws);
  o.require(within(sd, 4.8448, 0.05), "noise sd " + f3(sd));

  const auto rep = attack_eval(shipped("attack"), parse_epsilon_grid("off,8,1,0.5"));
  o.require(rep.seeds >= 20, "too few seeds");
  o.require(rep.non_increasing(), "advantage rises along the grid");
  std::string means;
  for (const auto& p : rep.points) means += (means.empty() ? "" : " ") + epsilon_label(p.epsilon) + ":" + fmt(p.mean, 4);
  if (o.pass) o.detail = "sd " + f3(sd) + ", advantage " + means + " over " + std::to_string(rep.seeds) + " seeds";
  else o.detail += " (" + means + ")";
  return o;
}

Outcome access_control() {
  Outcome o;
  std::size_t decisions = 0;
  for (const auto* name : {"proposed", "cloud", "pow_chain"}) {
    const auto r = run_scenario(shipped(name));
    o.require(r.violations == 0, std::string(name) + ": " + std::to_string(r.violations) + " violations");
    o.require(r.mismatches == 0, std::string(name) + ": " + std::to_string(r.mismatches) + " mismatches");
    decisions += r.decisions;
  }
  const auto tt = hiot::testing::run_policy_truth_table();
  o.require(tt.mismatches == 0, "truth table: " + tt.first_mismatch);
  if (o.pass)
    o.detail = std::to_string(decisions) + " audited decisions, " + std::to_string(tt.cases) + " truth-table cases";
  return o;
}

Outcome determinism() {
  namespace t = hiot::testing;
  Outcome o;
  const auto dir = t::scratch_dir("acceptance");
  t::write_small_configs(dir);  // keeps the small targets.json for calibrate
  for (const auto* name : {"proposed", "cloud", "pow_chain", "attack"})
    t::write_text(dir / (std::string(name) + ".json"), t::shipped_json(name).dump(2));
  const auto chain = dir / "chain.bin";
  if (t::run_cli("run " + (dir / "proposed.json").string() + " --chain-out " + chain.string()).code != 0) {
    o.require(false, "could not export a chain");
  } else {
    std::size_t n = 0;
    for (const auto& c : t::cli_cases(dir, chain, 20)) {
      const auto r = t::check_deterministic(c.args, c.name);
      o.require(r.identical, c.name + ": " + r.detail);
      o.require(r.code == 0, c.name + ": exit " + std::to_string(r.code));
      ++n;
    }
    if (o.pass) o.detail = std::to_string(n) + " commands byte-identical across two runs";
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{headline,        ordering_grid, tamper_detection, crypto_primitives,
                                                       federated_math,  privacy,       access_control,   determinism};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
