#pragma once

#include <map>
#include <optional>

#include "hiot/ledger/block.hpp"

namespace hiot::ledger {

enum class Consensus : std::uint8_t { poa = 1, pow = 2 };

inline const char* to_string(Consensus c) { return c == Consensus::poa ? "poa" : "pow"; }

/// Everything a verifier needs, committed in the genesis block.
struct GenesisConfig {
  Consensus consensus = Consensus::poa;
  std::uint64_t pow_min_difficulty = 1;
  crypto::GroupParams group;
  std::vector<std::string> validators;            // PoA rotation order
  std::map<std::string, crypto::BigInt> registry;  // principal id -> public key

  Bytes encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(consensus)).u64(pow_min_difficulty);
    w.var(crypto::to_fixed_bytes(group.p, crypto::byte_length(group.p)));
    w.var(crypto::to_fixed_bytes(group.q, crypto::byte_length(group.q)));
    w.var(crypto::to_fixed_bytes(group.g, crypto::byte_length(group.g)));
    w.u32(static_cast<std::uint32_t>(validators.size()));
    for (const auto& v : validators) w.str(v);
    w.u32(static_cast<std::uint32_t>(registry.size()));
    for (const auto& [id, y] : registry) w.str(id).var(group.encode_element(y));
    return std::move(w).bytes();
  }

  static GenesisConfig decode(ByteView b) {
    ByteReader r(b);
    GenesisConfig c;
    const auto tag = r.u8();
    if (tag != 1 && tag != 2) throw DecodeError("unknown consensus");
    c.consensus = static_cast<Consensus>(tag);
    c.pow_min_difficulty = r.u64();
    c.group.p = crypto::from_bytes(r.var(1024));
    c.group.q = crypto::from_bytes(r.var(1024));
    c.group.g = crypto::from_bytes(r.var(1024));
    const auto nv = r.u32();
    if (nv > r.remaining()) throw DecodeError("implausible validator count");
    for (std::uint32_t i = 0; i < nv; ++i) c.validators.push_back(r.str());
    const auto nr = r.u32();
    if (nr > r.remaining()) throw DecodeError("implausible registry size");
    for (std::uint32_t i = 0; i < nr; ++i) {
      auto id = r.str();
      c.registry[id] = crypto::from_bytes(r.var(1024));
    }
    r.expect_done();
    return c;
  }

  /// Structural checks; returns an empty string when usable.
  std::string problem() const {
    if (pow_min_difficulty < 1) return "pow_min_difficulty must be >= 1";
    if (group.p <= 3 || group.q <= 1 || (group.p - 1) % group.q != 0 || !group.contains(group.g))
      return "invalid group parameters";
    if (consensus == Consensus::poa && validators.empty()) return "PoA needs at least one validator";
    for (const auto& v : validators)
      if (!registry.contains(v)) return "validator " + v + " is not registered";
    for (const auto& [id, y] : registry)
      if (!group.contains(y)) return "public key of " + id + " is not a group element";
    return {};
  }

  bool operator==(const GenesisConfig&) const = default;
};

enum class Rule { ok, index, prev_hash, tx_root, tx_signature, seal, timestamp, genesis };

inline const char* to_string(Rule r) {
  switch (r) {
    case Rule::ok: return "ok";
    case Rule::index: return "index";
    case Rule::prev_hash: return "prev_hash";
    case Rule::tx_root: return "tx_root";
    case Rule::tx_signature: return "tx_signature";
    case Rule::seal: return "seal";
    case Rule::timestamp: return "timestamp";
    case Rule::genesis: return "genesis";
  }
  return "?";
}

inline std::size_t leader_index(std::uint64_t round, std::size_t validator_count) {
  if (validator_count == 0) throw std::invalid_argument("empty validator set");
  return static_cast<std::size_t>(round % validator_count);
}

/// hash < 2^256 / difficulty, evaluated exactly as hash * difficulty < 2^256.
inline bool meets_target(const Digest& h, std::uint64_t difficulty) {
  if (difficulty <= 1) return difficulty == 1;
  const crypto::BigInt v = crypto::from_bytes(h.view());
  return v * crypto::BigInt(std::to_string(difficulty)) < (crypto::BigInt(1) << 256);
}

inline Block make_genesis(const GenesisConfig& cfg, std::uint64_t timestamp_ms = 0) {
  Block g;
  g.genesis_config = cfg.encode();
  g.header.index = 0;
  g.header.tx_root = crypto::merkle_root({crypto::hash(g.genesis_config)});
  g.header.timestamp_ms = timestamp_ms;
  g.header.sealer_id = "genesis";
  return g;
}

inline Rule validate_genesis(const Block& g) {
  if (g.header.index != 0 || !g.header.prev_hash.is_zero() || !std::holds_alternative<std::monostate>(g.header.seal) ||
      !g.txs.empty())
    return Rule::genesis;
  if (g.header.tx_root != crypto::merkle_root({crypto::hash(g.genesis_config)})) return Rule::tx_root;
  try {
    if (!GenesisConfig::decode(g.genesis_config).problem().empty()) return Rule::genesis;
  } catch (const DecodeError&) {
    return Rule::genesis;
  }
  return Rule::ok;
}

/// Append-only chain anchored by a genesis block. The identity registry and
/// validator set are fixed at genesis.
class Chain {
 public:
  explicit Chain(const GenesisConfig& cfg, std::uint64_t genesis_ts = 0) : cfg_(cfg) {
    if (auto p = cfg_.problem(); !p.empty()) throw std::invalid_argument(p);
    blocks_.push_back(make_genesis(cfg_, genesis_ts));
    tip_hash_ = blocks_.back().header.hash(cfg_.group);
  }

  /// Rebuilds a chain from a genesis block. Throws if the genesis is invalid.
  static Chain from_genesis(const Block& genesis) {
    if (validate_genesis(genesis) != Rule::ok) throw std::invalid_argument("invalid genesis block");
    return Chain(GenesisConfig::decode(genesis.genesis_config), genesis.header.timestamp_ms);
  }

  const GenesisConfig& config() const { return cfg_; }
  const crypto::GroupParams& group() const { return cfg_.group; }
  const std::vector<std::string>& validators() const { return cfg_.validators; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& tip() const { return blocks_.back(); }
  const Digest& tip_hash() const { return tip_hash_; }
  std::uint64_t next_index() const { return blocks_.size(); }
  std::size_t tx_count() const { return tx_count_; }

  const crypto::BigInt* public_key(std::string_view id) const {
    auto it = cfg_.registry.find(std::string(id));
    return it == cfg_.registry.end() ? nullptr : &it->second;
  }
  bool is_registered(std::string_view id) const { return public_key(id) != nullptr; }

  const std::string& expected_leader(std::uint64_t round) const {
    return cfg_.validators.at(leader_index(round, cfg_.validators.size()));
  }

  /// True iff the sender is registered, the digest matches and the signature verifies.
  bool tx_valid(const Transaction& tx) const {
    const auto* y = public_key(tx.sender);
    if (!y) return false;
    if (crypto::hash(tx.payload) != tx.payload_digest) return false;
    return crypto::verify_sig(cfg_.group, *y, tx.signing_bytes(), tx.signature);
  }

  /// Checks `b` as the next block after the current tip; returns the first
  /// violated rule in fixed order.
  Rule validate(const Block& b) const {
    const auto& parent = blocks_.back().header;
    if (b.header.index != parent.index + 1) return Rule::index;
    if (b.header.prev_hash != tip_hash_) return Rule::prev_hash;
    if (!b.genesis_config.empty() || b.header.tx_root != crypto::merkle_root(b.tx_ids(cfg_.group)))
      return Rule::tx_root;
    for (const auto& tx : b.txs)
      if (!tx_valid(tx)) return Rule::tx_signature;
    if (!seal_valid(b.header)) return Rule::seal;
    if (b.header.timestamp_ms <= parent.timestamp_ms) return Rule::timestamp;
    return Rule::ok;
  }

  Rule append(Block b) {
    const auto r = validate(b);
    if (r != Rule::ok) return r;
    tx_count_ += b.txs.size();
    tip_hash_ = b.header.hash(cfg_.group);
    blocks_.push_back(std::move(b));
    return Rule::ok;
  }

  bool seal_valid(const BlockHeader& h) const {
    if (cfg_.consensus == Consensus::poa) {
      const auto* poa = std::get_if<PoaSeal>(&h.seal);
      if (!poa || h.sealer_id != expected_leader(h.index)) return false;
      const auto* y = public_key(h.sealer_id);
      return y && crypto::verify_sig(cfg_.group, *y, h.unsealed_bytes(), poa->signature);
    }
    const auto* pow = std::get_if<PowSeal>(&h.seal);
    if (!pow || pow->difficulty < cfg_.pow_min_difficulty) return false;
    return meets_target(h.hash(cfg_.group), pow->difficulty);
  }

 private:
  GenesisConfig cfg_;
  std::vector<Block> blocks_;
  Digest tip_hash_;
  std::size_t tx_count_ = 0;
};

struct VerifyResult {
  bool ok = true;
  std::size_t first_invalid = 0;
  Rule rule = Rule::ok;
};

/// Full replay from genesis.
inline VerifyResult verify_chain(const std::vector<Block>& blocks) {
  if (blocks.empty()) return {false, 0, Rule::genesis};
  if (auto r = validate_genesis(blocks.front()); r != Rule::ok) return {false, 0, r};
  Chain c = Chain::from_genesis(blocks.front());
  for (std::size_t i = 1; i < blocks.size(); ++i)
    if (auto r = c.append(blocks[i]); r != Rule::ok) return {false, i, r};
  return {};
}

inline VerifyResult verify_chain(const Chain& chain) { return verify_chain(chain.blocks()); }

/// Longer chain wins; equal lengths go to the lower tip header hash.
inline const std::vector<Block>& choose_fork(const std::vector<Block>& a, const std::vector<Block>& b,
                                             const crypto::GroupParams& gp) {
  if (a.size() != b.size()) return a.size() > b.size() ? a : b;
  if (a.empty()) return a;
  return b.back().header.hash(gp) < a.back().header.hash(gp) ? b : a;
}

}  // namespace hiot::ledger
