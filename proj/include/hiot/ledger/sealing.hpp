#pragma once

#include "hiot/ledger/pool.hpp"
#include "hiot/util/rng.hpp"

namespace hiot::ledger {

class WrongLeader : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The next block's index is the round. An empty pool yields an empty block.
inline Block poa_seal(const Chain& chain, TxPool& pool, std::string_view sealer_id, const crypto::KeyPair& key,
                      std::uint64_t timestamp_ms, std::size_t max_tx = kDefaultBlockCapacity) {
  if (chain.config().consensus != Consensus::poa) throw std::invalid_argument("chain is not PoA");
  const auto round = chain.next_index();
  if (chain.expected_leader(round) != sealer_id)
    throw WrongLeader(std::string(sealer_id) + " is not the leader for round " + std::to_string(round));
  Block b;
  b.txs = pool.drain(max_tx);
  b.header.index = round;
  b.header.prev_hash = chain.tip_hash();
  b.header.tx_root = crypto::merkle_root(b.tx_ids(chain.group()));
  b.header.timestamp_ms = std::max(timestamp_ms, chain.tip().header.timestamp_ms + 1);
  b.header.sealer_id = std::string(sealer_id);
  b.header.seal = PoaSeal{};
  std::get<PoaSeal>(b.header.seal).signature = crypto::schnorr_sign(chain.group(), key, b.header.unsealed_bytes());
  return b;
}

/// Header fields other than the seal.
struct PowTemplate {
  std::uint64_t index = 1;
  Digest prev_hash;
  std::uint64_t timestamp_ms = 1;
  std::string sealer_id = "miner";

  static PowTemplate next_for(const Chain& chain, std::string sealer_id, std::uint64_t timestamp_ms) {
    return PowTemplate{chain.next_index(), chain.tip_hash(),
                       std::max(timestamp_ms, chain.tip().header.timestamp_ms + 1), std::move(sealer_id)};
  }
};

struct PowResult {
  Block block;
  std::uint64_t attempts = 0;
};

/// Searches nonces upward from a seed-derived start until the header hash
/// meets the target. Deterministic in (txs, difficulty, seed, template).
inline PowResult pow_seal(const std::vector<Transaction>& txs, std::uint64_t difficulty, std::uint64_t seed,
                          const crypto::GroupParams& gp, const PowTemplate& tpl = {}) {
  if (difficulty < 1) throw std::invalid_argument("difficulty must be >= 1");
  PowResult out;
  auto& h = out.block.header;
  out.block.txs = txs;
  h.index = tpl.index;
  h.prev_hash = tpl.prev_hash;
  h.tx_root = crypto::merkle_root(out.block.tx_ids(gp));
  h.timestamp_ms = tpl.timestamp_ms;
  h.sealer_id = tpl.sealer_id;
  h.seal = PowSeal{0, difficulty};

  Bytes buf = h.encode(gp);
  const std::size_t nonce_at = buf.size() - 16;
  std::uint64_t nonce = Rng(seed).next_u64();
  for (;;) {
    for (int i = 0; i < 8; ++i) buf[nonce_at + i] = static_cast<std::uint8_t>(nonce >> (56 - 8 * i));
    ++out.attempts;
    if (meets_target(crypto::hash(buf), difficulty)) break;
    ++nonce;
  }
  std::get<PowSeal>(h.seal).nonce = nonce;
  return out;
}

}  // namespace hiot::ledger
