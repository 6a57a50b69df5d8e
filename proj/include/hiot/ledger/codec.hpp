#pragma once

#include <nlohmann/json.hpp>

#include "hiot/ledger/chain.hpp"

namespace hiot::ledger {

inline constexpr std::string_view kChainMagic = "HIOTCHN1";

/// magic || u64 block count || var(block bytes) per block.
inline Bytes export_chain(const std::vector<Block>& blocks, const crypto::GroupParams& gp) {
  ByteWriter w;
  w.raw(to_bytes(kChainMagic)).u64(blocks.size());
  for (const auto& b : blocks) w.var(b.encode(gp));
  return std::move(w).bytes();
}

inline Bytes export_chain(const Chain& chain) { return export_chain(chain.blocks(), chain.group()); }

struct ImportResult {
  std::vector<Block> blocks;
  /// Index of the first block that could not be parsed; blocks holds the
  /// ones before it.
  std::optional<std::size_t> parse_failure;
};

/// Throws DecodeError only when the file header itself is unreadable.
inline ImportResult import_chain(ByteView data) {
  ByteReader r(data);
  auto magic = r.raw(kChainMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kChainMagic.begin())) throw DecodeError("not a chain export");
  const auto count = r.u64();
  ImportResult out;
  std::optional<crypto::GroupParams> gp;
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      auto raw = r.var();
      auto b = Block::decode(raw, gp ? &*gp : nullptr);
      if (i == 0) gp = GenesisConfig::decode(b.genesis_config).group;
      out.blocks.push_back(std::move(b));
    } catch (const DecodeError&) {
      out.parse_failure = i;
      return out;
    }
  }
  if (!r.done()) out.parse_failure = count;
  return out;
}

/// Verification of an exported file: the earlier of the first unparsable
/// block and the first block failing validation.
inline VerifyResult verify_export(ByteView data) {
  auto imp = import_chain(data);
  auto v = verify_chain(imp.blocks);
  if (imp.parse_failure && (v.ok || *imp.parse_failure <= v.first_invalid))
    return {false, *imp.parse_failure, Rule::index};
  return v;
}

inline nlohmann::json to_json(const Transaction& tx, const crypto::GroupParams& gp) {
  return {{"id", tx.id(gp).hex()},
          {"kind", to_string(tx.kind)},
          {"sender", tx.sender},
          {"created_ms", tx.created_ms},
          {"payload_digest", tx.payload_digest.hex()},
          {"payload_size", tx.payload.size()}};
}

inline nlohmann::json to_json(const Block& b, const crypto::GroupParams& gp) {
  nlohmann::json j{{"index", b.header.index},
                   {"hash", b.header.hash(gp).hex()},
                   {"prev_hash", b.header.prev_hash.hex()},
                   {"tx_root", b.header.tx_root.hex()},
                   {"timestamp_ms", b.header.timestamp_ms},
                   {"sealer_id", b.header.sealer_id}};
  if (const auto* pow = std::get_if<PowSeal>(&b.header.seal)) {
    j["seal"] = {{"type", "pow"}, {"nonce", pow->nonce}, {"difficulty", pow->difficulty}};
  } else if (std::holds_alternative<PoaSeal>(b.header.seal)) {
    j["seal"] = {{"type", "poa"}};
  } else {
    j["seal"] = {{"type", "genesis"}};
  }
  auto& txs = j["txs"] = nlohmann::json::array();
  for (const auto& tx : b.txs) txs.push_back(to_json(tx, gp));
  return j;
}

/// Human-readable dump; not an import format.
inline nlohmann::json dump_json(const std::vector<Block>& blocks, const crypto::GroupParams& gp) {
  auto arr = nlohmann::json::array();
  for (const auto& b : blocks) arr.push_back(to_json(b, gp));
  return {{"height", blocks.empty() ? 0 : blocks.size() - 1}, {"blocks", std::move(arr)}};
}

}  // namespace hiot::ledger
