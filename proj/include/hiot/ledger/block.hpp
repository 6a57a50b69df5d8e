#pragma once

#include <variant>
#include <vector>

#include "hiot/ledger/transaction.hpp"

namespace hiot::ledger {

struct PoaSeal {
  crypto::Signature signature;
  bool operator==(const PoaSeal&) const = default;
};

struct PowSeal {
  std::uint64_t nonce = 0;
  std::uint64_t difficulty = 1;
  bool operator==(const PowSeal&) const = default;
};

/// monostate marks the unsealed genesis header.
using Seal = std::variant<std::monostate, PoaSeal, PowSeal>;

inline std::uint8_t seal_tag(const Seal& s) { return static_cast<std::uint8_t>(s.index()); }

struct BlockHeader {
  std::uint64_t index = 0;
  Digest prev_hash;
  Digest tx_root;
  std::uint64_t timestamp_ms = 0;
  std::string sealer_id;
  Seal seal;

  /// index u64 || prev_hash || tx_root || timestamp u64 || sealer_id || seal tag u8.
  /// This prefix is what a PoA leader signs.
  Bytes unsealed_bytes() const {
    return ByteWriter()
        .u64(index)
        .raw(prev_hash.view())
        .raw(tx_root.view())
        .u64(timestamp_ms)
        .str(sealer_id)
        .u8(seal_tag(seal))
        .bytes();
  }

  Bytes encode(const crypto::GroupParams& gp) const {
    ByteWriter w;
    w.raw(unsealed_bytes());
    if (const auto* poa = std::get_if<PoaSeal>(&seal)) {
      w.var(poa->signature.encode(gp));
    } else if (const auto* pow = std::get_if<PowSeal>(&seal)) {
      w.u64(pow->nonce).u64(pow->difficulty);
    }
    return std::move(w).bytes();
  }

  Digest hash(const crypto::GroupParams& gp) const { return crypto::hash(encode(gp)); }

  /// Genesis headers are decodable without group parameters.
  static BlockHeader decode(ByteReader& r, const crypto::GroupParams* gp) {
    BlockHeader h;
    h.index = r.u64();
    h.prev_hash = Digest::from_view(r.raw(32));
    h.tx_root = Digest::from_view(r.raw(32));
    h.timestamp_ms = r.u64();
    h.sealer_id = r.str();
    switch (r.u8()) {
      case 0: h.seal = std::monostate{}; break;
      case 1: {
        if (!gp) throw DecodeError("PoA seal needs group parameters");
        auto sig = r.var(4096);
        h.seal = PoaSeal{crypto::Signature::decode(*gp, sig)};
        break;
      }
      case 2: {
        PowSeal p;
        p.nonce = r.u64();
        p.difficulty = r.u64();
        h.seal = p;
        break;
      }
      default: throw DecodeError("unknown seal tag");
    }
    return h;
  }

  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;
  Bytes genesis_config;  // only for index 0

  bool is_genesis() const { return header.index == 0; }

  std::vector<Digest> tx_ids(const crypto::GroupParams& gp) const {
    std::vector<Digest> ids;
    ids.reserve(txs.size());
    for (const auto& tx : txs) ids.push_back(tx.id(gp));
    return ids;
  }

  /// header || (genesis: config) | (u32 count || tx...)
  Bytes encode(const crypto::GroupParams& gp) const {
    ByteWriter w;
    w.raw(header.encode(gp));
    if (is_genesis()) {
      w.var(genesis_config);
    } else {
      w.u32(static_cast<std::uint32_t>(txs.size()));
      for (const auto& tx : txs) w.var(tx.encode(gp));
    }
    return std::move(w).bytes();
  }

  static Block decode(ByteView b, const crypto::GroupParams* gp) {
    ByteReader r(b);
    Block blk;
    blk.header = BlockHeader::decode(r, gp);
    if (blk.is_genesis()) {
      blk.genesis_config = r.var();
    } else {
      if (!gp) throw DecodeError("block body needs group parameters");
      const auto n = r.u32();
      if (n > 1u << 20) throw DecodeError("implausible transaction count");
      blk.txs.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        auto raw = r.var();
        blk.txs.push_back(Transaction::decode(*gp, raw));
      }
    }
    r.expect_done();
    return blk;
  }

  std::size_t wire_size(const crypto::GroupParams& gp) const {
    std::size_t n = header.encode(gp).size() + 4;
    for (const auto& tx : txs) n += 4 + tx.wire_size(gp);
    return n + genesis_config.size();
  }

  bool operator==(const Block&) const = default;
};

}  // namespace hiot::ledger
