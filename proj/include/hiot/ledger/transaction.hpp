#pragma once

#include <string>

#include "hiot/crypto/schnorr.hpp"

namespace hiot::ledger {

using crypto::Digest;

enum class TxKind : std::uint8_t {
  model_update = 1,
  access_request = 2,
  consent_change = 3,
  alert = 4,
  record_write = 5,
};

inline const char* to_string(TxKind k) {
  switch (k) {
    case TxKind::model_update: return "ModelUpdate";
    case TxKind::access_request: return "AccessRequest";
    case TxKind::consent_change: return "ConsentChange";
    case TxKind::alert: return "Alert";
    case TxKind::record_write: return "RecordWrite";
  }
  return "?";
}

inline TxKind tx_kind_from(std::uint8_t v) {
  if (v < 1 || v > 5) throw DecodeError("unknown transaction kind");
  return static_cast<TxKind>(v);
}

struct Transaction {
  TxKind kind = TxKind::record_write;
  Bytes payload;
  Digest payload_digest;
  std::string sender;
  crypto::Signature signature;
  std::uint64_t created_ms = 0;

  /// Bytes covered by the sender's signature. The payload itself is included,
  /// so editing it after signing invalidates the signature.
  Bytes signing_bytes() const {
    return ByteWriter()
        .str("hiot/tx/v1")
        .u8(static_cast<std::uint8_t>(kind))
        .str(sender)
        .u64(created_ms)
        .var(payload)
        .raw(payload_digest.view())
        .bytes();
  }

  /// kind u8 || sender || created_ms u64 || payload || digest 32B || signature
  Bytes encode(const crypto::GroupParams& gp) const {
    return ByteWriter()
        .u8(static_cast<std::uint8_t>(kind))
        .str(sender)
        .u64(created_ms)
        .var(payload)
        .raw(payload_digest.view())
        .var(signature.encode(gp))
        .bytes();
  }

  static Transaction decode(const crypto::GroupParams& gp, ByteView b) {
    ByteReader r(b);
    Transaction tx;
    tx.kind = tx_kind_from(r.u8());
    tx.sender = r.str();
    tx.created_ms = r.u64();
    tx.payload = r.var();
    tx.payload_digest = Digest::from_view(r.raw(32));
    const auto sig = r.var(4096);
    tx.signature = crypto::Signature::decode(gp, sig);
    r.expect_done();
    return tx;
  }

  Digest id(const crypto::GroupParams& gp) const { return crypto::hash(encode(gp)); }

  std::size_t wire_size(const crypto::GroupParams& gp) const {
    return 1 + 4 + sender.size() + 8 + 4 + payload.size() + 32 + 4 + crypto::Signature::encoded_size(gp);
  }

  bool operator==(const Transaction&) const = default;
};

inline Transaction make_transaction(const crypto::GroupParams& gp, TxKind kind, Bytes payload,
                                    std::string sender, const crypto::KeyPair& key, std::uint64_t created_ms) {
  Transaction tx;
  tx.kind = kind;
  tx.payload_digest = crypto::hash(payload);
  tx.payload = std::move(payload);
  tx.sender = std::move(sender);
  tx.created_ms = created_ms;
  tx.signature = crypto::schnorr_sign(gp, key, tx.signing_bytes());
  return tx;
}

}  // namespace hiot::ledger
