#pragma once

#include <list>
#include <set>

#include "hiot/ledger/chain.hpp"

namespace hiot::ledger {

enum class SubmitStatus { accepted, bad_signature, bad_digest, unregistered, pool_full, duplicate };

inline const char* to_string(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::accepted: return "accepted";
    case SubmitStatus::bad_signature: return "bad_signature";
    case SubmitStatus::bad_digest: return "bad_digest";
    case SubmitStatus::unregistered: return "unregistered";
    case SubmitStatus::pool_full: return "pool_full";
    case SubmitStatus::duplicate: return "duplicate";
  }
  return "?";
}

inline constexpr std::size_t kDefaultPoolCapacity = 10000;
inline constexpr std::size_t kDefaultBlockCapacity = 16;

/// Pending transactions in global arrival order. Ids that were ever admitted
/// stay in a seen-set so a re-submission (or a gossip echo) is not re-queued.
class TxPool {
 public:
  explicit TxPool(const Chain& chain, std::size_t capacity = kDefaultPoolCapacity)
      : chain_(&chain), capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("pool capacity must be positive");
  }

  SubmitStatus submit(const Transaction& tx) {
    if (!chain_->is_registered(tx.sender)) return SubmitStatus::unregistered;
    if (crypto::hash(tx.payload) != tx.payload_digest) return SubmitStatus::bad_digest;
    if (!crypto::verify_sig(chain_->group(), *chain_->public_key(tx.sender), tx.signing_bytes(), tx.signature))
      return SubmitStatus::bad_signature;
    return admit_verified(tx);
  }

  /// Admission for a transaction already checked by a peer.
  SubmitStatus admit_verified(const Transaction& tx) {
    auto id = tx.id(chain_->group());
    if (seen_.contains(id)) return SubmitStatus::duplicate;
    if (queue_.size() >= capacity_) return SubmitStatus::pool_full;
    seen_.insert(id);
    queue_.push_back(Entry{id, tx});
    return SubmitStatus::accepted;
  }

  /// Removes and returns up to max_tx transactions, oldest first.
  std::vector<Transaction> drain(std::size_t max_tx) {
    std::vector<Transaction> out;
    while (!queue_.empty() && out.size() < max_tx) {
      out.push_back(std::move(queue_.front().tx));
      queue_.pop_front();
    }
    return out;
  }

  /// Oldest max_tx transactions without removing them.
  std::vector<Transaction> peek(std::size_t max_tx) const {
    std::vector<Transaction> out;
    for (auto it = queue_.begin(); it != queue_.end() && out.size() < max_tx; ++it) out.push_back(it->tx);
    return out;
  }

  /// Drops transactions that some other sealer committed, and marks them seen.
  std::size_t remove_committed(const Block& b) {
    std::set<Digest> ids;
    for (const auto& tx : b.txs) ids.insert(tx.id(chain_->group()));
    seen_.insert(ids.begin(), ids.end());
    return std::erase_if(queue_, [&](const Entry& e) { return ids.contains(e.id); });
  }

  std::size_t size() const { return queue_.size(); }
  bool empty() const { return queue_.empty(); }
  std::size_t capacity() const { return capacity_; }

 private:
  struct Entry {
    Digest id;
    Transaction tx;
  };

  const Chain* chain_;
  std::size_t capacity_;
  std::list<Entry> queue_;
  std::set<Digest> seen_;
};

}  // namespace hiot::ledger
