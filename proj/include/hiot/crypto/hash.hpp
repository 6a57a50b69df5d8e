#pragma once

#include <openssl/evp.h>

#include <array>
#include <compare>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiot/util/bytes.hpp"

namespace hiot::crypto {

/// SHA-256 output.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  ByteView view() const { return bytes; }
  std::string hex() const { return to_hex(bytes); }
  bool is_zero() const {
    for (auto b : bytes)
      if (b) return false;
    return true;
  }
  static Digest from_view(ByteView b) {
    if (b.size() != 32) throw DecodeError("digest must be 32 bytes");
    Digest d;
    std::copy(b.begin(), b.end(), d.bytes.begin());
    return d;
  }
};

/// Incremental SHA-256 over several byte ranges.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256 init failed");
  }

  Hasher& update(ByteView b) {
    if (!b.empty() && EVP_DigestUpdate(ctx_.get(), b.data(), b.size()) != 1)
      throw std::runtime_error("sha256 update failed");
    return *this;
  }

  Digest finish() {
    Digest d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), d.bytes.data(), &len) != 1 || len != 32)
      throw std::runtime_error("sha256 final failed");
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest hash(ByteView b) { return Hasher().update(b).finish(); }

inline Digest hash(std::string_view s) {
  return hash(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

/// Pairwise Merkle root. An odd node at any level is paired with itself;
/// the empty list hashes to SHA-256 of the empty string.
inline Digest merkle_root(std::vector<Digest> level) {
  if (level.empty()) return hash(ByteView{});
  if (level.size() == 1) return Hasher().update(level[0].view()).update(level[0].view()).finish();
  while (level.size() > 1) {
    if (level.size() % 2) level.push_back(level.back());
    std::vector<Digest> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2)
      next.push_back(Hasher().update(level[i].view()).update(level[i + 1].view()).finish());
    level = std::move(next);
  }
  return level[0];
}

}  // namespace hiot::crypto
