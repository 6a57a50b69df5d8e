#pragma once

#include "hiot/crypto/schnorr.hpp"

namespace hiot::crypto {

/// Frame tag did not match: the frame was modified or sealed under another key.
class AuthenticationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SymmetricKey = Digest;

/// shared = H(peer_public^my_secret mod p)
inline SymmetricKey dh_derive(const GroupParams& gp, const BigInt& my_secret, const BigInt& peer_public) {
  if (!gp.contains(peer_public)) throw std::invalid_argument("peer public value not in group");
  return hash(gp.encode_element(powm(peer_public, my_secret, gp.p)));
}

namespace detail {

inline Bytes keystream_xor(const SymmetricKey& key, std::uint64_t counter, ByteView in) {
  Bytes out(in.begin(), in.end());
  for (std::size_t block = 0; block * 32 < out.size(); ++block) {
    auto ks = Hasher().update(key.view()).update(ByteWriter().u64(counter).u64(block).bytes()).finish();
    for (std::size_t i = 0; i < 32 && block * 32 + i < out.size(); ++i) out[block * 32 + i] ^= ks.bytes[i];
  }
  return out;
}

inline Digest frame_tag(const SymmetricKey& key, std::uint64_t counter, ByteView ciphertext) {
  return Hasher().update(key.view()).update(ByteWriter().u64(counter).bytes()).update(ciphertext).finish();
}

}  // namespace detail

/// Frame layout: counter u64 || u32 len || ciphertext || tag (32 bytes).
/// Keystream block i is H(key || counter || i); tag is H(key || counter || ciphertext).
/// Not a production cipher.
inline Bytes seal(const SymmetricKey& key, ByteView plaintext, std::uint64_t counter) {
  auto ct = detail::keystream_xor(key, counter, plaintext);
  auto tag = detail::frame_tag(key, counter, ct);
  return ByteWriter().u64(counter).var(ct).raw(tag.view()).bytes();
}

/// Throws DecodeError for malformed frames and AuthenticationError on tag mismatch.
inline Bytes open(const SymmetricKey& key, ByteView frame) {
  ByteReader r(frame);
  const auto counter = r.u64();
  const auto ct = r.var();
  const auto tag = Digest::from_view(r.raw(32));
  r.expect_done();
  if (detail::frame_tag(key, counter, ct) != tag) throw AuthenticationError("frame authentication failed");
  return detail::keystream_xor(key, counter, ct);
}

/// Sealed frame size for a plaintext of `n` bytes.
constexpr std::size_t sealed_size(std::size_t n) { return 8 + 4 + n + 32; }

}  // namespace hiot::crypto
