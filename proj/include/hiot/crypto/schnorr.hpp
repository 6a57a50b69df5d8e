#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "hiot/crypto/bigint.hpp"

namespace hiot::crypto {

/// Prime-order subgroup of Z_p^*: q | p - 1, g of order q.
struct GroupParams {
  BigInt p;
  BigInt q;
  BigInt g;

  std::size_t element_width() const { return byte_length(p); }
  std::size_t scalar_width() const { return byte_length(q); }

  /// True iff v is a non-identity member of the order-q subgroup.
  bool contains(const BigInt& v) const { return v > 1 && v < p && powm(v, q, p) == 1; }

  bool valid() const {
    return p > 3 && q > 1 && is_probable_prime(p) && is_probable_prime(q) && (p - 1) % q == 0 &&
           g != 1 && powm(g, q, p) == 1;
  }

  Bytes encode_element(const BigInt& v) const { return to_fixed_bytes(v, element_width()); }
  Bytes encode_scalar(const BigInt& v) const { return to_fixed_bytes(v, scalar_width()); }

  bool operator==(const GroupParams&) const = default;

  /// Deterministic group from a seed: q prime of q_bits, p = k*q + 1 prime of p_bits.
  static GroupParams generate(std::size_t p_bits, std::size_t q_bits, std::uint64_t seed) {
    if (q_bits < 16 || p_bits <= q_bits + 1) throw std::invalid_argument("bad group sizes");
    Drbg rng("group-params", seed);
    const BigInt q = rng.prime(q_bits);
    const BigInt p_lo = BigInt(1) << (p_bits - 1);
    const BigInt p_hi = (BigInt(1) << p_bits) - 1;
    const BigInt k_lo = (p_lo - 1 + q - 1) / q;
    const BigInt k_hi = (p_hi - 1) / q;
    BigInt p;
    for (;;) {
      BigInt k = rng.in_range(k_lo, k_hi);
      if (k % 2 != 0) k += 1;
      if (k > k_hi) continue;
      p = k * q + 1;
      if (is_probable_prime(p)) break;
    }
    BigInt g;
    const BigInt cofactor = (p - 1) / q;
    do g = powm(rng.in_range(2, p - 2), cofactor, p);
    while (g == 1);
    return GroupParams{p, q, g};
  }

  /// 512-bit p / 256-bit q group used by default.
  static const GroupParams& standard() {
    static const GroupParams params = generate(512, 256, 0x5ec0de);
    return params;
  }

  /// 64-bit p / 32-bit q group for fast property tests.
  static const GroupParams& test_profile() {
    static const GroupParams params = generate(64, 32, 0x7e57);
    return params;
  }
};

struct KeyPair {
  BigInt secret;  // x in [1, q-1]
  BigInt pub;     // y = g^x mod p

  static KeyPair generate(const GroupParams& gp, std::uint64_t seed) {
    Drbg rng("keypair", seed);
    BigInt x = rng.in_range(1, gp.q - 1);
    return KeyPair{x, powm(gp.g, x, gp.p)};
  }

  static KeyPair derive(const GroupParams& gp, std::string_view label, std::uint64_t seed) {
    Drbg rng(ByteWriter().str("keypair").str(label).u64(seed).bytes());
    BigInt x = rng.in_range(1, gp.q - 1);
    return KeyPair{x, powm(gp.g, x, gp.p)};
  }
};

/// Non-interactive Schnorr proof of knowledge of log_g(y), bound to `context`.
struct ProofTranscript {
  BigInt t;  // commitment g^k
  BigInt c;  // challenge H(g || y || t || context) mod q
  BigInt s;  // response k + c*x mod q
  Bytes context;

  /// Wire format: t || c || s || u32 len(context) || context.
  Bytes encode(const GroupParams& gp) const {
    return ByteWriter()
        .raw(gp.encode_element(t))
        .raw(gp.encode_scalar(c))
        .raw(gp.encode_scalar(s))
        .var(context)
        .bytes();
  }

  static ProofTranscript decode(const GroupParams& gp, ByteView b) {
    ByteReader r(b);
    ProofTranscript out;
    out.t = from_bytes(r.raw(gp.element_width()));
    out.c = from_bytes(r.raw(gp.scalar_width()));
    out.s = from_bytes(r.raw(gp.scalar_width()));
    out.context = r.var();
    r.expect_done();
    return out;
  }

  bool operator==(const ProofTranscript&) const = default;
};

namespace detail {

inline BigInt challenge(const GroupParams& gp, const BigInt& y, const BigInt& t, ByteView context) {
  auto d = Hasher()
               .update(gp.encode_element(gp.g))
               .update(gp.encode_element(y))
               .update(gp.encode_element(t))
               .update(context)
               .finish();
  return from_bytes(d.view()) % gp.q;
}

inline BigInt nonce(const GroupParams& gp, const KeyPair& kp, ByteView context, std::uint64_t seed) {
  Drbg rng(ByteWriter()
               .str("schnorr-nonce")
               .u64(seed)
               .raw(gp.encode_scalar(kp.secret))
               .var(context)
               .bytes());
  return rng.in_range(1, gp.q - 1);
}

inline bool check_equation(const GroupParams& gp, const BigInt& y, const BigInt& t, const BigInt& c,
                           const BigInt& s, ByteView context) {
  if (!gp.contains(y) || !gp.contains(t)) return false;
  if (c < 0 || c >= gp.q || s < 0 || s >= gp.q) return false;
  if (challenge(gp, y, t, context) != c) return false;
  const BigInt lhs = powm(gp.g, s, gp.p);
  const BigInt rhs = (t * powm(y, c, gp.p)) % gp.p;
  return lhs == rhs;
}

}  // namespace detail

inline ProofTranscript schnorr_prove(const GroupParams& gp, const KeyPair& kp, ByteView context,
                                     std::uint64_t nonce_seed) {
  if (context.empty()) throw std::invalid_argument("proof context must be non-empty");
  const BigInt k = detail::nonce(gp, kp, context, nonce_seed);
  ProofTranscript tr;
  tr.t = powm(gp.g, k, gp.p);
  tr.context.assign(context.begin(), context.end());
  tr.c = detail::challenge(gp, kp.pub, tr.t, context);
  tr.s = (k + tr.c * kp.secret) % gp.q;
  return tr;
}

/// Checks the transcript against public key y. When `expected_context` is
/// given, the transcript must also carry exactly that context.
inline bool schnorr_verify(const GroupParams& gp, const BigInt& y, const ProofTranscript& tr,
                           std::optional<ByteView> expected_context = std::nullopt) {
  if (tr.context.empty()) return false;
  if (expected_context && !std::ranges::equal(*expected_context, tr.context)) return false;
  return detail::check_equation(gp, y, tr.t, tr.c, tr.s, tr.context);
}

/// Fiat-Shamir signature: a transcript whose context is the message.
struct Signature {
  BigInt t;
  BigInt c;
  BigInt s;

  Bytes encode(const GroupParams& gp) const {
    return ByteWriter()
        .raw(gp.encode_element(t))
        .raw(gp.encode_scalar(c))
        .raw(gp.encode_scalar(s))
        .bytes();
  }

  static Signature decode(const GroupParams& gp, ByteView b) {
    ByteReader r(b);
    Signature sig;
    sig.t = from_bytes(r.raw(gp.element_width()));
    sig.c = from_bytes(r.raw(gp.scalar_width()));
    sig.s = from_bytes(r.raw(gp.scalar_width()));
    r.expect_done();
    return sig;
  }

  static std::size_t encoded_size(const GroupParams& gp) {
    return gp.element_width() + 2 * gp.scalar_width();
  }

  bool operator==(const Signature&) const = default;
};

inline Signature schnorr_sign(const GroupParams& gp, const KeyPair& kp, ByteView message) {
  auto tr = schnorr_prove(gp, kp, message, 0);
  return Signature{tr.t, tr.c, tr.s};
}

inline bool verify_sig(const GroupParams& gp, const BigInt& y, ByteView message, const Signature& sig) {
  if (message.empty()) return false;
  return detail::check_equation(gp, y, sig.t, sig.c, sig.s, message);
}

}  // namespace hiot::crypto
