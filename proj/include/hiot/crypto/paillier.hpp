#pragma once

#include "hiot/crypto/bigint.hpp"

namespace hiot::crypto {

/// Raised when ciphertexts from different keys meet in one operation.
class KeyMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PaillierPublicKey {
  BigInt n;
  BigInt n2;
  BigInt g;  // n + 1
  Digest fingerprint;

  static PaillierPublicKey from_modulus(const BigInt& n) {
    PaillierPublicKey pk{n, n * n, n + 1, {}};
    pk.fingerprint = hash(ByteWriter().str("paillier").var(to_fixed_bytes(n, byte_length(n))).bytes());
    return pk;
  }

  std::size_t ciphertext_width() const { return byte_length(n2); }
};

struct PaillierPrivateKey {
  BigInt lambda;  // lcm(p1 - 1, q1 - 1)
  BigInt mu;      // (L(g^lambda mod n^2))^-1 mod n
};

struct PaillierKey {
  PaillierPublicKey pub;
  PaillierPrivateKey priv;

  /// Builds a key from two distinct primes. Exposed for tiny-key test oracles;
  /// use paillier_keygen for real keys.
  static PaillierKey from_primes(const BigInt& p1, const BigInt& q1) {
    if (p1 == q1) throw std::invalid_argument("paillier primes must be distinct");
    const BigInt n = p1 * q1;
    if (gcd(n, (p1 - 1) * (q1 - 1)) != 1) throw std::invalid_argument("gcd(n, phi) != 1");
    PaillierKey key;
    key.pub = PaillierPublicKey::from_modulus(n);
    key.priv.lambda = lcm(p1 - 1, q1 - 1);
    const BigInt u = powm(key.pub.g, key.priv.lambda, key.pub.n2);
    key.priv.mu = invert((u - 1) / n, n);
    return key;
  }
};

struct Ciphertext {
  BigInt value;
  Digest key_fingerprint;

  bool operator==(const Ciphertext&) const = default;
};

/// Key with a modulus of `bits` bits, deterministic in `seed`.
inline PaillierKey paillier_keygen(std::size_t bits, std::uint64_t seed) {
  if (bits < 64) throw std::invalid_argument("paillier modulus must be at least 64 bits");
  Drbg rng("paillier-keygen", seed);
  for (;;) {
    const BigInt p1 = rng.prime(bits / 2);
    const BigInt q1 = rng.prime(bits - bits / 2);
    if (p1 == q1) continue;
    const BigInt n = p1 * q1;
    if (bit_length(n) != bits || gcd(n, (p1 - 1) * (q1 - 1)) != 1) continue;
    return PaillierKey::from_primes(p1, q1);
  }
}

/// Enc(m) = g^m * r^n mod n^2 with caller-supplied randomness r in Z_n^*.
inline Ciphertext paillier_enc(const PaillierPublicKey& pk, const BigInt& m, const BigInt& r) {
  if (m < 0 || m >= pk.n) throw std::out_of_range("plaintext outside [0, n)");
  if (r <= 0 || r >= pk.n || gcd(r, pk.n) != 1) throw std::invalid_argument("randomness not in Z_n^*");
  // g = n + 1 so g^m = 1 + m*n mod n^2
  const BigInt gm = (1 + m * pk.n) % pk.n2;
  return Ciphertext{(gm * powm(r, pk.n, pk.n2)) % pk.n2, pk.fingerprint};
}

/// Draws r from the generator, re-drawing until coprime with n.
inline Ciphertext paillier_enc(const PaillierPublicKey& pk, const BigInt& m, Drbg& rng) {
  BigInt r;
  do r = rng.in_range(1, pk.n - 1);
  while (gcd(r, pk.n) != 1);
  return paillier_enc(pk, m, r);
}

inline BigInt paillier_dec(const PaillierKey& key, const Ciphertext& c) {
  if (c.key_fingerprint != key.pub.fingerprint) throw KeyMismatchError("ciphertext under another key");
  const auto& pk = key.pub;
  if (c.value <= 0 || c.value >= pk.n2) throw std::out_of_range("ciphertext outside Z_{n^2}");
  const BigInt u = powm(c.value, key.priv.lambda, pk.n2);
  return (((u - 1) / pk.n) * key.priv.mu) % pk.n;
}

/// Homomorphic addition: Dec(add(a, b)) = Dec(a) + Dec(b) mod n.
inline Ciphertext paillier_add(const PaillierPublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  if (a.key_fingerprint != pk.fingerprint || b.key_fingerprint != pk.fingerprint)
    throw KeyMismatchError("ciphertexts under different keys");
  return Ciphertext{(a.value * b.value) % pk.n2, pk.fingerprint};
}

/// Scalar multiplication: Dec(smul(a, k)) = k * Dec(a) mod n.
inline Ciphertext paillier_smul(const PaillierPublicKey& pk, const Ciphertext& a, const BigInt& k) {
  if (a.key_fingerprint != pk.fingerprint) throw KeyMismatchError("ciphertext under another key");
  if (k < 0) throw std::invalid_argument("scalar must be non-negative");
  return Ciphertext{powm(a.value, k, pk.n2), pk.fingerprint};
}

}  // namespace hiot::crypto
