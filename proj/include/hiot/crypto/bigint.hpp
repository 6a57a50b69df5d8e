#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>

#include "hiot/crypto/hash.hpp"
#include "hiot/util/bytes.hpp"

namespace hiot::crypto {

using BigInt = mpz_class;

inline std::size_t byte_length(const BigInt& v) {
  return v == 0 ? 1 : (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
}

inline std::size_t bit_length(const BigInt& v) { return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2); }

/// Big-endian, left-padded to exactly `width` bytes.
inline Bytes to_fixed_bytes(const BigInt& v, std::size_t width) {
  if (v < 0) throw std::invalid_argument("negative value has no unsigned encoding");
  Bytes out(width, 0);
  if (v == 0) return out;
  std::size_t count = 0;
  const std::size_t need = byte_length(v);
  if (need > width) throw std::invalid_argument("value does not fit fixed width");
  mpz_export(out.data() + (width - need), &count, 1, 1, 1, 0, v.get_mpz_t());
  return out;
}

inline BigInt from_bytes(ByteView b) {
  BigInt v;
  if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return v;
}

inline BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

inline BigInt invert(const BigInt& a, const BigInt& mod) {
  BigInt r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0)
    throw std::invalid_argument("value not invertible");
  return r;
}

inline BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline BigInt lcm(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline bool is_probable_prime(const BigInt& v) { return mpz_probab_prime_p(v.get_mpz_t(), 32) > 0; }

/// Deterministic byte generator: SHA-256(seed || counter) blocks.
/// All key material and nonces in the repo are drawn from one of these so
/// results depend only on explicit seeds.
class Drbg {
 public:
  explicit Drbg(ByteView seed) : seed_(seed.begin(), seed.end()) {}
  explicit Drbg(std::uint64_t seed) : seed_(ByteWriter().u64(seed).bytes()) {}
  Drbg(std::string_view domain, std::uint64_t seed)
      : seed_(ByteWriter().str(domain).u64(seed).bytes()) {}

  Bytes next_bytes(std::size_t n) {
    Bytes out;
    out.reserve(n);
    while (out.size() < n) {
      auto block = Hasher().update(seed_).update(ByteWriter().u64(counter_++).bytes()).finish();
      const auto take = std::min<std::size_t>(32, n - out.size());
      out.insert(out.end(), block.bytes.begin(), block.bytes.begin() + take);
    }
    return out;
  }

  std::uint64_t next_u64() {
    const auto b = next_bytes(8);
    return ByteReader(b).u64();
  }

  /// Uniform integer with exactly `bits` significant bits (top bit set).
  BigInt exact_bits(std::size_t bits) {
    if (bits == 0) throw std::invalid_argument("bits must be positive");
    auto raw = next_bytes((bits + 7) / 8);
    BigInt v = from_bytes(raw);
    const std::size_t excess = raw.size() * 8 - bits;
    v >>= excess;
    mpz_setbit(v.get_mpz_t(), bits - 1);
    return v;
  }

  /// Uniform in [0, bound) by rejection.
  BigInt below(const BigInt& bound) {
    if (bound <= 0) throw std::invalid_argument("bound must be positive");
    const auto bits = bit_length(bound);
    const auto nbytes = (bits + 7) / 8;
    for (;;) {
      auto raw = next_bytes(nbytes);
      BigInt v = from_bytes(raw);
      v >>= (nbytes * 8 - bits);
      if (v < bound) return v;
    }
  }

  /// Uniform in [lo, hi].
  BigInt in_range(const BigInt& lo, const BigInt& hi) { return lo + below(hi - lo + 1); }

  BigInt prime(std::size_t bits) {
    for (;;) {
      BigInt c = exact_bits(bits);
      mpz_setbit(c.get_mpz_t(), 0);
      if (is_probable_prime(c)) return c;
    }
  }

 private:
  Bytes seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace hiot::crypto
