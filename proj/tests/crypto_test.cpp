#include <gtest/gtest.h>

#include "hiot/crypto/channel.hpp"
#include "hiot/crypto/paillier.hpp"
#include "hiot/crypto/schnorr.hpp"

using namespace hiot;
using namespace hiot::crypto;

// Expected digests and small-group values below were computed with Python
// (hashlib plus plain integer arithmetic), independently of this code.

TEST(Hash, KnownVectors) {
  EXPECT_EQ(hash(std::string_view("")).hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hash(std::string_view("abc")).hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Hasher h;
  const std::string chunk(1000, 'a');
  for (int i = 0; i < 1000; ++i) h.update(to_bytes(chunk));
  EXPECT_EQ(h.finish().hex(), "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST(Hash, MerkleRoot) {
  std::vector<Digest> leaves;
  for (std::uint8_t i = 0; i < 3; ++i) leaves.push_back(hash(Bytes{i}));
  EXPECT_EQ(merkle_root(leaves).hex(), "f2dcdd96791b6bac5d554f2d320e594b834f5da1981812c3707e7772234cb0ad");
  EXPECT_EQ(merkle_root({leaves[0]}).hex(), "b289dea92ca5aba5f2e1891a1af11be27914c48854db0fe5b4bb95c137e0f2d6");
  EXPECT_EQ(merkle_root({}), hash(ByteView{}));
  auto swapped = leaves;
  std::swap(swapped[0], swapped[1]);
  EXPECT_NE(merkle_root(swapped), merkle_root(leaves));
}

TEST(BigInt, FixedWidthEncoding) {
  EXPECT_EQ(to_hex(to_fixed_bytes(BigInt(0x1234), 4)), "00001234");
  EXPECT_EQ(from_bytes(from_hex("00001234")), BigInt(0x1234));
  EXPECT_THROW(to_fixed_bytes(BigInt(0x123456), 2), std::invalid_argument);
  EXPECT_THROW(to_fixed_bytes(BigInt(-1), 2), std::invalid_argument);
  EXPECT_EQ(byte_length(BigInt(0)), 1u);
  EXPECT_EQ(bit_length(BigInt(255)), 8u);
}

TEST(Drbg, DeterministicAndBounded) {
  Drbg a("x", 1), b("x", 1), c("x", 2);
  EXPECT_EQ(a.next_bytes(40), b.next_bytes(40));
  EXPECT_NE(a.next_bytes(8), c.next_bytes(8));
  Drbg r(5);
  for (int i = 0; i < 200; ++i) {
    const auto v = r.in_range(10, 20);
    ASSERT_GE(v, 10);
    ASSERT_LE(v, 20);
    ASSERT_EQ(bit_length(r.exact_bits(37)), 37u);
  }
  const auto pr = Drbg(9).prime(64);
  EXPECT_TRUE(is_probable_prime(pr));
}

TEST(Group, GeneratedGroupsAreValid) {
  EXPECT_TRUE(GroupParams::test_profile().valid());
  EXPECT_TRUE(GroupParams::standard().valid());
  EXPECT_EQ(bit_length(GroupParams::standard().p), 512u);
  EXPECT_EQ(bit_length(GroupParams::standard().q), 256u);
  EXPECT_EQ(GroupParams::generate(64, 32, 0x7e57), GroupParams::test_profile());
}

TEST(Schnorr, VerifiesHandBuiltSignature) {
  // p = 23, q = 11, g = 4; x = 3, nonce k = 5, message "hello"
  const GroupParams gp{23, 11, 4};
  const Signature sig{12, 6, 1};
  EXPECT_TRUE(verify_sig(gp, 18, to_bytes("hello"), sig));
  EXPECT_FALSE(verify_sig(gp, 18, to_bytes("hellp"), sig));
  EXPECT_FALSE(verify_sig(gp, 18, to_bytes("hello"), Signature{12, 6, 2}));
  EXPECT_FALSE(verify_sig(gp, 16, to_bytes("hello"), sig));
  EXPECT_FALSE(verify_sig(gp, 18, ByteView{}, sig));
}

TEST(Schnorr, SignVerifyRoundTrip) {
  const auto& gp = GroupParams::test_profile();
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto kp = KeyPair::generate(gp, i);
    const auto msg = ByteWriter().str("msg").u64(i).bytes();
    const auto sig = schnorr_sign(gp, kp, msg);
    ASSERT_TRUE(verify_sig(gp, kp.pub, msg, sig));
    ASSERT_EQ(Signature::decode(gp, sig.encode(gp)), sig);
    ASSERT_EQ(sig.encode(gp).size(), Signature::encoded_size(gp));
    // wrong key, altered message, altered response
    ASSERT_FALSE(verify_sig(gp, KeyPair::generate(gp, i + 1000).pub, msg, sig));
    auto other = msg;
    other.back() ^= 1;
    ASSERT_FALSE(verify_sig(gp, kp.pub, other, sig));
    ASSERT_FALSE(verify_sig(gp, kp.pub, msg, Signature{sig.t, sig.c, (sig.s + 1) % gp.q}));
  }
}

TEST(Schnorr, ProofBoundToContext) {
  const auto& gp = GroupParams::standard();
  const auto kp = KeyPair::derive(gp, "alice", 1);
  const auto ctx = to_bytes("login:42");
  const auto tr = schnorr_prove(gp, kp, ctx, 7);
  EXPECT_TRUE(schnorr_verify(gp, kp.pub, tr));
  EXPECT_TRUE(schnorr_verify(gp, kp.pub, tr, ByteView(ctx)));
  EXPECT_FALSE(schnorr_verify(gp, kp.pub, tr, ByteView(to_bytes("login:43"))));
  EXPECT_EQ(ProofTranscript::decode(gp, tr.encode(gp)), tr);
  auto replay = tr;
  replay.context = to_bytes("login:43");
  EXPECT_FALSE(schnorr_verify(gp, kp.pub, replay));
  EXPECT_THROW(schnorr_prove(gp, kp, ByteView{}, 0), std::invalid_argument);
  // same seed, same nonce; different seed, different commitment
  EXPECT_EQ(schnorr_prove(gp, kp, ctx, 7), tr);
  EXPECT_NE(schnorr_prove(gp, kp, ctx, 8).t, tr.t);
}

TEST(Schnorr, RejectsOutOfGroupValues) {
  const auto& gp = GroupParams::test_profile();
  const auto kp = KeyPair::generate(gp, 3);
  const auto msg = to_bytes("m");
  auto sig = schnorr_sign(gp, kp, msg);
  EXPECT_FALSE(verify_sig(gp, kp.pub, msg, Signature{1, sig.c, sig.s}));
  EXPECT_FALSE(verify_sig(gp, kp.pub, msg, Signature{sig.t, sig.c + gp.q, sig.s}));
  EXPECT_FALSE(verify_sig(gp, gp.p - 1, msg, sig));
}

TEST(Paillier, TinyKeyMatchesHandComputation) {
  // n = 143, lambda = 60, mu = 31; Enc(42, r = 7) = 19021
  const auto key = PaillierKey::from_primes(11, 13);
  EXPECT_EQ(key.priv.lambda, 60);
  EXPECT_EQ(key.priv.mu, 31);
  const auto c = paillier_enc(key.pub, 42, BigInt(7));
  EXPECT_EQ(c.value, 19021);
  EXPECT_EQ(paillier_dec(key, c), 42);
}

TEST(Paillier, HomomorphismOnRandomPairs) {
  for (std::size_t bits : {128u, 256u}) {
    const auto key = paillier_keygen(bits, bits);
    EXPECT_EQ(bit_length(key.pub.n), bits);
    Drbg rng("pairs", bits);
    for (int i = 0; i < 100; ++i) {
      const BigInt a = rng.below(key.pub.n), b = rng.below(key.pub.n), k = rng.below(1000);
      const auto ca = paillier_enc(key.pub, a, rng), cb = paillier_enc(key.pub, b, rng);
      ASSERT_EQ(paillier_dec(key, ca), a);
      ASSERT_EQ(paillier_dec(key, paillier_add(key.pub, ca, cb)), (a + b) % key.pub.n);
      ASSERT_EQ(paillier_dec(key, paillier_smul(key.pub, ca, k)), (a * k) % key.pub.n);
    }
  }
}

TEST(Paillier, RejectsMixedKeysAndBadInput) {
  const auto k1 = paillier_keygen(128, 1), k2 = paillier_keygen(128, 2);
  Drbg rng(1);
  const auto c1 = paillier_enc(k1.pub, 5, rng), c2 = paillier_enc(k2.pub, 5, rng);
  EXPECT_THROW(paillier_add(k1.pub, c1, c2), KeyMismatchError);
  EXPECT_THROW(paillier_dec(k1, c2), KeyMismatchError);
  EXPECT_THROW(paillier_smul(k2.pub, c1, 3), KeyMismatchError);
  EXPECT_THROW(paillier_enc(k1.pub, k1.pub.n, rng), std::out_of_range);
  EXPECT_THROW(paillier_enc(k1.pub, -1, rng), std::out_of_range);
  EXPECT_THROW(paillier_enc(k1.pub, 1, BigInt(0)), std::invalid_argument);
  EXPECT_THROW(paillier_keygen(32, 0), std::invalid_argument);
  EXPECT_THROW(PaillierKey::from_primes(11, 11), std::invalid_argument);
}

TEST(Paillier, EncryptionIsRandomized) {
  const auto key = paillier_keygen(128, 4);
  Drbg rng(4);
  const auto a = paillier_enc(key.pub, 9, rng), b = paillier_enc(key.pub, 9, rng);
  EXPECT_NE(a.value, b.value);
  EXPECT_EQ(paillier_dec(key, a), paillier_dec(key, b));
}

TEST(Channel, DhMatchesHandComputation) {
  const GroupParams gp{23, 11, 4};
  // g^4 = 3, g^9 = 13
  const auto k1 = dh_derive(gp, 4, 13), k2 = dh_derive(gp, 9, 3);
  EXPECT_EQ(k1, k2);
  EXPECT_EQ(k1.hex(), "f299791cddd3d6664f6670842812ef6053eb6501bd6282a476bbbf3ee91e750c");
  EXPECT_THROW(dh_derive(gp, 4, 5), std::invalid_argument);  // 5 has order 22
}

TEST(Channel, DhAgreementOnRandomPairs) {
  const auto& gp = GroupParams::standard();
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto a = KeyPair::generate(gp, 2 * i), b = KeyPair::generate(gp, 2 * i + 1);
    ASSERT_EQ(dh_derive(gp, a.secret, b.pub), dh_derive(gp, b.secret, a.pub));
  }
}

TEST(Channel, SealMatchesReferenceFrame) {
  const auto key = hash(std::string_view("k"));
  const auto frame = seal(key, to_bytes("hello"), 7);
  EXPECT_EQ(to_hex(frame),
            "000000000000000700000005c830883361888dde3e3c377c6aae91a3f2beb7edf8ac6f3562906fc18bf3698291a2140a9a");
  EXPECT_EQ(frame.size(), sealed_size(5));
  EXPECT_EQ(open(key, frame), to_bytes("hello"));
}

TEST(Channel, EveryByteFlipIsDetected) {
  const auto key = hash(std::string_view("channel"));
  Bytes pt(70);
  for (std::size_t i = 0; i < pt.size(); ++i) pt[i] = static_cast<std::uint8_t>(i * 7);
  const auto frame = seal(key, pt, 3);
  ASSERT_EQ(open(key, frame), pt);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    for (std::uint8_t bit : {0x01, 0x80}) {
      auto bad = frame;
      bad[i] ^= bit;
      EXPECT_ANY_THROW(open(key, bad)) << "byte " << i;
    }
  }
  auto truncated = frame;
  truncated.pop_back();
  EXPECT_THROW(open(key, truncated), DecodeError);
  EXPECT_THROW(open(hash(std::string_view("other")), frame), AuthenticationError);
}
