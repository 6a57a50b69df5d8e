#include <gtest/gtest.h>

#include "hiot/fedlearn.hpp"
#include "hiot/util/stats.hpp"

using namespace hiot;
using namespace hiot::fl;

namespace {

ModelUpdate update(std::string id, const Weights& d, std::uint64_t n, std::uint64_t round = 0) {
  ModelUpdate u;
  u.node_id = std::move(id);
  u.round = round;
  u.delta = d;
  u.sample_count = n;
  return u;
}

std::vector<LabeledRow> random_rows(Rng& rng, std::size_t n) {
  std::vector<LabeledRow> rows(n);
  for (auto& r : rows) {
    for (auto& x : r.x) x = rng.normal();
    r.y = rng.uniform() < 0.5 ? 0 : 1;
  }
  return rows;
}

}  // namespace

TEST(FedLearn, FedAvgMatchesReference) {
  GlobalModel base;
  Weights d1, d2, d3;
  for (std::size_t j = 0; j < kWeights; ++j) {
    base.weights[j] = 0.1 * j;
    d1[j] = 0.5 - 0.1 * j;
    d2[j] = (j % 2 ? -1 : 1) * 0.25;
    d3[j] = 0.01 * j * j;
  }
  const std::vector<ModelUpdate> ups{update("a", d1, 3), update("b", d2, 1), update("c", d3, 6)};
  const auto next = fed_avg(ups, base);
  // computed independently in Python
  const Weights expect{0.175, 0.201, 0.339, 0.389, 0.551, 0.625, 0.811, 0.909, 1.119};
  EXPECT_EQ(next.round, 1u);
  for (std::size_t j = 0; j < kWeights; ++j) EXPECT_NEAR(next.weights[j], expect[j], 1e-9) << j;
}

TEST(FedLearn, FedAvgRejectsBadInput) {
  GlobalModel base{2, {}};
  Weights d{};
  EXPECT_THROW(fed_avg(std::vector<ModelUpdate>{}, base), std::invalid_argument);
  EXPECT_THROW(fed_avg(std::vector{update("a", d, 1, 1)}, base), std::invalid_argument);
  EXPECT_THROW(fed_avg(std::vector{update("a", d, 0, 2)}, base), std::invalid_argument);
}

TEST(FedLearn, LocalTrainMatchesReference) {
  LocalDataset data{"h0", {}};
  LabeledRow a, b;
  for (std::size_t j = 0; j < kFeatures; ++j) {
    a.x[j] = 0.1 * (j + 1);
    b.x[j] = -0.2 * j + 0.3;
  }
  a.y = 1;
  b.y = 0;
  data.rows = {a, b};
  const auto u = local_train(GlobalModel{}, data, 3, 0.5);
  const Weights expect{-0.052927639347530614, 0.030324447505147546, 0.1135765343578257,
                       0.1968286212105039,    0.280080708063182,    0.3633327949158602,
                       0.4465848817685384,    0.5298369686212165,   0.015442840374245308};
  for (std::size_t j = 0; j < kWeights; ++j) EXPECT_NEAR(u.delta[j], expect[j], 1e-12) << j;
  EXPECT_NEAR(u.train_loss, 0.23459502693683232, 1e-12);
  EXPECT_EQ(u.sample_count, 2u);

  EXPECT_THROW(local_train(GlobalModel{}, LocalDataset{"x", {}}, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(local_train(GlobalModel{}, data, 0, 0.1), std::invalid_argument);
  EXPECT_THROW(local_train(GlobalModel{}, data, 1, NAN), std::invalid_argument);
}

TEST(FedLearn, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const auto rows = random_rows(rng, 40);
  for (int trial = 0; trial < 20; ++trial) {
    Weights w;
    for (auto& v : w) v = rng.normal(0, 2);
    const auto g = gradient(w, rows);
    for (std::size_t j = 0; j < kWeights; ++j) {
      const double h = 1e-6;
      auto hi = w, lo = w;
      hi[j] += h;
      lo[j] -= h;
      const double fd = (objective(hi, rows) - objective(lo, rows)) / (2 * h);
      ASSERT_NEAR(g[j], fd, 1e-5) << "coordinate " << j;
    }
  }
}

TEST(FedLearn, StableLossAtExtremes) {
  Weights w{};
  LabeledRow r;
  r.x[0] = 1;
  w[0] = 800;
  r.y = 1;
  EXPECT_NEAR(row_loss(w, r), 0.0, 1e-300);
  r.y = 0;
  EXPECT_DOUBLE_EQ(row_loss(w, r), 800.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000)));
  EXPECT_DOUBLE_EQ(row_loss(Weights{}, r), std::log(2.0));
}

TEST(FedLearn, ClipBoundsNorm) {
  Weights d{};
  d[0] = 3;
  d[1] = 4;
  const auto c = clip(update("a", d, 1), 1.0);
  EXPECT_NEAR(l2_norm(c.delta), 1.0, 1e-12);
  EXPECT_NEAR(c.delta[0], 0.6, 1e-12);
  EXPECT_TRUE(c.clipped);
  const auto untouched = clip(update("a", d, 1), 10.0);
  EXPECT_EQ(untouched.delta, d);
  EXPECT_THROW(clip(update("a", d, 1), 0), std::invalid_argument);
}

TEST(FedLearn, DpSigmaFormula) {
  const auto dp = DpParams::make(1.0, 1e-5, 1.0);
  EXPECT_NEAR(dp.sigma, 4.844805262605389, 1e-12);
  EXPECT_NEAR(DpParams::make(0.5, 1e-5, 2.0).sigma, 4 * 4.844805262605389, 1e-11);
  EXPECT_DOUBLE_EQ(composed_epsilon(dp, 5), 5.0);
  EXPECT_THROW(DpParams::make(0, 1e-5, 1), std::invalid_argument);
  EXPECT_THROW(DpParams::make(1, 1, 1), std::invalid_argument);
  EXPECT_THROW(DpParams::make(1, 1e-5, -1), std::invalid_argument);
}

TEST(FedLearn, DpNoiseRequiresMatchingClip) {
  const auto dp = DpParams::make(1.0, 1e-5, 1.0);
  EXPECT_THROW(dp_noise(update("a", {}, 1), dp, 1), std::invalid_argument);
  EXPECT_THROW(dp_noise(clip(update("a", {}, 1), 2.0), dp, 1), std::invalid_argument);
  const auto a = dp_noise(clip(update("a", {}, 1), 1.0), dp, 9);
  EXPECT_EQ(a.delta, dp_noise(clip(update("a", {}, 1), 1.0), dp, 9).delta);
  EXPECT_TRUE(a.dp);
}

TEST(FedLearn, FixedPointCodec) {
  const crypto::BigInt n("1000000000000000000000");
  for (double v : {0.0, 1.5, -1.5, 123.456789, -0.000001})
    EXPECT_NEAR(decode_fixed(encode_fixed(v, n), n), v, 1e-6);
  EXPECT_THROW(encode_fixed(1e300, n), std::overflow_error);
  EXPECT_THROW(encode_fixed(NAN, n), std::invalid_argument);
}

TEST(FedLearn, SecureAggregationMatchesPlain) {
  const auto key = crypto::paillier_keygen(256, 77);
  crypto::Drbg rng("enc", 1);
  Rng r(3);
  std::vector<ModelUpdate> ups;
  std::vector<EncryptedUpdate> enc;
  for (int i = 0; i < 5; ++i) {
    Weights d;
    for (auto& v : d) v = r.normal(0, 0.5);
    ups.push_back(update("h" + std::to_string(i), d, 1 + r.below(50)));
    enc.push_back(encrypt_update(key.pub, ups.back(), rng));
  }
  const auto plain = fed_avg(ups, GlobalModel{});
  const auto secure = secure_aggregate(key, enc);
  for (std::size_t j = 0; j < kWeights; ++j) EXPECT_NEAR(secure[j], plain.weights[j], 1e-6);

  const auto other = crypto::paillier_keygen(256, 78);
  std::vector<EncryptedUpdate> mixed{enc[0], encrypt_update(other.pub, ups[1], rng)};
  EXPECT_THROW(aggregate_ciphertexts(key.pub, std::vector{encrypt_update(other.pub, ups[1], rng)}),
               crypto::KeyMismatchError);
  EXPECT_THROW(aggregate_ciphertexts(key.pub, mixed), crypto::KeyMismatchError);
  auto late = enc[1];
  late.round = 4;
  EXPECT_THROW(aggregate_ciphertexts(key.pub, std::vector{enc[0], late}), std::invalid_argument);
}

TEST(FedLearn, AttackTrivialCases) {
  std::vector<Candidate> cands;
  Rng rng(5);
  for (const auto& row : random_rows(rng, 20)) cands.push_back({row, cands.size() % 2 == 0});
  // a zero model gives every row the same loss, so nothing is "below" log 2
  const auto zero = membership_attack(GlobalModel{}, cands, std::log(2.0));
  EXPECT_DOUBLE_EQ(zero.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(zero.advantage, 0.0);
  // an infinite threshold calls everything a member
  const auto all = membership_attack(GlobalModel{}, cands, INFINITY);
  EXPECT_DOUBLE_EQ(all.accuracy, 0.5);
  cands.pop_back();
  EXPECT_THROW(membership_attack(GlobalModel{}, cands, 1.0), std::invalid_argument);
}

TEST(FedLearn, AttackSeparatesOverfitMembers) {
  // members have their own loss near zero, non-members sit at the opposite label
  Weights w{};
  w[0] = 5;
  std::vector<Candidate> cands;
  for (int i = 0; i < 10; ++i) {
    LabeledRow m, o;
    m.x[0] = o.x[0] = 1;
    m.y = 1;
    o.y = 0;
    cands.push_back({m, true});
    cands.push_back({o, false});
  }
  const auto r = membership_attack(GlobalModel{0, w}, cands, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.advantage, 0.5);
}

TEST(FedLearn, CheckpointJson) {
  GlobalModel m{3, {}};
  m.weights[4] = -2.5;
  nlohmann::json j = m;
  EXPECT_EQ(j.get<GlobalModel>(), m);
  j["weights"].erase(0);
  EXPECT_THROW(j.get<GlobalModel>(), std::invalid_argument);
}

TEST(FedLearn, ModelFeatureScaling) {
  std::array<double, kFeatures> fv{75, 25, 125, -3, 96, 0, 1.2, 0.5};
  const auto x = model_features(fv);
  EXPECT_DOUBLE_EQ(x[0], 0.0);
  EXPECT_DOUBLE_EQ(x[1], 1.0);  // z clipped to 10
  EXPECT_DOUBLE_EQ(x[3], -0.3);
  EXPECT_NEAR(x[6], 1.0, 1e-12);
}

// Sample standard deviation of the Gaussian mechanism noise.
TEST(FedLearnProperty, DpNoiseScale) {
  const auto dp = DpParams::make(1.0, 1e-5, 1.0);
  std::vector<double> draws;
  for (std::uint64_t s = 0; draws.size() < 10000; ++s) {
    const auto u = dp_noise(clip(update("a", {}, 1), 1.0), dp, s);
    draws.insert(draws.end(), u.delta.begin(), u.delta.end());
  }
  draws.resize(10000);
  EXPECT_NEAR(stats::stddev(draws), 4.8448, 0.05 * 4.8448);
  EXPECT_NEAR(stats::mean(draws), 0.0, 0.2);
}

// Weighted averaging is invariant to update order and to scaling all counts.
TEST(FedLearnProperty, FedAvgOrderAndScaleInvariant) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ModelUpdate> ups;
    for (int i = 0; i < 4; ++i) {
      Weights d;
      for (auto& v : d) v = rng.normal();
      ups.push_back(update("n", d, 1 + rng.below(20)));
    }
    const auto a = fed_avg(ups, GlobalModel{});
    std::reverse(ups.begin(), ups.end());
    for (auto& u : ups) u.sample_count *= 7;
    const auto b = fed_avg(ups, GlobalModel{});
    for (std::size_t j = 0; j < kWeights; ++j) ASSERT_NEAR(a.weights[j], b.weights[j], 1e-12);
  }
}
