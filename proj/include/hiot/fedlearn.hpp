#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiot/crypto/paillier.hpp"
#include "hiot/edge.hpp"
#include "hiot/util/rng.hpp"

namespace hiot::fl {

inline constexpr std::size_t kFeatures = edge::kFeatureCount;
inline constexpr std::size_t kWeights = kFeatures + 1;  // bias last
inline constexpr double kL2 = 1e-4;

using Features = std::array<double, kFeatures>;
using Weights = std::array<double, kWeights>;

struct GlobalModel {
  std::uint64_t round = 0;
  Weights weights{};

  bool operator==(const GlobalModel&) const = default;
};

inline void to_json(nlohmann::json& j, const GlobalModel& m) {
  j = nlohmann::json{{"round", m.round}, {"weights", m.weights}};
}

inline void from_json(const nlohmann::json& j, GlobalModel& m) {
  m.round = j.at("round").get<std::uint64_t>();
  auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != kWeights) throw std::invalid_argument("checkpoint needs 9 weights");
  for (double v : w)
    if (!std::isfinite(v)) throw std::invalid_argument("checkpoint weight not finite");
  std::copy(w.begin(), w.end(), m.weights.begin());
}

/// Gaussian-mechanism parameters; sigma is derived, never set directly.
struct DpParams {
  double epsilon = 1.0;
  double delta_p = 1e-5;
  double clip_norm = 1.0;
  double sigma = 0.0;

  static DpParams make(double epsilon, double delta_p, double clip_norm) {
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(delta_p > 0 && delta_p < 1)) throw std::invalid_argument("delta must be in (0, 1)");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be > 0");
    return DpParams{epsilon, delta_p, clip_norm, gaussian_sigma(epsilon, delta_p, clip_norm)};
  }

  /// sigma = C * sqrt(2 ln(1.25 / delta)) / epsilon
  static double gaussian_sigma(double epsilon, double delta_p, double clip_norm) {
    return clip_norm * std::sqrt(2.0 * std::log(1.25 / delta_p)) / epsilon;
  }

  bool operator==(const DpParams&) const = default;
};

/// Naive sequential composition over `rounds` releases.
inline double composed_epsilon(const DpParams& dp, std::uint64_t rounds) {
  return dp.epsilon * static_cast<double>(rounds);
}

struct ModelUpdate {
  std::string node_id;
  std::uint64_t round = 0;
  Weights delta{};
  std::uint64_t sample_count = 0;
  bool clipped = false;
  double clip_norm = 0.0;
  std::optional<DpParams> dp;
  double train_loss = 0.0;  // local loss after training, reported alongside the update
};

struct LabeledRow {
  Features x{};
  int y = 0;
};

struct LocalDataset {
  std::string node_id;
  std::vector<LabeledRow> rows;
};

inline double l2_norm(std::span<const double> v) {
  double acc = 0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(const Weights& w, const Features& x) {
  double z = w[kFeatures];
  for (std::size_t j = 0; j < kFeatures; ++j) z += w[j] * x[j];
  return z;
}

/// Per-row logistic loss, evaluated stably: log(1 + e^z) - y z.
inline double row_loss(const Weights& w, const LabeledRow& r) {
  const double z = logit(w, r.x);
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - r.y * z;
}

/// Mean logistic loss plus (lambda/2)*||w_features||^2. The bias is not regularized.
inline double objective(const Weights& w, std::span<const LabeledRow> rows) {
  double acc = 0;
  for (const auto& r : rows) acc += row_loss(w, r);
  double reg = 0;
  for (std::size_t j = 0; j < kFeatures; ++j) reg += w[j] * w[j];
  return acc / static_cast<double>(rows.size()) + 0.5 * kL2 * reg;
}

inline double mean_loss(const Weights& w, std::span<const LabeledRow> rows) {
  double acc = 0;
  for (const auto& r : rows) acc += row_loss(w, r);
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

inline Weights gradient(const Weights& w, std::span<const LabeledRow> rows) {
  Weights g{};
  for (const auto& r : rows) {
    const double err = sigmoid(logit(w, r.x)) - r.y;
    for (std::size_t j = 0; j < kFeatures; ++j) g[j] += err * r.x[j];
    g[kFeatures] += err;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : g) v *= inv;
  for (std::size_t j = 0; j < kFeatures; ++j) g[j] += kL2 * w[j];
  return g;
}

/// Full-batch gradient descent from the global weights.
inline ModelUpdate local_train(const GlobalModel& model, const LocalDataset& data, std::uint64_t epochs,
                               double lr) {
  if (data.rows.empty()) throw std::invalid_argument("local dataset is empty");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  Weights w = model.weights;
  for (std::uint64_t e = 0; e < epochs; ++e) {
    const auto g = gradient(w, data.rows);
    for (std::size_t j = 0; j < kWeights; ++j) w[j] -= lr * g[j];
  }
  ModelUpdate u;
  u.node_id = data.node_id;
  u.round = model.round;
  for (std::size_t j = 0; j < kWeights; ++j) u.delta[j] = w[j] - model.weights[j];
  u.sample_count = data.rows.size();
  u.train_loss = mean_loss(w, data.rows);
  return u;
}

/// Scales delta by min(1, C / ||delta||).
inline ModelUpdate clip(ModelUpdate u, double clip_norm) {
  if (!(clip_norm > 0)) throw std::invalid_argument("clip norm must be > 0");
  const double norm = l2_norm(u.delta);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto& v : u.delta) v *= scale;
  }
  u.clipped = true;
  u.clip_norm = clip_norm;
  return u;
}

/// Adds N(0, sigma^2) to every coordinate of a clipped update.
inline ModelUpdate dp_noise(ModelUpdate u, const DpParams& dp, std::uint64_t seed) {
  if (!u.clipped) throw std::invalid_argument("dp_noise requires a clipped update");
  if (u.clip_norm != dp.clip_norm) throw std::invalid_argument("update clipped with a different norm");
  Rng rng(seed);
  for (auto& v : u.delta) v += dp.sigma * rng.normal();
  u.dp = dp;
  return u;
}

/// base + sum(n_i * delta_i) / sum(n_i); round advances by one.
inline GlobalModel fed_avg(std::span<const ModelUpdate> updates, const GlobalModel& base) {
  if (updates.empty()) throw std::invalid_argument("fed_avg needs at least one update");
  Weights num{};
  double total = 0;
  for (const auto& u : updates) {
    if (u.round != base.round) throw std::invalid_argument("update round does not match global round");
    if (u.sample_count == 0) throw std::invalid_argument("update has zero samples");
    const double n = static_cast<double>(u.sample_count);
    for (std::size_t j = 0; j < kWeights; ++j) num[j] += n * u.delta[j];
    total += n;
  }
  GlobalModel next{base.round + 1, base.weights};
  for (std::size_t j = 0; j < kWeights; ++j) next.weights[j] += num[j] / total;
  return next;
}

// ---- Paillier secure aggregation -----------------------------------------

inline constexpr double kFixedPointScale = 1e6;

/// Signed fixed-point value mapped into [0, n); the upper half decodes as negative.
inline crypto::BigInt encode_fixed(double v, const crypto::BigInt& n) {
  if (!std::isfinite(v)) throw std::invalid_argument("cannot encode non-finite value");
  const crypto::BigInt limit = n / (2 * static_cast<long>(kFixedPointScale));
  if (crypto::BigInt(std::floor(std::abs(v))) >= limit) throw std::overflow_error("fixed-point overflow");
  const crypto::BigInt mag(std::round(std::abs(v) * kFixedPointScale));
  return v < 0 ? crypto::BigInt((n - mag) % n) : mag;
}

inline double decode_fixed(const crypto::BigInt& m, const crypto::BigInt& n) {
  crypto::BigInt half = n / 2;
  crypto::BigInt signed_m = m > half ? crypto::BigInt(m - n) : m;
  return signed_m.get_d() / kFixedPointScale;
}

struct EncryptedUpdate {
  std::string node_id;
  std::uint64_t round = 0;
  std::uint64_t sample_count = 0;
  std::array<crypto::Ciphertext, kWeights> coords;
};

/// Node side: encrypts sample_count * delta coordinate-wise.
inline EncryptedUpdate encrypt_update(const crypto::PaillierPublicKey& pk, const ModelUpdate& u,
                                      crypto::Drbg& rng) {
  EncryptedUpdate e{u.node_id, u.round, u.sample_count, {}};
  const double n = static_cast<double>(u.sample_count);
  for (std::size_t j = 0; j < kWeights; ++j)
    e.coords[j] = crypto::paillier_enc(pk, encode_fixed(n * u.delta[j], pk.n), rng);
  return e;
}

struct EncryptedSum {
  std::uint64_t round = 0;
  std::uint64_t total_count = 0;
  std::size_t participants = 0;
  std::array<crypto::Ciphertext, kWeights> coords;
};

/// Aggregator side: homomorphic sum only, no decryption capability needed.
inline EncryptedSum aggregate_ciphertexts(const crypto::PaillierPublicKey& pk,
                                          std::span<const EncryptedUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("no encrypted updates");
  EncryptedSum sum;
  sum.round = updates.front().round;
  sum.coords = updates.front().coords;
  sum.total_count = updates.front().sample_count;
  sum.participants = 1;
  for (const auto& c : sum.coords)
    if (c.key_fingerprint != pk.fingerprint) throw crypto::KeyMismatchError("update under a different key");
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (updates[i].round != sum.round) throw std::invalid_argument("encrypted updates from different rounds");
    for (std::size_t j = 0; j < kWeights; ++j)
      sum.coords[j] = crypto::paillier_add(pk, sum.coords[j], updates[i].coords[j]);
    sum.total_count += updates[i].sample_count;
    ++sum.participants;
  }
  return sum;
}

/// Key-holder side: decrypts the summed numerator and divides by the total count.
inline Weights decrypt_average(const crypto::PaillierKey& key, const EncryptedSum& sum) {
  Weights avg{};
  for (std::size_t j = 0; j < kWeights; ++j) {
    const auto m = crypto::paillier_dec(key, sum.coords[j]);
    avg[j] = decode_fixed(m, key.pub.n) / static_cast<double>(sum.total_count);
  }
  return avg;
}

/// Averaged delta from encrypted updates; equals fed_avg's step up to fixed-point rounding.
inline Weights secure_aggregate(const crypto::PaillierKey& key, std::span<const EncryptedUpdate> updates) {
  return decrypt_average(key, aggregate_ciphertexts(key.pub, updates));
}

// ---- membership inference --------------------------------------------------

struct Candidate {
  LabeledRow row;
  bool member = false;
};

struct AttackResult {
  double accuracy = 0;
  double advantage = 0;  // accuracy - 0.5
  double tau = 0;
  std::size_t candidates = 0;
};

/// Loss-threshold attack: predicts "member" iff row loss < tau.
inline AttackResult membership_attack(const GlobalModel& model, std::span<const Candidate> candidates,
                                      double tau) {
  std::size_t members = 0;
  for (const auto& c : candidates) members += c.member ? 1 : 0;
  if (candidates.empty() || 2 * members != candidates.size())
    throw std::invalid_argument("candidate set must be non-empty and balanced");
  std::size_t correct = 0;
  for (const auto& c : candidates) {
    const bool predicted = row_loss(model.weights, c.row) < tau;
    correct += predicted == c.member ? 1 : 0;
  }
  AttackResult r;
  r.candidates = candidates.size();
  r.tau = tau;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(candidates.size());
  r.advantage = r.accuracy - 0.5;
  return r;
}

/// Maps raw edge features to the model's input scale: vitals centred on
/// typical adult values, z-scores clipped to +/-10 and scaled to unit range.
inline Features model_features(const std::array<double, kFeatures>& fv) {
  static constexpr std::array<double, 4> kCentre = {75.0, 125.0, 96.0, 1.0};
  static constexpr std::array<double, 4> kSpread = {15.0, 20.0, 3.0, 0.2};
  Features out{};
  for (std::size_t v = 0; v < 4; ++v) {
    out[2 * v] = (fv[2 * v] - kCentre[v]) / kSpread[v];
    out[2 * v + 1] = std::clamp(fv[2 * v + 1], -10.0, 10.0) / 10.0;
  }
  return out;
}

}  // namespace hiot::fl
