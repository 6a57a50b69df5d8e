#pragma once

#include "hiot/bench/contract_engine.hpp"

namespace hiot::bench {

inline crypto::PaillierKey fl_keygen(const ScenarioConfig& cfg) {
  return crypto::paillier_keygen(cfg.fl.paillier_bits, Rng::derive(cfg.seed_value(), 77));
}

/// Hospital-side round: train, clip, optionally add DP noise, encrypt.
/// Seeds depend only on (scenario seed, round, hospital).
inline ModelPayload fl_client_step(const ScenarioConfig& cfg, const fl::LocalDataset& data,
                                   const fl::GlobalModel& model, std::size_t h,
                                   const crypto::PaillierPublicKey& pk) {
  const auto seed = cfg.seed_value();
  auto u = fl::local_train(model, data, cfg.fl.epochs, cfg.fl.lr);
  u = fl::clip(std::move(u), cfg.fl.clip_norm);
  if (cfg.fl.epsilon) {
    const auto dp = fl::DpParams::make(*cfg.fl.epsilon, cfg.fl.delta, cfg.fl.clip_norm);
    u = fl::dp_noise(std::move(u), dp, Rng::derive(seed, 7000 + model.round * 64 + h));
  }
  crypto::Drbg drbg("fl-enc", Rng::derive(seed, 9000 + model.round * 64 + h));
  return ModelPayload{fl::encrypt_update(pk, u, drbg), u.train_loss};
}

/// Aggregator side: homomorphic sum, one decryption, step the global model.
inline fl::GlobalModel fl_server_step(const fl::GlobalModel& global, const crypto::PaillierKey& key,
                                      std::span<const fl::EncryptedUpdate> updates) {
  const auto avg = fl::secure_aggregate(key, updates);
  fl::GlobalModel next{global.round + 1, global.weights};
  for (std::size_t j = 0; j < fl::kWeights; ++j) next.weights[j] += avg[j];
  return next;
}

/// Hospitals with at least one training row.
inline std::vector<std::size_t> fl_participants(const World& w) {
  std::vector<std::size_t> out;
  for (std::size_t h = 0; h < w.fl_data.size(); ++h)
    if (!w.fl_data[h].rows.empty()) out.push_back(h);
  return out;
}

struct FlOutcome {
  fl::GlobalModel model;
  double mean_reported_loss = 0;  // last round, averaged over participants
};

/// The scenario's training rounds without the network around them. Since
/// the aggregator waits for every participant and the ciphertext sum is
/// exact, the result is bit-identical to the simulated run's final model.
inline FlOutcome run_fl_rounds(const ScenarioConfig& cfg, const World& w, const crypto::PaillierKey& key) {
  FlOutcome out;
  const auto parts = fl_participants(w);
  if (parts.empty()) return out;
  for (std::size_t r = 0; r < cfg.fl.rounds; ++r) {
    std::vector<fl::EncryptedUpdate> ups;
    std::vector<double> losses;
    for (auto h : parts) {
      auto p = fl_client_step(cfg, w.fl_data[h], out.model, h, key.pub);
      ups.push_back(std::move(p.update));
      losses.push_back(p.train_loss);
    }
    out.model = fl_server_step(out.model, key, ups);
    out.mean_reported_loss = stats::mean(losses);
  }
  return out;
}

}  // namespace hiot::bench
