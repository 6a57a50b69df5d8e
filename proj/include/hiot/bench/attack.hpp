#pragma once

#include "hiot/bench/fl_pipeline.hpp"
#include "hiot/bench/report.hpp"

namespace hiot::bench {

inline constexpr std::size_t kDefaultAttackSeeds = 500;

struct AttackPoint {
  std::optional<double> epsilon;  // none = DP off
  std::vector<double> advantages;  // one per seed
  double mean = 0;
  double sd = 0;
  double mean_tau = 0;
};

struct AttackReport {
  std::string scenario_id;
  std::uint64_t base_seed = 0;
  std::size_t seeds = 0;
  std::size_t candidates = 0;  // per seed
  std::vector<AttackPoint> points;

  /// Mean advantage never rises from one grid point to the next.
  bool non_increasing() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].mean > points[i - 1].mean) return false;
    return true;
  }
};

/// Members are every training row; non-members are fresh windows from the
/// same patients with the same label noise, one per member.
inline std::vector<fl::Candidate> attack_candidates(const ScenarioConfig& cfg, const World& w) {
  std::vector<fl::Candidate> out;
  for (const auto& d : w.fl_data)
    for (const auto& r : d.rows) out.push_back({r, true});
  const auto seed = cfg.seed_value();
  for (std::size_t i = 0; i < w.profiles.size(); ++i) {
    auto rows = feature_rows(w.profiles[i], cfg.fl.rows_per_patient, cfg.edge.window, Rng::derive(seed, 6000 + i),
                             cfg.fl.label_noise);
    for (auto& r : rows) out.push_back({r, false});
  }
  return out;
}

/// Runs the training rounds for every (seed, epsilon) pair and attacks the
/// final model with tau = mean training loss the nodes reported. Seeds are
/// base, base+1, ...; each seed shares data, keys and candidates across the
/// grid so points differ only in the noise scale.
inline AttackReport attack_eval(const ScenarioConfig& cfg, const std::vector<std::optional<double>>& grid,
                                std::size_t seeds = kDefaultAttackSeeds) {
  if (grid.empty()) throw std::invalid_argument("epsilon grid is empty");
  if (seeds == 0) throw std::invalid_argument("need at least one seed");
  for (const auto& e : grid)
    if (e && !(*e > 0)) throw std::invalid_argument("epsilon must be positive");
  AttackReport rep;
  rep.scenario_id = cfg.id;
  rep.base_seed = cfg.seed_value();
  rep.seeds = seeds;
  rep.points.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) rep.points[g].epsilon = grid[g];

  for (std::size_t s = 0; s < seeds; ++s) {
    auto c = cfg;
    c.seed = rep.base_seed + s;
    c.fl.enabled = true;
    // only the training data matters here; skip the telemetry streams
    auto wc = c;
    wc.duration_ms = 1;
    wc.workload.access_rate_per_s = 0;
    const auto world = build_world(wc);
    const auto key = fl_keygen(c);
    const auto cands = attack_candidates(c, world);
    rep.candidates = cands.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      c.fl.epsilon = grid[g];
      const auto outcome = run_fl_rounds(c, world, key);
      const auto res = fl::membership_attack(outcome.model, cands, outcome.mean_reported_loss);
      rep.points[g].advantages.push_back(res.advantage);
      rep.points[g].mean_tau += outcome.mean_reported_loss / static_cast<double>(seeds);
    }
  }
  for (auto& p : rep.points) {
    p.mean = stats::mean(p.advantages);
    p.sd = stats::stddev(p.advantages);
  }
  return rep;
}

inline std::string epsilon_label(const std::optional<double>& e) { return e ? fmt(*e, 2) : std::string("off"); }

/// Parses "off,8,1,0.5".
inline std::vector<std::optional<double>> parse_epsilon_grid(std::string_view text) {
  std::vector<std::optional<double>> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const std::string item(text.substr(pos, comma - pos));
    if (item == "off" || item == "inf") {
      out.emplace_back(std::nullopt);
    } else {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("bad epsilon '" + item + "'");
      }
      if (used != item.size() || !(v > 0) || !std::isfinite(v)) throw std::invalid_argument("bad epsilon '" + item + "'");
      out.emplace_back(v);
    }
    pos = comma + 1;
  }
  return out;
}

inline nlohmann::json to_json(const AttackReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"epsilon", p.epsilon ? nlohmann::json(*p.epsilon) : nlohmann::json("off")},
                   {"mean_advantage", p.mean},
                   {"sd_advantage", p.sd},
                   {"mean_tau", p.mean_tau},
                   {"advantages", p.advantages}});
  return {{"scenario_id", r.scenario_id}, {"base_seed", r.base_seed}, {"seeds", r.seeds},
          {"candidates", r.candidates},   {"points", pts},              {"non_increasing", r.non_increasing()}};
}

inline std::string to_markdown(const AttackReport& r) {
  std::ostringstream os;
  os << "# Membership inference, " << r.scenario_id << " (" << r.seeds << " seeds from " << r.base_seed << ", "
     << r.candidates << " candidates each)\n\n";
  os << "| epsilon | mean advantage | sd | mean tau |\n|---|---|---|---|\n";
  for (const auto& p : r.points)
    os << "| " << epsilon_label(p.epsilon) << " | " << fmt(p.mean, 4) << " | " << fmt(p.sd, 4) << " | "
       << fmt(p.mean_tau, 4) << " |\n";
  os << "\nnon-increasing along the grid: " << (r.non_increasing() ? "yes" : "NO") << "\n";
  return os.str();
}

inline std::string to_csv(const AttackReport& r) {
  std::ostringstream os;
  os << "epsilon,mean_advantage,sd_advantage,mean_tau,seeds\n";
  for (const auto& p : r.points)
    os << epsilon_label(p.epsilon) << ',' << fmt(p.mean, 6) << ',' << fmt(p.sd, 6) << ',' << fmt(p.mean_tau, 6) << ','
       << r.seeds << '\n';
  return os.str();
}

}  // namespace hiot::bench
