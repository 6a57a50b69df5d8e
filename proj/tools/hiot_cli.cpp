// hiot: command-line front end for the simulator and its evaluation harnesses.
//
// Exit codes: 0 ok, 1 an invariant or check failed, 2 bad usage or config.

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hiot/bench/attack.hpp"
#include "hiot/bench/calibrate.hpp"
#include "hiot/bench/compare.hpp"
#include "hiot/ledger/codec.hpp"

namespace fs = std::filesystem;
using namespace hiot;
using namespace hiot::bench;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  auto j = [&] {
    try {
      return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": not valid JSON: " + e.what());
    }
  }();
  auto c = config_from_json(j);
  if (seed) c.seed = *seed;
  validate(c);
  return c;
}

/// Prints one rendering to stdout and, with an output directory, writes all three.
struct Emitter {
  std::string format = "md";
  std::string out_dir;

  void add(CLI::App* sub, const std::string& stem) {
    sub->add_option("--format", format, "stdout format")->check(CLI::IsMember({"md", "csv", "json"}));
    sub->add_option("--out-dir", out_dir, "also write " + stem + ".md, .csv and .json here");
  }

  template <class R>
  void emit(const R& r, const std::string& stem = "report") const {
    const std::string md = to_markdown(r), csv = to_csv(r), js = to_json(r).dump(2) + "\n";
    std::cout << (format == "md" ? md : format == "csv" ? csv : js);
    if (out_dir.empty()) return;
    write_file(fs::path(out_dir) / (stem + ".md"), md);
    write_file(fs::path(out_dir) / (stem + ".csv"), csv);
    write_file(fs::path(out_dir) / (stem + ".json"), js);
  }
};

// ---- generate -----------------------------------------------------------------

struct GenerateSummary {
  ScenarioConfig cfg;
  const World* world;
};

std::string to_markdown(const GenerateSummary& g) {
  std::ostringstream os;
  std::size_t samples = 0, rows = 0;
  for (const auto& s : g.world->streams) samples += s.size();
  for (const auto& d : g.world->fl_data) rows += d.rows.size();
  os << "# Synthetic workload (seed " << g.cfg.seed_value() << ", workload " << workload_fingerprint(g.cfg) << ")\n\n";
  os << "| item | count |\n|---|---|\n";
  os << "| patients | " << g.world->profiles.size() << " |\n| vitals samples | " << samples << " |\n";
  os << "| anomaly episodes | " << g.world->episodes.size() << " |\n| access requests | " << g.world->access.size()
     << " |\n";
  os << "| consent changes | " << g.world->consent.size() << " |\n| FL training rows | " << rows << " |\n";
  return os.str();
}

std::string episodes_csv(const World& w) {
  std::ostringstream os;
  os << "patient_id,kind,start_ms,duration_ms,magnitude,onset_ms\n";
  for (const auto& e : w.episodes)
    os << w.profiles[e.patient].patient_id << ',' << telemetry::to_string(e.injection.kind) << ','
       << e.injection.start_ms << ',' << e.injection.duration_ms << ',' << fmt(e.injection.magnitude, 4) << ','
       << e.onset_ms << '\n';
  return os.str();
}

std::string to_csv(const GenerateSummary& g) { return episodes_csv(*g.world); }

json to_json(const GenerateSummary& g) {
  json eps = json::array();
  for (const auto& e : g.world->episodes)
    eps.push_back({{"patient", g.world->profiles[e.patient].patient_id},
                   {"kind", telemetry::to_string(e.injection.kind)},
                   {"start_ms", e.injection.start_ms},
                   {"duration_ms", e.injection.duration_ms},
                   {"magnitude", e.injection.magnitude},
                   {"onset_ms", e.onset_ms}});
  json access = json::array();
  for (const auto& a : g.world->access) access.push_back({{"t_ms", a.t_ms}, {"principal", a.principal}, {"patient", a.patient}});
  json consent = json::array();
  for (const auto& c : g.world->consent) {
    const auto& ch = c.change;
    json grantee = std::holds_alternative<std::string>(ch.grantee)
                       ? json(std::get<std::string>(ch.grantee))
                       : contracts::predicate_to_json(std::get<contracts::Predicate>(ch.grantee));
    consent.push_back({{"t_ms", c.t_ms},
                       {"signer", c.signer},
                       {"op", ch.op == contracts::ConsentOp::grant ? "grant" : "revoke"},
                       {"patient", ch.patient_id},
                       {"grantee", grantee},
                       {"scope", ch.scope}});
  }
  return {{"seed", g.cfg.seed_value()}, {"workload", workload_fingerprint(g.cfg)}, {"episodes", eps},
          {"access", access},           {"consent", consent}};
}

int cmd_generate(const std::string& config, std::optional<std::uint64_t> seed, const Emitter& em) {
  ScenarioConfig c;
  if (!config.empty()) {
    c = load(config, seed);
  } else {
    c.seed = seed.value_or(42);
    validate(c);
  }
  const auto world = build_world(c);
  em.emit(GenerateSummary{c, &world}, "workload");
  if (!em.out_dir.empty()) {
    std::ostringstream vit;
    vit << telemetry::kCsvHeader << '\n';
    for (const auto& s : world.streams) telemetry::write_csv(vit, s, false);
    write_file(fs::path(em.out_dir) / "vitals.csv", vit.str());
    std::ostringstream fl;
    fl << "hospital,x0,x1,x2,x3,x4,x5,x6,x7,y\n";
    for (const auto& d : world.fl_data)
      for (const auto& r : d.rows) {
        fl << d.node_id;
        for (double v : r.x) fl << ',' << fmt(v, 9);
        fl << ',' << r.y << '\n';
      }
    write_file(fs::path(em.out_dir) / "fl_rows.csv", fl.str());
  }
  return 0;
}

// ---- run / throughput ---------------------------------------------------------

int report_exit(const MetricsReport& r) {
  for (const auto& f : r.invariant_failures) std::cerr << "invariant violated: " << f << "\n";
  return r.ok() ? 0 : kExitFailed;
}

struct RunArgs {
  std::string chain_out, decisions_out, trace_out;
};

int cmd_run(const ScenarioConfig& c, const RunArgs& a, const Emitter& em, std::optional<double> offered) {
  RunOptions opt;
  opt.trace = !a.trace_out.empty();
  opt.offered_tps = offered;
  const auto out = run_full(c, opt);
  em.emit(out.report);
  if (!a.chain_out.empty()) {
    if (out.chain.empty()) throw UsageError("the cloud baseline has no chain to write");
    const auto bytes = ledger::export_chain(out.chain, crypto::GroupParams::standard());
    write_file(a.chain_out, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  if (!a.decisions_out.empty()) write_file(a.decisions_out, out.decisions_csv);
  if (opt.trace) {
    std::string t;
    for (const auto& line : out.trace) t += line + "\n";
    write_file(a.trace_out, t);
  }
  return report_exit(out.report);
}

// ---- verify-chain -------------------------------------------------------------

struct ChainCheck {
  std::string file;
  std::size_t blocks = 0;
  ledger::VerifyResult result;
};

std::string to_markdown(const ChainCheck& c) {
  std::ostringstream os;
  os << "# Chain " << c.file << "\n\n";
  if (c.result.ok)
    os << "valid, " << c.blocks << " blocks\n";
  else
    os << "INVALID at block " << c.result.first_invalid << " (" << ledger::to_string(c.result.rule) << "), "
       << c.blocks << " blocks parsed\n";
  return os.str();
}
std::string to_csv(const ChainCheck& c) {
  return "file,blocks,ok,first_invalid,rule\n" + c.file + "," + std::to_string(c.blocks) + "," +
         (c.result.ok ? "true" : "false") + "," + (c.result.ok ? "" : std::to_string(c.result.first_invalid)) + "," +
         ledger::to_string(c.result.rule) + "\n";
}
json to_json(const ChainCheck& c) {
  json j{{"file", c.file}, {"blocks", c.blocks}, {"ok", c.result.ok}, {"rule", ledger::to_string(c.result.rule)}};
  j["first_invalid"] = c.result.ok ? json(nullptr) : json(c.result.first_invalid);
  return j;
}

int cmd_verify(const std::string& file, const Emitter& em) {
  const auto data = read_file(file);
  ChainCheck c{fs::path(file).filename().string(), 0, {}};
  try {
    c.blocks = ledger::import_chain(to_bytes(data)).blocks.size();
    c.result = ledger::verify_export(to_bytes(data));
  } catch (const DecodeError& e) {
    c.result = {false, 0, ledger::Rule::genesis};
  }
  em.emit(c, "verify");
  return c.result.ok ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Healthcare IoT edge/ledger/federated-learning simulator"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  auto with_seed = [&](CLI::App* s) { s->add_option("--seed", seed, "override the config's seed"); };

  Emitter em_gen, em_run, em_cmp, em_tp, em_atk, em_ver, em_cal;
  std::string gen_config, run_config, tp_config, atk_config, chain_file, targets_file;
  std::vector<std::string> cmp_configs;
  RunArgs run_args, tp_args;
  double offered = 0;
  std::string eps_grid = "off,8,1,0.5";
  std::size_t atk_seeds = kDefaultAttackSeeds;
  std::string configs_out;

  auto* gen = app.add_subcommand("generate", "dump the synthetic workload (vitals, episodes, FL rows)");
  gen->add_option("--config", gen_config, "scenario config; defaults are used without one");
  with_seed(gen);
  em_gen.add(gen, "workload");

  auto* run = app.add_subcommand("run", "simulate one scenario");
  run->add_option("config", run_config)->required()->check(CLI::ExistingFile);
  run->add_option("--chain-out", run_args.chain_out, "write the committed chain (binary export)");
  run->add_option("--decisions-out", run_args.decisions_out, "write the access decision log (CSV)");
  run->add_option("--trace", run_args.trace_out, "write the event trace");
  with_seed(run);
  em_run.add(run, "report");

  auto* cmp = app.add_subcommand("compare", "run scenarios over one workload and compare them");
  cmp->add_option("configs", cmp_configs)->required()->check(CLI::ExistingFile);
  with_seed(cmp);
  em_cmp.add(cmp, "compare");

  auto* tp = app.add_subcommand("throughput", "sustained commit rate at a fixed offered load");
  tp->add_option("config", tp_config)->required()->check(CLI::ExistingFile);
  tp->add_option("--offered", offered, "offered load in tx/s")->required()->check(CLI::PositiveNumber);
  tp->add_option("--chain-out", tp_args.chain_out, "write the committed chain (binary export)");
  with_seed(tp);
  em_tp.add(tp, "report");

  auto* atk = app.add_subcommand("attack-eval", "membership inference advantage per DP epsilon");
  atk->add_option("config", atk_config)->required()->check(CLI::ExistingFile);
  atk->add_option("--eps", eps_grid, "comma-separated grid; 'off' disables DP")->capture_default_str();
  atk->add_option("--seeds", atk_seeds, "seeds per grid point")->capture_default_str()->check(CLI::Range(20, 100000));
  with_seed(atk);
  em_atk.add(atk, "attack");

  auto* ver = app.add_subcommand("verify-chain", "replay an exported chain from genesis");
  ver->add_option("file", chain_file)->required()->check(CLI::ExistingFile);
  em_ver.add(ver, "verify");

  auto* cal = app.add_subcommand("calibrate", "grid-search the timing knobs against latency/TPS targets");
  cal->add_option("targets", targets_file)->required()->check(CLI::ExistingFile);
  cal->add_option("--configs-out", configs_out, "write proposed.json, cloud.json and pow_chain.json here");
  em_cal.add(cal, "calibration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_config, seed, em_gen);
    if (*run) return cmd_run(load(run_config, seed), run_args, em_run, std::nullopt);
    if (*tp) return cmd_run(load(tp_config, seed), tp_args, em_tp, offered);
    if (*cmp) {
      std::vector<ScenarioConfig> cfgs;
      for (const auto& p : cmp_configs) cfgs.push_back(load(p, seed));
      const auto c = compare(cfgs);
      em_cmp.emit(c, "compare");
      for (const auto& r : c.rows) {
        for (const auto& f : r.report.invariant_failures) std::cerr << r.report.scenario_id << ": " << f << "\n";
        for (const auto& f : r.probe_failures) std::cerr << r.report.scenario_id << " (probe): " << f << "\n";
      }
      return c.ok() ? 0 : kExitFailed;
    }
    if (*atk) {
      const auto rep = attack_eval(load(atk_config, seed), parse_epsilon_grid(eps_grid), atk_seeds);
      em_atk.emit(rep, "attack");
      if (!rep.non_increasing()) std::cerr << "advantage rises along the epsilon grid\n";
      return rep.non_increasing() ? 0 : kExitFailed;
    }
    if (*ver) return cmd_verify(chain_file, em_ver);
    if (*cal) {
      json j;
      try {
        j = json::parse(read_file(targets_file));
      } catch (const json::parse_error& e) {
        throw ConfigError(targets_file + ": not valid JSON: " + e.what());
      }
      const auto c = calibrate(targets_from_json(j));
      em_cal.emit(c, "calibration");
      if (!configs_out.empty())
        for (const auto* s : {&c.proposed, &c.cloud, &c.pow_chain})
          write_file(fs::path(configs_out) / (s->id + ".json"), config_to_json(*s).dump(2) + "\n");
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
