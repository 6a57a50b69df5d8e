#pragma once

// Helpers for driving the built CLI from tests: run a command line, collect
// what it wrote, and produce cut-down configs that run in a few seconds.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hiot::testing {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
};

/// Runs the CLI with `args` (already shell-quoted), stderr discarded.
inline CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(HIOT_CLI) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Every regular file under dir, keyed by relative path.
inline std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return out;
}

/// Fresh, empty scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("hiot-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

inline nlohmann::json shipped_json(const std::string& name) {
  return nlohmann::json::parse(read_text(fs::path(HIOT_SOURCE_DIR) / "configs" / (name + ".json")));
}

/// Writes small variants of the shipped configs plus a tiny calibration
/// target file into dir.
inline void write_small_configs(const fs::path& dir) {
  for (const auto* name : {"proposed", "cloud", "pow_chain"}) {
    auto j = shipped_json(name);
    j["duration_ms"] = 15000;
    j["patients"] = 4;
    j["hospitals"] = 2;
    j["validators"] = 2;
    j["fl"]["rounds"] = 1;
    j["fl"]["paillier_bits"] = 128;
    j["probe"]["warmup_ms"] = 2000;
    j["probe"]["window_ms"] = 5000;
    write_text(dir / (std::string(name) + ".json"), j.dump(2));
  }
  write_text(dir / "attack.json", shipped_json("attack").dump(2));

  auto t = shipped_json("targets");
  t["base"]["duration_ms"] = 15000;
  t["base"]["patients"] = 4;
  t["base"]["hospitals"] = 2;
  t["base"]["validators"] = 2;
  t["base"]["probe"] = {{"warmup_ms", 2000}, {"window_ms", 5000}, {"offered_tps", 150}};
  t["seeds"] = 1;
  t["proposed"]["slot_ms"] = {50, 60};
  t["proposed"]["hospital_hospital_ms"] = {35, 40};
  t["cloud"]["wan_scale"] = {1.0, 1.3};
  t["cloud"]["service_tps"] = {50};
  t["pow_chain"]["difficulty"] = {3072, 3584};
  write_text(dir / "targets.json", t.dump(2));
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) s.replace(at, from.size(), to);
  return s;
}

struct DeterminismCheck {
  bool identical = false;
  int code = -1;
  std::string detail;  // first difference, if any
};

/// Runs `args` twice, with {out} replaced by a fresh directory each time, and
/// compares exit code, stdout and every file written.
inline DeterminismCheck check_deterministic(const std::string& args, const std::string& tag) {
  const auto a = scratch_dir(tag + "-a"), b = scratch_dir(tag + "-b");
  const auto ra = run_cli(replace_all(args, "{out}", a.string()));
  const auto rb = run_cli(replace_all(args, "{out}", b.string()));
  DeterminismCheck c;
  c.code = ra.code;
  const auto ta = read_tree(a), tb = read_tree(b);
  if (ra.code != rb.code) c.detail = "exit codes differ";
  else if (ra.out != rb.out) c.detail = "stdout differs";
  else if (ta != tb) c.detail = "written files differ";
  else if (ra.out.empty()) c.detail = "no output";
  c.identical = c.detail.empty();
  fs::remove_all(a);
  fs::remove_all(b);
  return c;
}

struct CliCase {
  std::string name;
  std::string args;
};

/// One invocation per subcommand, each writing all three formats to {out}.
/// `chain` must be an existing chain export for verify-chain.
inline std::vector<CliCase> cli_cases(const fs::path& cfg, const fs::path& chain, std::size_t attack_seeds) {
  const auto c = [&](const char* f) { return (cfg / f).string(); };
  return {
      {"generate", "generate --config " + c("proposed.json") + " --format json --out-dir {out}"},
      {"run", "run " + c("proposed.json") + " --format json --out-dir {out} --chain-out {out}/chain.bin"
              " --decisions-out {out}/decisions.csv --trace {out}/trace.jsonl"},
      {"compare", "compare " + c("proposed.json") + " " + c("cloud.json") + " " + c("pow_chain.json") +
                      " --format md --out-dir {out}"},
      {"throughput", "throughput " + c("pow_chain.json") + " --offered 40 --format csv --out-dir {out}"},
      {"attack-eval", "attack-eval " + c("attack.json") + " --eps off,8,1,0.5 --seeds " + std::to_string(attack_seeds) +
                          " --format json --out-dir {out}"},
      {"verify-chain", "verify-chain " + chain.string() + " --format json --out-dir {out}"},
      {"calibrate", "calibrate " + c("targets.json") + " --format md --out-dir {out} --configs-out {out}"},
  };
}

}  // namespace hiot::testing
