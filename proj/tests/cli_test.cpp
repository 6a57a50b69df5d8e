#include <gtest/gtest.h>

#include "hiot/ledger/codec.hpp"
#include "hiot/telemetry.hpp"
#include "support/cli.hpp"

using namespace hiot::testing;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch_dir("cli"));
    write_small_configs(*dir_);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static std::string cfg(const char* name) { return (*dir_ / name).string(); }
  static fs::path dir() { return *dir_; }

  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("run /no/such/file.json").code, 2);
  EXPECT_EQ(run_cli("run " + cfg("proposed.json") + " --format xml").code, 2);
  EXPECT_EQ(run_cli("throughput " + cfg("proposed.json")).code, 2);  // --offered is required
  EXPECT_EQ(run_cli("throughput " + cfg("proposed.json") + " --offered -3").code, 2);
  EXPECT_EQ(run_cli("attack-eval " + cfg("attack.json") + " --seeds 5").code, 2);
  EXPECT_EQ(run_cli("attack-eval " + cfg("attack.json") + " --eps 1,-2 --seeds 20").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST_F(Cli, ConfigErrors) {
  auto j = nlohmann::json::parse(read_text(cfg("proposed.json")));
  j["mystery"] = 1;
  write_text(dir() / "bad.json", j.dump());
  EXPECT_EQ(run_cli("run " + cfg("bad.json")).code, 2);
  write_text(dir() / "broken.json", "{\"id\": ");
  EXPECT_EQ(run_cli("run " + cfg("broken.json")).code, 2);

  j = nlohmann::json::parse(read_text(cfg("cloud.json")));
  j["patients"] = 3;
  write_text(dir() / "other_workload.json", j.dump());
  EXPECT_EQ(run_cli("compare " + cfg("proposed.json") + " " + cfg("other_workload.json")).code, 2);
}

TEST_F(Cli, RunFormats) {
  const auto md = run_cli("run " + cfg("proposed.json"));
  EXPECT_EQ(md.code, 0);
  EXPECT_EQ(md.out.rfind("#", 0), 0u);
  const auto js = run_cli("run " + cfg("proposed.json") + " --format json");
  EXPECT_EQ(js.code, 0);
  const auto parsed = nlohmann::json::parse(js.out);
  EXPECT_EQ(parsed["scenario_id"], "proposed");
  const auto csv = run_cli("run " + cfg("proposed.json") + " --format csv");
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 2);

  const auto seeded = run_cli("run " + cfg("proposed.json") + " --format json --seed 7");
  EXPECT_EQ(nlohmann::json::parse(seeded.out)["seed"], 7);
}

TEST_F(Cli, GenerateWritesWorkloadFiles) {
  const auto out = scratch_dir("gen");
  const auto r = run_cli("generate --config " + cfg("proposed.json") + " --out-dir " + out.string());
  EXPECT_EQ(r.code, 0);
  const auto files = read_tree(out);
  for (const auto* f : {"workload.md", "workload.csv", "workload.json", "vitals.csv", "fl_rows.csv"})
    EXPECT_TRUE(files.contains(f)) << f;
  const auto& vitals = files.at("vitals.csv");
  EXPECT_EQ(vitals.substr(0, vitals.find('\n')), hiot::telemetry::kCsvHeader);
  EXPECT_EQ(run_cli("generate --seed 3 --format json").code, 0);
  fs::remove_all(out);
}

TEST_F(Cli, VerifyChainDetectsTampering) {
  const auto chain = dir() / "chain.bin";
  ASSERT_EQ(run_cli("run " + cfg("proposed.json") + " --chain-out " + chain.string()).code, 0);
  auto ok = run_cli("verify-chain " + chain.string() + " --format json");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(nlohmann::json::parse(ok.out)["ok"], true);

  auto bytes = read_text(chain);
  const auto blocks = hiot::ledger::import_chain(hiot::to_bytes(bytes)).blocks;
  ASSERT_GT(blocks.size(), 3u);
  // flip one byte in the middle of block 2's record
  std::size_t at = hiot::ledger::kChainMagic.size() + 8;
  for (std::size_t i = 0; i < 2; ++i) at += 4 + blocks[i].encode(hiot::crypto::GroupParams::standard()).size();
  at += 4 + blocks[2].encode(hiot::crypto::GroupParams::standard()).size() / 2;
  bytes[at] ^= 0x40;
  write_text(dir() / "tampered.bin", bytes);
  const auto bad = run_cli("verify-chain " + (dir() / "tampered.bin").string() + " --format json");
  EXPECT_EQ(bad.code, 1);
  const auto j = nlohmann::json::parse(bad.out);
  EXPECT_EQ(j["ok"], false);
  EXPECT_EQ(j["first_invalid"], 2);

  write_text(dir() / "junk.bin", "not a chain at all");
  EXPECT_EQ(run_cli("verify-chain " + (dir() / "junk.bin").string()).code, 1);

  EXPECT_EQ(run_cli("run " + cfg("cloud.json") + " --chain-out " + (dir() / "x.bin").string()).code, 2);
}

TEST_F(Cli, CalibrateWritesConfigs) {
  const auto out = scratch_dir("cal");
  const auto r = run_cli("calibrate " + cfg("targets.json") + " --format csv --configs-out " + out.string());
  EXPECT_EQ(r.code, 0);
  for (const auto* name : {"proposed", "cloud", "pow_chain"}) {
    ASSERT_TRUE(fs::exists(out / (std::string(name) + ".json"))) << name;
    EXPECT_EQ(run_cli("run " + (out / (std::string(name) + ".json")).string()).code, 0) << name;
  }
  fs::remove_all(out);
}

// Every subcommand produces byte-identical output and files on a rerun.
TEST_F(Cli, EveryCommandIsDeterministic) {
  const auto chain = dir() / "det_chain.bin";
  ASSERT_EQ(run_cli("run " + cfg("proposed.json") + " --chain-out " + chain.string()).code, 0);
  for (const auto& c : cli_cases(dir(), chain, 20)) {
    const auto r = check_deterministic(c.args, c.name);
    EXPECT_TRUE(r.identical) << c.name << ": " << r.detail;
    EXPECT_EQ(r.code, 0) << c.name;
  }
}
