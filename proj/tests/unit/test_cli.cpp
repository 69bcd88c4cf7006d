#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
namespace rt = roundbuy::testing;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "roundbuy");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = roundbuy::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(ROUNDBUY_TOOL) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("roundbuy_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Percentage in `row` of the stats table at count column `k`.
double table_cell(const std::string& table, const std::string& row, int k) {
  std::istringstream in(table);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(row, 0) != 0) continue;
    std::istringstream cells(line.substr(line.find('|') + 1));
    std::string cell;
    for (int i = 0; i <= k; ++i) cells >> cell;
    return std::stod(cell) / 100.0;
  }
  ADD_FAILURE() << "no row " << row;
  return -1.0;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"train", "--data", "/nonexistent"}).code, 1);
  const auto dir = scratch("usage");
  const auto r = run({"eval", "--data", dir.string(), "--checkpoint", (dir / "missing.ckpt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.ckpt"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, DataErrorsExitTwo) {
  const auto dir = scratch("data");
  std::ofstream(dir / "train.jsonl") << "{\"match_id\": 3}\n";
  std::ofstream(dir / "dev.jsonl");
  std::ofstream(dir / "test.jsonl");
  const auto r = run({"stats", "--data", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.jsonl:1"), std::string::npos);

  std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
  EXPECT_EQ(run({"eval", "--data", dir.string(), "--checkpoint", (dir / "bad.ckpt").string()}).code, 2);
}

TEST(Cli, GradcheckPassesAndFailsOnImpossibleTolerance) {
  const auto ok = run({"gradcheck"});
  EXPECT_EQ(ok.code, 0);
  const std::regex overall(R"(overall max_rel_error ([0-9.e+-]+))");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(ok.out, m, overall));
  EXPECT_LE(std::stod(m[1]), 1e-4);
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--tolerance", "0"}).code, 3);
}

TEST(Cli, SynthThenStatsTracksTargets) {
  const auto dir = scratch("synth");
  ASSERT_EQ(run({"synth", "--out", (dir / "raw").string(), "--matches", "60"}).code, 0);
  const auto r = run({"stats", "--data", (dir / "raw").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(table_cell(r.out, "Gun", 1), 0.616, 0.05);
  EXPECT_NEAR(table_cell(r.out, "Gun", 0), 0.359, 0.05);
  EXPECT_NEAR(table_cell(r.out, "Grenade", 4), 0.370, 0.05);
  EXPECT_NEAR(table_cell(r.out, "Equipment", 1), 0.503, 0.05);
}

TEST(Cli, FullPipelineAndJsonReport) {
  const auto dir = scratch("pipeline");
  const auto raw = (dir / "raw").string(), split = (dir / "split").string(), run_dir = (dir / "run").string();
  ASSERT_EQ(run({"synth", "--out", raw, "--matches", "10"}).code, 0);
  const auto ingest = run({"ingest", "--input", raw, "--out", split});
  ASSERT_EQ(ingest.code, 0) << ingest.err;
  EXPECT_NE(ingest.out.find("kept 10"), std::string::npos);
  const auto manifest = nlohmann::json::parse(rt::read_file(split + "/manifest.json"));
  EXPECT_EQ(manifest["splits"]["train"].size() + manifest["splits"]["dev"].size() +
                manifest["splits"]["test"].size(),
            10u);

  ASSERT_EQ(run({"pretrain-embed", "--data", split, "--out", (dir / "emb.txt").string(), "--epochs", "5"}).code, 0);
  const auto train = run({"train", "--data", split, "--out", run_dir, "--meta-iterations", "2", "--embeddings",
                          (dir / "emb.txt").string(), "--checkpoint-every", "1"});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(fs::exists(run_dir + "/model.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir + "/ckpt-000001.ckpt"));
  std::istringstream log(rt::read_file(run_dir + "/train.log"));
  int lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 2);

  const auto json_path = (dir / "eval.json").string();
  const auto ev = run({"eval", "--data", split, "--checkpoint", run_dir + "/model.ckpt", "--json", json_path,
                       "--no-gates"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto rep = nlohmann::json::parse(rt::read_file(json_path));
  EXPECT_GE(rep["f1"].get<double>(), 0.0);
  EXPECT_LE(rep["f1"].get<double>(), 1.0);
  EXPECT_EQ(rep["fingerprint"]["gates"], "off");
  EXPECT_EQ(rep["fingerprint"]["shots"], "5");

  const auto base = run({"baseline", "--data", split, "--label", "greedy-rule"});
  ASSERT_EQ(base.code, 0) << base.err;
  EXPECT_NE(base.out.find("greedy-rule"), std::string::npos);

  // Embedding width must agree with the model.
  EXPECT_EQ(run({"train", "--data", split, "--out", run_dir, "--meta-iterations", "1", "--embeddings",
                 (dir / "emb.txt").string(), "--d-emb", "8"})
                .code,
            1);
}

TEST(Cli, ConfigFileDefaultsLoseToFlags) {
  const auto dir = scratch("config");
  const auto cfg = dir / "run.toml";
  std::ofstream(cfg) << "[synth]\nmatches = 3\nseed = 11\n";
  ASSERT_EQ(run({"--config", cfg.string(), "synth", "--out", (dir / "a").string()}).code, 0);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "a"), fs::directory_iterator{}), 3);
  ASSERT_EQ(run({"--config", cfg.string(), "synth", "--out", (dir / "b").string(), "--matches", "2"}).code, 0);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "b"), fs::directory_iterator{}), 2);
}

TEST(CliBinary, ExitCodes) {
  const auto dir = scratch("binary");
  EXPECT_EQ(run_tool("gradcheck"), 0);
  EXPECT_EQ(run_tool("eval --data " + dir.string() + " --checkpoint " + (dir / "none.ckpt").string()), 1);
  fs::create_directories(dir / "raw");
  std::ofstream(dir / "raw" / "m.json") << "{";
  std::ofstream(dir / "train.jsonl") << "[]\n";
  std::ofstream(dir / "dev.jsonl");
  std::ofstream(dir / "test.jsonl");
  EXPECT_EQ(run_tool("baseline --data " + dir.string() + " --split train"), 2);
}
