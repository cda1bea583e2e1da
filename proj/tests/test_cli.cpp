#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tfta/scenario.hpp"
#include "tfta/training.hpp"

using namespace tfta;
namespace fs = std::filesystem;

namespace {

const fs::path kData = TFTA_TEST_DATA;
const std::string kCli = TFTA_CLI;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI with stdout/stderr discarded and returns its exit status.
int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tfta_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string scenario() const { return (kData / "small.json").string(); }

  fs::path dir_;
};

}  // namespace

TEST(Scenario, SerializeRoundTrip) {
  const Scenario a = load_scenario(kData / "small.json");
  const Scenario b = parse_scenario(serialize_scenario(a), a.base_dir);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(serialize_scenario(a), serialize_scenario(b));
  EXPECT_EQ(a.threats.size(), 1u);
  EXPECT_EQ(a.ppo.hidden_width, 16);
  EXPECT_EQ(a.training.episodes, 20);
}

TEST(Scenario, DefaultsForMissingKeys) {
  const Scenario s = parse_scenario(R"({"terrain": {"seed": 1, "cols": 11, "rows": 11, "cell": 100, "relief": 10},
                                        "start": {"x": 100, "y": 100, "radius": 0},
                                        "goal": {"x": 900, "y": 900, "radius": 0}})");
  EXPECT_EQ(s.ppo, PpoConfig{});
  EXPECT_EQ(s.reward, RewardConfig{});
  EXPECT_EQ(s.mission, MissionConfig{});
  EXPECT_TRUE(s.threats.empty());
}

TEST(Scenario, RejectsUnknownKeysAndBadValues) {
  const std::string base = slurp(kData / "small.json");
  auto with = [&](const std::string& key, nlohmann::json value) {
    nlohmann::json j = nlohmann::json::parse(base);
    j[key] = std::move(value);
    return j.dump();
  };
  EXPECT_THROW(parse_scenario(with("colour", "red")), ConfigError);
  EXPECT_THROW(parse_scenario(with("ppo", {{"clip_epsilon", 1.5}})), ConfigError);
  EXPECT_THROW(parse_scenario(with("ppo", {{"learning_rate", 0.1}})), ConfigError);
  EXPECT_THROW(parse_scenario(with("reward", {{"h_down", 900}})), ConfigError);
  EXPECT_THROW(parse_scenario(with("training", {{"episodes", -1}})), ConfigError);
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
  EXPECT_THROW(load_scenario(kData / "missing.json"), ConfigError);
}

TEST(Scenario, BuildMissionGeneratesTerrain) {
  const Scenario s = load_scenario(kData / "small.json");
  const Mission m = build_mission(s);
  EXPECT_EQ(m.terrain, generate_terrain(4, 61, 61, 200.0, 800.0));
  EXPECT_EQ(m.field.cruise_speed, 150.0);
  EXPECT_EQ(m.config.goal_radius, 400.0);
}

TEST_F(Cli, GenTerrainIsByteIdenticalPerSeed) {
  const std::string args = " --seed 9 --cols 33 --rows 17 --cell 50 --relief 300 --out ";
  ASSERT_EQ(run("gen-terrain" + args + path("a.dem")), 0);
  ASSERT_EQ(run("gen-terrain" + args + path("b.dem")), 0);
  ASSERT_EQ(run("gen-terrain --seed 10 --cols 33 --rows 17 --cell 50 --relief 300 --out " + path("c.dem")), 0);
  EXPECT_EQ(slurp(path("a.dem")), slurp(path("b.dem")));
  EXPECT_NE(slurp(path("a.dem")), slurp(path("c.dem")));
  EXPECT_EQ(load_dem(path("a.dem")), generate_terrain(9, 33, 17, 50.0, 300.0));
  EXPECT_EQ(fs::file_size(path("a.dem")), 9u + 8u + 24u + 4u * 33u * 17u);
}

TEST_F(Cli, TrainZeroEpisodesWritesFreshModel) {
  ASSERT_EQ(run("train --scenario " + scenario() + " --episodes 0 --out " + path("m.bin") + " --log " +
                path("log.csv")),
            0);
  const ActorCritic m = load_model(path("m.bin"));
  EXPECT_EQ(m.state_dim(), kStateDim);
  EXPECT_EQ(m.log_std, ActionVector::Constant(-0.5));
  EXPECT_EQ(slurp(path("log.csv")), training_log_header() + "\n");
}

TEST_F(Cli, SeededTrainingIsReproducible) {
  const std::string common = "train --scenario " + scenario() + " --seed 5";
  ASSERT_EQ(run(common + " --out " + path("a.bin") + " --log " + path("a.csv")), 0);
  ASSERT_EQ(run(common + " --out " + path("b.bin") + " --log " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
  // Two rounds of ten episodes.
  std::ifstream in(path("a.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST_F(Cli, NoKeypointsRecordsNoEvents) {
  ASSERT_EQ(run("train --scenario " + scenario() + " --no-keypoints --out " + path("m.bin") + " --log " +
                path("log.csv")),
            0);
  std::ifstream in(path("log.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    ASSERT_GE(cols.size(), 7u);
    EXPECT_EQ(cols[5], "0");
    EXPECT_EQ(cols[6], "0");
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST_F(Cli, CheckpointsAtCadence) {
  ASSERT_EQ(run("train --scenario " + scenario() + " --checkpoint-every 10 --out " + path("m.bin")), 0);
  EXPECT_TRUE(fs::exists(path("m.bin.ep10")));
  EXPECT_TRUE(fs::exists(path("m.bin.ep20")));
  EXPECT_EQ(slurp(path("m.bin.ep20")), slurp(path("m.bin")));
}

TEST_F(Cli, PlanWritesReproducibleOutputs) {
  ASSERT_EQ(run("train --scenario " + scenario() + " --episodes 0 --out " + path("m.bin")), 0);
  const std::string common = "plan --scenario " + scenario() + " --model " + path("m.bin") + " --no-timing";
  ASSERT_EQ(run(common + " --trajectory " + path("t1.csv") + " --metrics " + path("m1.json")), 0);
  ASSERT_EQ(run(common + " --trajectory " + path("t2.csv") + " --metrics " + path("m2.json")), 0);
  EXPECT_EQ(slurp(path("t1.csv")), slurp(path("t2.csv")));
  EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));
  const auto metrics = nlohmann::json::parse(slurp(path("m1.json")));
  for (const char* key : {"path_length_m", "max_climb_deg", "smoothness", "latency_p50_ms", "latency_p99_ms",
                          "outcome"})
    EXPECT_TRUE(metrics.contains(key)) << key;
  EXPECT_TRUE(metrics["latency_p99_ms"].is_null());

  // With timing on, latency percentiles are reported.
  ASSERT_EQ(run("plan --scenario " + scenario() + " --model " + path("m.bin") + " --trajectory " + path("t3.csv") +
                " --metrics " + path("m3.json")),
            0);
  const auto timed = nlohmann::json::parse(slurp(path("m3.json")));
  EXPECT_TRUE(timed["latency_p99_ms"].is_number());
  EXPECT_EQ(slurp(path("t1.csv")), slurp(path("t3.csv")));
}

TEST_F(Cli, BenchReportsThreeArms) {
  ASSERT_EQ(run("train --scenario " + scenario() + " --episodes 0 --out " + path("m.bin")), 0);
  const std::string common = "bench --scenario " + scenario() + " --model " + path("m.bin") + " --runs 2";
  ASSERT_EQ(run(common + " --out " + path("b1.json")), 0);
  ASSERT_EQ(run(common + " --out " + path("b2.json")), 0);
  EXPECT_EQ(slurp(path("b1.json")), slurp(path("b2.json")));
  const auto rows = nlohmann::json::parse(slurp(path("b1.json")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["arm"], "rfppo");
  EXPECT_EQ(rows[1]["arm"], "ifds");
  EXPECT_EQ(rows[2]["arm"], "rrt");
  for (const auto& r : rows) {
    EXPECT_EQ(r["runs"], 2);
    EXPECT_EQ(r["outcomes"].size(), 2u);
    for (const char* key : {"success_rate", "path_length_km", "max_climb_deg", "smoothness", "min_threat_distance_m"})
      EXPECT_TRUE(r.contains(key)) << key;
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fly"), 2);
  EXPECT_EQ(run("train --out " + path("m.bin")), 2);
  EXPECT_EQ(run("train --scenario " + path("none.json") + " --out " + path("m.bin")), 2);
  EXPECT_EQ(run("plan --scenario " + scenario() + " --model " + path("none.bin") + " --trajectory " + path("t.csv") +
                " --metrics " + path("m.json")),
            3);
  EXPECT_EQ(run("--help"), 0);
}
