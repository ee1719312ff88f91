/*
 * Copyright 2026 The flsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "commands.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flsim/paillier.h"

namespace flsim::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> Rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("flsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path WriteConfig(const std::string& body, const std::string& name = "exp.toml") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  // Paper scenario, small data, small keys.
  std::string SmallConfig(const std::string& extra = "") const {
    return "[experiment]\nstrategy = \"bfl\"\nrounds = 4\nseed = 42\n"
           "[data]\nsamples = 1200\n"
           "[he]\nkey_bits = 256\n"
           "[strategy]\nfedbuff_k = 2\n" +
           extra;
  }

  fs::path dir_;
};

TEST_F(CliTest, KeygenWritesUsableKeyFiles) {
  const std::string prefix = (dir_ / "authority").string();
  Result r = Cli({"keygen", "--bits", "512", "--out", prefix, "--seed", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const he::PublicKey pk = he::PublicKeyFromJson(Slurp(prefix + ".pub.json"));
  const he::SecretKey sk = he::SecretKeyFromJson(Slurp(prefix + ".sec.json"));
  EXPECT_GE(pk.bits(), 511u);
  he::RandomSource rng = he::RandomSource::Seeded(1);
  EXPECT_EQ(he::Decrypt(sk, he::Encrypt(pk, 31337, rng)), 31337);
}

TEST_F(CliTest, KeygenErrors) {
  Result tiny = Cli({"keygen", "--bits", "64", "--out", (dir_ / "k").string()});
  EXPECT_EQ(tiny.code, kExitConfig);
  EXPECT_NE(tiny.err.find("key_bits"), std::string::npos) << tiny.err;

  std::ofstream(dir_ / "file") << "x";
  Result unwritable = Cli({"keygen", "--bits", "128", "--out", (dir_ / "file" / "k").string()});
  EXPECT_EQ(unwritable.code, kExitFailure);
  EXPECT_FALSE(unwritable.err.empty());
}

TEST_F(CliTest, UsageErrorsExitWithConfigCode) {
  EXPECT_EQ(Cli({}).code, kExitConfig);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(Cli({"run"}).code, kExitConfig);
  EXPECT_EQ(Cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, RunWritesCsvAndSummary) {
  const fs::path cfg = WriteConfig(SmallConfig());
  const fs::path csv = dir_ / "metrics.csv";
  Result r = Cli({"run", "--config", cfg.string(), "--out", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = Rows(Slurp(csv));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"round", "sim_time_ms", "val_accuracy",
                                               "participants"}));
  EXPECT_EQ(rows[1][3], "0;1;2;3;4");
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "0;1;2");
  const std::string summary = Slurp(dir_ / "metrics.summary.json");
  EXPECT_NE(summary.find("\"strategy\": \"bfl\""), std::string::npos) << summary;
  EXPECT_NE(summary.find("final_test_accuracy"), std::string::npos);
}

TEST_F(CliTest, RunIsByteReproducible) {
  const fs::path cfg = WriteConfig(SmallConfig());
  ASSERT_EQ(Cli({"run", "--config", cfg.string(), "--out", (dir_ / "a.csv").string()}).code, 0);
  ASSERT_EQ(Cli({"run", "--config", cfg.string(), "--out", (dir_ / "b.csv").string()}).code, 0);
  EXPECT_EQ(Slurp(dir_ / "a.csv"), Slurp(dir_ / "b.csv"));
  ASSERT_EQ(Cli({"run", "--config", cfg.string(), "--seed", "43", "--out",
                 (dir_ / "c.csv").string()}).code, 0);
  EXPECT_NE(Slurp(dir_ / "a.csv"), Slurp(dir_ / "c.csv"));
}

TEST_F(CliTest, StdoutCarriesOnlyCsv) {
  const fs::path cfg = WriteConfig(SmallConfig());
  Result r = Cli({"run", "--config", cfg.string(), "--no-he", "--out", "-"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = Rows(r.out);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& row : rows) EXPECT_EQ(row.size(), 4u);
}

TEST_F(CliTest, BadRatiosExitTwoNamingTheField) {
  const fs::path cfg = WriteConfig(SmallConfig() + "[data]\n");  // duplicate table
  Result dup = Cli({"run", "--config", cfg.string()});
  EXPECT_EQ(dup.code, kExitConfig);

  const fs::path bad = WriteConfig(
      "[experiment]\nseed = 1\n[data]\nsplit = [0.7, 0.1, 0.1]\n", "bad.toml");
  Result r = Cli({"run", "--config", bad.string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("data.split"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, MissingConfigFileIsConfigError) {
  Result r = Cli({"run", "--config", (dir_ / "nope.toml").string()});
  EXPECT_EQ(r.code, kExitConfig);
}

TEST_F(CliTest, NumericFailureExitsThree) {
  const fs::path cfg = WriteConfig(SmallConfig("[model]\nlearning_rate = 1e200\n"));
  Result r = Cli({"run", "--config", cfg.string(), "--no-he", "--out",
                  (dir_ / "m.csv").string()});
  EXPECT_EQ(r.code, kExitNumeric) << r.err;
}

TEST_F(CliTest, RunBundledPaperScenario) {
  const fs::path cfg = fs::path(FLSIM_CONFIG_DIR) / "paper_scenario_bfl.toml";
  Result r = Cli({"run", "--config", cfg.string(), "--out", (dir_ / "p.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = Rows(Slurp(dir_ / "p.csv"));
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[1][3], "0;1;2;3;4");
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "0;1;2");
}

std::map<std::string, std::vector<std::vector<std::string>>> ByStrategy(
    const std::string& csv) {
  std::map<std::string, std::vector<std::vector<std::string>>> out;
  const auto rows = Rows(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) out[rows[i][0]].push_back(rows[i]);
  return out;
}

TEST_F(CliTest, CompareRunsAllStrategies) {
  const fs::path cfg = WriteConfig(SmallConfig());
  const fs::path csv = dir_ / "cmp.csv";
  Result r = Cli({"compare", "--config", cfg.string(), "--no-he", "--out", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto by = ByStrategy(Slurp(csv));
  ASSERT_EQ(by.size(), 4u);
  for (const char* s : {"sfl", "afl", "fedbuff", "bfl"}) {
    EXPECT_TRUE(by.count(s)) << s;
    EXPECT_NE(r.out.find(s), std::string::npos) << r.out;
  }
  // BFL rounds after the first are shorter than every SFL round.
  const auto& sfl = by.at("sfl");
  const auto& bfl = by.at("bfl");
  ASSERT_EQ(sfl.size(), bfl.size());
  for (std::size_t i = 1; i < bfl.size(); ++i) {
    const double bd = std::stod(bfl[i][2]) - std::stod(bfl[i - 1][2]);
    const double sd = std::stod(sfl[i][2]) - std::stod(sfl[i - 1][2]);
    EXPECT_LT(bd, sd) << "round " << i + 1;
  }
  // FedBuff's first aggregate only contains fast clients.
  for (const std::string& id : {std::string("3"), std::string("4")}) {
    const std::string first = ";" + by.at("fedbuff")[0][4] + ";";
    EXPECT_EQ(first.find(";" + id + ";"), std::string::npos) << first;
  }
  const auto summary = Rows(Slurp(dir_ / "cmp.summary.csv"));
  ASSERT_EQ(summary.size(), 5u);
  EXPECT_EQ(summary[0][0], "strategy");
  EXPECT_GT(std::stoi(summary[2][1]), std::stoi(summary[1][1]));  // afl > sfl aggregations
}

TEST_F(CliTest, CompareSingleClientStrategiesCoincide) {
  const fs::path cfg = WriteConfig(
      "[experiment]\nrounds = 3\nseed = 4\n[data]\nsamples = 600\n[he]\nkey_bits = 256\n"
      "[strategy]\nfedbuff_k = 1\nafl_alpha = 1.0\n"
      "[clients]\nscenario = \"uniform\"\ncount = 1\ndelay_s = 1\n");
  const fs::path csv = dir_ / "one.csv";
  Result r = Cli({"compare", "--config", cfg.string(), "--out", csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto by = ByStrategy(Slurp(csv));
  ASSERT_EQ(by.size(), 4u);
  for (const auto& [name, rows] : by) {
    ASSERT_EQ(rows.size(), 3u) << name;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_NEAR(std::stod(rows[i][3]), std::stod(by.at("sfl")[i][3]), 0.01) << name;
    }
  }
}

TEST_F(CliTest, SynthWritesLoadableCsv) {
  const fs::path csv = dir_ / "gas.csv";
  Result r = Cli({"synth", "--preset", "gas-like", "--samples", "50", "--seed", "3", "--out",
                  csv.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = Rows(Slurp(csv));
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0].size(), 19u);
  EXPECT_EQ(rows[0].back(), "label");

  Result piped = Cli({"synth", "--preset", "wustl-like", "--samples", "5", "--out", "-"});
  ASSERT_EQ(piped.code, kExitOk);
  EXPECT_EQ(Rows(piped.out).size(), 6u);
  EXPECT_EQ(Rows(piped.out)[0].size(), 42u);

  EXPECT_EQ(Cli({"synth", "--preset", "nope", "--out", "-"}).code, kExitConfig);
}

TEST_F(CliTest, RunOnCsvData) {
  const fs::path csv = dir_ / "gas.csv";
  ASSERT_EQ(Cli({"synth", "--samples", "800", "--seed", "2", "--out", csv.string()}).code, 0);
  const fs::path cfg = WriteConfig(
      "[experiment]\nstrategy = \"sfl\"\nrounds = 2\nseed = 1\n"
      "[data]\nsource = \"csv\"\ncsv_path = \"gas.csv\"\nclass_count = 8\n"
      "[he]\nenabled = false\n");
  Result r = Cli({"run", "--config", cfg.string(), "--out", (dir_ / "m.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Rows(Slurp(dir_ / "m.csv")).size(), 3u);
}

}  // namespace
}  // namespace flsim::cli
