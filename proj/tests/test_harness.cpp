// Copyright 2026 The itrs Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "itrs/harness/commands.hpp"
#include "itrs/harness/config.hpp"
#include "itrs/harness/verify.hpp"
#include "itrs/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace itrs::harness {
namespace {

namespace fs = std::filesystem;

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("itrs-test-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  ExperimentSpec spec(std::initializer_list<std::string> kv, const std::string& sub = "run") {
    ConfigMap m = default_config();
    for (const auto& s : kv) apply_override(m, s);
    m["out"] = (dir_ / sub).string();
    return build_experiment(m);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST(Config, ParsesSectionsCommentsAndOverrides) {
  std::istringstream in("# sample\n[problem]\ndim = 4\nobjectives = 2\n\n[optimizer]\nmerge_every = 5\n");
  ConfigMap m = default_config();
  parse_config_text(in, m);
  apply_override(m, "merge_every=7");
  const auto s = build_experiment(m);
  EXPECT_EQ(s.cfg.dim, 4u);
  EXPECT_EQ(s.cfg.num_objectives, 2u);
  EXPECT_EQ(s.cfg.subset_size, 2u);
  EXPECT_EQ(s.cfg.merge_every, 7u);
  EXPECT_EQ(s.cfg.weights, (std::vector<double>{0.5, 0.5}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ConfigMap m = default_config();
  std::istringstream bad("colour = red\n");
  EXPECT_THROW(parse_config_text(bad, m), Error);
  EXPECT_THROW(apply_override(m, "nokey"), Error);
  apply_override(m, "merge=sometimes");
  EXPECT_THROW(build_experiment(m), Error);
  ConfigMap m2 = default_config();
  apply_override(m2, "steps=abc");
  EXPECT_THROW(build_experiment(m2), Error);
}

TEST(Config, WeightsAcceptFractions) {
  ConfigMap m = default_config();
  apply_override(m, "weights=1/2 1/4 1/4");
  EXPECT_EQ(build_experiment(m).cfg.weights, (std::vector<double>{0.5, 0.25, 0.25}));
}

TEST(Config, SweepValueMapsTToSteps) {
  SweepSpec s;
  s.base.cfg.total_steps = 120;
  s.base.out_dir = "base";
  s.axis = parse_axis("m");
  const auto e = apply_sweep_value(s, "T");
  EXPECT_EQ(e.cfg.merge_every, 120u);
  EXPECT_EQ(e.out_dir, fs::path("base") / "m=T");
  EXPECT_THROW(parse_axis("q"), Error);
}

TEST(TrajectoryCsv, RoundTripsThroughReader) {
  RunConfig cfg;
  cfg.weights = {0.5, 0.25, 0.25};
  cfg.merge_every = 3;
  cfg.total_steps = 10;
  cfg.subset_size = 2;
  QuadraticSetParams p;
  const auto set = make_quadratic_set(p, PreferenceWeights(cfg.weights));
  const auto table = tabulate(run_iterative_rs(set, cfg), set);
  std::stringstream ss;
  write_trajectory_csv(ss, table);
  const std::string first = ss.str();
  EXPECT_EQ(first.substr(0, first.find('\n')),
            "t,eta,subset,expert_id,loss_0,loss_1,loss_2,weighted_loss,gap,lemma1_residual,is_sync");
  const auto back = read_trajectory_csv(ss);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t k = 0; k < back.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].t, table.rows[k].t);
    EXPECT_EQ(back.rows[k].expert, table.rows[k].expert);
    EXPECT_EQ(back.rows[k].losses, table.rows[k].losses);
    EXPECT_EQ(back.rows[k].gap, table.rows[k].gap);
    EXPECT_EQ(back.rows[k].subset, table.rows[k].subset);
    EXPECT_EQ(back.rows[k].is_sync, table.rows[k].is_sync);
  }
  std::stringstream again;
  write_trajectory_csv(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(RewardCsv, RoundTripAndErrors) {
  std::istringstream in("sample_id,r_1,r_2\na,1,2\nb,0.5,3\n");
  const auto t = read_reward_csv(in);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.sample_ids[1], "b");
  std::stringstream out;
  write_reward_csv(out, t);
  EXPECT_EQ(out.str(), "sample_id,r_1,r_2\na,1,2\nb,0.5,3\n");
  std::istringstream ragged("sample_id,r_1,r_2\na,1\n");
  EXPECT_THROW(read_reward_csv(ragged), Error);
  std::istringstream header("id,r_1\na,1\n");
  EXPECT_THROW(read_reward_csv(header), Error);
}

TEST_F(HarnessTest, RunWritesFilesAndReplaysByteIdentically) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(spec({"merge_every=4", "subset_size=2"}, "a"), out, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_run(spec({"merge_every=4", "subset_size=2", "threads=3"}, "b"), out, err), kExitOk);
  for (const char* f : {"trajectory.csv", "objectives.txt", "report.txt"}) EXPECT_TRUE(fs::exists(dir_ / "a" / f));
  EXPECT_EQ(slurp(dir_ / "a" / "trajectory.csv"), slurp(dir_ / "b" / "trajectory.csv"));
  const auto report = slurp(dir_ / "a" / "report.txt");
  EXPECT_NE(report.find("bound_T = "), std::string::npos);
  EXPECT_NE(report.find("A1 = "), std::string::npos);
}

TEST_F(HarnessTest, RunReportsBaselineDeviationAtMEqualsOne) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(spec({"weights=0.5 0.25 0.25"}), out, err), kExitOk);
  EXPECT_NE(out.str().find("baseline morlhf"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "run" / "report.txt").find("baseline = morlhf"), std::string::npos);
}

TEST_F(HarnessTest, RunExitCodes) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(spec({"subset_size=5"}), out, err), kExitConfig);
  EXPECT_NE(err.str().find("M exceeds N"), std::string::npos);
  std::ostringstream err2;
  EXPECT_EQ(cmd_run(spec({"lr=1.25"}), out, err2), kExitDiverged);
  EXPECT_NE(err2.str().find("diverged at step"), std::string::npos);
}

TEST_F(HarnessTest, SweepOverMergeFrequency) {
  SweepSpec s;
  s.base = spec({}, "sweep");
  s.axis = SweepAxis::kMergeEvery;
  s.values = {"1", "4", "16", "64", "T"};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(s, out, err), kExitOk) << err.str();
  std::ifstream f(dir_ / "sweep" / "summary.csv");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "value,final_gap,bound_T,A1,A2,wall_ms");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    for (auto c : fmt::split(line, ',')) cells.emplace_back(c);
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) {
    const double b = fmt::parse_double(r[2]), a1 = fmt::parse_double(r[3]), a2 = fmt::parse_double(r[4]);
    EXPECT_NEAR(a1 + a2, b, 1e-12 * std::max(1.0, b));
  }

  const auto base = s.base.cfg;
  QuadraticSetParams p;
  p.seed = base.objectives_seed();
  const auto set = make_quadratic_set(p, PreferenceWeights(base.weights));
  const auto morlhf = gap_series(run_morlhf(set, base), set).back().gap;
  EXPECT_NEAR(fmt::parse_double(rows[0][1]), morlhf, 1e-9);
}

TEST_F(HarnessTest, SweepOverStepsImprovesGap) {
  SweepSpec s;
  s.base = spec({"merge_every=4", "lemma1=false"}, "steps");
  s.axis = SweepAxis::kSteps;
  s.values = {"256", "4096"};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(s, out, err), kExitOk) << err.str();
  std::ifstream f(dir_ / "steps" / "summary.csv");
  std::string line;
  std::getline(f, line);
  std::vector<double> gaps;
  while (std::getline(f, line)) gaps.push_back(fmt::parse_double(fmt::split(line, ',')[1]));
  ASSERT_EQ(gaps.size(), 2u);
  EXPECT_LT(gaps[1], gaps[0]);
}

TEST_F(HarnessTest, SeedSweepSharesObjectivesWhenObjectiveSeedFixed) {
  SweepSpec s;
  s.base = spec({"objective_seed=5", "subset_size=2", "merge_every=4"}, "seeds");
  s.axis = SweepAxis::kSeed;
  for (int k = 1; k <= 10; ++k) s.values.push_back(std::to_string(k));
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(s, out, err), kExitOk) << err.str();
  std::set<std::string> trajectories, objectives;
  for (const auto& v : s.values) {
    trajectories.insert(slurp(dir_ / "seeds" / ("seed=" + v) / "trajectory.csv"));
    objectives.insert(slurp(dir_ / "seeds" / ("seed=" + v) / "objectives.txt"));
  }
  EXPECT_EQ(trajectories.size(), 10u);
  EXPECT_EQ(objectives.size(), 1u);
}

TEST_F(HarnessTest, SweepValidatesEveryValueFirst) {
  SweepSpec s;
  s.base = spec({}, "bad");
  s.axis = SweepAxis::kSubsetSize;
  s.values = {"2", "9"};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_sweep(s, out, err), kExitConfig);
  EXPECT_FALSE(fs::exists(dir_ / "bad" / "M=2"));
}

TEST(BoundCommand, FixtureRowAndDecreasingColumn) {
  BoundInputs bi;
  bi.mu = 1;
  bi.L = 1;
  bi.M = 3;
  bi.N = 3;
  bi.delta_star = 0.5;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_bound(bi, 1, 100, out, err), kExitOk);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "T,bound,A1,A2");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0.75,0.75,0");
  double prev = 0.75;
  while (std::getline(in, line)) {
    const double b = fmt::parse_double(fmt::split(line, ',')[1]);
    EXPECT_LT(b, prev);
    prev = b;
  }
  bi.delta_star = 0;
  std::ostringstream zero;
  ASSERT_EQ(cmd_bound(bi, 1, 5, zero, err), kExitOk);
  EXPECT_NE(zero.str().find("5,0,0,0"), std::string::npos);
  bi.M = 4;
  EXPECT_EQ(cmd_bound(bi, 1, 5, zero, err), kExitConfig);
}

TEST_F(HarnessTest, ParetoAndIcvCommands) {
  {
    std::ofstream f(dir_ / "r.csv");
    f << "sample_id,r_1,r_2\na,1,1\nb,2,0.5\nc,0.5,2\nd,0.9,0.9\n";
  }
  std::ostringstream out, err;
  ASSERT_EQ(cmd_pareto(dir_ / "r.csv", dir_ / "front", out, err), kExitOk);
  EXPECT_EQ(slurp(dir_ / "front" / "front.csv"), "index,sample_id,r_1,r_2\n0,a,1,1\n1,b,2,0.5\n2,c,0.5,2\n");
  EXPECT_NE(slurp(dir_ / "front" / "front_means.csv").find("overall,"), std::string::npos);
  std::ostringstream icv;
  ASSERT_EQ(cmd_icv(dir_ / "r.csv", 1e-9, icv, err), kExitOk);
  EXPECT_NE(icv.str().find("icv = "), std::string::npos);
  EXPECT_EQ(cmd_icv(dir_ / "missing.csv", 1e-9, icv, err), kExitConfig);
}

TEST(Verify, FastPassesAndCorruptedMergeFails) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify({VerifyLevel::kFast, false}, out, err), kExitOk) << out.str();
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_verify({VerifyLevel::kFast, true}, out2, err2), kExitVerifyFailed);
  EXPECT_NE(err2.str().find("morlhf_equivalence"), std::string::npos);
}

}  // namespace
}  // namespace itrs::harness
