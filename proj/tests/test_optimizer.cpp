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


#include "itrs/optimizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace itrs {
namespace {

RunConfig config(std::uint64_t seed, std::vector<double> w = {1.0 / 3, 1.0 / 3, 1.0 / 3}) {
  RunConfig c;
  c.seed = seed;
  c.num_objectives = w.size();
  c.subset_size = w.size();
  c.weights = std::move(w);
  return c;
}

ObjectiveSet make_set(const RunConfig& c) {
  QuadraticSetParams p;
  p.seed = c.objectives_seed();
  p.num_objectives = c.num_objectives;
  p.dim = c.dim;
  p.mu = c.mu;
  p.L = c.L;
  p.spread = c.spread;
  return make_quadratic_set(p, PreferenceWeights(c.weights));
}

// Straight-line reference for M = N: local steps on every expert, average
// every m steps, and a closing average at T.
std::vector<ParameterVector> reference_merges(const ObjectiveSet& set, std::size_t m, std::size_t T) {
  const double mu = set.mu(), L = set.L();
  const double gamma = std::max(8.0 * L / mu, static_cast<double>(m)) - 1.0;
  std::vector<ParameterVector> th(set.size(), ParameterVector::Zero(set.dim()));
  std::vector<ParameterVector> merges;
  auto average = [&] {
    ParameterVector r = ParameterVector::Zero(set.dim());
    for (std::size_t i = 0; i < set.size(); ++i) r += set.weights()[i] * th[i];
    return r;
  };
  for (std::size_t t = 1; t <= T; ++t) {
    const double eta = 2.0 / (mu * (gamma + static_cast<double>(t)));
    for (std::size_t i = 0; i < set.size(); ++i) th[i] -= eta * set[i].A() * (th[i] - set[i].minimizer());
    if (t % m == 0) {
      merges.push_back(average());
      for (auto& x : th) x = merges.back();
    }
  }
  if (T % m != 0) merges.push_back(average());
  return merges;
}

TEST(Schedule, DecayingFormAndConditions) {
  ScheduleParams sp{1.0, 8.0, 4, LrMode::kTheorem, 0.0};
  EXPECT_DOUBLE_EQ(sp.gamma(), 63.0);
  EXPECT_DOUBLE_EQ(lr_schedule(1, sp), 2.0 / 64.0);
  EXPECT_TRUE(sp.theorem_conditions_hold());
  ScheduleParams big{1.0, 1.0, 100, LrMode::kTheorem, 0.0};
  EXPECT_DOUBLE_EQ(big.gamma(), 99.0);
  EXPECT_TRUE(big.theorem_conditions_hold());
  EXPECT_THROW(lr_schedule(0, sp), Error);
  ScheduleParams k{1.0, 8.0, 1, LrMode::kConstant, 0.01};
  EXPECT_EQ(lr_schedule(17, k), 0.01);
  for (std::size_t t = 1; t < 50; ++t) EXPECT_GT(lr_schedule(t, sp), lr_schedule(t + 1, sp));
}

TEST(SampleSubset, SortedDistinctAndFullWhenMEqualsN) {
  RandomStream r(5);
  for (int k = 0; k < 500; ++k) {
    const auto s = sample_subset(r, 7, 3, 0);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_TRUE(std::is_sorted(s.indices.begin(), s.indices.end()));
    EXPECT_EQ(std::set<std::size_t>(s.indices.begin(), s.indices.end()).size(), 3u);
    EXPECT_LT(s.indices.back(), 7u);
  }
  RandomStream a(1), b(1);
  const auto full = sample_subset(a, 4, 4, 0);
  EXPECT_EQ(full.indices, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(SampleSubset, MarginalsAndPairsAreUniform) {
  RandomStream r(11);
  const int draws = 60000;
  std::vector<int> hits(6, 0);
  std::map<std::pair<std::size_t, std::size_t>, int> pairs;
  for (int k = 0; k < draws; ++k) {
    const auto s = sample_subset(r, 6, 2, 0);
    for (auto i : s.indices) hits[i]++;
    pairs[{s.indices[0], s.indices[1]}]++;
  }
  const double p = 1.0 / 3.0, sd = std::sqrt(p * (1 - p) / draws);
  for (int h : hits) EXPECT_NEAR(h / double(draws), p, 3 * sd);
  ASSERT_EQ(pairs.size(), 15u);
  const double q = 1.0 / 15.0, sq = std::sqrt(q * (1 - q) / draws);
  for (const auto& [key, n] : pairs) EXPECT_NEAR(n / double(draws), q, 4 * sq);
}

TEST(ExpertStep, MatchesGradientStepAndRejectsNonFinite) {
  const auto set = make_set(config(1));
  ParameterVector th = ParameterVector::Ones(10);
  const auto next = expert_step(th, set[0], 0.01);
  EXPECT_LE((next - (th - 0.01 * set[0].A() * (th - set[0].minimizer()))).norm(), 1e-15);
  ParameterVector bad = th;
  bad[3] = std::nan("");
  EXPECT_THROW(expert_step(bad, set[0], 0.01), Error);
}

TEST(IterativeRS, MatchesStraightLineReference) {
  for (std::size_t m : {1u, 3u, 4u, 16u, 200u}) {
    const auto cfg = [&] {
      auto c = config(3, {0.5, 0.25, 0.25});
      c.merge_every = m;
      return c;
    }();
    const auto set = make_set(cfg);
    const auto traj = run_iterative_rs(set, cfg);
    const auto ref = reference_merges(set, m, cfg.total_steps);
    std::vector<ParameterVector> got;
    for (const auto& r : traj.records) {
      if (r.merged && r.t > 0) got.push_back(r.merged->theta);
    }
    ASSERT_EQ(got.size(), ref.size()) << "m=" << m;
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LE((got[k] - ref[k]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(IterativeRS, ClosingMergeAtUnalignedT) {
  auto cfg = config(2);
  cfg.merge_every = 6;
  cfg.total_steps = 20;
  const auto set = make_set(cfg);
  const auto traj = run_iterative_rs(set, cfg);
  ASSERT_EQ(traj.records.size(), 21u);
  std::vector<std::size_t> merge_steps;
  for (const auto& r : traj.records) {
    if (r.merged) merge_steps.push_back(r.t);
  }
  EXPECT_EQ(merge_steps, (std::vector<std::size_t>{0, 6, 12, 18, 20}));
}

TEST(IterativeRS, MatchesMorlhfAtMEqualsOne) {
  auto cfg = config(7, {0.5, 0.25, 0.25});
  cfg.merge_every = 1;
  const auto set = make_set(cfg);
  const auto a = run_iterative_rs(set, cfg);
  const auto b = run_morlhf(set, cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_LE((a.records[k].merged->theta - b.records[k].merged->theta).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(IterativeRS, MatchesRewardedSoupsAtMEqualsT) {
  auto cfg = config(7, {0.5, 0.25, 0.25});
  cfg.merge_every = cfg.total_steps;
  const auto set = make_set(cfg);
  EXPECT_LE((run_iterative_rs(set, cfg).final_parameters() - run_rewarded_soups(set, cfg).final_parameters())
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

TEST(IterativeRS, CorruptedMergeOrderBreaksEquivalence) {
  auto cfg = config(7, {0.5, 0.25, 0.25});
  const auto set = make_set(cfg);
  const auto clean = run_morlhf(set, cfg);
  cfg.corrupt_merge_order = true;
  const auto bad = run_iterative_rs(set, cfg);
  EXPECT_GT((bad.final_parameters() - clean.final_parameters()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(IterativeRS, ThreadCountDoesNotChangeBits) {
  auto cfg = config(4, {0.25, 0.25, 0.25, 0.25});
  cfg.subset_size = 2;
  cfg.merge_every = 5;
  const auto set = make_set(cfg);
  const auto a = run_iterative_rs(set, cfg);
  cfg.threads = 4;
  const auto b = run_iterative_rs(set, cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    ASSERT_EQ(a.records[k].subset.indices, b.records[k].subset.indices);
    for (std::size_t i = 0; i < a.records[k].experts.size(); ++i) {
      EXPECT_EQ(a.records[k].experts[i].theta, b.records[k].experts[i].theta);
    }
  }
  EXPECT_EQ(a.final_parameters(), b.final_parameters());
}

TEST(IterativeRS, InactiveExpertsHoldTheMergedPoint) {
  auto cfg = config(5, {0.25, 0.25, 0.25, 0.25});
  cfg.subset_size = 2;
  cfg.merge_every = 4;
  cfg.total_steps = 12;
  const auto set = make_set(cfg);
  const auto traj = run_iterative_rs(set, cfg);
  ParameterVector rho = ParameterVector::Zero(10);
  for (std::size_t t = 1; t <= 12; ++t) {
    const auto& r = traj.records[t];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!r.subset.contains(i)) EXPECT_EQ(r.experts[i].theta, rho);
    }
    if (r.merged) rho = r.merged->theta;
  }
}

TEST(IterativeRS, SubsetMergeUsesRenormalizedWeights) {
  auto cfg = config(8, {0.4, 0.3, 0.2, 0.1});
  cfg.subset_size = 2;
  cfg.merge_every = 3;
  cfg.total_steps = 3;
  const auto set = make_set(cfg);
  const auto traj = run_iterative_rs(set, cfg);
  const auto& last = traj.records.back();
  const auto& s = last.subset.indices;
  const double tot = cfg.weights[s[0]] + cfg.weights[s[1]];
  const ParameterVector expect = cfg.weights[s[0]] / tot * last.experts[s[0]].theta +
                                 cfg.weights[s[1]] / tot * last.experts[s[1]].theta;
  EXPECT_LE((last.merged->theta - expect).norm(), 1e-14);
}

TEST(IterativeRS, ContractionResidualNonPositiveWhenFullSubset) {
  for (std::size_t m : {1u, 4u, 16u}) {
    auto cfg = config(9);
    cfg.merge_every = m;
    const auto set = make_set(cfg);
    std::size_t n = 0;
    for (const auto& r : run_iterative_rs(set, cfg).records) {
      if (r.lemma1_residual) {
        ++n;
        EXPECT_LE(*r.lemma1_residual, 1e-9);
      }
    }
    EXPECT_EQ(n, cfg.total_steps);
  }
}

TEST(IterativeRS, DivergesWithLargeConstantStep) {
  auto cfg = config(1);
  cfg.lr_mode = LrMode::kConstant;
  cfg.constant_lr = 10.0 / 8.0;
  const auto set = make_set(cfg);
  try {
    run_iterative_rs(set, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 1u);
    EXPECT_LE(e.step(), cfg.total_steps);
  }
}

TEST(IterativeRS, RejectsInvalidConfig) {
  auto cfg = config(1);
  const auto set = make_set(cfg);
  cfg.subset_size = 4;
  EXPECT_THROW(run_iterative_rs(set, cfg), Error);
}

TEST(SyncAndMerge, OffScheduleIsAnError) {
  auto cfg = config(1);
  cfg.merge_every = 4;
  const auto set = make_set(cfg);
  OptimizerState st;
  st.t = 3;
  st.experts.assign(3, ParameterVector::Zero(10));
  st.subset = SubsetSelection::full(3);
  RandomStream r(1);
  try {
    sync_and_merge(st, cfg, set, MergeOptions::from(cfg), r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "off-schedule");
  }
  st.t = 4;
  const auto out = sync_and_merge(st, cfg, set, MergeOptions::from(cfg), r);
  EXPECT_EQ(out.rho, ParameterVector::Zero(10));
}

TEST(SelectiveMerge, PicksLowestScalarizedLoss) {
  auto cfg = config(6);
  const auto set = make_set(cfg);
  std::vector<ParameterVector> experts;
  for (std::size_t i = 0; i < 3; ++i) experts.push_back(set[i].minimizer());
  const auto cands = default_candidates_n3();
  ASSERT_EQ(cands.size(), 7u);
  const auto sel = select_merge_weights(experts, cands, set);
  for (const auto& c : cands) {
    EXPECT_LE(sel.score, weighted_loss(set, convex_combine(experts, c)) + 1e-15);
  }
  const auto dup = select_merge_weights(experts, {cands[0], cands[0]}, set);
  EXPECT_EQ(dup.index, 0u);
}

TEST(SelectiveMerge, RunsThroughIterativeRS) {
  auto cfg = config(6);
  cfg.merge_every = 10;
  cfg.merge_strategy = MergeStrategy::kSelective;
  cfg.candidates = default_candidates_n3();
  const auto set = make_set(cfg);
  const auto traj = run_iterative_rs(set, cfg);
  EXPECT_TRUE(traj.final_parameters().allFinite());
  const auto rs = run_rewarded_soups(set, cfg);
  EXPECT_TRUE(rs.final_parameters().allFinite());
}

}  // namespace
}  // namespace itrs
