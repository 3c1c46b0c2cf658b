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

// CSV formats: trajectories, reward matrices, Pareto fronts.

#ifndef ITRS_IO_HPP_
#define ITRS_IO_HPP_

#include "itrs/analysis.hpp"
#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/objectives.hpp"

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace itrs {

// Trajectory CSV ---------------------------------------------------------------
//
// t,eta,subset,expert_id,loss_0,...,loss_{N-1},weighted_loss,gap,lemma1_residual,is_sync
//
// One row per (t, expert) and one row with expert_id "merged" at steps that
// merged. `subset` joins the active indices with '|'. An empty
// lemma1_residual means the check was not applicable at that step.

struct TrajectoryRow {
  std::size_t t = 0;
  double eta = 0.0;
  std::vector<std::size_t> subset;
  std::optional<std::size_t> expert;  // nullopt = merged
  std::vector<double> losses;
  double weighted_loss = 0.0;
  double gap = 0.0;
  std::optional<double> lemma1_residual;
  bool is_sync = false;
};

struct TrajectoryTable {
  std::size_t num_objectives = 0;
  std::vector<TrajectoryRow> rows;
};

inline TrajectoryTable tabulate(const Trajectory& traj, const ObjectiveSet& set) {
  const double best = weighted_loss(set, multiobjective_optimum(set));
  TrajectoryTable table;
  table.num_objectives = set.size();
  for (const auto& rec : traj.records) {
    auto add = [&](const StateRow& s, bool with_lemma) {
      TrajectoryRow r;
      r.t = rec.t;
      r.eta = rec.eta;
      r.subset = rec.subset.indices;
      r.expert = s.expert;
      r.losses = s.losses;
      r.weighted_loss = s.weighted_loss;
      r.gap = s.weighted_loss - best;
      if (with_lemma) r.lemma1_residual = rec.lemma1_residual;
      r.is_sync = rec.is_sync();
      table.rows.push_back(std::move(r));
    };
    for (const auto& e : rec.experts) add(e, true);
    if (rec.merged) add(*rec.merged, false);
  }
  return table;
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryTable& table) {
  os << "t,eta,subset,expert_id";
  for (std::size_t i = 0; i < table.num_objectives; ++i) os << ",loss_" << i;
  os << ",weighted_loss,gap,lemma1_residual,is_sync\n";
  for (const auto& r : table.rows) {
    os << r.t << ',' << fmt::num(r.eta) << ',';
    for (std::size_t k = 0; k < r.subset.size(); ++k) os << (k ? "|" : "") << r.subset[k];
    os << ',' << (r.expert ? std::to_string(*r.expert) : std::string("merged"));
    for (double l : r.losses) os << ',' << fmt::num(l);
    os << ',' << fmt::num(r.weighted_loss) << ',' << fmt::num(r.gap) << ',';
    if (r.lemma1_residual) os << fmt::num(*r.lemma1_residual);
    os << ',' << (r.is_sync ? 1 : 0) << '\n';
  }
}

inline TrajectoryTable read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("parse", "trajectory csv: missing header");
  const auto header = fmt::split(line, ',');
  if (header.size() < 8 || header[0] != "t" || header.back() != "is_sync") {
    throw Error("parse", "trajectory csv: unexpected header");
  }
  TrajectoryTable table;
  table.num_objectives = header.size() - 8;
  for (std::size_t i = 0; i < table.num_objectives; ++i) {
    if (header[4 + i] != "loss_" + std::to_string(i)) throw Error("parse", "trajectory csv: bad loss column");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = fmt::split(line, ',');
    if (f.size() != header.size()) throw Error("parse", "trajectory csv: wrong field count");
    TrajectoryRow r;
    r.t = fmt::parse_u64(f[0]);
    r.eta = fmt::parse_double(f[1]);
    if (!f[2].empty()) {
      for (auto s : fmt::split(f[2], '|')) r.subset.push_back(fmt::parse_u64(s));
    }
    if (f[3] != "merged") r.expert = fmt::parse_u64(f[3]);
    for (std::size_t i = 0; i < table.num_objectives; ++i) r.losses.push_back(fmt::parse_double(f[4 + i]));
    const auto base = 4 + table.num_objectives;
    r.weighted_loss = fmt::parse_double(f[base]);
    r.gap = fmt::parse_double(f[base + 1]);
    if (!f[base + 2].empty()) r.lemma1_residual = fmt::parse_double(f[base + 2]);
    r.is_sync = f[base + 3] == "1";
    table.rows.push_back(std::move(r));
  }
  return table;
}

// Reward CSV -------------------------------------------------------------------
//
// sample_id,r_1,...,r_N

struct RewardTable {
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> rows;

  std::size_t objectives() const { return rows.empty() ? 0 : rows.front().size(); }
  RewardMatrix matrix() const { return RewardMatrix::from_rows(rows); }
};

inline RewardTable read_reward_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("parse", "reward csv: missing header");
  const auto header = fmt::split(fmt::trim(line), ',');
  if (header.size() < 2 || fmt::trim(header[0]) != "sample_id") throw Error("parse", "reward csv: header must start with sample_id");
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (fmt::trim(header[i]) != "r_" + std::to_string(i)) throw Error("parse", "reward csv: expected column r_" + std::to_string(i));
  }
  RewardTable table;
  while (std::getline(is, line)) {
    const auto s = fmt::trim(line);
    if (s.empty()) continue;
    const auto f = fmt::split(s, ',');
    if (f.size() != header.size()) throw Error("dimension-mismatch", "reward csv: row has wrong number of fields");
    table.sample_ids.emplace_back(fmt::trim(f[0]));
    std::vector<double> r;
    for (std::size_t i = 1; i < f.size(); ++i) r.push_back(fmt::parse_double(f[i]));
    table.rows.push_back(std::move(r));
  }
  if (table.rows.empty()) throw Error("parse", "reward csv: no samples");
  return table;
}

inline void write_reward_csv(std::ostream& os, const RewardTable& table) {
  os << "sample_id";
  for (std::size_t i = 1; i <= table.objectives(); ++i) os << ",r_" << i;
  os << '\n';
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    os << table.sample_ids[j];
    for (double x : table.rows[j]) os << ',' << fmt::num(x);
    os << '\n';
  }
}

/// index,sample_id,r_1..r_N for each front member, in input order.
inline void write_front_csv(std::ostream& os, const RewardTable& table, const std::vector<std::size_t>& front) {
  os << "index,sample_id";
  for (std::size_t i = 1; i <= table.objectives(); ++i) os << ",r_" << i;
  os << '\n';
  for (auto k : front) {
    os << k << ',' << table.sample_ids[k];
    for (double x : table.rows[k]) os << ',' << fmt::num(x);
    os << '\n';
  }
}

/// objective,mean with one row per r_i and a final "overall" row.
inline void write_front_means_csv(std::ostream& os, const FrontMeans& means) {
  os << "objective,mean\n";
  for (std::size_t i = 0; i < means.per_objective.size(); ++i) {
    os << "r_" << (i + 1) << ',' << fmt::num(means.per_objective[i]) << '\n';
  }
  os << "overall," << fmt::num(means.overall) << '\n';
}

}  // namespace itrs

#endif  // ITRS_IO_HPP_
