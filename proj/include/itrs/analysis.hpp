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

// Convergence-bound evaluation and evaluation metrics.
//
// The performance-gap bound for a run of T steps is
//
//   4L / (μ²(γ+T)) · (3LΔ* + 2(2(m-1)² + (N-M)/(N-1) · m²/M) G²)
//     + γL / (2(γ+T)) · ‖θ_ref - θ*‖²,        γ = max{8L/μ, m} - 1,
//
// split as A1 (the Δ* term) + A2 (the drift/sampling and initialization
// terms).

#ifndef ITRS_ANALYSIS_HPP_
#define ITRS_ANALYSIS_HPP_

#include "itrs/core.hpp"
#include "itrs/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace itrs {

struct BoundInputs {
  double mu = 1.0;
  double L = 1.0;
  /// Gradient-norm bound. Zero is accepted (it only scales the drift term).
  double G = 0.0;
  std::size_t m = 1;
  std::size_t M = 1;
  std::size_t N = 1;
  double delta_star = 0.0;
  double dist_ref_sq = 0.0;

  double gamma() const { return std::max(8.0 * L / mu, static_cast<double>(m)) - 1.0; }

  /// (N-M)/(N-1), defined as 0 when N = 1.
  double sampling_factor() const {
    if (N <= 1 || M >= N) return 0.0;
    return static_cast<double>(N - M) / static_cast<double>(N - 1);
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (!(mu > 0.0)) v.emplace_back("mu must be positive");
    if (!(L > 0.0)) v.emplace_back("L must be positive");
    if (!(mu <= L)) v.emplace_back("mu exceeds L");
    if (!(G >= 0.0) || !std::isfinite(G)) v.emplace_back("G must be non-negative");
    if (m < 1) v.emplace_back("m must be at least 1");
    if (N < 1) v.emplace_back("N must be at least 1");
    if (M < 1) v.emplace_back("M must be at least 1");
    if (M > N) v.emplace_back("M exceeds N");
    if (!(delta_star >= 0.0)) v.emplace_back("delta_star must be non-negative");
    if (!(dist_ref_sq >= 0.0)) v.emplace_back("dist_ref_sq must be non-negative");
    return v;
  }

  void require_valid() const {
    const auto v = violations();
    if (!v.empty()) throw Error("bad-constants", "bound inputs: " + v.front());
  }
};

inline double theorem1_bound(const BoundInputs& bi, std::size_t T) {
  if (T < 1) throw Error("bad-step", "theorem1_bound: T must be >= 1");
  bi.require_valid();
  const double g = bi.gamma();
  const double gt = g + static_cast<double>(T);
  const double m = static_cast<double>(bi.m);
  const double drift = 2.0 * (m - 1.0) * (m - 1.0) + bi.sampling_factor() * m * m / static_cast<double>(bi.M);
  return (4.0 * bi.L / (bi.mu * bi.mu * gt)) * (3.0 * bi.L * bi.delta_star + 2.0 * drift * bi.G * bi.G) +
         (g * bi.L / (2.0 * gt)) * bi.dist_ref_sq;
}

struct BoundTerms {
  double A1 = 0.0;
  double A2 = 0.0;
};

/// A1 = 12L²Δ* / (μ²(γ+T)); A2 = 8L/(μ²(γ+T)) · drift · G² + γL/(2(γ+T)) ·
/// ‖θ_ref - θ*‖². A1 + A2 reproduces theorem1_bound.
inline BoundTerms bound_decomposition(const BoundInputs& bi, std::size_t T) {
  if (T < 1) throw Error("bad-step", "bound_decomposition: T must be >= 1");
  bi.require_valid();
  const double g = bi.gamma();
  const double gt = g + static_cast<double>(T);
  const double m = static_cast<double>(bi.m);
  const double drift = 2.0 * (m - 1.0) * (m - 1.0) + bi.sampling_factor() * m * m / static_cast<double>(bi.M);
  BoundTerms out;
  out.A1 = 12.0 * bi.L * bi.L * bi.delta_star / (bi.mu * bi.mu * gt);
  out.A2 = 8.0 * bi.L / (bi.mu * bi.mu * gt) * drift * bi.G * bi.G + g * bi.L / (2.0 * gt) * bi.dist_ref_sq;
  return out;
}

/// Post-hoc gradient bound: the largest ‖∇L_i(θ)‖ over every recorded
/// parameter vector (experts and merged points, t = 0 included) and every
/// objective. Only valid along this trajectory.
inline double estimate_gradient_bound(const Trajectory& traj, const ObjectiveSet& set) {
  if (traj.records.empty()) throw Error("empty-trajectory", "estimate_gradient_bound: empty trajectory");
  double g = 0.0;
  auto visit = [&](const ParameterVector& theta) {
    for (const auto& obj : set.objectives()) g = std::max(g, eval_grad(obj, theta).norm());
  };
  for (const auto& rec : traj.records) {
    for (const auto& row : rec.experts) visit(row.theta);
    if (rec.merged) visit(rec.merged->theta);
  }
  return g;
}

struct GapPoint {
  std::size_t t = 0;
  double gap = 0.0;
};

/// L(ρ_t) - L(θ*) at every merged point of the trajectory.
inline std::vector<GapPoint> gap_series(const Trajectory& traj, const ObjectiveSet& set) {
  const double best = weighted_loss(set, multiobjective_optimum(set));
  std::vector<GapPoint> out;
  for (const auto& rec : traj.records) {
    if (rec.merged) out.push_back({rec.t, weighted_loss(set, rec.merged->theta) - best});
  }
  return out;
}

/// S samples x N objectives, row-major.
class RewardMatrix {
 public:
  RewardMatrix(std::size_t samples, std::size_t objectives, std::vector<double> values)
      : rows_(samples), cols_(objectives), v_(std::move(values)) {
    if (v_.size() != rows_ * cols_) throw Error("dimension-mismatch", "reward matrix: wrong number of values");
    for (double x : v_) {
      if (!std::isfinite(x)) throw Error("non-finite", "reward matrix: non-finite entry");
    }
  }

  static RewardMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error("dimension-mismatch", "reward matrix: no samples");
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw Error("dimension-mismatch", "reward matrix: ragged rows");
      v.insert(v.end(), r.begin(), r.end());
    }
    return RewardMatrix(rows.size(), rows.front().size(), std::move(v));
  }

  std::size_t samples() const noexcept { return rows_; }
  std::size_t objectives() const noexcept { return cols_; }
  double operator()(std::size_t j, std::size_t i) const { return v_[j * cols_ + i]; }
  std::span<const double> row(std::size_t j) const { return {v_.data() + j * cols_, cols_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> v_;
};

struct IcvResult {
  double score = 0.0;
  /// Samples whose standard deviation fell below epsilon.
  std::size_t guarded = 0;
};

/// Mean over samples of mean_i(R_ji) / max(std_i(R_ji), ε), population std.
inline IcvResult icv_score(const RewardMatrix& R, double epsilon = 1e-9) {
  if (R.objectives() < 2) throw Error("too-few-objectives", "icv_score: need at least two objectives");
  if (!(epsilon > 0.0)) throw Error("bad-epsilon", "icv_score: epsilon must be positive");
  const double n = static_cast<double>(R.objectives());
  IcvResult out;
  double total = 0.0;
  for (std::size_t j = 0; j < R.samples(); ++j) {
    double mean = 0.0;
    for (double x : R.row(j)) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : R.row(j)) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    if (sd < epsilon) ++out.guarded;
    total += mean / std::max(sd, epsilon);
  }
  out.score = total / static_cast<double>(R.samples());
  return out;
}

/// p dominates q when p >= q everywhere and p > q somewhere (maximization).
inline bool dominates(std::span<const double> p, std::span<const double> q) {
  bool strict = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < q[i]) return false;
    if (p[i] > q[i]) strict = true;
  }
  return strict;
}

/// Indices (ascending) of the points no other point dominates. Duplicates
/// never dominate each other, so all copies survive.
inline std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>>& points) {
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw Error("dimension-mismatch", "pareto_front: mixed dimensions");
    for (double x : p) {
      if (!std::isfinite(x)) throw Error("non-finite", "pareto_front: non-finite value");
    }
  }
  std::vector<std::size_t> front;
  for (std::size_t q = 0; q < points.size(); ++q) {
    bool dominated = false;
    for (std::size_t p = 0; p < points.size() && !dominated; ++p) {
      dominated = p != q && dominates(points[p], points[q]);
    }
    if (!dominated) front.push_back(q);
  }
  return front;
}

struct FrontMeans {
  std::vector<double> per_objective;
  double overall = 0.0;
};

/// Per-objective means over the front members, plus the mean of those. The
/// members are summed in lexicographic order so the result does not depend
/// on input order.
inline FrontMeans front_mean_rewards(const std::vector<std::vector<double>>& points,
                                     const std::vector<std::size_t>& front) {
  if (front.empty()) throw Error("empty-front", "front_mean_rewards: empty front");
  std::vector<std::vector<double>> members;
  members.reserve(front.size());
  for (auto k : front) members.push_back(points.at(k));
  std::sort(members.begin(), members.end());
  const auto n = members.front().size();
  FrontMeans out;
  out.per_objective.assign(n, 0.0);
  for (const auto& p : members) {
    for (std::size_t i = 0; i < n; ++i) out.per_objective[i] += p[i];
  }
  for (auto& x : out.per_objective) x /= static_cast<double>(members.size());
  for (double x : out.per_objective) out.overall += x;
  out.overall /= static_cast<double>(n);
  return out;
}

}  // namespace itrs

#endif  // ITRS_ANALYSIS_HPP_
