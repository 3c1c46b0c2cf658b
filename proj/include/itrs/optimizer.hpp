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

// Iterative merge-and-fine-tune optimizer and its two limiting baselines.
//
// IterativeRS keeps one expert per objective. Between syncs only the experts
// of the active subset S take gradient steps on their own objective; every m
// steps the active experts are merged into ρ = Σ_{i∈S} λ_i θ_i (λ normalized
// from the preference weights, or chosen from candidate sets), all N experts
// are reset to ρ, and a fresh subset of M objectives is drawn uniformly
// without replacement.
//
// Step t first applies the local update with η_t, then merges if t mod m = 0.
// With this indexing m = 1 is gradient descent on Σ w_i L_i (MORLHF) and
// m = T is independent training followed by one merge (Rewarded Soups).
// The baselines evaluate the step-size schedule at their own limit (m = 1 and
// m = T respectively) so the equivalences hold under the theorem schedule.

#ifndef ITRS_OPTIMIZER_HPP_
#define ITRS_OPTIMIZER_HPP_

#include "itrs/core.hpp"
#include "itrs/objectives.hpp"
#include "itrs/random.hpp"
#include "itrs/schedule.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace itrs {

/// M indices drawn uniformly without replacement (partial Fisher-Yates),
/// returned in ascending order.
inline SubsetSelection sample_subset(RandomStream& rng, std::size_t n, std::size_t m, std::size_t t = 0) {
  if (m < 1 || m > n) throw Error("bad-subset-size", "sample_subset: need 1 <= M <= N");
  if (m == n) return SubsetSelection::full(n, t);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < m; ++k) {
    const auto j = k + static_cast<std::size_t>(rng.index(n - k));
    std::swap(pool[k], pool[j]);
  }
  SubsetSelection s;
  s.drawn_at = t;
  s.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

namespace detail {

inline ParameterVector step_unchecked(const ParameterVector& theta, const QuadraticObjective& obj, double eta) {
  return theta - eta * (obj.A() * (theta - obj.minimizer()));
}

}  // namespace detail

/// θ - η ∇L_i(θ).
inline ParameterVector expert_step(const ParameterVector& theta, const QuadraticObjective& obj, double eta) {
  if (!(eta > 0.0)) throw Error("bad-step", "expert_step: eta must be positive");
  require_same_dim(theta.size(), obj.dim(), "expert_step");
  auto next = detail::step_unchecked(theta, obj, eta);
  require_finite(next, "expert_step");
  return next;
}

struct OptimizerState {
  /// Number of completed steps.
  std::size_t t = 0;
  std::vector<ParameterVector> experts;
  SubsetSelection subset;
  ParameterVector last_merged;
};

struct MergeOutcome {
  ParameterVector rho;
  /// Coefficients actually used, ordered like `merged_over.indices`.
  std::vector<double> lambdas;
  SubsetSelection merged_over;
  /// Index into the candidate list when merging selectively.
  std::optional<std::size_t> candidate;
  SubsetSelection new_subset;
};

struct MergeOptions {
  MergeStrategy strategy = MergeStrategy::kFixed;
  std::vector<std::vector<double>> candidates;
  bool corrupt_order = false;

  static MergeOptions from(const RunConfig& cfg) {
    return {cfg.merge_strategy, cfg.candidates, cfg.corrupt_merge_order};
  }
};

struct SelectedMerge {
  std::size_t index = 0;
  std::vector<double> weights;
  ParameterVector merged;
  double score = 0.0;
};

/// Merges all N experts with each candidate weight set and keeps the one with
/// the lowest scalarized loss; ties go to the lowest candidate index.
inline SelectedMerge select_merge_weights(std::span<const ParameterVector> experts,
                                          const std::vector<std::vector<double>>& candidates,
                                          const ObjectiveSet& set) {
  if (candidates.empty()) throw Error("empty-candidates", "select_merge_weights: no candidates");
  if (experts.size() != set.size()) throw Error("dimension-mismatch", "select_merge_weights: experts != N");
  std::optional<SelectedMerge> best;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const PreferenceWeights w(candidates[k]);
    if (w.size() != set.size()) throw Error("dimension-mismatch", "select_merge_weights: candidate length != N");
    auto merged = convex_combine(experts, w.values());
    const double score = weighted_loss(set, merged);
    if (!best || score < best->score) best = SelectedMerge{k, candidates[k], std::move(merged), score};
  }
  return *std::move(best);
}

/// Merges the experts listed in `over`. Fixed strategy uses the normalized
/// preference weights; selective scores every candidate restricted to `over`.
inline MergeOutcome merge_experts(std::span<const ParameterVector> experts, const SubsetSelection& over,
                                  const ObjectiveSet& set, const MergeOptions& opts) {
  std::vector<ParameterVector> active;
  active.reserve(over.size());
  for (auto i : over.indices) active.push_back(experts[i]);

  auto combine = [&](std::vector<double> lambdas) {
    if (opts.corrupt_order) std::reverse(lambdas.begin(), lambdas.end());
    auto rho = convex_combine(active, lambdas);
    return std::pair{std::move(rho), std::move(lambdas)};
  };

  MergeOutcome out;
  out.merged_over = over;
  if (opts.strategy == MergeStrategy::kFixed) {
    std::tie(out.rho, out.lambdas) = combine(normalize_subset_weights(set.weights(), over));
    return out;
  }
  if (opts.candidates.empty()) throw Error("empty-candidates", "selective merge: no candidates");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < opts.candidates.size(); ++k) {
    auto [rho, lambdas] = combine(normalize_subset_weights(PreferenceWeights(opts.candidates[k]), over));
    const double score = weighted_loss(set, rho);
    if (!out.candidate || score < best) {
      best = score;
      out.candidate = k;
      out.rho = std::move(rho);
      out.lambdas = std::move(lambdas);
    }
  }
  return out;
}

/// Sync step: merge the outgoing subset, then draw the next one. The caller
/// resets the experts with apply_sync.
inline MergeOutcome sync_and_merge(const OptimizerState& state, const RunConfig& cfg, const ObjectiveSet& set,
                                   const MergeOptions& opts, RandomStream& sampler) {
  if (cfg.merge_every < 1 || state.t % cfg.merge_every != 0) {
    throw Error("off-schedule", "sync_and_merge called at t=" + std::to_string(state.t) +
                                    " with m=" + std::to_string(cfg.merge_every));
  }
  auto out = merge_experts(state.experts, state.subset, set, opts);
  out.new_subset = sample_subset(sampler, set.size(), cfg.subset_size, state.t);
  return out;
}

inline void apply_sync(OptimizerState& state, const MergeOutcome& outcome) {
  for (auto& e : state.experts) e = outcome.rho;
  state.last_merged = outcome.rho;
  state.subset = outcome.new_subset;
}

namespace detail {

inline StateRow make_row(const ObjectiveSet& set, std::optional<std::size_t> expert, const ParameterVector& theta) {
  StateRow row;
  row.expert = expert;
  row.theta = theta;
  row.losses.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double l = eval_loss(set[i], theta);
    row.losses.push_back(l);
    row.weighted_loss += set.weights()[i] * l;
  }
  return row;
}

inline bool row_finite(const StateRow& row) {
  if (!row.theta.allFinite() || !std::isfinite(row.weighted_loss)) return false;
  return std::all_of(row.losses.begin(), row.losses.end(), [](double l) { return std::isfinite(l); });
}

inline void require_valid(const ObjectiveSet& set, const RunConfig& cfg) {
  auto v = validate_run_config(cfg);
  if (cfg.num_objectives != set.size()) v.push_back("config N does not match objective set");
  if (cfg.dim != static_cast<std::size_t>(set.dim())) v.push_back("config dimension does not match objective set");
  if (!v.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& s : v) msg += " [" + s + "]";
    throw Error("config", msg);
  }
}

/// Merge frequency the schedule sees: MORLHF is the m = 1 limit and Rewarded
/// Soups the m = T limit, whatever the config says.
inline std::size_t effective_merge_every(Algorithm a, const RunConfig& cfg) {
  switch (a) {
    case Algorithm::kMorlhf: return 1;
    case Algorithm::kRewardedSoups: return cfg.total_steps;
    case Algorithm::kIterativeRS: break;
  }
  return cfg.merge_every;
}

inline ScheduleParams schedule_for(const ObjectiveSet& set, const RunConfig& cfg, Algorithm a) {
  return {set.mu(), set.L(), effective_merge_every(a, cfg), cfg.lr_mode, cfg.constant_lr};
}

[[noreturn]] inline void diverged(std::size_t t) {
  throw DivergenceError(t, "non-finite parameters or losses at step " + std::to_string(t));
}

/// Constants for the per-step one-step contraction check.
struct LemmaContext {
  ParameterVector opt;
  double delta = 0.0;
  double mu = 0.0;
  double L = 0.0;
};

/// ‖ψ⁺ - θ*‖² - [(1 - ημ)‖ψ - θ*‖² + 6Lη²Δ* + 2 Σ w_i ‖ψ - θ_i‖²] for
/// pre-step experts `pre` and post-step experts `post`.
inline double lemma1_residual(const LemmaContext& ctx, const PreferenceWeights& w,
                              std::span<const ParameterVector> pre, std::span<const ParameterVector> post,
                              double eta) {
  const auto psi = convex_combine(pre, w.values());
  const auto psi_next = convex_combine(post, w.values());
  double spread = 0.0;
  for (std::size_t i = 0; i < pre.size(); ++i) spread += w[i] * (psi - pre[i]).squaredNorm();
  const double rhs = (1.0 - eta * ctx.mu) * (psi - ctx.opt).squaredNorm() +
                     6.0 * ctx.L * eta * eta * ctx.delta + 2.0 * spread;
  return (psi_next - ctx.opt).squaredNorm() - rhs;
}

}  // namespace detail

/// Runs IterativeRS from θ_ref = 0. The returned trajectory starts with the
/// t = 0 record and ends with the closing merge at T.
inline Trajectory run_iterative_rs(const ObjectiveSet& set, const RunConfig& cfg) {
  detail::require_valid(set, cfg);
  const auto n = set.size();
  const auto T = cfg.total_steps;
  const auto m = cfg.merge_every;
  const auto sched = detail::schedule_for(set, cfg, Algorithm::kIterativeRS);
  const auto& w = set.weights();
  const auto opts = MergeOptions::from(cfg);

  std::optional<detail::LemmaContext> lemma;
  if (cfg.instrument_lemma1 && cfg.subset_size == n) {
    lemma = detail::LemmaContext{multiobjective_optimum(set), delta_star(set), set.mu(), set.L()};
  }

  RandomStream sampler(cfg.seed, StreamRole::kSampler, 0);
  OptimizerState state;
  const ParameterVector ref = ParameterVector::Zero(set.dim());
  state.experts.assign(n, ref);
  state.last_merged = ref;
  state.subset = sample_subset(sampler, n, cfg.subset_size, 0);

  Trajectory traj;
  traj.algorithm = Algorithm::kIterativeRS;
  traj.records.reserve(T + 1);
  {
    StepRecord r0;
    r0.subset = state.subset;
    for (std::size_t i = 0; i < n; ++i) r0.experts.push_back(detail::make_row(set, i, ref));
    r0.merged = detail::make_row(set, std::nullopt, ref);
    traj.records.push_back(std::move(r0));
  }

  // buf[k][i]: expert i after step (start + k) of the current window.
  std::vector<std::vector<ParameterVector>> buf;
  std::size_t start = 1;
  while (start <= T) {
    const std::size_t end = std::min(((start + m - 1) / m) * m, T);
    const std::size_t len = end - start + 1;
    std::vector<double> etas(len);
    for (std::size_t k = 0; k < len; ++k) etas[k] = lr_schedule(start + k, sched);

    buf.assign(len, state.experts);
    const auto& active = state.subset.indices;
    std::vector<std::size_t> first_bad(n, std::numeric_limits<std::size_t>::max());

    // Experts are independent inside a window; each writes only its own slots.
    auto run_expert = [&](std::size_t i) {
      ParameterVector theta = state.experts[i];
      for (std::size_t k = 0; k < len; ++k) {
        theta = detail::step_unchecked(theta, set[i], etas[k]);
        buf[k][i] = theta;
        if (!theta.allFinite()) {
          first_bad[i] = start + k;
          for (std::size_t j = k + 1; j < len; ++j) buf[j][i] = theta;
          return;
        }
      }
    };
    const auto workers = std::min<std::size_t>(cfg.threads, active.size());
    if (workers <= 1) {
      for (auto i : active) run_expert(i);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t wk = 0; wk < workers; ++wk) {
        pool.emplace_back([&, wk] {
          for (std::size_t a = wk; a < active.size(); a += workers) run_expert(active[a]);
        });
      }
    }
    const auto bad = *std::min_element(first_bad.begin(), first_bad.end());

    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t t = start + k;
      if (t >= bad) detail::diverged(bad);
      StepRecord rec;
      rec.t = t;
      rec.eta = etas[k];
      rec.subset = state.subset;
      rec.experts.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        rec.experts.push_back(detail::make_row(set, i, buf[k][i]));
        if (!detail::row_finite(rec.experts.back())) detail::diverged(t);
      }
      if (lemma && etas[k] <= (1.0 / (4.0 * lemma->L)) * (1.0 + 1e-12)) {
        const auto& pre = k == 0 ? state.experts : buf[k - 1];
        rec.lemma1_residual = detail::lemma1_residual(*lemma, w, pre, buf[k], etas[k]);
      }
      traj.records.push_back(std::move(rec));
    }

    state.experts = buf.back();
    state.t = end;
    auto& last = traj.records.back();
    if (end % m == 0) {
      const auto outcome = sync_and_merge(state, cfg, set, opts, sampler);
      last.merged = detail::make_row(set, std::nullopt, outcome.rho);
      apply_sync(state, outcome);
    } else {
      // Closing merge after step T between two syncs.
      SubsetSelection over = cfg.final_merge == FinalMerge::kAll ? SubsetSelection::full(n, end) : state.subset;
      const auto outcome = merge_experts(state.experts, over, set, opts);
      last.merged = detail::make_row(set, std::nullopt, outcome.rho);
      state.last_merged = outcome.rho;
    }
    if (!detail::row_finite(*last.merged)) detail::diverged(end);
    start = end + 1;
  }
  return traj;
}

/// Gradient descent on Σ w_i L_i from θ_ref = 0. Every record holds the
/// single iterate as its merged row.
inline Trajectory run_morlhf(const ObjectiveSet& set, const RunConfig& cfg) {
  detail::require_valid(set, cfg);
  const auto sched = detail::schedule_for(set, cfg, Algorithm::kMorlhf);
  Trajectory traj;
  traj.algorithm = Algorithm::kMorlhf;
  traj.records.reserve(cfg.total_steps + 1);

  ParameterVector theta = ParameterVector::Zero(set.dim());
  StepRecord r0;
  r0.subset = SubsetSelection::full(set.size());
  r0.merged = detail::make_row(set, std::nullopt, theta);
  traj.records.push_back(std::move(r0));
  for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
    const double eta = lr_schedule(t, sched);
    theta = theta - eta * weighted_grad(set, theta);
    StepRecord rec;
    rec.t = t;
    rec.eta = eta;
    rec.subset = SubsetSelection::full(set.size(), 0);
    rec.merged = detail::make_row(set, std::nullopt, theta);
    if (!detail::row_finite(*rec.merged)) detail::diverged(t);
    traj.records.push_back(std::move(rec));
  }
  return traj;
}

/// N independent descents for T steps, then one merge: λ = w (fixed) or the
/// best candidate set (selective).
inline Trajectory run_rewarded_soups(const ObjectiveSet& set, const RunConfig& cfg) {
  detail::require_valid(set, cfg);
  const auto n = set.size();
  const auto sched = detail::schedule_for(set, cfg, Algorithm::kRewardedSoups);
  Trajectory traj;
  traj.algorithm = Algorithm::kRewardedSoups;
  traj.records.reserve(cfg.total_steps + 1);

  std::vector<ParameterVector> experts(n, ParameterVector::Zero(set.dim()));
  StepRecord r0;
  r0.subset = SubsetSelection::full(n);
  for (std::size_t i = 0; i < n; ++i) r0.experts.push_back(detail::make_row(set, i, experts[i]));
  r0.merged = detail::make_row(set, std::nullopt, experts.front());
  traj.records.push_back(std::move(r0));

  for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
    const double eta = lr_schedule(t, sched);
    StepRecord rec;
    rec.t = t;
    rec.eta = eta;
    rec.subset = SubsetSelection::full(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      experts[i] = detail::step_unchecked(experts[i], set[i], eta);
      rec.experts.push_back(detail::make_row(set, i, experts[i]));
      if (!detail::row_finite(rec.experts.back())) detail::diverged(t);
    }
    traj.records.push_back(std::move(rec));
  }

  ParameterVector merged;
  if (cfg.merge_strategy == MergeStrategy::kSelective) {
    merged = select_merge_weights(experts, cfg.candidates, set).merged;
  } else {
    auto lambdas = std::vector<double>(set.weights().values().begin(), set.weights().values().end());
    if (cfg.corrupt_merge_order) std::reverse(lambdas.begin(), lambdas.end());
    merged = convex_combine(experts, lambdas);
  }
  traj.records.back().merged = detail::make_row(set, std::nullopt, merged);
  return traj;
}

inline Trajectory run_algorithm(Algorithm a, const ObjectiveSet& set, const RunConfig& cfg) {
  switch (a) {
    case Algorithm::kIterativeRS: return run_iterative_rs(set, cfg);
    case Algorithm::kMorlhf: return run_morlhf(set, cfg);
    case Algorithm::kRewardedSoups: return run_rewarded_soups(set, cfg);
  }
  throw Error("config", "unknown algorithm");
}

/// The seven candidate sets for three objectives: uniform, and every
/// permutation of (1/6, 1/6, 2/3) and (1/6, 5/12, 5/12).
inline std::vector<std::vector<double>> default_candidates_n3() {
  const double s = 1.0 / 6.0, big = 2.0 / 3.0, mid = 5.0 / 12.0, u = 1.0 / 3.0;
  return {
      {u, u, u},
      {s, s, big}, {s, big, s}, {big, s, s},
      {s, mid, mid}, {mid, s, mid}, {mid, mid, s},
  };
}

}  // namespace itrs

#endif  // ITRS_OPTIMIZER_HPP_
