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

// Domain types shared by every module: parameter vectors, preference
// weights, subset selections, run configuration and the trajectory record
// stream. Also holds the two merge kernels (subset weight normalization and
// convex combination).

#ifndef ITRS_CORE_HPP_
#define ITRS_CORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace itrs {

/// Tolerance on Σw = 1 for preference weights and merge coefficients.
inline constexpr double kSimplexTol = 1e-12;

/// Error carrying a short machine-readable code ("empty-subset",
/// "dimension-mismatch", ...) next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Raised when an iterate leaves the finite range. `step` is the first step
/// at which a non-finite parameter or loss appeared.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("divergence", what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A point in R^d. Plain Eigen vector; finiteness is checked at the
/// boundaries where iterates are produced (see require_finite).
using ParameterVector = Eigen::VectorXd;

inline bool all_finite(const ParameterVector& v) { return v.allFinite(); }

inline void require_finite(const ParameterVector& v, const char* what) {
  if (!v.allFinite()) throw Error("non-finite", std::string(what) + ": non-finite entry");
}

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error("dimension-mismatch", std::string(what) + ": dimension " + std::to_string(a) +
                                          " vs " + std::to_string(b));
  }
}

/// Weights on the probability simplex: every entry > 0 and Σw = 1 within
/// kSimplexTol. Construction rejects anything else; it never renormalizes.
class PreferenceWeights {
 public:
  explicit PreferenceWeights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw Error("not-simplex", "preference weights: empty");
    double sum = 0.0;
    for (double x : w_) {
      if (!std::isfinite(x) || x <= 0.0) throw Error("not-simplex", "preference weights: entries must be > 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) throw Error("not-simplex", "preference weights do not sum to 1");
  }

  static PreferenceWeights uniform(std::size_t n) {
    return PreferenceWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_.at(i); }
  std::span<const double> values() const noexcept { return w_; }

  bool is_uniform() const noexcept {
    for (double x : w_) {
      if (x != w_.front()) return false;
    }
    return true;
  }

 private:
  std::vector<double> w_;
};

/// The active objective set S_t: distinct indices in ascending order.
struct SubsetSelection {
  std::vector<std::size_t> indices;
  std::size_t drawn_at = 0;

  std::size_t size() const noexcept { return indices.size(); }
  bool contains(std::size_t i) const {
    for (auto j : indices) {
      if (j == i) return true;
    }
    return false;
  }
  static SubsetSelection full(std::size_t n, std::size_t t = 0) {
    SubsetSelection s;
    s.drawn_at = t;
    s.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.indices[i] = i;
    return s;
  }
};

enum class LrMode { kTheorem, kConstant };
enum class MergeStrategy { kFixed, kSelective };
/// Which experts the closing merge after step T aggregates when T is not a
/// sync step: the last active subset, or all N experts with λ = w.
enum class FinalMerge { kSubset, kAll };

struct RunConfig {
  std::uint64_t seed = 1;
  /// Seed for objective generation; defaults to `seed` when unset.
  std::optional<std::uint64_t> objective_seed;
  std::size_t dim = 10;
  std::size_t num_objectives = 3;
  std::size_t subset_size = 3;
  std::size_t merge_every = 1;
  std::size_t total_steps = 200;
  /// Raw preference weights; validated, never renormalized.
  std::vector<double> weights;
  LrMode lr_mode = LrMode::kTheorem;
  double constant_lr = 0.0;
  MergeStrategy merge_strategy = MergeStrategy::kFixed;
  std::vector<std::vector<double>> candidates;
  FinalMerge final_merge = FinalMerge::kSubset;
  double mu = 1.0;
  double L = 8.0;
  double spread = 1.0;
  std::size_t threads = 1;
  bool instrument_lemma1 = true;
  /// Test hook: pair merge coefficients with experts in reversed order.
  bool corrupt_merge_order = false;

  std::uint64_t objectives_seed() const { return objective_seed.value_or(seed); }
};

/// Collects every violated invariant; never stops at the first.
inline std::vector<std::string> validate_run_config(const RunConfig& cfg) {
  std::vector<std::string> v;
  const auto n = cfg.num_objectives;
  if (cfg.dim < 1) v.emplace_back("dimension must be at least 1");
  if (n < 1) v.emplace_back("number of objectives must be at least 1");
  if (cfg.subset_size < 1) v.emplace_back("M must be at least 1");
  if (cfg.subset_size > n) v.emplace_back("M exceeds N");
  if (cfg.total_steps < 1) v.emplace_back("T must be at least 1");
  if (cfg.merge_every < 1) v.emplace_back("m must be at least 1");
  if (cfg.merge_every > cfg.total_steps) v.emplace_back("m exceeds T");
  if (!(cfg.mu > 0.0)) v.emplace_back("mu must be positive");
  if (!(cfg.mu <= cfg.L)) v.emplace_back("mu exceeds L");
  if (!(cfg.spread >= 0.0)) v.emplace_back("spread must be non-negative");
  if (cfg.threads < 1) v.emplace_back("threads must be at least 1");
  if (cfg.lr_mode == LrMode::kConstant && !(cfg.constant_lr > 0.0 && std::isfinite(cfg.constant_lr))) {
    v.emplace_back("constant learning rate must be positive");
  }

  auto check_simplex = [&](const std::vector<double>& w, const std::string& what) {
    if (w.size() != n) {
      v.push_back(what + " length " + std::to_string(w.size()) + " does not match N=" + std::to_string(n));
    }
    double sum = 0.0;
    bool positive = true;
    for (double x : w) {
      if (!std::isfinite(x) || x <= 0.0) positive = false;
      sum += x;
    }
    if (!positive) v.push_back(what + " must be positive");
    if (std::abs(sum - 1.0) > kSimplexTol) v.push_back(what + " do not sum to 1");
  };
  check_simplex(cfg.weights, "weights");
  if (cfg.merge_strategy == MergeStrategy::kSelective) {
    if (cfg.candidates.empty()) v.emplace_back("selective merging needs at least one candidate weight set");
    for (std::size_t k = 0; k < cfg.candidates.size(); ++k) {
      check_simplex(cfg.candidates[k], "candidate " + std::to_string(k) + " weights");
    }
  }
  return v;
}

/// λ_i = w_i / Σ_{j∈S} w_j, ordered like s.indices.
inline std::vector<double> normalize_subset_weights(const PreferenceWeights& w, const SubsetSelection& s) {
  if (s.indices.empty()) throw Error("empty-subset", "normalize_subset_weights: empty subset");
  double total = 0.0;
  for (auto i : s.indices) {
    if (i >= w.size()) throw Error("bad-index", "normalize_subset_weights: index out of range");
    total += w[i];
  }
  std::vector<double> lambdas;
  lambdas.reserve(s.size());
  if (s.size() == w.size()) {
    // Full subset: identity, so λ = w bit-for-bit.
    for (auto i : s.indices) lambdas.push_back(w[i]);
    return lambdas;
  }
  for (auto i : s.indices) lambdas.push_back(w[i] / total);
  return lambdas;
}

/// Σ λ_k θ_k, accumulated in ascending k so that serial and parallel callers
/// produce identical bits.
inline ParameterVector convex_combine(std::span<const ParameterVector> params, std::span<const double> lambdas) {
  if (params.empty()) throw Error("empty-subset", "convex_combine: no parameters");
  if (params.size() != lambdas.size()) {
    throw Error("dimension-mismatch", "convex_combine: " + std::to_string(params.size()) + " vectors but " +
                                          std::to_string(lambdas.size()) + " coefficients");
  }
  double sum = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw Error("not-simplex", "convex_combine: negative coefficient");
    sum += l;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) throw Error("not-simplex", "convex_combine: coefficients do not sum to 1");

  const auto d = params.front().size();
  ParameterVector out = ParameterVector::Zero(d);
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_dim(params[k].size(), d, "convex_combine");
    out += lambdas[k] * params[k];
  }
  require_finite(out, "convex_combine");
  return out;
}

/// One parameter vector in a step record, with the losses of every objective
/// evaluated there.
struct StateRow {
  /// Expert index, or nullopt for a merged point.
  std::optional<std::size_t> expert;
  ParameterVector theta;
  std::vector<double> losses;
  double weighted_loss = 0.0;
};

/// Everything produced by one optimizer step. The record at t = 0 holds the
/// initial state. Expert rows carry post-step parameters; `merged` is set at
/// steps where a merge happened (sync steps and the closing merge).
struct StepRecord {
  std::size_t t = 0;
  double eta = 0.0;
  SubsetSelection subset;
  std::vector<StateRow> experts;
  std::optional<StateRow> merged;
  std::optional<double> lemma1_residual;

  bool is_sync() const noexcept { return merged.has_value(); }
};

enum class Algorithm { kIterativeRS, kMorlhf, kRewardedSoups };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kIterativeRS: return "iterative-rs";
    case Algorithm::kMorlhf: return "morlhf";
    case Algorithm::kRewardedSoups: return "rewarded-soups";
  }
  return "?";
}

struct Trajectory {
  Algorithm algorithm = Algorithm::kIterativeRS;
  std::vector<StepRecord> records;

  /// The output parameters: the last merged point.
  const ParameterVector& final_parameters() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
      if (it->merged) return it->merged->theta;
    }
    throw Error("empty-trajectory", "trajectory has no merged point");
  }
};

}  // namespace itrs

#endif  // ITRS_CORE_HPP_
