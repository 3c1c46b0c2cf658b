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

// Experiment configuration: a `key = value` text file with optional
// [section] headers, overridable key by key from the command line.
//
//   [run]        algorithm seed objective_seed out threads lemma1 bound gap
//   [problem]    dim objectives mu L spread weights
//   [optimizer]  subset_size merge_every steps lr merge candidates final_merge
//
// Section headers are cosmetic; keys are unique across sections.

#ifndef ITRS_HARNESS_CONFIG_HPP_
#define ITRS_HARNESS_CONFIG_HPP_

#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/optimizer.hpp"

#include <cstdlib>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace itrs::harness {

struct KeyInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

inline const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"algorithm", "iterative-rs", "iterative-rs | morlhf | rewarded-soups"},
      {"seed", "1", "master seed (subset sampling)"},
      {"objective_seed", "", "seed for the objective family (defaults to seed)"},
      {"out", "", "output directory (default: $ITRS_OUTPUT_ROOT/<algorithm>-s<seed>)"},
      {"threads", "1", "worker threads for expert steps"},
      {"lemma1", "true", "record the per-step contraction residual when M = N"},
      {"bound", "true", "evaluate the convergence bound in the report"},
      {"gap", "true", "report the final performance gap"},
      {"dim", "10", "parameter dimension d"},
      {"objectives", "3", "number of objectives N"},
      {"mu", "1", "strong-convexity constant"},
      {"L", "8", "smoothness constant"},
      {"spread", "1", "radius of the ball holding the per-objective minimizers"},
      {"weights", "uniform", "preference weights (space separated, fractions allowed) or 'uniform'"},
      {"subset_size", "", "objectives active per window M (default: N)"},
      {"merge_every", "1", "merge frequency m"},
      {"steps", "200", "total steps T"},
      {"lr", "theorem", "'theorem' for 2/(mu(gamma+t)) or a constant step size"},
      {"merge", "fixed", "fixed | selective"},
      {"candidates", "default", "selective candidate sets, ';' separated, or 'default' (N = 3 only)"},
      {"final_merge", "subset", "closing merge over the last active subset or 'all' experts"},
      {"fault", "none", "test hook: 'merge-order' reverses merge coefficients"},
  };
  return keys;
}

using ConfigMap = std::map<std::string, std::string>;

inline bool is_known_key(const std::string& k) {
  for (const auto& info : known_keys()) {
    if (k == info.key) return true;
  }
  return false;
}

inline ConfigMap default_config() {
  ConfigMap m;
  for (const auto& info : known_keys()) m[info.key] = info.default_value;
  return m;
}

/// Overlays `key = value` lines from `is` onto `into`.
inline void parse_config_text(std::istream& is, ConfigMap& into) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = fmt::trim(line);
    if (s.empty() || s.front() == '#' || s.front() == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error("config", "line " + std::to_string(lineno) + ": bad section header");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error("config", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(fmt::trim(s.substr(0, eq)));
    if (!is_known_key(key)) throw Error("config", "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    into[key] = std::string(fmt::trim(s.substr(eq + 1)));
  }
}

/// Applies "key=value" overrides; command-line values win over the file.
inline void apply_override(ConfigMap& into, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw Error("config", "override '" + kv + "' is not key=value");
  const std::string key(fmt::trim(std::string_view(kv).substr(0, eq)));
  if (!is_known_key(key)) throw Error("config", "unknown key '" + key + "'");
  into[key] = std::string(fmt::trim(std::string_view(kv).substr(eq + 1)));
}

struct ExperimentSpec {
  RunConfig cfg;
  Algorithm algorithm = Algorithm::kIterativeRS;
  std::filesystem::path out_dir;
  bool report_bound = true;
  bool report_gap = true;
};

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "iterative-rs" || s == "iterativers") return Algorithm::kIterativeRS;
  if (s == "morlhf") return Algorithm::kMorlhf;
  if (s == "rewarded-soups" || s == "rs") return Algorithm::kRewardedSoups;
  throw Error("config", "unknown algorithm '" + s + "'");
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error("config", "not a boolean: '" + s + "'");
}

inline std::filesystem::path default_output_dir(Algorithm a, std::uint64_t seed) {
  const char* root = std::getenv("ITRS_OUTPUT_ROOT");
  std::filesystem::path base = (root && *root) ? root : "itrs-out";
  return base / (std::string(to_string(a)) + "-s" + std::to_string(seed));
}

/// Builds the spec from a fully merged key map. Parse failures throw
/// Error("config"); semantic checks are left to validate_run_config.
inline ExperimentSpec build_experiment(const ConfigMap& raw) {
  ConfigMap m = default_config();
  for (const auto& [k, v] : raw) m[k] = v;

  ExperimentSpec spec;
  auto& c = spec.cfg;
  try {
    spec.algorithm = parse_algorithm(m["algorithm"]);
    c.seed = fmt::parse_u64(m["seed"]);
    if (!m["objective_seed"].empty()) c.objective_seed = fmt::parse_u64(m["objective_seed"]);
    c.threads = fmt::parse_u64(m["threads"]);
    c.instrument_lemma1 = parse_bool(m["lemma1"]);
    spec.report_bound = parse_bool(m["bound"]);
    spec.report_gap = parse_bool(m["gap"]);
    c.dim = fmt::parse_u64(m["dim"]);
    c.num_objectives = fmt::parse_u64(m["objectives"]);
    c.mu = fmt::parse_double(m["mu"]);
    c.L = fmt::parse_double(m["L"]);
    c.spread = fmt::parse_double(m["spread"]);
    if (m["weights"] == "uniform") {
      c.weights.assign(c.num_objectives, c.num_objectives ? 1.0 / static_cast<double>(c.num_objectives) : 0.0);
    } else {
      c.weights = fmt::parse_doubles(m["weights"]);
    }
    c.subset_size = m["subset_size"].empty() ? c.num_objectives : fmt::parse_u64(m["subset_size"]);
    c.merge_every = fmt::parse_u64(m["merge_every"]);
    c.total_steps = fmt::parse_u64(m["steps"]);
    if (m["lr"] == "theorem") {
      c.lr_mode = LrMode::kTheorem;
    } else {
      c.lr_mode = LrMode::kConstant;
      c.constant_lr = fmt::parse_double(m["lr"]);
    }
    if (m["merge"] == "fixed") {
      c.merge_strategy = MergeStrategy::kFixed;
    } else if (m["merge"] == "selective") {
      c.merge_strategy = MergeStrategy::kSelective;
    } else {
      throw Error("config", "merge must be 'fixed' or 'selective'");
    }
    if (c.merge_strategy == MergeStrategy::kSelective) {
      if (m["candidates"] == "default") {
        if (c.num_objectives == 3) c.candidates = default_candidates_n3();
      } else {
        for (auto part : fmt::split(m["candidates"], ';')) {
          if (!fmt::trim(part).empty()) c.candidates.push_back(fmt::parse_doubles(part));
        }
      }
    }
    if (m["final_merge"] == "subset") {
      c.final_merge = FinalMerge::kSubset;
    } else if (m["final_merge"] == "all") {
      c.final_merge = FinalMerge::kAll;
    } else {
      throw Error("config", "final_merge must be 'subset' or 'all'");
    }
    if (m["fault"] == "merge-order") {
      c.corrupt_merge_order = true;
    } else if (m["fault"] != "none") {
      throw Error("config", "unknown fault '" + m["fault"] + "'");
    }
  } catch (const Error& e) {
    if (e.code() == "config") throw;
    throw Error("config", e.what());
  }
  spec.out_dir = m["out"].empty() ? default_output_dir(spec.algorithm, c.seed) : std::filesystem::path(m["out"]);
  return spec;
}

enum class SweepAxis { kMergeEvery, kSubsetSize, kSteps, kSeed };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "m") return SweepAxis::kMergeEvery;
  if (s == "M") return SweepAxis::kSubsetSize;
  if (s == "T") return SweepAxis::kSteps;
  if (s == "seed") return SweepAxis::kSeed;
  throw Error("config", "sweep axis must be one of m, M, T, seed");
}

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kMergeEvery: return "m";
    case SweepAxis::kSubsetSize: return "M";
    case SweepAxis::kSteps: return "T";
    case SweepAxis::kSeed: return "seed";
  }
  return "?";
}

struct SweepSpec {
  ExperimentSpec base;
  SweepAxis axis = SweepAxis::kMergeEvery;
  /// Raw tokens; "T" on the m axis stands for the base total step count.
  std::vector<std::string> values;
};

/// Applies one sweep value to a copy of the base spec.
inline ExperimentSpec apply_sweep_value(const SweepSpec& sweep, const std::string& token) {
  ExperimentSpec spec = sweep.base;
  std::uint64_t v = 0;
  if (sweep.axis == SweepAxis::kMergeEvery && token == "T") {
    v = spec.cfg.total_steps;
  } else {
    try {
      v = fmt::parse_u64(token);
    } catch (const Error& e) {
      throw Error("config", e.what());
    }
  }
  switch (sweep.axis) {
    case SweepAxis::kMergeEvery: spec.cfg.merge_every = v; break;
    case SweepAxis::kSubsetSize: spec.cfg.subset_size = v; break;
    case SweepAxis::kSteps: spec.cfg.total_steps = v; break;
    case SweepAxis::kSeed: spec.cfg.seed = v; break;
  }
  spec.out_dir = sweep.base.out_dir / (std::string(axis_name(sweep.axis)) + "=" + token);
  return spec;
}

}  // namespace itrs::harness

#endif  // ITRS_HARNESS_CONFIG_HPP_
