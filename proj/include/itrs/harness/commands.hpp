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

// Command implementations behind the CLI. Each returns a process exit code:
// 0 ok, 1 verification failure, 2 configuration error, 3 divergence.

#ifndef ITRS_HARNESS_COMMANDS_HPP_
#define ITRS_HARNESS_COMMANDS_HPP_

#include "itrs/analysis.hpp"
#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/harness/config.hpp"
#include "itrs/io.hpp"
#include "itrs/objectives.hpp"
#include "itrs/optimizer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace itrs::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

inline ObjectiveSet build_objectives(const RunConfig& cfg) {
  QuadraticSetParams p;
  p.seed = cfg.objectives_seed();
  p.num_objectives = cfg.num_objectives;
  p.dim = cfg.dim;
  p.mu = cfg.mu;
  p.L = cfg.L;
  p.spread = cfg.spread;
  return make_quadratic_set(p, PreferenceWeights(cfg.weights));
}

struct RunReport {
  double final_gap = 0.0;
  double delta_star = 0.0;
  double dist_ref_sq = 0.0;
  double gradient_bound = 0.0;
  std::optional<BoundInputs> bound_inputs;
  double bound_T = std::nan("");
  BoundTerms terms{std::nan(""), std::nan("")};
  bool scaled_constants = false;
  std::optional<double> lemma1_max_residual;
  std::size_t lemma1_steps = 0;
  std::optional<std::size_t> descent_increases;
  std::string baseline = "none";
  std::optional<double> baseline_deviation;
  double wall_ms = 0.0;
};

inline double max_abs_diff(const ParameterVector& a, const ParameterVector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Report quantities for a finished run. When the run is one of the two
/// limiting cases of IterativeRS (M = N with m = 1 or m = T) the matching
/// baseline is run as well and the largest parameter deviation recorded.
inline RunReport summarize_run(const ExperimentSpec& spec, const ObjectiveSet& set, const Trajectory& traj) {
  const auto& cfg = spec.cfg;
  RunReport rep;
  const auto opt = multiobjective_optimum(set);
  const auto gaps = gap_series(traj, set);
  rep.final_gap = gaps.back().gap;
  rep.delta_star = delta_star(set);
  rep.dist_ref_sq = opt.squaredNorm();

  // The bound is stated for uniform weights; other weights go through the
  // scaled losses, which change μ, L and the gradient norms but not θ* or Δ*.
  const bool uniform = set.weights().is_uniform();
  const ObjectiveSet bound_set = uniform ? set : scale_losses(set);
  rep.scaled_constants = !uniform;
  rep.gradient_bound = estimate_gradient_bound(traj, bound_set);
  if (spec.report_bound && cfg.lr_mode == LrMode::kTheorem) {
    BoundInputs bi;
    bi.mu = bound_set.mu();
    bi.L = bound_set.L();
    bi.G = rep.gradient_bound;
    bi.m = detail::effective_merge_every(traj.algorithm, cfg);
    bi.N = set.size();
    bi.M = traj.algorithm == Algorithm::kIterativeRS ? cfg.subset_size : set.size();
    bi.delta_star = std::max(0.0, rep.delta_star);
    bi.dist_ref_sq = rep.dist_ref_sq;
    rep.bound_inputs = bi;
    rep.bound_T = theorem1_bound(bi, cfg.total_steps);
    rep.terms = bound_decomposition(bi, cfg.total_steps);
  }

  for (const auto& r : traj.records) {
    if (r.lemma1_residual) {
      ++rep.lemma1_steps;
      rep.lemma1_max_residual = std::max(rep.lemma1_max_residual.value_or(-INFINITY), *r.lemma1_residual);
    }
  }

  if (traj.algorithm == Algorithm::kIterativeRS && cfg.subset_size == set.size()) {
    std::size_t increases = 0;
    std::optional<double> prev;
    for (const auto& r : traj.records) {
      if (!r.merged) continue;
      if (prev && r.merged->weighted_loss > *prev) ++increases;
      prev = r.merged->weighted_loss;
    }
    rep.descent_increases = increases;

    if (cfg.merge_every == 1) {
      const auto base = run_morlhf(set, cfg);
      double dev = 0.0;
      for (std::size_t k = 0; k < traj.records.size(); ++k) {
        dev = std::max(dev, max_abs_diff(traj.records[k].merged->theta, base.records[k].merged->theta));
      }
      rep.baseline = "morlhf";
      rep.baseline_deviation = dev;
    } else if (cfg.merge_every == cfg.total_steps) {
      const auto base = run_rewarded_soups(set, cfg);
      rep.baseline = "rewarded-soups";
      rep.baseline_deviation = max_abs_diff(traj.final_parameters(), base.final_parameters());
    }
  }
  return rep;
}

inline void write_report(std::ostream& os, const ExperimentSpec& spec, const ObjectiveSet& set, const RunReport& rep) {
  const auto& c = spec.cfg;
  auto opt_num = [](const std::optional<double>& x) { return x ? fmt::num(*x) : std::string("n/a"); };
  os << "# itrs run report\n";
  os << "algorithm = " << to_string(spec.algorithm) << "\n";
  os << "seed = " << c.seed << "\n";
  os << "objective_seed = " << c.objectives_seed() << "\n";
  os << "N = " << set.size() << "\nd = " << set.dim() << "\nM = " << c.subset_size << "\nm = " << c.merge_every
     << "\nT = " << c.total_steps << "\n";
  os << "weights = " << fmt::join_nums(set.weights().values()) << "\n";
  os << "lr = " << (c.lr_mode == LrMode::kTheorem ? std::string("theorem") : fmt::num(c.constant_lr)) << "\n";
  os << "mu = " << fmt::num(set.mu()) << "\nL = " << fmt::num(set.L()) << "\n";
  if (spec.report_gap) os << "final_gap = " << fmt::num(rep.final_gap) << "\n";
  os << "delta_star = " << fmt::num(rep.delta_star) << "\n";
  os << "dist_ref_sq = " << fmt::num(rep.dist_ref_sq) << "\n";
  os << "G = " << fmt::num(rep.gradient_bound) << "\n";
  os << "G_note = post-hoc estimate: largest gradient norm observed along this run; the bound below "
        "consumes a constant measured on the trajectory it bounds\n";
  if (rep.bound_inputs) {
    os << "bound_mu = " << fmt::num(rep.bound_inputs->mu) << "\nbound_L = " << fmt::num(rep.bound_inputs->L) << "\n";
    os << "bound_m = " << rep.bound_inputs->m << "\nbound_gamma = " << fmt::num(rep.bound_inputs->gamma()) << "\n";
    os << "bound_T = " << fmt::num(rep.bound_T) << "\nA1 = " << fmt::num(rep.terms.A1)
       << "\nA2 = " << fmt::num(rep.terms.A2) << "\n";
    if (rep.scaled_constants) os << "bound_note = non-uniform weights: constants and G taken from the scaled losses w_i*N*L_i\n";
  } else {
    os << "bound_T = n/a\nbound_note = bound evaluated only for the theorem step-size schedule\n";
  }
  os << "lemma1_steps_checked = " << rep.lemma1_steps << "\n";
  os << "lemma1_max_residual = " << opt_num(rep.lemma1_max_residual) << "\n";
  if (rep.descent_increases) os << "descent_increases = " << *rep.descent_increases << "\n";
  os << "baseline = " << rep.baseline << "\n";
  os << "baseline_max_abs_deviation = " << opt_num(rep.baseline_deviation) << "\n";
  os << "wall_ms = " << fmt::num(rep.wall_ms) << "\n";
}

struct RunResult {
  int exit_code = kExitOk;
  std::optional<RunReport> report;
};

/// Runs one experiment and writes trajectory.csv, objectives.txt and
/// report.txt under spec.out_dir.
inline RunResult execute_run(const ExperimentSpec& spec, std::ostream& err) {
  auto violations = validate_run_config(spec.cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) err << "config error: " << v << "\n";
    return {kExitConfig, std::nullopt};
  }
  std::optional<ObjectiveSet> set;
  try {
    set = build_objectives(spec.cfg);
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return {kExitConfig, std::nullopt};
  }

  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  if (ec) {
    err << "config error: cannot create output directory " << spec.out_dir << ": " << ec.message() << "\n";
    return {kExitConfig, std::nullopt};
  }
  {
    std::ofstream f(spec.out_dir / "objectives.txt");
    write_objective_set(f, *set);
  }

  const auto t0 = std::chrono::steady_clock::now();
  Trajectory traj;
  try {
    traj = run_algorithm(spec.algorithm, *set, spec.cfg);
  } catch (const DivergenceError& e) {
    err << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return {kExitDiverged, std::nullopt};
  }
  const double wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream f(spec.out_dir / "trajectory.csv");
    write_trajectory_csv(f, tabulate(traj, *set));
  }
  auto rep = summarize_run(spec, *set, traj);
  rep.wall_ms = wall_ms;
  {
    std::ofstream f(spec.out_dir / "report.txt");
    write_report(f, spec, *set, rep);
  }
  return {kExitOk, rep};
}

inline int cmd_run(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
  const auto res = execute_run(spec, err);
  if (res.exit_code == kExitOk) {
    out << "wrote " << (spec.out_dir / "trajectory.csv").string() << "\n";
    out << "final_gap = " << fmt::num(res.report->final_gap) << "\n";
    if (res.report->baseline_deviation) {
      out << "baseline " << res.report->baseline << " max_abs_deviation = " << fmt::num(*res.report->baseline_deviation)
          << "\n";
    }
  }
  return res.exit_code;
}

/// One subdirectory per value plus summary.csv with
/// value,final_gap,bound_T,A1,A2,wall_ms. Every value is validated before the
/// first run; a divergence stops the sweep and leaves a partial summary.
inline int cmd_sweep(const SweepSpec& sweep, std::ostream& out, std::ostream& err) {
  if (sweep.values.empty()) {
    err << "config error: sweep needs at least one value\n";
    return kExitConfig;
  }
  std::vector<ExperimentSpec> specs;
  bool bad = false;
  for (const auto& token : sweep.values) {
    try {
      specs.push_back(apply_sweep_value(sweep, token));
    } catch (const Error& e) {
      err << "config error: value '" << token << "': " << e.what() << "\n";
      bad = true;
      continue;
    }
    for (const auto& v : validate_run_config(specs.back().cfg)) {
      err << "config error: value '" << token << "': " << v << "\n";
      bad = true;
    }
  }
  if (bad) return kExitConfig;

  std::error_code ec;
  std::filesystem::create_directories(sweep.base.out_dir, ec);
  if (ec) {
    err << "config error: cannot create " << sweep.base.out_dir << "\n";
    return kExitConfig;
  }
  std::ofstream summary(sweep.base.out_dir / "summary.csv");
  summary << "value,final_gap,bound_T,A1,A2,wall_ms\n";
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto res = execute_run(specs[k], err);
    if (res.exit_code != kExitOk) {
      err << "sweep aborted at value '" << sweep.values[k] << "'\n";
      return res.exit_code;
    }
    const auto& r = *res.report;
    summary << sweep.values[k] << ',' << fmt::num(r.final_gap) << ',' << fmt::num(r.bound_T) << ','
            << fmt::num(r.terms.A1) << ',' << fmt::num(r.terms.A2) << ',' << fmt::num(r.wall_ms) << '\n';
    summary.flush();
  }
  out << "wrote " << (sweep.base.out_dir / "summary.csv").string() << " (" << specs.size() << " rows)\n";
  return kExitOk;
}

/// Pure bound evaluation: CSV of T,bound,A1,A2 for T in [t_from, t_to].
inline int cmd_bound(const BoundInputs& bi, std::size_t t_from, std::size_t t_to, std::ostream& out,
                     std::ostream& err) {
  const auto v = bi.violations();
  if (!v.empty() || t_from < 1 || t_to < t_from) {
    for (const auto& s : v) err << "config error: " << s << "\n";
    if (t_from < 1 || t_to < t_from) err << "config error: need 1 <= T-from <= T-to\n";
    return kExitConfig;
  }
  out << "T,bound,A1,A2\n";
  for (std::size_t T = t_from; T <= t_to; ++T) {
    const auto terms = bound_decomposition(bi, T);
    out << T << ',' << fmt::num(theorem1_bound(bi, T)) << ',' << fmt::num(terms.A1) << ',' << fmt::num(terms.A2)
        << '\n';
  }
  return kExitOk;
}

inline std::optional<RewardTable> load_rewards(const std::filesystem::path& path, std::ostream& err) {
  std::ifstream f(path);
  if (!f) {
    err << "config error: cannot open " << path << "\n";
    return std::nullopt;
  }
  try {
    return read_reward_csv(f);
  } catch (const Error& e) {
    err << "config error: " << path.string() << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

/// Writes front.csv and front_means.csv into out_dir, or both tables to `out`
/// when out_dir is empty.
inline int cmd_pareto(const std::filesystem::path& input, const std::filesystem::path& out_dir, std::ostream& out,
                      std::ostream& err) {
  const auto table = load_rewards(input, err);
  if (!table) return kExitConfig;
  const auto front = pareto_front(table->rows);
  const auto means = front_mean_rewards(table->rows, front);
  if (out_dir.empty()) {
    write_front_csv(out, *table, front);
    out << "\n";
    write_front_means_csv(out, means);
    return kExitOk;
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream f1(out_dir / "front.csv");
  write_front_csv(f1, *table, front);
  std::ofstream f2(out_dir / "front_means.csv");
  write_front_means_csv(f2, means);
  out << "front size = " << front.size() << " of " << table->rows.size() << "\n";
  return kExitOk;
}

inline int cmd_icv(const std::filesystem::path& input, double epsilon, std::ostream& out, std::ostream& err) {
  const auto table = load_rewards(input, err);
  if (!table) return kExitConfig;
  if (table->objectives() < 2) {
    err << "config error: ICV needs at least two objectives\n";
    return kExitConfig;
  }
  if (!(epsilon > 0.0)) {
    err << "config error: epsilon must be positive\n";
    return kExitConfig;
  }
  const auto r = icv_score(table->matrix(), epsilon);
  out << "icv = " << fmt::num(r.score) << "\n";
  out << "samples = " << table->rows.size() << "\n";
  out << "guarded_samples = " << r.guarded << "\n";
  if (r.guarded > 0) out << "note = " << r.guarded << " sample(s) had std below epsilon; their ratio used epsilon\n";
  return kExitOk;
}

}  // namespace itrs::harness

#endif  // ITRS_HARNESS_COMMANDS_HPP_
