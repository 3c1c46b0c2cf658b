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

// Self-check battery behind `itrs verify`. Every check prints one JSON line
// {"check", "pass", "detail"}; the command fails if any check fails.

#ifndef ITRS_HARNESS_VERIFY_HPP_
#define ITRS_HARNESS_VERIFY_HPP_

#include "itrs/analysis.hpp"
#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/harness/commands.hpp"
#include "itrs/io.hpp"
#include "itrs/objectives.hpp"
#include "itrs/optimizer.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace itrs::harness {

enum class VerifyLevel { kFast, kFull };

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::kFast;
  /// Negative control: corrupt the merge order in every run.
  bool corrupt_merge_order = false;
};

struct CheckResult {
  bool pass = false;
  std::string detail;
};

namespace verify_detail {

inline RunConfig base_config(std::size_t seed, const VerifyOptions& opts) {
  RunConfig c;
  c.seed = seed;
  c.dim = 10;
  c.num_objectives = 3;
  c.subset_size = 3;
  c.mu = 1.0;
  c.L = 8.0;
  c.spread = 1.0;
  c.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  c.total_steps = 200;
  c.corrupt_merge_order = opts.corrupt_merge_order;
  return c;
}

inline ParameterVector random_point(RandomStream& rng, Eigen::Index d, double scale) {
  ParameterVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = scale * rng.normal();
  return v;
}

inline CheckResult gradient_oracle(const VerifyOptions&) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto set = build_objectives(base_config(seed, {}));
    RandomStream rng(seed, StreamRole::kProbe, 0);
    for (int p = 0; p < 100; ++p) {
      const auto& obj = set[rng.index(set.size())];
      const auto theta = random_point(rng, set.dim(), 2.0);
      const auto g = eval_grad(obj, theta);
      const auto fd = finite_diff_grad(obj, theta, 1e-4);
      worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-12));
    }
  }
  return {worst <= 1e-6, "max relative error " + fmt::num(worst)};
}

inline CheckResult curvature_certificates(const VerifyOptions&) {
  std::size_t failures = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto set = build_objectives(base_config(seed, {}));
    RandomStream rng(seed, StreamRole::kProbe, 1);
    for (int p = 0; p < 100; ++p) {
      const auto& obj = set[rng.index(set.size())];
      const auto a = random_point(rng, set.dim(), 2.0);
      const auto b = random_point(rng, set.dim(), 2.0);
      const double lin = eval_loss(obj, b) + eval_grad(obj, b).dot(a - b);
      const double sq = (a - b).squaredNorm();
      const double la = eval_loss(obj, a);
      const double slack = 1e-9 * (1.0 + std::abs(la));
      if (la > lin + 0.5 * obj.L() * sq + slack) ++failures;
      if (la < lin + 0.5 * obj.mu() * sq - slack) ++failures;
    }
  }
  return {failures == 0, std::to_string(failures) + " certificate violations over 300 probes"};
}

inline CheckResult optimum_and_gap(const VerifyOptions&) {
  double worst_grad = 0.0, worst_delta = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto set = build_objectives(base_config(seed, {}));
    const auto opt = multiobjective_optimum(set);
    worst_grad = std::max(worst_grad, weighted_grad(set, opt).norm());
    double closed = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const ParameterVector r = opt - set[i].minimizer();
      closed += set.weights()[i] * 0.5 * r.dot(set[i].A() * r);
    }
    worst_delta = std::max(worst_delta, std::abs(closed - delta_star(set)));
  }
  return {worst_grad <= 1e-9 && worst_delta <= 1e-10,
          "grad norm at optimum " + fmt::num(worst_grad) + ", delta* mismatch " + fmt::num(worst_delta)};
}

inline CheckResult morlhf_equivalence(const VerifyOptions& opts) {
  auto cfg = base_config(7, opts);
  cfg.weights = {0.5, 0.25, 0.25};
  cfg.merge_every = 1;
  const auto set = build_objectives(cfg);
  const auto a = run_iterative_rs(set, cfg);
  const auto b = run_morlhf(set, cfg);
  double dev = 0.0;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    dev = std::max(dev, max_abs_diff(a.records[k].merged->theta, b.records[k].merged->theta));
  }
  return {dev <= 1e-9, "max abs deviation " + fmt::num(dev)};
}

inline CheckResult soups_equivalence(const VerifyOptions& opts) {
  auto cfg = base_config(7, opts);
  cfg.weights = {0.5, 0.25, 0.25};
  cfg.merge_every = cfg.total_steps;
  const auto set = build_objectives(cfg);
  const double dev =
      max_abs_diff(run_iterative_rs(set, cfg).final_parameters(), run_rewarded_soups(set, cfg).final_parameters());
  return {dev <= 1e-9, "max abs deviation " + fmt::num(dev)};
}

inline CheckResult lemma1(const VerifyOptions& opts) {
  double worst = -INFINITY;
  std::size_t steps = 0;
  for (std::size_t m : {1, 4, 16}) {
    auto cfg = base_config(3, opts);
    cfg.merge_every = m;
    const auto set = build_objectives(cfg);
    for (const auto& r : run_iterative_rs(set, cfg).records) {
      if (r.lemma1_residual) {
        ++steps;
        worst = std::max(worst, *r.lemma1_residual);
      }
    }
  }
  return {steps > 0 && worst <= 1e-9, std::to_string(steps) + " steps, max residual " + fmt::num(worst)};
}

inline CheckResult bound_fixture(const VerifyOptions&) {
  BoundInputs bi;
  bi.mu = 1.0;
  bi.L = 1.0;
  bi.m = 1;
  bi.N = 3;
  bi.M = 3;
  bi.delta_star = 0.5;
  const double b = theorem1_bound(bi, 1);
  const auto t = bound_decomposition(bi, 1);
  return {std::abs(b - 0.75) <= 1e-12 && std::abs(t.A1 - 0.75) <= 1e-12 && std::abs(t.A2) <= 1e-12,
          "bound " + fmt::num(b) + " A1 " + fmt::num(t.A1) + " A2 " + fmt::num(t.A2)};
}

inline CheckResult bound_respect(const VerifyOptions& opts, std::uint64_t instances) {
  std::size_t checked = 0, violations = 0;
  for (std::uint64_t seed = 1; seed <= instances; ++seed) {
    for (std::size_t m : {1, 4, 16}) {
      auto cfg = base_config(seed, opts);
      cfg.merge_every = m;
      const auto set = build_objectives(cfg);
      const auto traj = run_iterative_rs(set, cfg);
      BoundInputs bi;
      bi.mu = set.mu();
      bi.L = set.L();
      bi.G = estimate_gradient_bound(traj, set);
      bi.m = m;
      bi.N = set.size();
      bi.M = cfg.subset_size;
      bi.delta_star = std::max(0.0, delta_star(set));
      bi.dist_ref_sq = multiobjective_optimum(set).squaredNorm();
      for (const auto& g : gap_series(traj, set)) {
        if (g.t == 0) continue;
        ++checked;
        if (g.gap > theorem1_bound(bi, g.t) + 1e-9) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(checked) + " sync steps"};
}

inline CheckResult metrics_fixtures(const VerifyOptions&) {
  const auto icv = icv_score(RewardMatrix::from_rows({{1.0, 2.0, 3.0}})).score;
  const std::vector<std::vector<double>> pts = {{1, 1}, {2, 0.5}, {0.5, 2}, {0.9, 0.9}};
  const auto front = pareto_front(pts);
  const bool pareto_ok = front == std::vector<std::size_t>{0, 1, 2};
  return {std::abs(icv - 2.44949) <= 1e-5 && pareto_ok,
          "icv(1,2,3) = " + fmt::num(icv) + ", front size " + std::to_string(front.size())};
}

inline CheckResult determinism(const VerifyOptions& opts) {
  auto cfg = base_config(11, opts);
  cfg.num_objectives = 4;
  cfg.weights = {0.25, 0.25, 0.25, 0.25};
  cfg.subset_size = 2;
  cfg.merge_every = 4;
  const auto set = build_objectives(cfg);
  auto render = [&](std::size_t threads) {
    cfg.threads = threads;
    std::ostringstream os;
    write_trajectory_csv(os, tabulate(run_iterative_rs(set, cfg), set));
    return os.str();
  };
  const auto a = render(1), b = render(1), c = render(3);
  return {a == b && a == c, a == b && a == c ? "serial and 3-thread trajectories identical" : "trajectories differ"};
}

inline CheckResult sampling_unbiasedness(const VerifyOptions& opts) {
  auto cfg = base_config(5, opts);
  cfg.num_objectives = 6;
  cfg.subset_size = 2;
  cfg.dim = 4;
  cfg.weights.assign(6, 1.0 / 6.0);
  const auto set = build_objectives(cfg);
  RandomStream values(5, StreamRole::kProbe, 2);
  OptimizerState fixed;
  for (std::size_t i = 0; i < 6; ++i) fixed.experts.push_back(random_point(values, 4, 1.0));
  const auto psi = convex_combine(fixed.experts, set.weights().values());

  RandomStream sampler(5, StreamRole::kSampler, 0);
  fixed.subset = sample_subset(sampler, 6, 2);
  const std::size_t K = 10000;
  ParameterVector sum = ParameterVector::Zero(4), sumsq = ParameterVector::Zero(4);
  for (std::size_t k = 0; k < K; ++k) {
    const auto out = sync_and_merge(fixed, cfg, set, MergeOptions::from(cfg), sampler);
    sum += out.rho;
    sumsq += out.rho.cwiseProduct(out.rho);
    fixed.subset = out.new_subset;
  }
  const ParameterVector mean = sum / static_cast<double>(K);
  bool ok = true;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double var = (sumsq[j] - static_cast<double>(K) * mean[j] * mean[j]) / static_cast<double>(K - 1);
    const double tol = 3.0 * std::sqrt(var) / std::sqrt(static_cast<double>(K));
    worst = std::max(worst, std::abs(mean[j] - psi[j]) / tol);
    ok = ok && std::abs(mean[j] - psi[j]) <= tol;
  }
  return {ok, "largest |mean - psi| / (3 sigma/sqrt K) = " + fmt::num(worst)};
}

inline CheckResult convergence_rate(const VerifyOptions& opts) {
  const std::vector<std::size_t> Ts = {256, 512, 1024, 2048, 4096};
  std::vector<double> mean_gap(Ts.size(), 0.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = base_config(seed, opts);
    cfg.merge_every = 4;
    cfg.total_steps = Ts.back();
    cfg.instrument_lemma1 = false;
    const auto set = build_objectives(cfg);
    const auto gaps = gap_series(run_iterative_rs(set, cfg), set);
    for (std::size_t k = 0; k < Ts.size(); ++k) {
      for (const auto& g : gaps) {
        if (g.t == Ts[k]) mean_gap[k] += g.gap / 10.0;
      }
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(Ts.size());
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    const double x = std::log(static_cast<double>(Ts[k])), y = std::log(mean_gap[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope <= -0.8, "log-log slope " + fmt::num(slope)};
}

}  // namespace verify_detail

/// Runs the battery, prints one JSON line per check to `out`, names the first
/// failing check on `err`. Returns 0 iff every check passed.
inline int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  using namespace verify_detail;
  using Check = std::pair<std::string, std::function<CheckResult()>>;
  std::vector<Check> checks = {
      {"gradient_oracle", [&] { return gradient_oracle(opts); }},
      {"curvature_certificates", [&] { return curvature_certificates(opts); }},
      {"optimum_and_delta_star", [&] { return optimum_and_gap(opts); }},
      {"morlhf_equivalence", [&] { return morlhf_equivalence(opts); }},
      {"rewarded_soups_equivalence", [&] { return soups_equivalence(opts); }},
      {"lemma1_residual", [&] { return lemma1(opts); }},
      {"bound_fixture", [&] { return bound_fixture(opts); }},
      {"metric_fixtures", [&] { return metrics_fixtures(opts); }},
      {"determinism", [&] { return determinism(opts); }},
  };
  if (opts.level == VerifyLevel::kFast) {
    checks.emplace_back("bound_respect", [&] { return bound_respect(opts, 3); });
  } else {
    checks.emplace_back("bound_respect", [&] { return bound_respect(opts, 20); });
    checks.emplace_back("sampling_unbiasedness", [&] { return sampling_unbiasedness(opts); });
    checks.emplace_back("convergence_rate", [&] { return convergence_rate(opts); });
  }

  std::optional<std::string> first_failure;
  std::size_t passed = 0;
  for (const auto& [name, fn] : checks) {
    CheckResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    nlohmann::json line = {{"check", name}, {"pass", r.pass}, {"detail", r.detail}};
    out << line.dump() << "\n";
    if (r.pass) ++passed;
    else if (!first_failure) first_failure = name;
  }
  nlohmann::json summary = {{"summary", opts.level == VerifyLevel::kFast ? "fast" : "full"},
                            {"passed", passed},
                            {"total", checks.size()}};
  out << summary.dump() << "\n";
  if (first_failure) {
    err << "verify failed: " << *first_failure << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

}  // namespace itrs::harness

#endif  // ITRS_HARNESS_VERIFY_HPP_
