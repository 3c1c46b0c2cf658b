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


// itrs command-line driver: run, sweep, verify, bound, pareto, icv.

#include "itrs/harness/commands.hpp"
#include "itrs/harness/config.hpp"
#include "itrs/harness/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace itrs;
using namespace itrs::harness;

struct ExperimentFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> direct;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path, "key = value config file");
  cmd->add_option("--set", flags.overrides, "override a key (key=value), repeatable");
  for (const auto& info : known_keys()) {
    std::string name = info.key;
    for (auto& ch : name) {
      if (ch == '_') ch = '-';
    }
    cmd->add_option_function<std::string>(
        "--" + name, [&flags, key = std::string(info.key)](const std::string& v) { flags.direct[key] = v; },
        info.help);
  }
}

ConfigMap collect(const ExperimentFlags& flags) {
  ConfigMap m = default_config();
  if (!flags.config_path.empty()) {
    std::ifstream f(flags.config_path);
    if (!f) throw Error("config", "cannot open config file '" + flags.config_path + "'");
    parse_config_text(f, m);
  }
  for (const auto& [k, v] : flags.direct) m[k] = v;
  for (const auto& kv : flags.overrides) apply_override(m, kv);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"itrs: iterative expert merging for multi-objective optimization"};
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  auto* run = app.add_subcommand("run", "run one experiment and write trajectory.csv, objectives.txt, report.txt");
  add_experiment_flags(run, run_flags);

  ExperimentFlags sweep_flags;
  std::string axis = "m";
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "run one experiment per value of an axis and write summary.csv");
  add_experiment_flags(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "m | M | T | seed");
  sweep->add_option("--values", values, "comma separated values; 'T' on the m axis means the step count")->required();

  std::string level = "fast";
  bool fault_merge = false;
  auto* verify = app.add_subcommand("verify", "run the self-check battery");
  verify->add_option("--level", level, "fast | full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_flag("--fault-merge-order", fault_merge, "negative control: corrupt merge coefficients");

  BoundInputs bi;
  std::size_t t_from = 1, t_to = 100;
  auto* bound = app.add_subcommand("bound", "print T,bound,A1,A2 without simulating");
  bound->add_option("--mu", bi.mu)->required();
  bound->add_option("--L", bi.L)->required();
  bound->add_option("--G", bi.G);
  bound->add_option("--m", bi.m);
  bound->add_option("--M", bi.M)->required();
  bound->add_option("--N", bi.N)->required();
  bound->add_option("--delta-star", bi.delta_star);
  bound->add_option("--dist-sq", bi.dist_ref_sq);
  bound->add_option("--t-from", t_from);
  bound->add_option("--t-to", t_to);

  std::string pareto_in, pareto_out;
  auto* pareto = app.add_subcommand("pareto", "extract the Pareto front of a reward CSV");
  pareto->add_option("input", pareto_in, "reward CSV (sample_id,r_1..r_N)")->required();
  pareto->add_option("-o,--out", pareto_out, "directory for front.csv and front_means.csv (default: stdout)");

  std::string icv_in;
  double eps = 1e-9;
  auto* icv = app.add_subcommand("icv", "score a reward CSV by inverse coefficient of variation");
  icv->add_option("input", icv_in, "reward CSV (sample_id,r_1..r_N)")->required();
  icv->add_option("--epsilon", eps, "std floor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(build_experiment(collect(run_flags)), std::cout, std::cerr);
    if (*sweep) {
      SweepSpec s;
      s.base = build_experiment(collect(sweep_flags));
      s.axis = parse_axis(axis);
      for (auto v : fmt::split(values, ',')) s.values.emplace_back(fmt::trim(v));
      return cmd_sweep(s, std::cout, std::cerr);
    }
    if (*verify) {
      VerifyOptions opts;
      opts.level = level == "full" ? VerifyLevel::kFull : VerifyLevel::kFast;
      opts.corrupt_merge_order = fault_merge;
      return cmd_verify(opts, std::cout, std::cerr);
    }
    if (*bound) return cmd_bound(bi, t_from, t_to, std::cout, std::cerr);
    if (*pareto) return cmd_pareto(pareto_in, pareto_out, std::cout, std::cerr);
    if (*icv) return cmd_icv(icv_in, eps, std::cout, std::cerr);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
