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

#ifndef ITRS_SCHEDULE_HPP_
#define ITRS_SCHEDULE_HPP_

#include "itrs/core.hpp"

#include <algorithm>

namespace itrs {

/// Step-size schedule. In theorem mode η_t = 2 / (μ(γ + t)) with
/// γ = max{8L/μ, m} - 1; in constant mode η_t = eta for every t.
struct ScheduleParams {
  double mu = 1.0;
  double L = 1.0;
  std::size_t m = 1;
  LrMode mode = LrMode::kTheorem;
  double constant_eta = 0.0;

  double gamma() const { return std::max(8.0 * L / mu, static_cast<double>(m)) - 1.0; }

  /// η_1 <= min{1/μ, 1/(4L)} and η_t <= 2 η_{t+m}. Both reduce to closed
  /// forms for the theorem schedule; the ratio η_t / η_{t+m} is largest at
  /// t = 1.
  bool theorem_conditions_hold() const {
    if (mode != LrMode::kTheorem) return false;
    const double eta1 = 2.0 / (mu * (gamma() + 1.0));
    const double ratio = (gamma() + 1.0 + static_cast<double>(m)) / (gamma() + 1.0);
    return eta1 <= std::min(1.0 / mu, 1.0 / (4.0 * L)) * (1.0 + 1e-15) && ratio <= 2.0;
  }
};

inline double lr_schedule(std::size_t t, const ScheduleParams& sp) {
  if (t < 1) throw Error("bad-step", "lr_schedule: t must be >= 1");
  if (sp.mode == LrMode::kConstant) return sp.constant_eta;
  return 2.0 / (sp.mu * (sp.gamma() + static_cast<double>(t)));
}

}  // namespace itrs

#endif  // ITRS_SCHEDULE_HPP_
