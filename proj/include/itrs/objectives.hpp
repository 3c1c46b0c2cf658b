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

// Strongly convex quadratic test objectives
//
//   L_i(θ) = ½ (θ - c_i)ᵀ A_i (θ - c_i) + b_i,   ∇L_i(θ) = A_i (θ - c_i)
//
// with certified curvature constants μ_i = λ_min(A_i), L_i = λ_max(A_i).
// Everything needed to evaluate the convergence bound in closed form lives
// here: the scalarized optimum θ*, the heterogeneity gap Δ*, and the
// scaled-loss reduction of non-uniform weights to uniform ones.

#ifndef ITRS_OBJECTIVES_HPP_
#define ITRS_OBJECTIVES_HPP_

#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace itrs {

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kSpectrumTol = 1e-9;

class QuadraticObjective {
 public:
  /// Takes the certified curvature bounds explicitly; they are checked
  /// against the spectrum of A to kSpectrumTol.
  QuadraticObjective(Eigen::MatrixXd A, ParameterVector c, double b, double mu, double L)
      : A_(std::move(A)), c_(std::move(c)), b_(b), mu_(mu), L_(L) {
    check();
  }

  /// Derives μ and L from the spectrum of A.
  static QuadraticObjective from_matrix(Eigen::MatrixXd A, ParameterVector c, double b = 0.0) {
    const auto [lo, hi] = spectrum_extremes(A);
    return QuadraticObjective(std::move(A), std::move(c), b, lo, hi);
  }

  const Eigen::MatrixXd& A() const noexcept { return A_; }
  const ParameterVector& minimizer() const noexcept { return c_; }
  double offset() const noexcept { return b_; }
  double mu() const noexcept { return mu_; }
  double L() const noexcept { return L_; }
  Eigen::Index dim() const noexcept { return c_.size(); }

  static std::pair<double, double> spectrum_extremes(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("internal", "eigensolver failed");
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }

 private:
  void check() const {
    if (c_.size() < 1) throw Error("dimension-mismatch", "objective: empty minimizer");
    if (A_.rows() != c_.size() || A_.cols() != c_.size()) {
      throw Error("dimension-mismatch", "objective: A is not d x d");
    }
    if (!A_.allFinite() || !c_.allFinite() || !std::isfinite(b_)) throw Error("non-finite", "objective: non-finite data");
    if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) throw Error("not-symmetric", "objective: A not symmetric");
    if (!(mu_ > 0.0) || !(mu_ <= L_)) throw Error("bad-constants", "objective: need 0 < mu <= L");
    const auto [lo, hi] = spectrum_extremes(A_);
    if (lo < mu_ - kSpectrumTol || hi > L_ + kSpectrumTol) {
      throw Error("bad-constants", "objective: spectrum [" + fmt::num(lo) + ", " + fmt::num(hi) +
                                       "] outside certified [" + fmt::num(mu_) + ", " + fmt::num(L_) + "]");
    }
  }

  Eigen::MatrixXd A_;
  ParameterVector c_;
  double b_;
  double mu_;
  double L_;
};

class ObjectiveSet {
 public:
  ObjectiveSet(std::vector<QuadraticObjective> objectives, PreferenceWeights weights)
      : objectives_(std::move(objectives)), weights_(std::move(weights)) {
    if (objectives_.empty()) throw Error("empty-set", "objective set: N must be at least 1");
    if (weights_.size() != objectives_.size()) throw Error("dimension-mismatch", "objective set: weights length != N");
    for (const auto& o : objectives_) require_same_dim(o.dim(), objectives_.front().dim(), "objective set");
  }

  std::size_t size() const noexcept { return objectives_.size(); }
  Eigen::Index dim() const noexcept { return objectives_.front().dim(); }
  const QuadraticObjective& operator[](std::size_t i) const { return objectives_.at(i); }
  const std::vector<QuadraticObjective>& objectives() const noexcept { return objectives_; }
  const PreferenceWeights& weights() const noexcept { return weights_; }

  /// Set-level certified constants: every objective is mu()-strongly convex
  /// and L()-smooth.
  double mu() const {
    double m = objectives_.front().mu();
    for (const auto& o : objectives_) m = std::min(m, o.mu());
    return m;
  }
  double L() const {
    double m = objectives_.front().L();
    for (const auto& o : objectives_) m = std::max(m, o.L());
    return m;
  }

 private:
  std::vector<QuadraticObjective> objectives_;
  PreferenceWeights weights_;
};

inline double eval_loss(const QuadraticObjective& obj, const ParameterVector& theta) {
  require_same_dim(theta.size(), obj.dim(), "eval_loss");
  const ParameterVector r = theta - obj.minimizer();
  return 0.5 * r.dot(obj.A() * r) + obj.offset();
}

inline ParameterVector eval_grad(const QuadraticObjective& obj, const ParameterVector& theta) {
  require_same_dim(theta.size(), obj.dim(), "eval_grad");
  return obj.A() * (theta - obj.minimizer());
}

/// Central differences, one coordinate at a time.
inline ParameterVector finite_diff_grad(const QuadraticObjective& obj, const ParameterVector& theta, double h) {
  if (!(h > 0.0)) throw Error("bad-step", "finite_diff_grad: h must be positive");
  require_same_dim(theta.size(), obj.dim(), "finite_diff_grad");
  ParameterVector g(theta.size());
  ParameterVector probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    const double up = eval_loss(obj, probe);
    probe[k] = theta[k] - h;
    const double down = eval_loss(obj, probe);
    probe[k] = theta[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Σ w_i L_i(θ), summed in objective order.
inline double weighted_loss(const ObjectiveSet& set, const ParameterVector& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) total += set.weights()[i] * eval_loss(set[i], theta);
  return total;
}

inline ParameterVector weighted_grad(const ObjectiveSet& set, const ParameterVector& theta) {
  ParameterVector g = ParameterVector::Zero(set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) g += set.weights()[i] * eval_grad(set[i], theta);
  return g;
}

/// θ* solving (Σ w_i A_i) θ = Σ w_i A_i c_i by Cholesky, residual-checked.
inline ParameterVector multiobjective_optimum(const ObjectiveSet& set) {
  const auto d = set.dim();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  ParameterVector rhs = ParameterVector::Zero(d);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double w = set.weights()[i];
    H += w * set[i].A();
    rhs += w * (set[i].A() * set[i].minimizer());
  }
  H = 0.5 * (H + H.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw Error("internal", "multiobjective_optimum: combined matrix not SPD");
  ParameterVector theta = llt.solve(rhs);
  const double residual = (H * theta - rhs).norm();
  if (!theta.allFinite() || residual > 1e-9 * (1.0 + rhs.norm())) {
    throw Error("internal", "multiobjective_optimum: residual " + fmt::num(residual));
  }
  return theta;
}

/// Δ* = L(θ*) - Σ w_i L_i(θ_i*). The per-objective optima are the minimizers
/// c_i, so L_i(θ_i*) = b_i.
inline double delta_star(const ObjectiveSet& set) {
  const auto opt = multiobjective_optimum(set);
  double optima = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) optima += set.weights()[i] * set[i].offset();
  return weighted_loss(set, opt) - optima;
}

/// Rescales L_i to w_i·N·L_i under uniform weights, so that the uniform
/// scalarization equals the original weighted one. The returned set reports
/// the rescaled certified constants through mu() and L().
inline ObjectiveSet scale_losses(const ObjectiveSet& set) {
  const auto n = set.size();
  std::vector<QuadraticObjective> scaled;
  scaled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = set.weights()[i] * static_cast<double>(n);
    const auto& o = set[i];
    scaled.emplace_back(s * o.A(), o.minimizer(), s * o.offset(), s * o.mu(), s * o.L());
  }
  return ObjectiveSet(std::move(scaled), PreferenceWeights::uniform(n));
}

struct QuadraticSetParams {
  std::uint64_t seed = 1;
  std::size_t num_objectives = 3;
  std::size_t dim = 10;
  double mu = 1.0;
  double L = 8.0;
  double spread = 1.0;
};

/// Random quadratic family. A_i = Q Λ Qᵀ with Q orthonormalized from a
/// Gaussian matrix and Λ holding μ, L (d ≥ 2) and uniform draws in between;
/// c_i uniform in the ball of radius `spread`; b_i = 0. Objective i draws
/// from its own stream, so the set is a pure function of the seed.
inline ObjectiveSet make_quadratic_set(const QuadraticSetParams& p, const PreferenceWeights& weights) {
  if (!(p.mu > 0.0)) throw Error("bad-constants", "make_quadratic_set: mu must be positive");
  if (!(p.L >= p.mu)) throw Error("bad-constants", "make_quadratic_set: L must be >= mu");
  if (p.dim < 1) throw Error("dimension-mismatch", "make_quadratic_set: d must be at least 1");
  if (!(p.spread >= 0.0)) throw Error("bad-spread", "make_quadratic_set: spread must be non-negative");
  const auto d = static_cast<Eigen::Index>(p.dim);

  std::vector<QuadraticObjective> objs;
  objs.reserve(p.num_objectives);
  for (std::size_t i = 0; i < p.num_objectives; ++i) {
    RandomStream rng(p.seed, StreamRole::kObjective, i);

    Eigen::MatrixXd G(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index k = 0; k < d; ++k) G(r, k) = rng.normal();
    }
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();

    Eigen::VectorXd lambda(d);
    for (Eigen::Index k = 0; k < d; ++k) lambda[k] = rng.uniform(p.mu, p.L);
    lambda[0] = p.mu;
    if (d >= 2) lambda[d - 1] = p.L;

    Eigen::MatrixXd A = Q * lambda.asDiagonal() * Q.transpose();
    A = 0.5 * (A + A.transpose()).eval();

    ParameterVector c = ParameterVector::Zero(d);
    if (p.spread > 0.0) {
      ParameterVector dir(d);
      for (Eigen::Index k = 0; k < d; ++k) dir[k] = rng.normal();
      const double radius = p.spread * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
      c = radius * dir / dir.norm();
    }
    // With d = 1 only μ is placed, so the certified L is μ as well.
    objs.emplace_back(std::move(A), std::move(c), 0.0, p.mu, d >= 2 ? p.L : p.mu);
  }
  return ObjectiveSet(std::move(objs), weights);
}

inline ObjectiveSet make_quadratic_set(const QuadraticSetParams& p) {
  return make_quadratic_set(p, PreferenceWeights::uniform(p.num_objectives));
}

// Text serialization ----------------------------------------------------------
//
//   # itrs objective set
//   dimension = d
//   objectives = N
//   weights = w_0 ... w_{N-1}
//   objective = i          (one block per objective, in order)
//   mu = ..
//   L = ..
//   b = ..
//   c = c_0 ... c_{d-1}
//   A = a_00 a_01 ... (row-major, d*d values)

inline void write_objective_set(std::ostream& os, const ObjectiveSet& set) {
  os << "# itrs objective set\n";
  os << "dimension = " << set.dim() << "\n";
  os << "objectives = " << set.size() << "\n";
  os << "weights = " << fmt::join_nums(set.weights().values()) << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& o = set[i];
    os << "objective = " << i << "\n";
    os << "mu = " << fmt::num(o.mu()) << "\n";
    os << "L = " << fmt::num(o.L()) << "\n";
    os << "b = " << fmt::num(o.offset()) << "\n";
    os << "c = " << fmt::join_nums(std::vector<double>(o.minimizer().begin(), o.minimizer().end())) << "\n";
    std::vector<double> a;
    a.reserve(static_cast<std::size_t>(o.A().size()));
    for (Eigen::Index r = 0; r < o.A().rows(); ++r) {
      for (Eigen::Index k = 0; k < o.A().cols(); ++k) a.push_back(o.A()(r, k));
    }
    os << "A = " << fmt::join_nums(a) << "\n";
  }
}

inline ObjectiveSet read_objective_set(std::istream& is) {
  std::size_t d = 0, n = 0;
  std::vector<double> weights;
  struct Pending {
    double mu = 0, L = 0, b = 0;
    std::vector<double> c, a;
  };
  std::vector<Pending> blocks;

  std::string line;
  while (std::getline(is, line)) {
    const auto s = fmt::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error("parse", "objective set: expected key = value, got '" + line + "'");
    const auto key = fmt::trim(s.substr(0, eq));
    const auto val = fmt::trim(s.substr(eq + 1));
    if (key == "dimension") {
      d = fmt::parse_u64(val);
    } else if (key == "objectives") {
      n = fmt::parse_u64(val);
    } else if (key == "weights") {
      weights = fmt::parse_doubles(val);
    } else if (key == "objective") {
      if (fmt::parse_u64(val) != blocks.size()) throw Error("parse", "objective set: blocks out of order");
      blocks.emplace_back();
    } else {
      if (blocks.empty()) throw Error("parse", "objective set: '" + std::string(key) + "' before any objective block");
      auto& b = blocks.back();
      if (key == "mu") b.mu = fmt::parse_double(val);
      else if (key == "L") b.L = fmt::parse_double(val);
      else if (key == "b") b.b = fmt::parse_double(val);
      else if (key == "c") b.c = fmt::parse_doubles(val);
      else if (key == "A") b.a = fmt::parse_doubles(val);
      else throw Error("parse", "objective set: unknown key '" + std::string(key) + "'");
    }
  }
  if (d == 0 || n == 0 || blocks.size() != n) throw Error("parse", "objective set: header/block count mismatch");

  std::vector<QuadraticObjective> objs;
  for (auto& b : blocks) {
    if (b.c.size() != d || b.a.size() != d * d) throw Error("parse", "objective set: wrong vector/matrix length");
    const auto di = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd A(di, di);
    for (Eigen::Index r = 0; r < di; ++r) {
      for (Eigen::Index k = 0; k < di; ++k) A(r, k) = b.a[static_cast<std::size_t>(r * di + k)];
    }
    objs.emplace_back(std::move(A), Eigen::Map<const Eigen::VectorXd>(b.c.data(), di), b.b, b.mu, b.L);
  }
  return ObjectiveSet(std::move(objs), PreferenceWeights(std::move(weights)));
}

}  // namespace itrs

#endif  // ITRS_OBJECTIVES_HPP_
