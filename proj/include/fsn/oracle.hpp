/*
 Copyright 2026 The fsn-lq Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Reference solver for tiny games (K <= 2, n <= 2, scalar controls).
//
// Shares nothing with the recursion/assembly path beyond the game data and
// the stage KKT blocks:
//  - the sequential layer is solved by nested one-dimensional minimisation
//    of simulated costs (each cost is an exact quadratic, so three samples
//    pin its minimiser),
//  - the state path's dependence on the frozen simultaneous decisions is
//    recovered from unit perturbations,
//  - the resulting global complementarity problem is solved by enumeration,
//  - first-stage controls are located by a refining grid search.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "fsn/fsn_solver.hpp"

namespace fsn {

class GridTooLarge : public Error {
 public:
  using Error::Error;
};

struct GridSpec {
  double lo = -5.0;
  double hi = 5.0;
  double step = 1e-3;
  bool refine = true;  // coarse-to-fine instead of one flat grid
  long long max_evaluations = 10'000'000;
};

struct OracleOutcome {
  PerPlayer<Vector> u0_grid;   // grid-located first-stage controls
  PerPlayer<Vector> u0_exact;  // same, from the exact quadratic minimisers
  Vector v0, mu0;
  PerPlayer<double> J{};
  ParameterStack params;
  std::vector<Vector> x;
  int lcp_solutions = 0;
  int skipped_candidates = 0;  // enumerated solutions too ill-conditioned to evaluate
  long long grid_evaluations = 0;
};

namespace oracle {

// Parametric game with the simultaneous layer frozen at `params`.
class FrozenGame {
 public:
  FrozenGame(const GameSpec& spec, ParameterStack params) : spec_(spec), params_(std::move(params)) {}

  double stage_cost_p(int k, int i, const Vector& x, const PerPlayer<Vector>& u) const {
    const auto& st = spec_.stages[static_cast<std::size_t>(k)];
    const Vector& w = params_.w[static_cast<std::size_t>(k)];
    const Vector th = params_.theta_of(spec_.dims, k, i);
    return stage_cost(st, i, x, u, w) - th.dot(st.M[i] * x + st.N[i] * w + st.r[i]);
  }

  /// Sequential-layer costs of both players at stage k for controls u.
  PerPlayer<double> sequential_costs(int k, const Vector& x, const PerPlayer<Vector>& u) const {
    const auto& st = spec_.stages[static_cast<std::size_t>(k)];
    const auto next = value(k + 1, step(st, x, u));
    PerPlayer<double> c{};
    for (int i = 0; i < 2; ++i) {
      c[i] = next[i];
      for (int j = 0; j < 2; ++j) c[i] += 0.5 * u[j].dot(st.R[i][j] * u[j]);
    }
    return c;
  }

  /// Follower's exact reply to u1.
  Vector reply(int k, const Vector& x, const Vector& u1) const {
    const int m2 = spec_.dims.m2;
    if (m2 == 0) return Vector();
    auto f = [&](double t) {
      return sequential_costs(k, x, {u1, Vector::Constant(1, t)})[1];
    };
    return Vector::Constant(1, vertex(f, k, "follower"));
  }

  PerPlayer<Vector> stackelberg(int k, const Vector& x) const {
    const int m1 = spec_.dims.m1;
    Vector u1;
    if (m1 > 0) {
      auto f = [&](double t) {
        const Vector a = Vector::Constant(1, t);
        return sequential_costs(k, x, {a, reply(k, x, a)})[0];
      };
      u1 = Vector::Constant(1, vertex(f, k, "leader"));
    }
    return {u1, reply(k, x, u1)};
  }

  /// Parametric cost-to-go of both players from (k, x).
  PerPlayer<double> value(int k, const Vector& x) const {
    PerPlayer<double> W{};
    const PerPlayer<Vector> none{Vector(), Vector()};
    if (k == spec_.dims.K) {
      for (int i = 0; i < 2; ++i) W[i] = stage_cost_p(k, i, x, none);
      return W;
    }
    const auto u = stackelberg(k, x);
    const auto next = value(k + 1, step(spec_.stages[static_cast<std::size_t>(k)], x, u));
    for (int i = 0; i < 2; ++i) W[i] = stage_cost_p(k, i, x, u) + next[i];
    return W;
  }

  /// States x_0..x_K under the frozen play.
  std::vector<Vector> path(const Vector& x0, std::vector<PerPlayer<Vector>>* controls = nullptr) const {
    std::vector<Vector> xs{x0};
    for (int k = 0; k < spec_.dims.K; ++k) {
      const auto u = stackelberg(k, xs.back());
      xs.push_back(step(spec_.stages[static_cast<std::size_t>(k)], xs.back(), u));
      if (controls) controls->push_back(u);
    }
    return xs;
  }

 private:
  // Minimiser of a one-dimensional quadratic from three samples, re-centred
  // once so the final fit is taken where the linear term is small.
  static double vertex(const std::function<double(double)>& f, int k, const char* who) {
    double centre = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      const double fm = f(centre - 1.0), f0 = f(centre), fp = f(centre + 1.0);
      const double curv = 0.5 * (fp + fm - 2.0 * f0);
      if (!(curv > 1e-12 * (1.0 + std::abs(f0))))
        throw Error(std::string("oracle: ") + who + " problem not strictly convex at stage " +
                    std::to_string(k));
      const double shift = -0.25 * (fp - fm) / curv;
      centre += shift;
      if (std::abs(shift) < 4.0) break;
    }
    return centre;
  }

  const GameSpec& spec_;
  ParameterStack params_;
};

/// Refining 1-D grid minimisation on [lo, hi]; returns the arg-min on the
/// finest grid.
inline double grid_argmin(const std::function<double(double)>& f, const GridSpec& g,
                          long long& evals) {
  auto scan = [&](double a, double b, double h) {
    double best_t = a, best_f = std::numeric_limits<double>::infinity();
    const auto count = static_cast<long long>(std::floor((b - a) / h + 1e-9));
    for (long long i = 0; i <= count; ++i) {
      const double t = a + static_cast<double>(i) * h;
      const double v = f(t);
      ++evals;
      if (v < best_f) {
        best_f = v;
        best_t = t;
      }
    }
    return best_t;
  };
  if (!g.refine) return scan(g.lo, g.hi, g.step);
  double h = g.step;
  while ((g.hi - g.lo) / h > 200.0) h *= 10.0;
  double best = scan(g.lo, g.hi, h);
  while (h > g.step * 1.5) {
    const double a = std::max(g.lo, best - h), b = std::min(g.hi, best + h);
    h /= 10.0;
    // Keep the finer grid aligned with lo.
    const double a_al = g.lo + std::ceil((a - g.lo) / h - 1e-9) * h;
    best = scan(a_al, b, h);
  }
  return best;
}

/// Grid arg-min followed by a three-point parabolic fit around it. Used for
/// the follower's reply inside the leader's objective so that the leader
/// does not see the reply's grid rounding as a first-order cost ripple.
inline double grid_argmin_fitted(const std::function<double(double)>& f, const GridSpec& g,
                                 long long& evals) {
  const double t = grid_argmin(f, g, evals);
  const double h = g.step;
  const double fm = f(t - h), f0 = f(t), fp = f(t + h);
  evals += 3;
  const double curv = fp + fm - 2.0 * f0;
  if (!(curv > 0.0)) return t;
  return t - 0.5 * h * (fp - fm) / curv;
}

inline long long planned_points(const GridSpec& g) {
  if (!(g.step > 0.0) || !(g.hi > g.lo)) throw std::invalid_argument("grid needs lo < hi and step > 0");
  if (!g.refine) return static_cast<long long>((g.hi - g.lo) / g.step) + 1;
  double h = g.step;
  int levels = 0;
  while ((g.hi - g.lo) / h > 200.0) {
    h *= 10.0;
    ++levels;
  }
  return static_cast<long long>((g.hi - g.lo) / h) + 1 + 21LL * levels;
}

}  // namespace oracle

inline OracleOutcome brute_force_fsn(const GameSpec& spec, const GridSpec& grid = {}) {
  const auto& dims = spec.dims;
  if (dims.K > 2 || dims.n > 2 || dims.m1 > 1 || dims.m2 > 1 || dims.s1 > 1 || dims.s2 > 1)
    throw std::invalid_argument("brute_force_fsn handles K, n <= 2 and scalar per-player blocks");
  ensure_valid(spec);
  const long long planned = oracle::planned_points(grid) * std::max<long long>(1, oracle::planned_points(grid));
  if (planned > grid.max_evaluations)
    throw GridTooLarge("grid search would need " + std::to_string(planned) + " evaluations");

  const int K = dims.K, s = dims.s(), c = dims.c(), n = dims.n;
  const int dz = (s + c) * K;

  // Path x_1..x_K as an affine function of the stacked stage 1..K decisions.
  auto states_for = [&](const Vector& z) {
    auto params = ParameterStack::zeros(dims);
    for (int k = 1; k <= K; ++k) {
      params.w[static_cast<std::size_t>(k)] = z.segment((k - 1) * (s + c), s);
      params.theta[static_cast<std::size_t>(k)] = z.segment((k - 1) * (s + c) + s, c);
    }
    oracle::FrozenGame game(spec, params);
    return game.path(spec.x0);
  };
  const auto base = states_for(Vector::Zero(dz));
  std::vector<Matrix> jac(static_cast<std::size_t>(K + 1), Matrix::Zero(n, dz));
  for (int j = 0; j < dz; ++j) {
    const auto xs = states_for(Vector::Unit(dz, j));
    for (int k = 1; k <= K; ++k)
      jac[static_cast<std::size_t>(k)].col(j) = xs[static_cast<std::size_t>(k)] - base[static_cast<std::size_t>(k)];
  }

  // Stage KKT systems at the affine states, stage-major ordering (v_k, mu_k).
  LcpProblem global;
  global.M = Matrix::Zero(dz, dz);
  global.q = Vector::Zero(dz);
  for (int k = 1; k <= K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto local = build_stage_lcp(spec, k, base[uk]);
    const auto b = stage_blocks(dims, spec.stages[uk]);
    const int row = (k - 1) * (s + c);
    global.M.block(row, row, s + c, s + c) += local.M;
    global.M.block(row, 0, s, dz) += b.Lbar.transpose() * jac[uk];
    global.M.block(row + s, 0, c, dz) += b.Mbar * jac[uk];
    global.q.segment(row, s + c) = local.q;
  }
  const auto sols = enumerate_solutions(global);
  if (sols.solutions.empty()) throw Error("oracle: no equilibrium found by enumeration");

  std::vector<OracleOutcome> cands;
  int skipped = 0;
  const auto stage0 = enumerate_solutions(build_stage_lcp(spec, 0, spec.x0));
  if (stage0.solutions.empty()) throw StageInfeasible(0);
  for (const auto& sol : sols.solutions) {
    OracleOutcome o;
    o.lcp_solutions = static_cast<int>(sols.solutions.size());
    o.params = ParameterStack::zeros(dims);
    o.params.w[0] = stage0.solutions.front().z.head(s);
    o.params.theta[0] = stage0.solutions.front().z.tail(c);
    for (int k = 1; k <= K; ++k) {
      o.params.w[static_cast<std::size_t>(k)] = sol.z.segment((k - 1) * (s + c), s);
      o.params.theta[static_cast<std::size_t>(k)] = sol.z.segment((k - 1) * (s + c) + s, c);
    }
    o.v0 = o.params.w[0];
    o.mu0 = o.params.theta[0];

    oracle::FrozenGame game(spec, o.params);
    std::vector<PerPlayer<Vector>> us;
    try {
      o.x = game.path(spec.x0, &us);
    } catch (const Error&) {
      // Enumeration can return near-singular bases with enormous
      // multipliers; the sampled quadratics lose all precision there.
      ++skipped;
      continue;
    }
    o.u0_exact = us.front();
    const PerPlayer<Vector> none{Vector(), Vector()};
    for (int k = 0; k <= K; ++k)
      for (int i = 0; i < 2; ++i)
        o.J[i] += stage_cost(spec.stages[static_cast<std::size_t>(k)], i,
                             o.x[static_cast<std::size_t>(k)],
                             k < K ? us[static_cast<std::size_t>(k)] : none,
                             o.params.w[static_cast<std::size_t>(k)]);
    cands.push_back(std::move(o));
  }
  if (cands.empty()) throw Error("oracle: no enumerated equilibrium could be evaluated");
  for (auto& c : cands) c.skipped_candidates = skipped;
  std::stable_sort(cands.begin(), cands.end(), [](const OracleOutcome& a, const OracleOutcome& b) {
    return a.J[0] != b.J[0] ? a.J[0] < b.J[0] : a.J[1] < b.J[1];
  });
  OracleOutcome best = std::move(cands.front());

  // Grid search for the first-stage Stackelberg pair.
  oracle::FrozenGame game(spec, best.params);
  long long evals = 0;
  auto follower_best = [&](const Vector& u1, bool fitted) -> Vector {
    if (dims.m2 == 0) return Vector();
    auto f = [&](double v) {
      return game.sequential_costs(0, spec.x0, {u1, Vector::Constant(1, v)})[1];
    };
    return Vector::Constant(1, fitted ? oracle::grid_argmin_fitted(f, grid, evals)
                                      : oracle::grid_argmin(f, grid, evals));
  };
  Vector u1;
  if (dims.m1 > 0) {
    const double t = oracle::grid_argmin(
        [&](double a) {
          const Vector ua = Vector::Constant(1, a);
          return game.sequential_costs(0, spec.x0, {ua, follower_best(ua, true)})[0];
        },
        grid, evals);
    u1 = Vector::Constant(1, t);
  }
  best.u0_grid = {u1, follower_best(u1, false)};
  best.grid_evaluations = evals;
  return best;
}

}  // namespace fsn
