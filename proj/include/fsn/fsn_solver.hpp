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

// End-to-end equilibrium computation and its verification.

#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "fsn/lcp_assembly.hpp"

namespace fsn {

class NoEquilibrium : public Error {
 public:
  explicit NoEquilibrium(LcpInfeasible certificate)
      : Error("global complementarity problem has no solution (Lemke ray termination after " +
              std::to_string(certificate.pivots) + " pivots)"),
        certificate_(std::move(certificate)) {}
  const LcpInfeasible& certificate() const { return certificate_; }

 private:
  LcpInfeasible certificate_;
};

struct VerifyOptions {
  double fixed_point_tol = 1e-6;
  double foc_tol = 1e-8;        // scaled by 1 + |x_k|
  double value_tol = 1e-6;      // scaled by 1 + |J|
  double deviation_tol = 1e-8;
  double trajectory_tol = 1e-10;  // scaled by 1 + |x_k|
  double sign_tol = 1e-9;
  std::vector<double> deltas{0.1, -0.1, 0.01, -0.01};
};

struct Check {
  std::string name;
  bool passed = true;
  double value = 0.0;      // worst observed (scaled where noted by the threshold)
  double threshold = 0.0;
  int stage = -1;          // stage of the worst value, -1 when not stage-specific
};

struct VerificationReport {
  double lcp_complementarity = 0.0;
  double lcp_feasibility = 0.0;
  double lcp_complementarity_threshold = 0.0;
  std::vector<double> stage_fixed_point_errors;  // k = 0..K
  // Stages whose multipliers differ from a fresh stage solve but still solve
  // the stage problem (non-unique mu).
  std::vector<int> degenerate_multiplier_stages;
  std::vector<FocResidual> foc;                  // k = 0..K-1
  std::vector<PerPlayer<double>> value_errors;   // k = 0..K, |cost-to-go - W_p|
  // Smallest cost change over all deviations tried; negative means improving.
  double leader_margin = std::numeric_limits<double>::infinity();
  double follower_margin = std::numeric_limits<double>::infinity();
  PerPlayer<double> simultaneous_margin{std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity()};
  int deviations_tried = 0;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  const Check* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed) return &c;
    return nullptr;
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct FsnOutcome {
  std::vector<PerPlayer<Matrix>> E;  // k = 0..K-1
  std::vector<PerPlayer<Vector>> F;  // k = 0..K-1
  std::vector<Vector> v_star;        // k = 0..K, each s
  std::vector<Vector> mu_star;       // k = 0..K, each c
  std::vector<Vector> x;             // k = 0..K
  std::vector<PerPlayer<Vector>> u;  // k = 0..K-1
  PerPlayer<double> J{};
  std::vector<PerPlayer<double>> value_offsets;  // m_k^i
  int lcp_pivots = 0;
  int lcp_solutions_found = 1;  // > 1 only when enumeration ran
  VerificationReport report;

  ParameterStack parameters() const { return {v_star, mu_star}; }
};

struct Trajectory {
  std::vector<Vector> x;
  std::vector<PerPlayer<Vector>> u;
};

/// Forward play of the affine strategies u^i_k = E^i_k x_k + F^i_k.
inline Trajectory simulate(const GameSpec& spec, const std::vector<PerPlayer<Matrix>>& E,
                           const std::vector<PerPlayer<Vector>>& F, const Vector& x0) {
  Trajectory t;
  t.x.push_back(x0);
  for (int k = 0; k < spec.dims.K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const Vector& x = t.x.back();
    PerPlayer<Vector> u{E[uk][0] * x + F[uk][0], E[uk][1] * x + F[uk][1]};
    t.x.push_back(step(spec.stages[uk], x, u));
    t.u.push_back(std::move(u));
  }
  return t;
}

inline Trajectory simulate(const GameSpec& spec, const RecursionTape& tape,
                           const AffineParts& parts, const Vector& x0) {
  return simulate(spec, tape.E, parts.F, x0);
}

/// Direct summation of the stage costs along the stored play.
inline PerPlayer<double> evaluate_costs(const GameSpec& spec, const FsnOutcome& out) {
  PerPlayer<double> J{0.0, 0.0};
  const PerPlayer<Vector> no_u{Vector(), Vector()};
  for (int k = 0; k <= spec.dims.K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto& u = k < spec.dims.K ? out.u[uk] : no_u;
    for (int i = 0; i < 2; ++i)
      J[i] += stage_cost(spec.stages[uk], i, out.x[uk], u, out.v_star[uk]);
  }
  return J;
}

namespace detail {

inline double norm_inf(const Vector& v) { return max_abs(v); }

// Cost-to-go of player i from stage k+1 under the parametric game plus the
// sequential part of stage k, for a given pair of stage-k controls.
inline double sequential_cost(const GameSpec& spec, const RecursionTape& tape,
                              const AffineParts& parts, const ParameterStack& params, int k,
                              int i, const Vector& x, const PerPlayer<Vector>& u) {
  const auto& st = spec.stages[static_cast<std::size_t>(k)];
  double c = 0.0;
  for (int j = 0; j < 2; ++j) c += 0.5 * u[j].dot(st.R[i][j] * u[j]);
  const Vector xn = step(st, x, u);
  return c + parametric_value(spec, tape, parts, params, k + 1, xn)[i];
}

// Largest t in [0, t_max] keeping v + t*dir feasible for the stage constraints.
inline double feasible_step(const StageBlocks& b, const Vector& x, const Vector& v,
                            const Vector& dir, double t_max) {
  double t = t_max;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (dir(j) < 0.0) t = std::min(t, std::max(0.0, v(j)) / -dir(j));
  const Vector slack = b.Mbar * x + b.N * v + b.rbar;
  const Vector rate = b.N * dir;
  for (Eigen::Index r = 0; r < slack.size(); ++r)
    if (rate(r) < 0.0) t = std::min(t, std::max(0.0, slack(r)) / -rate(r));
  return t;
}

}  // namespace detail

inline VerificationReport verify_equilibrium(const GameSpec& spec, const FsnOutcome& out,
                                             const VerifyOptions& opts = {}) {
  const auto& dims = spec.dims;
  const int K = dims.K;
  const auto uK = static_cast<std::size_t>(K);
  VerificationReport rep;

  const bool shaped = out.x.size() == uK + 1 && out.u.size() == uK && out.E.size() == uK &&
                      out.F.size() == uK && out.v_star.size() == uK + 1 &&
                      out.mu_star.size() == uK + 1;
  if (!shaped) throw ShapeMismatch("outcome does not match the spec horizon");
  const auto params = out.parameters();
  params.check(dims);

  const auto tape = backward_sweep(spec);
  const auto parts = eval_affine_parts(spec, tape, params);

  // (a) global complementarity at the packed parameters.
  {
    const auto lcp = assemble_global_lcp(spec, tape, out.x.front());
    const auto r = residual(lcp, pack_parameters(dims, params));
    rep.lcp_complementarity = r.complementarity;
    rep.lcp_feasibility = r.feasibility;
    rep.lcp_complementarity_threshold = complementarity_threshold(lcp);
    rep.checks.push_back({"lcp_complementarity", r.complementarity <= rep.lcp_complementarity_threshold,
                          r.complementarity, rep.lcp_complementarity_threshold, -1});
    rep.checks.push_back(
        {"lcp_feasibility", r.feasibility <= kFeasibilityThreshold, r.feasibility, kFeasibilityThreshold, -1});
  }

  // Trajectory consistency with the stored strategies and signs.
  {
    Check traj{"trajectory", true, 0.0, opts.trajectory_tol, -1};
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const Vector& x = out.x[uk];
      const double scale = 1.0 + detail::norm_inf(x);
      double err = 0.0;
      for (int i = 0; i < 2; ++i)
        err = std::max(err, detail::norm_inf(out.u[uk][i] - (out.E[uk][i] * x + out.F[uk][i])));
      err = std::max(err, detail::norm_inf(out.x[uk + 1] - step(spec.stages[uk], x, out.u[uk])));
      if (err / scale > traj.value) {
        traj.value = err / scale;
        traj.stage = k;
      }
    }
    traj.passed = traj.value <= traj.threshold;
    rep.checks.push_back(traj);

    Check sign{"sign", true, 0.0, opts.sign_tol, -1};
    for (int k = 0; k <= K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const Vector slack = constraint_slack(dims, spec.stages[uk], out.x[uk], out.v_star[uk]);
      double worst = 0.0;
      if (out.v_star[uk].size()) worst = std::max(worst, -out.v_star[uk].minCoeff());
      if (out.mu_star[uk].size()) worst = std::max(worst, -out.mu_star[uk].minCoeff());
      if (slack.size()) worst = std::max(worst, -slack.minCoeff());
      if (worst > sign.value) {
        sign.value = worst;
        sign.stage = k;
      }
    }
    sign.passed = sign.value <= sign.threshold;
    rep.checks.push_back(sign);
  }

  // (b) each stage's simultaneous decisions solve the stage game at x_k.
  {
    Check fp{"stage_fixed_point", true, 0.0, opts.fixed_point_tol, -1};
    for (int k = 0; k <= K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      double err;
      try {
        const auto sol = solve_stage_game(spec, k, out.x[uk]);
        const double mu_gap = detail::norm_inf(sol.mu - out.mu_star[uk]);
        err = std::max(detail::norm_inf(sol.v - out.v_star[uk]), mu_gap);
        // Decisions are unique but multipliers need not be: an own action at
        // zero together with a binding row leaves a whole interval of valid
        // mu. Accept the sliced pair if it solves the stage problem itself.
        if (mu_gap > fp.threshold) {
          const Vector z = stack({out.v_star[uk], out.mu_star[uk]});
          const auto r = residual(build_stage_lcp(spec, k, out.x[uk]), z);
          const double own =
              std::max({detail::norm_inf(sol.v - out.v_star[uk]), r.complementarity, r.feasibility});
          if (own <= fp.threshold) {
            rep.degenerate_multiplier_stages.push_back(k);
            err = own;
          }
        }
      } catch (const Error&) {
        err = std::numeric_limits<double>::infinity();
      }
      rep.stage_fixed_point_errors.push_back(err);
      if (!(err <= fp.value)) {
        fp.value = err;
        fp.stage = k;
      }
    }
    fp.passed = fp.value <= fp.threshold;
    rep.checks.push_back(fp);
  }

  // (c) stationarity of the sequential layer. Controls come from the stored
  // strategies, so a tampered gain shows up here and not only as a
  // trajectory mismatch.
  {
    Check lead{"foc_leader", true, 0.0, opts.foc_tol, -1};
    Check follow{"foc_follower", true, 0.0, opts.foc_tol, -1};
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const Vector& x = out.x[uk];
      const PerPlayer<Vector> u{out.E[uk][0] * x + out.F[uk][0], out.E[uk][1] * x + out.F[uk][1]};
      const auto r = foc_residuals_at(spec, tape, parts, k, x, u);
      rep.foc.push_back(r);
      const double scale = 1.0 + detail::norm_inf(out.x[uk]);
      if (!(r.leader / scale <= lead.value)) {
        lead.value = r.leader / scale;
        lead.stage = k;
      }
      if (!(r.follower / scale <= follow.value)) {
        follow.value = r.follower / scale;
        follow.stage = k;
      }
    }
    lead.passed = lead.value <= lead.threshold;
    follow.passed = follow.value <= follow.threshold;
    rep.checks.push_back(lead);
    rep.checks.push_back(follow);
  }

  // (d) realised cost-to-go against the parametric value function.
  {
    Check val{"value_identity", true, 0.0, opts.value_tol, -1};
    PerPlayer<double> to_go{0.0, 0.0};
    rep.value_errors.assign(uK + 1, {0.0, 0.0});
    const PerPlayer<Vector> no_u{Vector(), Vector()};
    for (int k = K; k >= 0; --k) {
      const auto uk = static_cast<std::size_t>(k);
      const auto& u = k < K ? out.u[uk] : no_u;
      const auto W = parametric_value(spec, tape, parts, params, k, out.x[uk]);
      for (int i = 0; i < 2; ++i) {
        to_go[i] += stage_cost(spec.stages[uk], i, out.x[uk], u, out.v_star[uk]);
        const double err = std::abs(to_go[i] - W[i]);
        rep.value_errors[uk][i] = err;
        const double scaled = err / (1.0 + std::abs(to_go[i]));
        if (!(scaled <= val.value)) {
          val.value = scaled;
          val.stage = k;
        }
      }
    }
    val.passed = val.value <= val.threshold;
    rep.checks.push_back(val);
  }

  // (e) finite unilateral deviations.
  {
    int worst_leader = -1, worst_follower = -1, worst_sim = -1;
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const auto& st = spec.stages[uk];
      const Vector& x = out.x[uk];
      const auto& u = out.u[uk];
      const auto& S_next = tape.S[uk + 1];
      const auto& s_next = parts.s[uk + 1];
      const double base_leader = detail::sequential_cost(spec, tape, parts, params, k, 0, x, u);
      const double base_follower = detail::sequential_cost(spec, tape, parts, params, k, 1, x, u);
      const auto reply = detail::follower_reply(st, S_next[1], s_next[1], x);

      for (double delta : opts.deltas) {
        for (Eigen::Index j = 0; j < u[0].size(); ++j) {
          PerPlayer<Vector> dev = u;
          dev[0](j) += delta;
          dev[1] = reply.a + reply.C * dev[0];
          const double margin =
              detail::sequential_cost(spec, tape, parts, params, k, 0, x, dev) - base_leader;
          ++rep.deviations_tried;
          if (margin < rep.leader_margin) {
            rep.leader_margin = margin;
            worst_leader = k;
          }
        }
        for (Eigen::Index j = 0; j < u[1].size(); ++j) {
          PerPlayer<Vector> dev = u;
          dev[1](j) += delta;
          const double margin =
              detail::sequential_cost(spec, tape, parts, params, k, 1, x, dev) - base_follower;
          ++rep.deviations_tried;
          if (margin < rep.follower_margin) {
            rep.follower_margin = margin;
            worst_follower = k;
          }
        }
      }
    }
    for (int k = 0; k <= K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const auto& st = spec.stages[uk];
      const auto b = stage_blocks(dims, st);
      const Vector& x = out.x[uk];
      const Vector& v = out.v_star[uk];
      for (int i = 0; i < 2; ++i) {
        const double base = simultaneous_cost(st, i, x, v);
        for (double delta : opts.deltas) {
          for (int j = 0; j < dims.s_of(i); ++j) {
            Vector dir = Vector::Zero(dims.s());
            dir(dims.s_offset(i) + j) = delta > 0 ? 1.0 : -1.0;
            const double t = detail::feasible_step(b, x, v, dir, std::abs(delta));
            if (t <= 0.0) continue;
            const double margin = simultaneous_cost(st, i, x, Vector(v + t * dir)) - base;
            ++rep.deviations_tried;
            if (margin < rep.simultaneous_margin[i]) {
              rep.simultaneous_margin[i] = margin;
              worst_sim = k;
            }
          }
        }
      }
    }
    const double tol = -opts.deviation_tol;
    auto finite_or_zero = [](double m) { return std::isfinite(m) ? m : 0.0; };
    const double lm = finite_or_zero(rep.leader_margin);
    const double fm = finite_or_zero(rep.follower_margin);
    const double sm = std::min(finite_or_zero(rep.simultaneous_margin[0]),
                               finite_or_zero(rep.simultaneous_margin[1]));
    rep.checks.push_back({"deviation_leader", lm >= tol, lm, tol, worst_leader});
    rep.checks.push_back({"deviation_follower", fm >= tol, fm, tol, worst_follower});
    rep.checks.push_back({"deviation_simultaneous", sm >= tol, sm, tol, worst_sim});
  }
  return rep;
}

/// Orders candidate equilibria by leader cost, then follower cost, then
/// lexicographically by the simultaneous decisions. The first is admissible.
inline std::vector<FsnOutcome> admissible_ordering(std::vector<FsnOutcome> outcomes) {
  auto flat = [](const FsnOutcome& o) {
    std::vector<double> f;
    for (const auto& v : o.v_star) f.insert(f.end(), v.data(), v.data() + v.size());
    return f;
  };
  std::stable_sort(outcomes.begin(), outcomes.end(), [&](const FsnOutcome& a, const FsnOutcome& b) {
    if (a.J[0] != b.J[0]) return a.J[0] < b.J[0];
    if (a.J[1] != b.J[1]) return a.J[1] < b.J[1];
    return flat(a) < flat(b);
  });
  return outcomes;
}

struct SolveOptions {
  LemkeOptions lemke;
  VerifyOptions verify;
  bool verify_outcome = true;
  // Global problems up to this size are also enumerated; if several
  // solutions exist the admissible one is returned.
  int enumerate_up_to = 12;
};

namespace detail {

inline FsnOutcome outcome_from_parameters(const GameSpec& spec, const RecursionTape& tape,
                                          ParameterStack params, const SolveOptions& opts) {
  const auto stage0 = solve_stage_game(spec, 0, spec.x0, opts.lemke);
  params.w[0] = stage0.v;
  params.theta[0] = stage0.mu;
  const auto parts = eval_affine_parts(spec, tape, params);
  const auto traj = simulate(spec, tape, parts, spec.x0);

  FsnOutcome out;
  out.E = tape.E;
  out.F = parts.F;
  out.v_star = params.w;
  out.mu_star = params.theta;
  out.x = traj.x;
  out.u = traj.u;
  out.value_offsets = parts.m;
  out.J = evaluate_costs(spec, out);
  return out;
}

}  // namespace detail

/// Every equilibrium reachable by enumerating the global problem, ordered
/// admissibly. Only for small instances.
inline std::vector<FsnOutcome> enumerate_fsn(const GameSpec& spec, const SolveOptions& opts = {},
                                             int dim_cap = 20) {
  ensure_valid(spec);
  const auto tape = backward_sweep(spec);
  const auto lcp = assemble_global_lcp(spec, tape, spec.x0);
  const auto all = enumerate_solutions(lcp, dim_cap);
  std::vector<FsnOutcome> outs;
  for (const auto& sol : all.solutions) {
    auto o = detail::outcome_from_parameters(spec, tape, unpack_parameters(spec.dims, sol.z), opts);
    o.lcp_solutions_found = static_cast<int>(all.solutions.size());
    if (opts.verify_outcome) o.report = verify_equilibrium(spec, o, opts.verify);
    outs.push_back(std::move(o));
  }
  return admissible_ordering(std::move(outs));
}

inline FsnOutcome solve_fsn(const GameSpec& spec, const SolveOptions& opts = {}) {
  ensure_valid(spec);
  const auto tape = backward_sweep(spec);
  const auto lcp = assemble_global_lcp(spec, tape, spec.x0);
  auto res = lemke_solve(lcp, opts.lemke);
  if (auto* ray = std::get_if<LcpInfeasible>(&res)) throw NoEquilibrium(*ray);
  const auto& sol = std::get<LcpSolution>(res);

  FsnOutcome out =
      detail::outcome_from_parameters(spec, tape, unpack_parameters(spec.dims, sol.z), opts);
  out.lcp_pivots = sol.pivots;

  if (lcp.dim() <= opts.enumerate_up_to) {
    const auto all = enumerate_solutions(lcp, opts.enumerate_up_to);
    if (all.solutions.size() > 1) {
      std::vector<FsnOutcome> cands;
      for (const auto& s : all.solutions)
        cands.push_back(
            detail::outcome_from_parameters(spec, tape, unpack_parameters(spec.dims, s.z), opts));
      out = admissible_ordering(std::move(cands)).front();
      out.lcp_pivots = sol.pivots;
    }
    out.lcp_solutions_found = static_cast<int>(std::max<std::size_t>(1, all.solutions.size()));
  }
  if (opts.verify_outcome) out.report = verify_equilibrium(spec, out, opts.verify);
  return out;
}

/// Parametric value prediction at (0, x0) for a stored outcome.
inline PerPlayer<double> predicted_costs(const GameSpec& spec, const FsnOutcome& out) {
  const auto tape = backward_sweep(spec);
  const auto params = out.parameters();
  const auto parts = eval_affine_parts(spec, tape, params);
  return parametric_value(spec, tape, parts, params, 0, out.x.front());
}

}  // namespace fsn
