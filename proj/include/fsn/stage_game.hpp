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

// The per-stage simultaneous game. At a fixed state both players pick
// v^i >= 0 subject to the shared affine constraints; the joint KKT system
// is an LCP in (v, mu).

#pragma once

#include <string>
#include <variant>

#include "fsn/game_model.hpp"
#include "fsn/lcp.hpp"

namespace fsn {

/// Player-own slices of one stage, arranged as in the joint KKT system.
struct StageBlocks {
  Matrix D;     // s x s, player i's own rows of D^i
  Matrix Nbar;  // c x s, [N1]_1 (+) [N2]_2
  Matrix N;     // c x s, N1 stacked over N2
  Matrix Lbar;  // n x s, ([L1]_1  [L2]_2)
  Matrix Mbar;  // c x n, M1 stacked over M2
  Vector dbar;  // s
  Vector rbar;  // c
};

inline StageBlocks stage_blocks(const Dimensions& dims, const StageData& st) {
  StageBlocks b;
  b.D = joint_D(dims, st);
  b.Nbar = direct_sum({own_cols(dims, st.N[0], 0), own_cols(dims, st.N[1], 1)});
  b.N.resize(dims.c(), dims.s());
  b.N << st.N[0], st.N[1];
  b.Lbar.resize(dims.n, dims.s());
  b.Lbar << own_cols(dims, st.L[0], 0), own_cols(dims, st.L[1], 1);
  b.Mbar.resize(dims.c(), dims.n);
  b.Mbar << st.M[0], st.M[1];
  b.dbar = stack({own_segment(dims, st.d[0], 0), own_segment(dims, st.d[1], 1)});
  b.rbar = stack({st.r[0], st.r[1]});
  return b;
}

/// Constraint slacks M x + N v + r, player 1 rows first.
inline Vector constraint_slack(const Dimensions& dims, const StageData& st, const Vector& x,
                               const Vector& v) {
  const auto b = stage_blocks(dims, st);
  return b.Mbar * x + b.N * v + b.rbar;
}

/// LCP in z = (v, mu):  [[D, -Nbar'], [N, 0]] z + [Lbar'x + dbar; Mbar x + rbar].
inline LcpProblem build_stage_lcp(const GameSpec& spec, int k, const Vector& x) {
  const auto& st = spec.stage(k);
  if (x.size() != spec.dims.n) throw ShapeMismatch("stage state has wrong length");
  const auto& dims = spec.dims;
  const auto b = stage_blocks(dims, st);
  const int s = dims.s(), c = dims.c();
  LcpProblem p;
  p.M = Matrix::Zero(s + c, s + c);
  p.M.topLeftCorner(s, s) = b.D;
  p.M.topRightCorner(s, c) = -b.Nbar.transpose();
  p.M.bottomLeftCorner(c, s) = b.N;
  p.q.resize(s + c);
  p.q << b.Lbar.transpose() * x + b.dbar, b.Mbar * x + b.rbar;
  return p;
}

class StageInfeasible : public Error {
 public:
  explicit StageInfeasible(int stage)
      : Error("constraint set empty at stage " + std::to_string(stage) +
              " for the realised state"),
        stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

struct StageSolution {
  Vector v;   // s
  Vector mu;  // c
  LcpSolution lcp;
};

inline StageSolution solve_stage_game(const GameSpec& spec, int k, const Vector& x,
                                      const LemkeOptions& opts = {}) {
  const auto p = build_stage_lcp(spec, k, x);
  auto res = lemke_solve(p, opts);
  if (std::holds_alternative<LcpInfeasible>(res)) throw StageInfeasible(k);
  StageSolution out;
  out.lcp = std::get<LcpSolution>(std::move(res));
  out.v = out.lcp.z.head(spec.dims.s());
  out.mu = out.lcp.z.tail(spec.dims.c());
  return out;
}

}  // namespace fsn
