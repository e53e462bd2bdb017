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

// Elimination of the state from the stage complementarity conditions.
//
// Along the parametric feedback play the states x_1..x_K are affine in x0,
// the linear cost terms p and the frozen parameters (w, theta):
//     X = Phi0 x0 + Phi1 p + Phi2 w + Phi3 theta
// Substituting X into every stage KKT system for k = 1..K yields one LCP in
// z = (w_1..w_K, theta_1..theta_K). Stage 0 is not part of it: its decisions
// do not influence any later state and are solved at x0 directly.

#pragma once

#include <vector>

#include "fsn/pfs_recursion.hpp"
#include "fsn/stage_game.hpp"

namespace fsn {

struct TransitionTables {
  int K = 0;
  // forward[rho][k] = Acl_{k-1} ... Acl_rho for 0 <= rho <= k <= K.
  std::vector<std::vector<Matrix>> forward;
  // backward[k][tau] = H_{k+1} ... H_tau for 1 <= k <= tau <= K.
  std::vector<std::vector<Matrix>> backward;

  const Matrix& phi(int rho, int k) const {
    return forward[static_cast<std::size_t>(rho)][static_cast<std::size_t>(k)];
  }
  const Matrix& varphi(int k, int tau) const {
    return backward[static_cast<std::size_t>(k)][static_cast<std::size_t>(tau)];
  }
};

inline TransitionTables compute_transitions(const GameSpec& spec, const RecursionTape& tape) {
  const int K = spec.dims.K, n = spec.dims.n;
  const auto len = static_cast<std::size_t>(K + 1);
  TransitionTables t;
  t.K = K;
  t.forward.assign(len, std::vector<Matrix>(len));
  t.backward.assign(len, std::vector<Matrix>(len));

  for (int k = 0; k <= K; ++k) {
    auto& col = t.forward;
    col[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = Matrix::Identity(n, n);
    for (int rho = k - 1; rho >= 0; --rho)
      col[static_cast<std::size_t>(rho)][static_cast<std::size_t>(k)] =
          col[static_cast<std::size_t>(rho + 1)][static_cast<std::size_t>(k)] *
          tape.closed_loop[static_cast<std::size_t>(rho)];
  }
  for (int tau = 1; tau <= K; ++tau) {
    auto& b = t.backward;
    b[static_cast<std::size_t>(tau)][static_cast<std::size_t>(tau)] = Matrix::Identity(2 * n, 2 * n);
    for (int k = tau - 1; k >= 1; --k)
      b[static_cast<std::size_t>(k)][static_cast<std::size_t>(tau)] =
          tape.H[static_cast<std::size_t>(k + 1)] *
          b[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(tau)];
  }
  return t;
}

struct PhiBlocks {
  Matrix Phi0;  // nK x n
  Matrix Phi1;  // nK x 2nK
  Matrix Phi2;  // nK x sK
  Matrix Phi3;  // nK x cK
};

/// col(L1, L2) of stage k: 2n x s.
inline Matrix stacked_L(const Dimensions& dims, const StageData& st) {
  Matrix L(2 * dims.n, dims.s());
  L << st.L[0], st.L[1];
  return L;
}

/// M1' (+) M2' of stage k: 2n x c.
inline Matrix stacked_M_transpose(const StageData& st) {
  return direct_sum({st.M[0].transpose(), st.M[1].transpose()});
}

inline PhiBlocks compute_phi_blocks(const GameSpec& spec, const RecursionTape& tape,
                                    const TransitionTables& tt) {
  const auto& dims = spec.dims;
  const int K = dims.K, n = dims.n, s = dims.s(), c = dims.c();
  PhiBlocks P;
  P.Phi0.resize(n * K, n);
  P.Phi1 = Matrix::Zero(n * K, 2 * n * K);
  P.Phi2 = Matrix::Zero(n * K, s * K);
  P.Phi3 = Matrix::Zero(n * K, c * K);

  // Input map of the parametric linear term: x_{rho} picks up Bbar_{rho-1} s_rho.
  std::vector<Matrix> Bbar(static_cast<std::size_t>(K));
  for (int rho = 0; rho < K; ++rho) {
    const auto& st = spec.stages[static_cast<std::size_t>(rho)];
    Matrix B(n, dims.m());
    B << st.B[0], st.B[1];
    Bbar[static_cast<std::size_t>(rho)] = B * tape.G[static_cast<std::size_t>(rho + 1)];
  }

  for (int k = 1; k <= K; ++k) {
    P.Phi0.middleRows((k - 1) * n, n) = tt.phi(0, k);
    for (int tau = 1; tau <= K; ++tau) {
      Matrix blk = Matrix::Zero(n, 2 * n);
      for (int rho = 1; rho <= std::min(k, tau); ++rho)
        blk += tt.phi(rho, k) * Bbar[static_cast<std::size_t>(rho - 1)] * tt.varphi(rho, tau);
      const auto& st = spec.stages[static_cast<std::size_t>(tau)];
      P.Phi1.block((k - 1) * n, (tau - 1) * 2 * n, n, 2 * n) = blk;
      P.Phi2.block((k - 1) * n, (tau - 1) * s, n, s) = blk * stacked_L(dims, st);
      P.Phi3.block((k - 1) * n, (tau - 1) * c, n, c) = -blk * stacked_M_transpose(st);
    }
  }
  return P;
}

/// Stage 1..K aggregates of the stage KKT blocks.
struct StageAggregates {
  Matrix D, Nbar, N, Lbar, Mbar;
  Vector d, r, p;  // p stacks col(p1, p2) per stage
};

inline StageAggregates aggregate_stages(const GameSpec& spec) {
  const auto& dims = spec.dims;
  std::vector<Matrix> D, Nbar, N, Lbar, Mbar;
  std::vector<Vector> d, r, p;
  for (int k = 1; k <= dims.K; ++k) {
    const auto& st = spec.stages[static_cast<std::size_t>(k)];
    const auto b = stage_blocks(dims, st);
    D.push_back(b.D);
    Nbar.push_back(b.Nbar);
    N.push_back(b.N);
    Lbar.push_back(b.Lbar);
    Mbar.push_back(b.Mbar);
    d.push_back(b.dbar);
    r.push_back(b.rbar);
    p.push_back(stack({st.p[0], st.p[1]}));
  }
  return {direct_sum(D), direct_sum(Nbar), direct_sum(N), direct_sum(Lbar), direct_sum(Mbar),
          stack(d), stack(r), stack(p)};
}

struct GlobalLcp {
  LcpProblem problem;
  PhiBlocks phi;
  StageAggregates agg;
};

inline GlobalLcp assemble_global_lcp_detailed(const GameSpec& spec, const RecursionTape& tape,
                                              const Vector& x0) {
  const auto& dims = spec.dims;
  if (x0.size() != dims.n) throw ShapeMismatch("x0 has wrong length");
  GlobalLcp g;
  g.phi = compute_phi_blocks(spec, tape, compute_transitions(spec, tape));
  g.agg = aggregate_stages(spec);
  const auto& P = g.phi;
  const auto& a = g.agg;
  const Eigen::Index sK = a.D.rows(), cK = a.N.rows();

  auto& lcp = g.problem;
  lcp.M.resize(sK + cK, sK + cK);
  lcp.M.topLeftCorner(sK, sK) = a.D + a.Lbar.transpose() * P.Phi2;
  lcp.M.topRightCorner(sK, cK) = -a.Nbar.transpose() + a.Lbar.transpose() * P.Phi3;
  lcp.M.bottomLeftCorner(cK, sK) = a.N + a.Mbar * P.Phi2;
  lcp.M.bottomRightCorner(cK, cK) = a.Mbar * P.Phi3;
  const Vector drift = P.Phi1 * a.p + P.Phi0 * x0;
  lcp.q.resize(sK + cK);
  lcp.q << a.d + a.Lbar.transpose() * drift, a.r + a.Mbar * drift;
  return g;
}

inline LcpProblem assemble_global_lcp(const GameSpec& spec, const RecursionTape& tape,
                                      const Vector& x0) {
  return assemble_global_lcp_detailed(spec, tape, x0).problem;
}

/// Splits a global LCP vector into per-stage parameters; stage 0 entries
/// are left at zero.
inline ParameterStack unpack_parameters(const Dimensions& dims, const Vector& z) {
  const int K = dims.K, s = dims.s(), c = dims.c();
  if (z.size() != (s + c) * K) throw ShapeMismatch("global LCP vector has wrong length");
  auto params = ParameterStack::zeros(dims);
  for (int k = 1; k <= K; ++k) {
    params.w[static_cast<std::size_t>(k)] = z.segment((k - 1) * s, s);
    params.theta[static_cast<std::size_t>(k)] = z.segment(s * K + (k - 1) * c, c);
  }
  return params;
}

/// Inverse of unpack_parameters (stage 0 dropped).
inline Vector pack_parameters(const Dimensions& dims, const ParameterStack& params) {
  const int K = dims.K, s = dims.s(), c = dims.c();
  Vector z((s + c) * K);
  for (int k = 1; k <= K; ++k) {
    z.segment((k - 1) * s, s) = params.w[static_cast<std::size_t>(k)];
    z.segment(s * K + (k - 1) * c, c) = params.theta[static_cast<std::size_t>(k)];
  }
  return z;
}

}  // namespace fsn
