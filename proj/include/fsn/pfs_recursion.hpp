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

// Backward sweep for the sequential (leader/follower) layer with the
// simultaneous layer frozen at parameter values (w, theta).
//
// Per stage the follower best-responds to the leader's announcement and the
// leader optimises against that response. Both cost-to-go functions are
// quadratic in the state:
//     W^i_k(x) = 1/2 x'S^i_k x + s^i_k'x + m^i_k + (parameter constants)
// The quadratic parts and the feedback gains E do not depend on the
// parameters; s, F and m are affine in them, propagated by G and H.

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "fsn/game_model.hpp"
#include "fsn/stage_game.hpp"

namespace fsn {

class IndefiniteUpsilon : public Error {
 public:
  IndefiniteUpsilon(int stage, std::string which)
      : Error("second-order condition fails for the " + which + " at stage " +
              std::to_string(stage) + " (matrix to invert is not positive definite)"),
        stage_(stage),
        which_(std::move(which)) {}
  int stage() const { return stage_; }
  const std::string& which() const { return which_; }

 private:
  int stage_;
  std::string which_;
};

class SingularInverse : public Error {
 public:
  explicit SingularInverse(int stage, const std::string& what)
      : Error("numerically singular " + what + " at stage " + std::to_string(stage)),
        stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

struct RecursionTape {
  int K = 0;
  std::vector<PerPlayer<Matrix>> S;  // k = 0..K
  std::vector<PerPlayer<Matrix>> E;  // k = 0..K-1, m_i x n
  std::vector<Matrix> Upsilon1;      // k = 0..K-1, (R11 + B1' Psi B1)^{-1}
  std::vector<Matrix> Upsilon2;      // k = 0..K-1, (R22 + B2' S2 B2)^{-1}
  std::vector<Matrix> Delta;         // k = 0..K-1, I - B2 Upsilon2 B2' S2
  std::vector<Matrix> Psi;           // k = 0..K-1, leader's effective next-state weight
  std::vector<Matrix> closed_loop;   // k = 0..K-1, A + B1 E1 + B2 E2
  // Indexed by k+1 = 1..K; entry 0 is unused. G maps col(s^1, s^2)_{k+1}
  // onto col(F^1, F^2)_k, H maps it onto the s-part of stage k.
  std::vector<Matrix> G;  // m x 2n
  std::vector<Matrix> H;  // 2n x 2n

  double h_discrepancy = 0.0;  // block formula vs direct substitution
  double g_discrepancy = 0.0;  // G s vs explicit first-order-condition solve
  std::vector<std::string> warnings;
};

/// Result of the sequential layer at one stage, solved directly from the
/// two first-order conditions given the next-stage value data.
struct SequentialPlay {
  Vector u1, u2, x_next;
};

namespace detail {

// Follower reply u2 = a + C u1.
struct FollowerReply {
  Vector a;
  Matrix C;
};

inline FollowerReply follower_reply(const StageData& st, const Matrix& S2, const Vector& s2,
                                    const Vector& x) {
  const Matrix hess = st.R[1][1] + st.B[1].transpose() * S2 * st.B[1];
  Eigen::LDLT<Matrix> f(hess);
  FollowerReply r;
  r.a = -f.solve(st.B[1].transpose() * (S2 * st.A * x + s2));
  r.C = -f.solve(st.B[1].transpose() * S2 * st.B[0]);
  return r;
}

}  // namespace detail

inline SequentialPlay solve_sequential_layer(const StageData& st, const PerPlayer<Matrix>& S_next,
                                             const PerPlayer<Vector>& s_next, const Vector& x) {
  const auto rep = detail::follower_reply(st, S_next[1], s_next[1], x);
  const Matrix P = st.B[0] + st.B[1] * rep.C;  // d x_next / d u1
  const Vector b = st.A * x + st.B[1] * rep.a;
  const Matrix hess = st.R[0][0] + rep.C.transpose() * st.R[0][1] * rep.C +
                      P.transpose() * S_next[0] * P;
  const Vector rhs = rep.C.transpose() * st.R[0][1] * rep.a +
                     P.transpose() * (S_next[0] * b + s_next[0]);
  SequentialPlay out;
  out.u1 = -Eigen::LDLT<Matrix>(hess).solve(rhs);
  out.u2 = rep.a + rep.C * out.u1;
  out.x_next = b + P * out.u1;
  return out;
}

namespace detail {

inline Matrix spd_inverse(const Matrix& m, int k, const std::string& who,
                          std::vector<std::string>& warnings) {
  if (m.rows() == 0) return m;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw IndefiniteUpsilon(k, who);
  const double rc = llt.rcond();
  if (!(rc > std::numeric_limits<double>::epsilon())) throw SingularInverse(k, who + " matrix");
  if (rc < 1e-12) {
    std::ostringstream os;
    os << "stage " << k << ": " << who << " matrix condition estimate " << 1.0 / rc;
    warnings.push_back(os.str());
  }
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

inline void symmetrize_checked(Matrix& S, int k) {
  const double asym = asymmetry(S);
  if (asym > 1e-9 * (1.0 + max_abs(S))) {
    std::ostringstream os;
    os << "value matrix lost symmetry at stage " << k << " (" << asym << ")";
    throw Error(os.str());
  }
  S = (0.5 * (S + S.transpose())).eval();
}

// s-part of stage k for one player by plain substitution of F into the
// value recursion, without the H blocks.
inline Vector s_step_direct(const StageData& st, const RecursionTape& tape, int k, int i,
                            const Vector& own_terms, const PerPlayer<Vector>& s_next,
                            const PerPlayer<Vector>& F) {
  const Matrix& Acl = tape.closed_loop[static_cast<std::size_t>(k)];
  const auto& E = tape.E[static_cast<std::size_t>(k)];
  const Matrix& Si = tape.S[static_cast<std::size_t>(k + 1)][i];
  const Vector BF = st.B[0] * F[0] + st.B[1] * F[1];
  Vector out = own_terms + Acl.transpose() * (Si * BF + s_next[i]);
  for (int j = 0; j < 2; ++j) out += E[j].transpose() * st.R[i][j] * F[j];
  return out;
}

}  // namespace detail

inline RecursionTape backward_sweep(const GameSpec& spec) {
  check_shapes(spec);
  const auto& dims = spec.dims;
  const int K = dims.K, n = dims.n, m1 = dims.m1, m2 = dims.m2;
  const auto uK = static_cast<std::size_t>(K);

  RecursionTape t;
  t.K = K;
  t.S.resize(uK + 1);
  t.E.resize(uK);
  t.Upsilon1.resize(uK);
  t.Upsilon2.resize(uK);
  t.Delta.resize(uK);
  t.Psi.resize(uK);
  t.closed_loop.resize(uK);
  t.G.resize(uK + 1);
  t.H.resize(uK + 1);
  t.S[uK] = {spec.stages[uK].Q[0], spec.stages[uK].Q[1]};

  const Matrix I = Matrix::Identity(n, n);
  for (int k = K - 1; k >= 0; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto& st = spec.stages[uk];
    const Matrix& A = st.A;
    const Matrix& B1 = st.B[0];
    const Matrix& B2 = st.B[1];
    const Matrix& S1 = t.S[uk + 1][0];
    const Matrix& S2 = t.S[uk + 1][1];
    const Matrix& R12 = st.R[0][1];

    const Matrix Y2 = detail::spd_inverse(st.R[1][1] + B2.transpose() * S2 * B2, k, "follower",
                                          t.warnings);
    const Matrix Delta = I - B2 * Y2 * B2.transpose() * S2;
    const Matrix T2 = S2 * B2 * Y2;  // recurring S2 B2 Upsilon2
    const Matrix Psi = T2 * R12 * T2.transpose() + Delta.transpose() * S1 * Delta;
    const Matrix Y1 =
        detail::spd_inverse(st.R[0][0] + B1.transpose() * Psi * B1, k, "leader", t.warnings);

    const Matrix E1 = -Y1 * B1.transpose() * Psi * A;
    const Matrix E2 = -Y2 * B2.transpose() * S2 * (A + B1 * E1);

    Matrix G(m1 + m2, 2 * n);
    const Matrix G11 = -Y1 * B1.transpose() * Delta.transpose();
    const Matrix G12 = -Y1 * B1.transpose() *
                       (T2 * R12 * Y2 * B2.transpose() - Delta.transpose() * S1 * B2 * Y2 * B2.transpose());
    const Matrix G21 = -Y2 * B2.transpose() * S2 * B1 * G11;
    const Matrix G22 = -Y2 * B2.transpose() * (I + S2 * B1 * G12);
    G << G11, G12, G21, G22;

    const Matrix Acl = A + B1 * E1 + B2 * E2;
    const PerPlayer<Matrix> E{E1, E2};
    PerPlayer<Matrix> S;
    for (int i = 0; i < 2; ++i) {
      S[i] = st.Q[i] + Acl.transpose() * t.S[uk + 1][i] * Acl;
      for (int j = 0; j < 2; ++j) S[i] += E[j].transpose() * st.R[i][j] * E[j];
      detail::symmetrize_checked(S[i], k);
    }

    // H blocks: Ups_ij = E^j'R^{ij} + Acl' S^i B^j collects how F^j feeds
    // player i's linear value term.
    Matrix H(2 * n, 2 * n);
    const PerPlayer<Matrix> Bs{B1, B2};
    auto Gblk = [&](int i, int j) {
      return G.block(i == 0 ? 0 : m1, j * n, dims.m_of(i), n);
    };
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      auto ups = [&](int a, int b) -> Matrix {
        return E[b].transpose() * st.R[a][b] + Acl.transpose() * t.S[uk + 1][a] * Bs[b];
      };
      const Matrix Uii = ups(i, i), Uij = ups(i, j);
      H.block(i * n, i * n, n, n) = Uii * Gblk(i, i) + Acl.transpose() + Uij * Gblk(j, i);
      H.block(i * n, j * n, n, n) = Uii * Gblk(i, j) + Uij * Gblk(j, j);
    }

    t.Upsilon1[uk] = Y1;
    t.Upsilon2[uk] = Y2;
    t.Delta[uk] = Delta;
    t.Psi[uk] = Psi;
    t.E[uk] = E;
    t.closed_loop[uk] = Acl;
    t.G[uk + 1] = G;
    t.H[uk + 1] = H;
    t.S[uk] = S;

    // Cross-checks on unit next-stage linear terms.
    const Vector zero_x = Vector::Zero(n);
    for (int col = 0; col < 2 * n; ++col) {
      PerPlayer<Vector> s_next{Vector::Zero(n), Vector::Zero(n)};
      s_next[col / n](col % n) = 1.0;
      const auto play = solve_sequential_layer(st, t.S[uk + 1], s_next, zero_x);
      const Vector F = G.col(col);
      const PerPlayer<Vector> Fp{F.head(m1), F.tail(m2)};
      t.g_discrepancy = std::max(
          {t.g_discrepancy, max_abs(Vector(play.u1 - Fp[0])), max_abs(Vector(play.u2 - Fp[1]))});
      for (int i = 0; i < 2; ++i) {
        const Vector direct =
            detail::s_step_direct(st, t, k, i, Vector::Zero(n), s_next, Fp);
        t.h_discrepancy =
            std::max(t.h_discrepancy, max_abs(Vector(direct - H.col(col).segment(i * n, n))));
      }
    }
  }
  if (t.h_discrepancy > 1e-8 || t.g_discrepancy > 1e-8) {
    std::ostringstream os;
    os << "gain blocks disagree with direct substitution (G " << t.g_discrepancy << ", H "
       << t.h_discrepancy << ")";
    t.warnings.push_back(os.str());
  }
  return t;
}

/// Frozen simultaneous-layer values for every stage 0..K.
struct ParameterStack {
  std::vector<Vector> w;      // each s
  std::vector<Vector> theta;  // each c, player 1 rows first

  static ParameterStack zeros(const Dimensions& dims) {
    ParameterStack p;
    p.w.assign(static_cast<std::size_t>(dims.K + 1), Vector::Zero(dims.s()));
    p.theta.assign(static_cast<std::size_t>(dims.K + 1), Vector::Zero(dims.c()));
    return p;
  }

  void check(const Dimensions& dims) const {
    const auto len = static_cast<std::size_t>(dims.K + 1);
    if (w.size() != len || theta.size() != len)
      throw ShapeMismatch("parameter stack must cover stages 0..K");
    for (std::size_t k = 0; k < len; ++k)
      if (w[k].size() != dims.s() || theta[k].size() != dims.c())
        throw ShapeMismatch("parameter stack entry at stage " + std::to_string(k) +
                            " has the wrong length");
  }

  Vector theta_of(const Dimensions& dims, int k, int i) const {
    return theta[static_cast<std::size_t>(k)].segment(dims.c_offset(i), dims.c_of(i));
  }
};

struct AffineParts {
  std::vector<PerPlayer<Vector>> s;  // k = 0..K
  std::vector<PerPlayer<Vector>> F;  // k = 0..K-1
  std::vector<PerPlayer<double>> m;  // k = 0..K, m[K] = 0

  Vector s_stacked(int k) const {
    const auto& sk = s[static_cast<std::size_t>(k)];
    return stack({sk[0], sk[1]});
  }
};

/// Stage-k terms of s^i that come directly from the frozen parameters:
/// p + L w - M' theta.
inline Vector parameter_terms(const GameSpec& spec, const ParameterStack& params, int k, int i) {
  const auto& st = spec.stage(k);
  return st.p[i] + st.L[i] * params.w[static_cast<std::size_t>(k)] -
         st.M[i].transpose() * params.theta_of(spec.dims, k, i);
}

inline AffineParts eval_affine_parts(const GameSpec& spec, const RecursionTape& tape,
                                     const ParameterStack& params) {
  const auto& dims = spec.dims;
  params.check(dims);
  if (tape.K != dims.K) throw ShapeMismatch("tape horizon differs from the spec");
  const int K = dims.K, n = dims.n;
  const auto uK = static_cast<std::size_t>(K);

  AffineParts a;
  a.s.resize(uK + 1);
  a.F.resize(uK);
  a.m.resize(uK + 1);
  a.s[uK] = {parameter_terms(spec, params, K, 0), parameter_terms(spec, params, K, 1)};
  a.m[uK] = {0.0, 0.0};

  for (int k = K - 1; k >= 0; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto& st = spec.stages[uk];
    const Vector s_next = a.s_stacked(k + 1);
    const Vector F = tape.G[uk + 1] * s_next;
    a.F[uk] = {F.head(dims.m1), F.tail(dims.m2)};
    const Vector Hs = tape.H[uk + 1] * s_next;
    const Vector BF = st.B[0] * a.F[uk][0] + st.B[1] * a.F[uk][1];
    for (int i = 0; i < 2; ++i) {
      a.s[uk][i] = parameter_terms(spec, params, k, i) + Hs.segment(i * n, n);
      const Matrix& Si = tape.S[uk + 1][i];
      double m = a.m[uk + 1][i] + 0.5 * BF.dot(Si * BF) + BF.dot(a.s[uk + 1][i]);
      for (int j = 0; j < 2; ++j) m += 0.5 * a.F[uk][j].dot(st.R[i][j] * a.F[uk][j]);
      a.m[uk][i] = m;
    }
  }
  return a;
}

/// Stage-k constant of player i's parametric cost:
/// 1/2 w'D w + d'w - theta^i'(N w + r).
inline double parameter_constant(const GameSpec& spec, const ParameterStack& params, int k,
                                 int i) {
  const auto& st = spec.stage(k);
  const Vector& w = params.w[static_cast<std::size_t>(k)];
  const Vector th = params.theta_of(spec.dims, k, i);
  return 0.5 * w.dot(st.D[i] * w) + st.d[i].dot(w) - th.dot(st.N[i] * w + st.r[i]);
}

/// Cost-to-go of the parametric game from (k, x) under the pFS strategies.
inline PerPlayer<double> parametric_value(const GameSpec& spec, const RecursionTape& tape,
                                          const AffineParts& parts, const ParameterStack& params,
                                          int k, const Vector& x) {
  PerPlayer<double> W{};
  const auto uk = static_cast<std::size_t>(k);
  for (int i = 0; i < 2; ++i) {
    W[i] = 0.5 * x.dot(tape.S[uk][i] * x) + parts.s[uk][i].dot(x) + parts.m[uk][i];
    for (int tau = k; tau <= spec.dims.K; ++tau) W[i] += parameter_constant(spec, params, tau, i);
  }
  return W;
}

struct FocResidual {
  double leader = 0.0;
  double follower = 0.0;
};

/// Stationarity of both players' stage problems at the announced strategies
/// u^i = E^i x + F^i (infinity norms). The leader's condition accounts for
/// the follower's reaction to u1.
inline FocResidual foc_residuals_at(const GameSpec& spec, const RecursionTape& tape,
                                    const AffineParts& parts, int k, const Vector& x,
                                    const PerPlayer<Vector>& u) {
  if (k < 0 || k >= spec.dims.K) throw IndexOutOfRange("first-order conditions need k in 0..K-1");
  const auto uk = static_cast<std::size_t>(k);
  const auto& st = spec.stages[uk];
  const auto& S_next = tape.S[uk + 1];
  const auto& s_next = parts.s[uk + 1];
  const Vector x_next = step(st, x, u);

  FocResidual r;
  const Vector g2 = st.R[1][1] * u[1] + st.B[1].transpose() * (S_next[1] * x_next + s_next[1]);
  r.follower = max_abs(g2);

  const auto rep = detail::follower_reply(st, S_next[1], s_next[1], x);
  const Matrix P = st.B[0] + st.B[1] * rep.C;
  const Vector g1 = st.R[0][0] * u[0] + rep.C.transpose() * st.R[0][1] * u[1] +
                    P.transpose() * (S_next[0] * x_next + s_next[0]);
  r.leader = max_abs(g1);
  return r;
}

inline FocResidual foc_residuals(const GameSpec& spec, const RecursionTape& tape,
                                 const AffineParts& parts, int k, const Vector& x) {
  if (k < 0 || k >= spec.dims.K) throw IndexOutOfRange("first-order conditions need k in 0..K-1");
  const auto uk = static_cast<std::size_t>(k);
  const PerPlayer<Vector> u{tape.E[uk][0] * x + parts.F[uk][0],
                            tape.E[uk][1] * x + parts.F[uk][1]};
  return foc_residuals_at(spec, tape, parts, k, x, u);
}

}  // namespace fsn
