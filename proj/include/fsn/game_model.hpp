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

// Constrained linear-quadratic difference game data.
//
//   x_{k+1} = A_k x_k + B1_k u1_k + B2_k u2_k,               k = 0..K-1
//   M^i_k x_k + N^i_k v_k + r^i_k >= 0,   v^i_k >= 0,          k = 0..K
//
//   g^i_k = 1/2 x'Q^i x + p^i'x + 1/2 sum_j u^j' R^{ij} u^j
//         + 1/2 v'D^i v + x'L^i v + d^i'v
//
// Player index 0 is the leader, 1 the follower. v = col(v^1, v^2) stacks the
// simultaneous decisions of both players; "own" blocks of a player-indexed
// matrix are the rows/columns belonging to that player's part of v.

#pragma once

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsn/common.hpp"

namespace fsn {

struct Dimensions {
  int n = 0;
  int m1 = 0, m2 = 0;
  int s1 = 0, s2 = 0;
  int c1 = 0, c2 = 0;
  int K = 1;

  int m() const { return m1 + m2; }
  int s() const { return s1 + s2; }
  int c() const { return c1 + c2; }
  int m_of(int i) const { return i == kLeader ? m1 : m2; }
  int s_of(int i) const { return i == kLeader ? s1 : s2; }
  int c_of(int i) const { return i == kLeader ? c1 : c2; }
  int s_offset(int i) const { return i == kLeader ? 0 : s1; }
  int c_offset(int i) const { return i == kLeader ? 0 : c1; }

  bool operator==(const Dimensions&) const = default;
};

struct StageData {
  // Dynamics and sequential costs; empty at the terminal stage.
  Matrix A;
  PerPlayer<Matrix> B;
  PerPlayer<PerPlayer<Matrix>> R;  // R[i][j] weights u^j in player i's cost

  PerPlayer<Matrix> Q;
  PerPlayer<Vector> p;
  PerPlayer<Matrix> D;  // s x s
  PerPlayer<Matrix> L;  // n x s
  PerPlayer<Vector> d;  // s
  PerPlayer<Matrix> M;  // c_i x n
  PerPlayer<Matrix> N;  // c_i x s
  PerPlayer<Vector> r;  // c_i

  bool terminal = false;

  /// All-zero stage of the right shape.
  static StageData zeros(const Dimensions& dims, bool terminal) {
    StageData st;
    st.terminal = terminal;
    const int n = dims.n, s = dims.s();
    if (!terminal) {
      st.A = Matrix::Zero(n, n);
      for (int i = 0; i < 2; ++i) {
        st.B[i] = Matrix::Zero(n, dims.m_of(i));
        for (int j = 0; j < 2; ++j) st.R[i][j] = Matrix::Zero(dims.m_of(j), dims.m_of(j));
      }
    }
    for (int i = 0; i < 2; ++i) {
      st.Q[i] = Matrix::Zero(n, n);
      st.p[i] = Vector::Zero(n);
      st.D[i] = Matrix::Zero(s, s);
      st.L[i] = Matrix::Zero(n, s);
      st.d[i] = Vector::Zero(s);
      st.M[i] = Matrix::Zero(dims.c_of(i), n);
      st.N[i] = Matrix::Zero(dims.c_of(i), s);
      st.r[i] = Vector::Zero(dims.c_of(i));
    }
    return st;
  }

  /// Copy without the dynamics and sequential-cost blocks.
  StageData as_terminal() const {
    StageData st = *this;
    st.terminal = true;
    st.A = Matrix();
    for (int i = 0; i < 2; ++i) {
      st.B[i] = Matrix();
      for (int j = 0; j < 2; ++j) st.R[i][j] = Matrix();
    }
    return st;
  }
};

// Own-block extraction. [X]_i in the usual block notation.

/// Rows of player i in an s x s matrix: s_i x s.
inline Matrix own_rows(const Dimensions& dims, const Matrix& D, int i) {
  return D.middleRows(dims.s_offset(i), dims.s_of(i));
}

/// Columns of player i in a (. x s) matrix.
inline Matrix own_cols(const Dimensions& dims, const Matrix& X, int i) {
  return X.middleCols(dims.s_offset(i), dims.s_of(i));
}

inline Vector own_segment(const Dimensions& dims, const Vector& v, int i) {
  return v.segment(dims.s_offset(i), dims.s_of(i));
}

struct GameSpec {
  Dimensions dims;
  std::vector<StageData> stages;  // K + 1 entries
  Vector x0;

  const StageData& stage(int k) const {
    if (k < 0 || k > dims.K)
      throw IndexOutOfRange("stage index " + std::to_string(k) + " outside 0.." +
                            std::to_string(dims.K));
    return stages[static_cast<std::size_t>(k)];
  }

  /// Repeats one stage over the horizon; the copy at K drops the dynamics.
  static GameSpec time_invariant(const Dimensions& dims, const StageData& stage,
                                 const Vector& x0) {
    GameSpec spec;
    spec.dims = dims;
    spec.x0 = x0;
    for (int k = 0; k < dims.K; ++k) {
      StageData st = stage;
      st.terminal = false;
      spec.stages.push_back(std::move(st));
    }
    spec.stages.push_back(stage.as_terminal());
    return spec;
  }
};

namespace detail {

inline void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                         const std::string& what, int k) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " at stage " << k << " is " << m.rows() << "x" << m.cols()
       << ", expected " << rows << "x" << cols;
    throw ShapeMismatch(os.str());
  }
}

inline void expect_size(const Vector& v, Eigen::Index size, const std::string& what, int k) {
  if (v.size() != size) {
    std::ostringstream os;
    os << what << " at stage " << k << " has length " << v.size() << ", expected " << size;
    throw ShapeMismatch(os.str());
  }
}

inline const char* player_suffix(int i) { return i == kLeader ? "1" : "2"; }

}  // namespace detail

/// Throws ShapeMismatch unless every block has the size implied by dims.
inline void check_shapes(const GameSpec& spec) {
  const auto& dims = spec.dims;
  if (dims.n < 0 || dims.m1 < 0 || dims.m2 < 0 || dims.s1 < 0 || dims.s2 < 0 ||
      dims.c1 < 0 || dims.c2 < 0)
    throw ShapeMismatch("dimensions must be non-negative");
  if (dims.K < 1) throw ShapeMismatch("horizon K must be at least 1");
  if (spec.stages.size() != static_cast<std::size_t>(dims.K + 1))
    throw ShapeMismatch("expected " + std::to_string(dims.K + 1) + " stages, got " +
                        std::to_string(spec.stages.size()));
  detail::expect_size(spec.x0, dims.n, "x0", 0);

  const int n = dims.n, s = dims.s();
  for (int k = 0; k <= dims.K; ++k) {
    const auto& st = spec.stages[static_cast<std::size_t>(k)];
    const bool terminal = k == dims.K;
    if (st.terminal != terminal)
      throw ShapeMismatch("stage " + std::to_string(k) +
                          (terminal ? " must be terminal" : " must not be terminal"));
    if (!terminal) {
      detail::expect_shape(st.A, n, n, "A", k);
      for (int i = 0; i < 2; ++i) {
        const std::string si = detail::player_suffix(i);
        detail::expect_shape(st.B[i], n, dims.m_of(i), "B" + si, k);
        for (int j = 0; j < 2; ++j)
          detail::expect_shape(st.R[i][j], dims.m_of(j), dims.m_of(j),
                               "R" + si + detail::player_suffix(j), k);
      }
    } else if (st.A.size() != 0 || st.B[0].size() != 0 || st.B[1].size() != 0) {
      throw ShapeMismatch("terminal stage carries no dynamics");
    }
    for (int i = 0; i < 2; ++i) {
      const std::string si = detail::player_suffix(i);
      detail::expect_shape(st.Q[i], n, n, "Q" + si, k);
      detail::expect_size(st.p[i], n, "p" + si, k);
      detail::expect_shape(st.D[i], s, s, "D" + si, k);
      detail::expect_shape(st.L[i], n, s, "L" + si, k);
      detail::expect_size(st.d[i], s, "d" + si, k);
      detail::expect_shape(st.M[i], dims.c_of(i), n, "M" + si, k);
      detail::expect_shape(st.N[i], dims.c_of(i), s, "N" + si, k);
      detail::expect_size(st.r[i], dims.c_of(i), "r" + si, k);
    }
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kSymmetrizeTol = 1e-9;
inline constexpr double kCholeskyPivotTol = 1e-10;
inline constexpr double kRankTol = 1e-10;

struct ValidationCheck {
  std::string name;  // finite | symmetry | pd_D | rank_N
  int stage = 0;
  bool passed = true;
  double value = 0.0;  // the measured quantity (asymmetry, min pivot, ...)
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ValidationCheck& c) { return c.passed; });
  }

  const ValidationCheck* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed) return &c;
    return nullptr;
  }
};

/// Human-readable description of a validation check id.
inline std::string describe_check(const std::string& name) {
  if (name == "pd_D")
    return "simultaneous-layer convexity: D_k + D_k^T must be positive definite";
  if (name == "rank_N")
    return "constraint qualification: own constraint block [N^i]_i must have full row rank";
  if (name == "symmetry") return "symmetric cost matrices (Q, R^ii, D^i)";
  if (name == "finite") return "finite entries";
  return name;
}

/// Smallest squared Cholesky pivot of a symmetric matrix, or a non-positive
/// value when the factorization breaks down.
inline double min_cholesky_pivot(const Matrix& sym) {
  if (sym.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) return -1.0;
  const Vector diag = Matrix(llt.matrixL()).diagonal();
  return diag.cwiseAbs2().minCoeff();
}

/// Joint simultaneous-layer matrix: player i's own rows of D^i.
inline Matrix joint_D(const Dimensions& dims, const StageData& st) {
  Matrix D(dims.s(), dims.s());
  for (int i = 0; i < 2; ++i)
    D.middleRows(dims.s_offset(i), dims.s_of(i)) = own_rows(dims, st.D[i], i);
  return D;
}

/// Checks the solver's data-level sufficient conditions. Does not test
/// non-emptiness of the constraint sets; that is state dependent and
/// surfaces at solve time.
inline ValidationReport validate(const GameSpec& spec) {
  check_shapes(spec);
  const auto& dims = spec.dims;
  ValidationReport rep;

  for (int k = 0; k <= dims.K; ++k) {
    const auto& st = spec.stages[static_cast<std::size_t>(k)];

    bool finite = all_finite(st.A);
    for (int i = 0; i < 2; ++i) {
      finite = finite && all_finite(st.B[i]) && all_finite(st.Q[i]) && all_finite(st.p[i]) &&
               all_finite(st.D[i]) && all_finite(st.L[i]) && all_finite(st.d[i]) &&
               all_finite(st.M[i]) && all_finite(st.N[i]) && all_finite(st.r[i]);
      for (int j = 0; j < 2; ++j) finite = finite && all_finite(st.R[i][j]);
    }
    if (k == 0) finite = finite && all_finite(spec.x0);
    rep.checks.push_back({"finite", k, finite, finite ? 0.0 : 1.0, ""});
    if (!finite) continue;

    double asym = 0.0;
    for (int i = 0; i < 2; ++i) {
      asym = std::max({asym, asymmetry(st.Q[i]), asymmetry(st.D[i])});
      if (!st.terminal)
        for (int j = 0; j < 2; ++j) asym = std::max(asym, asymmetry(st.R[i][j]));
    }
    rep.checks.push_back({"symmetry", k, asym <= kSymmetryTol, asym, ""});

    const Matrix Dk = joint_D(dims, st);
    const double pivot = min_cholesky_pivot(Dk + Dk.transpose());
    rep.checks.push_back({"pd_D", k, pivot > kCholeskyPivotTol, pivot, ""});

    for (int i = 0; i < 2; ++i) {
      const int ci = dims.c_of(i), si = dims.s_of(i);
      if (ci == 0) continue;
      double sigma_min = 0.0;
      if (ci <= si) {
        const Matrix own = own_cols(dims, st.N[i], i);
        Eigen::JacobiSVD<Matrix> svd(own);
        sigma_min = svd.singularValues().minCoeff();
      }
      rep.checks.push_back({"rank_N", k, sigma_min > kRankTol, sigma_min,
                            std::string("player ") + detail::player_suffix(i)});
    }
  }
  return rep;
}

/// validate() and throw AssumptionViolated on the first failing check.
inline void ensure_valid(const GameSpec& spec) {
  const auto rep = validate(spec);
  if (const auto* bad = rep.first_failure()) {
    std::ostringstream os;
    os << describe_check(bad->name) << " (measured " << bad->value << ")";
    if (!bad->detail.empty()) os << ", " << bad->detail;
    throw AssumptionViolated(bad->name, bad->stage, os.str());
  }
}

/// Scales the stage-k cost blocks by beta^k; dynamics and constraints are
/// left untouched.
inline GameSpec fold_discount(const GameSpec& spec, double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("discount factor must lie in (0, 1]");
  GameSpec out = spec;
  for (int k = 0; k <= spec.dims.K; ++k) {
    const double f = std::pow(beta, k);
    auto& st = out.stages[static_cast<std::size_t>(k)];
    for (int i = 0; i < 2; ++i) {
      st.Q[i] *= f;
      st.p[i] *= f;
      st.D[i] *= f;
      st.L[i] *= f;
      st.d[i] *= f;
      if (!st.terminal)
        for (int j = 0; j < 2; ++j) st.R[i][j] *= f;
    }
  }
  return out;
}

/// The subgame on stages first..K started from x.
inline GameSpec truncate(const GameSpec& spec, int first, const Vector& x) {
  if (first < 0 || first >= spec.dims.K)
    throw IndexOutOfRange("subgame must start in 0..K-1");
  GameSpec out;
  out.dims = spec.dims;
  out.dims.K = spec.dims.K - first;
  out.stages.assign(spec.stages.begin() + first, spec.stages.end());
  out.x0 = x;
  return out;
}

/// Replaces an almost-symmetric matrix by its symmetric part. Asymmetry
/// above kSymmetrizeTol is a modeling error and is rejected.
inline void symmetrize_or_reject(Matrix& m, const std::string& what, int k) {
  if (m.rows() != m.cols()) return;
  const double asym = asymmetry(m);
  if (asym > kSymmetrizeTol) {
    std::ostringstream os;
    os << what << " asymmetric by " << asym;
    throw AssumptionViolated("symmetry", k, os.str());
  }
  m = (0.5 * (m + m.transpose())).eval();
}

/// Applies symmetrize_or_reject to every matrix that enters a quadratic form.
inline void symmetrize_costs(GameSpec& spec) {
  for (int k = 0; k <= spec.dims.K; ++k) {
    auto& st = spec.stages[static_cast<std::size_t>(k)];
    for (int i = 0; i < 2; ++i) {
      const std::string si = detail::player_suffix(i);
      symmetrize_or_reject(st.Q[i], "Q" + si, k);
      symmetrize_or_reject(st.D[i], "D" + si, k);
      if (!st.terminal)
        for (int j = 0; j < 2; ++j)
          symmetrize_or_reject(st.R[i][j], "R" + si + detail::player_suffix(j), k);
    }
  }
}

// ---------------------------------------------------------------------------
// Cost evaluation
// ---------------------------------------------------------------------------

/// Simultaneous-layer part of player i's stage cost: 1/2 v'D v + x'L v + d'v.
inline double simultaneous_cost(const StageData& st, int i, const Vector& x, const Vector& v) {
  return 0.5 * v.dot(st.D[i] * v) + x.dot(st.L[i] * v) + st.d[i].dot(v);
}

/// Full stage cost of player i. u is ignored at the terminal stage.
inline double stage_cost(const StageData& st, int i, const Vector& x, const PerPlayer<Vector>& u,
                         const Vector& v) {
  double g = 0.5 * x.dot(st.Q[i] * x) + st.p[i].dot(x) + simultaneous_cost(st, i, x, v);
  if (!st.terminal)
    for (int j = 0; j < 2; ++j) g += 0.5 * u[j].dot(st.R[i][j] * u[j]);
  return g;
}

/// One step of the dynamics.
inline Vector step(const StageData& st, const Vector& x, const PerPlayer<Vector>& u) {
  return st.A * x + st.B[0] * u[0] + st.B[1] * u[1];
}

}  // namespace fsn
