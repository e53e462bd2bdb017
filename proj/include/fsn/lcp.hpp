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

// Linear complementarity problems: find z >= 0 with w = M z + q >= 0 and
// z'w = 0. Lemke's complementary pivoting with a lexicographic ratio test,
// plus an exhaustive basis enumeration for small instances.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "fsn/common.hpp"

namespace fsn {

struct LcpProblem {
  Matrix M;
  Vector q;

  Eigen::Index dim() const { return q.size(); }

  void check() const {
    if (M.rows() != q.size() || M.cols() != q.size())
      throw ShapeMismatch("LCP matrix must be square and match q");
    if (!all_finite(M) || !all_finite(q)) throw ShapeMismatch("LCP data must be finite");
  }
};

struct LcpResidual {
  double complementarity = 0.0;  // |z'w|
  double feasibility = 0.0;      // max(0, -min z, -min w)
};

inline LcpResidual residual(const LcpProblem& p, const Vector& z) {
  if (z.size() != p.dim()) throw ShapeMismatch("residual: z has wrong length");
  if (z.size() == 0) return {};
  const Vector w = p.M * z + p.q;
  LcpResidual r;
  r.complementarity = std::abs(z.dot(w));
  r.feasibility = std::max({0.0, -z.minCoeff(), -w.minCoeff()});
  return r;
}

struct LcpSolution {
  Vector z;
  Vector w;
  double complementarity_residual = 0.0;
  double feasibility_residual = 0.0;
  int pivots = 0;
};

/// Acceptance thresholds for a computed solution.
inline double complementarity_threshold(const LcpProblem& p) {
  return 1e-8 * (1.0 + max_abs(p.q));
}
inline constexpr double kFeasibilityThreshold = 1e-9;

inline LcpSolution make_solution(const LcpProblem& p, Vector z, int pivots) {
  LcpSolution s;
  s.w = p.M * z + p.q;
  s.z = std::move(z);
  const auto r = residual(p, s.z);
  s.complementarity_residual = r.complementarity;
  s.feasibility_residual = r.feasibility;
  s.pivots = pivots;
  return s;
}

inline bool accepted(const LcpProblem& p, const LcpSolution& s) {
  return s.complementarity_residual <= complementarity_threshold(p) &&
         s.feasibility_residual <= kFeasibilityThreshold;
}

/// Secondary-ray termination. Along z + t*ray (with artificial level
/// z0 + t*ray_z0) the almost-complementary path is unbounded.
struct LcpInfeasible {
  Vector z;
  double z0 = 0.0;
  Vector ray;
  double ray_z0 = 0.0;
  int pivots = 0;
};

using LemkeResult = std::variant<LcpSolution, LcpInfeasible>;

class PivotBreakdown : public Error {
 public:
  using Error::Error;
};

class MaxPivotsExceeded : public Error {
 public:
  using Error::Error;
};

class DimTooLarge : public Error {
 public:
  using Error::Error;
};

struct LemkeOptions {
  int max_pivots = 0;       // 0 selects 50 * dim
  double pivot_tol = 1e-10;
  Vector covering;          // empty selects all ones
};

namespace detail {

// Dense tableau  w - M z - d z0 = q.  Column layout:
//   [0, n)      w
//   [n, 2n)     z
//   2n          z0
//   2n + 1      right-hand side
class LemkeTableau {
 public:
  LemkeTableau(const LcpProblem& p, const Vector& cover) : n_(p.dim()) {
    T_ = Matrix::Zero(n_, 2 * n_ + 2);
    T_.leftCols(n_).setIdentity();
    T_.middleCols(n_, n_) = -p.M;
    T_.col(2 * n_) = -cover;
    T_.col(2 * n_ + 1) = p.q;
    basis_.resize(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i) basis_[static_cast<std::size_t>(i)] = i;
  }

  Eigen::Index artificial() const { return 2 * n_; }
  Eigen::Index rhs() const { return 2 * n_ + 1; }
  Eigen::Index complement(Eigen::Index var) const { return var < n_ ? var + n_ : var - n_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  const Matrix& table() const { return T_; }

  Eigen::Index pivot(Eigen::Index row, Eigen::Index col) {
    T_.row(row) /= T_(row, col);
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    const Eigen::Index leaving = basis_[static_cast<std::size_t>(row)];
    basis_[static_cast<std::size_t>(row)] = col;
    return leaving;
  }

  /// Lexicographic minimum-ratio row for the entering column, or -1 if the
  /// column has no positive entry (ray).
  Eigen::Index ratio_test(Eigen::Index col, double pivot_tol) const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n_; ++i)
      if (T_(i, col) > pivot_tol) rows.push_back(i);
    if (rows.empty()) return -1;

    auto tied = [](double a, double b) {
      return std::abs(a - b) <= 1e-11 * (1.0 + std::max(std::abs(a), std::abs(b)));
    };

    // First key is the right-hand side; the artificial variable leaves
    // whenever it is among the minimisers.
    std::vector<Eigen::Index> cand = rows;
    auto narrow = [&](Eigen::Index key) {
      double best = std::numeric_limits<double>::infinity();
      for (auto i : cand) best = std::min(best, T_(i, key) / T_(i, col));
      std::vector<Eigen::Index> next;
      for (auto i : cand)
        if (tied(T_(i, key) / T_(i, col), best)) next.push_back(i);
      cand.swap(next);
    };

    narrow(rhs());
    for (auto i : cand)
      if (basis_[static_cast<std::size_t>(i)] == artificial()) return i;
    // Remaining keys are the columns of the basis inverse, i.e. the w block.
    for (Eigen::Index key = 0; key < n_ && cand.size() > 1; ++key) narrow(key);
    // Numerical ties that survive: smallest basic variable index (Bland).
    return *std::min_element(cand.begin(), cand.end(), [&](Eigen::Index a, Eigen::Index b) {
      return basis_[static_cast<std::size_t>(a)] < basis_[static_cast<std::size_t>(b)];
    });
  }

  Vector values() const {  // full (w, z, z0) vector
    Vector v = Vector::Zero(2 * n_ + 1);
    for (Eigen::Index i = 0; i < n_; ++i) v(basis_[static_cast<std::size_t>(i)]) = T_(i, rhs());
    return v;
  }

 private:
  Eigen::Index n_;
  Matrix T_;
  std::vector<Eigen::Index> basis_;
};

// Re-solves the terminal complementary basis against the original data to
// shed the round-off accumulated over the pivots.
inline std::optional<Vector> refine(const LcpProblem& p, const std::vector<Eigen::Index>& basis) {
  const Eigen::Index n = p.dim();
  Matrix B(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index var = basis[static_cast<std::size_t>(c)];
    if (var < n)
      B.col(c) = Vector::Unit(n, var);
    else
      B.col(c) = -p.M.col(var - n);
  }
  Eigen::FullPivLU<Matrix> lu(B);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector xb = lu.solve(p.q);
  Vector z = Vector::Zero(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index var = basis[static_cast<std::size_t>(c)];
    if (var >= n) z(var - n) = std::max(0.0, xb(c));
  }
  return z;
}

}  // namespace detail

/// Lemke's method. Returns a solution or a secondary-ray certificate.
inline LemkeResult lemke_solve(const LcpProblem& p, const LemkeOptions& opts = {}) {
  p.check();
  const Eigen::Index n = p.dim();
  if (n == 0 || p.q.minCoeff() >= 0.0) return make_solution(p, Vector::Zero(n), 0);

  const Vector cover = opts.covering.size() == 0 ? Vector::Ones(n) : opts.covering;
  if (cover.size() != n || cover.minCoeff() <= 0.0)
    throw ShapeMismatch("covering vector must be positive with the problem's length");
  const int max_pivots = opts.max_pivots > 0 ? opts.max_pivots : static_cast<int>(50 * n);

  detail::LemkeTableau tab(p, cover);

  // z0 enters at the level that makes the most violated row feasible.
  Eigen::Index row = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double level = -p.q(i) / cover(i);
    if (level > worst) {
      worst = level;
      row = i;
    }
  }
  Eigen::Index leaving = tab.pivot(row, tab.artificial());
  int pivots = 1;

  while (leaving != tab.artificial()) {
    if (pivots >= max_pivots)
      throw MaxPivotsExceeded("Lemke: pivot limit " + std::to_string(max_pivots) + " reached");
    const Eigen::Index entering = tab.complement(leaving);
    row = tab.ratio_test(entering, opts.pivot_tol);
    if (row < 0) {
      const Vector vals = tab.values();
      LcpInfeasible ray;
      ray.z = vals.segment(n, n);
      ray.z0 = vals(2 * n);
      ray.ray = Vector::Zero(n);
      // Increasing the entering variable by t moves basic variable b by
      // -T(i, entering) * t.
      Vector dir = Vector::Zero(2 * n + 1);
      dir(entering) = 1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        dir(tab.basis()[static_cast<std::size_t>(i)]) = -tab.table()(i, entering);
      ray.ray = dir.segment(n, n);
      ray.ray_z0 = dir(2 * n);
      ray.pivots = pivots;
      return ray;
    }
    leaving = tab.pivot(row, entering);
    ++pivots;
  }

  // Candidate from the tableau and from re-solving the basis; keep the better.
  const Vector vals = tab.values();
  Vector z_tab = vals.segment(n, n).cwiseMax(0.0);
  LcpSolution best = make_solution(p, z_tab, pivots);
  if (auto z_ref = detail::refine(p, tab.basis())) {
    LcpSolution refined = make_solution(p, *z_ref, pivots);
    const auto score = [](const LcpSolution& s) {
      return std::max(s.complementarity_residual, s.feasibility_residual);
    };
    if (score(refined) <= score(best)) best = std::move(refined);
  }
  if (!accepted(p, best))
    throw PivotBreakdown("Lemke: terminal basis fails residual checks (complementarity " +
                         std::to_string(best.complementarity_residual) + ", feasibility " +
                         std::to_string(best.feasibility_residual) + ")");
  return best;
}

struct Enumeration {
  std::vector<LcpSolution> solutions;  // distinct, sorted lexicographically by z
  bool degenerate = false;             // singular principal block or a degenerate basis seen
};

/// Tries all 2^d complementary bases. Intended as an oracle for small d.
inline Enumeration enumerate_solutions(const LcpProblem& p, int dim_cap = 20) {
  p.check();
  const Eigen::Index n = p.dim();
  if (n > dim_cap)
    throw DimTooLarge("enumeration limited to dimension " + std::to_string(dim_cap));
  constexpr double sign_tol = 1e-9;

  Enumeration out;
  std::vector<Vector> found;
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<Eigen::Index> idx;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    idx.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (std::uint64_t{1} << i)) idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(idx.size());

    Vector z = Vector::Zero(n);
    if (k > 0) {
      Matrix Mss(k, k);
      Vector qs(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        qs(a) = p.q(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < k; ++b)
          Mss(a, b) = p.M(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
      Eigen::FullPivLU<Matrix> lu(Mss);
      if (!lu.isInvertible()) {
        out.degenerate = true;
        continue;
      }
      const Vector zs = lu.solve(-qs);
      for (Eigen::Index a = 0; a < k; ++a) z(idx[static_cast<std::size_t>(a)]) = zs(a);
    }
    if (n > 0 && z.minCoeff() < -sign_tol) continue;
    const Vector w = p.M * z + p.q;
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i)
      if (!(mask & (std::uint64_t{1} << i)) && w(i) < -sign_tol) ok = false;
    if (!ok) continue;

    z = z.cwiseMax(0.0);
    const bool dup = std::any_of(found.begin(), found.end(), [&](const Vector& f) {
      return max_abs(Vector(f - z)) <= sign_tol * (1.0 + max_abs(z));
    });
    if (dup) {
      out.degenerate = true;  // same point from several bases
      continue;
    }
    found.push_back(z);
  }

  std::sort(found.begin(), found.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  });
  for (auto& z : found) out.solutions.push_back(make_solution(p, std::move(z), 0));
  return out;
}

}  // namespace fsn
