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

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Player 1 (index 0) leads the sequential layer; player 2 (index 1) follows.
inline constexpr int kLeader = 0;
inline constexpr int kFollower = 1;

template <class T>
using PerPlayer = std::array<T, 2>;

// ---------------------------------------------------------------------------
// Errors. Everything the library throws derives from fsn::Error so callers
// (the CLI in particular) can map failures onto exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix dimensions or malformed input documents.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// One of the solver's sufficient conditions fails on the given data.
class AssumptionViolated : public Error {
 public:
  AssumptionViolated(std::string check, int stage, const std::string& detail)
      : Error("assumption violated: " + check + " at stage " +
              std::to_string(stage) + (detail.empty() ? "" : ": " + detail)),
        check_(std::move(check)),
        stage_(stage) {}

  const std::string& check() const { return check_; }
  int stage() const { return stage_; }

 private:
  std::string check_;
  int stage_;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small dense helpers shared by the modules.
// ---------------------------------------------------------------------------

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline double asymmetry(const Matrix& m) {
  return max_abs(Matrix(m - m.transpose()));
}

inline bool all_finite(const Matrix& m) {
  return m.size() == 0 || m.allFinite();
}

/// Block-diagonal concatenation (direct sum) of a list of matrices.
inline Matrix direct_sum(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

/// Vertical concatenation of vectors.
inline Vector stack(const std::vector<Vector>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

}  // namespace fsn
