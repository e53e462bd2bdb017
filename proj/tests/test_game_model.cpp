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

#include <gtest/gtest.h>

#include "support/games.hpp"

using namespace fsn;

namespace {

const ValidationCheck* failed(const ValidationReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name && !c.passed) return &c;
  return nullptr;
}

}  // namespace

TEST(GameModel, DuopolyPassesAllChecks) {
  const auto spec = testkit::duopoly();
  const auto rep = validate(spec);
  EXPECT_TRUE(rep.ok());
  const auto& d = spec.dims;
  EXPECT_EQ(d.n, 4);
  EXPECT_EQ(d.m1, 2);
  EXPECT_EQ(d.m2, 2);
  EXPECT_EQ(d.s1, 1);
  EXPECT_EQ(d.c1, 1);
  EXPECT_EQ(d.K, 14);
  EXPECT_EQ(spec.stages.size(), 15u);
}

TEST(GameModel, ZeroSimultaneousCostIsRejectedAtStageZero) {
  auto spec = testkit::capacity_game();
  for (auto& st : spec.stages) st.D = {Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const auto rep = validate(spec);
  ASSERT_FALSE(rep.ok());
  const auto* bad = rep.first_failure();
  EXPECT_EQ(bad->name, "pd_D");
  EXPECT_EQ(bad->stage, 0);
  try {
    ensure_valid(spec);
    FAIL() << "expected AssumptionViolated";
  } catch (const AssumptionViolated& e) {
    EXPECT_EQ(e.check(), "pd_D");
    EXPECT_EQ(e.stage(), 0);
  }
}

TEST(GameModel, ZeroOwnConstraintRowIsRejected) {
  auto spec = testkit::capacity_game();
  spec.stages[1].N[0].setZero();
  const auto rep = validate(spec);
  const auto* bad = failed(rep, "rank_N");
  ASSERT_NE(bad, nullptr);
  EXPECT_EQ(bad->stage, 1);
  EXPECT_THROW(ensure_valid(spec), AssumptionViolated);
}

TEST(GameModel, MoreOwnConstraintsThanDecisionsFailRank) {
  Dimensions d;
  d.n = 1;
  d.s1 = d.s2 = 1;
  d.c1 = 2;
  d.c2 = 1;
  d.K = 1;
  auto st = StageData::zeros(d, false);
  st.D[0](0, 0) = 1.0;
  st.D[1](1, 1) = 1.0;
  st.N[0] << -1.0, 0.0, -2.0, 0.0;
  st.N[1] << 0.0, -1.0;
  const auto spec = GameSpec::time_invariant(d, st, Vector::Zero(1));
  EXPECT_NE(failed(validate(spec), "rank_N"), nullptr);
}

TEST(GameModel, ShapeErrors) {
  auto spec = testkit::capacity_game();
  spec.stages[0].A = Matrix::Zero(2, 2);
  EXPECT_THROW(check_shapes(spec), ShapeMismatch);

  spec = testkit::capacity_game();
  spec.stages.back().A = Matrix::Identity(1, 1);
  EXPECT_THROW(check_shapes(spec), ShapeMismatch);

  spec = testkit::capacity_game();
  spec.stages.pop_back();
  EXPECT_THROW(validate(spec), ShapeMismatch);

  spec = testkit::capacity_game();
  spec.x0 = Vector::Zero(3);
  EXPECT_THROW(check_shapes(spec), ShapeMismatch);
}

TEST(GameModel, SymmetryAndFiniteness) {
  auto spec = testkit::capacity_game();
  spec.stages[0].Q[0] = Matrix::Constant(1, 1, 1.0);
  EXPECT_TRUE(validate(spec).ok());

  Dimensions d = spec.dims;
  d.n = 2;
  auto two = StageData::zeros(d, false);
  two.Q[0] << 1.0, 0.5, 0.5 + 1e-6, 1.0;
  EXPECT_GT(asymmetry(two.Q[0]), kSymmetryTol);

  spec = testkit::capacity_game();
  spec.stages[1].d[1](0) = std::numeric_limits<double>::quiet_NaN();
  const auto rep = validate(spec);
  const auto* bad = failed(rep, "finite");
  ASSERT_NE(bad, nullptr);
  EXPECT_EQ(bad->stage, 1);
}

TEST(GameModel, AsymmetricStateCostFailsSymmetryCheck) {
  Dimensions d;
  d.n = 2;
  d.s1 = d.s2 = 1;
  d.K = 1;
  auto st = StageData::zeros(d, false);
  st.D[0](0, 0) = 1.0;
  st.D[1](1, 1) = 1.0;
  auto spec = GameSpec::time_invariant(d, st, Vector::Zero(2));
  EXPECT_TRUE(validate(spec).ok());
  spec.stages[0].Q[1](0, 1) += 1e-6;
  const auto* bad = failed(validate(spec), "symmetry");
  ASSERT_NE(bad, nullptr);
  EXPECT_EQ(bad->stage, 0);
}

TEST(GameModel, SymmetrizeToleratesRoundOffOnly) {
  Matrix q(2, 2);
  q << 1.0, 0.5, 0.5 + 1e-11, 2.0;
  symmetrize_or_reject(q, "Q1", 0);
  EXPECT_EQ(asymmetry(q), 0.0);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.5 + 0.5e-11);

  Matrix bad(2, 2);
  bad << 1.0, 0.5, 0.6, 2.0;
  EXPECT_THROW(symmetrize_or_reject(bad, "Q1", 3), AssumptionViolated);
}

TEST(GameModel, ValidateIsPure) {
  const auto spec = testkit::duopoly();
  const auto a = validate(spec), b = validate(spec);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].name, b.checks[i].name);
    EXPECT_EQ(a.checks[i].stage, b.checks[i].stage);
    EXPECT_EQ(a.checks[i].passed, b.checks[i].passed);
    EXPECT_EQ(a.checks[i].value, b.checks[i].value);
  }
}

TEST(GameModel, FoldDiscountScalesCostsOnly) {
  auto spec = testkit::capacity_game(3);
  for (auto& st : spec.stages) st.Q[0](0, 0) = 1.0;

  const auto same = fold_discount(spec, 1.0);
  for (int k = 0; k <= 3; ++k) {
    EXPECT_EQ(same.stages[k].Q[0], spec.stages[k].Q[0]);
    EXPECT_EQ(same.stages[k].D[1], spec.stages[k].D[1]);
  }

  const auto folded = fold_discount(spec, 0.9);
  EXPECT_NEAR(folded.stages[2].Q[0](0, 0), 0.81, 1e-15);
  EXPECT_NEAR(folded.stages[3].Q[0](0, 0), 0.729, 1e-15);
  EXPECT_NEAR(folded.stages[2].R[0][0](0, 0), 0.81, 1e-15);
  EXPECT_NEAR(folded.stages[2].d[0](0), -3.0 * 0.81, 1e-14);
  EXPECT_EQ(folded.stages[2].A, spec.stages[2].A);
  EXPECT_EQ(folded.stages[2].B[1], spec.stages[2].B[1]);
  EXPECT_EQ(folded.stages[2].M[0], spec.stages[2].M[0]);
  EXPECT_EQ(folded.stages[2].N[1], spec.stages[2].N[1]);
  EXPECT_EQ(folded.stages[2].r[0], spec.stages[2].r[0]);

  EXPECT_THROW(fold_discount(spec, 0.0), std::invalid_argument);
  EXPECT_THROW(fold_discount(spec, 1.5), std::invalid_argument);
}

TEST(GameModel, FoldDiscountComposes) {
  const auto spec = testkit::duopoly();
  const auto ab = fold_discount(fold_discount(spec, 0.7), 0.95);
  const auto direct = fold_discount(spec, 0.7 * 0.95);
  for (int k = 0; k <= spec.dims.K; ++k)
    for (int i = 0; i < 2; ++i) {
      EXPECT_LE(max_abs(Matrix(ab.stages[k].D[i] - direct.stages[k].D[i])), 1e-14);
      EXPECT_LE(max_abs(Matrix(ab.stages[k].L[i] - direct.stages[k].L[i])), 1e-14);
      EXPECT_LE(max_abs(Vector(ab.stages[k].d[i] - direct.stages[k].d[i])), 1e-14);
      EXPECT_LE(max_abs(Matrix(ab.stages[k].Q[i] - direct.stages[k].Q[i])), 1e-14);
    }
  EXPECT_TRUE(validate(ab).ok());
}

TEST(GameModel, TruncateAndTimeInvariant) {
  const auto spec = testkit::capacity_game(4);
  EXPECT_EQ(spec.stages.size(), 5u);
  EXPECT_FALSE(spec.stages[3].terminal);
  EXPECT_TRUE(spec.stages[4].terminal);
  EXPECT_EQ(spec.stages[4].A.size(), 0);

  const auto sub = truncate(spec, 2, Vector::Constant(1, 0.3));
  EXPECT_EQ(sub.dims.K, 2);
  EXPECT_EQ(sub.stages.size(), 3u);
  EXPECT_EQ(sub.x0(0), 0.3);
  EXPECT_EQ(sub.stages[0].D[0], spec.stages[2].D[0]);
  EXPECT_TRUE(validate(sub).ok());
  EXPECT_THROW(truncate(spec, 4, sub.x0), IndexOutOfRange);
  EXPECT_THROW(spec.stage(5), IndexOutOfRange);
}

TEST(GameModel, StageCostMatchesHandComputation) {
  const auto spec = testkit::capacity_game();
  const auto& st = spec.stages[0];
  const Vector x = Vector::Constant(1, 2.0);
  const PerPlayer<Vector> u{Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  Vector v(2);
  v << 1.0, 0.5;
  // 1/2 u1^2 + 1/2 (2 v1^2 + v1 v2) - 0.2 x v1 - 3 v1
  EXPECT_NEAR(stage_cost(st, 0, x, u, v), 0.5 + 0.5 * (2.0 + 1.0 * 0.5) - 0.4 - 3.0, 1e-15);
}
