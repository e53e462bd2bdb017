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
#include "support/random_games.hpp"

using namespace fsn;

namespace {

// Hand-made scalar tape with prescribed closed loops and H gains.
std::pair<GameSpec, RecursionTape> scalar_tape(const std::vector<double>& acl,
                                               const std::vector<double>& h) {
  const int K = static_cast<int>(acl.size());
  auto spec = testkit::scalar_game();
  spec.dims.K = K;
  spec.stages.assign(static_cast<std::size_t>(K), spec.stages[0]);
  spec.stages.push_back(testkit::scalar_game().stages[1]);
  RecursionTape t;
  t.K = K;
  t.H.assign(static_cast<std::size_t>(K + 1), Matrix());
  for (int k = 0; k < K; ++k) {
    t.closed_loop.push_back(Matrix::Constant(1, 1, acl[k]));
    t.H[k + 1] = h[k] * Matrix::Identity(2, 2);
  }
  return {spec, t};
}

}  // namespace

TEST(Transitions, IdentityClosedLoop) {
  auto [spec, tape] = scalar_tape({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
  const auto tt = compute_transitions(spec, tape);
  for (int k = 0; k <= 3; ++k)
    for (int rho = 0; rho <= k; ++rho) EXPECT_EQ(tt.phi(rho, k)(0, 0), 1.0);
}

TEST(Transitions, ProductOfClosedLoops) {
  auto [spec, tape] = scalar_tape({0.5, 2.0}, {0.0, 0.0});
  const auto tt = compute_transitions(spec, tape);
  EXPECT_EQ(tt.phi(0, 2)(0, 0), 1.0);
  EXPECT_EQ(tt.phi(0, 1)(0, 0), 0.5);
  EXPECT_EQ(tt.phi(1, 2)(0, 0), 2.0);
}

TEST(Transitions, ZeroBackwardGain) {
  auto [spec, tape] = scalar_tape({0.5, 2.0, 3.0}, {0.0, 0.0, 0.0});
  const auto tt = compute_transitions(spec, tape);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(tt.varphi(k, k), Matrix::Identity(2, 2));
    for (int tau = k + 1; tau <= 3; ++tau) EXPECT_EQ(max_abs(tt.varphi(k, tau)), 0.0);
  }
}

TEST(Transitions, SemigroupProperty) {
  const auto spec = testkit::duopoly();
  const auto tape = backward_sweep(spec);
  const auto tt = compute_transitions(spec, tape);
  const int K = spec.dims.K;
  for (int k = 0; k <= K; ++k) {
    EXPECT_EQ(tt.phi(k, k), Matrix::Identity(4, 4));
    for (int rho = 0; rho < k; ++rho) {
      const Matrix rhs = tt.phi(rho + 1, k) * tape.closed_loop[rho];
      EXPECT_LE(max_abs(Matrix(tt.phi(rho, k) - rhs)), 1e-12 * (1.0 + max_abs(rhs)));
    }
  }
  for (int tau = 1; tau <= K; ++tau)
    for (int k = 1; k < tau; ++k) {
      const Matrix rhs = tape.H[k + 1] * tt.varphi(k + 1, tau);
      EXPECT_LE(max_abs(Matrix(tt.varphi(k, tau) - rhs)), 1e-12 * (1.0 + max_abs(rhs)));
    }
}

TEST(Assembly, DuopolyDimension) {
  const auto spec = testkit::duopoly();
  const auto g = assemble_global_lcp_detailed(spec, backward_sweep(spec), spec.x0);
  EXPECT_EQ(g.problem.dim(), 56);
  EXPECT_EQ(g.phi.Phi0.rows(), 56);
  EXPECT_EQ(g.phi.Phi0.cols(), 4);
  EXPECT_EQ(g.phi.Phi1.cols(), 8 * 14);
  EXPECT_EQ(g.phi.Phi2.cols(), 2 * 14);
  EXPECT_EQ(g.phi.Phi3.cols(), 2 * 14);
}

TEST(Assembly, NoStateCouplingDecouples) {
  testkit::Rng rng(41);
  for (int t = 0; t < 50; ++t) {
    auto spec = testkit::random_small_game(rng, rng.integer(1, 2), rng.integer(1, 3));
    for (auto& st : spec.stages)
      for (int i = 0; i < 2; ++i) {
        st.L[i].setZero();
        st.M[i].setZero();
      }
    const auto g = assemble_global_lcp_detailed(spec, backward_sweep(spec), spec.x0);
    const auto& a = g.agg;
    const Eigen::Index sK = a.D.rows(), cK = a.N.rows();
    const auto& M = g.problem.M;
    EXPECT_EQ(Matrix(M.topLeftCorner(sK, sK)), a.D);
    EXPECT_EQ(Matrix(M.topRightCorner(sK, cK)), Matrix(-a.Nbar.transpose()));
    EXPECT_EQ(Matrix(M.bottomLeftCorner(cK, sK)), a.N);
    EXPECT_EQ(max_abs(Matrix(M.bottomRightCorner(cK, cK))), 0.0);
    EXPECT_EQ(g.problem.q, stack({a.d, a.r}));

    // Its solution is the list of stage solutions.
    const auto res = lemke_solve(g.problem);
    ASSERT_TRUE(std::holds_alternative<LcpSolution>(res));
    const auto params = unpack_parameters(spec.dims, std::get<LcpSolution>(res).z);
    for (int k = 1; k <= spec.dims.K; ++k) {
      const auto st = solve_stage_game(spec, k, spec.x0);
      EXPECT_LE(max_abs(Vector(st.v - params.w[k])), 1e-9) << "trial " << t;
      EXPECT_LE(max_abs(Vector(st.mu - params.theta[k])), 1e-9) << "trial " << t;
    }
  }
}

TEST(Assembly, HomogeneousOffsets) {
  testkit::Rng rng(42);
  auto spec = testkit::random_small_game(rng, 2, 3);
  spec.x0.setZero();
  for (auto& st : spec.stages) st.p = {Vector::Zero(2), Vector::Zero(2)};
  const auto g = assemble_global_lcp_detailed(spec, backward_sweep(spec), spec.x0);
  EXPECT_EQ(g.problem.q, stack({g.agg.d, g.agg.r}));
}

TEST(Assembly, TrajectoryIdentity) {
  testkit::Rng rng(43);
  for (int t = 0; t < 40; ++t) {
    const auto spec = t == 0 ? testkit::duopoly()
                             : testkit::random_small_game(rng, rng.integer(1, 3), rng.integer(1, 4));
    const auto& dims = spec.dims;
    const auto tape = backward_sweep(spec);
    const auto g = assemble_global_lcp_detailed(spec, tape, spec.x0);
    auto params = ParameterStack::zeros(dims);
    for (int k = 1; k <= dims.K; ++k) {
      params.w[k] = rng.uniform_vec(dims.s(), -2.0, 2.0);
      params.theta[k] = rng.uniform_vec(dims.c(), 0.0, 2.0);
    }
    const auto parts = eval_affine_parts(spec, tape, params);
    const auto traj = simulate(spec, tape, parts, spec.x0);
    const Vector z = pack_parameters(dims, params);
    const Eigen::Index sK = dims.s() * dims.K;
    const Vector predicted = g.phi.Phi0 * spec.x0 + g.phi.Phi1 * g.agg.p +
                             g.phi.Phi2 * z.head(sK) + g.phi.Phi3 * z.tail(z.size() - sK);
    const Vector realised = stack(std::vector<Vector>(traj.x.begin() + 1, traj.x.end()));
    EXPECT_LE(max_abs(Vector(predicted - realised)), 1e-9 * (1.0 + max_abs(spec.x0)))
        << "trial " << t;
  }
}

TEST(Assembly, GlobalSolutionSolvesStageProblems) {
  testkit::Rng rng(44);
  int solved = 0;
  for (int t = 0; t < 30; ++t) {
    const auto spec = t == 0 ? testkit::duopoly() : testkit::random_small_game(rng, 2, 2);
    const auto tape = backward_sweep(spec);
    const auto lcp = assemble_global_lcp(spec, tape, spec.x0);
    const auto res = lemke_solve(lcp);
    if (!std::holds_alternative<LcpSolution>(res)) continue;
    ++solved;
    const auto params = unpack_parameters(spec.dims, std::get<LcpSolution>(res).z);
    const auto parts = eval_affine_parts(spec, tape, params);
    const auto traj = simulate(spec, tape, parts, spec.x0);
    for (int k = 1; k <= spec.dims.K; ++k) {
      const auto st = solve_stage_game(spec, k, traj.x[k]);
      EXPECT_LE(max_abs(Vector(st.v - params.w[k])), 1e-7) << "trial " << t << " k " << k;
      EXPECT_LE(max_abs(Vector(st.mu - params.theta[k])), 1e-7) << "trial " << t << " k " << k;
    }
  }
  EXPECT_GE(solved, 25);
}

TEST(Assembly, PackUnpackRoundTrip) {
  const auto dims = testkit::duopoly().dims;
  testkit::Rng rng(45);
  const Vector z = rng.uniform_vec(56, -1.0, 1.0);
  const auto params = unpack_parameters(dims, z);
  EXPECT_EQ(params.w[0], Vector::Zero(2));
  EXPECT_EQ(params.w[3], z.segment(4, 2));
  EXPECT_EQ(params.theta[1], z.segment(28, 2));
  EXPECT_EQ(pack_parameters(dims, params), z);
  EXPECT_THROW(unpack_parameters(dims, Vector::Zero(55)), ShapeMismatch);
}
