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

// Two-firm Cournot game with R&D spillovers and capacity limits.
//
// State (X1, X2, Y1, Y2): knowledge stocks and capacities. Firm i invests
// u^i = (R^i, I^i) in research and capacity (sequential layer, firm 1
// leads) and then both choose outputs v^i simultaneously, capped by Y^i.
// Price is Abar_k - Bbar_k (v1 + v2); unit cost falls with own knowledge.

#pragma once

#include <cmath>
#include <cstdio>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fsn/fsn_solver.hpp"

namespace fsn {

struct DuopolyParams {
  int K = 14;
  double A0 = 3.5;
  double B0 = 0.5;
  double eps = 0.015;
  double beta = 0.9;
  PerPlayer<double> lambda{0.1, 0.1};  // spillover of the rival's research
  PerPlayer<double> mu{0.8, 0.8};      // knowledge retention
  PerPlayer<double> delta{0.85, 0.85}; // capacity retention
  PerPlayer<double> gamma{0.2, 0.2};   // cost reduction per unit of knowledge
  PerPlayer<double> a{1.0, 1.0};       // research cost weight
  PerPlayer<double> b{1.0, 1.0};       // capacity investment cost weight
  PerPlayer<double> c{0.5, 0.5};       // base unit cost
  PerPlayer<double> alphaX{-0.2, -0.2};
  PerPlayer<double> alphaY{-0.25, -0.25};
  PerPlayer<double> X0{5.0, 5.0};
  PerPlayer<double> Y0{4.0, 4.0};

  double demand_intercept(int k) const { return A0 * std::pow(1.0 + eps, k); }
  double demand_slope(int k) const { return B0 / std::pow(1.0 + eps, k); }

  void check() const {
    if (K < 1) throw std::invalid_argument("horizon must be at least 1");
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
    if (!(B0 > 0.0)) throw std::invalid_argument("demand slope must be positive");
    for (int i = 0; i < 2; ++i) {
      if (!(lambda[i] >= 0.0 && lambda[i] < 1.0))
        throw std::invalid_argument("spillover must lie in [0, 1)");
      if (!(mu[i] > 0.0 && mu[i] < 1.0) || !(delta[i] > 0.0 && delta[i] < 1.0))
        throw std::invalid_argument("retention rates must lie in (0, 1)");
    }
  }
};

inline Dimensions duopoly_dimensions(int K) {
  Dimensions d;
  d.n = 4;
  d.m1 = d.m2 = 2;
  d.s1 = d.s2 = 1;
  d.c1 = d.c2 = 1;
  d.K = K;
  return d;
}

inline GameSpec build_duopoly_spec(const DuopolyParams& prm) {
  prm.check();
  const auto dims = duopoly_dimensions(prm.K);
  constexpr int X[2] = {0, 1}, Y[2] = {2, 3};

  GameSpec spec;
  spec.dims = dims;
  spec.x0 = Vector(4);
  spec.x0 << prm.X0[0], prm.X0[1], prm.Y0[0], prm.Y0[1];

  for (int k = 0; k <= prm.K; ++k) {
    const bool terminal = k == prm.K;
    auto st = StageData::zeros(dims, terminal);
    const double Ab = prm.demand_intercept(k), Bb = prm.demand_slope(k);

    if (!terminal) {
      st.A.diagonal() << prm.mu[0], prm.mu[1], prm.delta[0], prm.delta[1];
      for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        st.B[i](X[i], 0) = 1.0;           // own research
        st.B[i](X[j], 0) = prm.lambda[j]; // spills over to the rival
        st.B[i](Y[i], 1) = 1.0;           // own capacity investment
        st.R[i][i].diagonal() << prm.a[i], prm.b[i];
      }
    }
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      // -P v^i = -Ab v^i + Bb (v^i)^2 + Bb v^i v^j
      st.D[i](i, i) = 2.0 * Bb;
      st.D[i](i, j) = Bb;
      st.D[i](j, i) = Bb;
      st.L[i](X[i], i) = -prm.gamma[i];
      st.d[i](i) = prm.c[i] - Ab;
      st.M[i](0, Y[i]) = 1.0;
      st.N[i](0, i) = -1.0;
      if (terminal) {
        st.Q[i](X[i], X[i]) = prm.alphaX[i];
        st.Q[i](Y[i], Y[i]) = prm.alphaY[i];
      }
    }
    spec.stages.push_back(std::move(st));
  }
  return fold_discount(spec, prm.beta);
}

struct SweepRow {
  double lambda = 0.0;
  double J1 = std::nan("");
  double J2 = std::nan("");
  std::string status;  // ok | verification_failed | no_equilibrium | error
  std::string message;
  std::optional<FsnOutcome> outcome;
};

inline SweepRow solve_duopoly_row(DuopolyParams prm, double lambda, const SolveOptions& opts) {
  SweepRow row;
  row.lambda = lambda;
  try {
    prm.lambda = {lambda, lambda};
    auto out = solve_fsn(build_duopoly_spec(prm), opts);
    row.J1 = out.J[0];
    row.J2 = out.J[1];
    row.status = !opts.verify_outcome || out.report.passed() ? "ok" : "verification_failed";
    if (const auto* bad = out.report.first_failure()) row.message = bad->name;
    row.outcome = std::move(out);
  } catch (const NoEquilibrium& e) {
    row.status = "no_equilibrium";
    row.message = e.what();
  } catch (const std::exception& e) {
    row.status = "error";
    row.message = e.what();
  }
  return row;
}

/// Symmetric-spillover sweep; rows are solved concurrently.
inline std::vector<SweepRow> table2_sweep(const std::vector<double>& lambdas,
                                          const DuopolyParams& base = {},
                                          const SolveOptions& opts = {}) {
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(lambdas.size());
  for (double l : lambdas)
    jobs.push_back(std::async(std::launch::async, solve_duopoly_row, base, l, opts));
  std::vector<SweepRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

inline std::string fixed6(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "lambda,J1,J2,status\n";
  for (const auto& r : rows)
    os << fixed6(r.lambda) << ',' << fixed6(r.J1) << ',' << fixed6(r.J2) << ',' << r.status << '\n';
  return os.str();
}

// Per-panel time series of one duopoly run.

inline std::string capacity_output_csv(const FsnOutcome& o) {
  std::ostringstream os;
  os << "k,Y1,Y2,v1,v2,slack1,slack2,mu1,mu2\n";
  for (std::size_t k = 0; k < o.x.size(); ++k) {
    const auto& x = o.x[k];
    const auto& v = o.v_star[k];
    os << k << ',' << fixed6(x(2)) << ',' << fixed6(x(3)) << ',' << fixed6(v(0)) << ','
       << fixed6(v(1)) << ',' << fixed6(x(2) - v(0)) << ',' << fixed6(x(3) - v(1)) << ','
       << fixed6(o.mu_star[k](0)) << ',' << fixed6(o.mu_star[k](1)) << '\n';
  }
  return os.str();
}

inline std::string knowledge_csv(const FsnOutcome& o) {
  std::ostringstream os;
  os << "k,X1,X2\n";
  for (std::size_t k = 0; k < o.x.size(); ++k)
    os << k << ',' << fixed6(o.x[k](0)) << ',' << fixed6(o.x[k](1)) << '\n';
  return os.str();
}

inline std::string investment_csv(const FsnOutcome& o) {
  std::ostringstream os;
  os << "k,R1,R2,I1,I2\n";
  for (std::size_t k = 0; k < o.u.size(); ++k)
    os << k << ',' << fixed6(o.u[k][0](0)) << ',' << fixed6(o.u[k][1](0)) << ','
       << fixed6(o.u[k][0](1)) << ',' << fixed6(o.u[k][1](1)) << '\n';
  return os.str();
}

}  // namespace fsn
