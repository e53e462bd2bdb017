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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "fsn/fsn.hpp"
#include "support/random_games.hpp"

using namespace fsn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  int id;
  std::string title;
  bool passed = true;
  std::string detail;
};

// Every solved outcome is collected here for the verification criterion.
struct Verified {
  std::string label;
  VerificationReport report;
};
std::vector<Verified> g_solved;

void record(const std::string& label, const FsnOutcome& o) { g_solved.push_back({label, o.report}); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Reference {
  double lambda, J1, J2;
};
constexpr Reference kTable[] = {
    {0.10, -35.2466, -31.4820},  {0.15, -36.5904, -35.8300}, {0.20, -40.4875, -39.8770},
    {0.25, -46.3442, -45.9252},  {0.30, -56.1883, -56.2889}, {0.35, -76.2580, -77.9906},
    {0.40, -135.0391, -143.6161},
};

std::vector<SweepRow> g_rows;

Criterion cost_table() {
  Criterion c{1, "cost table reproduction (7 spillover rows, 1% relative)"};
  std::vector<double> lambdas;
  for (const auto& r : kTable) lambdas.push_back(r.lambda);
  const auto t0 = Clock::now();
  g_rows = table2_sweep(lambdas);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (std::size_t i = 0; i < g_rows.size(); ++i) {
    const auto& row = g_rows[i];
    if (row.outcome) record("duopoly lambda=" + fixed6(row.lambda), *row.outcome);
    if (row.status != "ok" && row.status != "verification_failed") {
      c.passed = false;
      c.detail += " lambda " + fixed6(row.lambda) + " " + row.status + ";";
      continue;
    }
    const double e1 = std::abs(row.J1 - kTable[i].J1) / std::abs(kTable[i].J1);
    const double e2 = std::abs(row.J2 - kTable[i].J2) / std::abs(kTable[i].J2);
    worst = std::max({worst, e1, e2});
  }
  if (worst > 0.01) c.passed = false;
  if (elapsed >= 5.0) c.passed = false;
  c.detail += " worst relative error " + fmt("%.2e", worst) + ", sweep time " + fmt("%.2f s", elapsed) +
              " (limit 5 s)";
  return c;
}

Criterion active_window() {
  Criterion c{2, "capacity constraints active exactly for periods 4..13 (lambda 0.10)"};
  if (g_rows.empty() || !g_rows.front().outcome) {
    c.passed = false;
    c.detail = " no outcome for lambda 0.10";
    return c;
  }
  const auto& o = *g_rows.front().outcome;
  std::string active[2];
  for (std::size_t k = 0; k < o.x.size(); ++k)
    for (int i = 0; i < 2; ++i) {
      const double slack = o.x[k](2 + i) - o.v_star[k](i);
      const bool on = slack <= 1e-6 && o.mu_star[k](i) > 0.0;
      const bool want = k >= 4 && k <= 13;
      if (on) active[i] += std::to_string(k) + " ";
      if (on != want) c.passed = false;
      if (!want && slack <= 1e-3) c.passed = false;
    }
  c.detail = " firm 1 active at { " + active[0] + "}, firm 2 at { " + active[1] + "}";
  return c;
}

struct OracleStats {
  int instances = 0, compared = 0, no_equilibrium_both = 0, mismatched = 0;
  double worst_u = 0.0, worst_J = 0.0, seconds = 0.0;
};

Criterion oracle_equivalence() {
  Criterion c{4, "grid oracle vs solver on 100 random small games (u within 2e-3, J within 1e-3)"};
  testkit::Rng rng(20261017);
  OracleStats s;
  const auto t0 = Clock::now();
  for (int t = 0; t < 100; ++t) {
    const auto spec = testkit::random_small_game(rng, rng.integer(1, 2), rng.integer(1, 2));
    ++s.instances;
    FsnOutcome out;
    bool solved = true;
    try {
      out = solve_fsn(spec);
    } catch (const NoEquilibrium&) {
      solved = false;
    } catch (const StageInfeasible&) {
      solved = false;
    }
    OracleOutcome ref;
    bool ref_ok = true;
    try {
      ref = brute_force_fsn(spec);
    } catch (const Error&) {
      ref_ok = false;
    }
    if (!solved || !ref_ok) {
      if (solved == ref_ok) {
        ++s.no_equilibrium_both;
      } else {
        ++s.mismatched;
        c.passed = false;
      }
      continue;
    }
    record("oracle instance " + std::to_string(t), out);
    ++s.compared;
    for (int i = 0; i < 2; ++i) {
      s.worst_u = std::max(s.worst_u, std::abs(ref.u0_grid[i](0) - out.u[0][i](0)));
      s.worst_J = std::max(s.worst_J, std::abs(ref.J[i] - out.J[i]));
    }
  }
  s.seconds = seconds_since(t0);
  if (s.worst_u > 2e-3 || s.worst_J > 1e-3 || s.seconds >= 120.0) c.passed = false;
  c.detail = " compared " + std::to_string(s.compared) + "/" + std::to_string(s.instances) +
             ", both infeasible " + std::to_string(s.no_equilibrium_both) + ", disagreements on "
             "feasibility " + std::to_string(s.mismatched) + ", worst |du| " +
             fmt("%.2e", s.worst_u) + ", worst |dJ| " + fmt("%.2e", s.worst_J) + ", " +
             fmt("%.1f s", s.seconds) + " (limit 120 s)";
  return c;
}

Criterion lcp_cross_check() {
  Criterion c{5, "Lemke vs basis enumeration on 500 random monotone LCPs (1e-8, unique)"};
  testkit::Rng rng(5005);
  double worst = 0.0;
  int not_unique = 0, rays = 0;
  for (int t = 0; t < 500; ++t) {
    const auto p = testkit::random_monotone_lcp(rng, rng.integer(1, 10));
    const auto all = enumerate_solutions(p);
    const auto res = lemke_solve(p);
    if (all.solutions.size() != 1) ++not_unique;
    if (!std::holds_alternative<LcpSolution>(res)) {
      ++rays;
      continue;
    }
    if (all.solutions.empty()) continue;
    worst = std::max(worst, max_abs(Vector(std::get<LcpSolution>(res).z - all.solutions[0].z)));
  }
  c.passed = worst <= 1e-8 && not_unique == 0 && rays == 0;
  c.detail = " worst |dz| " + fmt("%.2e", worst) + ", non-unique " + std::to_string(not_unique) +
             ", Lemke rays " + std::to_string(rays);
  return c;
}

Criterion time_consistency() {
  Criterion c{6, "truncated subgames reproduce gains (duopoly + 20 random games, 1e-9)"};
  testkit::Rng rng(6006);
  std::vector<std::pair<std::string, GameSpec>> specs{{"duopoly", build_duopoly_spec({})}};
  for (int t = 0; t < 20; ++t)
    specs.push_back({"random " + std::to_string(t),
                     testkit::random_small_game(rng, rng.integer(1, 3), rng.integer(2, 4))});
  double worst = 0.0;
  int games = 0, skipped = 0;
  for (const auto& [label, spec] : specs) {
    FsnOutcome full;
    try {
      full = solve_fsn(spec);
    } catch (const NoEquilibrium&) {
      ++skipped;
      continue;
    } catch (const StageInfeasible&) {
      ++skipped;
      continue;
    }
    ++games;
    record(label, full);
    for (int k = 1; k < spec.dims.K; ++k) {
      const auto sub = solve_fsn(truncate(spec, k, full.x[k]));
      record(label + " from stage " + std::to_string(k), sub);
      for (int j = 0; j + k < spec.dims.K; ++j)
        for (int i = 0; i < 2; ++i) {
          worst = std::max(worst, max_abs(Matrix(sub.E[j][i] - full.E[j + k][i])));
          worst = std::max(worst, max_abs(Vector(sub.F[j][i] - full.F[j + k][i])));
        }
    }
  }
  c.passed = worst <= 1e-9 && skipped == 0;
  c.detail = " games " + std::to_string(games) + ", without equilibrium " +
             std::to_string(skipped) + ", worst gain difference " + fmt("%.2e", worst);
  return c;
}

Criterion verification_suite() {
  Criterion c{3, "verification suite passes on every solved instance"};
  int failed = 0, loose_mu = 0;
  std::string first;
  for (const auto& v : g_solved) {
    if (!v.report.degenerate_multiplier_stages.empty()) ++loose_mu;
    if (v.report.passed()) continue;
    ++failed;
    if (first.empty()) {
      const auto* bad = v.report.first_failure();
      first = " first: " + v.label + " " + bad->name + " value " + fmt("%.3e", bad->value) +
              " stage " + std::to_string(bad->stage);
    }
  }
  c.passed = failed == 0 && !g_solved.empty();
  c.detail = " instances " + std::to_string(g_solved.size()) + ", failing " +
             std::to_string(failed) + ", with non-unique stage multipliers " +
             std::to_string(loose_mu) + first;
  return c;
}

}  // namespace

// An escaped exception fails its own criterion instead of taking the others down.
Criterion guarded(int id, const char* title, Criterion (*run)()) {
  try {
    return run();
  } catch (const std::exception& e) {
    Criterion c{id, title};
    c.passed = false;
    c.detail = std::string(" aborted: ") + e.what();
    return c;
  }
}

int main() {
  std::vector<Criterion> results;
  results.push_back(guarded(1, "duopoly cost table", cost_table));
  results.push_back(guarded(2, "capacity active window", active_window));
  results.push_back(guarded(4, "grid oracle agreement", oracle_equivalence));
  results.push_back(guarded(5, "Lemke vs enumeration", lcp_cross_check));
  results.push_back(guarded(6, "time consistency", time_consistency));
  results.push_back(guarded(3, "verification of recorded outcomes", verification_suite));
  std::sort(results.begin(), results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  bool all = true;
  for (const auto& c : results) {
    std::printf("%s  criterion %d: %s --%s\n", c.passed ? "PASS" : "FAIL", c.id, c.title.c_str(),
                c.detail.c_str());
    all = all && c.passed;
  }
  return all ? 0 : 1;
}
