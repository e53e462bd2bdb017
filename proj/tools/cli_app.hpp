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

// Command-line front end. run() is separate from main() so the tests can
// drive it in-process.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsn/fsn.hpp"

namespace fsn::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kInfeasible = 2, kBadInput = 3 };

struct RunConfig {
  std::string command;  // solve | verify | stage-solve | sweep | duopoly | lcp-debug
  std::string spec_path;
  std::string outcome_path;
  std::string lcp_path;
  std::string output_dir;
  VerifyOptions tolerances;
  std::uint64_t seed = 1;

  // stage-solve
  int stage = 0;
  std::vector<double> state;

  // duopoly
  std::optional<double> lambda;
  std::string sweep_range;  // lo:hi:step

  // lcp-debug with a generated problem
  int random_dim = 0;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return (fs::path(cfg.output_dir) / name).string();
}

inline void print_report(std::ostream& out, const VerificationReport& rep) {
  for (const auto& c : rep.checks) {
    out << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.name << "  value=" << c.value
        << "  threshold=" << c.threshold;
    if (c.stage >= 0) out << "  stage=" << c.stage;
    out << "\n";
  }
}

inline int report_exit(std::ostream& err, const VerificationReport& rep) {
  if (rep.passed()) return kOk;
  for (const auto& c : rep.checks) {
    if (c.passed) continue;
    err << "verification failed: " << c.name;
    if (c.stage >= 0) err << " at stage " << c.stage;
    err << " (value " << c.value << ", threshold " << c.threshold << ")\n";
  }
  return kVerificationFailed;
}

inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad sweep range '" + text + "', expected lo:hi:step");
    }
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
    throw std::invalid_argument("bad sweep range '" + text + "', expected lo:hi:step");
  std::vector<double> grid;
  const auto count = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (int i = 0; i <= count; ++i) {
    // Round to the step's decimal resolution so 0.1 + 3*0.05 prints as 0.25.
    const double v = parts[0] + i * parts[2];
    grid.push_back(std::round(v * 1e9) / 1e9);
  }
  return grid;
}

inline io::json eigen_summary(const Matrix& m, bool symmetric) {
  if (m.size() == 0) return io::json::array();
  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return io::to_json(Vector(es.eigenvalues()));
  }
  Eigen::EigenSolver<Matrix> es(m, false);
  Vector mods = es.eigenvalues().cwiseAbs();
  std::sort(mods.data(), mods.data() + mods.size());
  return io::to_json(mods);
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto spec = io::load_spec(cfg.spec_path);
  SolveOptions opts;
  opts.verify = cfg.tolerances;
  const auto o = solve_fsn(spec, opts);
  io::write_json_file(out_path(cfg, "outcome.json"), io::outcome_to_json(o));
  io::write_text_file(out_path(cfg, "trajectory.csv"), io::trajectory_csv(spec, o));
  out << "J1 = " << io::format_number(o.J[0]) << "\nJ2 = " << io::format_number(o.J[1]) << "\n";
  print_report(out, o.report);
  return report_exit(err, o.report);
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto spec = io::load_spec(cfg.spec_path);
  auto o = io::outcome_from_json(io::read_json_file(cfg.outcome_path));
  const auto rep = verify_equilibrium(spec, o, cfg.tolerances);
  print_report(out, rep);
  // Stored costs must match a fresh summation of the stored play.
  const auto J = evaluate_costs(spec, o);
  for (int i = 0; i < 2; ++i) {
    if (std::abs(J[i] - o.J[i]) > cfg.tolerances.value_tol * (1.0 + std::abs(J[i]))) {
      err << "verification failed: stored cost of player " << i + 1 << " differs from the play\n";
      return kVerificationFailed;
    }
  }
  return report_exit(err, rep);
}

inline int cmd_stage_solve(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto spec = io::load_spec(cfg.spec_path);
  Vector x = Vector::Map(cfg.state.data(), static_cast<Eigen::Index>(cfg.state.size()));
  if (cfg.state.empty() && cfg.stage == 0) x = spec.x0;
  const auto sol = solve_stage_game(spec, cfg.stage, x);
  const io::json doc = {{"stage", cfg.stage},
                        {"x", io::to_json(x)},
                        {"v", io::to_json(sol.v)},
                        {"mu", io::to_json(sol.mu)},
                        {"complementarity_residual", sol.lcp.complementarity_residual},
                        {"feasibility_residual", sol.lcp.feasibility_residual},
                        {"pivots", sol.lcp.pivots}};
  out << doc.dump(2) << "\n";
  return kOk;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto spec = io::load_spec(cfg.spec_path);
  ensure_valid(spec);
  const auto tape = backward_sweep(spec);
  io::json stages = io::json::array();
  for (int k = 0; k <= spec.dims.K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    io::json s = {{"k", k},
                  {"S1_eigenvalues", eigen_summary(tape.S[uk][0], true)},
                  {"S2_eigenvalues", eigen_summary(tape.S[uk][1], true)}};
    if (k < spec.dims.K) {
      s["E1"] = io::to_json(tape.E[uk][0]);
      s["E2"] = io::to_json(tape.E[uk][1]);
      s["Upsilon1_eigenvalues"] = eigen_summary(tape.Upsilon1[uk], true);
      s["Upsilon2_eigenvalues"] = eigen_summary(tape.Upsilon2[uk], true);
      s["Delta_eigenvalue_moduli"] = eigen_summary(tape.Delta[uk], false);
      s["closed_loop_eigenvalue_moduli"] = eigen_summary(tape.closed_loop[uk], false);
    }
    stages.push_back(std::move(s));
  }
  const io::json doc = {{"K", spec.dims.K},
                        {"stages", stages},
                        {"gain_discrepancy", tape.g_discrepancy},
                        {"h_discrepancy", tape.h_discrepancy},
                        {"warnings", tape.warnings}};
  const auto path = out_path(cfg, "tape.json");
  io::write_json_file(path, doc);
  out << "tape written to " << path << "\n";
  for (const auto& w : tape.warnings) out << "warning: " << w << "\n";
  return kOk;
}

inline int cmd_duopoly(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  SolveOptions opts;
  opts.verify = cfg.tolerances;
  if (!cfg.sweep_range.empty()) {
    const auto rows = table2_sweep(parse_range(cfg.sweep_range), {}, opts);
    const auto csv = sweep_csv(rows);
    io::write_text_file(out_path(cfg, "duopoly_sweep.csv"), csv);
    out << csv;
    int code = kOk;
    for (const auto& r : rows) {
      if (r.status == "no_equilibrium" || r.status == "error") {
        err << "lambda " << fixed6(r.lambda) << ": " << r.message << "\n";
        code = std::max(code, static_cast<int>(kInfeasible));
      } else if (r.status != "ok") {
        err << "lambda " << fixed6(r.lambda) << ": verification failed: " << r.message << "\n";
        code = std::max(code, static_cast<int>(kVerificationFailed));
      }
    }
    return code;
  }

  DuopolyParams prm;
  const double lambda = cfg.lambda.value_or(prm.lambda[0]);
  prm.lambda = {lambda, lambda};
  const auto spec = build_duopoly_spec(prm);
  const auto o = solve_fsn(spec, opts);
  io::write_json_file(out_path(cfg, "outcome.json"), io::outcome_to_json(o));
  io::write_text_file(out_path(cfg, "trajectory.csv"), io::trajectory_csv(spec, o));
  io::write_text_file(out_path(cfg, "panel_capacity_output.csv"), capacity_output_csv(o));
  io::write_text_file(out_path(cfg, "panel_knowledge.csv"), knowledge_csv(o));
  io::write_text_file(out_path(cfg, "panel_investment.csv"), investment_csv(o));
  out << "lambda = " << fixed6(lambda) << "\nJ1 = " << fixed6(o.J[0])
      << "\nJ2 = " << fixed6(o.J[1]) << "\n";
  print_report(out, o.report);
  return report_exit(err, o.report);
}

inline int cmd_lcp_debug(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  LcpProblem p;
  if (!cfg.lcp_path.empty()) {
    p = io::lcp_from_json(io::read_json_file(cfg.lcp_path));
  } else if (cfg.random_dim > 0) {
    // Seeded monotone problem: PD symmetric part plus a skew part.
    std::mt19937_64 gen(cfg.seed);
    std::normal_distribution<double> nd;
    const int d = cfg.random_dim;
    Matrix G(d, d), S(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        G(i, j) = nd(gen);
        S(i, j) = nd(gen);
      }
    p.M = G * G.transpose() + 0.1 * Matrix::Identity(d, d) + (S - S.transpose());
    p.q.resize(d);
    for (int i = 0; i < d; ++i) p.q(i) = nd(gen);
  } else {
    const auto spec = io::load_spec(cfg.spec_path);
    ensure_valid(spec);
    p = assemble_global_lcp(spec, backward_sweep(spec), spec.x0);
  }
  io::write_json_file(out_path(cfg, "lcp.json"), io::lcp_to_json(p));

  io::json doc = {{"dimension", p.dim()}};
  const auto res = lemke_solve(p);
  if (const auto* sol = std::get_if<LcpSolution>(&res)) {
    doc["status"] = "solved";
    doc["z"] = io::to_json(sol->z);
    doc["pivots"] = sol->pivots;
    doc["complementarity_residual"] = sol->complementarity_residual;
    doc["feasibility_residual"] = sol->feasibility_residual;
  } else {
    const auto& ray = std::get<LcpInfeasible>(res);
    doc["status"] = "ray";
    doc["ray"] = io::to_json(ray.ray);
    doc["pivots"] = ray.pivots;
  }
  if (p.dim() <= 16) {
    const auto all = enumerate_solutions(p);
    doc["enumerated_solutions"] = all.solutions.size();
    doc["degenerate"] = all.degenerate;
  }
  out << doc.dump(2) << "\n";
  return std::holds_alternative<LcpSolution>(res) ? kOk : kInfeasible;
}

}  // namespace detail

/// Executes one command; returns the process exit status.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (cfg.command == "solve") return detail::cmd_solve(cfg, out, err);
    if (cfg.command == "verify") return detail::cmd_verify(cfg, out, err);
    if (cfg.command == "stage-solve") return detail::cmd_stage_solve(cfg, out, err);
    if (cfg.command == "sweep") return detail::cmd_sweep(cfg, out, err);
    if (cfg.command == "duopoly") return detail::cmd_duopoly(cfg, out, err);
    if (cfg.command == "lcp-debug") return detail::cmd_lcp_debug(cfg, out, err);
    err << "unknown command '" << cfg.command << "'\n";
    return kBadInput;
  } catch (const NoEquilibrium& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const StageInfeasible& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const AssumptionViolated& e) {
    err << "invalid game: " << e.what() << "\n";
    return kBadInput;
  } catch (const IndefiniteUpsilon& e) {
    err << "invalid game: " << e.what() << "\n";
    return kBadInput;
  } catch (const ShapeMismatch& e) {
    err << "malformed input: " << e.what() << "\n";
    return kBadInput;
  } catch (const IndexOutOfRange& e) {
    err << "malformed input: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    err << "malformed input: " << e.what() << "\n";
    return kBadInput;
  } catch (const Error& e) {
    err << "solver failure: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kBadInput;
  }
}

/// Parses argv into a RunConfig and runs it.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Feedback Stackelberg-Nash solver for constrained LQ difference games"};
  app.require_subcommand(1);
  RunConfig cfg;
  const char* env_dir = std::getenv("FSN_OUTPUT_DIR");
  cfg.output_dir = env_dir && *env_dir ? env_dir : ".";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--out", cfg.output_dir, "Output directory (default: $FSN_OUTPUT_DIR or .)");
  };
  auto add_tolerances = [&](CLI::App* sub) {
    sub->add_option("--fixed-point-tol", cfg.tolerances.fixed_point_tol,
                    "Stage fixed-point tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--foc-tol", cfg.tolerances.foc_tol,
                    "First-order-condition tolerance, scaled by 1+|x_k|")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--value-tol", cfg.tolerances.value_tol,
                    "Value identity tolerance, scaled by 1+|J|")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--deviation-tol", cfg.tolerances.deviation_tol,
                    "Allowed improvement from a finite deviation")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* solve = app.add_subcommand("solve", "Solve a game spec and verify the equilibrium");
  solve->add_option("--spec", cfg.spec_path, "Game spec (JSON)")->required()->check(CLI::ExistingFile);
  add_common(solve);
  add_tolerances(solve);

  auto* verify = app.add_subcommand("verify", "Re-check a stored outcome against its spec");
  verify->add_option("--spec", cfg.spec_path, "Game spec (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--outcome", cfg.outcome_path, "Outcome (JSON)")->required()->check(CLI::ExistingFile);
  add_tolerances(verify);

  auto* stage = app.add_subcommand("stage-solve", "Solve one stage's simultaneous game");
  stage->add_option("--spec", cfg.spec_path, "Game spec (JSON)")->required()->check(CLI::ExistingFile);
  stage->add_option("--stage", cfg.stage, "Stage index")->required();
  stage->add_option("--x", cfg.state, "State vector (comma separated)")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Dump the backward-sweep tape");
  sweep->add_option("--spec", cfg.spec_path, "Game spec (JSON)")->required()->check(CLI::ExistingFile);
  add_common(sweep);

  auto* duo = app.add_subcommand("duopoly", "Run the R&D duopoly preset");
  auto* lam = duo->add_option("--lambda", cfg.lambda, "Symmetric spillover");
  duo->add_option("--sweep", cfg.sweep_range, "Spillover grid lo:hi:step")->excludes(lam);
  add_common(duo);
  add_tolerances(duo);

  auto* lcp = app.add_subcommand("lcp-debug", "Dump and solve a complementarity problem");
  auto* from_spec = lcp->add_option("--spec", cfg.spec_path, "Assemble from a game spec")->check(CLI::ExistingFile);
  auto* from_file = lcp->add_option("--lcp", cfg.lcp_path, "Load a dumped problem")->check(CLI::ExistingFile);
  auto* random = lcp->add_option("--random", cfg.random_dim, "Generate a seeded monotone problem of this size");
  lcp->add_option("--seed", cfg.seed, "Seed for --random");
  from_spec->excludes(from_file)->excludes(random);
  from_file->excludes(random);
  add_common(lcp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e_;
    const int code = app.exit(e, o, e_);
    out << o.str();
    err << e_.str();
    return code == 0 ? kOk : kBadInput;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (cfg.command == "lcp-debug" && cfg.spec_path.empty() && cfg.lcp_path.empty() &&
      cfg.random_dim <= 0) {
    err << "lcp-debug needs one of --spec, --lcp or --random\n";
    return kBadInput;
  }
  return run(cfg, out, err);
}

}  // namespace fsn::cli
