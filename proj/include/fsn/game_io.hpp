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

// JSON documents: game specs, LCP dumps and solved outcomes.
//
// Matrices are row-major nested arrays, vectors flat arrays. Numbers are
// written with round-trip precision.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fsn/fsn_solver.hpp"

namespace fsn::io {

using json = nlohmann::json;

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ShapeMismatch(what + ": expected a number");
  return j.get<double>();
}

inline Matrix matrix_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ShapeMismatch(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ShapeMismatch(what + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

inline Vector vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ShapeMismatch(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

namespace detail {

// Reads a matrix field into an already-zeroed block of the expected shape.
inline void read_matrix(const json& obj, const char* key, Matrix& target, int k) {
  if (!obj.contains(key)) return;
  const std::string what = std::string(key) + " at stage " + std::to_string(k);
  Matrix m = matrix_from(obj.at(key), what);
  // An empty array stands for any matrix with a zero dimension.
  if (m.size() == 0 && target.size() == 0) return;
  if (m.rows() != target.rows() || m.cols() != target.cols())
    throw ShapeMismatch(what + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        ", expected " + std::to_string(target.rows()) + "x" +
                        std::to_string(target.cols()));
  target = std::move(m);
}

inline void read_vector(const json& obj, const char* key, Vector& target, int k) {
  if (!obj.contains(key)) return;
  const std::string what = std::string(key) + " at stage " + std::to_string(k);
  Vector v = vector_from(obj.at(key), what);
  if (v.size() != target.size())
    throw ShapeMismatch(what + " has length " + std::to_string(v.size()) + ", expected " +
                        std::to_string(target.size()));
  target = std::move(v);
}

inline constexpr const char* kDynamicsKeys[] = {"A", "B1", "B2", "R11", "R12", "R21", "R22"};

inline void read_stage_fields(const json& obj, StageData& st, int k) {
  if (!obj.is_object()) throw ShapeMismatch("stage " + std::to_string(k) + " must be an object");
  if (st.terminal) {
    for (const char* key : kDynamicsKeys)
      if (obj.contains(key))
        throw ShapeMismatch(std::string("terminal stage must not define ") + key);
  } else {
    read_matrix(obj, "A", st.A, k);
    read_matrix(obj, "B1", st.B[0], k);
    read_matrix(obj, "B2", st.B[1], k);
    read_matrix(obj, "R11", st.R[0][0], k);
    read_matrix(obj, "R12", st.R[0][1], k);
    read_matrix(obj, "R21", st.R[1][0], k);
    read_matrix(obj, "R22", st.R[1][1], k);
  }
  read_matrix(obj, "Q1", st.Q[0], k);
  read_matrix(obj, "Q2", st.Q[1], k);
  read_vector(obj, "p1", st.p[0], k);
  read_vector(obj, "p2", st.p[1], k);
  read_matrix(obj, "D1", st.D[0], k);
  read_matrix(obj, "D2", st.D[1], k);
  read_matrix(obj, "L1", st.L[0], k);
  read_matrix(obj, "L2", st.L[1], k);
  read_vector(obj, "d1", st.d[0], k);
  read_vector(obj, "d2", st.d[1], k);
  read_matrix(obj, "M1", st.M[0], k);
  read_matrix(obj, "M2", st.M[1], k);
  read_matrix(obj, "N1", st.N[0], k);
  read_matrix(obj, "N2", st.N[1], k);
  read_vector(obj, "r1", st.r[0], k);
  read_vector(obj, "r2", st.r[1], k);
}

inline int read_dim(const json& dims, const char* key, int fallback) {
  if (!dims.contains(key)) return fallback;
  const auto& v = dims.at(key);
  if (!v.is_number_integer()) throw ShapeMismatch(std::string("dims.") + key + " must be an integer");
  return v.get<int>();
}

}  // namespace detail

/// Parses a game document. Unspecified blocks are zero; cost matrices are
/// symmetrised (or rejected when clearly asymmetric); an optional
/// "discount" is folded into the cost blocks.
inline GameSpec spec_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("dims")) throw ShapeMismatch("spec needs a dims object");
  const auto& jd = doc.at("dims");
  Dimensions dims;
  dims.n = detail::read_dim(jd, "n", 0);
  dims.m1 = detail::read_dim(jd, "m1", 0);
  dims.m2 = detail::read_dim(jd, "m2", 0);
  dims.s1 = detail::read_dim(jd, "s1", 0);
  dims.s2 = detail::read_dim(jd, "s2", 0);
  dims.c1 = detail::read_dim(jd, "c1", 0);
  dims.c2 = detail::read_dim(jd, "c2", 0);
  dims.K = detail::read_dim(jd, "K", 0);
  if (dims.K < 1) throw ShapeMismatch("dims.K must be at least 1");
  if (dims.n < 0 || dims.m1 < 0 || dims.m2 < 0 || dims.s1 < 0 || dims.s2 < 0 || dims.c1 < 0 ||
      dims.c2 < 0)
    throw ShapeMismatch("dimensions must be non-negative");

  GameSpec spec;
  spec.dims = dims;
  spec.x0 = doc.contains("x0") ? vector_from(doc.at("x0"), "x0") : Vector::Zero(dims.n);
  if (spec.x0.size() != dims.n) throw ShapeMismatch("x0 has the wrong length");

  const bool explicit_stages = doc.contains("stages");
  const bool constant = doc.contains("constant_stage");
  if (explicit_stages == constant)
    throw ShapeMismatch("spec needs exactly one of stages or constant_stage");

  for (int k = 0; k <= dims.K; ++k)
    spec.stages.push_back(StageData::zeros(dims, k == dims.K));

  if (explicit_stages) {
    const auto& arr = doc.at("stages");
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(dims.K + 1))
      throw ShapeMismatch("stages must list K+1 entries");
    for (int k = 0; k <= dims.K; ++k)
      detail::read_stage_fields(arr[static_cast<std::size_t>(k)], spec.stages[static_cast<std::size_t>(k)], k);
  } else {
    json base = doc.at("constant_stage");
    for (int k = 0; k <= dims.K; ++k) {
      json fields = base;
      if (k == dims.K)
        for (const char* key : detail::kDynamicsKeys) fields.erase(key);
      detail::read_stage_fields(fields, spec.stages[static_cast<std::size_t>(k)], k);
    }
    if (doc.contains("overrides")) {
      for (const auto& o : doc.at("overrides")) {
        if (!o.contains("stage")) throw ShapeMismatch("override without a stage index");
        const int k = o.at("stage").get<int>();
        if (k < 0 || k > dims.K) throw ShapeMismatch("override stage out of range");
        json fields = o;
        fields.erase("stage");
        detail::read_stage_fields(fields, spec.stages[static_cast<std::size_t>(k)], k);
      }
    }
  }

  symmetrize_costs(spec);
  check_shapes(spec);
  if (doc.contains("discount")) spec = fold_discount(spec, number(doc.at("discount"), "discount"));
  return spec;
}

inline json spec_to_json(const GameSpec& spec) {
  const auto& d = spec.dims;
  json doc;
  doc["dims"] = {{"n", d.n},   {"m1", d.m1}, {"m2", d.m2}, {"s1", d.s1},
                 {"s2", d.s2}, {"c1", d.c1}, {"c2", d.c2}, {"K", d.K}};
  doc["x0"] = to_json(spec.x0);
  json stages = json::array();
  for (const auto& st : spec.stages) {
    json o;
    if (!st.terminal) {
      o["A"] = to_json(st.A);
      o["B1"] = to_json(st.B[0]);
      o["B2"] = to_json(st.B[1]);
      o["R11"] = to_json(st.R[0][0]);
      o["R12"] = to_json(st.R[0][1]);
      o["R21"] = to_json(st.R[1][0]);
      o["R22"] = to_json(st.R[1][1]);
    }
    const char* sfx[2] = {"1", "2"};
    for (int i = 0; i < 2; ++i) {
      const std::string s = sfx[i];
      o["Q" + s] = to_json(st.Q[i]);
      o["p" + s] = to_json(st.p[i]);
      o["D" + s] = to_json(st.D[i]);
      o["L" + s] = to_json(st.L[i]);
      o["d" + s] = to_json(st.d[i]);
      o["M" + s] = to_json(st.M[i]);
      o["N" + s] = to_json(st.N[i]);
      o["r" + s] = to_json(st.r[i]);
    }
    stages.push_back(std::move(o));
  }
  doc["stages"] = std::move(stages);
  return doc;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ShapeMismatch("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ShapeMismatch(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

inline void write_json_file(const std::string& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

inline GameSpec load_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

inline void save_spec(const std::string& path, const GameSpec& spec) {
  write_json_file(path, spec_to_json(spec));
}

// ---- LCP dumps --------------------------------------------------------------

inline json lcp_to_json(const LcpProblem& p) { return {{"M", to_json(p.M)}, {"q", to_json(p.q)}}; }

inline LcpProblem lcp_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("M") || !doc.contains("q"))
    throw ShapeMismatch("LCP document needs M and q");
  LcpProblem p{matrix_from(doc.at("M"), "M"), vector_from(doc.at("q"), "q")};
  if (p.M.size() == 0) p.M.resize(p.q.size(), p.q.size());
  p.check();
  return p;
}

// ---- Outcomes --------------------------------------------------------------

inline json report_to_json(const VerificationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"stage", c.stage}});
  json foc = json::array();
  for (const auto& f : r.foc) foc.push_back({f.leader, f.follower});
  json values = json::array();
  for (const auto& v : r.value_errors) values.push_back({v[0], v[1]});
  return {{"passed", r.passed()},
          {"lcp_complementarity", r.lcp_complementarity},
          {"lcp_feasibility", r.lcp_feasibility},
          {"stage_fixed_point_errors", r.stage_fixed_point_errors},
          {"degenerate_multiplier_stages", r.degenerate_multiplier_stages},
          {"foc_residuals", foc},
          {"value_errors", values},
          {"deviations_tried", r.deviations_tried},
          {"checks", checks}};
}

inline json outcome_to_json(const FsnOutcome& o) {
  json E = json::array(), F = json::array(), u = json::array(), m = json::array();
  for (const auto& e : o.E) E.push_back({to_json(e[0]), to_json(e[1])});
  for (const auto& f : o.F) F.push_back({to_json(f[0]), to_json(f[1])});
  for (const auto& c : o.u) u.push_back({to_json(c[0]), to_json(c[1])});
  for (const auto& c : o.value_offsets) m.push_back({c[0], c[1]});
  json v = json::array(), mu = json::array(), x = json::array();
  for (const auto& a : o.v_star) v.push_back(to_json(a));
  for (const auto& a : o.mu_star) mu.push_back(to_json(a));
  for (const auto& a : o.x) x.push_back(to_json(a));
  return {{"E", E},
          {"F", F},
          {"v_star", v},
          {"mu_star", mu},
          {"x", x},
          {"u", u},
          {"J", {o.J[0], o.J[1]}},
          {"value_offsets", m},
          {"lcp_pivots", o.lcp_pivots},
          {"lcp_solutions_found", o.lcp_solutions_found},
          {"report", report_to_json(o.report)}};
}

inline FsnOutcome outcome_from_json(const json& doc) {
  auto need = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw ShapeMismatch(std::string("outcome lacks ") + key);
    return doc.at(key);
  };
  FsnOutcome o;
  for (const auto& e : need("E"))
    o.E.push_back({matrix_from(e.at(0), "E"), matrix_from(e.at(1), "E")});
  for (const auto& f : need("F"))
    o.F.push_back({vector_from(f.at(0), "F"), vector_from(f.at(1), "F")});
  for (const auto& c : need("u"))
    o.u.push_back({vector_from(c.at(0), "u"), vector_from(c.at(1), "u")});
  for (const auto& a : need("v_star")) o.v_star.push_back(vector_from(a, "v_star"));
  for (const auto& a : need("mu_star")) o.mu_star.push_back(vector_from(a, "mu_star"));
  for (const auto& a : need("x")) o.x.push_back(vector_from(a, "x"));
  const auto& J = need("J");
  o.J = {number(J.at(0), "J"), number(J.at(1), "J")};
  if (doc.contains("value_offsets"))
    for (const auto& c : doc.at("value_offsets"))
      o.value_offsets.push_back({number(c.at(0), "m"), number(c.at(1), "m")});
  if (doc.contains("lcp_pivots")) o.lcp_pivots = doc.at("lcp_pivots").get<int>();
  // Empty gain blocks (zero controls) need their shapes restored.
  for (auto& e : o.E)
    for (auto& g : e)
      if (g.size() == 0) g.resize(g.rows(), o.x.empty() ? 0 : o.x.front().size());
  return o;
}

// ---- Time series ------------------------------------------------------------

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

/// One row per stage: state, both controls (empty at K), simultaneous
/// decisions, multipliers and constraint slacks.
inline std::string trajectory_csv(const GameSpec& spec, const FsnOutcome& o) {
  const auto& d = spec.dims;
  std::ostringstream os;
  os << "k";
  for (int j = 0; j < d.n; ++j) os << ",x" << j + 1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d.m_of(i); ++j) os << ",u" << i + 1 << "_" << j + 1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d.s_of(i); ++j) os << ",v" << i + 1 << "_" << j + 1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d.c_of(i); ++j) os << ",mu" << i + 1 << "_" << j + 1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d.c_of(i); ++j) os << ",slack" << i + 1 << "_" << j + 1;
  os << "\n";
  for (int k = 0; k <= d.K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    os << k;
    for (int j = 0; j < d.n; ++j) os << ',' << format_number(o.x[uk](j));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < d.m_of(i); ++j)
        os << ',' << (k < d.K ? format_number(o.u[uk][i](j)) : std::string());
    for (int j = 0; j < d.s(); ++j) os << ',' << format_number(o.v_star[uk](j));
    for (int j = 0; j < d.c(); ++j) os << ',' << format_number(o.mu_star[uk](j));
    const Vector slack = constraint_slack(d, spec.stages[uk], o.x[uk], o.v_star[uk]);
    for (int j = 0; j < d.c(); ++j) os << ',' << format_number(slack(j));
    os << "\n";
  }
  return os.str();
}

}  // namespace fsn::io
