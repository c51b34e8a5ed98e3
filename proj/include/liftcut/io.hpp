#pragma once

// JSON instance / cut / report documents. Facet indices are 0-based.

#include "liftcut/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace liftcut::io {

using json = nlohmann::json;

struct Query {
  Vector x;
  double q = 0.0;
  std::optional<double> w;
};

/// Demo-loop settings: linear objective over (x, q) (or (x, w, q)) and a box on x.
struct DemoSettings {
  Vector objective;
  double lo = -1.0;
  double hi = 2.0;
};

struct Instance {
  Eigen::Index dimension = 0;
  std::optional<QuadraticForm> quadratic;
  Region region;
  std::optional<Query> query;
  std::optional<DemoSettings> demo;
};

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + ": expected a number");
  return j.get<double>();
}

inline Vector vector(const json& j, Eigen::Index n, const std::string& where) {
  if (!j.is_array()) fail(where + ": expected an array");
  if (n >= 0 && static_cast<Eigen::Index>(j.size()) != n) {
    fail(where + ": expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = number(j[k], where);
  return v;
}

inline Matrix matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    fail(where + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    m.row(r) = vector(j[static_cast<std::size_t>(r)], cols, where).transpose();
  }
  return m;
}

inline std::pair<Matrix, Vector> facets(const json& j, Eigen::Index d, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where + ": expected a nonempty facet list");
  Matrix a(static_cast<Eigen::Index>(j.size()), d);
  Vector b(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    a.row(static_cast<Eigen::Index>(i)) = vector(field(j[i], "a", w), d, w + ".a").transpose();
    b(static_cast<Eigen::Index>(i)) = number(field(j[i], "b", w), w + ".b");
  }
  return {std::move(a), std::move(b)};
}

inline json facets_json(const Matrix& a, const Vector& b) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out.push_back({{"a", to_json(Vector(a.row(i).transpose()))}, {"b", b(i)}});
  }
  return out;
}

inline Region region(const json& j, Eigen::Index d) {
  const std::string kind = field(j, "kind", "region").is_string() ? j.at("kind").get<std::string>() : "";
  if (kind == "polyhedron") {
    auto [a, b] = facets(field(j, "facets", "region"), d, "region.facets");
    std::optional<Vector> interior;
    if (j.contains("interior_point")) interior = vector(j.at("interior_point"), d, "region.interior_point");
    return Polyhedron(std::move(a), std::move(b), std::move(interior));
  }
  if (kind == "ellipsoid") {
    return Ellipsoid(matrix(field(j, "A", "region"), d, d, "region.A"),
                     vector(field(j, "c", "region"), d, "region.c"),
                     number(field(j, "b", "region"), "region.b"));
  }
  if (kind == "paraboloid_complement") {
    auto [a, b] = facets(field(j, "facets", "region"), d, "region.facets");
    return ParaboloidComplement(std::move(a), std::move(b));
  }
  fail("region.kind must be polyhedron, ellipsoid or paraboloid_complement");
}

}  // namespace detail

inline json to_json(const Region& region) {
  struct Visitor {
    json operator()(const Polyhedron& p) const {
      return {{"kind", "polyhedron"},
              {"facets", detail::facets_json(p.normals(), p.rhs())},
              {"interior_point", to_json(p.interior_point())}};
    }
    json operator()(const Ellipsoid& e) const {
      return {{"kind", "ellipsoid"}, {"A", to_json(e.matrix())}, {"c", to_json(e.linear())}, {"b", e.offset()}};
    }
    json operator()(const ParaboloidComplement& p) const {
      return {{"kind", "paraboloid_complement"}, {"facets", detail::facets_json(p.normals(), p.rhs())}};
    }
  };
  return std::visit(Visitor{}, region);
}

inline json to_json(const Instance& inst) {
  json j;
  j["dimension"] = inst.dimension;
  if (inst.quadratic) {
    j["quadratic"] = {{"M", to_json(inst.quadratic->matrix())},
                      {"l", to_json(inst.quadratic->linear())},
                      {"m0", inst.quadratic->constant_term()}};
  }
  j["region"] = to_json(inst.region);
  if (inst.query) {
    j["query"] = {{"x_star", to_json(inst.query->x)}, {"q_star", inst.query->q}};
    if (inst.query->w) j["query"]["w_star"] = *inst.query->w;
  }
  if (inst.demo) {
    j["demo"] = {{"objective", to_json(inst.demo->objective)}, {"box", {inst.demo->lo, inst.demo->hi}}};
  }
  return j;
}

inline Instance instance_from_json(const json& j) {
  try {
    const json& dim = detail::field(j, "dimension", "instance");
    if (!dim.is_number_integer() || dim.get<long long>() < 1) detail::fail("dimension must be a positive integer");
    const auto d = static_cast<Eigen::Index>(dim.get<long long>());
    Instance inst{d, std::nullopt, detail::region(detail::field(j, "region", "instance"), d), std::nullopt,
                  std::nullopt};
    if (j.contains("quadratic")) {
      const json& q = j.at("quadratic");
      inst.quadratic = QuadraticForm(detail::matrix(detail::field(q, "M", "quadratic"), d, d, "quadratic.M"),
                                     q.contains("l") ? detail::vector(q.at("l"), d, "quadratic.l") : Vector(Vector::Zero(d)),
                                     q.contains("m0") ? detail::number(q.at("m0"), "quadratic.m0") : 0.0);
    }
    if (j.contains("query")) {
      const json& q = j.at("query");
      Query query;
      query.x = detail::vector(detail::field(q, "x_star", "query"), d, "query.x_star");
      query.q = detail::number(detail::field(q, "q_star", "query"), "query.q_star");
      if (q.contains("w_star")) query.w = detail::number(q.at("w_star"), "query.w_star");
      if (std::holds_alternative<ParaboloidComplement>(inst.region) && !query.w) {
        detail::fail("query.w_star is required for paraboloid_complement regions");
      }
      inst.query = std::move(query);
    }
    if (j.contains("demo")) {
      const json& dj = j.at("demo");
      DemoSettings demo;
      demo.objective = detail::vector(detail::field(dj, "objective", "demo"), -1, "demo.objective");
      if (dj.contains("box")) {
        const Vector b = detail::vector(dj.at("box"), 2, "demo.box");
        demo.lo = b(0);
        demo.hi = b(1);
      }
      inst.demo = std::move(demo);
    }
    return inst;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, std::string("invalid instance: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Instance parse_instance(const std::string& text) { return instance_from_json(parse_document(text)); }
inline Instance load_instance(const std::string& path) { return parse_instance(read_file(path)); }

/// FNV-1a over the compact serialization.
inline std::string instance_hash(const Instance& inst) {
  const std::string s = to_json(inst).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json to_json(const Ball& b) { return {{"center", to_json(b.center)}, {"rho", b.rho}}; }

inline json to_json(const Provenance& p) {
  struct Visitor {
    json operator()(std::monostate) const { return {{"kind", "none"}}; }
    json operator()(const provenance::Linearization& l) const {
      return {{"kind", "linearization"}, {"anchor", to_json(l.anchor)}};
    }
    json operator()(const provenance::LiftedFirstOrder& l) const {
      return {{"kind", "lifted"}, {"anchor", to_json(l.anchor)}, {"facet", l.facet}, {"alpha", l.alpha}};
    }
    json operator()(const provenance::FromBall& b) const {
      json j = to_json(b.ball);
      j["kind"] = "ball";
      return j;
    }
    json operator()(const provenance::Paraboloid& l) const {
      return {{"kind", "paraboloid"}, {"anchor", to_json(l.anchor)}, {"facet", l.facet}, {"alpha", l.alpha}};
    }
    json operator()(const provenance::ComplementHalfspace& h) const {
      return {{"kind", "halfspace"}, {"facet", h.facet}};
    }
  };
  return std::visit(Visitor{}, p);
}

inline json to_json(const Cut& c) {
  return {{"delta", c.delta}, {"beta", to_json(c.beta)}, {"beta0", c.beta0}, {"provenance", to_json(c.origin)}};
}

inline Provenance provenance_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) return std::monostate{};
  const std::string kind = j.at("kind").get<std::string>();
  auto anchor = [&] { return detail::vector(detail::field(j, "anchor", "provenance"), -1, "provenance.anchor"); };
  auto facet = [&] { return static_cast<Eigen::Index>(detail::field(j, "facet", "provenance").get<long long>()); };
  auto alpha = [&] { return detail::number(detail::field(j, "alpha", "provenance"), "provenance.alpha"); };
  if (kind == "linearization") return provenance::Linearization{anchor()};
  if (kind == "lifted") return provenance::LiftedFirstOrder{anchor(), facet(), alpha()};
  if (kind == "paraboloid") return provenance::Paraboloid{anchor(), facet(), alpha()};
  if (kind == "halfspace") return provenance::ComplementHalfspace{facet()};
  if (kind == "ball") {
    return provenance::FromBall{Ball(detail::vector(detail::field(j, "center", "provenance"), -1, "provenance.center"),
                                     detail::number(detail::field(j, "rho", "provenance"), "provenance.rho"))};
  }
  if (kind == "none") return std::monostate{};
  detail::fail("unknown provenance kind '" + kind + "'");
}

inline Cut cut_from_json(const json& j) {
  try {
    Cut c;
    c.delta = detail::number(detail::field(j, "delta", "cut"), "cut.delta");
    c.beta = detail::vector(detail::field(j, "beta", "cut"), -1, "cut.beta");
    c.beta0 = detail::number(detail::field(j, "beta0", "cut"), "cut.beta0");
    if (j.contains("provenance")) c.origin = provenance_from_json(j.at("provenance"));
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

/// Accepts a single cut, {"cuts": [...]}, a separation report with "cut", or
/// a document wrapping such a report under "report".
inline std::vector<Cut> cuts_from_json(const json& j) {
  if (j.is_object() && j.contains("report") && j.at("report").is_object()) return cuts_from_json(j.at("report"));
  std::vector<Cut> out;
  if (j.is_array()) {
    for (const auto& c : j) out.push_back(cut_from_json(c));
  } else if (j.is_object() && j.contains("cuts")) {
    if (!j.at("cuts").is_array()) detail::fail("cuts must be an array");
    for (const auto& c : j.at("cuts")) out.push_back(cut_from_json(c));
  } else if (j.is_object() && j.contains("cut")) {
    if (!j.at("cut").is_null()) out.push_back(cut_from_json(j.at("cut")));
  } else {
    out.push_back(cut_from_json(j));
  }
  return out;
}

inline json to_json(const SolverDiagnostics& d) {
  json notes = json::array();
  for (const auto& n : d.notes) notes.push_back(n);
  json skipped = json::array();
  for (auto i : d.skipped_facets) skipped.push_back(i);
  return {{"iterations", d.iterations},
          {"evaluations", d.evaluations},
          {"kkt_residual", d.kkt_residual},
          {"skipped_facets", skipped},
          {"notes", notes}};
}

inline json to_json(const SeparationReport& r) {
  json j;
  j["query"] = {{"point", to_json(r.point)}, {"q_star", r.q}};
  j["separated"] = r.separated();
  j["violation"] = r.cut ? json(r.violation) : json(nullptr);
  j["cut"] = r.cut ? to_json(*r.cut) : json(nullptr);
  j["certificate"] = r.certificate ? to_json(*r.certificate) : json(nullptr);
  j["diagnostics"] = to_json(r.diagnostics);
  return j;
}

}  // namespace liftcut::io
