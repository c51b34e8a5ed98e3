#include "liftcut/liftcut.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace liftcut;
using io::json;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCounterExample = 4;

struct Settings {
  std::uint64_t seed = 42;
  int budget = 10000;
  std::optional<double> tol;
  unsigned threads = 1;
  int max_rounds = 50;
  std::string output;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::SolverFailure:
    case ErrorCode::UnboundedDirection:
      return kExitSolver;
    default:
      return kExitParse;
  }
}

// Instance plus the region in coordinates where the epigraph reads q >= ||u||^2.
struct Prepared {
  io::Instance inst;
  Region region;
  TransformRecord tr;
};

Prepared prepare(const std::string& path) {
  io::Instance inst = io::load_instance(path);
  if (!inst.quadratic) {
    const auto d = inst.dimension;
    Region region = inst.region;
    return {std::move(inst), std::move(region), TransformRecord::identity(d)};
  }
  auto n = normalize(*inst.quadratic, inst.region);
  return {std::move(inst), std::move(n.region), std::move(n.transform)};
}

void emit(const Settings& s, const json& doc) {
  if (s.output.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(s.output);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + s.output);
  out << doc.dump(2) << '\n';
}

json header(const char* command, const Prepared& p, const Settings& s) {
  return {{"version", kVersion},
          {"command", command},
          {"instance_hash", io::instance_hash(p.inst)},
          {"region_kind", region_kind(p.inst.region)},
          {"seed", s.seed}};
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Cuts over (x, w) keep the w coefficient; only the x block is transformed.
Vector witness_to_original(const TransformRecord& tr, const Vector& z) {
  const auto d = tr.transform.rows();
  Vector out = z;
  out.head(d) = tr.backward(z.head(d));
  return out;
}

int cmd_separate(const std::string& path, const Settings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  const Prepared p = prepare(path);
  if (!p.inst.query) throw Error(ErrorCode::ParseError, "instance has no query");
  const auto& query = *p.inst.query;
  const Vector u = p.tr.forward(query.x);
  const double qn = p.tr.forward_q(query.q);

  SeparationReport rep;
  if (const auto* poly = std::get_if<Polyhedron>(&p.region)) {
    SeparationOptions opts;
    opts.threads = s.threads;
    rep = separate_poly(*poly, u, qn, opts);
  } else if (const auto* ell = std::get_if<Ellipsoid>(&p.region)) {
    rep = separate_ellipsoid(*ell, u, qn);
  } else {
    rep = separate_paraboloid(std::get<ParaboloidComplement>(p.region), u, *query.w, qn);
  }

  rep.point.head(p.inst.dimension) = query.x;
  rep.q = query.q;
  if (rep.cut) rep.cut = p.tr.cut_to_original(*rep.cut);

  json doc = header("separate", p, s);
  doc["report"] = io::to_json(rep);
  if (rep.cut) doc["report"]["separated"] = rep.violation > s.tol.value_or(0.0);
  doc["normalized"] = p.inst.quadratic.has_value();
  doc["timing_ms"] = elapsed_ms(t0);
  emit(s, doc);
  return 0;
}

// The cut with the lift raised by `extra`, or nothing when the provenance
// carries no lift.
std::optional<Cut> inflated(const Region& region, const Cut& cut, double extra) {
  if (const auto* lf = std::get_if<provenance::LiftedFirstOrder>(&cut.origin)) {
    const auto* poly = std::get_if<Polyhedron>(&region);
    if (!poly) return std::nullopt;
    const Vector a = poly->normal(lf->facet);
    const double alpha = lf->alpha + extra;
    return ball_cut(Ball(lf->anchor + alpha * a, alpha * alpha * a.squaredNorm()));
  }
  if (const auto* pb = std::get_if<provenance::Paraboloid>(&cut.origin)) {
    const auto* par = std::get_if<ParaboloidComplement>(&region);
    if (!par) return std::nullopt;
    ParaboloidCut c;
    c.alpha = pb->alpha + extra;
    c.x_coeffs = 2.0 * pb->anchor - c.alpha * par->normal(pb->facet);
    c.w_coeff = c.alpha;
    c.constant = c.alpha * par->rhs(pb->facet) - pb->anchor.squaredNorm();
    c.anchor = pb->anchor;
    c.facet = pb->facet;
    return c.to_cut();
  }
  return std::nullopt;
}

std::optional<double> lift_cap(const Region& region, const Cut& cut) {
  if (const auto* lf = std::get_if<provenance::LiftedFirstOrder>(&cut.origin)) {
    return max_alpha(std::get<Polyhedron>(region), lf->anchor, lf->facet);
  }
  if (const auto* pb = std::get_if<provenance::Paraboloid>(&cut.origin)) {
    return paraboloid_max_alpha(std::get<ParaboloidComplement>(region), pb->anchor, pb->facet);
  }
  return std::nullopt;
}

int cmd_verify(const std::string& path, const std::string& cut_path, const Settings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  const Prepared p = prepare(path);
  const auto cuts = io::cuts_from_json(io::parse_document(io::read_file(cut_path)));
  const Eigen::Index want =
      p.inst.dimension + (std::holds_alternative<ParaboloidComplement>(p.region) ? 1 : 0);
  const oracle::ValidityOptions vopts{s.budget, 100, s.seed, s.tol.value_or(tol::kCutResidual)};

  json records = json::array();
  bool all_valid = true;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const Cut& original = cuts[k];
    if (original.dimension() != want) {
      throw Error(ErrorCode::ParseError, "cut " + std::to_string(k) + " has dimension " +
                                             std::to_string(original.dimension()) + ", expected " +
                                             std::to_string(want));
    }
    const Cut cut = p.tr.cut_to_normalized(original);
    const auto v = oracle::check_cut_validity(p.region, cut, vopts);
    json rec = {{"cut_id", k},
                {"oracle", cut.delta == 0.0 ? "region_sampling" : "sampling"},
                {"verdict", v.valid ? "Valid" : "CounterExample"},
                {"samples", v.samples},
                {"min_residual", v.residual}};
    if (!v.valid) {
      rec["witness"] = io::to_json(witness_to_original(p.tr, v.witness));
      all_valid = false;
    }
    if (const auto cap = lift_cap(p.region, cut); cap && std::isfinite(*cap)) {
      const auto bigger = inflated(p.region, cut, 1e-3);
      const auto iv = oracle::check_cut_validity(p.region, *bigger, vopts);
      rec["maximality"] = {{"alpha_hat", *cap},
                           {"inflated_verdict", iv.valid ? "Valid" : "CounterExample"},
                           {"maximal", !iv.valid}};
    }
    records.push_back(std::move(rec));
  }

  json doc = header("verify", p, s);
  doc["budget"] = s.budget;
  doc["cuts"] = std::move(records);
  doc["verdict"] = all_valid ? "Valid" : "CounterExample";
  doc["timing_ms"] = elapsed_ms(t0);
  emit(s, doc);
  return all_valid ? 0 : kExitCounterExample;
}

Vector parse_objective(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "bad objective entry '" + item + "'");
    }
  }
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

int cmd_demo(const std::string& path, const std::string& objective_text, const Settings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  const Prepared p = prepare(path);
  DemoOptions opts;
  Vector objective;
  if (!objective_text.empty()) {
    objective = parse_objective(objective_text);
  } else if (p.inst.demo) {
    objective = p.inst.demo->objective;
  } else {
    throw Error(ErrorCode::ParseError, "no objective: pass --objective or add a demo block");
  }
  if (objective.size() != p.inst.dimension + 1) {
    throw Error(ErrorCode::ParseError, "objective needs " + std::to_string(p.inst.dimension + 1) +
                                           " entries (x then q)");
  }
  if (p.inst.demo) {
    opts.lo = p.inst.demo->lo;
    opts.hi = p.inst.demo->hi;
  }
  opts.max_rounds = s.max_rounds;
  opts.violation_tol = s.tol.value_or(opts.violation_tol);
  opts.poly.threads = s.threads;
  if (p.inst.quadratic) opts.transform = p.tr;
  const DemoResult res = run_demo_loop(p.region, objective, opts);

  json rounds = json::array();
  for (const auto& r : res.rounds) {
    rounds.push_back({{"round", r.round},
                      {"objective", r.objective},
                      {"bound", r.bound},
                      {"x", io::to_json(r.x)},
                      {"q", r.q},
                      {"violation", std::isfinite(r.violation) ? json(r.violation) : json(nullptr)},
                      {"cut_added", r.cut_added}});
  }
  json cuts = json::array();
  for (const Cut& c : res.cuts) cuts.push_back(io::to_json(p.tr.cut_to_original(c)));

  json doc = header("demo-loop", p, s);
  doc["box"] = {opts.lo, opts.hi};
  doc["objective"] = io::to_json(objective);
  doc["rounds"] = std::move(rounds);
  doc["cuts"] = std::move(cuts);
  doc["converged"] = res.converged;
  doc["repeated_cut"] = res.repeated_cut;
  doc["message"] = res.message;
  doc["timing_ms"] = elapsed_ms(t0);
  emit(s, doc);
  if (res.nonconvergence_warning) std::cerr << res.message << '\n';
  return 0;
}

int cmd_gen(const std::string& kind, Eigen::Index d, Eigen::Index m, bool quadratic, const Settings& s) {
  gen::Rng rng(s.seed);
  auto build = [&]() -> io::Instance {
    if (kind == "polytope") {
      Polyhedron poly = gen::random_polyhedron(rng, d, m);
      const Vector x = poly.interior_point();
      return {d, std::nullopt, std::move(poly), io::Query{x, x.squaredNorm() - 0.5, std::nullopt}, std::nullopt};
    }
    if (kind == "ellipsoid") {
      Ellipsoid e = gen::random_ellipsoid(rng, d);
      const Vector x = e.center();
      return {d, std::nullopt, std::move(e), io::Query{x, x.squaredNorm() - 0.5, std::nullopt}, std::nullopt};
    }
    if (kind == "paraboloid") {
      ParaboloidComplement r = gen::random_paraboloid(rng, d, m);
      const Vector x = gen::uniform(rng, d, -1.0, 1.0);
      const double w = r.envelope(x) + 0.5;
      return {d, std::nullopt, std::move(r), io::Query{x, x.squaredNorm() - 0.5, w}, std::nullopt};
    }
    throw Error(ErrorCode::ParseError, "gen kind must be polytope, ellipsoid or paraboloid");
  };
  io::Instance inst = build();
  if (quadratic) inst.quadratic = gen::random_quadratic(rng, d);
  emit(s, io::to_json(inst));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cut separation and verification for quadratic epigraphs over region complements"};
  app.require_subcommand(1);
  app.fallthrough();
  Settings s;
  app.add_option("--seed", s.seed, "Seed for every sampling oracle")->capture_default_str();
  app.add_option("--budget", s.budget, "Sample budget for the validity oracle")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--tol", s.tol,
                 "Residual tolerance (verify), violation threshold (separate, demo-loop)");
  app.add_option("--threads", s.threads, "Worker threads for per-facet separation")
      ->capture_default_str()
      ->check(CLI::Range(1u, 256u));
  app.add_option("--max-rounds", s.max_rounds, "Round cap for demo-loop")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("-o,--output", s.output, "Write the report here instead of stdout");

  std::string instance, cut_file, objective, kind;
  Eigen::Index dimension = 2, facets = 6;
  bool with_quadratic = false;

  auto* sep = app.add_subcommand("separate", "Most violated cut at the instance query");
  sep->add_option("instance", instance, "Instance file")->required();
  auto* ver = app.add_subcommand("verify", "Check cuts against the region by sampling");
  ver->add_option("instance", instance, "Instance file")->required();
  ver->add_option("cuts", cut_file, "Cut file: a cut, {\"cuts\": [...]}, or a separate report")->required();
  auto* demo = app.add_subcommand("demo-loop", "Cutting-plane loop for a linear objective over a box");
  demo->add_option("instance", instance, "Instance file")->required();
  demo->add_option("--objective", objective, "Comma-separated coefficients of (x, q)");
  auto* gen_cmd = app.add_subcommand("gen", "Write a random instance");
  gen_cmd->add_option("kind", kind, "polytope | ellipsoid | paraboloid")->required();
  gen_cmd->add_option("-d,--dimension", dimension, "Dimension of x")->capture_default_str();
  gen_cmd->add_option("-m,--facets", facets, "Facets (polytope, paraboloid)")->capture_default_str();
  gen_cmd->add_flag("--quadratic", with_quadratic, "Add a random positive definite quadratic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (*sep) return cmd_separate(instance, s);
    if (*ver) return cmd_verify(instance, cut_file, s);
    if (*demo) return cmd_demo(instance, objective, s);
    return cmd_gen(kind, dimension, facets, with_quadratic, s);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
}
