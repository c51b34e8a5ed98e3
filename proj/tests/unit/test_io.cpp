#include "liftcut/generate.hpp"
#include "liftcut/io.hpp"
#include "liftcut/poly_cuts.hpp"

#include <gtest/gtest.h>

using namespace liftcut;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    io::parse_instance(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidInput;
}

const char* kSquare = R"({
  "dimension": 2,
  "region": {"kind": "polyhedron", "facets": [
    {"a": [1, 0], "b": 0}, {"a": [0, 1], "b": 0}, {"a": [-1, 0], "b": -1}, {"a": [0, -1], "b": -1}]},
  "query": {"x_star": [0.5, 0.5], "q_star": 0.5}
})";

}  // namespace

TEST(Io, ParsesPolyhedronInstance) {
  const auto inst = io::parse_instance(kSquare);
  EXPECT_EQ(inst.dimension, 2);
  const auto& p = std::get<Polyhedron>(inst.region);
  EXPECT_EQ(p.num_facets(), 4);
  EXPECT_TRUE(p.normals().isApprox(gen::box(2, 0.0, 1.0).normals()));
  ASSERT_TRUE(inst.query.has_value());
  EXPECT_EQ(inst.query->q, 0.5);
  EXPECT_FALSE(inst.quadratic.has_value());
}

TEST(Io, RoundTripIsIdentity) {
  gen::Rng rng(301);
  std::vector<io::Instance> cases;
  cases.push_back(io::parse_instance(kSquare));
  io::Instance e{3, gen::random_quadratic(rng, 3), gen::random_ellipsoid(rng, 3),
                 io::Query{gen::gaussian(rng, 3), 0.25, std::nullopt}, std::nullopt};
  cases.push_back(e);
  io::Instance par{2, std::nullopt, gen::random_paraboloid(rng, 2, 4),
                   io::Query{gen::gaussian(rng, 2), -1.0, 0.5}, io::DemoSettings{Vector::Ones(4), -2.0, 3.0}};
  cases.push_back(par);
  for (const auto& inst : cases) {
    const std::string once = io::to_json(inst).dump();
    const auto back = io::parse_instance(once);
    EXPECT_EQ(io::to_json(back).dump(), once);
    EXPECT_EQ(io::instance_hash(back), io::instance_hash(inst));
  }
}

TEST(Io, HashSeparatesInstances) {
  const auto a = io::parse_instance(kSquare);
  auto j = io::parse_document(kSquare);
  j["query"]["q_star"] = 0.51;
  const auto b = io::instance_from_json(j);
  EXPECT_NE(io::instance_hash(a), io::instance_hash(b));
  EXPECT_EQ(io::instance_hash(a).size(), 16u);
}

TEST(Io, MalformedInputsAreParseErrors) {
  EXPECT_EQ(code_of("{"), ErrorCode::ParseError);
  EXPECT_EQ(code_of("[]"), ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"dimension": 0, "region": {}})"), ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"dimension": 2, "region": {"kind": "cube"}})"), ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"dimension": 2, "region": {"kind": "polyhedron", "facets": [{"a": [1], "b": 0}]}})"),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"dimension": 1, "region": {"kind": "polyhedron", "facets": [{"a": ["x"], "b": 0}]}})"),
            ErrorCode::ParseError);
  // Empty interior surfaces as a parse error of the instance.
  EXPECT_EQ(code_of(R"({"dimension": 1, "region": {"kind": "polyhedron",
                       "facets": [{"a": [1], "b": 0}, {"a": [-1], "b": 0}]}})"),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"dimension": 1, "region": {"kind": "paraboloid_complement",
                       "facets": [{"a": [1], "b": 0}, {"a": [-1], "b": 0}]},
                       "query": {"x_star": [0], "q_star": 0}})"),
            ErrorCode::ParseError);
  EXPECT_THROW(io::load_instance("/nonexistent/instance.json"), Error);
}

TEST(Io, CutRoundTripWithProvenance) {
  const Polyhedron sq = gen::box(2, 0.0, 1.0);
  Vector x(2);
  x << 0.5, 0.5;
  const auto rep = separate_poly(sq, x, 0.5);
  ASSERT_TRUE(rep.cut.has_value());
  const auto report = io::to_json(rep);
  const auto cuts = io::cuts_from_json(report);
  ASSERT_EQ(cuts.size(), 1u);
  EXPECT_EQ(cuts[0].beta, rep.cut->beta);
  EXPECT_EQ(cuts[0].beta0, rep.cut->beta0);
  const auto* prov = std::get_if<provenance::LiftedFirstOrder>(&cuts[0].origin);
  ASSERT_NE(prov, nullptr);
  EXPECT_EQ(prov->facet, 0);
  EXPECT_NEAR(prov->alpha, 0.5, 1e-9);

  io::json list = {{"cuts", {io::to_json(*rep.cut), io::to_json(ball_cut(Ball(x, 0.1)))}}};
  const auto two = io::cuts_from_json(list);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<provenance::FromBall>(two[1].origin));
  EXPECT_EQ(io::cuts_from_json(io::to_json(two[1])).size(), 1u);
  EXPECT_EQ(io::cuts_from_json(list["cuts"]).size(), 2u);

  io::json bad = {{"delta", 1.0}, {"beta", {0.5}}, {"beta0", 0.0}, {"provenance", {{"kind", "mystery"}}}};
  EXPECT_THROW(io::cut_from_json(bad), Error);
  EXPECT_THROW(io::cut_from_json(io::json{{"delta", 1.0}}), Error);
}
