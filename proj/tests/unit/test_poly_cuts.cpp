#include "liftcut/generate.hpp"
#include "liftcut/oracle.hpp"
#include "liftcut/poly_cuts.hpp"

#include <gtest/gtest.h>

using namespace liftcut;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

const Polyhedron& unit_square() {
  static const Polyhedron sq = gen::box(2, 0.0, 1.0);
  return sq;
}

Polyhedron halfspace_x1() {
  Matrix a(1, 2);
  a << 1.0, 0.0;
  return Polyhedron(a, Vector::Zero(1));
}

}  // namespace

TEST(LiftingBound, UnitSquarePairs) {
  const auto& sq = unit_square();
  const auto b01 = lifting_bound(sq, 0, 1);
  ASSERT_TRUE(b01.bounded);
  EXPECT_NEAR((b01.slope - vec({0.0, 1.0})).norm(), 0.0, 1e-15);
  EXPECT_NEAR(b01.intercept, 0.0, 1e-15);
  const auto b02 = lifting_bound(sq, 0, 2);
  ASSERT_TRUE(b02.bounded);
  EXPECT_NEAR(b02(vec({0.0, 0.3})), 0.5, 1e-15);
  EXPECT_THROW(lifting_bound(sq, 1, 1), Error);
}

TEST(LiftingBound, SameDirectionIsUnbounded) {
  Matrix a(2, 2);
  a << 1, 0, 2, 1e-20;
  // Not an exact multiple, so the constructor accepts it; the pair is still degenerate.
  const Polyhedron p(a, vec({0.0, -1.0}));
  EXPECT_FALSE(lifting_bound(p, 0, 1).bounded);
}

TEST(LiftingBound, TangentFormAgreesOnSquare) {
  const auto& sq = unit_square();
  const FacetGeometry geo(sq);
  const PairGeometry* g = geo.pair(0, 1);
  ASSERT_NE(g, nullptr);
  EXPECT_NEAR(g->half_angle, M_PI / 4.0, 1e-12);
  for (double y2 : {0.1, 0.4, 0.9}) {
    EXPECT_NEAR(g->tangent_form(vec({0.0, y2}), 1.0), y2, 1e-12);
  }
  EXPECT_EQ(geo.pair(0, 2), nullptr);
}

TEST(FacetGeometry, InvariantsOnRandomPolytopes) {
  gen::Rng rng(31);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Polyhedron p = gen::random_polyhedron(rng, d, 6 + inst % 5);
    const FacetGeometry geo(p);
    for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
      for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
        if (i == j) continue;
        const PairGeometry* g = geo.pair(i, j);
        ASSERT_NE(g, nullptr);
        EXPECT_NEAR(g->omega.norm(), 1.0, 1e-12);
        EXPECT_NEAR(g->omega.dot(p.normal(i)), 0.0, 1e-10);
        const Matrix h = FacetGeometry::edge_directions(p, i, j);
        for (Eigen::Index k = 0; k < h.cols(); ++k) EXPECT_NEAR(g->omega.dot(h.col(k)), 0.0, 1e-10);
        EXPECT_GT(g->omega.dot(p.normal(j)), 0.0);
        // The two lifting expressions agree on points of H_i.
        const Vector y = p.interior_point() - (p.slack(i, p.interior_point()) /
                                              p.normal(i).squaredNorm()) * p.normal(i);
        EXPECT_NEAR(g->tangent_form(y, p.normal_norm(i)), g->bound(y), 1e-9 * (1.0 + std::abs(g->bound(y))));
      }
    }
  }
}

TEST(MaxAlpha, Examples) {
  const auto& sq = unit_square();
  EXPECT_NEAR(max_alpha(sq, vec({0.0, 0.5}), 0), 0.5, 1e-15);
  EXPECT_NEAR(max_alpha(sq, vec({0.0, 0.0}), 0), 0.0, 1e-15);
  EXPECT_EQ(max_alpha(halfspace_x1(), vec({0.0, 0.0}), 0), kInf);
  try {
    max_alpha(sq, vec({0.1, 0.5}), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotOnFacet);
  }
  EXPECT_THROW(max_alpha(sq, vec({0.0, 1.5}), 0), Error);
}

TEST(MaxAlpha, PositiveExactlyOnRelativeInterior) {
  const auto& sq = unit_square();
  EXPECT_GT(max_alpha(sq, vec({0.0, 1e-6}), 0), 0.0);
  EXPECT_EQ(max_alpha(sq, vec({0.0, 1.0}), 0), 0.0);
}

TEST(MaxAlpha, MatchesBruteForceOnRandomPolytopes) {
  gen::Rng rng(41);
  int checked = 0;
  for (int inst = 0; inst < 60; ++inst) {
    const Eigen::Index d = std::vector<Eigen::Index>{2, 3, 5}[inst % 3];
    const Polyhedron p = gen::random_polyhedron(rng, d, d + 1 + inst % 7, inst % 4 != 0);
    for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
      const auto y = gen::random_facet_point(rng, p, i);
      if (!y) continue;
      const double a = max_alpha(p, *y, i);
      const double b = oracle::brute_force_alpha(p, *y, i);
      if (std::isinf(b)) {
        EXPECT_TRUE(std::isinf(a));
      } else {
        EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, b));
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(LiftedCut, Examples) {
  const auto& sq = unit_square();
  const Vector y = vec({0.0, 0.5});
  const Cut lin = lifted_cut(sq, y, 0, 0.0);
  const Cut ref = linearization_cut(y);
  EXPECT_LT((lin.beta - ref.beta).norm(), 1e-15);
  EXPECT_NEAR(lin.beta0, ref.beta0, 1e-15);

  const Cut c = lifted_cut(sq, y, 0, 0.5);
  // q >= x1 + x2 - 0.25
  EXPECT_LT((2.0 * c.beta - vec({1.0, 1.0})).norm(), 1e-15);
  EXPECT_NEAR(c.beta0, -0.25, 1e-15);
  EXPECT_NEAR(evaluate_cut(c, y, y.squaredNorm()), 0.0, 1e-15);
  EXPECT_TRUE(oracle::check_cut_validity(sq, c).valid);

  try {
    lifted_cut(sq, y, 0, 0.6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlphaTooLarge);
  }
}

TEST(LiftedCut, TightAndMaximalOnRandomAnchors) {
  gen::Rng rng(51);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Polyhedron p = gen::random_polyhedron(rng, d, d + 3);
    for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
      const auto y = gen::random_facet_point(rng, p, i);
      if (!y) continue;
      const double a = max_alpha(p, *y, i);
      ASSERT_TRUE(std::isfinite(a));
      const Cut c = lifted_cut(p, *y, i, a);
      EXPECT_NEAR(evaluate_cut(c, *y, y->squaredNorm()), 0.0, 1e-10 * (1.0 + y->squaredNorm()));
      // Inflating the lift pushes the violating ball through some facet.
      const double big = a + 1e-4;
      const Ball ball(*y + big * p.normal(i), big * big * p.normal(i).squaredNorm());
      EXPECT_FALSE(oracle::check_ball_containment(p, ball, 0.0).contained);
    }
  }
}

TEST(SeparatePoly, UnitSquareBenchmark) {
  const auto rep = separate_poly(unit_square(), vec({0.5, 0.5}), 0.5);
  ASSERT_TRUE(rep.cut.has_value());
  EXPECT_NEAR(rep.violation, 0.25, 1e-10);
  EXPECT_LT((2.0 * rep.cut->beta - vec({1.0, 1.0})).norm(), 1e-9);
  EXPECT_NEAR(rep.cut->beta0, -0.25, 1e-9);
  const auto* prov = std::get_if<provenance::LiftedFirstOrder>(&rep.cut->origin);
  ASSERT_NE(prov, nullptr);
  EXPECT_EQ(prov->facet, 0);
  EXPECT_NEAR(rep.recompute_violation(), rep.violation, 1e-10);
}

TEST(SeparatePoly, PointsOfSAreNotCut) {
  const auto& sq = unit_square();
  EXPECT_LE(separate_poly(sq, vec({2.0, 0.5}), 4.25).violation, 1e-9);
  EXPECT_LE(separate_poly(sq, vec({0.5, 0.5}), 10.0).violation, 0.0);
}

TEST(SeparatePoly, ThreadedMatchesSerial) {
  gen::Rng rng(61);
  const Polyhedron p = gen::random_polyhedron(rng, 3, 9);
  const Vector x = p.interior_point();
  SeparationOptions par;
  par.threads = 4;
  const auto a = separate_poly(p, x, 0.0);
  const auto b = separate_poly(p, x, 0.0, par);
  ASSERT_TRUE(a.cut && b.cut);
  EXPECT_EQ(a.violation, b.violation);
  EXPECT_EQ(a.cut->beta, b.cut->beta);
}

TEST(SeparatePoly, HalfspaceGivesComplementCut) {
  const auto rep = separate_poly(halfspace_x1(), vec({1.0, 0.0}), 0.0);
  ASSERT_TRUE(rep.cut.has_value());
  EXPECT_EQ(rep.cut->delta, 0.0);
  EXPECT_GT(rep.violation, 0.0);
  EXPECT_TRUE(oracle::check_cut_validity(halfspace_x1(), *rep.cut).valid);
}

TEST(SeparatePoly, FacetOptimumDominatesRandomFeasiblePairs) {
  gen::Rng rng(71);
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index d = 2 + inst % 2;
    const Polyhedron p = gen::random_polyhedron(rng, d, d + 3);
    const Vector x = p.interior_point() + 0.3 * gen::gaussian(rng, d);
    for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
      const QpProblem qp = detail::facet_separation_qp(p, x, i);
      const auto out = solve_qp(qp);
      if (out.status == SolveStatus::Infeasible) {
        // Redundant facet: no point of P lies on it.
        EXPECT_FALSE(gen::random_facet_point(rng, p, i).has_value());
        continue;
      }
      ASSERT_EQ(out.status, SolveStatus::Optimal);
      for (int k = 0; k < 1000; ++k) {
        const auto y = gen::random_facet_point(rng, p, i, 50);
        if (!y) break;
        const double a = gen::uniform(rng, 0.0, 1.0) * max_alpha(p, *y, i);
        Vector z(d + 1);
        z << *y, a;
        EXPECT_GE(qp.objective(z), out.objective - 1e-7);
      }
    }
  }
}

TEST(SeparatePoly, EmittedCutsAreValid) {
  gen::Rng rng(81);
  for (int inst = 0; inst < 15; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Polyhedron p = gen::random_polyhedron(rng, d, d + 2 + inst % 4);
    const Vector x = p.interior_point() + gen::gaussian(rng, d);
    const auto rep = separate_poly(p, x, x.squaredNorm() - 1.0);
    ASSERT_TRUE(rep.cut.has_value());
    const auto v = oracle::check_cut_validity(p, *rep.cut, {2000, 100, 5, 1e-7});
    EXPECT_TRUE(v.valid) << "instance " << inst << " residual " << v.residual;
  }
}
