#include "liftcut/ellipsoid_cuts.hpp"
#include "liftcut/generate.hpp"
#include "liftcut/oracle.hpp"
#include "liftcut/poly_cuts.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <array>
#include <optional>

using namespace liftcut;
using boost::multiprecision::cpp_rational;

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

Ellipsoid unit_disk() { return Ellipsoid(Matrix::Identity(2, 2), Vector::Zero(2), -1.0); }

}  // namespace

TEST(BallContainment, UnitSquareExamples) {
  const auto& sq = unit_square();
  const auto tangent = oracle::check_ball_containment(sq, Ball(vec({0.5, 0.5}), 0.25));
  EXPECT_TRUE(tangent.contained);
  EXPECT_NEAR(tangent.worst, 0.0, 1e-15);
  const auto over = oracle::check_ball_containment(sq, Ball(vec({0.5, 0.5}), 0.36));
  ASSERT_FALSE(over.contained);
  EXPECT_NEAR(over.worst, -0.1, 1e-15);
  EXPECT_FALSE(sq.contains(over.witness + 1e-9 * (over.witness - vec({0.5, 0.5}))));
  EXPECT_FALSE(oracle::check_ball_containment(sq, Ball(vec({2.0, 0.5}), 0.01)).contained);
}

TEST(BallContainment, AgreesWithExactRationalArithmetic) {
  // Integer normals, centres in eighths and radii in eighths keep every
  // quantity exact in rationals.
  gen::Rng rng(201);
  std::uniform_int_distribution<int> coef(-3, 3), cen(-16, 16), rad(0, 12), off(-8, 8);
  int tangent = 0;
  for (int inst = 0; inst < 400; ++inst) {
    const int m = 4;
    std::vector<std::array<int, 3>> rows;  // a1, a2, 4 b
    for (int i = 0; i < m; ++i) {
      int a1 = 0, a2 = 0;
      while (a1 == 0 && a2 == 0) {
        a1 = coef(rng);
        a2 = coef(rng);
      }
      rows.push_back({a1, a2, off(rng) - 8 * (std::abs(a1) + std::abs(a2))});
    }
    const int c1 = cen(rng), c2 = cen(rng), r8 = rad(rng);
    Matrix a(m, 2);
    Vector b(m);
    for (int i = 0; i < m; ++i) {
      a(i, 0) = rows[i][0];
      a(i, 1) = rows[i][1];
      b(i) = rows[i][2] / 4.0;
    }
    std::optional<Polyhedron> p;
    try {
      p.emplace(a, b);
    } catch (const Error&) {
      continue;
    }
    bool exact = true;
    bool on_boundary = false;
    for (const auto& [a1, a2, b4] : rows) {
      const cpp_rational s = cpp_rational(a1 * c1, 8) + cpp_rational(a2 * c2, 8) - cpp_rational(b4, 4);
      const cpp_rational lhs = s * s;
      const cpp_rational rhs = cpp_rational(r8 * r8, 64) * (a1 * a1 + a2 * a2);
      if (s < 0 || lhs < rhs) exact = false;
      if (s >= 0 && lhs == rhs) on_boundary = true;
    }
    const double r = r8 / 8.0;
    const auto v = oracle::check_ball_containment(*p, Ball(vec({c1 / 8.0, c2 / 8.0}), r * r));
    EXPECT_EQ(v.contained, exact) << "instance " << inst;
    tangent += on_boundary && exact;
  }
  EXPECT_GT(tangent, 0);
}

TEST(BallContainment, EllipsoidExamples) {
  const Ellipsoid disk = unit_disk();
  EXPECT_TRUE(oracle::check_ball_containment(disk, Ball(vec({0.5, 0.0}), 0.25)).contained);
  const auto out = oracle::check_ball_containment(disk, Ball(vec({0.6, 0.0}), 0.25));
  ASSERT_FALSE(out.contained);
  EXPECT_GT(disk.value(out.witness), 0.0);
  EXPECT_NEAR((out.witness - vec({0.6, 0.0})).norm(), 0.5, 1e-12);
}

TEST(BallContainment, EllipsoidSearchMatchesCertificate) {
  gen::Rng rng(203);
  int decided = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Ellipsoid e = gen::random_ellipsoid(rng, d);
    const Ball b(e.center() + 0.4 * gen::gaussian(rng, d), gen::uniform(rng, 0.0, 0.4));
    const double margin = containment_margin(e, b).slack;
    if (std::abs(margin) < 1e-6) continue;
    const auto v = oracle::check_ball_containment(e, b);
    EXPECT_EQ(v.contained, margin > 0.0) << "instance " << inst << " margin " << margin;
    if (!v.contained) {
      EXPECT_GT(e.value(v.witness), 0.0);
      EXPECT_NEAR((v.witness - b.center).squaredNorm(), b.rho, 1e-9);
    }
    ++decided;
  }
  EXPECT_GT(decided, 150);
}

TEST(BruteForceAlpha, Examples) {
  const auto& sq = unit_square();
  EXPECT_NEAR(oracle::brute_force_alpha(sq, vec({0.0, 0.5}), 0), 0.5, 1e-12);
  EXPECT_NEAR(oracle::brute_force_alpha(sq, vec({0.0, 0.0}), 0), 0.0, 1e-12);
  Matrix a(1, 2);
  a << 1.0, 0.0;
  EXPECT_TRUE(std::isinf(oracle::brute_force_alpha(Polyhedron(a, Vector::Zero(1)), vec({0.0, 3.0}), 0)));
  EXPECT_THROW(oracle::brute_force_alpha(sq, vec({0.2, 0.5}), 0), Error);
  EXPECT_THROW(oracle::brute_force_alpha(sq, vec({0.0, 1.5}), 0), Error);
}

TEST(CutValidity, LiftedCutAndItsPerturbation) {
  const auto& sq = unit_square();
  // q >= x1 + x2 - 0.25 is valid; raising the right-hand side to -0.2 is not.
  const Cut good{1.0, vec({0.5, 0.5}), -0.25, {}};
  const auto ok = oracle::check_cut_validity(sq, good);
  EXPECT_TRUE(ok.valid);
  EXPECT_GE(ok.samples, 10000);
  const Cut bad{1.0, vec({0.5, 0.5}), -0.2, {}};
  const auto no = oracle::check_cut_validity(sq, bad);
  ASSERT_FALSE(no.valid);
  ASSERT_EQ(no.witness.size(), 2);
  // Re-verify the counterexample from scratch.
  EXPECT_FALSE(sq.is_interior(no.witness));
  const double x1 = no.witness(0), x2 = no.witness(1);
  EXPECT_LT(x1 * x1 + x2 * x2 - x1 - x2 + 0.2, 0.0);
  EXPECT_NEAR(no.residual, x1 * x1 + x2 * x2 - x1 - x2 + 0.2, 1e-12);
}

TEST(CutValidity, DeterministicForAFixedSeed) {
  const Cut bad{1.0, vec({0.5, 0.5}), -0.2, {}};
  const auto a = oracle::check_cut_validity(unit_square(), bad);
  const auto b = oracle::check_cut_validity(unit_square(), bad);
  EXPECT_EQ(a.witness, b.witness);
  EXPECT_EQ(a.residual, b.residual);
}

TEST(CutValidity, EllipsoidBallCuts) {
  const Ellipsoid disk = unit_disk();
  EXPECT_TRUE(oracle::check_cut_validity(disk, ball_cut(Ball(vec({0.2, 0.1}), 0.4))).valid);
  const auto v = oracle::check_cut_validity(disk, ball_cut(Ball(vec({0.2, 0.1}), 0.9)));
  ASSERT_FALSE(v.valid);
  EXPECT_GE(disk.value(v.witness), -1e-12);
  EXPECT_LT((v.witness - vec({0.2, 0.1})).squaredNorm(), 0.9);
}

TEST(CutValidity, HalfspaceCutOnRay) {
  // P = {x1 >= 0}. Cutting away x1 > 0 is valid; cutting away x1 < -0.5 is not.
  Matrix a(1, 2);
  a << 1.0, 0.0;
  const Polyhedron half(a, Vector::Zero(1));
  const Cut keep_left{0.0, vec({0.5, 0.0}), 0.0, {}};
  EXPECT_TRUE(oracle::check_cut_validity(half, keep_left).valid);
  const Cut keep_right{0.0, vec({-0.5, 0.0}), -0.5, {}};
  EXPECT_FALSE(oracle::check_cut_validity(half, keep_right).valid);
}

TEST(Irredundancy, Examples) {
  const auto sq = oracle::check_irredundancy(unit_square());
  for (auto s : sq) EXPECT_EQ(s, oracle::FacetStatus::FacetDefining);

  Matrix a(5, 2);
  a << 1, 0, 0, 1, -1, 0, 0, -1, 2, 0;
  const Polyhedron extra(a, vec({0.0, 0.0, -1.0, -1.0, -0.5}));
  const auto st = oracle::check_irredundancy(extra);
  EXPECT_EQ(st[4], oracle::FacetStatus::Redundant);
  EXPECT_EQ(st[0], oracle::FacetStatus::FacetDefining);

  Matrix h(1, 2);
  h << 1.0, 1.0;
  EXPECT_EQ(oracle::check_irredundancy(Polyhedron(h, Vector::Zero(1)))[0],
            oracle::FacetStatus::FacetDefining);
}

TEST(Irredundancy, AgreesWithFacetSampling) {
  gen::Rng rng(207);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index d = 2 + inst % 2;
    const Polyhedron p = gen::random_polyhedron(rng, d, d + 4);
    const auto st = oracle::check_irredundancy(p);
    for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
      const bool sampled = gen::random_facet_point(rng, p, i, 5000).has_value();
      if (st[static_cast<std::size_t>(i)] == oracle::FacetStatus::Redundant) {
        EXPECT_FALSE(sampled);
      }
    }
  }
}

TEST(ProbeConcavity, Examples) {
  std::vector<double> grid;
  for (int k = 0; k <= 50; ++k) grid.push_back(k / 50.0);
  EXPECT_TRUE(oracle::probe_concavity([](double r) { return r; }, grid).concave);
  EXPECT_TRUE(oracle::probe_concavity([](double r) { return std::sqrt(r); }, grid).concave);
  const auto sq = oracle::probe_concavity([](double r) { return r * r; }, grid);
  EXPECT_FALSE(sq.concave);
  EXPECT_EQ(sq.index, 1u);
  EXPECT_NEAR(sq.worst, 2.0 * 0.02 * 0.02, 1e-12);
  EXPECT_THROW(oracle::probe_concavity(grid, std::vector<double>(3, 0.0)), Error);
}

TEST(ProbeConcavity, DiskViolationProfile) {
  const Ellipsoid disk = unit_disk();
  const Vector x = vec({0.3, -0.2});
  std::vector<double> grid;
  for (int k = 0; k < 60; ++k) grid.push_back(0.98 * k / 59.0);
  const auto v = oracle::probe_concavity(
      [&](double rho) { return fixed_rho_separate(disk, x, 0.0, rho).theta; }, grid);
  EXPECT_TRUE(v.concave) << v.worst;
}

TEST(AuditKkt, DetectsTamperedSolution) {
  QpProblem p = QpProblem::with_variables(2);
  p.hessian = 2.0 * Matrix::Identity(2, 2);
  p.linear << -2.0, -2.0;
  p.add_inequality(-Vector::Unit(2, 0), -0.5);
  auto out = solve_qp(p);
  ASSERT_EQ(out.status, SolveStatus::Optimal);
  EXPECT_TRUE(oracle::audit_kkt(p, out).passed);
  EXPECT_NEAR(out.primal(0), 0.5, 1e-12);
  EXPECT_NEAR(out.ineq_duals(0), 1.0, 1e-12);

  auto moved = out;
  moved.primal(1) += 1e-3;
  EXPECT_FALSE(oracle::audit_kkt(p, moved).passed);
  auto negative = out;
  negative.ineq_duals(0) = -1.0;
  EXPECT_FALSE(oracle::audit_kkt(p, negative).passed);
  auto wrong = out;
  wrong.status = SolveStatus::Infeasible;
  EXPECT_FALSE(oracle::audit_kkt(p, wrong).passed);
}
