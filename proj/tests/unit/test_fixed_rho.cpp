#include "liftcut/ellipsoid_cuts.hpp"
#include "liftcut/fixed_rho.hpp"
#include "liftcut/generate.hpp"

#include <gtest/gtest.h>

using namespace liftcut;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Ellipsoid unit_disk() { return Ellipsoid(Matrix::Identity(2, 2), Vector::Zero(2), -1.0); }

}  // namespace

TEST(ContainmentFunction, GradientAndHessianMatchFiniteDifferences) {
  gen::Rng rng(3);
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Ellipsoid e = gen::random_ellipsoid(rng, d);
    const ContainmentFunction g(e, gen::uniform(rng, 0.05, 0.5));
    const Vector mu = e.center() + 0.3 * gen::gaussian(rng, d);
    const double tau = e.lambda_max() + gen::uniform(rng, 0.2, 2.0);
    const auto ev = g.evaluate(mu, tau);
    EXPECT_NEAR(ev.value, g.value(mu, tau), 1e-12 * (1.0 + std::abs(ev.value)));
    const double h = 1e-6;
    Vector z(d + 1);
    z << mu, tau;
    for (Eigen::Index k = 0; k <= d; ++k) {
      Vector zp = z, zm = z;
      zp(k) += h;
      zm(k) -= h;
      const double fd = (g.value(zp.head(d), zp(d)) - g.value(zm.head(d), zm(d))) / (2 * h);
      EXPECT_NEAR(ev.grad(k), fd, 1e-6 * (1.0 + std::abs(fd)));
      const auto ep = g.evaluate(zp.head(d), zp(d));
      const auto em = g.evaluate(zm.head(d), zm(d));
      const Vector col = (ep.grad - em.grad) / (2 * h);
      EXPECT_LT((ev.hess.col(k) - col).norm(), 1e-5 * (1.0 + col.norm()));
    }
    // Joint concavity.
    Eigen::SelfAdjointEigenSolver<Matrix> es(ev.hess);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-9);
  }
}

TEST(SolveFixedRho, UnitDiskExamples) {
  const Ellipsoid disk = unit_disk();
  const auto at_origin = solve_fixed_rho(disk, vec({0.0, 0.0}), 0.25);
  ASSERT_EQ(at_origin.status, SolveStatus::Optimal);
  EXPECT_LT(at_origin.primal.head(2).norm(), 1e-7);

  const auto far = solve_fixed_rho(disk, vec({2.0, 0.0}), 0.25);
  ASSERT_EQ(far.status, SolveStatus::Optimal);
  EXPECT_NEAR(far.primal(0), 0.5, 1e-7);
  EXPECT_NEAR(far.primal(1), 0.0, 1e-7);
  EXPECT_LE(far.kkt.max(), 1e-8);

  EXPECT_EQ(solve_fixed_rho(disk, vec({0.0, 0.0}), 1.5).status, SolveStatus::Infeasible);
}

TEST(SolveFixedRho, ZeroRadiusIsProjection) {
  const Ellipsoid disk = unit_disk();
  const auto out = solve_fixed_rho(disk, vec({3.0, 4.0}), 0.0);
  ASSERT_EQ(out.status, SolveStatus::Optimal);
  EXPECT_NEAR(out.primal(0), 0.6, 1e-12);
  EXPECT_NEAR(out.primal(1), 0.8, 1e-12);
  EXPECT_TRUE(std::isinf(out.primal(2)));
}

TEST(SolveFixedRho, MatchesDiskClosedForm) {
  // For the unit disk the feasible centres form the disk of radius 1 - sqrt(rho).
  gen::Rng rng(5);
  const Ellipsoid disk = unit_disk();
  for (int k = 0; k < 40; ++k) {
    const Vector x = gen::uniform(rng, 2, -2.0, 2.0);
    const double rho = gen::uniform(rng, 0.01, 0.95);
    const double r = 1.0 - std::sqrt(rho);
    const Vector expect = x.norm() <= r ? x : Vector(r * x.normalized());
    const auto out = solve_fixed_rho(disk, x, rho);
    ASSERT_EQ(out.status, SolveStatus::Optimal);
    EXPECT_LT((out.primal.head(2) - expect).norm(), 1e-7) << "x = " << x.transpose() << " rho " << rho;
  }
}

TEST(SolveFixedRho, KktOnRandomEllipsoids) {
  gen::Rng rng(9);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index d = 2 + inst % 3;
    const Ellipsoid e = gen::random_ellipsoid(rng, d);
    const double rho = gen::uniform(rng, 0.1, 0.9) * max_inscribed_rho(e);
    const Vector x = e.center() + 2.0 * gen::gaussian(rng, d);
    const auto out = solve_fixed_rho(e, x, rho);
    ASSERT_EQ(out.status, SolveStatus::Optimal);
    EXPECT_LE(out.kkt.max(), 1e-8) << "instance " << inst;
    const auto cert = containment_margin(e, Ball(out.primal.head(d), rho));
    EXPECT_GE(cert.slack, -1e-8);
  }
}

TEST(SolveFixedRho, FeasibleSetsAreNested) {
  gen::Rng rng(13);
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index d = 2 + inst % 2;
    const Ellipsoid e = gen::random_ellipsoid(rng, d);
    const double rmax = max_inscribed_rho(e);
    const Vector x = e.center() + 2.0 * gen::gaussian(rng, d);
    const double r1 = 0.2 * rmax;
    const double r2 = 0.7 * rmax;
    const Vector mu2 = solve_fixed_rho(e, x, r2).primal.head(d);
    EXPECT_GE(containment_margin(e, Ball(mu2, r1)).slack, -1e-9);
    // Sample around mu(rho2): anything feasible for rho2 is feasible for rho1.
    for (int k = 0; k < 50; ++k) {
      const Vector mu = mu2 + 0.05 * gen::gaussian(rng, d);
      if (containment_margin(e, Ball(mu, r2)).slack >= 0.0) {
        EXPECT_GE(containment_margin(e, Ball(mu, r1)).slack, 0.0);
      }
    }
  }
}

TEST(SolveFixedRho, RejectsNegativeRhoAndSingularA) {
  EXPECT_THROW(solve_fixed_rho(unit_disk(), vec({0.0, 0.0}), -0.1), Error);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  try {
    solve_fixed_rho(Ellipsoid(a, Vector::Zero(2), -1.0), vec({0.0, 0.0}), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundedEllipsoid);
  }
}
