#pragma once

// Seeded random fixtures: polytopes, ellipsoids, paraboloid complements and
// anchors on facets.

#include "liftcut/model.hpp"

#include <cmath>
#include <optional>
#include <random>

namespace liftcut::gen {

using Rng = std::mt19937_64;

inline Vector gaussian(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  Vector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = n(rng);
  return v;
}

inline Vector uniform(Rng& rng, Eigen::Index d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = u(rng);
  return v;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Matrix random_orthogonal(Rng& rng, Eigen::Index d) {
  Matrix g(d, d);
  for (Eigen::Index k = 0; k < d; ++k) g.col(k) = gaussian(rng, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(d, d);
}

/// m facets with random directions and scales around a random centre. When
/// `bounded`, the first d + 1 normals are chosen to positively span R^d.
inline Polyhedron random_polyhedron(Rng& rng, Eigen::Index d, Eigen::Index m,
                                    bool bounded = true) {
  const Vector center = uniform(rng, d, -1.0, 1.0);
  Matrix normals(m, d);
  Vector rhs(m);
  Vector sum = Vector::Zero(d);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vector a = gaussian(rng, d).normalized();
    if (bounded && i == d) a = -sum.normalized();
    if (bounded && i < d) sum += a;
    a *= uniform(rng, 0.5, 2.0);
    normals.row(i) = a.transpose();
    rhs(i) = a.dot(center) - uniform(rng, 0.3, 1.5) * a.norm();
  }
  return Polyhedron(std::move(normals), std::move(rhs), center);
}

/// Axis-aligned box lo <= x_k <= hi, facets ordered x_1 >= lo, x_2 >= lo, ...,
/// then -x_1 >= -hi, ...
inline Polyhedron box(Eigen::Index d, double lo, double hi) {
  Matrix normals(2 * d, d);
  normals << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  Vector rhs(2 * d);
  rhs << Vector::Constant(d, lo), Vector::Constant(d, -hi);
  return Polyhedron(std::move(normals), std::move(rhs));
}

/// Eigenvalues in [lo, hi], centre in [-1, 1]^d, depth c^T A^{-1} c - b in [0.5, 2].
inline Ellipsoid random_ellipsoid(Rng& rng, Eigen::Index d, double lo = 0.3, double hi = 3.0) {
  const Matrix u = random_orthogonal(rng, d);
  const Vector lam = uniform(rng, d, lo, hi);
  Matrix a = u * lam.asDiagonal() * u.transpose();
  a = 0.5 * (a + a.transpose());
  const Vector center = uniform(rng, d, -1.0, 1.0);
  Vector c = a * center;
  const double b = center.dot(a * center) - uniform(rng, 0.5, 2.0);
  return Ellipsoid(std::move(a), std::move(c), b);
}

inline ParaboloidComplement random_paraboloid(Rng& rng, Eigen::Index d, Eigen::Index m) {
  Matrix normals(m, d);
  Vector rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    normals.row(i) = uniform(rng, d, -2.0, 2.0).transpose();
    rhs(i) = uniform(rng, -1.0, 1.0);
  }
  return ParaboloidComplement(std::move(normals), std::move(rhs));
}

/// M = B B^T + 0.5 I with a random linear part.
inline QuadraticForm random_quadratic(Rng& rng, Eigen::Index d) {
  Matrix b(d, d);
  for (Eigen::Index k = 0; k < d; ++k) b.col(k) = gaussian(rng, d);
  Matrix m = b * b.transpose() + 0.5 * Matrix::Identity(d, d);
  m = 0.5 * (m + m.transpose());
  return QuadraticForm(std::move(m), uniform(rng, d, -1.0, 1.0), uniform(rng, -1.0, 1.0));
}

/// A point in the relative interior of facet i: shoot rays from the interior
/// point roughly towards H_i until facet i is the first one hit. nullopt if the
/// facet is never reached (redundant facet).
inline std::optional<Vector> random_facet_point(Rng& rng, const Polyhedron& p, Eigen::Index i,
                                                int attempts = 2000) {
  const Vector& o = p.interior_point();
  const Vector toward = -p.normal(i).normalized();
  for (int k = 0; k < attempts; ++k) {
    const double spread = 0.2 + 3.0 * k / attempts;
    const Vector u = toward + spread * gaussian(rng, p.dimension());
    const double ai_u = p.normal(i).dot(u);
    if (ai_u >= 0.0) continue;
    const double ti = p.slack(i, o) / -ai_u;
    bool first = true;
    for (Eigen::Index j = 0; j < p.num_facets() && first; ++j) {
      if (j == i) continue;
      const double aj_u = p.normal(j).dot(u);
      if (aj_u < 0.0 && p.slack(j, o) / -aj_u <= ti) first = false;
    }
    if (first) {
      Vector y = o + ti * u;
      // Snap exactly onto the hyperplane.
      y -= (p.slack(i, y) / p.normal(i).squaredNorm()) * p.normal(i);
      return y;
    }
  }
  return std::nullopt;
}

}  // namespace liftcut::gen
