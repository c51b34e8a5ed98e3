#pragma once

// Brute-force verification oracles. Nothing here calls into the cut
// constructors or the S-lemma machinery; the only shared dependencies are the
// region types and the generic QP solver (used for irredundancy LPs).

#include "liftcut/model.hpp"
#include "liftcut/qp.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace liftcut::oracle {

struct ContainmentVerdict {
  bool contained = true;
  /// Violated only: a point of the ball that lies outside P.
  Vector witness;
  /// Polyhedron: smallest (distance - radius). Ellipsoid: max of the
  /// ellipsoid function over the ball.
  double worst = 0.0;
};

/// Exact per-facet distance test.
inline ContainmentVerdict check_ball_containment(const Polyhedron& p, const Ball& ball,
                                                 double tolerance = tol::kGeometry) {
  const double r = std::sqrt(ball.rho);
  ContainmentVerdict v;
  v.worst = kInf;
  Eigen::Index worst_facet = 0;
  for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
    const double ai_norm = p.normals().row(i).norm();
    const double dist = (p.normals().row(i).dot(ball.center) - p.rhs()(i)) / ai_norm;
    if (dist - r < v.worst) {
      v.worst = dist - r;
      worst_facet = i;
    }
  }
  if (v.worst < -tolerance) {
    v.contained = false;
    const Vector n = p.normals().row(worst_facet).transpose() / p.normals().row(worst_facet).norm();
    v.witness = ball.center - r * n;
  }
  return v;
}

struct SphereSearchOptions {
  int starts = 64;
  int max_iterations = 500;
  std::uint64_t seed = 7;
};

/// Maximizes the ellipsoid function over the ball's surface by multi-start
/// projected gradient ascent; exact when A is a multiple of the identity.
inline ContainmentVerdict check_ball_containment(const Ellipsoid& e, const Ball& ball,
                                                 double tolerance = 1e-12,
                                                 const SphereSearchOptions& opts = {}) {
  const auto d = e.dimension();
  const Matrix& a = e.matrix();
  const double r = std::sqrt(ball.rho);
  const Vector lin = a * ball.center - e.linear();
  ContainmentVerdict v;
  v.worst = e.value(ball.center);
  Vector best = ball.center;

  auto consider = [&](const Vector& u) {
    const Vector x = ball.center + r * u;
    const double val = e.value(x);
    if (val > v.worst) {
      v.worst = val;
      best = x;
    }
  };

  const double diag = a.trace() / static_cast<double>(d);
  if (r > 0.0 && (a - diag * Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + diag)) {
    // A = lambda I: the farthest point from the centre c / lambda.
    Vector dir = diag > 0.0 ? Vector(ball.center - e.linear() / diag) : Vector(-e.linear());
    if (dir.norm() == 0.0) dir = Vector::Unit(d, 0);
    consider(dir.normalized());
  }

  if (r > 0.0) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    std::vector<Vector> starts;
    if (lin.norm() > 0.0) starts.push_back(lin.normalized());
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    for (Eigen::Index k = 0; k < d; ++k) {
      starts.push_back(es.eigenvectors().col(k));
      starts.push_back(-es.eigenvectors().col(k));
    }
    while (static_cast<int>(starts.size()) < opts.starts) {
      Vector u(d);
      for (Eigen::Index k = 0; k < d; ++k) u(k) = normal(rng);
      starts.push_back(u.normalized());
    }
    for (Vector u : starts) {
      for (int it = 0; it < opts.max_iterations; ++it) {
        // Ascent for a convex function on the sphere: u <- grad / ||grad||.
        const Vector grad = r * (a * u) + lin;
        if (grad.norm() == 0.0) break;
        const Vector next = grad.normalized();
        const double change = (next - u).norm();
        u = next;
        if (change < 1e-15) break;
      }
      consider(u);
    }
  }
  if (v.worst > tolerance) {
    v.contained = false;
    v.witness = best;
  }
  return v;
}

/// Largest alpha keeping B(y + alpha a_i, alpha ||a_i||) inside P, by bisection
/// on the polyhedral containment test. +inf if alpha = 1e9 still fits.
inline double brute_force_alpha(const Polyhedron& p, const Vector& y_in, Eigen::Index i) {
  const Vector ai = p.normals().row(i).transpose();
  const double ai_norm = ai.norm();
  if (std::abs((ai.dot(y_in) - p.rhs()(i)) / ai_norm) > tol::kGeometry) {
    throw Error(ErrorCode::NotOnFacet, "brute_force_alpha anchor is off its hyperplane");
  }
  for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
    if ((p.normals().row(j).dot(y_in) - p.rhs()(j)) / p.normals().row(j).norm() < -tol::kGeometry) {
      throw Error(ErrorCode::NotOnFacet, "brute_force_alpha anchor is outside P");
    }
  }
  const Vector y = y_in - ((ai.dot(y_in) - p.rhs()(i)) / (ai_norm * ai_norm)) * ai;
  auto fits = [&](double alpha) {
    const Vector center = y + alpha * ai;
    const double radius = alpha * ai_norm;
    const double slack = 1e-13 * (1.0 + radius + center.norm());
    return check_ball_containment(p, Ball(center, radius * radius), slack).contained;
  };
  if (fits(1e9)) return kInf;
  double lo = 0.0;
  double hi = 1.0;
  while (fits(hi)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-13 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (fits(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct ValidityOptions {
  int budget = 10000;
  int rays = 100;
  std::uint64_t seed = 42;
  double residual_tol = tol::kCutResidual;
};

struct ValidityVerdict {
  bool valid = true;
  /// CounterExample only: the sampled point and its residual at q = ||x||^2.
  Vector witness;
  double residual = kInf;
  int samples = 0;
};

namespace detail {

inline double residual_at(const Cut& cut, const Vector& z, Eigen::Index quad_dim) {
  return cut.delta * z.head(quad_dim).squaredNorm() - 2.0 * cut.beta.dot(z) - cut.beta0;
}

inline Vector random_direction(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vector u(d);
  do {
    for (Eigen::Index k = 0; k < d; ++k) u(k) = normal(rng);
  } while (u.norm() == 0.0);
  return u.normalized();
}

inline Vector random_in_ball(std::mt19937_64& rng, const Vector& c, double r) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double s = r * std::pow(unif(rng), 1.0 / static_cast<double>(c.size()));
  return c + s * random_direction(rng, c.size());
}

inline Vector random_in_box(std::mt19937_64& rng, const Vector& c, double half) {
  std::uniform_real_distribution<double> unif(-half, half);
  Vector x(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) x(k) = c(k) + unif(rng);
  return x;
}

class Tally {
 public:
  Tally(const Cut& cut, Eigen::Index quad_dim) : cut_(cut), quad_dim_(quad_dim) {}
  void add(const Vector& z) {
    ++verdict_.samples;
    const double r = residual_at(cut_, z, quad_dim_);
    if (r < verdict_.residual) {
      verdict_.residual = r;
      verdict_.witness = z;
    }
  }
  ValidityVerdict finish(double tol) {
    verdict_.valid = !(verdict_.residual < -tol);
    if (verdict_.valid) verdict_.witness = Vector();
    return verdict_;
  }
  int samples() const { return verdict_.samples; }

 private:
  const Cut& cut_;
  Eigen::Index quad_dim_;
  ValidityVerdict verdict_;
};

/// Centre and radius of the region the cut removes from the paraboloid; falls
/// back to (fallback, 1) when delta = 0 or nothing is removed.
inline std::pair<Vector, double> violating_ball(const Cut& cut, const Vector& fallback) {
  if (cut.delta > 0.0) {
    const Vector c = cut.beta / cut.delta;
    const double r2 = c.squaredNorm() + cut.beta0 / cut.delta;
    if (r2 > 0.0) return {c, std::sqrt(r2)};
    return {c, 1.0};
  }
  return {fallback, 1.0};
}

/// Leading coefficients of residual(p + t u) = a2 t^2 + a1 t + a0.
inline void check_ray(const Cut& cut, const Vector& p, const Vector& u, Eigen::Index quad_dim,
                      Tally& tally, auto&& in_complement) {
  const double a2 = cut.delta * u.head(quad_dim).squaredNorm();
  const double a1 = 2.0 * cut.delta * p.head(quad_dim).dot(u.head(quad_dim)) - 2.0 * cut.beta.dot(u);
  const double a0 = residual_at(cut, p, quad_dim);
  if (a2 > 1e-12 || a1 >= -1e-12) return;
  // The residual decreases linearly along the ray: step out far enough.
  const double t = (std::max(a0, 0.0) + 1.0) / -a1 + 1.0;
  const Vector z = p + t * u;
  if (in_complement(z)) tally.add(z);
}

}  // namespace detail

/// Samples the complement of int(P) and checks the cut at q = ||x||^2.
/// Half the budget is boundary-biased: points of the cut's violating ball are
/// projected onto the boundary of P. Also tests `rays` asymptotic directions.
inline ValidityVerdict check_cut_validity(const Polyhedron& p, const Cut& cut,
                                          const ValidityOptions& opts = {}) {
  require_dimension(cut.dimension(), p.dimension(), "check_cut_validity");
  const auto d = p.dimension();
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, p.num_facets() - 1);
  auto [center, radius] = detail::violating_ball(cut, p.interior_point());
  const double box = 10.0 * (1.0 + std::max({center.norm(), radius, p.interior_point().norm()}));
  auto complement = [&p](const Vector& x) { return p.in_complement(x); };
  auto project = [&p](const Vector& x, Eigen::Index k) -> Vector {
    const Vector a = p.normals().row(k).transpose();
    return x - ((a.dot(x) - p.rhs()(k)) / a.squaredNorm()) * a;
  };
  detail::Tally tally(cut, d);
  // Nearest point of each hyperplane to the ball centre: the exact minimizer of
  // the residual over that facet's closed halfspace when delta > 0.
  for (Eigen::Index k = 0; k < p.num_facets(); ++k) tally.add(project(center, k));

  const int quarter = opts.budget / 4;
  for (int attempts = 0; tally.samples() < quarter && attempts < 50 * quarter; ++attempts) {
    const Vector x = detail::random_in_box(rng, center, box);
    if (complement(x)) tally.add(x);
  }
  const int half = opts.budget / 2;
  for (int attempts = 0; tally.samples() < half && attempts < 50 * quarter; ++attempts) {
    const Vector x = detail::random_in_ball(rng, center, radius);
    if (complement(x)) tally.add(x);
  }
  while (tally.samples() < opts.budget) {
    const Vector x = tally.samples() % 2 == 0 ? detail::random_in_ball(rng, center, radius)
                                              : detail::random_in_box(rng, center, box);
    tally.add(project(x, pick(rng)));
  }
  for (int k = 0; k < opts.rays; ++k) {
    const Eigen::Index f = pick(rng);
    const Vector base = project(detail::random_in_ball(rng, center, radius), f);
    Vector u = detail::random_direction(rng, d);
    if (p.normals().row(f).dot(u) > 0.0) u = -u;
    detail::check_ray(cut, base, u, d, tally, complement);
  }
  return tally.finish(opts.residual_tol);
}

inline ValidityVerdict check_cut_validity(const Ellipsoid& e, const Cut& cut,
                                          const ValidityOptions& opts = {}) {
  require_dimension(cut.dimension(), e.dimension(), "check_cut_validity");
  const auto d = e.dimension();
  std::mt19937_64 rng(opts.seed);
  const Vector mid = e.center();
  const double semi = std::sqrt(e.depth() / e.eigenvalues().minCoeff());
  auto [center, radius] = detail::violating_ball(cut, mid);
  const double box = 10.0 * (1.0 + std::max({center.norm(), radius, mid.norm() + semi}));
  auto complement = [&e](const Vector& x) { return e.in_complement(x); };
  // Radial projection from the centre onto the boundary.
  auto to_boundary = [&](const Vector& x) -> Vector {
    Vector dir = x - mid;
    if (dir.norm() == 0.0) dir = detail::random_direction(rng, d);
    const double t = std::sqrt(e.depth() / dir.dot(e.matrix() * dir));
    Vector b = mid + t * dir;
    if (!complement(b)) b = mid + t * (1.0 + 1e-15) * dir;
    return b;
  };
  detail::Tally tally(cut, d);

  const int quarter = opts.budget / 4;
  for (int attempts = 0; tally.samples() < quarter && attempts < 50 * quarter; ++attempts) {
    const Vector x = detail::random_in_box(rng, center, box);
    if (complement(x)) tally.add(x);
  }
  const int half = opts.budget / 2;
  for (int attempts = 0; tally.samples() < half && attempts < 50 * quarter; ++attempts) {
    const Vector x = detail::random_in_ball(rng, center, radius);
    if (complement(x)) tally.add(x);
  }
  while (tally.samples() < opts.budget) {
    const Vector x = tally.samples() % 2 == 0 ? detail::random_in_ball(rng, center, radius)
                                              : detail::random_in_box(rng, center, box);
    tally.add(to_boundary(x));
  }
  for (int k = 0; k < opts.rays; ++k) {
    const Vector base = to_boundary(detail::random_in_ball(rng, center, radius));
    detail::check_ray(cut, base, detail::random_direction(rng, d), d, tally, complement);
  }
  return tally.finish(opts.residual_tol);
}

/// Points are z = (x, w); the quadratic acts on x only.
inline ValidityVerdict check_cut_validity(const ParaboloidComplement& r, const Cut& cut,
                                          const ValidityOptions& opts = {}) {
  const auto d = r.dimension();
  require_dimension(cut.dimension(), d + 1, "check_cut_validity");
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, r.num_facets() - 1);
  std::exponential_distribution<double> depth(1.0);
  auto complement = [&r, d](const Vector& z) { return r.in_complement(z.head(d), z(d)); };

  // On the piece w = a_j^T x - b_j the cut removes a ball in x.
  std::vector<std::pair<Vector, double>> pieces;
  double scale = 1.0;
  for (Eigen::Index j = 0; j < r.num_facets(); ++j) {
    Vector c = r.normal(j);
    double rad = 1.0;
    if (cut.delta > 0.0) {
      c = (cut.beta.head(d) + cut.beta(d) * r.normal(j)) / cut.delta;
      const double r2 = c.squaredNorm() + (cut.beta0 - 2.0 * cut.beta(d) * r.rhs(j)) / cut.delta;
      rad = r2 > 0.0 ? std::sqrt(r2) : 1.0;
    }
    pieces.emplace_back(c, rad);
    scale = std::max({scale, c.norm(), rad, std::abs(r.rhs(j))});
  }
  const double box = 10.0 * scale;
  auto lift = [&](const Vector& x, double below) {
    Vector z(d + 1);
    z << x, r.envelope(x) - below;
    return z;
  };
  detail::Tally tally(cut, d);
  while (tally.samples() < opts.budget) {
    const auto& [c, rad] = pieces[static_cast<std::size_t>(pick(rng))];
    const bool near = tally.samples() % 2 == 0;
    const Vector x = near ? detail::random_in_ball(rng, c, 1.5 * rad)
                          : detail::random_in_box(rng, c, box);
    const double below = (tally.samples() % 4 < 2) ? 0.0 : scale * depth(rng);
    tally.add(lift(x, below));
  }
  for (int k = 0; k < opts.rays; ++k) {
    const auto& [c, rad] = pieces[static_cast<std::size_t>(pick(rng))];
    const Vector base = lift(detail::random_in_ball(rng, c, rad), 0.0);
    Vector u(d + 1);
    if (k % 2 == 0) {
      u.setZero();
      u(d) = -1.0;
    } else {
      u = detail::random_direction(rng, d + 1);
      const double top = (r.normals() * u.head(d)).maxCoeff();
      if (u(d) > top) u(d) = top - std::abs(u(d));
    }
    detail::check_ray(cut, base, u, d, tally, complement);
  }
  return tally.finish(opts.residual_tol);
}

inline ValidityVerdict check_cut_validity(const Region& region, const Cut& cut,
                                          const ValidityOptions& opts = {}) {
  return std::visit([&](const auto& r) { return check_cut_validity(r, cut, opts); }, region);
}

enum class FacetStatus { FacetDefining, Redundant };

/// Facet i is facet-defining iff some y on H_i has a_j^T y > b_j + 1e-8 for all
/// j != i: max t s.t. a_i^T y = b_i, a_j^T y - b_j >= t, t <= 1.
inline std::vector<FacetStatus> check_irredundancy(const Polyhedron& p) {
  const auto d = p.dimension();
  std::vector<FacetStatus> out;
  for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
    QpProblem lp = QpProblem::with_variables(d + 1);
    lp.linear(d) = -1.0;
    Vector row = Vector::Zero(d + 1);
    row.head(d) = p.normal(i);
    lp.add_equality(row, p.rhs(i));
    for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
      if (j == i) continue;
      row.head(d) = p.normal(j);
      row(d) = -1.0;
      lp.add_inequality(row, p.rhs(j));
    }
    row.setZero();
    row(d) = -1.0;
    lp.add_inequality(row, -1.0);
    const auto sol = solve_qp(lp, QpOptions{500, 1e-9});
    const bool defining = sol.status == SolveStatus::Optimal && sol.primal(d) > 1e-8;
    out.push_back(defining ? FacetStatus::FacetDefining : FacetStatus::Redundant);
  }
  return out;
}

struct ConcavityVerdict {
  bool concave = true;
  /// Largest second difference seen.
  double worst = -kInf;
  /// First offending interior grid index when not concave.
  std::size_t index = 0;
};

/// Second differences 2 (chord - f) at each interior grid point must stay
/// <= slack; on a uniform grid this is f[k-1] - 2 f[k] + f[k+1].
inline ConcavityVerdict probe_concavity(const std::vector<double>& grid,
                                        const std::vector<double>& values, double slack = 1e-6) {
  if (grid.size() != values.size() || grid.size() < 3) {
    throw Error(ErrorCode::InvalidInput, "probe_concavity needs >= 3 matching samples");
  }
  ConcavityVerdict v;
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    const double h0 = grid[k] - grid[k - 1];
    const double h1 = grid[k + 1] - grid[k];
    if (!(h0 > 0.0 && h1 > 0.0)) throw Error(ErrorCode::InvalidInput, "grid must increase");
    const double chord = (h1 * values[k - 1] + h0 * values[k + 1]) / (h0 + h1);
    const double second = 2.0 * (chord - values[k]);
    if (second > v.worst) v.worst = second;
    if (second > slack && v.concave) {
      v.concave = false;
      v.index = k;
    }
  }
  return v;
}

template <std::invocable<double> F>
ConcavityVerdict probe_concavity(F&& f, const std::vector<double>& grid, double slack = 1e-6) {
  std::vector<double> values;
  values.reserve(grid.size());
  for (double x : grid) values.push_back(f(x));
  return probe_concavity(grid, values, slack);
}

struct KktAudit {
  KktResiduals residuals;
  bool passed = false;
  std::string detail;
};

/// Re-derives optimality (or the infeasibility / unboundedness certificate) of
/// a QP outcome with plain loops, independent of the solver's own bookkeeping.
inline KktAudit audit_kkt(const QpProblem& p, const SolveOutcome& out, double tol = tol::kKkt) {
  KktAudit a;
  const auto n = p.num_variables();
  const auto me = p.eq_matrix.rows();
  const auto mi = p.ineq_matrix.rows();
  auto row_dot = [](const Matrix& m, Eigen::Index r, const Vector& z) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < m.cols(); ++k) s += m(r, k) * z(k);
    return s;
  };
  if (out.status == SolveStatus::Optimal) {
    const Vector& z = out.primal;
    if (z.size() != n || out.eq_duals.size() != me || out.ineq_duals.size() != mi) {
      a.detail = "optimal: wrong sizes";
      return a;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      double s = p.linear(k);
      for (Eigen::Index l = 0; l < n; ++l) s += p.hessian(k, l) * z(l);
      for (Eigen::Index r = 0; r < me; ++r) s -= p.eq_matrix(r, k) * out.eq_duals(r);
      for (Eigen::Index r = 0; r < mi; ++r) s -= p.ineq_matrix(r, k) * out.ineq_duals(r);
      a.residuals.stationarity = std::max(a.residuals.stationarity, std::abs(s));
    }
    for (Eigen::Index r = 0; r < me; ++r) {
      a.residuals.primal = std::max(a.residuals.primal, std::abs(row_dot(p.eq_matrix, r, z) - p.eq_rhs(r)));
    }
    for (Eigen::Index r = 0; r < mi; ++r) {
      const double slack = row_dot(p.ineq_matrix, r, z) - p.ineq_rhs(r);
      a.residuals.primal = std::max(a.residuals.primal, -slack);
      a.residuals.dual = std::max(a.residuals.dual, -out.ineq_duals(r));
      a.residuals.complementarity =
          std::max(a.residuals.complementarity, std::abs(slack * out.ineq_duals(r)));
    }
    a.passed = a.residuals.max() <= tol;
    a.detail = "kkt";
    return a;
  }
  if (out.status == SolveStatus::Infeasible) {
    // lambda >= 0, C^T lambda + E^T nu = 0, c^T lambda + e^T nu > 0.
    if (out.ray.size() != mi + me) {
      a.detail = "farkas: certificate missing";
      return a;
    }
    const Vector lam = out.ray.head(mi);
    const Vector nu = out.ray.tail(me);
    double comb = 0.0;
    double bound = 0.0;
    double neg = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < mi; ++r) s += p.ineq_matrix(r, k) * lam(r);
      for (Eigen::Index r = 0; r < me; ++r) s += p.eq_matrix(r, k) * nu(r);
      comb = std::max(comb, std::abs(s));
    }
    for (Eigen::Index r = 0; r < mi; ++r) {
      bound += p.ineq_rhs(r) * lam(r);
      neg = std::max(neg, -lam(r));
    }
    for (Eigen::Index r = 0; r < me; ++r) bound += p.eq_rhs(r) * nu(r);
    a.residuals.stationarity = comb;
    a.residuals.dual = neg;
    a.passed = comb <= 1e-7 && neg <= 1e-9 && bound > 1e-9;
    a.detail = "farkas";
    return a;
  }
  if (out.status == SolveStatus::Unbounded) {
    // E d = 0, C d >= 0, H d = 0, g^T d < 0.
    const Vector& dir = out.ray;
    if (dir.size() != n) {
      a.detail = "ray: certificate missing";
      return a;
    }
    double worst = 0.0;
    for (Eigen::Index r = 0; r < me; ++r) worst = std::max(worst, std::abs(row_dot(p.eq_matrix, r, dir)));
    for (Eigen::Index r = 0; r < mi; ++r) worst = std::max(worst, -row_dot(p.ineq_matrix, r, dir));
    for (Eigen::Index r = 0; r < n; ++r) worst = std::max(worst, std::abs(row_dot(p.hessian, r, dir)));
    a.residuals.primal = worst;
    a.passed = worst <= 1e-9 && p.linear.dot(dir) < -1e-12;
    a.detail = "ray";
    return a;
  }
  a.detail = "iteration limit";
  return a;
}

}  // namespace liftcut::oracle
