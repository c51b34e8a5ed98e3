#pragma once

#include "liftcut/fixed_rho.hpp"
#include "liftcut/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace liftcut {

/// S-lemma certificate that B(mu, sqrt(rho)) sits inside an ellipsoid.
struct ContainmentCertificate {
  /// Multiplier on the scalarized condition, tau = 1 / theta. +inf at rho = 0.
  double tau = kInf;
  /// U^T (c - A mu).
  Vector v;
  /// y_j >= v_j^2 / (tau - lambda_j).
  Vector bounds;
  /// -sum_j y_j - mu^T A mu + 2 c^T mu - b - rho tau.
  double slack = 0.0;
};

/// sup over tau > lambda_max of g(mu, tau); nonnegative iff the ball is inside E.
/// The inner problem is concave in tau; its stationarity equation
/// sum_j v_j^2 / (tau - lambda_j)^2 = rho is solved by bisection.
inline ContainmentCertificate containment_margin(const Ellipsoid& e, const Ball& ball) {
  e.require_bounded();
  require_dimension(ball.center.size(), e.dimension(), "containment_margin ball");
  const ContainmentFunction g(e, ball.rho);
  ContainmentCertificate cert;
  cert.v = g.transformed(ball.center);
  cert.bounds = Vector::Zero(cert.v.size());
  const Vector& lam = e.eigenvalues();
  const double lmax = e.lambda_max();
  const double base = g.base(ball.center);

  if (ball.rho == 0.0) {
    cert.tau = kInf;
    cert.slack = base;
    return cert;
  }

  const double vnorm = cert.v.norm();
  const double vtol = 1e-13 * (1.0 + vnorm);
  auto slope = [&](double tau) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      if (std::abs(cert.v(j)) <= vtol && tau - lam(j) <= 0.0) continue;
      const double r = cert.v(j) / (tau - lam(j));
      s += r * r;
    }
    return s - ball.rho;
  };

  bool boundary = true;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lmax - lam(j) <= 0.0 && std::abs(cert.v(j)) > vtol) boundary = false;
  }
  double tau = lmax;
  if (!(boundary && slope(lmax) <= 0.0)) {
    double lo = lmax;
    double hi = lmax + vnorm / std::sqrt(ball.rho) + 1e-300;
    while (slope(hi) > 0.0) hi = lmax + 2.0 * (hi - lmax);
    for (int k = 0; k < 400 && hi - lo > 4e-16 * std::abs(hi); ++k) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    tau = hi;
  }
  cert.tau = tau;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (std::abs(cert.v(j)) <= vtol && tau - lam(j) <= 0.0) continue;
    cert.bounds(j) = cert.v(j) * cert.v(j) / (tau - lam(j));
    sum += cert.bounds(j);
  }
  cert.slack = -sum + base - ball.rho * tau;
  return cert;
}

struct FixedRhoResult {
  bool feasible = false;
  /// rho - ||x* - mu||^2 - q* + ||x*||^2, -inf when infeasible.
  double theta = -kInf;
  Vector mu;
  ContainmentCertificate certificate;
  SolveOutcome solve;
};

inline bool fixed_rho_feasible(const Ellipsoid& e, double rho) {
  e.require_bounded();
  return e.depth() - rho * e.lambda_max() >= -1e-12 * std::max(1.0, e.depth());
}

/// Theta(rho): best violation at (x*, q*) among ball cuts of squared radius rho.
inline FixedRhoResult fixed_rho_separate(const Ellipsoid& e, const Vector& x, double q,
                                         double rho, const BarrierOptions& opts = {}) {
  FixedRhoResult r;
  r.solve = solve_fixed_rho(e, x, rho, opts);
  if (r.solve.status == SolveStatus::Infeasible) return r;
  if (r.solve.status != SolveStatus::Optimal) {
    throw Error(ErrorCode::SolverFailure, "fixed-rho solve failed at rho = " + std::to_string(rho));
  }
  r.feasible = true;
  r.mu = r.solve.primal.head(e.dimension());
  r.theta = rho - (x - r.mu).squaredNorm() - q + x.squaredNorm();
  r.certificate = containment_margin(e, Ball(r.mu, rho));
  return r;
}

/// Largest rho admitting an inscribed ball, by bisection on fixed-rho feasibility.
inline double max_inscribed_rho(const Ellipsoid& e, double rel_tol = 1e-9) {
  e.require_bounded();
  double lo = 0.0;
  double hi = 1.0;
  while (fixed_rho_feasible(e, hi)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (fixed_rho_feasible(e, mid) ? lo : hi) = mid;
  }
  return lo;
}

struct EllipsoidSearchOptions {
  /// Uniform pre-scan intervals used to bracket the golden-section search.
  int scan_intervals = 8;
  /// Stop once the bracket is below this fraction of rho_max.
  double bracket_tol = 1e-8;
  BarrierOptions barrier;
};

/// Maximizes Theta over [0, rho_max] with golden-section search and returns the
/// ball cut of the best inscribed ball, or the linearization at x* if stronger.
inline SeparationReport separate_ellipsoid(const Ellipsoid& e, const Vector& x, double q,
                                           const EllipsoidSearchOptions& opts = {}) {
  e.require_bounded();
  require_dimension(x.size(), e.dimension(), "separate_ellipsoid query");
  const double rho_max = max_inscribed_rho(e);

  std::map<double, FixedRhoResult> cache;
  int newton = 0;
  auto theta = [&](double rho) -> const FixedRhoResult& {
    auto it = cache.find(rho);
    if (it != cache.end()) return it->second;
    auto res = fixed_rho_separate(e, x, q, rho, opts.barrier);
    newton += res.solve.iterations;
    return cache.emplace(rho, std::move(res)).first->second;
  };

  const int k = std::max(2, opts.scan_intervals);
  int best_k = 0;
  for (int i = 0; i <= k; ++i) {
    const double rho = rho_max * i / k;
    if (theta(rho).theta > theta(rho_max * best_k / k).theta) best_k = i;
  }
  double a = rho_max * std::max(0, best_k - 1) / k;
  double b = rho_max * std::min(k, best_k + 1) / k;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  while (b - a > opts.bracket_tol * rho_max) {
    if (theta(c).theta >= theta(d).theta) {
      b = d;
      d = c;
      c = b - inv_phi * (b - a);
    } else {
      a = c;
      c = d;
      d = a + inv_phi * (b - a);
    }
  }
  theta(0.5 * (a + b));

  const FixedRhoResult* best = nullptr;
  double best_rho = 0.0;
  for (const auto& [rho, res] : cache) {
    if (!res.feasible) continue;
    if (!best || res.theta > best->theta) {
      best = &res;
      best_rho = rho;
    }
  }

  SeparationReport rep;
  rep.point = x;
  rep.q = q;
  rep.diagnostics.evaluations = static_cast<int>(cache.size());
  rep.diagnostics.iterations = newton;
  if (best) {
    const Ball ball(best->mu, best_rho);
    rep.cut = ball_cut(ball);
    rep.violation = cut_violation(*rep.cut, x, q);
    rep.certificate = ball;
    rep.diagnostics.kkt_residual = best->solve.kkt.max();
  }
  if (e.in_complement(x)) {
    const Cut lin = linearization_cut(x);
    const double v = cut_violation(lin, x, q);
    if (!rep.cut || v > rep.violation + 1e-12 * (1.0 + std::abs(rep.violation))) {
      rep.cut = lin;
      rep.violation = v;
      rep.certificate = Ball(x, 0.0);
    }
  }
  return rep;
}

}  // namespace liftcut
