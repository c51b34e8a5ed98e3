#pragma once

#include "liftcut/model.hpp"
#include "liftcut/poly_cuts.hpp"
#include "liftcut/qp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace liftcut {

/// (2 x* - alpha a_i)^T x + alpha w + alpha b_i - ||x*||^2 <= q.
struct ParaboloidCut {
  Vector x_coeffs;
  double w_coeff = 0.0;
  double constant = 0.0;
  Vector anchor;
  Eigen::Index facet = 0;
  /// Facet whose lifting bound is smallest at the anchor, if any.
  std::optional<Eigen::Index> binding;
  double alpha = 0.0;

  /// The same inequality in (delta, beta, beta0) form over z = (x, w).
  Cut to_cut() const {
    const auto d = x_coeffs.size();
    Cut c;
    c.delta = 1.0;
    c.beta = Vector(d + 1);
    c.beta.head(d) = 0.5 * x_coeffs;
    c.beta(d) = 0.5 * w_coeff;
    c.beta0 = constant;
    c.origin = provenance::Paraboloid{anchor, facet, alpha};
    return c;
  }

  /// q - (cut right-hand side) at (x, w, q).
  double residual(const Vector& x, double w, double q) const {
    return q - x_coeffs.dot(x) - w_coeff * w - constant;
  }
};

namespace detail {
inline void check_paraboloid_facet(const ParaboloidComplement& r, Eigen::Index i) {
  if (i < 0 || i >= r.num_facets()) {
    throw Error(ErrorCode::InvalidInput, "facet index " + std::to_string(i) + " out of range");
  }
}

/// Nonzero root of alpha (a_i^T x - b_i - (a_j^T x - b_j)) - alpha^2 ||a_i - a_j||^2 / 4,
/// without any precondition on x. Identical normals give +inf or 0.
inline double raw_paraboloid_alpha(const ParaboloidComplement& r, const Vector& x,
                                   Eigen::Index i, Eigen::Index j) {
  const double gap = r.facet_value(i, x) - r.facet_value(j, x);
  const double denom = (r.normal(i) - r.normal(j)).squaredNorm();
  if (denom <= 1e-24) return r.rhs(j) >= r.rhs(i) ? kInf : 0.0;
  return 4.0 * gap / denom;
}
}  // namespace detail

/// Largest lift at an anchor x* on facet i before the cut reaches facet j.
inline double paraboloid_alpha(const ParaboloidComplement& r, const Vector& x, Eigen::Index i,
                               Eigen::Index j) {
  detail::check_paraboloid_facet(r, i);
  detail::check_paraboloid_facet(r, j);
  require_dimension(x.size(), r.dimension(), "paraboloid_alpha anchor");
  if (i == j) throw Error(ErrorCode::SamePairIndex, "paraboloid_alpha needs i != j");
  if ((r.normal(i) - r.normal(j)).norm() <= 1e-12) {
    throw Error(ErrorCode::IdenticalNormals,
                "facets " + std::to_string(i) + " and " + std::to_string(j));
  }
  const double wi = r.facet_value(i, x);
  for (Eigen::Index k = 0; k < r.num_facets(); ++k) {
    if (k != i && r.facet_value(k, x) >= wi - 1e-10) {
      throw Error(ErrorCode::NotRelativeInterior,
                  "anchor not strictly inside facet " + std::to_string(i) + " (facet " +
                      std::to_string(k) + " ties)");
    }
  }
  return detail::raw_paraboloid_alpha(r, x, i, j);
}

/// min over j != i of the lifting bounds at x (never negative).
inline double paraboloid_max_alpha(const ParaboloidComplement& r, const Vector& x,
                                   Eigen::Index i, Eigen::Index* binding = nullptr) {
  detail::check_paraboloid_facet(r, i);
  double best = kInf;
  for (Eigen::Index j = 0; j < r.num_facets(); ++j) {
    if (j == i) continue;
    const double a = detail::raw_paraboloid_alpha(r, x, i, j);
    if (a < best) {
      best = a;
      if (binding) *binding = j;
    }
  }
  return std::max(best, 0.0);
}

inline ParaboloidCut paraboloid_cut(const ParaboloidComplement& r, const Vector& x,
                                   Eigen::Index i, double alpha) {
  require_dimension(x.size(), r.dimension(), "paraboloid_cut anchor");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidInput, "lift must be nonnegative");
  Eigen::Index binding = -1;
  const double cap = paraboloid_max_alpha(r, x, i, &binding);
  if (alpha > cap + tol::kGeometry) {
    throw Error(ErrorCode::AlphaTooLarge,
                "alpha " + std::to_string(alpha) + " exceeds max " + std::to_string(cap));
  }
  ParaboloidCut c;
  c.x_coeffs = 2.0 * x - alpha * r.normal(i);
  c.w_coeff = alpha;
  c.constant = alpha * r.rhs(i) - x.squaredNorm();
  c.anchor = x;
  c.facet = i;
  if (binding >= 0) c.binding = binding;
  c.alpha = alpha;
  return c;
}

/// Minimizer of ||x||^2 - (2 x* - alpha a_i)^T x - alpha w on a_j^T x - w = b_j
/// from the stationarity conditions (nu = alpha). Returns (x, w).
inline std::pair<Vector, double> paraboloid_contact_point(const ParaboloidComplement& r,
                                                          const Vector& anchor, Eigen::Index i,
                                                          Eigen::Index j, double alpha) {
  const Vector x = anchor - 0.5 * alpha * r.normal(i) + 0.5 * alpha * r.normal(j);
  return {x, r.facet_value(j, x)};
}

namespace detail {

/// Per-facet problem in (y, alpha):
///   min -2 y^T x* + ||y||^2 - alpha (w* - a_i^T x* + b_i)
///   s.t. 4 (a_i - a_j)^T y - ||a_i - a_j||^2 alpha >= 4 (b_i - b_j), alpha >= 0.
inline QpProblem paraboloid_separation_qp(const ParaboloidComplement& r, const Vector& x,
                                          double w, Eigen::Index i) {
  const auto d = r.dimension();
  QpProblem qp = QpProblem::with_variables(d + 1);
  qp.hessian.topLeftCorner(d, d) = 2.0 * Matrix::Identity(d, d);
  qp.linear.head(d) = -2.0 * x;
  qp.linear(d) = -(w - r.facet_value(i, x));
  Vector row = Vector::Zero(d + 1);
  for (Eigen::Index j = 0; j < r.num_facets(); ++j) {
    if (j == i) continue;
    const Vector diff = r.normal(i) - r.normal(j);
    const double denom = diff.squaredNorm();
    row.setZero();
    if (denom <= 1e-24) {
      if (r.rhs(j) >= r.rhs(i)) continue;
      // Facet i never attains the envelope: leave an infeasible row.
      row(d) = 0.0;
      qp.add_inequality(row, 1.0);
      continue;
    }
    row.head(d) = 4.0 * diff;
    row(d) = -denom;
    qp.add_inequality(row, 4.0 * (r.rhs(i) - r.rhs(j)));
  }
  row.setZero();
  row(d) = 1.0;
  qp.add_inequality(row, 0.0);
  return qp;
}

}  // namespace detail

/// Most violated paraboloid cut at (x*, w*, q*) over all facets.
inline SeparationReport separate_paraboloid(const ParaboloidComplement& r, const Vector& x,
                                            double w, double q, const QpOptions& opts = {}) {
  require_dimension(x.size(), r.dimension(), "separate_paraboloid query");
  const auto d = r.dimension();
  SeparationReport rep;
  rep.point = Vector(d + 1);
  rep.point << x, w;
  rep.q = q;
  for (Eigen::Index i = 0; i < r.num_facets(); ++i) {
    const auto out = solve_qp(detail::paraboloid_separation_qp(r, x, w, i), opts);
    rep.diagnostics.iterations += out.iterations;
    if (out.status == SolveStatus::Infeasible) {
      rep.diagnostics.skipped_facets.push_back(i);
      rep.diagnostics.notes.push_back("facet " + std::to_string(i) + ": empty");
      continue;
    }
    if (out.status == SolveStatus::Unbounded) {
      rep.diagnostics.skipped_facets.push_back(i);
      rep.diagnostics.notes.push_back("facet " + std::to_string(i) + ": UnboundedDirection");
      continue;
    }
    if (out.status != SolveStatus::Optimal) {
      throw Error(ErrorCode::SolverFailure,
                  "facet " + std::to_string(i) + ": QP stopped with " + to_string(out.status));
    }
    rep.diagnostics.kkt_residual = std::max(rep.diagnostics.kkt_residual, out.kkt.max());
    const Vector y = out.primal.head(d);
    const double alpha = std::clamp(out.primal(d), 0.0, paraboloid_max_alpha(r, y, i));
    const Cut cut = paraboloid_cut(r, y, i, alpha).to_cut();
    const double v = cut_violation(cut, rep.point, q);
    if (!rep.cut || v > rep.violation + 1e-12 * (1.0 + std::abs(rep.violation))) {
      rep.cut = cut;
      rep.violation = v;
    }
  }
  return rep;
}

}  // namespace liftcut
