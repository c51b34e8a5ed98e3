#pragma once

#include "liftcut/model.hpp"
#include "liftcut/qp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

namespace liftcut {

/// alpha <= slope^T y + intercept for anchors y on facet i, or no bound at all.
struct LiftingBound {
  bool bounded = false;
  Vector slope;
  double intercept = 0.0;

  double operator()(const Vector& y) const { return bounded ? slope.dot(y) + intercept : kInf; }
};

namespace detail {
/// ||a_i|| ||a_j|| - a_j^T a_i, zero iff a_j is a positive multiple of a_i.
inline double lifting_denominator(const Polyhedron& p, Eigen::Index i, Eigen::Index j) {
  return p.normal_norm(i) * p.normal_norm(j) - p.normals().row(j).dot(p.normals().row(i));
}

inline void check_facet_index(const Polyhedron& p, Eigen::Index i) {
  if (i < 0 || i >= p.num_facets()) {
    throw Error(ErrorCode::InvalidInput, "facet index " + std::to_string(i) + " out of range");
  }
}
}  // namespace detail

/// Largest lift of an anchor y on facet i before the ball
/// B(y + alpha a_i, alpha ||a_i||) crosses H_j:
///   a_j^T y - b_j >= alpha (||a_i|| ||a_j|| - a_j^T a_i).
inline LiftingBound lifting_bound(const Polyhedron& p, Eigen::Index i, Eigen::Index j) {
  detail::check_facet_index(p, i);
  detail::check_facet_index(p, j);
  if (i == j) throw Error(ErrorCode::SamePairIndex, "lifting_bound needs i != j");
  const double denom = detail::lifting_denominator(p, i, j);
  if (denom <= 1e-12 * p.normal_norm(i) * p.normal_norm(j)) return {};
  return {true, p.normal(j) / denom, -p.rhs(j) / denom};
}

/// Geometry of the wedge formed by facets i and j (non-parallel pairs only).
struct PairGeometry {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  /// Unit vector in H_i, orthogonal to H_ij, pointing into a_j^T x >= b_j.
  Vector omega;
  /// Half of the angle between omega_ij and omega_ji.
  double half_angle = 0.0;
  /// Projection of the origin onto H_i.
  Vector origin_on_facet;
  /// Projection of origin_on_facet onto H_ij.
  Vector edge_anchor;
  LiftingBound bound;

  /// The lift expressed through the wedge angle:
  /// tan(phi) / ||a_i|| * omega^T (y - N_i + O_i).
  double tangent_form(const Vector& y, double normal_norm) const {
    return std::tan(half_angle) / normal_norm * omega.dot(y - edge_anchor + origin_on_facet);
  }
};

class FacetGeometry {
 public:
  explicit FacetGeometry(const Polyhedron& p) : m_(p.num_facets()) {
    pairs_.resize(static_cast<std::size_t>(m_ * m_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      for (Eigen::Index j = 0; j < m_; ++j) {
        if (i == j) continue;
        const double cosine = p.normals().row(i).dot(p.normals().row(j)) /
                              (p.normal_norm(i) * p.normal_norm(j));
        if (std::abs(cosine) >= 1.0 - 1e-12) continue;
        pairs_[index(i, j)] = build(p, i, j);
      }
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      for (Eigen::Index j = i + 1; j < m_; ++j) {
        auto& ij = pairs_[index(i, j)];
        auto& ji = pairs_[index(j, i)];
        if (!ij || !ji) continue;
        const double c = std::clamp(ij->omega.dot(ji->omega), -1.0, 1.0);
        ij->half_angle = ji->half_angle = 0.5 * std::acos(c);
      }
    }
  }

  Eigen::Index num_facets() const { return m_; }
  const PairGeometry* pair(Eigen::Index i, Eigen::Index j) const {
    const auto& g = pairs_[index(i, j)];
    return g ? &*g : nullptr;
  }

  /// Orthonormal basis of { x : a_i^T x = a_j^T x = 0 }.
  static Matrix edge_directions(const Polyhedron& p, Eigen::Index i, Eigen::Index j) {
    Matrix rows(2, p.dimension());
    rows.row(0) = p.normals().row(i);
    rows.row(1) = p.normals().row(j);
    return detail::null_space(rows, p.dimension());
  }

 private:
  std::size_t index(Eigen::Index i, Eigen::Index j) const {
    return static_cast<std::size_t>(i * m_ + j);
  }

  static PairGeometry build(const Polyhedron& p, Eigen::Index i, Eigen::Index j) {
    PairGeometry g;
    g.i = i;
    g.j = j;
    const Vector ai = p.normal(i);
    const Vector aj = p.normal(j);
    const Vector w = aj - (aj.dot(ai) / ai.squaredNorm()) * ai;
    g.omega = w / w.norm();
    g.origin_on_facet = (p.rhs(i) / ai.squaredNorm()) * ai;
    Matrix rows(2, p.dimension());
    rows.row(0) = ai.transpose();
    rows.row(1) = aj.transpose();
    Eigen::Vector2d rhs(p.rhs(i), p.rhs(j));
    const Vector resid = rhs - rows * g.origin_on_facet;
    g.edge_anchor = g.origin_on_facet + rows.transpose() * (rows * rows.transpose()).ldlt().solve(resid);
    g.bound = lifting_bound(p, i, j);
    return g;
  }

  Eigen::Index m_;
  std::vector<std::optional<PairGeometry>> pairs_;
};

inline void require_on_facet(const Polyhedron& p, const Vector& y, Eigen::Index i) {
  detail::check_facet_index(p, i);
  require_dimension(y.size(), p.dimension(), "anchor");
  if (std::abs(p.distance(i, y)) > tol::kGeometry) {
    throw Error(ErrorCode::NotOnFacet, "anchor is off hyperplane " + std::to_string(i));
  }
  for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
    if (p.distance(j, y) < -tol::kGeometry) {
      throw Error(ErrorCode::NotOnFacet, "anchor violates facet " + std::to_string(j));
    }
  }
}

/// Supremum of valid lifts at an anchor on facet i; +inf when no other facet
/// ever binds (then a_i^T x <= b_i is itself valid for S).
inline double max_alpha(const Polyhedron& p, const Vector& y, Eigen::Index i) {
  require_on_facet(p, y, i);
  double best = kInf;
  for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
    if (j == i) continue;
    const auto b = lifting_bound(p, i, j);
    if (b.bounded) best = std::min(best, b(y));
  }
  return std::max(best, 0.0);
}

/// q >= 2 y^T x - ||y||^2 + 2 alpha (a_i^T x - b_i).
inline Cut lifted_cut(const Polyhedron& p, const Vector& y, Eigen::Index i, double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidInput, "lift must be nonnegative");
  const double cap = max_alpha(p, y, i);
  if (alpha > cap + tol::kGeometry) {
    throw Error(ErrorCode::AlphaTooLarge,
                "alpha " + std::to_string(alpha) + " exceeds max " + std::to_string(cap));
  }
  Cut c;
  c.delta = 1.0;
  c.beta = y + alpha * p.normal(i);
  c.beta0 = -y.squaredNorm() - 2.0 * alpha * p.rhs(i);
  c.origin = provenance::LiftedFirstOrder{y, i, alpha};
  return c;
}

struct SeparationOptions {
  unsigned threads = 1;
  QpOptions qp;
};

namespace detail {

struct FacetResult {
  enum class Kind { Cut, Halfspace, Empty, Unbounded } kind = Kind::Empty;
  Cut cut;
  double violation = -kInf;
  int iterations = 0;
  double kkt = 0.0;
};

/// min -2 y^T x* + ||y||^2 - 2 alpha (a_i^T x* - b_i)
/// s.t. a_i^T y = b_i, a_j^T y >= b_j, alpha >= 0,
///      a_j^T y - b_j >= alpha (||a_i|| ||a_j|| - a_j^T a_i)  (bounded pairs).
inline QpProblem facet_separation_qp(const Polyhedron& p, const Vector& x, Eigen::Index i) {
  const auto d = p.dimension();
  QpProblem qp = QpProblem::with_variables(d + 1);
  qp.hessian.topLeftCorner(d, d) = 2.0 * Matrix::Identity(d, d);
  qp.linear.head(d) = -2.0 * x;
  qp.linear(d) = -2.0 * p.slack(i, x);
  Vector row = Vector::Zero(d + 1);
  row.head(d) = p.normal(i);
  qp.add_equality(row, p.rhs(i));
  for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
    if (j == i) continue;
    row.setZero();
    row.head(d) = p.normal(j);
    qp.add_inequality(row, p.rhs(j));
    const double denom = lifting_denominator(p, i, j);
    if (denom > 1e-12 * p.normal_norm(i) * p.normal_norm(j)) {
      row(d) = -denom;
      qp.add_inequality(row, p.rhs(j));
    }
  }
  row.setZero();
  row(d) = 1.0;
  qp.add_inequality(row, 0.0);
  return qp;
}

inline FacetResult separate_facet(const Polyhedron& p, const Vector& x, double q, Eigen::Index i,
                                  const QpOptions& opts) {
  FacetResult r;
  const auto d = p.dimension();
  const auto out = solve_qp(facet_separation_qp(p, x, i), opts);
  r.iterations = out.iterations;
  switch (out.status) {
    case SolveStatus::Optimal: {
      Vector y = out.primal.head(d);
      // Pull the anchor exactly onto H_i.
      y -= (p.slack(i, y) / p.normal(i).squaredNorm()) * p.normal(i);
      const double cap = max_alpha(p, y, i);
      const double alpha = std::clamp(out.primal(d), 0.0, cap);
      r.kind = FacetResult::Kind::Cut;
      r.cut = lifted_cut(p, y, i, alpha);
      r.violation = cut_violation(r.cut, x, q);
      r.kkt = out.kkt.max();
      return r;
    }
    case SolveStatus::Infeasible:
      r.kind = FacetResult::Kind::Empty;
      return r;
    case SolveStatus::Unbounded: {
      bool halfspace = true;
      for (Eigen::Index j = 0; j < p.num_facets(); ++j) {
        if (j != i && lifting_bound(p, i, j).bounded) halfspace = false;
      }
      if (halfspace && p.slack(i, x) > 0.0) {
        r.kind = FacetResult::Kind::Halfspace;
        r.cut = Cut{0.0, 0.5 * p.normal(i), -p.rhs(i), provenance::ComplementHalfspace{i}};
        r.violation = cut_violation(r.cut, x, q);
      } else {
        r.kind = FacetResult::Kind::Unbounded;
      }
      return r;
    }
    case SolveStatus::IterationLimit:
      break;
  }
  throw Error(ErrorCode::SolverFailure,
              "facet " + std::to_string(i) + ": QP stopped with " + to_string(out.status));
}

}  // namespace detail

/// Strongest lifted first-order inequality at (x*, q*) over all facets, plus
/// the plain linearization at x* when x* is outside int(P). Equal violations
/// resolve to the lowest facet index.
inline SeparationReport separate_poly(const Polyhedron& p, const Vector& x, double q,
                                      const SeparationOptions& opts = {}) {
  require_dimension(x.size(), p.dimension(), "separate_poly query");
  if (!x.allFinite() || !std::isfinite(q)) {
    throw Error(ErrorCode::InvalidInput, "query must be finite");
  }
  const auto m = p.num_facets();
  std::vector<detail::FacetResult> results(static_cast<std::size_t>(m));
  if (opts.threads > 1) {
    for (Eigen::Index start = 0; start < m; start += opts.threads) {
      std::vector<std::future<detail::FacetResult>> batch;
      const Eigen::Index stop = std::min<Eigen::Index>(m, start + opts.threads);
      for (Eigen::Index i = start; i < stop; ++i) {
        batch.push_back(std::async(std::launch::async, [&p, &x, q, i, &opts] {
          return detail::separate_facet(p, x, q, i, opts.qp);
        }));
      }
      for (Eigen::Index i = start; i < stop; ++i) {
        results[static_cast<std::size_t>(i)] = batch[static_cast<std::size_t>(i - start)].get();
      }
    }
  } else {
    for (Eigen::Index i = 0; i < m; ++i) {
      results[static_cast<std::size_t>(i)] = detail::separate_facet(p, x, q, i, opts.qp);
    }
  }

  SeparationReport rep;
  rep.point = x;
  rep.q = q;
  std::optional<Cut> halfspace;
  double halfspace_violation = -kInf;
  auto consider = [&rep](const Cut& c, double v) {
    if (!rep.cut || v > rep.violation + 1e-12 * (1.0 + std::abs(rep.violation))) {
      rep.cut = c;
      rep.violation = v;
    }
  };
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    rep.diagnostics.iterations += r.iterations;
    rep.diagnostics.kkt_residual = std::max(rep.diagnostics.kkt_residual, r.kkt);
    switch (r.kind) {
      case detail::FacetResult::Kind::Cut:
        consider(r.cut, r.violation);
        break;
      case detail::FacetResult::Kind::Halfspace:
        rep.diagnostics.skipped_facets.push_back(i);
        rep.diagnostics.notes.push_back("facet " + std::to_string(i) +
                                        ": lift unbounded, halfspace cut emitted");
        if (r.violation > halfspace_violation) {
          halfspace = r.cut;
          halfspace_violation = r.violation;
        }
        break;
      case detail::FacetResult::Kind::Unbounded:
        rep.diagnostics.skipped_facets.push_back(i);
        rep.diagnostics.notes.push_back("facet " + std::to_string(i) + ": UnboundedDirection");
        break;
      case detail::FacetResult::Kind::Empty:
        rep.diagnostics.skipped_facets.push_back(i);
        rep.diagnostics.notes.push_back("facet " + std::to_string(i) + ": empty (redundant)");
        break;
    }
  }
  if (p.in_complement(x)) {
    const Cut lin = linearization_cut(x);
    consider(lin, cut_violation(lin, x, q));
  }
  if (halfspace && halfspace_violation > 0.0) {
    rep.cut = halfspace;
    rep.violation = halfspace_violation;
  }
  if (rep.cut && rep.cut->delta > 0.0) {
    const double rho = rep.cut->violating_rho();
    if (rho > 0.0) rep.certificate = Ball(rep.cut->beta, rho);
  }
  return rep;
}

}  // namespace liftcut
