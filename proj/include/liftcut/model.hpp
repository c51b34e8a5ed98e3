#pragma once

#include "liftcut/common.hpp"
#include "liftcut/qp.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace liftcut {

/// Q(x) = x^T M x + l^T x + m0. When M is positive definite the form caches
/// an affine change of variables u = T x + s with Q(x) = ||u||^2 + constant.
class QuadraticForm {
 public:
  QuadraticForm(Matrix m, Vector l, double m0) : m_(std::move(m)), l_(std::move(l)), m0_(m0) {
    const auto d = m_.rows();
    require_dimension(m_.cols(), d, "QuadraticForm matrix");
    require_dimension(l_.size(), d, "QuadraticForm linear term");
    if (d > 0 && (m_ - m_.transpose()).cwiseAbs().maxCoeff() > tol::kSymmetry) {
      throw Error(ErrorCode::NotSymmetric, "QuadraticForm matrix");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_);
    min_eigenvalue_ = d > 0 ? es.eigenvalues().minCoeff() : 0.0;
    positive_definite_ = d > 0 && min_eigenvalue_ > tol::kEigen;
    if (positive_definite_) {
      const Vector root = es.eigenvalues().cwiseSqrt();
      transform_ = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
      inverse_ = es.eigenvectors() * root.cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
      shift_ = 0.5 * inverse_ * l_;
      constant_ = m0_ - shift_.squaredNorm();
    }
  }

  static QuadraticForm squared_norm(Eigen::Index d) {
    return QuadraticForm(Matrix::Identity(d, d), Vector::Zero(d), 0.0);
  }

  Eigen::Index dimension() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  const Vector& linear() const { return l_; }
  double constant_term() const { return m0_; }
  bool positive_definite() const { return positive_definite_; }
  double min_eigenvalue() const { return min_eigenvalue_; }

  double operator()(const Vector& x) const { return x.dot(m_ * x) + l_.dot(x) + m0_; }

  /// T with M = T^T T (symmetric square root). Valid only when positive definite.
  const Matrix& transform() const { return transform_; }
  const Matrix& inverse_transform() const { return inverse_; }
  const Vector& shift() const { return shift_; }
  /// Q(x) - ||T x + s||^2.
  double normalized_constant() const { return constant_; }

 private:
  Matrix m_;
  Vector l_;
  double m0_;
  double min_eigenvalue_ = 0.0;
  bool positive_definite_ = false;
  Matrix transform_;
  Matrix inverse_;
  Vector shift_;
  double constant_ = 0.0;
};

struct Ball {
  Vector center;
  double rho = 0.0;  ///< squared radius

  Ball() = default;
  Ball(Vector c, double r) : center(std::move(c)), rho(r) {
    if (!(rho >= 0.0)) throw Error(ErrorCode::InvalidInput, "Ball squared radius must be >= 0");
  }
  double radius() const { return std::sqrt(rho); }
  bool contains(const Vector& x) const { return (x - center).squaredNorm() <= rho; }
};

/// P = { x : a_i^T x >= b_i, i = 1..m } with nonempty interior.
class Polyhedron {
 public:
  Polyhedron(Matrix normals, Vector rhs, std::optional<Vector> interior = std::nullopt)
      : normals_(std::move(normals)), rhs_(std::move(rhs)) {
    require_dimension(rhs_.size(), normals_.rows(), "Polyhedron rhs");
    if (normals_.rows() == 0) throw Error(ErrorCode::InvalidInput, "Polyhedron needs a facet");
    norms_ = normals_.rowwise().norm();
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      if (!(norms_(i) > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "facet " + std::to_string(i) + " has a zero normal");
      }
    }
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      for (Eigen::Index j = i + 1; j < num_facets(); ++j) {
        const double cross = norms_(i) * norms_(j) - normals_.row(i).dot(normals_.row(j));
        const double off = std::abs(rhs_(i) / norms_(i) - rhs_(j) / norms_(j));
        if (cross <= 1e-12 * norms_(i) * norms_(j) &&
            off <= 1e-12 * (1.0 + std::abs(rhs_(i) / norms_(i)))) {
          throw Error(ErrorCode::InvalidInput, "facets " + std::to_string(i) + " and " +
                                                   std::to_string(j) +
                                                   " are positive multiples");
        }
      }
    }
    interior_ = interior ? *interior : find_interior_point();
    require_dimension(interior_.size(), dimension(), "Polyhedron interior point");
    if (!is_interior(interior_)) {
      throw Error(ErrorCode::EmptyInterior, "interior witness is not strictly inside");
    }
  }

  Eigen::Index dimension() const { return normals_.cols(); }
  Eigen::Index num_facets() const { return normals_.rows(); }
  Vector normal(Eigen::Index i) const { return normals_.row(i).transpose(); }
  double rhs(Eigen::Index i) const { return rhs_(i); }
  double normal_norm(Eigen::Index i) const { return norms_(i); }
  const Matrix& normals() const { return normals_; }
  const Vector& rhs() const { return rhs_; }
  const Vector& interior_point() const { return interior_; }

  double slack(Eigen::Index i, const Vector& x) const { return normals_.row(i).dot(x) - rhs_(i); }
  /// Signed Euclidean distance from x to H_i, positive on the P side.
  double distance(Eigen::Index i, const Vector& x) const { return slack(i, x) / norms_(i); }

  bool is_interior(const Vector& x) const {
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      if (slack(i, x) <= 0.0) return false;
    }
    return true;
  }
  bool contains(const Vector& x, double tolerance = 0.0) const {
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      if (distance(i, x) < -tolerance) return false;
    }
    return true;
  }
  /// x lies outside int(P), up to `tolerance` on distances.
  bool in_complement(const Vector& x, double tolerance = 0.0) const {
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      if (distance(i, x) <= tolerance) return true;
    }
    return false;
  }

 private:
  // max t s.t. a_i^T x - ||a_i|| t >= b_i, t <= 1: a Chebyshev-type centre.
  Vector find_interior_point() const {
    const auto d = dimension();
    QpProblem lp = QpProblem::with_variables(d + 1);
    lp.linear(d) = -1.0;
    for (Eigen::Index i = 0; i < num_facets(); ++i) {
      Vector row(d + 1);
      row << normal(i), -norms_(i);
      lp.add_inequality(row, rhs_(i));
    }
    Vector cap = Vector::Zero(d + 1);
    cap(d) = -1.0;
    lp.add_inequality(cap, -1.0);
    const auto out = solve_qp(lp, QpOptions{500, 1e-9});
    if (out.status != SolveStatus::Optimal || out.primal(d) <= 1e-9) {
      throw Error(ErrorCode::EmptyInterior, "polyhedron has empty interior");
    }
    return out.primal.head(d);
  }

  Matrix normals_;
  Vector rhs_;
  Vector norms_;
  Vector interior_;
};

/// P = { x : x^T A x - 2 c^T x + b <= 0 } with A positive semidefinite.
class Ellipsoid {
 public:
  Ellipsoid(Matrix a, Vector c, double b) : a_(std::move(a)), c_(std::move(c)), b_(b) {
    const auto d = a_.rows();
    require_dimension(a_.cols(), d, "Ellipsoid matrix");
    require_dimension(c_.size(), d, "Ellipsoid linear term");
    if (d == 0) throw Error(ErrorCode::InvalidInput, "Ellipsoid of dimension 0");
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > tol::kSymmetry) {
      throw Error(ErrorCode::NotSymmetric, "Ellipsoid matrix");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a_);
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
    if (eigenvalues_.minCoeff() < -tol::kEigen) {
      throw Error(ErrorCode::NotPositiveDefinite, "Ellipsoid matrix is not PSD");
    }
    eigenvalues_ = eigenvalues_.cwiseMax(0.0);
    lambda_max_ = eigenvalues_.maxCoeff();
    bounded_ = eigenvalues_.minCoeff() > tol::kEigen;
    if (bounded_) {
      center_ = eigenvectors_ * (eigenvectors_.transpose() * c_).cwiseQuotient(eigenvalues_);
      depth_ = c_.dot(center_) - b_;
      if (!(depth_ > 0.0)) throw Error(ErrorCode::EmptyInterior, "ellipsoid has empty interior");
    }
  }

  Eigen::Index dimension() const { return a_.rows(); }
  const Matrix& matrix() const { return a_; }
  const Vector& linear() const { return c_; }
  double offset() const { return b_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  double lambda_max() const { return lambda_max_; }
  bool bounded() const { return bounded_; }

  void require_bounded() const {
    if (!bounded_) throw Error(ErrorCode::UnboundedEllipsoid, "ellipsoid matrix is singular");
  }
  /// A^{-1} c.
  const Vector& center() const {
    require_bounded();
    return center_;
  }
  /// c^T A^{-1} c - b = -value(center) > 0.
  double depth() const {
    require_bounded();
    return depth_;
  }

  double value(const Vector& x) const { return x.dot(a_ * x) - 2.0 * c_.dot(x) + b_; }
  Vector gradient(const Vector& x) const { return 2.0 * (a_ * x - c_); }
  bool contains(const Vector& x, double tolerance = 0.0) const { return value(x) <= tolerance; }
  bool in_complement(const Vector& x) const { return value(x) >= 0.0; }

 private:
  Matrix a_;
  Vector c_;
  double b_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  double lambda_max_ = 0.0;
  bool bounded_ = false;
  Vector center_;
  double depth_ = 0.0;
};

/// P = { (x, w) : a_i^T x - w <= b_i } in R^{d+1}; the complement is the
/// hypograph w <= max_i (a_i^T x - b_i).
class ParaboloidComplement {
 public:
  ParaboloidComplement(Matrix normals, Vector rhs)
      : normals_(std::move(normals)), rhs_(std::move(rhs)) {
    require_dimension(rhs_.size(), normals_.rows(), "ParaboloidComplement rhs");
    if (normals_.rows() < 2) {
      throw Error(ErrorCode::InvalidInput, "ParaboloidComplement needs at least two facets");
    }
  }

  /// Dimension of x (the region lives in dimension() + 1).
  Eigen::Index dimension() const { return normals_.cols(); }
  Eigen::Index num_facets() const { return normals_.rows(); }
  Vector normal(Eigen::Index i) const { return normals_.row(i).transpose(); }
  double rhs(Eigen::Index i) const { return rhs_(i); }
  const Matrix& normals() const { return normals_; }
  const Vector& rhs() const { return rhs_; }

  double facet_value(Eigen::Index i, const Vector& x) const {
    return normals_.row(i).dot(x) - rhs_(i);
  }
  /// max_i (a_i^T x - b_i): the boundary height of P above x.
  double envelope(const Vector& x) const {
    return (normals_ * x - rhs_).maxCoeff();
  }
  bool is_interior(const Vector& x, double w) const { return w > envelope(x); }
  bool in_complement(const Vector& x, double w) const { return w <= envelope(x); }

 private:
  Matrix normals_;
  Vector rhs_;
};

using Region = std::variant<Polyhedron, Ellipsoid, ParaboloidComplement>;

inline const char* region_kind(const Region& r) {
  switch (r.index()) {
    case 0: return "polyhedron";
    case 1: return "ellipsoid";
    default: return "paraboloid_complement";
  }
}

/// Dimension of the quadratic's argument x (paraboloid regions add w on top).
inline Eigen::Index region_dimension(const Region& r) {
  return std::visit([](const auto& p) { return p.dimension(); }, r);
}

namespace provenance {
struct Linearization {
  Vector anchor;
};
struct LiftedFirstOrder {
  Vector anchor;
  Eigen::Index facet = 0;
  double alpha = 0.0;
};
struct FromBall {
  Ball ball;
};
struct Paraboloid {
  Vector anchor;
  Eigen::Index facet = 0;
  double alpha = 0.0;
};
/// delta = 0 cut a_i^T x <= b_i, valid when P is a halfspace along facet i.
struct ComplementHalfspace {
  Eigen::Index facet = 0;
};
}  // namespace provenance

using Provenance =
    std::variant<std::monostate, provenance::Linearization, provenance::LiftedFirstOrder,
                 provenance::FromBall, provenance::Paraboloid, provenance::ComplementHalfspace>;

/// delta * q - 2 beta^T x >= beta0.
struct Cut {
  double delta = 1.0;
  Vector beta;
  double beta0 = 0.0;
  Provenance origin;

  Eigen::Index dimension() const { return beta.size(); }

  Cut normalized() const {
    if (delta <= 0.0) return *this;
    Cut c = *this;
    c.beta /= delta;
    c.beta0 /= delta;
    c.delta = 1.0;
    return c;
  }

  /// For delta = 1: the cut is violated at (x, ||x||^2) iff ||x - beta||^2 <
  /// ||beta||^2 + beta0. Returns that (possibly negative) squared radius.
  double violating_rho() const { return beta.squaredNorm() + beta0; }
};

inline Cut linearization_cut(const Vector& y) {
  return Cut{1.0, y, -y.squaredNorm(), provenance::Linearization{y}};
}

inline Cut ball_cut(const Ball& ball) {
  return Cut{1.0, ball.center, ball.rho - ball.center.squaredNorm(), provenance::FromBall{ball}};
}

/// delta q - 2 beta^T x - beta0; nonnegative means satisfied.
inline double evaluate_cut(const Cut& cut, const Vector& x, double q) {
  require_dimension(x.size(), cut.dimension(), "evaluate_cut point");
  return cut.delta * q - 2.0 * cut.beta.dot(x) - cut.beta0;
}

/// Change of variables u = T x + s, q' = q - constant, taking q >= Q(x) to q' >= ||u||^2.
struct TransformRecord {
  Matrix transform;
  Matrix inverse;
  Vector shift;
  double constant = 0.0;

  static TransformRecord identity(Eigen::Index d) {
    return {Matrix::Identity(d, d), Matrix::Identity(d, d), Vector::Zero(d), 0.0};
  }

  Vector forward(const Vector& x) const { return transform * x + shift; }
  Vector backward(const Vector& u) const { return inverse * (u - shift); }
  double forward_q(double q) const { return q - constant; }
  double backward_q(double q) const { return q + constant; }

  /// Rewrites a cut stated in normalized coordinates in terms of the original
  /// x. Cuts of dimension d + 1 carry a trailing w coordinate that is untouched.
  Cut cut_to_original(const Cut& cut) const {
    const auto d = transform.rows();
    Cut out = cut;
    out.beta.head(d) = transform.transpose() * cut.beta.head(d);
    out.beta0 = cut.beta0 + cut.delta * constant + 2.0 * cut.beta.head(d).dot(shift);
    return out;
  }
  Cut cut_to_normalized(const Cut& cut) const {
    const auto d = transform.rows();
    Cut out = cut;
    const Vector bx = inverse.transpose() * cut.beta.head(d);
    out.beta.head(d) = bx;
    out.beta0 = cut.beta0 - cut.delta * constant - 2.0 * bx.dot(shift);
    return out;
  }
};

struct NormalizedInstance {
  Region region;
  TransformRecord transform;
};

/// Maps the region through u = T x + s so that the epigraph reads q' >= ||u||^2.
inline NormalizedInstance normalize(const QuadraticForm& q, const Region& region) {
  const auto d = q.dimension();
  require_dimension(region_dimension(region), d, "normalize region");
  if (!q.positive_definite()) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "quadratic has min eigenvalue " + std::to_string(q.min_eigenvalue()));
  }
  TransformRecord tr{q.transform(), q.inverse_transform(), q.shift(), q.normalized_constant()};
  // x = R u + r
  const Matrix& rmat = tr.inverse;
  const Vector r = -tr.inverse * tr.shift;

  struct Mapper {
    const TransformRecord& tr;
    const Matrix& rmat;
    const Vector& r;
    Region operator()(const Polyhedron& p) const {
      Matrix normals = p.normals() * rmat;
      Vector rhs = p.rhs() - p.normals() * r;
      return Polyhedron(std::move(normals), std::move(rhs), tr.forward(p.interior_point()));
    }
    Region operator()(const Ellipsoid& e) const {
      const Matrix& a = e.matrix();
      Matrix an = rmat.transpose() * a * rmat;
      an = 0.5 * (an + an.transpose());
      Vector cn = rmat.transpose() * (e.linear() - a * r);
      const double bn = r.dot(a * r) - 2.0 * e.linear().dot(r) + e.offset();
      return Ellipsoid(std::move(an), std::move(cn), bn);
    }
    Region operator()(const ParaboloidComplement& p) const {
      Matrix normals = p.normals() * rmat;
      Vector rhs = p.rhs() - p.normals() * r;
      return ParaboloidComplement(std::move(normals), std::move(rhs));
    }
  };
  return {std::visit(Mapper{tr, rmat, r}, region), tr};
}

/// Query point (x*, q*) plus the per-run outcome of a separation call.
struct SolverDiagnostics {
  int iterations = 0;
  int evaluations = 0;
  double kkt_residual = 0.0;
  std::vector<Eigen::Index> skipped_facets;
  std::vector<std::string> notes;
};

struct SeparationReport {
  /// x* (with w* appended for paraboloid regions).
  Vector point;
  double q = 0.0;
  std::optional<Cut> cut;
  /// beta0 + 2 beta^T x* - delta q*; positive means the query is cut off.
  double violation = -kInf;
  std::optional<Ball> certificate;
  SolverDiagnostics diagnostics;

  double recompute_violation() const {
    if (!cut) return -kInf;
    return -evaluate_cut(*cut, point, q);
  }
  bool separated(double threshold = 0.0) const { return cut && violation > threshold; }
};

inline double cut_violation(const Cut& cut, const Vector& x, double q) {
  return -evaluate_cut(cut, x, q);
}

enum class CutClass { TrivialComplementValid, Linearization, LiftedFirstOrder, Dominated };

inline const char* to_string(CutClass c) {
  switch (c) {
    case CutClass::TrivialComplementValid: return "TrivialComplementValid";
    case CutClass::Linearization: return "Linearization";
    case CutClass::LiftedFirstOrder: return "LiftedFirstOrder";
    case CutClass::Dominated: return "Dominated";
  }
  return "Unknown";
}

struct Classification {
  CutClass kind = CutClass::Dominated;
  /// A valid cut at least as strong as the input: the input itself unless
  /// Dominated. Absent for delta = 0.
  std::optional<Cut> witness;
  /// LiftedFirstOrder only: the tangent facet, the anchor on it and the lift.
  std::optional<Eigen::Index> facet;
  Vector anchor;
  double alpha = 0.0;
};

/// Places a normalized cut in the taxonomy of valid inequalities for S. With
/// delta = 1 the points of the paraboloid cut off form the interior of the
/// ball B(beta, sqrt(||beta||^2 + beta0)), which must sit inside P.
inline Classification classify_cut(const Cut& input, const Polyhedron& p) {
  require_dimension(input.dimension(), p.dimension(), "classify_cut");
  Classification out;
  if (input.delta <= 0.0) {
    out.kind = CutClass::TrivialComplementValid;
    return out;
  }
  const Cut cut = input.normalized();
  const double rho = cut.violating_rho();
  if (rho < 0.0 && std::sqrt(-rho) > tol::kGeometry) {
    out.kind = CutClass::Dominated;
    out.witness = linearization_cut(cut.beta);
    return out;
  }
  const double radius = std::sqrt(std::max(rho, 0.0));
  if (radius <= tol::kGeometry) {
    out.kind = CutClass::Linearization;
    out.anchor = cut.beta;
    out.witness = cut;
    return out;
  }
  double closest = kInf;
  Eigen::Index tangent = -1;
  for (Eigen::Index i = 0; i < p.num_facets(); ++i) {
    const double dist = p.distance(i, cut.beta);
    if (dist < radius - tol::kGeometry) {
      throw Error(ErrorCode::InvalidCut, "violating ball crosses facet " + std::to_string(i));
    }
    if (tangent < 0 && dist <= radius + tol::kGeometry) tangent = i;
    closest = std::min(closest, dist);
  }
  if (tangent >= 0) {
    out.kind = CutClass::LiftedFirstOrder;
    out.facet = tangent;
    out.anchor = cut.beta - p.distance(tangent, cut.beta) * p.normal(tangent) /
                                p.normal_norm(tangent);
    out.alpha = radius / p.normal_norm(tangent);
    out.witness = cut;
    return out;
  }
  out.kind = CutClass::Dominated;
  out.witness = ball_cut(Ball(cut.beta, closest * closest));
  return out;
}

}  // namespace liftcut
