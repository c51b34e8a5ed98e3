#pragma once

// Cutting-plane demonstration: minimize a linear objective over a box in x,
// accumulating separated cuts until the optimum is no longer cut off.

#include "liftcut/ellipsoid_cuts.hpp"
#include "liftcut/model.hpp"
#include "liftcut/poly_cuts.hpp"
#include "liftcut/qp.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace liftcut {

struct DemoOptions {
  /// Box lo <= x_k <= hi in original coordinates.
  double lo = -1.0;
  double hi = 2.0;
  /// Lower bound on the (original) q variable.
  double q_floor = -10.0;
  int max_rounds = 50;
  double violation_tol = 1e-6;
  double regularization = 1e-9;
  /// Cuts are compared coefficient-wise with this tolerance.
  double duplicate_tol = 1e-10;
  /// Region coordinates u = T x + s; identity when empty.
  std::optional<TransformRecord> transform;
  SeparationOptions poly;
  EllipsoidSearchOptions ellipsoid;
};

struct DemoRound {
  int round = 0;
  /// Linear objective c^T (x, q) at the relaxation optimum (original coordinates).
  double objective = 0.0;
  /// Objective of the regularized relaxation actually solved; nondecreasing.
  double bound = 0.0;
  Vector x;
  double q = 0.0;
  double violation = -kInf;
  bool cut_added = false;
};

struct DemoResult {
  std::vector<DemoRound> rounds;
  /// Cuts in region (normalized) coordinates, in insertion order.
  std::vector<Cut> cuts;
  bool converged = false;
  /// Set when the round cap stopped the loop while the optimum was still cut off.
  bool nonconvergence_warning = false;
  bool repeated_cut = false;
  std::string message;
};

namespace detail {

inline bool same_cut(const Cut& a, const Cut& b, double tol) {
  const Cut na = a.normalized();
  const Cut nb = b.normalized();
  return na.beta.size() == nb.beta.size() && std::abs(na.delta - nb.delta) <= tol &&
         std::abs(na.beta0 - nb.beta0) <= tol && (na.beta - nb.beta).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace detail

/// objective has d + 1 entries (x then q), expressed in original coordinates.
inline DemoResult run_demo_loop(const Region& region, const Vector& objective,
                                const DemoOptions& opts = {}) {
  if (std::holds_alternative<ParaboloidComplement>(region)) {
    throw Error(ErrorCode::InvalidInput, "demo loop supports polyhedral and ellipsoidal regions");
  }
  const auto d = region_dimension(region);
  require_dimension(objective.size(), d + 1, "demo objective");
  if (!(opts.lo < opts.hi)) throw Error(ErrorCode::InvalidInput, "demo box needs lo < hi");
  const TransformRecord tr = opts.transform ? *opts.transform : TransformRecord::identity(d);

  // Variables z = (u, q') in region coordinates; x = R u + r, q = q' + constant.
  const Matrix& rmat = tr.inverse;
  const Vector r = -tr.inverse * tr.shift;
  QpProblem base = QpProblem::with_variables(d + 1);
  base.hessian = opts.regularization * Matrix::Identity(d + 1, d + 1);
  base.linear.head(d) = rmat.transpose() * objective.head(d);
  base.linear(d) = objective(d);
  const double offset = objective.head(d).dot(r) + objective(d) * tr.constant;
  Vector row = Vector::Zero(d + 1);
  for (Eigen::Index k = 0; k < d; ++k) {
    row.head(d) = rmat.row(k).transpose();
    base.add_inequality(row, opts.lo - r(k));
    base.add_inequality(-row, -(opts.hi - r(k)));
  }
  row.setZero();
  row(d) = 1.0;
  base.add_inequality(row, tr.forward_q(opts.q_floor));
  // q above the largest value of ||u||^2 over the box keeps the relaxation bounded
  // for objectives that reward large q; it never binds at a point of the hull.
  double cap = 0.0;
  {
    const double m = std::max(std::abs(opts.lo), std::abs(opts.hi));
    cap = std::pow(tr.transform.norm() * m * std::sqrt(static_cast<double>(d)) + tr.shift.norm(), 2) + 1.0;
  }
  base.add_inequality(-row, -cap);

  DemoResult res;
  QpProblem qp = base;
  for (int round = 0;; ++round) {
    const auto sol = solve_qp(qp, QpOptions{2000, 1e-10});
    if (sol.status != SolveStatus::Optimal) {
      throw Error(ErrorCode::SolverFailure,
                  "demo round " + std::to_string(round) + ": relaxation " + to_string(sol.status));
    }
    DemoRound rec;
    rec.round = round;
    const Vector u = sol.primal.head(d);
    const double qn = sol.primal(d);
    rec.x = tr.backward(u);
    rec.q = tr.backward_q(qn);
    rec.bound = sol.objective + offset;
    rec.objective = objective.head(d).dot(rec.x) + objective(d) * rec.q;

    SeparationReport rep;
    if (const auto* p = std::get_if<Polyhedron>(&region)) {
      rep = separate_poly(*p, u, qn, opts.poly);
    } else {
      rep = separate_ellipsoid(std::get<Ellipsoid>(region), u, qn, opts.ellipsoid);
    }
    rec.violation = rep.cut ? rep.violation : -kInf;
    const bool cut_off = rep.cut && rep.violation > opts.violation_tol;
    if (!cut_off) {
      res.converged = true;
      res.rounds.push_back(rec);
      res.message = "converged";
      break;
    }
    if (static_cast<int>(res.cuts.size()) >= opts.max_rounds) {
      res.nonconvergence_warning = true;
      res.rounds.push_back(rec);
      res.message = "NonconvergenceWarning: round cap reached";
      break;
    }
    for (const Cut& c : res.cuts) {
      if (detail::same_cut(c, *rep.cut, opts.duplicate_tol)) res.repeated_cut = true;
    }
    if (res.repeated_cut) {
      res.rounds.push_back(rec);
      res.message = "separation returned a cut already in the relaxation";
      break;
    }
    const Cut cut = rep.cut->normalized();
    Vector crow(d + 1);
    crow.head(d) = -2.0 * cut.beta;
    crow(d) = cut.delta;
    qp.add_inequality(crow, cut.beta0);
    res.cuts.push_back(cut);
    rec.cut_added = true;
    res.rounds.push_back(rec);
  }
  return res;
}

}  // namespace liftcut
