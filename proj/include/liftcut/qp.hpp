#pragma once

#include "liftcut/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace liftcut {

/// Convex quadratic program
///
///   min  0.5 z^T H z + g^T z
///   s.t. E z  = e
///        C z >= c
///
/// with H symmetric positive semidefinite. H may be zero (a linear program).
struct QpProblem {
  Matrix hessian;
  Vector linear;
  Matrix eq_matrix;
  Vector eq_rhs;
  Matrix ineq_matrix;
  Vector ineq_rhs;

  Eigen::Index num_variables() const { return linear.size(); }

  static QpProblem with_variables(Eigen::Index n) {
    QpProblem p;
    p.hessian = Matrix::Zero(n, n);
    p.linear = Vector::Zero(n);
    p.eq_matrix = Matrix::Zero(0, n);
    p.eq_rhs = Vector::Zero(0);
    p.ineq_matrix = Matrix::Zero(0, n);
    p.ineq_rhs = Vector::Zero(0);
    return p;
  }

  void add_equality(const Vector& row, double rhs) {
    append_row(eq_matrix, eq_rhs, row, rhs);
  }
  void add_inequality(const Vector& row, double rhs) {
    append_row(ineq_matrix, ineq_rhs, row, rhs);
  }

  double objective(const Vector& z) const { return 0.5 * z.dot(hessian * z) + linear.dot(z); }

  void validate() const {
    const auto n = num_variables();
    require_dimension(hessian.rows(), n, "QpProblem hessian rows");
    require_dimension(hessian.cols(), n, "QpProblem hessian cols");
    require_dimension(eq_matrix.cols(), n, "QpProblem equality matrix");
    require_dimension(ineq_matrix.cols(), n, "QpProblem inequality matrix");
    require_dimension(eq_rhs.size(), eq_matrix.rows(), "QpProblem equality rhs");
    require_dimension(ineq_rhs.size(), ineq_matrix.rows(), "QpProblem inequality rhs");
    if (n > 0 && (hessian - hessian.transpose()).cwiseAbs().maxCoeff() > tol::kEigen) {
      throw Error(ErrorCode::NotSymmetric, "QpProblem hessian");
    }
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(hessian, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -tol::kEigen) {
        throw Error(ErrorCode::NotPositiveDefinite, "QpProblem hessian is not PSD");
      }
    }
  }

 private:
  static void append_row(Matrix& m, Vector& v, const Vector& row, double rhs) {
    require_dimension(row.size(), m.cols(), "QpProblem constraint row");
    m.conservativeResize(m.rows() + 1, Eigen::NoChange);
    m.row(m.rows() - 1) = row.transpose();
    v.conservativeResize(v.size() + 1);
    v(v.size() - 1) = rhs;
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::IterationLimit: return "IterationLimit";
  }
  return "Unknown";
}

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal, dual, complementarity}); }
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::IterationLimit;
  Vector primal;
  Vector eq_duals;
  Vector ineq_duals;
  /// Unbounded: a primal recession direction with decreasing objective.
  /// Infeasible: Farkas multipliers, inequality block first, then equalities.
  Vector ray;
  KktResiduals kkt;
  int iterations = 0;
  double objective = 0.0;
};

struct QpOptions {
  int max_iterations = 200;
  double feasibility_tol = 1e-9;
};

/// KKT residuals in the infinity norm for the sign convention
/// H z + g = E^T nu + C^T lambda, lambda >= 0.
inline KktResiduals kkt_residuals(const QpProblem& p, const Vector& z, const Vector& nu,
                                  const Vector& lambda) {
  KktResiduals r;
  Vector stat = p.hessian * z + p.linear;
  if (nu.size() > 0) stat -= p.eq_matrix.transpose() * nu;
  if (lambda.size() > 0) stat -= p.ineq_matrix.transpose() * lambda;
  r.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (p.eq_rhs.size() > 0) {
    r.primal = (p.eq_matrix * z - p.eq_rhs).cwiseAbs().maxCoeff();
  }
  for (Eigen::Index i = 0; i < p.ineq_rhs.size(); ++i) {
    const double slack = p.ineq_matrix.row(i).dot(z) - p.ineq_rhs(i);
    r.primal = std::max(r.primal, -slack);
    r.dual = std::max(r.dual, -lambda(i));
    r.complementarity = std::max(r.complementarity, std::abs(lambda(i) * slack));
  }
  return r;
}

namespace detail {

/// Orthonormal basis of the null space of the rows of `a`.
inline Matrix null_space(const Matrix& a, Eigen::Index n) {
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-12 * std::max(1.0, s.size() ? s(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

inline Eigen::Index matrix_rank(const Matrix& a) {
  if (a.rows() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, s(0));
  return static_cast<Eigen::Index>((s.array() > cutoff).count());
}

struct ActiveSetState {
  SolveStatus status = SolveStatus::IterationLimit;
  Vector z;
  Vector nu;
  Vector lambda;
  Vector ray;
  int iterations = 0;
};

inline Matrix working_matrix(const QpProblem& p, const std::vector<Eigen::Index>& working) {
  const auto me = p.eq_matrix.rows();
  Matrix a(me + static_cast<Eigen::Index>(working.size()), p.num_variables());
  if (me > 0) a.topRows(me) = p.eq_matrix;
  for (std::size_t k = 0; k < working.size(); ++k) {
    a.row(me + static_cast<Eigen::Index>(k)) = p.ineq_matrix.row(working[k]);
  }
  return a;
}

/// Greedy selection of linearly independent inequalities active at z.
inline std::vector<Eigen::Index> initial_working_set(const QpProblem& p, const Vector& z,
                                                     double tol) {
  std::vector<Eigen::Index> working;
  Eigen::Index rank = matrix_rank(p.eq_matrix);
  for (Eigen::Index i = 0; i < p.ineq_rhs.size(); ++i) {
    const double slack = p.ineq_matrix.row(i).dot(z) - p.ineq_rhs(i);
    if (std::abs(slack) > tol * (1.0 + std::abs(p.ineq_rhs(i)))) continue;
    working.push_back(i);
    const Eigen::Index r = matrix_rank(working_matrix(p, working));
    if (r > rank) {
      rank = r;
    } else {
      working.pop_back();
    }
  }
  return working;
}

/// Primal active-set iterations from a feasible point. Handles a singular
/// reduced Hessian by stepping along zero-curvature descent directions.
inline ActiveSetState run_active_set(const QpProblem& p, Vector z,
                                     std::vector<Eigen::Index> working, int max_iterations) {
  const Eigen::Index n = p.num_variables();
  const Eigen::Index me = p.eq_matrix.rows();
  const Eigen::Index mi = p.ineq_matrix.rows();
  ActiveSetState st;
  int degenerate_streak = 0;

  for (int iter = 0; iter < max_iterations; ++iter) {
    st.iterations = iter + 1;
    const Matrix aw = working_matrix(p, working);
    const Vector grad = p.hessian * z + p.linear;
    const double gscale = std::max(1.0, grad.cwiseAbs().maxCoeff());
    const Matrix basis = null_space(aw, n);

    Vector step = Vector::Zero(n);
    bool ray_step = false;
    // With tiny curvature, roundoff in the reduced gradient turns into Newton
    // steps far above the step test below; treat such a gradient as zero.
    bool flat_gradient = true;
    if (basis.cols() > 0) {
      const Matrix hr = basis.transpose() * p.hessian * basis;
      const Vector gr = basis.transpose() * grad;
      flat_gradient = gr.norm() <= 1e-14 * gscale;
      Eigen::SelfAdjointEigenSolver<Matrix> es(hr);
      const Vector& d = es.eigenvalues();
      const Matrix& v = es.eigenvectors();
      const double thr = 1e-11 * std::max(1.0, d.cwiseAbs().maxCoeff());
      Vector newton = Vector::Zero(basis.cols());
      Vector flat = Vector::Zero(basis.cols());
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        const double coeff = v.col(k).dot(gr);
        if (d(k) <= thr) {
          flat -= coeff * v.col(k);
        } else {
          newton -= (coeff / d(k)) * v.col(k);
        }
      }
      if (flat.norm() > 1e-10 * gscale) {
        step = basis * flat;
        ray_step = true;
      } else {
        step = basis * newton;
      }
    }

    if (!ray_step && (flat_gradient || step.norm() <= 1e-12 * (1.0 + z.norm()))) {
      Vector mult = Vector::Zero(aw.rows());
      if (aw.rows() > 0) {
        mult = aw.transpose().completeOrthogonalDecomposition().solve(grad);
      }
      Eigen::Index drop = -1;
      double worst = -1e-10 * gscale;
      for (std::size_t k = 0; k < working.size(); ++k) {
        const double lam = mult(me + static_cast<Eigen::Index>(k));
        if (degenerate_streak > n + 2) {
          // Bland-style: smallest constraint index with a negative multiplier.
          if (lam < -1e-10 * gscale &&
              (drop < 0 || working[k] < working[static_cast<std::size_t>(drop)])) {
            drop = static_cast<Eigen::Index>(k);
          }
        } else if (lam < worst) {
          worst = lam;
          drop = static_cast<Eigen::Index>(k);
        }
      }
      if (drop < 0) {
        st.status = SolveStatus::Optimal;
        st.z = z;
        st.nu = mult.head(me);
        st.lambda = Vector::Zero(mi);
        for (std::size_t k = 0; k < working.size(); ++k) {
          st.lambda(working[k]) = std::max(0.0, mult(me + static_cast<Eigen::Index>(k)));
        }
        return st;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    double t = ray_step ? kInf : 1.0;
    Eigen::Index block = -1;
    const double snorm = step.norm();
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double cp = p.ineq_matrix.row(i).dot(step);
      if (cp >= -1e-14 * p.ineq_matrix.row(i).norm() * snorm) continue;
      const double slack = std::max(0.0, p.ineq_matrix.row(i).dot(z) - p.ineq_rhs(i));
      const double ti = slack / -cp;
      if (ti < t) {
        t = ti;
        block = i;
      }
    }
    if (!std::isfinite(t)) {
      st.status = SolveStatus::Unbounded;
      st.z = z;
      st.ray = step / snorm;
      return st;
    }
    degenerate_streak = (t * snorm <= 1e-14 * (1.0 + z.norm())) ? degenerate_streak + 1 : 0;
    z += t * step;
    if (block >= 0) working.push_back(block);
  }
  st.z = z;
  return st;
}

}  // namespace detail

/// Solves a small dense convex QP. A feasible start comes from an elastic
/// phase-1 LP that minimizes the largest inequality violation; the phase-2
/// primal active-set method then runs from that point.
inline SolveOutcome solve_qp(const QpProblem& p, const QpOptions& opts = {}) {
  p.validate();
  const Eigen::Index n = p.num_variables();
  const Eigen::Index me = p.eq_matrix.rows();
  const Eigen::Index mi = p.ineq_matrix.rows();
  SolveOutcome out;

  Vector z0 = Vector::Zero(n);
  if (me > 0) {
    z0 = p.eq_matrix.completeOrthogonalDecomposition().solve(p.eq_rhs);
    const Vector r = p.eq_rhs - p.eq_matrix * z0;
    if (r.cwiseAbs().maxCoeff() > opts.feasibility_tol * (1.0 + p.eq_rhs.cwiseAbs().maxCoeff())) {
      out.status = SolveStatus::Infeasible;
      out.primal = z0;
      out.ray = Vector::Zero(mi + me);
      out.ray.tail(me) = r;
      return out;
    }
  }

  double violation = 0.0;
  for (Eigen::Index i = 0; i < mi; ++i) {
    violation = std::max(violation, p.ineq_rhs(i) - p.ineq_matrix.row(i).dot(z0));
  }
  int phase1_iterations = 0;
  if (violation > opts.feasibility_tol) {
    QpProblem elastic = QpProblem::with_variables(n + 1);
    elastic.linear(n) = 1.0;
    elastic.eq_matrix = Matrix::Zero(me, n + 1);
    if (me > 0) elastic.eq_matrix.leftCols(n) = p.eq_matrix;
    elastic.eq_rhs = p.eq_rhs;
    elastic.ineq_matrix = Matrix::Zero(mi + 1, n + 1);
    elastic.ineq_matrix.topLeftCorner(mi, n) = p.ineq_matrix;
    elastic.ineq_matrix.col(n).setOnes();
    elastic.ineq_rhs = Vector::Zero(mi + 1);
    elastic.ineq_rhs.head(mi) = p.ineq_rhs;
    Vector start(n + 1);
    start << z0, violation;
    auto working = detail::initial_working_set(elastic, start, 1e-12);
    const auto ph1 =
        detail::run_active_set(elastic, start, std::move(working), opts.max_iterations + 4 * mi);
    phase1_iterations = ph1.iterations;
    if (ph1.status != SolveStatus::Optimal) {
      out.status = SolveStatus::IterationLimit;
      out.primal = ph1.z.head(n);
      out.iterations = phase1_iterations;
      return out;
    }
    if (ph1.z(n) > opts.feasibility_tol) {
      out.status = SolveStatus::Infeasible;
      out.primal = ph1.z.head(n);
      out.ray = Vector::Zero(mi + me);
      out.ray.head(mi) = ph1.lambda.head(mi);
      if (me > 0) out.ray.tail(me) = ph1.nu;
      out.iterations = phase1_iterations;
      return out;
    }
    z0 = ph1.z.head(n);
  }

  auto working = detail::initial_working_set(p, z0, opts.feasibility_tol);
  const auto st = detail::run_active_set(p, z0, std::move(working), opts.max_iterations);
  out.status = st.status;
  out.primal = st.z;
  out.iterations = phase1_iterations + st.iterations;
  out.objective = p.objective(st.z);
  if (st.status == SolveStatus::Optimal) {
    out.eq_duals = st.nu;
    out.ineq_duals = st.lambda;
    out.kkt = kkt_residuals(p, st.z, st.nu, st.lambda);
  } else if (st.status == SolveStatus::Unbounded) {
    out.ray = st.ray;
  }
  return out;
}

}  // namespace liftcut
