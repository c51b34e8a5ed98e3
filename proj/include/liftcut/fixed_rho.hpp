#pragma once

#include "liftcut/model.hpp"
#include "liftcut/qp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace liftcut {

/// Scalarized S-lemma containment function for B(mu, sqrt(rho)) inside an
/// ellipsoid, with eigen-coordinates v = U^T (c - A mu) and s_j = tau - lambda_j:
///
///   g(mu, tau) = - sum_j v_j^2 / s_j - mu^T A mu + 2 c^T mu - b - rho tau.
///
/// g is jointly concave on tau > lambda_max; B(mu, sqrt(rho)) lies in P iff
/// sup_tau g(mu, tau) >= 0.
class ContainmentFunction {
 public:
  ContainmentFunction(const Ellipsoid& e, double rho) : e_(e), rho_(rho) {}

  struct Eval {
    double value = 0.0;
    Vector grad;   ///< d + 1
    Matrix hess;   ///< (d + 1) x (d + 1)
  };

  Vector transformed(const Vector& mu) const {
    return e_.eigenvectors().transpose() * (e_.linear() - e_.matrix() * mu);
  }

  double base(const Vector& mu) const {
    return -mu.dot(e_.matrix() * mu) + 2.0 * e_.linear().dot(mu) - e_.offset();
  }

  /// g at (mu, tau); -inf outside the domain tau > lambda_j for v_j != 0.
  double value(const Vector& mu, double tau) const {
    const Vector v = transformed(mu);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double s = tau - e_.eigenvalues()(j);
      if (v(j) == 0.0) continue;
      if (s <= 0.0) return -kInf;
      sum += v(j) * v(j) / s;
    }
    return -sum + base(mu) - rho_ * tau;
  }

  Eval evaluate(const Vector& mu, double tau) const {
    const auto d = e_.dimension();
    const Matrix& u = e_.eigenvectors();
    const Vector& lam = e_.eigenvalues();
    const Vector v = transformed(mu);
    Eval ev;
    ev.grad = Vector::Zero(d + 1);
    ev.hess = Matrix::Zero(d + 1, d + 1);
    double sum = 0.0;
    Vector coef_g = Vector::Zero(d);   // weights of U_j in grad_mu
    Vector coef_h = Vector::Zero(d);   // weights of U_j U_j^T in hess_mumu
    Vector coef_x = Vector::Zero(d);   // weights of U_j in hess_mutau
    double dtau = 0.0;
    double dtautau = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double s = tau - lam(j);
      coef_h(j) = -2.0 * lam(j) * lam(j) / s;
      if (v(j) == 0.0) continue;
      sum += v(j) * v(j) / s;
      coef_g(j) = 2.0 * v(j) * lam(j) / s;
      coef_x(j) = -2.0 * v(j) * lam(j) / (s * s);
      dtau += v(j) * v(j) / (s * s);
      dtautau += -2.0 * v(j) * v(j) / (s * s * s);
    }
    ev.value = -sum + base(mu) - rho_ * tau;
    ev.grad.head(d) = u * coef_g - 2.0 * e_.matrix() * mu + 2.0 * e_.linear();
    ev.grad(d) = dtau - rho_;
    ev.hess.topLeftCorner(d, d) = u * coef_h.asDiagonal() * u.transpose() - 2.0 * e_.matrix();
    ev.hess.block(0, d, d, 1) = u * coef_x;
    ev.hess.block(d, 0, 1, d) = (u * coef_x).transpose();
    ev.hess(d, d) = dtautau;
    return ev;
  }

  double rho() const { return rho_; }
  const Ellipsoid& ellipsoid() const { return e_; }

 private:
  const Ellipsoid& e_;
  double rho_;
};

struct BarrierOptions {
  double initial_weight = 1.0;
  double weight_factor = 0.2;
  double stop = 1e-10;
  int max_newton = 100;
};

namespace detail {

/// Projection of x onto { y : y^T A y - 2 c^T y + b <= 0 }, from the
/// stationarity condition y(t) = (I + t A)^{-1} (x + t c), t >= 0.
inline Vector project_onto_ellipsoid(const Ellipsoid& e, const Vector& x) {
  if (e.value(x) <= 0.0) return x;
  const Matrix& u = e.eigenvectors();
  const Vector& lam = e.eigenvalues();
  const Vector xe = u.transpose() * x;
  const Vector ce = u.transpose() * e.linear();
  auto at = [&](double t) -> Vector {
    Vector ye(xe.size());
    for (Eigen::Index j = 0; j < xe.size(); ++j) ye(j) = (xe(j) + t * ce(j)) / (1.0 + t * lam(j));
    return u * ye;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (e.value(at(hi)) > 0.0 && hi < 1e300) hi *= 2.0;
  for (int k = 0; k < 200 && hi - lo > 1e-16 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (e.value(at(mid)) > 0.0 ? lo : hi) = mid;
  }
  return at(hi);
}

struct PolishResult {
  Vector mu;
  double lambda = 0.0;
  double tau_dual = 0.0;
  KktResiduals kkt;
};

/// Degenerate optimum with tau = lambda_max: the top-eigenspace components of
/// v vanish and their ratios v_j / (tau - lambda_j) stay finite. Fixing
/// tau = lambda_max and imposing v_J = 0 leaves a smooth problem in mu; solve
/// its KKT system by Newton from the barrier point.
inline std::optional<PolishResult> polish_on_boundary(const Ellipsoid& e, const Vector& x,
                                                      double rho, const Vector& mu0,
                                                      double lambda0) {
  const auto d = e.dimension();
  const Matrix& u = e.eigenvectors();
  const Vector& lam = e.eigenvalues();
  const double lmax = e.lambda_max();
  std::vector<Eigen::Index> top, rest;
  for (Eigen::Index j = 0; j < d; ++j) {
    (lmax - lam(j) <= 1e-9 * lmax ? top : rest).push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(top.size());
  // h(mu) = U_J^T (c - A mu) = 0, with gradient rows -lambda_j U_j^T.
  Matrix hgrad(k, d);
  for (Eigen::Index t = 0; t < k; ++t) hgrad.row(t) = -lam(top[t]) * u.col(top[t]).transpose();

  struct Reduced {
    double value;
    Vector grad;
    Matrix hess;
    double dtau;
  };
  auto reduced = [&](const Vector& mu) {
    const Vector v = u.transpose() * (e.linear() - e.matrix() * mu);
    Reduced r{0.0, Vector::Zero(d), Matrix::Zero(d, d), -rho};
    double sum = 0.0;
    for (Eigen::Index j : rest) {
      const double sj = lmax - lam(j);
      sum += v(j) * v(j) / sj;
      r.grad += (2.0 * v(j) * lam(j) / sj) * u.col(j);
      r.hess -= (2.0 * lam(j) * lam(j) / sj) * u.col(j) * u.col(j).transpose();
      r.dtau += v(j) * v(j) / (sj * sj);
    }
    r.value = -sum - mu.dot(e.matrix() * mu) + 2.0 * e.linear().dot(mu) - e.offset() - rho * lmax;
    r.grad += -2.0 * e.matrix() * mu + 2.0 * e.linear();
    r.hess -= 2.0 * e.matrix();
    return r;
  };
  auto hval = [&](const Vector& mu) -> Vector {
    Vector h(k);
    for (Eigen::Index t = 0; t < k; ++t) h(t) = u.col(top[t]).dot(e.linear() - e.matrix() * mu);
    return h;
  };

  // Unknowns (mu, lambda, nu).
  Vector z(d + 1 + k);
  z.head(d) = mu0;
  z(d) = lambda0;
  z.tail(k).setZero();
  {
    // Initial nu by least squares on stationarity.
    const Reduced r = reduced(mu0);
    const Vector rhs = 2.0 * (mu0 - x) - lambda0 * r.grad;
    z.tail(k) = hgrad.transpose().colPivHouseholderQr().solve(rhs);
  }
  auto residual = [&](const Vector& w) {
    const Vector mu = w.head(d);
    const Reduced r = reduced(mu);
    Vector f(d + 1 + k);
    f.head(d) = 2.0 * (mu - x) - w(d) * r.grad - hgrad.transpose() * w.tail(k);
    f(d) = r.value;
    f.tail(k) = hval(mu);
    return f;
  };
  Vector f = residual(z);
  for (int it = 0; it < 30 && f.cwiseAbs().maxCoeff() > 1e-15 * (1.0 + x.norm()); ++it) {
    const Reduced r = reduced(z.head(d));
    Matrix jac = Matrix::Zero(d + 1 + k, d + 1 + k);
    jac.topLeftCorner(d, d) = 2.0 * Matrix::Identity(d, d) - z(d) * r.hess;
    jac.block(0, d, d, 1) = -r.grad;
    jac.block(0, d + 1, d, k) = -hgrad.transpose();
    jac.block(d, 0, 1, d) = r.grad.transpose();
    jac.block(d + 1, 0, k, d) = hgrad;
    const Vector step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) return std::nullopt;
    z += step;
    f = residual(z);
  }

  PolishResult out;
  out.mu = z.head(d);
  out.lambda = z(d);
  const Reduced r = reduced(out.mu);
  // Limits of v_j / (tau - lambda_j) on the top eigenspace, read off nu.
  double ratio2 = 0.0;
  if (out.lambda > 0.0) {
    for (Eigen::Index t = 0; t < k; ++t) {
      const double rt = z(d + 1 + t) / (2.0 * out.lambda);
      ratio2 += rt * rt;
    }
  }
  out.tau_dual = -out.lambda * (r.dtau + ratio2);
  out.kkt.stationarity = f.head(d).cwiseAbs().maxCoeff();
  out.kkt.primal = std::max(std::max(0.0, -r.value), k > 0 ? f.tail(k).cwiseAbs().maxCoeff() : 0.0);
  out.kkt.dual = std::max({0.0, -out.lambda, -out.tau_dual});
  out.kkt.complementarity = std::abs(out.lambda * r.value);
  return out;
}

}  // namespace detail

/// min ||x* - mu||^2 s.t. B(mu, sqrt(rho)) inside the ellipsoid, solved over
/// (mu, tau) by a log-barrier path on g(mu, tau) >= 0 and tau >= lambda_max.
/// primal = (mu, tau); ineq_duals = multipliers for those two constraints.
/// When the optimum sits on tau = lambda_max the barrier point is polished on
/// that face and tau is reported as exactly lambda_max. At rho = 0 the problem is the Euclidean projection onto P and
/// tau is reported as +inf.
inline SolveOutcome solve_fixed_rho(const Ellipsoid& e, const Vector& x, double rho,
                                    const BarrierOptions& opts = {}) {
  e.require_bounded();
  require_dimension(x.size(), e.dimension(), "solve_fixed_rho query");
  if (!(rho >= 0.0)) throw Error(ErrorCode::InvalidInput, "rho must be >= 0");
  const auto d = e.dimension();
  SolveOutcome out;
  out.primal = Vector::Zero(d + 1);
  out.ineq_duals = Vector::Zero(2);

  if (rho == 0.0) {
    const Vector mu = detail::project_onto_ellipsoid(e, x);
    out.status = SolveStatus::Optimal;
    out.primal.head(d) = mu;
    out.primal(d) = kInf;
    out.objective = (x - mu).squaredNorm();
    return out;
  }

  const double lmax = e.lambda_max();
  // The containment margin is concave and centrally symmetric in mu, so the
  // ellipsoid centre maximizes it; there v = 0 and the best tau is lambda_max.
  const double top = e.depth() - rho * lmax;
  const double scale = 1e-12 * std::max(1.0, e.depth());
  if (top < -scale) {
    out.status = SolveStatus::Infeasible;
    out.primal.head(d) = e.center();
    out.primal(d) = lmax;
    return out;
  }
  if (top <= scale) {
    out.status = SolveStatus::Optimal;
    out.primal.head(d) = e.center();
    out.primal(d) = lmax;
    out.objective = (x - e.center()).squaredNorm();
    return out;
  }

  const ContainmentFunction g(e, rho);
  Vector z(d + 1);
  z.head(d) = e.center();
  z(d) = lmax + std::min(1.0, 0.5 * top / rho);

  auto barrier_value = [&](const Vector& p, double w) {
    const double s = p(d) - lmax;
    if (s <= 0.0) return kInf;
    const double gv = g.value(p.head(d), p(d));
    if (!(gv > 0.0)) return kInf;
    return (x - p.head(d)).squaredNorm() - w * (std::log(gv) + std::log(s));
  };

  int newton_steps = 0;
  double w = opts.initial_weight;
  Vector grad_f(d + 1);
  for (;;) {
    for (int it = 0; it < opts.max_newton; ++it) {
      const auto ev = g.evaluate(z.head(d), z(d));
      const double s = z(d) - lmax;
      grad_f.setZero();
      grad_f.head(d) = 2.0 * (z.head(d) - x);
      Vector grad = grad_f - (w / ev.value) * ev.grad;
      grad(d) -= w / s;
      Matrix hess = -(w / ev.value) * ev.hess + (w / (ev.value * ev.value)) * ev.grad * ev.grad.transpose();
      hess.topLeftCorner(d, d) += 2.0 * Matrix::Identity(d, d);
      hess(d, d) += w / (s * s);
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      ++newton_steps;
      if (!(decrement > 2e-15 * std::max(1.0, std::abs(barrier_value(z, w))))) break;
      const double f0 = barrier_value(z, w);
      double t = 1.0;
      Vector trial = z + step;
      for (int k = 0; k < 80; ++k) {
        trial = z + t * step;
        if (barrier_value(trial, w) <= f0 - 0.25 * t * decrement) break;
        t *= 0.5;
      }
      if (!(barrier_value(trial, w) < f0)) break;
      z = trial;
    }
    if (w * 3.0 <= opts.stop) break;
    w *= opts.weight_factor;
  }

  const auto ev = g.evaluate(z.head(d), z(d));
  const double s = z(d) - lmax;
  out.status = SolveStatus::Optimal;
  out.primal = z;
  out.iterations = newton_steps;
  out.objective = (x - z.head(d)).squaredNorm();
  Vector objective_grad = Vector::Zero(d + 1);
  objective_grad.head(d) = 2.0 * (z.head(d) - x);
  Matrix cols = Matrix::Zero(d + 1, 2);
  cols.col(0) = ev.grad;
  cols(d, 1) = 1.0;
  auto residual = [&](const Eigen::Vector2d& lam) {
    return (objective_grad - cols * lam).cwiseAbs().maxCoeff();
  };
  // w / g loses accuracy once g is tiny, so also fit the multipliers to the
  // stationarity equation (nonnegative least squares over the two columns).
  Eigen::Vector2d lam(w / ev.value, w / s);
  for (const Eigen::Vector2d& cand :
       {Eigen::Vector2d(cols.colPivHouseholderQr().solve(objective_grad)),
        Eigen::Vector2d(std::max(0.0, ev.grad.dot(objective_grad) / ev.grad.squaredNorm()), 0.0)}) {
    if (cand.minCoeff() >= 0.0 && residual(cand) < residual(lam)) lam = cand;
  }
  out.ineq_duals(0) = lam(0);
  out.ineq_duals(1) = lam(1);
  out.kkt.stationarity = residual(lam);
  out.kkt.primal = std::max(0.0, -ev.value);
  out.kkt.complementarity = std::max(lam(0) * ev.value, lam(1) * s);

  if (s <= 1e-6 * std::max(1.0, lmax) && out.kkt.max() > tol::kKkt) {
    const auto pol = detail::polish_on_boundary(e, x, rho, z.head(d), lam(0));
    if (pol && pol->kkt.max() < out.kkt.max() &&
        (x - pol->mu).squaredNorm() <= out.objective + 1e-9 * (1.0 + out.objective)) {
      out.primal.head(d) = pol->mu;
      out.primal(d) = lmax;
      out.objective = (x - pol->mu).squaredNorm();
      out.ineq_duals << pol->lambda, pol->tau_dual;
      out.kkt = pol->kkt;
    }
  }
  return out;
}

}  // namespace liftcut
