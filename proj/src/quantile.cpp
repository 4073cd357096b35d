#include "growthchart/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace growthchart {

double pinball_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("pinball_loss: tau must be in (0, 1)");
  return u >= 0.0 ? u * tau : u * (tau - 1.0);
}

double pinball_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& beta, double tau) {
  Eigen::VectorXd r = y - X * beta;
  double obj = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) obj += pinball_loss(r[i], tau);
  return obj;
}

namespace {

double penalized_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& beta, double tau,
                           const std::optional<QuantilePenalty>& penalty) {
  double obj = pinball_objective(X, y, beta, tau);
  if (penalty && penalty->lambda > 0.0)
    obj += 0.5 * penalty->lambda * beta.dot(penalty->P * beta);
  return obj;
}

// Exact minimizer of sum_i rho_tau(y_i - x_i*b) over scalar b.  The loss is
// piecewise linear with breakpoints at y_i/x_i; scanning the sorted
// breakpoints finds where the subgradient crosses zero.
double solve_scalar_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tau) {
  struct Break {
    double b;       // breakpoint y_i/x_i
    double weight;  // |x_i|
    double t;       // effective quantile level for this term
  };
  std::vector<Break> breaks;
  breaks.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;  // constant term, no dependence on b
    breaks.push_back({y[i] / x[i], std::abs(x[i]), x[i] > 0.0 ? tau : 1.0 - tau});
  }
  if (breaks.empty()) return 0.0;
  std::sort(breaks.begin(), breaks.end(),
            [](const Break& l, const Break& r) { return l.b < r.b; });
  // Derivative of the loss in b left of all breakpoints is -sum w_i t_i;
  // passing breakpoint i adds w_i (t_i + (1 - t_i)) = w_i.
  double slope = 0.0;
  for (const Break& br : breaks) slope -= br.weight * br.t;
  for (const Break& br : breaks) {
    slope += br.weight;
    if (slope >= 0.0) return br.b;
  }
  return breaks.back().b;
}

}  // namespace

QuantileFit fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                         const std::optional<QuantilePenalty>& penalty) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("fit_quantile: tau must be in (0, 1)");
  if (X.rows() != y.size()) throw std::invalid_argument("fit_quantile: rows(X) != len(y)");
  if (penalty) {
    if (penalty->lambda < 0.0)
      throw std::invalid_argument("fit_quantile: penalty lambda must be >= 0");
    if (penalty->P.rows() != penalty->P.cols() || penalty->P.rows() != X.cols())
      throw std::invalid_argument("fit_quantile: penalty dimension != cols(X)");
  }
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  QuantileFit out;
  out.tau = tau;
  if (p == 0) {
    out.coeffs = Eigen::VectorXd();
    out.objective = pinball_objective(X, y, out.coeffs, tau);
    return out;
  }

  // Flag degenerate all-zero columns; they are held at coefficient zero.
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (X.col(j).cwiseAbs().maxCoeff() == 0.0) {
      out.report.warnings.push_back("column " + std::to_string(j) + " is identically zero");
    } else {
      active.push_back(j);
    }
  }
  const bool penalized = penalty && penalty->lambda > 0.0;

  if (active.size() == 1 && !penalized) {
    out.coeffs = Eigen::VectorXd::Zero(p);
    out.coeffs[active[0]] = solve_scalar_exact(X.col(active[0]), y, tau);
    out.objective = penalized_objective(X, y, out.coeffs, tau, penalty);
    return out;
  }

  Eigen::MatrixXd Xa(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) Xa.col(static_cast<Eigen::Index>(j)) = X.col(active[j]);
  Eigen::MatrixXd Pa;
  if (penalized) {
    Pa.resize(static_cast<Eigen::Index>(active.size()), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = 0; j < active.size(); ++j)
        Pa(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            penalty->P(active[i], active[j]);
  }
  const Eigen::Index pa = Xa.cols();

  auto expand = [&](const Eigen::VectorXd& ba) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
    for (std::size_t j = 0; j < active.size(); ++j) full[active[j]] = ba[static_cast<Eigen::Index>(j)];
    return full;
  };
  auto objective_at = [&](const Eigen::VectorXd& ba) {
    return penalized_objective(X, y, expand(ba), tau, penalty);
  };

  // Warm start: (penalized) least squares.
  Eigen::VectorXd beta;
  {
    Eigen::MatrixXd A = Xa.transpose() * Xa;
    if (penalized) A += penalty->lambda * Pa;
    A.diagonal().array() += 1e-10 * std::max(1.0, A.diagonal().maxCoeff());
    beta = A.ldlt().solve(Xa.transpose() * y);
  }
  Eigen::VectorXd best = beta;
  double best_obj = objective_at(beta);
  {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(pa);
    double zero_obj = objective_at(zero);
    if (zero_obj < best_obj) {
      best = zero;
      best_obj = zero_obj;
    }
  }

  // Smoothed-check MM: eps halves from 1e-2 to 1e-8; each inner step solves
  // the reweighted normal equations from the quadratic majorizer.
  const Eigen::VectorXd Xt1 = Xa.transpose() * Eigen::VectorXd::Ones(n);
  const int max_inner = 100;
  int total_iters = 0;
  bool converged = false;
  double prev_obj = objective_at(beta);
  for (double eps = 1e-2; eps >= 1e-8; eps *= 0.5) {
    for (int it = 0; it < max_inner; ++it) {
      ++total_iters;
      Eigen::VectorXd r = y - Xa * beta;
      Eigen::VectorXd w = (r.cwiseAbs().array() + eps).inverse();
      Eigen::MatrixXd A = Xa.transpose() * w.asDiagonal() * Xa;
      if (penalized) A += 2.0 * penalty->lambda * Pa;
      Eigen::VectorXd rhs = Xa.transpose() * (w.asDiagonal() * y) + (2.0 * tau - 1.0) * Xt1;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      Eigen::VectorXd next = ldlt.solve(rhs);
      if (!next.allFinite() || (A * next - rhs).norm() >
                                   1e-6 * (rhs.norm() + A.norm() * next.norm() + 1.0)) {
        // Rank-deficient majorizer; any minimizer keeps the descent property.
        next = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(rhs);
        if (!next.allFinite()) break;
      }
      beta = next;
      double obj = objective_at(beta);
      if (obj < best_obj) {
        best = beta;
        best_obj = obj;
      }
      double change = std::abs(prev_obj - obj);
      prev_obj = obj;
      if (change <= 1e-12 * (1.0 + std::abs(obj))) break;
    }
  }
  // Converged when the final inner loop stabilized the true objective.
  converged = true;
  {
    Eigen::VectorXd r = y - Xa * beta;
    Eigen::VectorXd w = (r.cwiseAbs().array() + 1e-8).inverse();
    Eigen::MatrixXd A = Xa.transpose() * w.asDiagonal() * Xa;
    if (penalized) A += 2.0 * penalty->lambda * Pa;
    Eigen::VectorXd rhs = Xa.transpose() * (w.asDiagonal() * y) + (2.0 * tau - 1.0) * Xt1;
    Eigen::VectorXd next = A.ldlt().solve(rhs);
    if (next.allFinite()) {
      double obj = objective_at(next);
      if (obj < best_obj) {
        best = next;
        best_obj = obj;
      }
      converged = std::abs(obj - best_obj) <= 1e-8 * (1.0 + std::abs(best_obj));
    }
  }

  out.coeffs = expand(best);
  out.objective = best_obj;
  out.report.iterations = total_iters;
  out.report.converged = converged;
  return out;
}

}  // namespace growthchart
