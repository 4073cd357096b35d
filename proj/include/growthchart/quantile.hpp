#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace growthchart {

// Check (pinball) loss rho_tau(u) = u*(tau - 1{u<0}).
// Throws std::invalid_argument unless 0 < tau < 1.
double pinball_loss(double u, double tau);

// Sum of check losses plus (lambda/2) b'Pb when a penalty is attached.
double pinball_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& beta, double tau);

struct QuantilePenalty {
  Eigen::MatrixXd P;
  double lambda = 0.0;
};

struct QuantileSolverReport {
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> warnings;  // e.g. degenerate all-zero columns
};

struct QuantileFit {
  double tau = 0.5;
  Eigen::VectorXd coeffs;
  double objective = 0.0;  // achieved penalized pinball objective
  QuantileSolverReport report;
};

// Minimizes sum_i rho_tau(y_i - X_i b) + (lambda/2) b'Pb.
//
// Single-column unpenalized problems are solved exactly as a weighted
// quantile over the residual breakpoints.  The general case runs the
// smoothed-check MM iteration: each outer step halves the smoothing
// parameter (1e-2 down to 1e-8) and the inner loop solves the reweighted
// normal equations (X'WX + 2 lambda P) b = X'W y + (2 tau - 1) X'1 with
// W = diag(1/(eps + |r_i|)).  The returned objective is the exact check
// loss at the final coefficients and is never worse than the zero vector
// or the least-squares warm start.
//
// Non-convergence within the iteration budget is reported through the
// solver report, with the best coefficients still returned.  All-zero
// columns are excluded from the solve (coefficient 0) and flagged.
QuantileFit fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                         const std::optional<QuantilePenalty>& penalty = std::nullopt);

}  // namespace growthchart
