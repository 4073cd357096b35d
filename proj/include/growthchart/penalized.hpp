#pragma once

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <vector>

namespace growthchart {

// (X'X + lambda*P) is singular; carries the offending null direction.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, Eigen::VectorXd null_direction)
      : std::runtime_error(what), null_direction(std::move(null_direction)) {}
  Eigen::VectorXd null_direction;
};

// Result of a penalized least-squares fit.
struct LinearFit {
  Eigen::VectorXd coeffs;
  double lambda = 0.0;
  double edf = 0.0;        // trace of the hat matrix X (X'X + lambda P)^-1 X'
  double gcv = 0.0;        // n*RSS/(n - edf)^2; NaN when edf == n
  double objective = 0.0;  // RSS + lambda * b'Pb at the solution
  double rss = 0.0;
};

// Factorization of the penalized normal equations for one (X, P) pair,
// reusable across lambda values (a GCV sweep factors once and solves each
// grid point in O(m^2)).
//
// When X has full column rank the Demmler-Reinsch form is used:
//   X'X = R'R,  R^-T P R^-1 = U diag(s) U',
//   edf(lambda) = sum_j 1/(1 + lambda s_j),
// which stays well conditioned for arbitrarily large lambda.  Otherwise a
// dense eigendecomposition of X'X + lambda*P is taken per solve, and a
// singular system raises SingularSystemError.
class PenalizedSolver {
 public:
  PenalizedSolver(const Eigen::MatrixXd& X, const Eigen::MatrixXd& P);

  LinearFit fit(const Eigen::VectorXd& y, double lambda) const;
  double edf(double lambda) const;

 private:
  LinearFit fit_fallback(const Eigen::VectorXd& y, double lambda) const;

  Eigen::MatrixXd X_;
  Eigen::MatrixXd P_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  bool full_rank_ = false;
  Eigen::MatrixXd R_;          // Cholesky factor of X'X
  Eigen::MatrixXd U_;          // eigenvectors of R^-T P R^-1
  Eigen::VectorXd s_;          // eigenvalues, clamped to >= 0
  Eigen::MatrixXd back_;       // R^-1 U
  Eigen::MatrixXd forward_;    // U' R^-T
};

// coeffs solve (X'X + lambda*P) b = X'y.
// Throws SingularSystemError when the system is singular and
// std::invalid_argument on dimension mismatch or lambda < 0.
LinearFit fit_penalized_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& P, double lambda);

// Effective degrees of freedom trace(X (X'X + lambda P)^-1 X').
double effective_df(const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, double lambda);

struct GcvResult {
  double lambda_star = 0.0;
  LinearFit fit;
  std::vector<double> scores;  // one per grid point; NaN where skipped
};

// Grid search minimizing GCV(lambda) = n*RSS/(n - edf)^2.  Grid points with
// edf == n (or a singular system) are skipped with a NaN score; if every
// point is skipped a std::runtime_error is raised.  Scores within a 1e-10
// relative band of the minimum count as ties, broken toward larger lambda.
GcvResult select_lambda_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& P, const std::vector<double>& grid);
// Same search on an existing factorization (one factorization, many sweeps).
GcvResult select_lambda_gcv(const PenalizedSolver& solver, const Eigen::VectorXd& y,
                            const std::vector<double>& grid);

// Default smoothing grid: 61 log-spaced points in [1e-6, 1e6].
std::vector<double> default_lambda_grid();

}  // namespace growthchart
