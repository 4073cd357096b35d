#include "growthchart/penalized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace growthchart {

namespace {

void check_dims(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                const Eigen::MatrixXd& P, double lambda) {
  if (X.rows() != y.size())
    throw std::invalid_argument("penalized fit: rows(X) != len(y)");
  if (P.rows() != P.cols() || P.rows() != X.cols())
    throw std::invalid_argument("penalized fit: penalty dimension != cols(X)");
  if (lambda < 0.0) throw std::invalid_argument("penalized fit: lambda must be >= 0");
}

double gcv_score(Eigen::Index n, double rss, double edf) {
  const double denom = static_cast<double>(n) - edf;
  if (std::abs(denom) < 1e-9) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(n) * rss / (denom * denom);
}

}  // namespace

PenalizedSolver::PenalizedSolver(const Eigen::MatrixXd& X, const Eigen::MatrixXd& P)
    : X_(X), P_(P), n_(X.rows()), m_(X.cols()) {
  if (P.rows() != P.cols() || P.rows() != m_)
    throw std::invalid_argument("PenalizedSolver: penalty dimension != cols(X)");
  Eigen::MatrixXd XtX = X_.transpose() * X_;
  Eigen::LLT<Eigen::MatrixXd> llt(XtX);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    double dmin = diag.minCoeff(), dmax = diag.maxCoeff();
    // Near-singular X'X (exactly collinear columns round to a tiny pivot)
    // must take the per-solve fallback, which detects and reports the
    // null direction instead of silently solving with a garbage factor.
    if (dmin > 0.0 && dmin > 1e-7 * dmax) {
      full_rank_ = true;
      R_ = llt.matrixU();
      // B = R^-T P R^-1, symmetric PSD
      Eigen::MatrixXd B = R_.transpose().triangularView<Eigen::Lower>().solve(P_);
      B = R_.transpose().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(B.transpose()));
      B = 0.5 * (B + B.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
      U_ = eig.eigenvectors();
      s_ = eig.eigenvalues().cwiseMax(0.0);
      // Eigenvalues of the penalty's null space come back as rounding noise
      // of order eps*|B|; snap them to zero so edf(lambda) converges to the
      // exact nullity instead of drifting once lambda*noise reaches O(1).
      const double smax = s_.maxCoeff();
      if (smax > 0.0) {
        for (Eigen::Index j = 0; j < s_.size(); ++j) {
          if (s_[j] < 1e-12 * smax) s_[j] = 0.0;
        }
      }
      back_ = R_.triangularView<Eigen::Upper>().solve(U_);
      forward_ = U_.transpose() *
                 R_.transpose().triangularView<Eigen::Lower>().solve(
                     Eigen::MatrixXd::Identity(m_, m_));
    }
  }
}

double PenalizedSolver::edf(double lambda) const {
  if (full_rank_) {
    double t = 0.0;
    for (Eigen::Index j = 0; j < m_; ++j) t += 1.0 / (1.0 + lambda * s_[j]);
    return t;
  }
  // Fallback shares the fit path.
  Eigen::VectorXd dummy = Eigen::VectorXd::Zero(n_);
  return fit_fallback(dummy, lambda).edf;
}

LinearFit PenalizedSolver::fit(const Eigen::VectorXd& y, double lambda) const {
  if (y.size() != n_) throw std::invalid_argument("PenalizedSolver::fit: rows(X) != len(y)");
  if (lambda < 0.0) throw std::invalid_argument("PenalizedSolver::fit: lambda must be >= 0");
  if (!full_rank_) return fit_fallback(y, lambda);

  Eigen::VectorXd z = forward_ * (X_.transpose() * y);
  Eigen::VectorXd shrunk(m_);
  for (Eigen::Index j = 0; j < m_; ++j) shrunk[j] = z[j] / (1.0 + lambda * s_[j]);
  LinearFit out;
  out.coeffs = back_ * shrunk;
  out.lambda = lambda;
  out.edf = edf(lambda);
  out.rss = (y - X_ * out.coeffs).squaredNorm();
  out.objective = out.rss + lambda * out.coeffs.dot(P_ * out.coeffs);
  out.gcv = gcv_score(n_, out.rss, out.edf);
  return out;
}

LinearFit PenalizedSolver::fit_fallback(const Eigen::VectorXd& y, double lambda) const {
  Eigen::MatrixXd XtX = X_.transpose() * X_;
  Eigen::MatrixXd A = XtX + lambda * P_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  if (ev.minCoeff() < tol) {
    Eigen::Index which;
    ev.cwiseAbs().minCoeff(&which);
    throw SingularSystemError(
        "penalized fit: X'X + lambda*P is singular (lambda = " + std::to_string(lambda) +
            "); null direction attached",
        eig.eigenvectors().col(which));
  }
  Eigen::VectorXd w = eig.eigenvectors().transpose() * (X_.transpose() * y);
  for (Eigen::Index j = 0; j < m_; ++j) w[j] /= ev[j];
  LinearFit out;
  out.coeffs = eig.eigenvectors() * w;
  out.lambda = lambda;
  // edf = trace(A^-1 X'X)
  Eigen::MatrixXd T = eig.eigenvectors().transpose() * XtX * eig.eigenvectors();
  double edf = 0.0;
  for (Eigen::Index j = 0; j < m_; ++j) edf += T(j, j) / ev[j];
  out.edf = edf;
  out.rss = (y - X_ * out.coeffs).squaredNorm();
  out.objective = out.rss + lambda * out.coeffs.dot(P_ * out.coeffs);
  out.gcv = gcv_score(n_, out.rss, out.edf);
  return out;
}

LinearFit fit_penalized_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& P, double lambda) {
  check_dims(X, y, P, lambda);
  return PenalizedSolver(X, P).fit(y, lambda);
}

double effective_df(const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, double lambda) {
  if (P.rows() != P.cols() || P.rows() != X.cols())
    throw std::invalid_argument("effective_df: penalty dimension != cols(X)");
  if (lambda < 0.0) throw std::invalid_argument("effective_df: lambda must be >= 0");
  PenalizedSolver solver(X, P);
  return solver.edf(lambda);
}

GcvResult select_lambda_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& P, const std::vector<double>& grid) {
  return select_lambda_gcv(PenalizedSolver(X, P), y, grid);
}

GcvResult select_lambda_gcv(const PenalizedSolver& solver, const Eigen::VectorXd& y,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("select_lambda_gcv: empty grid");
  for (double l : grid)
    if (l < 0.0) throw std::invalid_argument("select_lambda_gcv: negative lambda in grid");

  GcvResult out;
  out.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<LinearFit> fits(grid.size());
  std::vector<bool> ok(grid.size(), false);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      fits[i] = solver.fit(y, grid[i]);
    } catch (const SingularSystemError&) {
      continue;  // skipped grid point
    }
    if (std::isnan(fits[i].gcv)) continue;  // edf == n, GCV undefined
    ok[i] = true;
    out.scores[i] = fits[i].gcv;
    best = std::min(best, fits[i].gcv);
  }
  if (!std::isfinite(best))
    throw std::runtime_error("select_lambda_gcv: GCV undefined at every grid point");

  // Ties (within a relative band) break toward the larger, smoother lambda.
  const double tol = 1e-10 * (1.0 + std::abs(best));
  std::size_t chosen = 0;
  double chosen_lambda = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (ok[i] && out.scores[i] <= best + tol && grid[i] > chosen_lambda) {
      chosen = i;
      chosen_lambda = grid[i];
    }
  }
  out.lambda_star = grid[chosen];
  out.fit = fits[chosen];
  return out;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(61);
  for (int i = 0; i < 61; ++i) grid[i] = std::pow(10.0, -6.0 + 12.0 * i / 60.0);
  return grid;
}

}  // namespace growthchart
