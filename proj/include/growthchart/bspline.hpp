#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace growthchart {

// Suggested interior knot count for a sample of size n: floor(n^(1/5)),
// computed in integer arithmetic so exact fifth powers land on the
// correct side (3^5 = 243 -> 3, not 2).
int advise_knot_count(std::int64_t n);

enum class KnotPlacement { equal_spacing, covariate_quantiles };

// Knot sequence for a spline basis on a closed interval [lo, hi].
// Boundary knots are repeated degree+1 times (clamped basis), so the
// number of basis functions is interior.size() + degree + 1.
class KnotVector {
 public:
  // interior must be strictly increasing and strictly inside (lo, hi).
  KnotVector(double lo, double hi, std::vector<double> interior, int degree = 3);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int degree() const { return degree_; }
  const std::vector<double>& interior() const { return interior_; }
  // Full knot sequence with repeated boundary knots,
  // size = interior + 2*(degree+1).
  const std::vector<double>& augmented() const { return augmented_; }
  int num_basis() const { return static_cast<int>(interior_.size()) + degree_ + 1; }

 private:
  double lo_;
  double hi_;
  int degree_;
  std::vector<double> interior_;
  std::vector<double> augmented_;
};

// Builds a knot vector with k interior knots.
//   equal_spacing:       knots at lo + i*(hi-lo)/(k+1), i = 1..k.
//   covariate_quantiles: knots at the i/(k+1) empirical quantiles of xs
//                        (sort-and-index, Q(p) = sorted[ceil(p*n)-1]).
// Throws std::invalid_argument on a degenerate interval, and
// std::runtime_error if quantile knots collide or fall on the boundary.
KnotVector make_knots(double lo, double hi, int k,
                      KnotPlacement placement = KnotPlacement::equal_spacing,
                      std::span<const double> xs = {}, int degree = 3);

// B-spline basis over a fixed knot vector.  Evaluation uses the Cox-de Boor
// triangular recursion on the knot span; at most degree+1 values are
// nonzero at any x.  Evaluation exactly at hi is assigned to the last
// interval, so the basis is a partition of unity on the closed [lo, hi].
//
// Immutable after construction; all methods are const and thread-safe.
class BSplineBasis {
 public:
  explicit BSplineBasis(KnotVector knots);

  const KnotVector& knots() const { return knots_; }
  int num_basis() const { return knots_.num_basis(); }
  int degree() const { return knots_.degree(); }
  double lo() const { return knots_.lo(); }
  double hi() const { return knots_.hi(); }

  // All basis values at x as a dense vector of length num_basis().
  // Throws std::domain_error if x is outside [lo, hi].
  Eigen::VectorXd eval_basis(double x) const;

  // Row i = eval_basis(xs[i]); every row sums to 1.
  Eigen::MatrixXd design_matrix(std::span<const double> xs) const;
  Eigen::MatrixXd design_matrix(const Eigen::VectorXd& xs) const;

  // Value of the spline sum_k coeffs[k] B_k at x, or of its derivative.
  // Derivatives use coefficient differencing: the deriv-th derivative is a
  // spline of degree degree-deriv with differenced coefficients.
  // deriv must be 0, 1 or 2 and at most degree().
  double eval_spline(const Eigen::VectorXd& coeffs, double x, int deriv = 0) const;

  // Greville abscissae (knot averages); a spline with coeffs[i] = a + b*xi_i
  // reproduces the linear function a + b*x.
  Eigen::VectorXd greville_abscissae() const;

 private:
  // Index of the knot span containing x, in [degree, num_basis-1].
  int find_span(double x, std::span<const double> t, int nb) const;
  // The degree+1 nonzero basis values on the span.
  void basis_on_span(double x, int span, std::span<const double> t, int deg,
                     double* out) const;

  KnotVector knots_;
};

// Difference penalty P = D'D where D is the order-th forward-difference
// operator on coefficient vectors; symmetric PSD with rank
// num_basis - order.  order must be < num_basis.
Eigen::MatrixXd difference_penalty(int num_basis, int order);

// Difference-penalty configuration paired with a basis.
struct PenaltyConfig {
  int order = 2;        // difference order d
  double lambda = 0.0;  // smoothing weight, >= 0; 0 = unpenalized
};

}  // namespace growthchart
