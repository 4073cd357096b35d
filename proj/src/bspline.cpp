#include "growthchart/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace growthchart {

namespace {

// k^5 without overflow for the k range reachable from a 64-bit n.
bool pow5_leq(std::int64_t k, std::int64_t n) {
  unsigned __int128 p = 1;
  for (int i = 0; i < 5; ++i) p *= static_cast<unsigned __int128>(k);
  return p <= static_cast<unsigned __int128>(n);
}

}  // namespace

int advise_knot_count(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("advise_knot_count: n must be >= 1");
  std::int64_t k = static_cast<std::int64_t>(std::pow(static_cast<double>(n), 0.2));
  if (k < 1) k = 1;
  while (pow5_leq(k + 1, n)) ++k;
  while (k > 1 && !pow5_leq(k, n)) --k;
  return static_cast<int>(k);
}

KnotVector::KnotVector(double lo, double hi, std::vector<double> interior, int degree)
    : lo_(lo), hi_(hi), degree_(degree), interior_(std::move(interior)) {
  if (!(lo < hi)) throw std::invalid_argument("KnotVector: requires lo < hi");
  if (degree < 0) throw std::invalid_argument("KnotVector: degree must be >= 0");
  double prev = lo_;
  for (double t : interior_) {
    if (!(t > prev))
      throw std::invalid_argument("KnotVector: interior knots must be strictly increasing");
    if (!(t > lo_ && t < hi_))
      throw std::invalid_argument("KnotVector: interior knots must lie strictly inside (lo, hi)");
    prev = t;
  }
  augmented_.reserve(interior_.size() + 2 * (degree_ + 1));
  augmented_.insert(augmented_.end(), degree_ + 1, lo_);
  augmented_.insert(augmented_.end(), interior_.begin(), interior_.end());
  augmented_.insert(augmented_.end(), degree_ + 1, hi_);
}

KnotVector make_knots(double lo, double hi, int k, KnotPlacement placement,
                      std::span<const double> xs, int degree) {
  if (!(lo < hi)) throw std::invalid_argument("make_knots: requires lo < hi");
  if (k < 1) throw std::invalid_argument("make_knots: requires k >= 1");
  std::vector<double> interior(k);
  if (placement == KnotPlacement::equal_spacing) {
    for (int i = 1; i <= k; ++i) interior[i - 1] = lo + i * (hi - lo) / (k + 1);
  } else {
    if (xs.empty())
      throw std::invalid_argument("make_knots: covariate_quantiles needs a covariate sample");
    std::vector<double> sorted(xs.begin(), xs.end());
    for (double x : sorted)
      if (x < lo || x > hi)
        throw std::invalid_argument("make_knots: covariate sample outside [lo, hi]");
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    for (int i = 1; i <= k; ++i) {
      double p = static_cast<double>(i) / (k + 1);
      auto idx = static_cast<std::size_t>(std::ceil(p * n)) - 1;
      idx = std::min(idx, sorted.size() - 1);
      interior[i - 1] = sorted[idx];
    }
    for (int i = 1; i < k; ++i)
      if (interior[i] <= interior[i - 1])
        throw std::runtime_error("make_knots: duplicate quantile knots (quantiles " +
                                 std::to_string(i) + "/" + std::to_string(k + 1) + " and " +
                                 std::to_string(i + 1) + "/" + std::to_string(k + 1) +
                                 " coincide)");
    if (interior.front() <= lo || interior.back() >= hi)
      throw std::runtime_error("make_knots: quantile knot falls on the domain boundary");
  }
  return KnotVector(lo, hi, std::move(interior), degree);
}

BSplineBasis::BSplineBasis(KnotVector knots) : knots_(std::move(knots)) {}

int BSplineBasis::find_span(double x, std::span<const double> t, int nb) const {
  const int p = knots_.degree();
  // x == hi belongs to the last nonempty interval [t[nb-1], t[nb]).
  if (x >= t[nb]) return nb - 1;
  auto it = std::upper_bound(t.begin() + p, t.begin() + nb + 1, x);
  return static_cast<int>(std::distance(t.begin(), it)) - 1;
}

void BSplineBasis::basis_on_span(double x, int span, std::span<const double> t, int deg,
                                 double* out) const {
  // Cox-de Boor triangular recursion; out[0..deg] are the values of
  // B_{span-deg}, ..., B_{span} at x.
  out[0] = 1.0;
  std::vector<double> left(deg + 1), right(deg + 1);
  for (int j = 1; j <= deg; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

Eigen::VectorXd BSplineBasis::eval_basis(double x) const {
  if (x < lo() || x > hi()) {
    std::ostringstream msg;
    msg << "eval_basis: x = " << x << " outside [" << lo() << ", " << hi() << "]";
    throw std::domain_error(msg.str());
  }
  const int p = degree();
  const int nb = num_basis();
  std::span<const double> t(knots_.augmented());
  const int span = find_span(x, t, nb);
  std::vector<double> local(p + 1);
  basis_on_span(x, span, t, p, local.data());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nb);
  for (int j = 0; j <= p; ++j) out[span - p + j] = local[j];
  return out;
}

Eigen::MatrixXd BSplineBasis::design_matrix(std::span<const double> xs) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), num_basis());
  for (std::size_t i = 0; i < xs.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = eval_basis(xs[i]);
  return X;
}

Eigen::MatrixXd BSplineBasis::design_matrix(const Eigen::VectorXd& xs) const {
  return design_matrix(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())));
}

double BSplineBasis::eval_spline(const Eigen::VectorXd& coeffs, double x, int deriv) const {
  if (coeffs.size() != num_basis())
    throw std::invalid_argument("eval_spline: coefficient length " +
                                std::to_string(coeffs.size()) + " != num_basis " +
                                std::to_string(num_basis()));
  if (deriv < 0 || deriv > 2 || deriv > degree())
    throw std::invalid_argument("eval_spline: derivative order must be 0, 1 or 2 and <= degree");
  if (x < lo() || x > hi()) {
    std::ostringstream msg;
    msg << "eval_spline: x = " << x << " outside [" << lo() << ", " << hi() << "]";
    throw std::domain_error(msg.str());
  }

  const auto& aug = knots_.augmented();
  std::vector<double> c(coeffs.data(), coeffs.data() + coeffs.size());
  int p = degree();
  int t_begin = 0;
  int t_end = static_cast<int>(aug.size());

  // Differentiate: c'_i = p*(c_{i+1} - c_i)/(t_{i+p+1} - t_{i+1}) over the
  // knot sequence with one knot trimmed from each end.
  for (int d = 0; d < deriv; ++d) {
    std::vector<double> cd(c.size() - 1);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      double dt = aug[t_begin + i + p + 1] - aug[t_begin + i + 1];
      cd[i] = static_cast<double>(p) * (c[i + 1] - c[i]) / dt;
    }
    c = std::move(cd);
    ++t_begin;
    --t_end;
    --p;
  }

  std::span<const double> t(aug.data() + t_begin, static_cast<std::size_t>(t_end - t_begin));
  const int nb = static_cast<int>(c.size());
  // Span search on the trimmed sequence; interval layout matches the
  // original sequence shifted by t_begin.
  int span;
  if (x >= t[nb]) {
    span = nb - 1;
  } else {
    auto it = std::upper_bound(t.begin() + p, t.begin() + nb + 1, x);
    span = static_cast<int>(std::distance(t.begin(), it)) - 1;
  }
  std::vector<double> local(p + 1);
  basis_on_span(x, span, t, p, local.data());
  double v = 0.0;
  for (int j = 0; j <= p; ++j) v += c[span - p + j] * local[j];
  return v;
}

Eigen::VectorXd BSplineBasis::greville_abscissae() const {
  const int p = degree();
  const int nb = num_basis();
  const auto& t = knots_.augmented();
  Eigen::VectorXd xi(nb);
  for (int i = 0; i < nb; ++i) {
    double s = 0.0;
    for (int j = 1; j <= p; ++j) s += t[i + j];
    xi[i] = (p > 0) ? s / p : 0.5 * (t[i] + t[i + 1]);
  }
  return xi;
}

Eigen::MatrixXd difference_penalty(int num_basis, int order) {
  if (num_basis < 1) throw std::invalid_argument("difference_penalty: num_basis must be >= 1");
  if (order < 1 || order >= num_basis)
    throw std::invalid_argument("difference_penalty: requires 1 <= order < num_basis");
  // Rows of D carry the alternating binomial pattern of the order-th
  // forward difference.
  std::vector<double> w(order + 1);
  for (int j = 0; j <= order; ++j) {
    double binom = 1.0;
    for (int i = 0; i < j; ++i) binom = binom * (order - i) / (i + 1);
    w[j] = ((order - j) % 2 == 0 ? 1.0 : -1.0) * binom;
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(num_basis - order, num_basis);
  for (int i = 0; i < num_basis - order; ++i)
    for (int j = 0; j <= order; ++j) D(i, i + j) = w[j];
  return D.transpose() * D;
}

}  // namespace growthchart
