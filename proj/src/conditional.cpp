#include "growthchart/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace growthchart {

double apply_transform(HeightTransform t, double h) {
  return t == HeightTransform::cube ? h * h * h : h;
}

ConditionalDesign build_conditional_design(const LongitudinalDataset& data,
                                           const BSplineBasis& basis,
                                           HeightTransform transform) {
  std::vector<std::string> missing_heights;
  std::size_t rows = 0;
  for (const Subject& s : data.subjects)
    if (s.visits.size() >= 2) rows += s.visits.size() - 1;

  ConditionalDesign design;
  const int nb = basis.num_basis();
  design.X.resize(static_cast<Eigen::Index>(rows), nb + 3);
  design.y.resize(static_cast<Eigen::Index>(rows));
  design.index.reserve(rows);

  Eigen::Index r = 0;
  for (std::size_t si = 0; si < data.subjects.size(); ++si) {
    const Subject& s = data.subjects[si];
    for (std::size_t j = 1; j < s.visits.size(); ++j) {
      const Measurement& prev = s.visits[j - 1];
      const Measurement& cur = s.visits[j];
      if (!cur.h) {
        missing_heights.push_back("subject " + s.id + ", visit " + std::to_string(j + 1));
        continue;
      }
      const double gap = cur.t - prev.t;
      design.X.row(r).head(nb) = basis.eval_basis(cur.t);
      design.X(r, nb) = prev.w;
      design.X(r, nb + 1) = gap * prev.w;
      design.X(r, nb + 2) = apply_transform(transform, *cur.h);
      design.y[r] = cur.w;
      design.index.push_back({si, j});
      ++r;
    }
  }
  if (!missing_heights.empty()) {
    std::ostringstream msg;
    msg << "build_conditional_design: height required by the transform is missing at "
        << missing_heights.size() << " row(s): ";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing_heights.size(), 10); ++i) {
      if (i) msg << "; ";
      msg << missing_heights[i];
    }
    if (missing_heights.size() > 10) msg << "; ...";
    throw std::invalid_argument(msg.str());
  }
  return design;
}

namespace {

std::string column_role(Eigen::Index j, int nb) {
  if (j < nb) return "g-spline basis column " + std::to_string(j);
  if (j == nb) return "lag weight (W_prev)";
  if (j == nb + 1) return "gap interaction (D*W_prev)";
  return "height T(H)";
}

void check_rank(const Eigen::MatrixXd& X, int nb) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() == X.cols()) return;

  // Name the classic pathology directly when it applies.
  const Eigen::VectorXd lag = X.col(nb);
  const Eigen::VectorXd gap_lag = X.col(nb + 1);
  if (lag.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::VectorXd ratio(gap_lag.size());
    bool proportional = true;
    double r0 = 0.0;
    bool have_r0 = false;
    for (Eigen::Index i = 0; i < lag.size() && proportional; ++i) {
      if (lag[i] == 0.0) continue;
      double r = gap_lag[i] / lag[i];
      if (!have_r0) {
        r0 = r;
        have_r0 = true;
      } else if (std::abs(r - r0) > 1e-12 * (1.0 + std::abs(r0))) {
        proportional = false;
      }
    }
    if (have_r0 && proportional)
      throw std::runtime_error(
          "fit_conditional_model: rank-deficient design; collinear pair: lag weight (W_prev) "
          "and gap interaction (D*W_prev), all visit gaps equal " +
          std::to_string(r0));
  }
  // Otherwise name the first column the pivoted QR left out of the basis.
  const auto& perm = qr.colsPermutation().indices();
  Eigen::Index dropped = perm[qr.rank()];
  throw std::runtime_error("fit_conditional_model: rank-deficient design; " +
                           column_role(dropped, nb) +
                           " is linearly dependent on the other columns");
}

}  // namespace

ConditionalQuantileModel fit_conditional_model(const LongitudinalDataset& data, double tau,
                                               const BSplineBasis& basis,
                                               HeightTransform transform,
                                               const std::optional<QuantilePenalty>& penalty) {
  ConditionalDesign design = build_conditional_design(data, basis, transform);
  const int nb = basis.num_basis();
  if (design.X.rows() < design.X.cols())
    throw std::invalid_argument("fit_conditional_model: " + std::to_string(design.X.rows()) +
                                " rows for " + std::to_string(design.X.cols()) +
                                " columns; more transitions needed");
  check_rank(design.X, nb);

  std::optional<QuantilePenalty> full_penalty;
  if (penalty) {
    // The supplied penalty acts on the g coefficients only.
    if (penalty->P.rows() != nb)
      throw std::invalid_argument("fit_conditional_model: penalty dimension != basis size");
    QuantilePenalty qp;
    qp.lambda = penalty->lambda;
    qp.P = Eigen::MatrixXd::Zero(nb + 3, nb + 3);
    qp.P.topLeftCorner(nb, nb) = penalty->P;
    full_penalty = std::move(qp);
  }

  QuantileFit fit = fit_quantile(design.X, design.y, tau, full_penalty);
  ConditionalQuantileModel model{tau,
                                 basis,
                                 fit.coeffs.head(nb),
                                 fit.coeffs[nb],
                                 fit.coeffs[nb + 1],
                                 fit.coeffs[nb + 2],
                                 transform,
                                 fit.objective};
  return model;
}

double predict_conditional_quantile(const ConditionalQuantileModel& model, double t_prev,
                                    double t, double w_prev, double h) {
  if (!(t > t_prev))
    throw std::invalid_argument("predict_conditional_quantile: requires t > t_prev");
  const double g = model.basis.eval_spline(model.g_coeffs, t);  // throws outside domain
  return g + (model.a + model.b * (t - t_prev)) * w_prev +
         model.c * apply_transform(model.transform, h);
}

namespace {

void check_family(const std::vector<ConditionalQuantileModel>& models, std::size_t min_levels) {
  if (models.size() < min_levels)
    throw std::invalid_argument("quantile family: needs at least " +
                                std::to_string(min_levels) + " tau levels");
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (!(models[i].tau > models[i - 1].tau))
      throw std::invalid_argument("quantile family: tau levels must be sorted increasing");
    if (models[i].transform != models[0].transform)
      throw std::invalid_argument("quantile family: mixed height transforms");
    if (models[i].basis.lo() != models[0].basis.lo() ||
        models[i].basis.hi() != models[0].basis.hi())
      throw std::invalid_argument("quantile family: mixed basis domains");
  }
}

}  // namespace

ScreenResult screen(const std::vector<ConditionalQuantileModel>& models, double t_prev,
                    double t, double w_prev, double h, double w_observed) {
  check_family(models, 3);
  const std::size_t k = models.size();
  std::vector<double> q(k);
  for (std::size_t i = 0; i < k; ++i)
    q[i] = predict_conditional_quantile(models[i], t_prev, t, w_prev, h);
  // Monotone rearrangement: sorting the predictions restores a valid
  // (non-crossing) quantile curve in tau.
  std::sort(q.begin(), q.end());

  ScreenResult out;
  if (w_observed <= q.front()) {
    out.level = models.front().tau;
    out.below_chart = w_observed < q.front();
    return out;
  }
  if (w_observed >= q.back()) {
    out.level = models.back().tau;
    out.above_chart = w_observed > q.back();
    return out;
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (q[i] <= w_observed && w_observed <= q[i + 1]) {
      const double tau_lo = models[i].tau, tau_hi = models[i + 1].tau;
      if (q[i + 1] == q[i]) {
        out.level = tau_lo;
      } else {
        out.level = tau_lo + (w_observed - q[i]) / (q[i + 1] - q[i]) * (tau_hi - tau_lo);
      }
      return out;
    }
  }
  out.level = models.back().tau;  // unreachable given the clamps above
  return out;
}

CrossingReport detect_crossings(const std::vector<ConditionalQuantileModel>& models,
                                const std::vector<QueryPoint>& queries) {
  check_family(models, 2);
  CrossingReport report;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const QueryPoint& p = queries[qi];
    double prev = predict_conditional_quantile(models[0], p.t_prev, p.t, p.w_prev, p.h);
    for (std::size_t i = 1; i < models.size(); ++i) {
      double cur = predict_conditional_quantile(models[i], p.t_prev, p.t, p.w_prev, p.h);
      if (prev > cur)
        report.crossings.push_back({qi, models[i - 1].tau, models[i].tau, prev, cur});
      prev = cur;
    }
  }
  return report;
}

std::vector<double> default_tau_grid() {
  return {0.03, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.97};
}

}  // namespace growthchart
