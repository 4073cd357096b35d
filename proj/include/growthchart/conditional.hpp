#pragma once

#include "growthchart/bspline.hpp"
#include "growthchart/longitudinal.hpp"
#include "growthchart/quantile.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace growthchart {

// Covariate transform for height: identity uses H, cube uses H^3 (weight
// scales like the cube of a linear dimension).
enum class HeightTransform { identity, cube };

double apply_transform(HeightTransform t, double h);

// Conditional quantile model for the next weight given the previous one:
//   W_j = g_tau(t_j) + (a + b*D_j) W_{j-1} + c*T(H_j) + e_j,
// with D_j the visit gap and g_tau a spline over a shared basis.
struct ConditionalQuantileModel {
  double tau = 0.5;
  BSplineBasis basis;
  Eigen::VectorXd g_coeffs;
  double a = 0.0;  // lag-weight coefficient
  double b = 0.0;  // gap-interaction coefficient
  double c = 0.0;  // height coefficient
  HeightTransform transform = HeightTransform::identity;
  double objective = 0.0;  // achieved pinball objective, for audit
};

// Row provenance of the pooled design: which subject and visit produced it.
struct ConditionalRow {
  std::size_t subject_index;
  std::size_t visit_index;  // j >= 1 (0-based): response is visit j
};

struct ConditionalDesign {
  Eigen::MatrixXd X;  // [basis(t_j) | W_{j-1} | D_j * W_{j-1} | T(H_j)]
  Eigen::VectorXd y;  // W_j
  std::vector<ConditionalRow> index;
};

// One row per measurement j >= 2 of each subject; first measurements are
// never responses, and subjects with fewer than two visits contribute no
// rows.  Throws std::invalid_argument listing offending rows when a height
// is missing, and std::domain_error when an age falls outside the basis.
ConditionalDesign build_conditional_design(const LongitudinalDataset& data,
                                           const BSplineBasis& basis,
                                           HeightTransform transform);

// Fits the model parameters by pooled pinball minimization.  Throws
// std::runtime_error naming the collinear columns on rank deficiency
// (e.g. all visit gaps equal makes the lag and gap-interaction columns
// collinear) and std::invalid_argument when rows < columns.
ConditionalQuantileModel fit_conditional_model(
    const LongitudinalDataset& data, double tau, const BSplineBasis& basis,
    HeightTransform transform, const std::optional<QuantilePenalty>& penalty = std::nullopt);

// g_tau(t) + (a + b*(t - t_prev))*w_prev + c*T(h).
// Requires t > t_prev and t within the basis domain.
double predict_conditional_quantile(const ConditionalQuantileModel& model, double t_prev,
                                    double t, double w_prev, double h);

struct ScreenResult {
  double level = 0.5;        // screened quantile level in [tau_min, tau_max]
  bool below_chart = false;  // clamped at tau_min
  bool above_chart = false;  // clamped at tau_max
};

// Inverts the per-tau prediction curve at w_observed: predictions are
// monotone-rearranged (sorted) across the tau grid, then w_observed is
// located by piecewise-linear interpolation, clamping outside the curves.
// Models must share basis domain and transform, be sorted by tau, and
// cover at least 3 levels.
ScreenResult screen(const std::vector<ConditionalQuantileModel>& models, double t_prev,
                    double t, double w_prev, double h, double w_observed);

struct QueryPoint {
  double t_prev;
  double t;
  double w_prev;
  double h;
};

struct Crossing {
  std::size_t query_index;
  double tau_low, tau_high;  // adjacent levels with q(tau_low) > q(tau_high)
  double q_low, q_high;
};

struct CrossingReport {
  std::vector<Crossing> crossings;
  bool empty() const { return crossings.empty(); }
};

// Reports every strict adjacent-pair inversion of the quantile curves on
// the query grid.  Requires >= 2 tau levels.
CrossingReport detect_crossings(const std::vector<ConditionalQuantileModel>& models,
                                const std::vector<QueryPoint>& queries);

// Default centile grid {0.03, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.97}.
std::vector<double> default_tau_grid();

}  // namespace growthchart
