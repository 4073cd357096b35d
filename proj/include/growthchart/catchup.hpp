#pragma once

#include "growthchart/bspline.hpp"
#include "growthchart/longitudinal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace growthchart {

// Spline g over a basis: the population quantile curve.
struct SplineCurve {
  BSplineBasis basis;
  Eigen::VectorXd coeffs;

  double operator()(double t) const { return basis.eval_spline(coeffs, t); }
};

// Builds the spline representation of a + b*t on the basis (exact, via
// Greville abscissae).
SplineCurve linear_curve(const BSplineBasis& basis, double intercept, double slope);
SplineCurve constant_curve(const BSplineBasis& basis, double value);

// Noise scale as a function of the visit gap D: the transition adds
// s(D)*e with s(D) = D (linear_gap, the model as written) or sqrt(D)
// (diffusion-like alternative).
enum class NoiseScaling { linear_gap, sqrt_gap };

double gap_noise_scale(NoiseScaling scaling, double gap);

// Catch-up growth model: the next weight is the previous one plus the
// population change plus a deviation-proportional pull plus gap-scaled
// noise,
//   W_j = W_{j-1} + {g(t_j) - g(t_{j-1})} + b*D_j*{W_{j-1} - g(t_{j-1})} + s(D_j) e_j.
// Centered on W* = W - g(t) this is the AR(1)-like kernel
//   W*_j = (1 + b*D_j) W*_{j-1} + s(D_j) e_j,
// so b < 0 contracts deviations toward the curve (catch-up growth) and
// b > 0 amplifies them.  b is either a scalar or a spline evaluated at the
// transition midpoint age.
struct CatchupModel {
  SplineCurve g;
  std::variant<double, SplineCurve> b_spec;
  double sigma = 0.0;  // noise standard deviation per unit gap scale
  NoiseScaling noise_scaling = NoiseScaling::linear_gap;

  // b or b((t + t_prev)/2).
  double b_at(double t_prev, double t) const;
};

// One transition of the raw process; e is the noise draw.
// Requires t > t_prev, both within g's domain.
double step_eq3(const CatchupModel& model, double t_prev, double t, double w_prev, double e);

// One transition of the centered process W* = W - g(t).
double step_eq4(const CatchupModel& model, double t_prev, double t, double w_star_prev,
                double e);

// Simulates one trajectory per schedule, iterating step_eq3 with i.i.d.
// Normal(0, sigma^2) draws from a per-subject substream of (seed, i).
// initial_deviations supplies W*_0 per subject; the overload without it
// draws W*_0 ~ Normal(0, (2*sigma)^2) from the same substream.  Heights
// are omitted (the model has none).  Deterministic given the seed.
LongitudinalDataset simulate_cohort(const CatchupModel& model,
                                    const std::vector<std::vector<double>>& schedules,
                                    const std::vector<double>& initial_deviations,
                                    std::uint64_t seed);
LongitudinalDataset simulate_cohort(const CatchupModel& model,
                                    const std::vector<std::vector<double>>& schedules,
                                    std::uint64_t seed);

struct CenteredTrajectory {
  std::string subject_id;
  std::vector<double> t;
  std::vector<double> w_star;  // w - g(t)
};

// Centers every trajectory on g; un-centering recovers the weights exactly.
std::vector<CenteredTrajectory> center(const LongitudinalDataset& data, const SplineCurve& g);

struct CatchupEstimate {
  std::variant<double, SplineCurve> b_hat;
  std::optional<double> standard_error;  // scalar mode only
  std::size_t n_transitions = 0;

  bool is_scalar() const { return std::holds_alternative<double>(b_hat); }
  double scalar() const { return std::get<double>(b_hat); }
};

struct CatchupEstimatorConfig {
  // Scalar b, or a spline b(.) on the given basis evaluated at transition
  // midpoint ages.
  std::optional<BSplineBasis> spline_basis;  // nullopt = scalar mode
  NoiseScaling noise_scaling = NoiseScaling::linear_gap;
};

// Least-squares estimate of b from the centered increments: regresses
// y_j = (W*_j - W*_{j-1})/D_j on x_j = W*_{j-1} (scalar mode: the slope is
// b_hat; spline mode: columns are W*_{j-1} * B_k(t_mid)), with observation
// weights D^2/s(D)^2 homogenizing the noise variance.  Inverts the
// generator exactly on noiseless data.
//
// Throws std::runtime_error("unidentifiable...") when every centered lag
// is zero, and std::invalid_argument when there are fewer transitions than
// free parameters.
CatchupEstimate estimate_b(const LongitudinalDataset& data, const SplineCurve& g,
                           const CatchupEstimatorConfig& config = {});

enum class CatchupVerdict { catchup, no_evidence };

// One-sided test of b < 0 at level alpha: catch-up growth is declared when
// b_hat + z_{1-alpha} * se < 0.  Scalar-mode estimates only; spline
// estimates must be inspected pointwise.
CatchupVerdict is_catchup(const CatchupEstimate& estimate, double alpha);

}  // namespace growthchart
