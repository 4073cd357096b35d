#include "growthchart/catchup.hpp"

#include "growthchart/rng.hpp"
#include "growthchart/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace growthchart {

SplineCurve linear_curve(const BSplineBasis& basis, double intercept, double slope) {
  Eigen::VectorXd xi = basis.greville_abscissae();
  Eigen::VectorXd coeffs = intercept + slope * xi.array();
  return SplineCurve{basis, std::move(coeffs)};
}

SplineCurve constant_curve(const BSplineBasis& basis, double value) {
  return SplineCurve{basis, Eigen::VectorXd::Constant(basis.num_basis(), value)};
}

double gap_noise_scale(NoiseScaling scaling, double gap) {
  return scaling == NoiseScaling::linear_gap ? gap : std::sqrt(gap);
}

double CatchupModel::b_at(double t_prev, double t) const {
  if (const double* scalar = std::get_if<double>(&b_spec)) return *scalar;
  return std::get<SplineCurve>(b_spec)(0.5 * (t_prev + t));
}

namespace {

double check_gap(double t_prev, double t) {
  if (!(t > t_prev)) {
    throw std::invalid_argument("transition requires t > t_prev (got t_prev=" +
                                std::to_string(t_prev) + ", t=" + std::to_string(t) + ")");
  }
  return t - t_prev;
}

}  // namespace

double step_eq3(const CatchupModel& model, double t_prev, double t, double w_prev, double e) {
  const double gap = check_gap(t_prev, t);
  const double g_prev = model.g(t_prev);
  const double g_now = model.g(t);
  const double b = model.b_at(t_prev, t);
  return w_prev + (g_now - g_prev) + b * gap * (w_prev - g_prev) +
         gap_noise_scale(model.noise_scaling, gap) * e;
}

double step_eq4(const CatchupModel& model, double t_prev, double t, double w_star_prev,
                double e) {
  const double gap = check_gap(t_prev, t);
  return (1.0 + model.b_at(t_prev, t) * gap) * w_star_prev +
         gap_noise_scale(model.noise_scaling, gap) * e;
}

namespace {

void check_schedule(const std::vector<double>& schedule, std::size_t index, double lo,
                    double hi) {
  const std::string name = "schedule for subject " + std::to_string(index + 1);
  if (schedule.empty()) throw std::invalid_argument(name + " is empty");
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (schedule[j] < lo || schedule[j] > hi) {
      throw std::domain_error(name + ": visit age " + std::to_string(schedule[j]) +
                              " outside the curve domain [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
    }
    if (j > 0 && !(schedule[j] > schedule[j - 1])) {
      throw std::invalid_argument(name + ": visit ages must be strictly increasing");
    }
  }
}

LongitudinalDataset simulate_impl(const CatchupModel& model,
                                  const std::vector<std::vector<double>>& schedules,
                                  const std::vector<double>* initial_deviations,
                                  std::uint64_t seed) {
  const double lo = model.g.basis.lo();
  const double hi = model.g.basis.hi();
  LongitudinalDataset data;
  data.subjects.reserve(schedules.size());
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    const std::vector<double>& schedule = schedules[i];
    check_schedule(schedule, i, lo, hi);
    Rng rng = Rng::substream(seed, i);
    const double w_star0 =
        initial_deviations ? (*initial_deviations)[i] : 2.0 * model.sigma * rng.normal();
    Subject subject;
    subject.id = "s" + std::to_string(i + 1);
    subject.visits.reserve(schedule.size());
    double w = model.g(schedule.front()) + w_star0;
    subject.visits.push_back({schedule.front(), w, std::nullopt});
    for (std::size_t j = 1; j < schedule.size(); ++j) {
      const double e = model.sigma * rng.normal();
      w = step_eq3(model, schedule[j - 1], schedule[j], w, e);
      subject.visits.push_back({schedule[j], w, std::nullopt});
    }
    data.subjects.push_back(std::move(subject));
  }
  return data;
}

}  // namespace

LongitudinalDataset simulate_cohort(const CatchupModel& model,
                                    const std::vector<std::vector<double>>& schedules,
                                    const std::vector<double>& initial_deviations,
                                    std::uint64_t seed) {
  if (initial_deviations.size() != schedules.size()) {
    throw std::invalid_argument("need one initial deviation per schedule (got " +
                                std::to_string(initial_deviations.size()) + " for " +
                                std::to_string(schedules.size()) + " schedules)");
  }
  return simulate_impl(model, schedules, &initial_deviations, seed);
}

LongitudinalDataset simulate_cohort(const CatchupModel& model,
                                    const std::vector<std::vector<double>>& schedules,
                                    std::uint64_t seed) {
  return simulate_impl(model, schedules, nullptr, seed);
}

std::vector<CenteredTrajectory> center(const LongitudinalDataset& data, const SplineCurve& g) {
  std::vector<CenteredTrajectory> out;
  out.reserve(data.subjects.size());
  for (const Subject& subject : data.subjects) {
    CenteredTrajectory traj;
    traj.subject_id = subject.id;
    traj.t.reserve(subject.visits.size());
    traj.w_star.reserve(subject.visits.size());
    for (const Measurement& m : subject.visits) {
      traj.t.push_back(m.t);
      traj.w_star.push_back(m.w - g(m.t));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

namespace {

struct Transition {
  double t_mid;
  double x;  // centered lag W*_{j-1}
  double y;  // centered increment per unit gap
  double weight;
};

std::vector<Transition> collect_transitions(const LongitudinalDataset& data,
                                            const SplineCurve& g, NoiseScaling scaling) {
  std::vector<Transition> out;
  for (const CenteredTrajectory& traj : center(data, g)) {
    for (std::size_t j = 1; j < traj.t.size(); ++j) {
      const double gap = traj.t[j] - traj.t[j - 1];
      if (!(gap > 0)) {
        throw std::invalid_argument("subject " + traj.subject_id +
                                    ": visit ages must be strictly increasing");
      }
      const double s = gap_noise_scale(scaling, gap);
      out.push_back({0.5 * (traj.t[j] + traj.t[j - 1]), traj.w_star[j - 1],
                     (traj.w_star[j] - traj.w_star[j - 1]) / gap, (gap * gap) / (s * s)});
    }
  }
  return out;
}

}  // namespace

CatchupEstimate estimate_b(const LongitudinalDataset& data, const SplineCurve& g,
                           const CatchupEstimatorConfig& config) {
  const std::vector<Transition> transitions =
      collect_transitions(data, g, config.noise_scaling);
  const std::size_t m = transitions.size();
  const std::size_t p =
      config.spline_basis ? static_cast<std::size_t>(config.spline_basis->num_basis()) : 1;
  if (m < p) {
    throw std::invalid_argument("need at least " + std::to_string(p) + " transitions to fit " +
                                std::to_string(p) + " coefficient(s), got " +
                                std::to_string(m));
  }
  // Lags that are pure cancellation noise (a cohort that never left the
  // curve) carry no signal; a relative cutoff catches them where an exact
  // zero test would let rounding residue through to a 0/0 slope.
  double max_lag = 0.0, scale = 1.0;
  for (const Transition& tr : transitions) max_lag = std::max(max_lag, std::abs(tr.x));
  for (const Subject& s : data.subjects) {
    for (const Measurement& v : s.visits) scale = std::max(scale, std::abs(v.w));
  }
  if (max_lag <= 1e-12 * scale) {
    throw std::runtime_error(
        "unidentifiable: every centered lag W* is zero, so the data carry no "
        "information about the catch-up coefficient");
  }

  if (!config.spline_basis) {
    double sxx = 0.0, sxy = 0.0;
    for (const Transition& tr : transitions) {
      sxx += tr.weight * tr.x * tr.x;
      sxy += tr.weight * tr.x * tr.y;
    }
    const double b_hat = sxy / sxx;
    std::optional<double> se;
    if (m >= 2) {
      double rss = 0.0;
      for (const Transition& tr : transitions) {
        const double r = tr.y - b_hat * tr.x;
        rss += tr.weight * r * r;
      }
      se = std::sqrt(rss / static_cast<double>(m - 1) / sxx);
    }
    return CatchupEstimate{b_hat, se, m};
  }

  const BSplineBasis& basis = *config.spline_basis;
  Eigen::MatrixXd X(m, p);
  Eigen::VectorXd y(m);
  for (std::size_t r = 0; r < m; ++r) {
    const Transition& tr = transitions[r];
    const double sw = std::sqrt(tr.weight);
    X.row(r) = sw * tr.x * basis.eval_basis(tr.t_mid).transpose();
    y(r) = sw * tr.y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    throw std::runtime_error("spline catch-up coefficient is not identified: transitions span "
                             "only " +
                             std::to_string(qr.rank()) + " of " + std::to_string(p) +
                             " basis directions; use fewer knots or scalar mode");
  }
  Eigen::VectorXd coeffs = qr.solve(y);
  return CatchupEstimate{SplineCurve{basis, std::move(coeffs)}, std::nullopt, m};
}

CatchupVerdict is_catchup(const CatchupEstimate& estimate, double alpha) {
  if (!estimate.is_scalar()) {
    throw std::invalid_argument(
        "catch-up verdict needs a scalar estimate; inspect a spline b(t) pointwise");
  }
  if (!estimate.standard_error) {
    throw std::invalid_argument(
        "catch-up verdict needs a standard error (at least 2 transitions)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must be in (0, 1)");
  }
  const double z = normal_quantile(1.0 - alpha);
  return estimate.scalar() + z * *estimate.standard_error < 0.0 ? CatchupVerdict::catchup
                                                                : CatchupVerdict::no_evidence;
}

}  // namespace growthchart
