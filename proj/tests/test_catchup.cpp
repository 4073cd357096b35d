#include <doctest.h>

#include <growthchart/catchup.hpp>
#include <growthchart/rng.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

using growthchart::BSplineBasis;
using growthchart::CatchupEstimate;
using growthchart::CatchupEstimatorConfig;
using growthchart::CatchupModel;
using growthchart::CatchupVerdict;
using growthchart::estimate_b;
using growthchart::gap_noise_scale;
using growthchart::is_catchup;
using growthchart::KnotVector;
using growthchart::linear_curve;
using growthchart::LongitudinalDataset;
using growthchart::NoiseScaling;
using growthchart::Rng;
using growthchart::SplineCurve;
using growthchart::step_eq3;
using growthchart::step_eq4;

namespace {

BSplineBasis domain_basis(double lo, double hi) {
  return BSplineBasis{
      growthchart::make_knots(lo, hi, 3, growthchart::KnotPlacement::equal_spacing)};
}

CatchupModel scalar_model(double b, double sigma,
                          NoiseScaling scaling = NoiseScaling::linear_gap) {
  CatchupModel model{linear_curve(domain_basis(0.0, 10.0), 10.0, 0.6), b, sigma, scaling};
  return model;
}

}  // namespace

TEST_CASE("curve constructors reproduce their functions") {
  const auto basis = domain_basis(0.0, 10.0);
  const SplineCurve lin = linear_curve(basis, 3.0, -0.4);
  const SplineCurve flat = growthchart::constant_curve(basis, 7.5);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double t = 10.0 * rng.uniform();
    CHECK(lin(t) == doctest::Approx(3.0 - 0.4 * t).epsilon(1e-12));
    CHECK(flat(t) == doctest::Approx(7.5).epsilon(1e-13));
  }
}

TEST_CASE("noise scale by gap") {
  CHECK(gap_noise_scale(NoiseScaling::linear_gap, 0.04) == 0.04);
  CHECK(gap_noise_scale(NoiseScaling::sqrt_gap, 0.04) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(gap_noise_scale(NoiseScaling::linear_gap, 2.0) == 2.0);
}

TEST_CASE("zero pull preserves deviations exactly") {
  const auto model = scalar_model(0.0, 0.0);
  const double w_prev = model.g(1.0) + 3.0;
  const double w = step_eq3(model, 1.0, 2.5, w_prev, 0.0);
  CHECK(w - model.g(2.5) == doctest::Approx(3.0).epsilon(1e-13));
  // Centered form: the AR factor is exactly 1.
  CHECK(step_eq4(model, 1.0, 2.5, 3.0, 0.0) == 3.0);
  CHECK(step_eq4(model, 1.0, 2.5, 0.0, 0.0) == 0.0);
}

TEST_CASE("pull of b*D = -1 erases the deviation in one step") {
  const auto model = scalar_model(-1.0, 0.0);
  const double w = step_eq3(model, 2.0, 3.0, model.g(2.0) + 5.0, 0.0);
  CHECK(w == doctest::Approx(model.g(3.0)).epsilon(1e-13));
  CHECK(step_eq4(model, 2.0, 3.0, 5.0, 0.0) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("negative b contracts and positive b amplifies deviations") {
  const auto shrink = scalar_model(-0.5, 0.0);
  const auto grow = scalar_model(0.5, 0.0);
  for (double dev : {4.0, -4.0}) {
    const double d1 = step_eq4(shrink, 1.0, 2.0, dev, 0.0);
    CHECK(std::abs(d1) < std::abs(dev));
    CHECK(d1 * dev > 0.0);  // same side of the curve
    const double d2 = step_eq4(grow, 1.0, 2.0, dev, 0.0);
    CHECK(std::abs(d2) > std::abs(dev));
  }
}

TEST_CASE("raw and centered transitions agree") {
  const auto basis = domain_basis(0.0, 10.0);
  CatchupModel model{SplineCurve{basis, Eigen::VectorXd(basis.num_basis())}, -0.3, 1.0,
                     NoiseScaling::linear_gap};
  Rng rng(42);
  for (Eigen::Index k = 0; k < model.g.coeffs.size(); ++k) model.g.coeffs[k] = rng.normal(12.0, 2.0);

  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double t_prev = 9.8 * rng.uniform();
    const double t = t_prev + 0.01 + (9.99 - t_prev) * rng.uniform() * 0.1;
    const double w_star = rng.normal(0.0, 3.0);
    const double e = rng.normal();
    const double raw = step_eq3(model, t_prev, t, model.g(t_prev) + w_star, e);
    const double centered = step_eq4(model, t_prev, t, w_star, e);
    worst = std::max(worst, std::abs((raw - model.g(t)) - centered));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("transitions vanish with the gap under bounded noise") {
  const auto model = scalar_model(-0.8, 1.0);
  const double w_prev = model.g(5.0) + 2.0;
  double prev_change = -1.0;
  for (double gap : {1e-3, 1e-6, 1e-9}) {
    const double e = 2.5;  // a fixed bounded draw
    const double w = step_eq3(model, 5.0, 5.0 + gap, w_prev, e);
    const double change = std::abs(w - w_prev);
    if (prev_change > 0.0) {
      // Shrinks roughly in proportion to the gap.
      CHECK(change < prev_change * 1e-2);
    }
    prev_change = change;
  }
  // At D = 1e-9 the weight is numerically continuous.
  CHECK(prev_change < 1e-6);
}

TEST_CASE("gap validation") {
  const auto model = scalar_model(-0.5, 0.0);
  CHECK_THROWS_AS(step_eq3(model, 2.0, 2.0, 12.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step_eq3(model, 2.0, 1.0, 12.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step_eq4(model, 2.0, 2.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("noiseless halving: b = -0.5 on unit gaps") {
  CatchupModel model{growthchart::constant_curve(domain_basis(0.0, 10.0), 10.0), -0.5, 0.0,
                     NoiseScaling::linear_gap};
  const std::vector<std::vector<double>> schedules = {{0.0, 1.0, 2.0, 3.0, 4.0}};
  const auto data = growthchart::simulate_cohort(model, schedules, {4.0}, 5);
  REQUIRE(data.subjects.size() == 1);
  const auto& v = data.subjects[0].visits;
  REQUIRE(v.size() == 5);
  const double want[5] = {14.0, 12.0, 11.0, 10.5, 10.25};
  for (int j = 0; j < 5; ++j) {
    CHECK(v[j].w == doctest::Approx(want[j]).epsilon(1e-12));
    CHECK_FALSE(v[j].h.has_value());
  }
}

TEST_CASE("simulation is deterministic per seed and substreamed per subject") {
  const auto model = scalar_model(-0.4, 1.0);
  const std::vector<std::vector<double>> schedules = {
      {0.0, 1.0, 2.0}, {0.5, 1.0, 2.5, 4.0}, {1.0, 3.0}};
  const auto a = growthchart::simulate_cohort(model, schedules, 77);
  const auto b = growthchart::simulate_cohort(model, schedules, 77);
  REQUIRE(a.subjects.size() == 3);
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    CHECK(a.subjects[i].id == b.subjects[i].id);
    REQUIRE(a.subjects[i].visits.size() == b.subjects[i].visits.size());
    for (std::size_t j = 0; j < a.subjects[i].visits.size(); ++j) {
      CHECK(a.subjects[i].visits[j].w == b.subjects[i].visits[j].w);
      CHECK(a.subjects[i].visits[j].t == b.subjects[i].visits[j].t);
    }
  }
  // A different seed moves every trajectory.
  const auto c = growthchart::simulate_cohort(model, schedules, 78);
  int same = 0;
  for (std::size_t i = 0; i < 3; ++i) same += c.subjects[i].visits[1].w == a.subjects[i].visits[1].w;
  CHECK(same == 0);
  // Appending a subject does not disturb the earlier ones (substreams).
  auto wider = schedules;
  wider.push_back({0.0, 2.0, 4.0});
  const auto d = growthchart::simulate_cohort(model, wider, 77);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d.subjects[i].visits[1].w == a.subjects[i].visits[1].w);
  }
}

TEST_CASE("schedule validation") {
  const auto model = scalar_model(-0.4, 1.0);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{1.0, 1.0, 2.0}}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{2.0, 1.0}}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{-1.0, 2.0}}, 1), std::domain_error);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{0.0, 11.0}}, 1), std::domain_error);
  CHECK_THROWS_AS(growthchart::simulate_cohort(model, {{0.0, 1.0}}, {1.0, 2.0}, 1),
                  std::invalid_argument);  // deviation count mismatch
}

TEST_CASE("centering subtracts the curve and round-trips") {
  const auto model = scalar_model(-0.3, 0.8);
  const std::vector<std::vector<double>> schedules = {{0.0, 0.5, 1.5, 3.0}, {1.0, 2.0, 4.0}};
  const auto data = growthchart::simulate_cohort(model, schedules, 11);
  const auto centered = growthchart::center(data, model.g);
  REQUIRE(centered.size() == 2);
  for (std::size_t i = 0; i < centered.size(); ++i) {
    CHECK(centered[i].subject_id == data.subjects[i].id);
    REQUIRE(centered[i].t.size() == data.subjects[i].visits.size());
    for (std::size_t j = 0; j < centered[i].t.size(); ++j) {
      const auto& visit = data.subjects[i].visits[j];
      CHECK(centered[i].w_star[j] + model.g(visit.t) ==
            doctest::Approx(visit.w).epsilon(1e-14));
    }
  }
}

TEST_CASE("noiseless cohorts invert the generator exactly") {
  const std::vector<std::vector<double>> schedules = {
      {0.0, 0.5, 1.5, 3.0, 4.5}, {1.0, 2.0, 2.5, 5.0}, {0.25, 1.25, 2.0, 6.0}};
  const std::vector<double> w0 = {4.0, -2.5, 1.0};
  for (double b_true : {-0.5, 0.0, 0.2}) {
    for (NoiseScaling scaling : {NoiseScaling::linear_gap, NoiseScaling::sqrt_gap}) {
      CatchupModel model = scalar_model(b_true, 0.0, scaling);
      const auto data = growthchart::simulate_cohort(model, schedules, w0, 3);
      CatchupEstimatorConfig config;
      config.noise_scaling = scaling;
      const auto est = estimate_b(data, model.g, config);
      REQUIRE(est.is_scalar());
      CHECK(std::abs(est.scalar() - b_true) < 1e-10);
      CHECK(est.n_transitions == 10);
      if (b_true < -1e-3) {
        REQUIRE(est.standard_error.has_value());
        CHECK(is_catchup(est, 0.05) == CatchupVerdict::catchup);
      }
    }
  }
}

TEST_CASE("a cohort that never leaves the curve is unidentifiable") {
  const auto model = scalar_model(-0.5, 0.0);
  const std::vector<std::vector<double>> schedules = {{0.0, 1.0, 2.0}, {0.5, 2.5, 4.0}};
  const auto data = growthchart::simulate_cohort(model, schedules, {0.0, 0.0}, 9);
  try {
    estimate_b(data, model.g);
    FAIL("expected runtime_error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("unidentifiable") != std::string::npos);
  }
}

TEST_CASE("too few transitions") {
  const auto model = scalar_model(-0.5, 0.0);
  LongitudinalDataset one;
  one.subjects.push_back({"solo", {{1.0, 12.0, std::nullopt}}});
  CHECK_THROWS_AS(estimate_b(one, model.g), std::invalid_argument);
}

TEST_CASE("noisy estimate lands near the truth with a usable standard error") {
  std::vector<std::vector<double>> schedules(500, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  CatchupModel model = scalar_model(-0.5, 1.0);
  const auto data = growthchart::simulate_cohort(model, schedules, 2024);
  const auto est = estimate_b(data, model.g);
  REQUIRE(est.is_scalar());
  CHECK(std::abs(est.scalar() + 0.5) < 0.1);
  REQUIRE(est.standard_error.has_value());
  CHECK(*est.standard_error > 0.0);
  CHECK(*est.standard_error < 0.1);
  CHECK(est.n_transitions == 2500);
  CHECK(is_catchup(est, 0.05) == CatchupVerdict::catchup);
}

TEST_CASE("estimates tighten as the cohort grows") {
  const std::vector<double> sizes = {50, 500};
  std::vector<double> med_err;
  for (double size : sizes) {
    std::vector<double> errs;
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<std::vector<double>> schedules(static_cast<std::size_t>(size),
                                                 {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
      CatchupModel model = scalar_model(-0.5, 1.0);
      const auto data = growthchart::simulate_cohort(
          model, schedules, 5000 + static_cast<std::uint64_t>(rep));
      errs.push_back(std::abs(estimate_b(data, model.g).scalar() + 0.5));
    }
    std::sort(errs.begin(), errs.end());
    med_err.push_back(errs[errs.size() / 2]);
  }
  CHECK(med_err[1] < med_err[0]);
}

TEST_CASE("zero-pull data rarely triggers the catch-up verdict") {
  // Under b = 0 the one-sided 5% test should reject on a small minority of
  // cohorts; a biased estimator or broken standard error would reject far
  // more often.
  std::vector<std::vector<double>> schedules(400, {0.0, 1.0, 2.0, 3.0, 4.0});
  CatchupModel model = scalar_model(0.0, 1.0);
  int rejections = 0;
  for (std::uint64_t seed = 31330; seed < 31380; ++seed) {
    const auto data = growthchart::simulate_cohort(model, schedules, seed);
    const auto est = estimate_b(data, model.g);
    CHECK(std::abs(est.scalar()) < 0.1);
    rejections += is_catchup(est, 0.05) == CatchupVerdict::catchup;
  }
  CHECK(rejections <= 8);
}

TEST_CASE("spline-mode recovery of a constant pull") {
  // Schedules whose midpoints spread across the domain so every basis
  // direction is exercised.
  std::vector<std::vector<double>> schedules;
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> sched;
    double t = 0.5 * rng.uniform();
    while (t < 9.5) {
      sched.push_back(t);
      t += 0.4 + 1.2 * rng.uniform();
    }
    if (sched.size() >= 2) schedules.push_back(std::move(sched));
  }
  CatchupModel model = scalar_model(-0.5, 0.0);
  std::vector<double> w0(schedules.size());
  for (std::size_t i = 0; i < w0.size(); ++i) w0[i] = rng.normal(0.0, 2.0);
  const auto data = growthchart::simulate_cohort(model, schedules, w0, 17);

  CatchupEstimatorConfig config;
  config.spline_basis = domain_basis(0.0, 10.0);
  const auto est = estimate_b(data, model.g, config);
  REQUIRE_FALSE(est.is_scalar());
  CHECK_FALSE(est.standard_error.has_value());
  const auto& curve = std::get<SplineCurve>(est.b_hat);
  for (int k = 0; k <= 20; ++k) {
    const double t = 0.5 + 9.0 * k / 20.0;
    CHECK(curve(t) == doctest::Approx(-0.5).epsilon(1e-8));
  }
}

TEST_CASE("spline mode refuses an under-spanned basis") {
  // All transitions share one midpoint: a cubic basis cannot be pinned down.
  std::vector<std::vector<double>> schedules(10, {4.0, 6.0});
  CatchupModel model = scalar_model(-0.5, 0.0);
  std::vector<double> w0(10, 2.0);
  const auto data = growthchart::simulate_cohort(model, schedules, w0, 6);
  CatchupEstimatorConfig config;
  config.spline_basis = domain_basis(0.0, 10.0);
  try {
    estimate_b(data, model.g, config);
    FAIL("expected runtime_error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("not identified") != std::string::npos);
  }
}

TEST_CASE("verdict arithmetic on frozen examples") {
  CatchupEstimate strong{-0.5, 0.05, 100};
  CHECK(is_catchup(strong, 0.05) == CatchupVerdict::catchup);
  CatchupEstimate weak{-0.01, 0.2, 100};
  CHECK(is_catchup(weak, 0.05) == CatchupVerdict::no_evidence);
  CatchupEstimate positive{0.3, 0.05, 100};
  CHECK(is_catchup(positive, 0.05) == CatchupVerdict::no_evidence);
  // Borderline: -0.5 + 1.645*0.3 = -0.0065 < 0, barely catch-up.
  CatchupEstimate borderline{-0.5, 0.3, 100};
  CHECK(is_catchup(borderline, 0.05) == CatchupVerdict::catchup);

  CatchupEstimate no_se{-0.5, std::nullopt, 100};
  CHECK_THROWS_AS(is_catchup(no_se, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(is_catchup(strong, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(is_catchup(strong, 1.0), std::invalid_argument);
}

TEST_CASE("spline pull evaluated at transition midpoints") {
  const auto basis = domain_basis(0.0, 10.0);
  CatchupModel model{growthchart::constant_curve(basis, 10.0),
                     linear_curve(basis, -1.0, 0.1), 0.0, NoiseScaling::linear_gap};
  // b(t_mid) at t_prev=2, t=4 is b(3) = -0.7.
  CHECK(model.b_at(2.0, 4.0) == doctest::Approx(-0.7).epsilon(1e-12));
  const double w = step_eq4(model, 2.0, 4.0, 1.0, 0.0);
  CHECK(w == doctest::Approx((1.0 + (-0.7) * 2.0) * 1.0).epsilon(1e-12));
}
