#include "growthchart/fig1.hpp"

#include "growthchart/bspline.hpp"
#include "growthchart/penalized.hpp"
#include "growthchart/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace growthchart {

namespace {

double truth_fn(double x) { return std::sin(2.0 * x); }

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_fig1(int n, std::uint64_t seed,
                                                     double noise_scale) {
  if (n < 2) throw std::invalid_argument("gen_fig1: n must be >= 2");
  Eigen::VectorXd xs(n), ys(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    xs[i] = static_cast<double>(i) / (n - 1);
    ys[i] = truth_fn(xs[i]) + noise_scale * rng.normal();
  }
  return {std::move(xs), std::move(ys)};
}

double ise(const std::function<double(double)>& predict,
           const std::function<double(double)>& truth, int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("ise: grid_size must be >= 2");
  const double h = 1.0 / (grid_size - 1);
  double acc = 0.0;
  for (int i = 0; i < grid_size; ++i) {
    const double x = static_cast<double>(i) / (grid_size - 1);
    const double d = predict(x) - truth(x);
    acc += (i == 0 || i == grid_size - 1 ? 0.5 : 1.0) * d * d;
  }
  return acc * h;
}

Fig1Report run_fig1_experiment(const Fig1Config& config) {
  if (config.n < 2) throw std::invalid_argument("fig1: n must be >= 2");
  if (config.knots < 1) throw std::invalid_argument("fig1: knots must be >= 1");
  if (config.replications < 1)
    throw std::invalid_argument("fig1: replications must be >= 1");
  if (config.ise_grid_size < 2)
    throw std::invalid_argument("fig1: ise_grid_size must be >= 2");

  const BSplineBasis basis(
      make_knots(0.0, 1.0, config.knots, KnotPlacement::equal_spacing, {}, config.degree));
  const Eigen::MatrixXd penalty = difference_penalty(basis.num_basis(), 2);
  const std::vector<double> grid =
      config.lambda_grid.empty() ? default_lambda_grid() : config.lambda_grid;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Fig1Report report;
  report.replications.reserve(config.replications);
  std::vector<double> ratios;
  for (int r = 0; r < config.replications; ++r) {
    auto [xs, ys] = gen_fig1(config.n, config.seed ^ static_cast<std::uint64_t>(r),
                             config.noise_scale);
    const Eigen::MatrixXd X = basis.design_matrix(xs);
    const PenalizedSolver solver(X, penalty);
    const GcvResult gcv = select_lambda_gcv(solver, ys, grid);

    Fig1Replication rep;
    rep.rep = r;
    rep.lambda_star = gcv.lambda_star;
    const Eigen::VectorXd pen_coeffs = gcv.fit.coeffs;
    rep.ise_penalized = ise([&](double x) { return basis.eval_spline(pen_coeffs, x); },
                            truth_fn, config.ise_grid_size);

    Eigen::VectorXd unpen_coeffs;
    try {
      unpen_coeffs = solver.fit(ys, 0.0).coeffs;
      rep.ise_unpenalized =
          ise([&](double x) { return basis.eval_spline(unpen_coeffs, x); }, truth_fn,
              config.ise_grid_size);
    } catch (const SingularSystemError&) {
      rep.singular = true;
      rep.ise_unpenalized = nan;
      ++report.n_excluded;
    }
    if (!rep.singular) {
      if (rep.ise_penalized < rep.ise_unpenalized) ++report.penalized_wins;
      ratios.push_back(rep.ise_penalized / rep.ise_unpenalized);
    }

    if (r == 0) {
      const int gs = config.ise_grid_size;
      report.first_curves.x.resize(gs);
      report.first_curves.truth.resize(gs);
      report.first_curves.penalized.resize(gs);
      report.first_curves.unpenalized.resize(gs);
      for (int i = 0; i < gs; ++i) {
        const double x = static_cast<double>(i) / (gs - 1);
        report.first_curves.x[i] = x;
        report.first_curves.truth[i] = truth_fn(x);
        report.first_curves.penalized[i] = basis.eval_spline(pen_coeffs, x);
        report.first_curves.unpenalized[i] =
            rep.singular ? nan : basis.eval_spline(unpen_coeffs, x);
      }
    }
    report.replications.push_back(rep);
  }
  report.median_ise_ratio = median(std::move(ratios));
  return report;
}

}  // namespace growthchart
