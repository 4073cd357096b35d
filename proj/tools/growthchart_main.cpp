// Command-line driver: CSV in, CSV out, all numerics delegated to the
// library.  Exit codes: 0 success, 1 runtime/model failure, 2 usage error.
#include "growthchart/bspline.hpp"
#include "growthchart/catchup.hpp"
#include "growthchart/conditional.hpp"
#include "growthchart/csv.hpp"
#include "growthchart/fig1.hpp"
#include "growthchart/penalized.hpp"
#include "growthchart/quantile.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace growthchart;

namespace {

// Pre-computation failures (bad flags, bad config, unreadable inputs).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config-file keys map onto long option names; a key is applied only when
// the same option was not given on the command line.
struct ConfigBinding {
  CLI::Option* option;
  std::function<void(const std::string&)> apply;
};
using ConfigTable = std::map<std::string, ConfigBinding>;

void apply_config_file(const std::string& path, ConfigTable& table) {
  std::vector<std::pair<std::string, std::string>> pairs;
  try {
    pairs = parse_config_file(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  for (const auto& [key, value] : pairs) {
    auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
    if (it->second.option->count() > 0) continue;  // flag overrides file
    try {
      it->second.apply(value);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

double config_double(const std::string& value) { return parse_double(value, "config"); }

std::uint64_t config_u64(const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("not an unsigned integer: '" + value + "'");
  }
  return v;
}

int config_int(const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("not an integer: '" + value + "'");
  }
  return v;
}

std::vector<double> config_double_list(const std::string& value) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const std::string field =
        value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(parse_double(field, "config list"));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

HeightTransform to_transform(const std::string& s) {
  if (s == "identity") return HeightTransform::identity;
  if (s == "cube") return HeightTransform::cube;
  throw UsageError("unknown transform '" + s + "' (expected identity or cube)");
}

NoiseScaling to_noise_scaling(const std::string& s) {
  if (s == "linear") return NoiseScaling::linear_gap;
  if (s == "sqrt") return NoiseScaling::sqrt_gap;
  throw UsageError("unknown noise scaling '" + s + "' (expected linear or sqrt)");
}

// "auto" defers to the sample-size rule, otherwise a positive count.
int resolve_knots(const std::string& spec, std::int64_t sample_size) {
  if (spec == "auto") return std::max(1, advise_knot_count(std::max<std::int64_t>(sample_size, 1)));
  int k = 0;
  try {
    k = config_int(spec);
  } catch (const UsageError&) {
    throw UsageError("knot count must be 'auto' or a positive integer, got '" + spec + "'");
  }
  if (k < 1) throw UsageError("knot count must be >= 1, got '" + spec + "'");
  return k;
}

LongitudinalDataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("missing input file: " + path);
  try {
    return read_longitudinal_csv(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

SplineCurve load_spline(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("missing file: " + path);
  try {
    return read_spline_csv(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::pair<double, double> age_range(const LongitudinalDataset& data) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Subject& s : data.subjects) {
    for (const Measurement& m : s.visits) {
      lo = std::min(lo, m.t);
      hi = std::max(hi, m.t);
    }
  }
  if (!(lo < hi)) {
    throw UsageError("dataset needs at least two distinct visit ages to place a basis");
  }
  return {lo, hi};
}

std::string out_path(const std::string& out_dir, const std::string& name) {
  return (fs::path(out_dir) / name).string();
}

// ---------------------------------------------------------------- fig1 --

struct Fig1Args {
  Fig1Config config;
};

void run_fig1(const Fig1Args& args, const std::string& out_dir) {
  if (args.config.replications < 1) throw UsageError("--reps must be >= 1");
  if (args.config.n < 2) throw UsageError("--n must be >= 2");
  if (args.config.knots < 1) throw UsageError("--knots must be >= 1");
  if (args.config.ise_grid_size < 2) throw UsageError("--ise-grid must be >= 2");

  const Fig1Report report = run_fig1_experiment(args.config);
  const std::string report_path = out_path(out_dir, "fig1_report.csv");
  const std::string curves_path = out_path(out_dir, "fig1_curves.csv");
  write_fig1_report_csv(report_path, report);
  write_fig1_curves_csv(curves_path, report.first_curves);

  const int included =
      static_cast<int>(report.replications.size()) - report.n_excluded;
  std::cout << "replications=" << report.replications.size()
            << " penalized_wins=" << report.penalized_wins << " included=" << included
            << " excluded=" << report.n_excluded
            << " median_ise_ratio=" << format_double(report.median_ise_ratio) << "\n"
            << "wrote " << report_path << " and " << curves_path << "\n";
}

// ----------------------------------------------------------------- fit --

struct FitArgs {
  std::string input;
  std::vector<double> taus = default_tau_grid();
  std::string knots = "auto";
  int degree = 3;
  int penalty_order = 2;
  double lambda = 0.0;
  std::string transform = "identity";
  std::string output = "models.csv";
};

void run_fit(const FitArgs& args, const std::string& out_dir) {
  if (args.lambda < 0) throw UsageError("--lambda must be >= 0");
  if (args.degree < 1) throw UsageError("--degree must be >= 1");
  if (args.penalty_order < 1) throw UsageError("--penalty-order must be >= 1");
  std::vector<double> taus = args.taus;
  std::sort(taus.begin(), taus.end());
  if (taus.empty()) throw UsageError("need at least one --tau level");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0)) throw UsageError("--tau levels must be in (0, 1)");
    if (i > 0 && taus[i] == taus[i - 1]) throw UsageError("duplicate --tau level");
  }
  const HeightTransform transform = to_transform(args.transform);
  const LongitudinalDataset data = load_dataset(args.input);
  const auto [lo, hi] = age_range(data);
  const int k =
      resolve_knots(args.knots, static_cast<std::int64_t>(data.total_transitions()));
  const BSplineBasis basis(make_knots(lo, hi, k, KnotPlacement::equal_spacing, {}, args.degree));

  std::optional<QuantilePenalty> penalty;
  if (args.lambda > 0) {
    penalty = QuantilePenalty{difference_penalty(basis.num_basis(), args.penalty_order),
                              args.lambda};
  }

  std::vector<ConditionalQuantileModel> models;
  models.reserve(taus.size());
  for (double tau : taus) {
    models.push_back(fit_conditional_model(data, tau, basis, transform, penalty));
  }

  const std::string model_path = out_path(out_dir, args.output);
  write_models_csv(model_path, models);
  std::cout << "fitted " << models.size() << " quantile levels on "
            << data.total_transitions() << " transitions; wrote " << model_path << "\n";

  if (models.size() >= 2) {
    std::vector<QueryPoint> queries;
    for (const Subject& s : data.subjects) {
      for (std::size_t j = 1; j < s.visits.size(); ++j) {
        queries.push_back({s.visits[j - 1].t, s.visits[j].t, s.visits[j - 1].w,
                           s.visits[j].h ? *s.visits[j].h : 0.0});
      }
    }
    const CrossingReport report = detect_crossings(models, queries);
    if (!report.empty()) {
      std::cerr << "warning: " << report.crossings.size()
                << " quantile crossing(s) detected on the fitted data's query grid\n";
      const std::size_t cap = 20;
      for (std::size_t i = 0; i < report.crossings.size() && i < cap; ++i) {
        const Crossing& c = report.crossings[i];
        std::cerr << "  query " << c.query_index << ": q(" << format_double(c.tau_low)
                  << ") = " << format_double(c.q_low) << " > q(" << format_double(c.tau_high)
                  << ") = " << format_double(c.q_high) << "\n";
      }
      if (report.crossings.size() > cap) {
        std::cerr << "  ... and " << report.crossings.size() - cap << " more\n";
      }
    }
  }
}

// --------------------------------------------------------------- screen --

struct ScreenArgs {
  std::string models;
  std::string queries;
  std::string output = "screen.csv";
};

void run_screen(const ScreenArgs& args, const std::string& out_dir) {
  if (!fs::exists(args.models)) throw UsageError("missing model file: " + args.models);
  std::vector<ConditionalQuantileModel> models;
  try {
    models = read_models_csv(args.models);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (models.size() < 3) {
    throw UsageError("screening needs at least 3 quantile levels, model file has " +
                     std::to_string(models.size()));
  }
  if (!fs::exists(args.queries)) throw UsageError("missing query file: " + args.queries);
  std::vector<ScreenQuery> queries;
  try {
    queries = read_screen_queries_csv(args.queries);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const bool needs_height =
      std::any_of(models.begin(), models.end(),
                  [](const ConditionalQuantileModel& m) { return m.c != 0.0; });

  std::string out = "t_prev,t,w_prev,h,w_observed,level,flag,error\n";
  std::size_t succeeded = 0;
  std::string first_error;
  for (const ScreenQuery& q : queries) {
    std::string level, flag, error;
    if (!q.h && needs_height) {
      error = "missing_height";
    } else {
      try {
        const ScreenResult r =
            screen(models, q.t_prev, q.t, q.w_prev, q.h ? *q.h : 0.0, q.w_observed);
        level = format_double(r.level);
        if (r.below_chart) flag = "below_chart";
        if (r.above_chart) flag = "above_chart";
        ++succeeded;
      } catch (const std::domain_error&) {
        error = "age_outside_domain";
      } catch (const std::exception&) {
        error = "bad_query";
      }
    }
    if (error.size() && first_error.empty()) first_error = error;
    out += format_double(q.t_prev);
    out += ',' + format_double(q.t);
    out += ',' + format_double(q.w_prev);
    out += ',';
    if (q.h) out += format_double(*q.h);
    out += ',' + format_double(q.w_observed);
    out += ',' + level + ',' + flag + ',' + error + '\n';
  }

  const std::string path = out_path(out_dir, args.output);
  write_text_atomic(path, out);
  std::cout << "screened " << succeeded << " of " << queries.size() << " queries; wrote "
            << path << "\n";
  if (!queries.empty() && succeeded == 0) {
    throw std::runtime_error("every query row failed (first error: " + first_error + ")");
  }
}

// -------------------------------------------------------------- catchup --

struct CatchupArgs {
  std::string input;
  std::string g_file;
  bool estimate_g = false;
  std::string g_knots = "auto";
  double g_lambda = 1.0;
  std::string mode = "scalar";
  std::string b_knots = "auto";
  int degree = 3;
  double alpha = 0.05;
  std::string noise_scaling = "linear";
  std::string output = "catchup_estimate.csv";
};

void run_catchup(const CatchupArgs& args, const std::string& out_dir) {
  if (args.mode != "scalar" && args.mode != "spline") {
    throw UsageError("--mode must be scalar or spline");
  }
  if (!(args.alpha > 0 && args.alpha < 1)) throw UsageError("--alpha must be in (0, 1)");
  if (args.g_lambda < 0) throw UsageError("--g-lambda must be >= 0");
  if (args.g_file.empty() == !args.estimate_g) {
    throw UsageError("supply the population curve with exactly one of --g-file or --estimate-g");
  }
  const NoiseScaling scaling = to_noise_scaling(args.noise_scaling);
  const LongitudinalDataset data = load_dataset(args.input);

  SplineCurve g = [&] {
    if (!args.g_file.empty()) return load_spline(args.g_file);
    // Two-stage pipeline: median quantile spline of weight on age.
    const auto [lo, hi] = age_range(data);
    const std::size_t n = data.total_measurements();
    const int k = resolve_knots(args.g_knots, static_cast<std::int64_t>(n));
    BSplineBasis basis(make_knots(lo, hi, k, KnotPlacement::equal_spacing, {}, args.degree));
    Eigen::VectorXd t(n), w(n);
    std::size_t r = 0;
    for (const Subject& s : data.subjects) {
      for (const Measurement& m : s.visits) {
        t[r] = m.t;
        w[r] = m.w;
        ++r;
      }
    }
    const QuantilePenalty penalty{difference_penalty(basis.num_basis(), 2), args.g_lambda};
    QuantileFit fit = fit_quantile(basis.design_matrix(t), w, 0.5, penalty);
    return SplineCurve{std::move(basis), std::move(fit.coeffs)};
  }();

  CatchupEstimatorConfig config;
  config.noise_scaling = scaling;
  if (args.mode == "spline") {
    const auto [lo, hi] = age_range(data);
    const int k =
        resolve_knots(args.b_knots, static_cast<std::int64_t>(data.total_transitions()));
    config.spline_basis =
        BSplineBasis(make_knots(lo, hi, k, KnotPlacement::equal_spacing, {}, args.degree));
  }

  const CatchupEstimate estimate = estimate_b(data, g, config);
  if (estimate.is_scalar()) {
    std::string verdict;
    if (estimate.standard_error) {
      verdict =
          is_catchup(estimate, args.alpha) == CatchupVerdict::catchup ? "catchup" : "no_evidence";
    }
    std::string row = format_double(estimate.scalar());
    row += ',';
    if (estimate.standard_error) row += format_double(*estimate.standard_error);
    row += ',' + std::to_string(estimate.n_transitions);
    row += ',' + verdict;
    const std::string path = out_path(out_dir, args.output);
    write_text_atomic(path, "b_hat,se,n_transitions,verdict\n" + row + "\n");
    std::cout << "b_hat,se,n_transitions,verdict\n" << row << "\nwrote " << path << "\n";
  } else {
    const std::string path = out_path(out_dir, "catchup_b_spline.csv");
    write_spline_csv(path, std::get<SplineCurve>(estimate.b_hat));
    std::cout << "n_transitions=" << estimate.n_transitions << "; wrote spline b(t) to "
              << path << "\n";
  }
}

// ------------------------------------------------------------- simulate --

struct SimulateArgs {
  int subjects = 50;
  std::vector<double> schedule = {0, 1, 2, 3, 4, 5};
  double b = 0.0;
  double sigma = 0.0;
  std::optional<double> w0;
  std::string g_file;
  double g_base = 10.0;
  double g_slope = 0.0;
  std::string noise_scaling = "linear";
  std::string output = "simulated.csv";
};

void run_simulate(const SimulateArgs& args, const std::string& out_dir, std::uint64_t seed) {
  if (args.subjects < 1) throw UsageError("--subjects must be >= 1");
  if (args.sigma < 0) throw UsageError("--sigma must be >= 0");
  if (args.schedule.size() < 2) throw UsageError("--schedule needs at least 2 visit ages");
  for (std::size_t i = 1; i < args.schedule.size(); ++i) {
    if (!(args.schedule[i] > args.schedule[i - 1])) {
      throw UsageError("--schedule ages must be strictly increasing");
    }
  }
  const NoiseScaling scaling = to_noise_scaling(args.noise_scaling);

  SplineCurve g = [&] {
    if (!args.g_file.empty()) return load_spline(args.g_file);
    BSplineBasis basis(make_knots(args.schedule.front(), args.schedule.back(), 4,
                                  KnotPlacement::equal_spacing, {}, 3));
    return linear_curve(basis, args.g_base, args.g_slope);
  }();
  if (args.schedule.front() < g.basis.lo() || args.schedule.back() > g.basis.hi()) {
    throw UsageError("--schedule extends outside the curve domain [" +
                     format_double(g.basis.lo()) + ", " + format_double(g.basis.hi()) + "]");
  }

  const CatchupModel model{std::move(g), args.b, args.sigma, scaling};
  const std::vector<std::vector<double>> schedules(args.subjects, args.schedule);
  const LongitudinalDataset data =
      args.w0 ? simulate_cohort(model, schedules,
                                std::vector<double>(args.subjects, *args.w0), seed)
              : simulate_cohort(model, schedules, seed);

  for (const Subject& s : data.subjects) {
    for (const Measurement& m : s.visits) {
      if (!(m.w > 0)) {
        throw std::runtime_error("simulated weight " + format_double(m.w) + " for subject " +
                                 s.id + " is not positive; raise --g-base or lower --sigma");
      }
    }
  }

  const std::string path = out_path(out_dir, args.output);
  write_longitudinal_csv(path, data);
  std::cout << "wrote " << data.subjects.size() << " subjects x " << args.schedule.size()
            << " visits to " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized-spline growth charts: smoothing experiment, conditional quantile "
               "fitting, screening, catch-up estimation, simulation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--config", config_path, "Flat key = value config file; flags override");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Directory for output files");

  Fig1Args fig1_args;
  CLI::App* fig1_cmd =
      app.add_subcommand("fig1", "Penalty-versus-no-penalty smoothing experiment");
  fig1_cmd->fallthrough();
  auto* f_n = fig1_cmd->add_option("--n", fig1_args.config.n, "Sample size per replication");
  auto* f_knots = fig1_cmd->add_option("--knots", fig1_args.config.knots, "Interior knots");
  auto* f_reps = fig1_cmd->add_option("--reps", fig1_args.config.replications, "Replications");
  auto* f_noise =
      fig1_cmd->add_option("--noise-scale", fig1_args.config.noise_scale, "Noise multiplier");
  auto* f_grid =
      fig1_cmd->add_option("--ise-grid", fig1_args.config.ise_grid_size, "Error-grid points");

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit conditional quantile growth models");
  fit_cmd->fallthrough();
  auto* t_input = fit_cmd->add_option("--input", fit_args.input, "Longitudinal CSV")
                      ->required();
  auto* t_tau = fit_cmd->add_option("--tau", fit_args.taus, "Quantile levels")
                    ->delimiter(',');
  auto* t_knots = fit_cmd->add_option("--knots", fit_args.knots, "Interior knots or 'auto'");
  auto* t_degree = fit_cmd->add_option("--degree", fit_args.degree, "Spline degree");
  auto* t_order =
      fit_cmd->add_option("--penalty-order", fit_args.penalty_order, "Difference order");
  auto* t_lambda =
      fit_cmd->add_option("--lambda", fit_args.lambda, "Smoothing weight (0 = none)");
  auto* t_transform =
      fit_cmd->add_option("--transform", fit_args.transform, "identity or cube");
  auto* t_output = fit_cmd->add_option("--output", fit_args.output, "Model CSV name");

  ScreenArgs screen_args;
  CLI::App* screen_cmd =
      app.add_subcommand("screen", "Screen observed weights against fitted models");
  screen_cmd->fallthrough();
  auto* s_models =
      screen_cmd->add_option("--models", screen_args.models, "Model CSV from fit")->required();
  auto* s_queries =
      screen_cmd->add_option("--queries", screen_args.queries, "Query CSV")->required();
  auto* s_output = screen_cmd->add_option("--output", screen_args.output, "Output CSV name");

  CatchupArgs catchup_args;
  CLI::App* catchup_cmd =
      app.add_subcommand("catchup", "Estimate the catch-up coefficient b");
  catchup_cmd->fallthrough();
  auto* c_input =
      catchup_cmd->add_option("--input", catchup_args.input, "Longitudinal CSV")->required();
  auto* c_gfile =
      catchup_cmd->add_option("--g-file", catchup_args.g_file, "Population curve spline CSV");
  auto* c_estg = catchup_cmd->add_flag("--estimate-g", catchup_args.estimate_g,
                                       "Estimate the curve by a median quantile spline");
  auto* c_gknots =
      catchup_cmd->add_option("--g-knots", catchup_args.g_knots, "Curve knots or 'auto'");
  auto* c_glambda = catchup_cmd->add_option("--g-lambda", catchup_args.g_lambda,
                                            "Smoothing weight for --estimate-g");
  auto* c_mode = catchup_cmd->add_option("--mode", catchup_args.mode, "scalar or spline");
  auto* c_bknots =
      catchup_cmd->add_option("--b-knots", catchup_args.b_knots, "Spline-b knots or 'auto'");
  auto* c_degree = catchup_cmd->add_option("--degree", catchup_args.degree, "Spline degree");
  auto* c_alpha =
      catchup_cmd->add_option("--alpha", catchup_args.alpha, "One-sided test level");
  auto* c_scaling = catchup_cmd->add_option("--noise-scaling", catchup_args.noise_scaling,
                                            "linear or sqrt");
  auto* c_output =
      catchup_cmd->add_option("--output", catchup_args.output, "Estimate CSV name");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Simulate a cohort from the model");
  sim_cmd->fallthrough();
  auto* m_subjects = sim_cmd->add_option("--subjects", sim_args.subjects, "Cohort size");
  auto* m_schedule =
      sim_cmd->add_option("--schedule", sim_args.schedule, "Visit ages")->delimiter(',');
  auto* m_b = sim_cmd->add_option("--b", sim_args.b, "Catch-up coefficient");
  auto* m_sigma = sim_cmd->add_option("--sigma", sim_args.sigma, "Noise standard deviation");
  double w0_value = 0.0;
  auto* m_w0 =
      sim_cmd->add_option("--w0", w0_value, "Initial deviation from the curve, all subjects");
  auto* m_gfile = sim_cmd->add_option("--g-file", sim_args.g_file, "Curve spline CSV");
  auto* m_gbase = sim_cmd->add_option("--g-base", sim_args.g_base, "Linear curve intercept");
  auto* m_gslope = sim_cmd->add_option("--g-slope", sim_args.g_slope, "Linear curve slope");
  auto* m_scaling =
      sim_cmd->add_option("--noise-scaling", sim_args.noise_scaling, "linear or sqrt");
  auto* m_output = sim_cmd->add_option("--output", sim_args.output, "Dataset CSV name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  CLI::App* active = app.get_subcommands().front();

  try {
    ConfigTable table;
    table["seed"] = {seed_opt, [&](const std::string& v) { seed = config_u64(v); }};
    table["out-dir"] = {out_opt, [&](const std::string& v) { out_dir = v; }};
    if (active == fig1_cmd) {
      table["n"] = {f_n, [&](const std::string& v) { fig1_args.config.n = config_int(v); }};
      table["knots"] = {f_knots,
                        [&](const std::string& v) { fig1_args.config.knots = config_int(v); }};
      table["reps"] = {f_reps, [&](const std::string& v) {
                         fig1_args.config.replications = config_int(v);
                       }};
      table["noise-scale"] = {f_noise, [&](const std::string& v) {
                                fig1_args.config.noise_scale = config_double(v);
                              }};
      table["ise-grid"] = {f_grid, [&](const std::string& v) {
                             fig1_args.config.ise_grid_size = config_int(v);
                           }};
    } else if (active == fit_cmd) {
      table["input"] = {t_input, [&](const std::string& v) { fit_args.input = v; }};
      table["tau"] = {t_tau,
                      [&](const std::string& v) { fit_args.taus = config_double_list(v); }};
      table["knots"] = {t_knots, [&](const std::string& v) { fit_args.knots = v; }};
      table["degree"] = {t_degree,
                         [&](const std::string& v) { fit_args.degree = config_int(v); }};
      table["penalty-order"] = {t_order, [&](const std::string& v) {
                                  fit_args.penalty_order = config_int(v);
                                }};
      table["lambda"] = {t_lambda,
                         [&](const std::string& v) { fit_args.lambda = config_double(v); }};
      table["transform"] = {t_transform,
                            [&](const std::string& v) { fit_args.transform = v; }};
      table["output"] = {t_output, [&](const std::string& v) { fit_args.output = v; }};
    } else if (active == screen_cmd) {
      table["models"] = {s_models, [&](const std::string& v) { screen_args.models = v; }};
      table["queries"] = {s_queries, [&](const std::string& v) { screen_args.queries = v; }};
      table["output"] = {s_output, [&](const std::string& v) { screen_args.output = v; }};
    } else if (active == catchup_cmd) {
      table["input"] = {c_input, [&](const std::string& v) { catchup_args.input = v; }};
      table["g-file"] = {c_gfile, [&](const std::string& v) { catchup_args.g_file = v; }};
      table["estimate-g"] = {c_estg, [&](const std::string& v) {
                               if (v == "true" || v == "1") {
                                 catchup_args.estimate_g = true;
                               } else if (v == "false" || v == "0") {
                                 catchup_args.estimate_g = false;
                               } else {
                                 throw UsageError("estimate-g must be true or false");
                               }
                             }};
      table["g-knots"] = {c_gknots, [&](const std::string& v) { catchup_args.g_knots = v; }};
      table["g-lambda"] = {c_glambda, [&](const std::string& v) {
                             catchup_args.g_lambda = config_double(v);
                           }};
      table["mode"] = {c_mode, [&](const std::string& v) { catchup_args.mode = v; }};
      table["b-knots"] = {c_bknots, [&](const std::string& v) { catchup_args.b_knots = v; }};
      table["degree"] = {c_degree,
                         [&](const std::string& v) { catchup_args.degree = config_int(v); }};
      table["alpha"] = {c_alpha,
                        [&](const std::string& v) { catchup_args.alpha = config_double(v); }};
      table["noise-scaling"] = {c_scaling, [&](const std::string& v) {
                                  catchup_args.noise_scaling = v;
                                }};
      table["output"] = {c_output, [&](const std::string& v) { catchup_args.output = v; }};
    } else if (active == sim_cmd) {
      table["subjects"] = {m_subjects,
                           [&](const std::string& v) { sim_args.subjects = config_int(v); }};
      table["schedule"] = {m_schedule, [&](const std::string& v) {
                             sim_args.schedule = config_double_list(v);
                           }};
      table["b"] = {m_b, [&](const std::string& v) { sim_args.b = config_double(v); }};
      table["sigma"] = {m_sigma,
                        [&](const std::string& v) { sim_args.sigma = config_double(v); }};
      table["w0"] = {m_w0, [&](const std::string& v) { sim_args.w0 = config_double(v); }};
      table["g-file"] = {m_gfile, [&](const std::string& v) { sim_args.g_file = v; }};
      table["g-base"] = {m_gbase,
                         [&](const std::string& v) { sim_args.g_base = config_double(v); }};
      table["g-slope"] = {m_gslope,
                          [&](const std::string& v) { sim_args.g_slope = config_double(v); }};
      table["noise-scaling"] = {m_scaling,
                                [&](const std::string& v) { sim_args.noise_scaling = v; }};
      table["output"] = {m_output, [&](const std::string& v) { sim_args.output = v; }};
    }
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw UsageError("missing config file: " + config_path);
      apply_config_file(config_path, table);
    }
    if (m_w0->count() > 0) sim_args.w0 = w0_value;
    fig1_args.config.seed = seed;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw UsageError("cannot create --out-dir " + out_dir + ": " + ec.message());

    if (active == fig1_cmd) {
      run_fig1(fig1_args, out_dir);
    } else if (active == fit_cmd) {
      run_fit(fit_args, out_dir);
    } else if (active == screen_cmd) {
      run_screen(screen_args, out_dir);
    } else if (active == catchup_cmd) {
      run_catchup(catchup_args, out_dir);
    } else if (active == sim_cmd) {
      run_simulate(sim_args, out_dir, seed);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
