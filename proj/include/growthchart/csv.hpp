#pragma once

#include "growthchart/catchup.hpp"
#include "growthchart/conditional.hpp"
#include "growthchart/fig1.hpp"
#include "growthchart/longitudinal.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace growthchart {

// 17 significant digits, so write-then-read reproduces the double exactly.
std::string format_double(double v);

// Strict full-token parse; the context string names the field in errors.
double parse_double(const std::string& field, const std::string& context);

// Writes to a temp file in the same directory, then renames over path.
void write_text_atomic(const std::string& path, const std::string& content);

// Longitudinal CSV, header exactly `subject,t,w,h` (h values may be
// empty).  Rows are grouped by subject in first-appearance order and
// sorted by t; duplicate (subject, t) pairs and invariant violations are
// errors naming the subject and file line.
LongitudinalDataset read_longitudinal_csv(const std::string& path);
void write_longitudinal_csv(const std::string& path, const LongitudinalDataset& data);

// Per-tau model records on one shared basis:
//   tau,a,b,c,transform,degree,lo,hi,n_knots,knot1..K,g1..N.
// The reader returns models sorted by tau.
void write_models_csv(const std::string& path,
                      const std::vector<ConditionalQuantileModel>& models);
std::vector<ConditionalQuantileModel> read_models_csv(const std::string& path);

// Single spline curve as `key,value` rows: degree, lo, hi, then knot rows
// in order, then coeff rows in order.
void write_spline_csv(const std::string& path, const SplineCurve& curve);
SplineCurve read_spline_csv(const std::string& path);

// Screening query rows, header `t_prev,t,w_prev,h,w_observed`.
struct ScreenQuery {
  double t_prev = 0.0;
  double t = 0.0;
  double w_prev = 0.0;
  std::optional<double> h;
  double w_observed = 0.0;
};
std::vector<ScreenQuery> read_screen_queries_csv(const std::string& path);

// Smoothing-experiment outputs; NaN cells (singular replications) are
// written empty.
void write_fig1_report_csv(const std::string& path, const Fig1Report& report);
void write_fig1_curves_csv(const std::string& path, const Fig1Curves& curves);

// Flat `key = value` configuration, one pair per line; '#' starts a
// comment, blank lines are skipped, duplicate keys are errors.  Key
// validation is the caller's job (each command knows its own keys).
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

}  // namespace growthchart
