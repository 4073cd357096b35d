#include "growthchart/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace growthchart {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return in;
}

// Lines of a text file with the final empty line (from a trailing LF)
// dropped; interior lines are kept even when blank so line numbers in
// errors match the file.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void check_header(const std::vector<std::string>& lines, const std::string& expected,
                  const std::string& path) {
  if (lines.empty() || trim(lines[0]) != expected) {
    throw std::runtime_error(path + ": expected header '" + expected + "'");
  }
}

std::string line_context(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

std::string transform_name(HeightTransform t) {
  return t == HeightTransform::cube ? "cube" : "identity";
}

HeightTransform parse_transform(const std::string& s, const std::string& context) {
  if (s == "identity") return HeightTransform::identity;
  if (s == "cube") return HeightTransform::cube;
  throw std::runtime_error(context + ": unknown transform '" + s +
                           "' (expected identity or cube)");
}

long parse_count(const std::string& field, const std::string& context) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 0) {
    throw std::runtime_error(context + ": not a count: '" + field + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::runtime_error(context + ": not a number: '" + field + "'");
  }
  return v;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + tmp);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

LongitudinalDataset read_longitudinal_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  check_header(lines, "subject,t,w,h", path);

  LongitudinalDataset data;
  std::map<std::string, std::size_t> subject_index;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string context = line_context(path, i + 1);
    const std::vector<std::string> fields = split_fields(lines[i]);
    if (fields.size() != 4) {
      throw std::runtime_error(context + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw std::runtime_error(context + ": empty subject id");
    Measurement m;
    m.t = parse_double(fields[1], context + " (t)");
    m.w = parse_double(fields[2], context + " (w)");
    if (!fields[3].empty()) m.h = parse_double(fields[3], context + " (h)");

    auto [it, inserted] = subject_index.try_emplace(fields[0], data.subjects.size());
    if (inserted) data.subjects.push_back({fields[0], {}});
    data.subjects[it->second].visits.push_back(m);
  }

  for (Subject& subject : data.subjects) {
    std::stable_sort(subject.visits.begin(), subject.visits.end(),
                     [](const Measurement& a, const Measurement& b) { return a.t < b.t; });
    for (std::size_t j = 1; j < subject.visits.size(); ++j) {
      if (subject.visits[j].t == subject.visits[j - 1].t) {
        throw std::runtime_error(path + ": subject '" + subject.id +
                                 "' has duplicate visit age t = " +
                                 format_double(subject.visits[j].t));
      }
    }
  }
  data.validate();
  return data;
}

void write_longitudinal_csv(const std::string& path, const LongitudinalDataset& data) {
  std::string out = "subject,t,w,h\n";
  for (const Subject& subject : data.subjects) {
    if (subject.id.find_first_of(",\n\r") != std::string::npos) {
      throw std::invalid_argument("subject id not representable in CSV: '" + subject.id + "'");
    }
    for (const Measurement& m : subject.visits) {
      out += subject.id;
      out += ',';
      out += format_double(m.t);
      out += ',';
      out += format_double(m.w);
      out += ',';
      if (m.h) out += format_double(*m.h);
      out += '\n';
    }
  }
  write_text_atomic(path, out);
}

void write_models_csv(const std::string& path,
                      const std::vector<ConditionalQuantileModel>& models) {
  if (models.empty()) throw std::invalid_argument("write_models_csv: no models");
  const KnotVector& knots = models.front().basis.knots();
  const std::size_t k = knots.interior().size();
  const std::size_t nb = static_cast<std::size_t>(models.front().basis.num_basis());
  for (const ConditionalQuantileModel& m : models) {
    if (m.basis.knots().interior().size() != k ||
        static_cast<std::size_t>(m.g_coeffs.size()) != nb) {
      throw std::invalid_argument("write_models_csv: models do not share one basis");
    }
  }

  std::string header = "tau,a,b,c,transform,degree,lo,hi,n_knots";
  for (std::size_t i = 1; i <= k; ++i) header += ",knot" + std::to_string(i);
  for (std::size_t i = 1; i <= nb; ++i) header += ",g" + std::to_string(i);
  std::string out = header + "\n";
  for (const ConditionalQuantileModel& m : models) {
    const KnotVector& kv = m.basis.knots();
    out += format_double(m.tau);
    out += ',' + format_double(m.a);
    out += ',' + format_double(m.b);
    out += ',' + format_double(m.c);
    out += ',' + transform_name(m.transform);
    out += ',' + std::to_string(kv.degree());
    out += ',' + format_double(kv.lo());
    out += ',' + format_double(kv.hi());
    out += ',' + std::to_string(k);
    for (double knot : kv.interior()) out += ',' + format_double(knot);
    for (Eigen::Index i = 0; i < m.g_coeffs.size(); ++i)
      out += ',' + format_double(m.g_coeffs[i]);
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<ConditionalQuantileModel> read_models_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty model file");
  const std::vector<std::string> header = split_fields(lines[0]);
  const std::vector<std::string> fixed = {"tau", "a",  "b",  "c",      "transform",
                                          "degree",   "lo", "hi", "n_knots"};
  if (header.size() < fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw std::runtime_error(path + ": expected model header starting 'tau,a,b,c,transform,"
                             "degree,lo,hi,n_knots'");
  }

  std::vector<ConditionalQuantileModel> models;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string context = line_context(path, i + 1);
    const std::vector<std::string> f = split_fields(lines[i]);
    if (f.size() < 9) throw std::runtime_error(context + ": truncated model row");
    const double tau = parse_double(f[0], context + " (tau)");
    const double a = parse_double(f[1], context + " (a)");
    const double b = parse_double(f[2], context + " (b)");
    const double c = parse_double(f[3], context + " (c)");
    const HeightTransform transform = parse_transform(f[4], context);
    const long degree = parse_count(f[5], context + " (degree)");
    const double lo = parse_double(f[6], context + " (lo)");
    const double hi = parse_double(f[7], context + " (hi)");
    const long n_knots = parse_count(f[8], context + " (n_knots)");
    const std::size_t expected = 9 + static_cast<std::size_t>(n_knots) +
                                 static_cast<std::size_t>(n_knots + degree + 1);
    if (f.size() != expected) {
      throw std::runtime_error(context + ": expected " + std::to_string(expected) +
                               " fields for " + std::to_string(n_knots) + " knots, got " +
                               std::to_string(f.size()));
    }
    std::vector<double> interior;
    interior.reserve(n_knots);
    for (long j = 0; j < n_knots; ++j)
      interior.push_back(parse_double(f[9 + j], context + " (knot)"));
    BSplineBasis basis(KnotVector(lo, hi, std::move(interior), static_cast<int>(degree)));
    Eigen::VectorXd g(basis.num_basis());
    for (Eigen::Index j = 0; j < g.size(); ++j)
      g[j] = parse_double(f[9 + n_knots + j], context + " (g)");
    models.push_back({tau, std::move(basis), std::move(g), a, b, c, transform, 0.0});
  }
  if (models.empty()) throw std::runtime_error(path + ": no model rows");
  std::sort(models.begin(), models.end(),
            [](const ConditionalQuantileModel& x, const ConditionalQuantileModel& y) {
              return x.tau < y.tau;
            });
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].tau == models[i - 1].tau) {
      throw std::runtime_error(path + ": duplicate tau = " + format_double(models[i].tau));
    }
  }
  return models;
}

void write_spline_csv(const std::string& path, const SplineCurve& curve) {
  const KnotVector& kv = curve.basis.knots();
  std::string out = "key,value\n";
  out += "degree," + std::to_string(kv.degree()) + "\n";
  out += "lo," + format_double(kv.lo()) + "\n";
  out += "hi," + format_double(kv.hi()) + "\n";
  for (double knot : kv.interior()) out += "knot," + format_double(knot) + "\n";
  for (Eigen::Index i = 0; i < curve.coeffs.size(); ++i)
    out += "coeff," + format_double(curve.coeffs[i]) + "\n";
  write_text_atomic(path, out);
}

SplineCurve read_spline_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  check_header(lines, "key,value", path);
  std::optional<long> degree;
  std::optional<double> lo, hi;
  std::vector<double> interior, coeffs;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string context = line_context(path, i + 1);
    const std::vector<std::string> f = split_fields(lines[i]);
    if (f.size() != 2) throw std::runtime_error(context + ": expected key,value");
    if (f[0] == "degree") {
      degree = parse_count(f[1], context);
    } else if (f[0] == "lo") {
      lo = parse_double(f[1], context);
    } else if (f[0] == "hi") {
      hi = parse_double(f[1], context);
    } else if (f[0] == "knot") {
      interior.push_back(parse_double(f[1], context));
    } else if (f[0] == "coeff") {
      coeffs.push_back(parse_double(f[1], context));
    } else {
      throw std::runtime_error(context + ": unknown key '" + f[0] + "'");
    }
  }
  if (!degree || !lo || !hi) {
    throw std::runtime_error(path + ": spline file needs degree, lo and hi rows");
  }
  BSplineBasis basis(KnotVector(*lo, *hi, std::move(interior), static_cast<int>(*degree)));
  if (coeffs.size() != static_cast<std::size_t>(basis.num_basis())) {
    throw std::runtime_error(path + ": expected " + std::to_string(basis.num_basis()) +
                             " coeff rows, got " + std::to_string(coeffs.size()));
  }
  Eigen::VectorXd c = Eigen::Map<Eigen::VectorXd>(coeffs.data(), coeffs.size());
  return SplineCurve{std::move(basis), std::move(c)};
}

std::vector<ScreenQuery> read_screen_queries_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  check_header(lines, "t_prev,t,w_prev,h,w_observed", path);
  std::vector<ScreenQuery> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string context = line_context(path, i + 1);
    const std::vector<std::string> f = split_fields(lines[i]);
    if (f.size() != 5) {
      throw std::runtime_error(context + ": expected 5 fields, got " +
                               std::to_string(f.size()));
    }
    ScreenQuery q;
    q.t_prev = parse_double(f[0], context + " (t_prev)");
    q.t = parse_double(f[1], context + " (t)");
    q.w_prev = parse_double(f[2], context + " (w_prev)");
    if (!f[3].empty()) q.h = parse_double(f[3], context + " (h)");
    q.w_observed = parse_double(f[4], context + " (w_observed)");
    out.push_back(q);
  }
  return out;
}

void write_fig1_report_csv(const std::string& path, const Fig1Report& report) {
  std::string out = "rep,ise_penalized,ise_unpenalized,lambda_star\n";
  for (const Fig1Replication& r : report.replications) {
    out += std::to_string(r.rep);
    out += ',' + format_double(r.ise_penalized);
    out += ',';
    if (!r.singular) out += format_double(r.ise_unpenalized);
    out += ',' + format_double(r.lambda_star);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_fig1_curves_csv(const std::string& path, const Fig1Curves& curves) {
  std::string out = "x,truth,penalized,unpenalized\n";
  for (Eigen::Index i = 0; i < curves.x.size(); ++i) {
    out += format_double(curves.x[i]);
    out += ',' + format_double(curves.truth[i]);
    out += ',' + format_double(curves.penalized[i]);
    out += ',';
    if (!std::isnan(curves.unpenalized[i])) out += format_double(curves.unpenalized[i]);
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string context = line_context(path, i + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(context + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(context + ": empty key");
    if (value.empty()) throw std::runtime_error(context + ": empty value for '" + key + "'");
    for (const auto& [k, v] : out) {
      if (k == key) throw std::runtime_error(context + ": duplicate key '" + key + "'");
    }
    out.emplace_back(key, value);
  }
  return out;
}

}  // namespace growthchart
