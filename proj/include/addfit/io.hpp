#pragma once

// CSV ingestion, curve tables and JSON reports.

#include "addfit/backfit.hpp"
#include "addfit/simulate.hpp"
#include "addfit/spectral.hpp"

#include "json.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace addfit {

using Json = nlohmann::ordered_json;

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view strip_eol(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

/// Strict decimal parse; the whole field must be consumed.
inline double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw CsvError(line, "non-numeric field '" + std::string(field) + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::vector<std::vector<double>> read_table(std::istream& in,
                                                   std::string_view expected_header) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(1, "missing header");
  std::string_view head = strip_eol(line);
  if (head.substr(0, 3) == "\xEF\xBB\xBF") head.remove_prefix(3);
  if (head != expected_header)
    throw CsvError(1, "expected header '" + std::string(expected_header) + "'");
  const auto width = split(expected_header, ',').size();

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = strip_eol(line);
    if (body.empty()) continue;
    const auto fields = split(body, ',');
    if (fields.size() != width)
      throw CsvError(lineno, "expected " + std::to_string(width) + " fields, got " +
                                 std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(width);
    for (auto f : fields) row.push_back(parse_double(f, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace detail

/// Reads a `y,u,v` CSV. Any non-numeric field is an error.
inline Dataset read_dataset_csv(std::istream& in) {
  const auto rows = detail::read_table(in, "y,u,v");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < 2) throw CsvError(rows.size() + 1, "need at least two data rows");
  Vector y(n), u(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = rows[i][0];
    u[i] = rows[i][1];
    v[i] = rows[i][2];
  }
  return Dataset(std::move(y), std::move(u), std::move(v));
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "y,u,v\n";
  for (Eigen::Index i = 0; i < d.size(); ++i)
    out << detail::format_double(d.y()[i]) << ',' << detail::format_double(d.u()[i]) << ','
        << detail::format_double(d.v()[i]) << '\n';
}

inline constexpr std::string_view kCurveHeader = "index,u,m1_hat,v,m2_hat,y,residual";

/// One row per observation; doubles are written in shortest round-trip form.
inline void write_curves_csv(std::ostream& out, const Dataset& d, const FitResult& f) {
  out << kCurveHeader << '\n';
  const Vector resid = d.y() - f.fitted();
  using detail::format_double;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    out << i << ',' << format_double(d.u()[i]) << ',' << format_double(f.m1_hat[i]) << ','
        << format_double(d.v()[i]) << ',' << format_double(f.m2_hat[i]) << ','
        << format_double(d.y()[i]) << ',' << format_double(resid[i]) << '\n';
}

struct CurveTable {
  Vector u, m1_hat, v, m2_hat, y, residual;
};

inline CurveTable read_curves_csv(std::istream& in) {
  const auto rows = detail::read_table(in, kCurveHeader);
  const auto n = static_cast<Eigen::Index>(rows.size());
  CurveTable t{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[i];
    if (r[0] != static_cast<double>(i)) throw CsvError(i + 2, "index out of sequence");
    t.u[i] = r[1];
    t.m1_hat[i] = r[2];
    t.v[i] = r[3];
    t.m2_hat[i] = r[4];
    t.y[i] = r[5];
    t.residual[i] = r[6];
  }
  return t;
}

inline void write_replicates_csv(std::ostream& out, const MonteCarloReport& rep) {
  out << "replicate,max_gap_u,max_gap_v,gap_ok,certified,rho_product\n";
  using detail::format_double;
  for (const auto& r : rep.rows) {
    out << r.replicate << ',' << format_double(r.max_gap_u) << ','
        << format_double(r.max_gap_v) << ',' << (r.gap_ok ? 1 : 0) << ',';
    if (r.verdict) out << (r.certified() ? 1 : 0);
    out << ',';
    if (r.rho_product) out << format_double(*r.rho_product);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const GapReport& g) {
  Json j;
  j["coordinate"] = g.coordinate == Coordinate::U ? "u" : "v";
  j["max_gap"] = g.max_gap;
  j["condition_holds"] = g.condition_holds;
  j["failing_indices"] = g.failing_indices;
  j["gaps"] = g.gaps;
  return j;
}

inline Json to_json(const SpectralReport& s) {
  Json j;
  j["rho_s1_star"] = s.rho_s1_star;
  j["rho_s2_star"] = s.rho_s2_star;
  j["rho_product"] = s.rho_product;
  j["top_eigenvalue_s1"] = {{"re", s.top_eigenvalue_s1.real()},
                            {"im", s.top_eigenvalue_s1.imag()},
                            {"modulus", std::abs(s.top_eigenvalue_s1)},
                            {"simple", s.top_eigenvalue_simple}};
  j["perron_vector_check"] = s.perron_vector_check;
  j["method"] = to_string(s.method);
  j["iterations"] = s.iterations;
  return j;
}

inline Json to_json(const ConvergenceCertificate& c) {
  Json j;
  j["verdict"] = to_string(c.verdict);
  j["certified"] = c.certified();
  j["regular_s1"] = c.regular_s1;
  j["regular_s2"] = c.regular_s2;
  j["gap_u"] = to_json(c.gap_u);
  j["gap_v"] = to_json(c.gap_v);
  j["spectral"] = to_json(c.spectral);
  j["notes"] = c.notes;
  return j;
}

inline Json to_json(const FitResult& f) {
  Json j;
  j["method"] = to_string(f.method);
  if (f.method == FitMethod::Iterative) j["sweep"] = to_string(f.sweep);
  j["alpha_hat"] = f.alpha_hat;
  j["iterations"] = f.iterations;
  j["final_delta"] = f.final_delta;
  j["residual_normal_eq"] = f.residual_normal_eq;
  if (f.method == FitMethod::Direct) j["closed_form_gap"] = f.closed_form_gap;
  j["m1_hat"] = detail::to_json(f.m1_hat);
  j["m2_hat"] = detail::to_json(f.m2_hat);
  return j;
}

inline Json to_json(const GapBound& b) {
  return Json{{"exact", b.exact}, {"exponential", b.exponential}};
}

inline Json to_json(const MonteCarloReport& r) {
  Json j;
  j["replicates"] = r.replicates;
  j["n"] = r.n;
  j["kernel"] = to_string(r.kernel);
  j["bandwidth_rule"] = r.bandwidth_rule;
  j["fraction_gap_ok"] = r.fraction_gap_ok;
  j["fraction_certified"] = r.fraction_certified ? Json(*r.fraction_certified) : Json();
  j["fraction_gap_certified"] =
      r.fraction_gap_certified ? Json(*r.fraction_gap_certified) : Json();
  j["analytic_bound"] = r.analytic_bound ? Json(*r.analytic_bound) : Json();
  j["mean_max_gap_u"] = r.mean_max_gap_u;
  j["mean_max_gap_v"] = r.mean_max_gap_v;
  return j;
}

}  // namespace addfit
