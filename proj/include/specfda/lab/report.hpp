#pragma once

// Report serialization. report.json holds the full report (no timings, so
// reruns compare byte for byte); cells.csv and plotdata.csv print every
// float with 17 significant digits. Timings go to runtime.json.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specfda/error.hpp"
#include "specfda/filters.hpp"
#include "specfda/lab/experiment.hpp"
#include "specfda/sample_set.hpp"

namespace specfda::lab {

using Json = nlohmann::ordered_json;

namespace detail {

// NaN and infinities become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

inline Json config_json(const ExperimentConfig& c) {
  Json out = Json::object();
  for (const auto& [k, v] : c.source) out[k] = v;
  return out;
}

inline Json cell_json(const CellResult& c) {
  Json j;
  j["n"] = c.n;
  j["m"] = number(c.m);
  j["nm"] = number(c.nm);
  j["lambda"] = number(c.lambda);
  j["ok"] = c.ok;
  if (!c.ok) j["reason"] = c.reason;
  j["median_err"] = number(c.median);
  j["iqr"] = number(c.iqr);
  j["errors"] = numbers(c.errors);
  return j;
}

inline Json cells_json(const std::vector<CellResult>& cells) {
  Json out = Json::array();
  for (const auto& c : cells) out.push_back(cell_json(c));
  return out;
}

inline Json fit_json(const std::optional<SlopeFit>& f, const std::string& reason) {
  if (!f) return Json{{"ok", false}, {"reason", reason}};
  return Json{{"ok", true},
              {"slope", number(f->slope)},
              {"intercept", number(f->intercept)},
              {"r2", number(f->r2)},
              {"cells", f->cells}};
}

inline std::string task_name(Task t) { return t == Task::Mean ? "mean" : "covariance"; }

}  // namespace detail

inline Json to_json(const RateReport& r) {
  Json j;
  j["report"] = "rate";
  j["task"] = detail::task_name(r.config.task);
  j["config"] = detail::config_json(r.config);
  j["cells"] = detail::cells_json(r.cells);
  j["fit"] = detail::fit_json(r.fit, r.fit_reason);
  j["target_exponent"] = detail::number(r.target);
  j["tolerance"] = detail::number(r.tolerance);
  j["monotone_in_n"] = r.monotone;
  j["pass"] = r.pass;
  return j;
}

inline Json to_json(const PhaseReport& r) {
  Json j;
  j["report"] = "phase-scan";
  j["config"] = detail::config_json(r.config);
  j["gamma_star"] = detail::number(r.gamma_star);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json jr;
    jr["gamma"] = detail::number(row.gamma);
    jr["regime"] = row.regime;
    jr["cells"] = detail::cells_json(row.cells);
    jr["fit_vs_n"] = detail::fit_json(row.fit, row.fit_reason);
    jr["target_exponent"] = detail::number(row.target);
    jr["pass"] = row.pass;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  j["crossing"] = r.crossing ? Json(*r.crossing) : Json(nullptr);
  j["pass"] = r.pass;
  return j;
}

inline Json to_json(const SaturationReport& r) {
  Json j;
  j["report"] = "saturation";
  j["config"] = detail::config_json(r.config);
  j["filters"] = {r.first_filter, r.second_filter};
  j["target_exponents"] = {detail::number(r.first_exponent), detail::number(r.second_exponent)};
  Json cells = Json::array();
  for (const auto& pc : r.cells) {
    Json c;
    c["first"] = detail::cell_json(pc.first);
    c["second"] = detail::cell_json(pc.second);
    c["ratios"] = detail::numbers(pc.ratios);
    c["median_ratio"] = detail::number(pc.median_ratio);
    c["fraction_at_most_one"] = detail::number(pc.fraction_at_most_one);
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  j["fits"] = {detail::fit_json(r.first_fit, r.fit_reason), detail::fit_json(r.second_fit, r.fit_reason)};
  j["largest_cell_fraction"] = detail::number(r.largest_cell_fraction);
  j["pass"] = r.pass;
  return j;
}

inline Json to_json(const FilterReport& r) {
  Json j;
  j["filter"] = std::string(filter_name(r.filter.family));
  j["sigma_points"] = r.sigma_grid.size();
  j["lambda_points"] = r.lambda_grid.size();
  j["a1"] = detail::number(r.a1);
  j["a2"] = detail::number(r.a2);
  j["a3"] = detail::number(r.a3);
  j["min_sigma_g"] = detail::number(r.min_sigma_g);
  j["a1_pass"] = r.a1_pass;
  j["a2_pass"] = r.a2_pass;
  j["a3_pass"] = r.a3_pass;
  Json q = Json::array();
  for (const auto& c : r.qualification)
    q.push_back({{"p", detail::number(c.p)},
                 {"observed", detail::number(c.observed)},
                 {"declared", detail::number(c.declared)},
                 {"pass", c.pass}});
  j["qualification"] = std::move(q);
  j["pass"] = r.pass();
  return j;
}

/// One labelled series of cells for the CSV writers.
struct Series {
  std::string label;
  const std::vector<CellResult>* cells;
  std::optional<SlopeFit> fit;
  bool against_n = false;
};

/// n,m,nm,median_err,iqr; a leading series column when there is more than
/// one series.
inline void write_cells_csv(const std::vector<Series>& series, std::ostream& out) {
  const bool labelled = series.size() > 1;
  out << (labelled ? "series,n,m,nm,median_err,iqr\n" : "n,m,nm,median_err,iqr\n");
  for (const auto& s : series)
    for (const auto& c : *s.cells) {
      if (labelled) out << s.label << ',';
      out << c.n << ',' << format_double(c.m) << ',' << format_double(c.nm) << ','
          << format_double(c.median) << ',' << format_double(c.iqr) << '\n';
    }
}

/// Log-log points and the fitted line at the same abscissae.
inline void write_plotdata_csv(const std::vector<Series>& series, std::ostream& out) {
  out << "series,x_axis,x,log_x,log_median_err,fitted_log_err\n";
  for (const auto& s : series)
    for (const auto& c : *s.cells) {
      if (!c.ok) continue;
      const double x = s.against_n ? static_cast<double>(c.n) : c.nm;
      const double lx = std::log(x);
      const double fitted = s.fit ? s.fit->intercept + s.fit->slope * lx : kNaN;
      out << s.label << ',' << (s.against_n ? "n" : "nm") << ',' << format_double(x) << ','
          << format_double(lx) << ',' << format_double(std::log(c.median)) << ','
          << format_double(fitted) << '\n';
    }
}

inline std::vector<Series> series_of(const RateReport& r) {
  return {{"rate", &r.cells, r.fit, false}};
}

inline std::vector<Series> series_of(const PhaseReport& r) {
  std::vector<Series> out;
  for (const auto& row : r.rows)
    out.push_back({"gamma=" + format_double(row.gamma), &row.cells, row.fit, true});
  return out;
}

/// Paired cells are split into two series; the vectors must outlive the result.
inline std::vector<Series> series_of(const SaturationReport& r, std::vector<CellResult>& first,
                                     std::vector<CellResult>& second) {
  first.clear();
  second.clear();
  for (const auto& pc : r.cells) {
    first.push_back(pc.first);
    second.push_back(pc.second);
  }
  return {{r.first_filter, &first, r.first_fit, false}, {r.second_filter, &second, r.second_fit, false}};
}

/// The three report files as strings, keyed by file name.
struct ReportFiles {
  std::string report_json;
  std::string cells_csv;
  std::string plotdata_csv;
};

template <class Report>
ReportFiles render(const Report& r, const std::vector<Series>& series) {
  ReportFiles f;
  f.report_json = to_json(r).dump(2) + "\n";
  std::ostringstream cells, plot;
  write_cells_csv(series, cells);
  write_plotdata_csv(series, plot);
  f.cells_csv = cells.str();
  f.plotdata_csv = plot.str();
  return f;
}

inline ReportFiles render(const RateReport& r) { return render(r, series_of(r)); }
inline ReportFiles render(const PhaseReport& r) { return render(r, series_of(r)); }
inline ReportFiles render(const SaturationReport& r) {
  std::vector<CellResult> a, b;
  return render(r, series_of(r, a, b));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

inline void write_report_files(const ReportFiles& f, const std::filesystem::path& dir,
                               double runtime_seconds) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", f.report_json);
  write_text(dir / "cells.csv", f.cells_csv);
  write_text(dir / "plotdata.csv", f.plotdata_csv);
  Json rt;
  rt["runtime_seconds"] = runtime_seconds;
  rt["threads"] = thread_count();
  write_text(dir / "runtime.json", rt.dump(2) + "\n");
}

}  // namespace specfda::lab
