#pragma once

// Sparse, noisy, discretely observed curves {(t_ij, Y_ij)} and their CSV
// serialization (columns curve_id,t,y).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "specfda/error.hpp"
#include "specfda/numerics.hpp"

namespace specfda {

struct Curve {
  std::vector<double> t;
  std::vector<double> y;
};

class SampleSet {
 public:
  SampleSet() = default;

  explicit SampleSet(std::vector<Curve> curves) : curves_(std::move(curves)) {
    if (curves_.empty()) throw Error(ErrorCode::BadSize, "sample set needs at least one curve");
    double inv_sum = 0.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < curves_.size(); ++i) {
      const auto& c = curves_[i];
      if (c.t.empty())
        throw Error(ErrorCode::BadSize, "curve " + std::to_string(i) + " has no observations");
      if (c.t.size() != c.y.size())
        throw Error(ErrorCode::ShapeMismatch, "curve " + std::to_string(i) + " t/y length mismatch");
      for (std::size_t j = 0; j < c.t.size(); ++j) {
        if (!(c.t[j] >= 0.0 && c.t[j] <= 1.0))
          throw Error(ErrorCode::OutOfDomain, "design point outside [0,1] in curve " +
                                                  std::to_string(i));
        if (!std::isfinite(c.y[j]))
          throw Error(ErrorCode::NonFinite, "non-finite response in curve " + std::to_string(i));
      }
      inv_sum += 1.0 / static_cast<double>(c.t.size());
      total += c.t.size();
    }
    harmonic_m_ = static_cast<double>(curves_.size()) / inv_sum;
    total_ = total;
  }

  std::size_t n() const { return curves_.size(); }
  std::size_t total_points() const { return total_; }
  double harmonic_mean_m() const { return harmonic_m_; }
  const std::vector<Curve>& curves() const { return curves_; }
  std::size_t m(std::size_t i) const { return curves_[i].t.size(); }

  /// Design points t_ij flattened curve by curve.
  Vector points() const {
    Vector out(static_cast<Eigen::Index>(total_));
    Eigen::Index k = 0;
    for (const auto& c : curves_)
      for (double t : c.t) out[k++] = t;
    return out;
  }

  Vector responses() const {
    Vector out(static_cast<Eigen::Index>(total_));
    Eigen::Index k = 0;
    for (const auto& c : curves_)
      for (double y : c.y) out[k++] = y;
    return out;
  }

  /// Same design with responses replaced by `y` (flattened order).
  SampleSet with_responses(const Vector& y) const {
    if (static_cast<std::size_t>(y.size()) != total_)
      throw Error(ErrorCode::ShapeMismatch, "response vector length mismatch");
    std::vector<Curve> out = curves_;
    Eigen::Index k = 0;
    for (auto& c : out)
      for (double& v : c.y) v = y[k++];
    return SampleSet(std::move(out));
  }

 private:
  std::vector<Curve> curves_;
  double harmonic_m_ = 0.0;
  std::size_t total_ = 0;
};

/// Formats with 17 significant digits so values round-trip exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_sample_csv(const SampleSet& samples, std::ostream& out) {
  out << "curve_id,t,y\n";
  for (std::size_t i = 0; i < samples.n(); ++i) {
    const auto& c = samples.curves()[i];
    for (std::size_t j = 0; j < c.t.size(); ++j)
      out << i << ',' << format_double(c.t[j]) << ',' << format_double(c.y[j]) << '\n';
  }
}

inline void write_sample_csv(const SampleSet& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_sample_csv(samples, out);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  return fields;
}

inline double parse_number(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return v;
}

}  // namespace detail

/// Reads curve_id,t,y rows. Curves are ordered by ascending curve_id and
/// keep their row order within a curve.
inline SampleSet read_sample_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "empty sample file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  if (header != std::vector<std::string>{"curve_id", "t", "y"})
    throw Error(ErrorCode::Io, "expected header 'curve_id,t,y'");
  std::map<long, Curve> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3)
      throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": expected 3 fields");
    const double id = detail::parse_number(fields[0], line_no);
    if (id != std::floor(id))
      throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": curve_id not integer");
    auto& c = by_id[static_cast<long>(id)];
    c.t.push_back(detail::parse_number(fields[1], line_no));
    c.y.push_back(detail::parse_number(fields[2], line_no));
  }
  std::vector<Curve> curves;
  for (auto& [id, c] : by_id) curves.push_back(std::move(c));
  return SampleSet(std::move(curves));
}

inline SampleSet read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_sample_csv(in);
}

}  // namespace specfda
