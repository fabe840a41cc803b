#pragma once

// Experiment configuration: a flat key=value file. Blank lines and lines
// starting with '#' are ignored; unknown or repeated keys are errors.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "specfda/constants.hpp"
#include "specfda/error.hpp"
#include "specfda/filtered_system.hpp"
#include "specfda/filters.hpp"
#include "specfda/kernels.hpp"
#include "specfda/synthetic.hpp"

namespace specfda::lab {

enum class Task { Mean, Covariance };

struct LambdaPolicy {
  enum class Kind { Oracle, Fixed, GridCV };
  Kind kind = Kind::Oracle;
  double value = 0.0;
  std::vector<double> grid;
};

struct EtaPolicy {
  enum class Kind { Oracle, Fixed, TrueMean };
  Kind kind = Kind::Oracle;
  double value = 0.0;
};

struct ExperimentConfig {
  Task task = Task::Mean;
  std::string kernel = "brownian";
  std::string filter = "cutoff";
  std::string compare_filter = "tikhonov";  // second arm of saturation runs
  std::string rule = "empirical-operator";
  double alpha = 0.5;
  double b = 2.0;
  double alpha1 = 0.5;
  double b1 = 2.0;
  std::string h_rule = "unit";
  std::string xi_rule = "polynomial:2";
  double sigma0 = 0.5;
  std::vector<std::size_t> n_list{25, 50, 100, 200, 400};
  std::vector<double> m_list{5.0};
  std::string m_scheme = "constant";
  std::size_t replications = defaults::kReplications;
  std::uint64_t seed = 1;
  LambdaPolicy lambda_policy;
  EtaPolicy eta_policy;
  std::size_t grid_nodes = defaults::kNormGrid1;
  std::size_t grid2_nodes = defaults::kNormGrid2;
  std::size_t mercer_grid = defaults::kNystromGrid;
  std::size_t mercer_truncation = defaults::kMercerTruncation;
  std::size_t kl_truncation = defaults::kKlTruncation;
  double slope_tolerance = defaults::kSlopeTolerance;
  std::size_t pair_cap = defaults::kPairCap;
  bool include_diagonal = false;
  double error_band = 0.0;  // > 0 restricts covariance error to |s - t| <= band
  std::vector<double> gamma_list;
  std::vector<std::vector<std::size_t>> gamma_n_lists;
  double saturation_fraction = 0.7;
  double slope_margin = 0.02;

  /// Key-value pairs in file order, as read; echoed into reports.
  std::vector<std::pair<std::string, std::string>> source;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw Error(ErrorCode::BadConfig, key + ": '" + text + "' is not a finite number");
  return v;
}

inline std::size_t to_size(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v < 0.0 || v != std::floor(v) || v > 1e15)
    throw Error(ErrorCode::BadConfig, key + ": '" + text + "' is not a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorCode::BadConfig, key + ": expected true or false");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& text, char sep = ',') {
  std::vector<double> out;
  for (const auto& part : split(text, sep)) out.push_back(to_double(key, part));
  if (out.empty()) throw Error(ErrorCode::BadConfig, key + ": empty list");
  return out;
}

inline std::vector<std::size_t> to_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split(text, ',')) out.push_back(to_size(key, part));
  if (out.empty()) throw Error(ErrorCode::BadConfig, key + ": empty list");
  return out;
}

// "name" or "name:arg:arg"
inline std::pair<std::string, std::vector<std::string>> head_args(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.empty()) return {"", {}};
  std::string head = parts.front();
  parts.erase(parts.begin());
  return {head, parts};
}

}  // namespace detail

inline Kernel1 parse_kernel(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  if (head == "brownian" && args.empty()) return Kernel1{BrownianMin{}};
  if (head == "gaussian" && args.size() == 1)
    return Kernel1{Gaussian{detail::to_double("kernel", args[0])}};
  if (head == "matern" && args.size() == 2)
    return Kernel1{Matern{detail::to_double("kernel", args[0]), detail::to_double("kernel", args[1])}};
  throw Error(ErrorCode::BadConfig, "kernel: '" + text +
                                        "' (expected brownian | gaussian:<bw> | matern:<nu>:<ls>)");
}

inline HRule parse_h_rule(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  if (head == "unit" && args.empty()) return FixedUnit{};
  if (head == "zero" && args.empty()) return ExplicitH{{}};
  if (head == "polynomial" && args.size() == 1)
    return PolynomialH{detail::to_double("h_rule", args[0])};
  if (head == "explicit" && args.size() == 1)
    return ExplicitH{detail::to_doubles("h_rule", args[0], ';')};
  throw Error(ErrorCode::BadConfig, "h_rule: '" + text +
                                        "' (expected unit | zero | polynomial:<s> | explicit:<v;v;..>)");
}

inline XiRule parse_xi_rule(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  if (head == "none" && args.empty()) return FiniteXi{{}};
  if (head == "polynomial" && (args.size() == 1 || args.size() == 2))
    return PolynomialXi{detail::to_double("xi_rule", args[0]),
                        args.size() == 2 ? detail::to_double("xi_rule", args[1]) : 1.0};
  if (head == "finite" && args.size() == 1)
    return FiniteXi{detail::to_doubles("xi_rule", args[0], ';')};
  throw Error(ErrorCode::BadConfig, "xi_rule: '" + text +
                                        "' (expected none | polynomial:<q>[:<scale>] | finite:<v;v;..>)");
}

inline MScheme parse_m_scheme(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  if (head == "constant" && args.empty()) return ConstantM{};
  if (head == "twopoint" && args.size() == 3)
    return TwoPointM{detail::to_size("m_scheme", args[0]), detail::to_size("m_scheme", args[1]),
                     detail::to_double("m_scheme", args[2])};
  throw Error(ErrorCode::BadConfig,
              "m_scheme: '" + text + "' (expected constant | twopoint:<lo>:<hi>:<fraction>)");
}

inline LambdaPolicy parse_lambda_policy(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  LambdaPolicy p;
  if (head == "oracle" && args.empty()) return p;
  if (head == "fixed" && args.size() == 1) {
    p.kind = LambdaPolicy::Kind::Fixed;
    p.value = detail::to_double("lambda_policy", args[0]);
    if (!(p.value > 0.0)) throw Error(ErrorCode::BadConfig, "lambda_policy: fixed value must be positive");
    return p;
  }
  if (head == "gridcv" && args.size() == 1) {
    p.kind = LambdaPolicy::Kind::GridCV;
    p.grid = detail::to_doubles("lambda_policy", args[0], ';');
    for (double v : p.grid)
      if (!(v > 0.0)) throw Error(ErrorCode::BadConfig, "lambda_policy: grid values must be positive");
    return p;
  }
  throw Error(ErrorCode::BadConfig,
              "lambda_policy: '" + text + "' (expected oracle | fixed:<v> | gridcv:<v;v;..>)");
}

inline EtaPolicy parse_eta_policy(const std::string& text) {
  const auto [head, args] = detail::head_args(text);
  EtaPolicy p;
  if (head == "oracle" && args.empty()) return p;
  if (head == "true-mean" && args.empty()) {
    p.kind = EtaPolicy::Kind::TrueMean;
    return p;
  }
  if (head == "fixed" && args.size() == 1) {
    p.kind = EtaPolicy::Kind::Fixed;
    p.value = detail::to_double("eta_policy", args[0]);
    if (!(p.value > 0.0)) throw Error(ErrorCode::BadConfig, "eta_policy: fixed value must be positive");
    return p;
  }
  throw Error(ErrorCode::BadConfig,
              "eta_policy: '" + text + "' (expected oracle | fixed:<v> | true-mean)");
}

/// Checks cross-field constraints; throws BadConfig.
inline void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  parse_kernel(c.kernel);
  parse_filter(c.filter);
  parse_filter(c.compare_filter);
  parse_target(c.rule);
  parse_h_rule(c.h_rule);
  parse_xi_rule(c.xi_rule);
  parse_m_scheme(c.m_scheme);
  if (!(c.alpha > 0.0) || !(c.alpha1 > 0.0)) fail("alpha and alpha1 must be positive");
  if (!(c.b > 1.0) || !(c.b1 > 1.0)) fail("b and b1 must exceed 1");
  if (!(c.sigma0 >= 0.0)) fail("sigma0 must be nonnegative");
  if (c.replications < 1) fail("replications must be at least 1");
  if (c.n_list.empty() || c.m_list.empty()) fail("n_list and m_list must be nonempty");
  for (auto n : c.n_list)
    if (n < 2) fail("every n must be at least 2");
  for (double m : c.m_list)
    if (!(m >= 1.0)) fail("every m must be at least 1");
  if (c.task == Task::Covariance)
    for (double m : c.m_list)
      if (!(m >= 2.0)) fail("covariance cells need m >= 2");
  if (c.grid_nodes < 2 || c.grid2_nodes < 2) fail("norm grids need at least 2 nodes");
  if (c.mercer_truncation < 1 || c.mercer_truncation > c.mercer_grid)
    fail("mercer_truncation must be in [1, mercer_grid]");
  if (c.kl_truncation > c.mercer_truncation) fail("kl_truncation exceeds mercer_truncation");
  if (!(c.slope_tolerance > 0.0)) fail("slope_tolerance must be positive");
  if (!(c.error_band >= 0.0)) fail("error_band must be nonnegative");
  if (!c.gamma_n_lists.empty() && c.gamma_n_lists.size() != c.gamma_list.size())
    fail("gamma_n_lists needs one n list per gamma");
  for (double gma : c.gamma_list)
    if (!(gma > 0.0)) fail("gamma values must be positive");
  if (!(c.saturation_fraction >= 0.0 && c.saturation_fraction <= 1.0))
    fail("saturation_fraction must be in [0,1]");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
      line.erase(0, 3);
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (seen.count(key))
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    seen[key] = line_no;
    using namespace detail;
    if (key == "task") {
      if (value == "mean") c.task = Task::Mean;
      else if (value == "covariance") c.task = Task::Covariance;
      else throw Error(ErrorCode::BadConfig, "task: expected mean or covariance");
    } else if (key == "kernel") c.kernel = value;
    else if (key == "filter") c.filter = value;
    else if (key == "compare_filter") c.compare_filter = value;
    else if (key == "rule") c.rule = value;
    else if (key == "alpha") c.alpha = to_double(key, value);
    else if (key == "b") c.b = to_double(key, value);
    else if (key == "alpha1") c.alpha1 = to_double(key, value);
    else if (key == "b1") c.b1 = to_double(key, value);
    else if (key == "h_rule") c.h_rule = value;
    else if (key == "xi_rule") c.xi_rule = value;
    else if (key == "sigma0") c.sigma0 = to_double(key, value);
    else if (key == "n_list") c.n_list = to_sizes(key, value);
    else if (key == "m_list") c.m_list = to_doubles(key, value);
    else if (key == "m_scheme") c.m_scheme = value;
    else if (key == "replications") c.replications = to_size(key, value);
    else if (key == "seed") c.seed = to_size(key, value);
    else if (key == "lambda_policy") c.lambda_policy = parse_lambda_policy(value);
    else if (key == "eta_policy") c.eta_policy = parse_eta_policy(value);
    else if (key == "grid_nodes") c.grid_nodes = to_size(key, value);
    else if (key == "grid2_nodes") c.grid2_nodes = to_size(key, value);
    else if (key == "mercer_grid") c.mercer_grid = to_size(key, value);
    else if (key == "mercer_truncation") c.mercer_truncation = to_size(key, value);
    else if (key == "kl_truncation") c.kl_truncation = to_size(key, value);
    else if (key == "slope_tolerance") c.slope_tolerance = to_double(key, value);
    else if (key == "pair_cap") c.pair_cap = to_size(key, value);
    else if (key == "include_diagonal") c.include_diagonal = to_bool(key, value);
    else if (key == "error_band") c.error_band = to_double(key, value);
    else if (key == "gamma_list") c.gamma_list = to_doubles(key, value);
    else if (key == "gamma_n_lists") {
      c.gamma_n_lists.clear();
      for (const auto& group : split(value, ';')) c.gamma_n_lists.push_back(to_sizes(key, group));
    } else if (key == "saturation_fraction") c.saturation_fraction = to_double(key, value);
    else if (key == "slope_margin") c.slope_margin = to_double(key, value);
    else throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    c.source.emplace_back(key, value);
  }
  // Covariance rates carry a log factor; their default tolerance is wider.
  if (c.task == Task::Covariance && !seen.count("slope_tolerance"))
    c.slope_tolerance = defaults::kCovSlopeTolerance;
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  return parse_config(in);
}

}  // namespace specfda::lab
