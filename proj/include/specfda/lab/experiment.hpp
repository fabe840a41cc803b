#pragma once

// Monte Carlo cells over (n, m), log-log slope fits and the composite runs
// built from them (rate sweep, phase-transition scan, saturation pairs).
//
// Replication r of every cell uses seed config.seed + r, so cells share
// random streams. Work is spread over threads by replication; results land
// in index order, which keeps reports independent of the thread count.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "specfda/covariance.hpp"
#include "specfda/error.hpp"
#include "specfda/filters.hpp"
#include "specfda/kernels.hpp"
#include "specfda/lab/config.hpp"
#include "specfda/mean.hpp"
#include "specfda/numerics.hpp"
#include "specfda/synthetic.hpp"

namespace specfda::lab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// RATE_LAB_THREADS if set (>= 1), else the hardware concurrency.
inline std::size_t thread_count() {
  if (const char* env = std::getenv("RATE_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i < count on up to thread_count() threads. The first
/// exception by index is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(thread_count(), count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Everything a cell needs, derived once from the config.
struct Setting {
  ExperimentConfig config;
  Kernel1 kernel;
  Filter filter;
  FilterTarget target = FilterTarget::EmpiricalOperator;
  Grid1D grid;
  Grid1D grid2;
  std::shared_ptr<const ProcessSpec> spec;
  Vector true_mean;  // on grid
  Matrix true_cov;   // on grid2, covariance task only
  Matrix region;     // 0/1 mask on grid2 x grid2
};

inline Setting make_setting(const ExperimentConfig& config) {
  validate(config);
  Setting s;
  s.config = config;
  s.kernel = parse_kernel(config.kernel);
  s.filter = parse_filter(config.filter);
  s.target = parse_target(config.rule);
  s.grid = trapezoid_grid(config.grid_nodes);
  s.grid2 = trapezoid_grid(config.grid2_nodes);
  const MercerSystem mercer =
      mercer_system(s.kernel, config.mercer_truncation, trapezoid_grid(config.mercer_grid));
  const SourceMean mean = make_source_mean(mercer, config.alpha, parse_h_rule(config.h_rule));
  s.spec = std::make_shared<const ProcessSpec>(make_process(mean, mercer, parse_xi_rule(config.xi_rule),
                                                            config.kl_truncation, config.sigma0,
                                                            parse_m_scheme(config.m_scheme)));
  s.true_mean = true_mean_on_grid(*s.spec, s.grid);
  if (config.task == Task::Covariance) {
    s.true_cov = true_cov_on_grid(*s.spec, s.grid2);
    const Eigen::Index G = s.grid2.size();
    s.region = Matrix::Ones(G, G);
    if (config.error_band > 0.0)
      for (Eigen::Index i = 0; i < G; ++i)
        for (Eigen::Index j = 0; j < G; ++j)
          if (std::abs(s.grid2.nodes[i] - s.grid2.nodes[j]) > config.error_band + 1e-12)
            s.region(i, j) = 0.0;
  }
  return s;
}

/// Regularization for one replication under the config's policy. Oracle
/// schedules use (n, harmonic m) of the drawn data.
inline double mean_lambda(const Setting& s, const Filter& filter, const SampleSet& data) {
  const auto& p = s.config.lambda_policy;
  if (p.kind == LambdaPolicy::Kind::Fixed) return p.value;
  if (p.kind == LambdaPolicy::Kind::GridCV)
    return select_lambda_cv(data, s.kernel, filter, p.grid, 5, {s.target, SolveStrategy::Auto, false})
        .lambda;
  return oracle_lambda_mean(static_cast<double>(data.n()), data.harmonic_mean_m(), s.config.alpha,
                            s.config.b, qualification(filter));
}

inline double mean_error(const Setting& s, const Filter& filter, const SampleSet& data) {
  const MeanProblem problem(data, s.kernel, s.target);
  const MeanEstimate est = problem.fit(filter, mean_lambda(s, filter, data));
  return l2_norm_grid(evaluate_mean(est, s.grid) - s.true_mean, s.grid);
}

/// sqrt(sum_ij w_i w_j mask_ij d_ij^2)
inline double region_l2(const Matrix& diff, const Matrix& mask, const Grid1D& grid) {
  const Matrix sq = diff.cwiseAbs2().cwiseProduct(mask);
  return std::sqrt(grid.weights.dot(sq * grid.weights));
}

inline double cov_error(const Setting& s, const Filter& filter, const SampleSet& data) {
  const double n = static_cast<double>(data.n());
  const double m = data.harmonic_mean_m();
  Vector fitted;
  if (s.config.eta_policy.kind == EtaPolicy::Kind::TrueMean) {
    fitted = s.spec->mean.at(data.points());
  } else {
    const double eta = s.config.eta_policy.kind == EtaPolicy::Kind::Fixed
                           ? s.config.eta_policy.value
                           : oracle_lambda_mean(n, m, s.config.alpha, s.config.b, qualification(filter));
    const MeanProblem problem(data, s.kernel, s.target);
    fitted = problem.fit(filter, eta).at(data.points());
  }
  const PairDesign design = assemble_pairs(data, fitted, {s.config.include_diagonal});
  double lambda = 0.0;
  const auto& p = s.config.lambda_policy;
  if (p.kind == LambdaPolicy::Kind::Fixed)
    lambda = p.value;
  else if (p.kind == LambdaPolicy::Kind::Oracle)
    lambda = oracle_lambda_cov(n, m, s.config.alpha1, s.config.b1, qualification(filter));
  else
    throw Error(ErrorCode::BadConfig, "gridcv lambda is only available for the mean task");
  CovFitOptions opt;
  opt.target = s.target;
  opt.pair_cap = s.config.pair_cap;
  const CovEstimate est = fit_covariance(data, design, Kernel2::product(s.kernel), filter, lambda, opt);
  return region_l2(evaluate_cov(est, s.grid2) - s.true_cov, s.region, s.grid2);
}

inline double replication_error(const Setting& s, const Filter& filter, const SampleSet& data) {
  return s.config.task == Task::Mean ? mean_error(s, filter, data) : cov_error(s, filter, data);
}

struct CellResult {
  std::size_t n = 0;
  double m = 0.0;
  double nm = 0.0;
  double lambda = kNaN;  // oracle or fixed value at the target m; NaN under CV
  std::vector<double> errors;
  double median = kNaN;
  double iqr = kNaN;
  bool ok = true;
  std::string reason;  // set when ok is false
};

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void summarize(CellResult& c) {
  c.median = quantile(c.errors, 0.5);
  c.iqr = quantile(c.errors, 0.75) - quantile(c.errors, 0.25);
}

inline std::vector<std::uint64_t> replication_seeds(const ExperimentConfig& c) {
  std::vector<std::uint64_t> seeds(c.replications);
  for (std::size_t r = 0; r < seeds.size(); ++r) seeds[r] = c.seed + r;
  return seeds;
}

inline double nominal_lambda(const Setting& s, const Filter& filter, double n, double m) {
  const auto& p = s.config.lambda_policy;
  if (p.kind == LambdaPolicy::Kind::Fixed) return p.value;
  if (p.kind == LambdaPolicy::Kind::GridCV) return kNaN;
  return s.config.task == Task::Mean
             ? oracle_lambda_mean(n, m, s.config.alpha, s.config.b, qualification(filter))
             : oracle_lambda_cov(n, m, s.config.alpha1, s.config.b1, qualification(filter));
}

/// One Monte Carlo cell. An estimator error in any replication aborts the
/// cell; the reason is recorded and no summary is produced.
inline CellResult run_cell(const Setting& s, std::size_t n, double m,
                           const std::vector<std::uint64_t>& seeds, const Filter& filter) {
  CellResult c;
  c.n = n;
  c.m = m;
  c.nm = static_cast<double>(n) * m;
  c.errors.assign(seeds.size(), kNaN);
  try {
    c.lambda = nominal_lambda(s, filter, static_cast<double>(n), m);
    parallel_for(seeds.size(), [&](std::size_t r) {
      const DrawnDataset d = draw(s.spec, n, m, seeds[r]);
      c.errors[r] = replication_error(s, filter, d.samples);
    });
  } catch (const Error& e) {
    c.ok = false;
    c.reason = e.what();
    return c;
  }
  summarize(c);
  return c;
}

inline CellResult run_cell(const Setting& s, std::size_t n, double m,
                           const std::vector<std::uint64_t>& seeds) {
  return run_cell(s, n, m, seeds, s.filter);
}

struct SlopeFit {
  double slope = kNaN;
  double intercept = kNaN;
  double r2 = kNaN;
  std::size_t cells = 0;
};

/// OLS of log(err) on log(x). Needs >= 4 points, distinct x, positive
/// values. R^2 is 1 when the residual sum vanishes.
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4)
    throw Error(ErrorCode::DegenerateCells, "slope fit needs at least 4 cells, got " +
                                                std::to_string(points.size()));
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
      throw Error(ErrorCode::DegenerateCells, "slope fit needs positive finite values");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  for (std::size_t i = 0; i < lx.size(); ++i)
    for (std::size_t j = i + 1; j < lx.size(); ++j)
      if (lx[i] == lx[j]) throw Error(ErrorCode::DegenerateCells, "slope fit needs distinct x");
  const double k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  SlopeFit f;
  f.cells = lx.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ss_res += r * r;
  }
  f.r2 = ss_res == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

/// -rb/(1+2rb), r = min(alpha, nu): exponent of the nonparametric term.
inline double mean_rate_exponent(double alpha, double b, double nu) {
  const double r = std::min(alpha, nu);
  return -r * b / (1.0 + 2.0 * r * b);
}

/// -r1 b1/(1+2 alpha1 b1), r1 = min(alpha1, nu).
inline double cov_rate_exponent(double alpha1, double b1, double nu) {
  const double r1 = std::min(alpha1, nu);
  return -r1 * b1 / (1.0 + 2.0 * alpha1 * b1);
}

inline double target_exponent(const ExperimentConfig& c, const Filter& filter) {
  return c.task == Task::Mean ? mean_rate_exponent(c.alpha, c.b, qualification(filter))
                              : cov_rate_exponent(c.alpha1, c.b1, qualification(filter));
}

/// Fits over the cells that completed; nullopt plus a reason otherwise.
inline std::optional<SlopeFit> try_fit(const std::vector<CellResult>& cells, bool against_n,
                                       std::string& reason) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& c : cells)
    if (c.ok) pts.emplace_back(against_n ? static_cast<double>(c.n) : c.nm, c.median);
  try {
    return fit_slope(pts);
  } catch (const Error& e) {
    reason = e.what();
    return std::nullopt;
  }
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct RateReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::optional<SlopeFit> fit;
  std::string fit_reason;
  double target = kNaN;
  double tolerance = kNaN;
  bool monotone = false;  // median error at the largest n below that at the smallest n, per m
  bool pass = false;
  double runtime_seconds = 0.0;  // not serialized into the report itself
};

inline bool monotone_in_n(const std::vector<CellResult>& cells) {
  bool ok = true;
  std::vector<double> ms;
  for (const auto& c : cells)
    if (std::find(ms.begin(), ms.end(), c.m) == ms.end()) ms.push_back(c.m);
  for (double m : ms) {
    const CellResult* lo = nullptr;
    const CellResult* hi = nullptr;
    for (const auto& c : cells) {
      if (c.m != m || !c.ok) continue;
      if (!lo || c.n < lo->n) lo = &c;
      if (!hi || c.n > hi->n) hi = &c;
    }
    if (!lo || lo == hi || !(hi->median < lo->median)) ok = false;
  }
  return ok;
}

/// Sweeps n_list x m_list, fits log median error against log nm.
inline RateReport run_rate(const ExperimentConfig& config) {
  const Timer timer;
  const Setting s = make_setting(config);
  RateReport rep;
  rep.config = config;
  const auto seeds = replication_seeds(config);
  for (double m : config.m_list)
    for (std::size_t n : config.n_list) rep.cells.push_back(run_cell(s, n, m, seeds));
  rep.fit = try_fit(rep.cells, false, rep.fit_reason);
  rep.target = target_exponent(config, s.filter);
  rep.tolerance = config.slope_tolerance;
  rep.monotone = monotone_in_n(rep.cells);
  const bool all_ok = std::all_of(rep.cells.begin(), rep.cells.end(), [](const auto& c) { return c.ok; });
  rep.pass = all_ok && rep.fit && std::abs(rep.fit->slope - rep.target) <= rep.tolerance;
  rep.runtime_seconds = timer.seconds();
  return rep;
}

struct PhaseRow {
  double gamma = 0.0;
  std::vector<CellResult> cells;  // m = ceil(n^gamma)
  std::optional<SlopeFit> fit;    // against n
  std::string fit_reason;
  double target = kNaN;
  std::string regime;  // "parametric" above gamma*, "nonparametric" below, "boundary" at it
  bool pass = false;
};

struct PhaseReport {
  ExperimentConfig config;
  double gamma_star = kNaN;
  std::vector<PhaseRow> rows;
  std::optional<bool> crossing;  // only claimed when gammas straddle gamma*
  bool pass = false;
  double runtime_seconds = 0.0;
};

/// ceil(n^gamma), guarded against pow rounding just above an integer.
inline std::size_t m_for_gamma(std::size_t n, double gamma) {
  const double v = std::pow(static_cast<double>(n), gamma);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(v - 1e-9 * v)));
}

/// Slope of the median error against n with m = ceil(n^gamma). With
/// nm = n^{1+gamma} the two terms of the rate give exponents -1/2 and
/// (1+gamma) e, e the nonparametric exponent; the slower one is the target.
inline double phase_target(double gamma, double exponent) {
  return std::max(-0.5, (1.0 + gamma) * exponent);
}

inline PhaseReport phase_transition_scan(const ExperimentConfig& config) {
  const Timer timer;
  if (config.gamma_list.empty()) throw Error(ErrorCode::BadConfig, "phase scan needs gamma_list");
  if (config.task != Task::Mean) throw Error(ErrorCode::BadConfig, "phase scan is a mean-task run");
  if (parse_m_scheme(config.m_scheme).index() != 0)
    throw Error(ErrorCode::BadConfig, "phase scan needs the constant m scheme");
  const Setting s = make_setting(config);
  PhaseReport rep;
  rep.config = config;
  const double r = std::min(config.alpha, qualification(s.filter));
  rep.gamma_star = 1.0 / (2.0 * config.b * r);
  const double exponent = mean_rate_exponent(config.alpha, config.b, qualification(s.filter));
  const auto seeds = replication_seeds(config);
  bool all_pass = true;
  for (std::size_t gi = 0; gi < config.gamma_list.size(); ++gi) {
    PhaseRow row;
    row.gamma = config.gamma_list[gi];
    const auto& ns = config.gamma_n_lists.empty() ? config.n_list : config.gamma_n_lists[gi];
    for (std::size_t n : ns)
      row.cells.push_back(run_cell(s, n, static_cast<double>(m_for_gamma(n, row.gamma)), seeds));
    row.fit = try_fit(row.cells, true, row.fit_reason);
    row.target = phase_target(row.gamma, exponent);
    const double gap = row.gamma - rep.gamma_star;
    row.regime = std::abs(gap) < 1e-12 ? "boundary" : gap > 0 ? "parametric" : "nonparametric";
    row.pass = row.fit && std::abs(row.fit->slope - row.target) <= config.slope_tolerance;
    all_pass = all_pass && row.pass;
    rep.rows.push_back(std::move(row));
  }
  // Crossing: every row above gamma* has a slope at least as steep as every row below it.
  bool below = false, above = false;
  for (const auto& row : rep.rows) {
    below = below || row.gamma < rep.gamma_star;
    above = above || row.gamma > rep.gamma_star;
  }
  if (below && above) {
    bool cross = true;
    for (const auto& lo : rep.rows)
      for (const auto& hi : rep.rows)
        if (lo.gamma < rep.gamma_star && hi.gamma > rep.gamma_star)
          cross = cross && lo.fit && hi.fit && hi.fit->slope <= lo.fit->slope;
    rep.crossing = cross;
  }
  rep.pass = all_pass;
  rep.runtime_seconds = timer.seconds();
  return rep;
}

struct PairedCell {
  CellResult first;   // config.filter
  CellResult second;  // config.compare_filter
  std::vector<double> ratios;  // first / second per replication
  double median_ratio = kNaN;
  double fraction_at_most_one = kNaN;
};

struct SaturationReport {
  ExperimentConfig config;
  std::string first_filter, second_filter;
  double first_exponent = kNaN, second_exponent = kNaN;
  std::vector<PairedCell> cells;
  std::optional<SlopeFit> first_fit, second_fit;
  std::string fit_reason;
  double largest_cell_fraction = kNaN;
  bool pass = false;
  double runtime_seconds = 0.0;
};

/// Paired runs: each replication draws one dataset and fits it with both
/// filters, each at the oracle lambda of its own qualification.
inline SaturationReport saturation_compare(const ExperimentConfig& config) {
  const Timer timer;
  const Setting s = make_setting(config);
  const Filter second = parse_filter(config.compare_filter);
  SaturationReport rep;
  rep.config = config;
  rep.first_filter = config.filter;
  rep.second_filter = config.compare_filter;
  rep.first_exponent = target_exponent(config, s.filter);
  rep.second_exponent = target_exponent(config, second);
  const auto seeds = replication_seeds(config);
  for (double m : config.m_list)
    for (std::size_t n : config.n_list) {
      PairedCell pc;
      for (CellResult* c : {&pc.first, &pc.second}) {
        c->n = n;
        c->m = m;
        c->nm = static_cast<double>(n) * m;
        c->errors.assign(seeds.size(), kNaN);
      }
      try {
        pc.first.lambda = nominal_lambda(s, s.filter, static_cast<double>(n), m);
        pc.second.lambda = nominal_lambda(s, second, static_cast<double>(n), m);
        parallel_for(seeds.size(), [&](std::size_t r) {
          const DrawnDataset d = draw(s.spec, n, m, seeds[r]);
          pc.first.errors[r] = replication_error(s, s.filter, d.samples);
          pc.second.errors[r] = replication_error(s, second, d.samples);
        });
        summarize(pc.first);
        summarize(pc.second);
        std::size_t at_most_one = 0;
        for (std::size_t r = 0; r < seeds.size(); ++r) {
          pc.ratios.push_back(pc.first.errors[r] / pc.second.errors[r]);
          if (pc.first.errors[r] <= pc.second.errors[r]) ++at_most_one;
        }
        pc.median_ratio = quantile(pc.ratios, 0.5);
        pc.fraction_at_most_one = static_cast<double>(at_most_one) / static_cast<double>(seeds.size());
      } catch (const Error& e) {
        pc.first.ok = pc.second.ok = false;
        pc.first.reason = pc.second.reason = e.what();
      }
      rep.cells.push_back(std::move(pc));
    }
  std::vector<CellResult> a, b;
  for (const auto& pc : rep.cells) {
    a.push_back(pc.first);
    b.push_back(pc.second);
  }
  rep.first_fit = try_fit(a, false, rep.fit_reason);
  rep.second_fit = try_fit(b, false, rep.fit_reason);
  const PairedCell* largest = nullptr;
  for (const auto& pc : rep.cells)
    if (!largest || pc.first.nm > largest->first.nm) largest = &pc;
  if (largest) rep.largest_cell_fraction = largest->fraction_at_most_one;
  rep.pass = rep.first_fit && rep.second_fit && largest && largest->first.ok &&
             largest->fraction_at_most_one >= config.saturation_fraction &&
             rep.first_fit->slope <= rep.second_fit->slope + config.slope_margin;
  rep.runtime_seconds = timer.seconds();
  return rep;
}

}  // namespace specfda::lab
