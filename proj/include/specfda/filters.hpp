#pragma once

// Spectral regularization families g_lambda, their residuals
// r_lambda(s) = 1 - s g_lambda(s), qualification, and a grid verifier for
// the family conditions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "specfda/constants.hpp"
#include "specfda/error.hpp"

namespace specfda {

enum class FilterFamily { Tikhonov, SpectralCutoff, Showalter, Landweber };

struct Filter {
  FilterFamily family = FilterFamily::Tikhonov;

  friend bool operator==(const Filter&, const Filter&) = default;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline std::string_view filter_name(FilterFamily family) {
  switch (family) {
    case FilterFamily::Tikhonov: return "tikhonov";
    case FilterFamily::SpectralCutoff: return "cutoff";
    case FilterFamily::Showalter: return "showalter";
    case FilterFamily::Landweber: return "landweber";
  }
  return "?";
}

inline Filter parse_filter(std::string_view name) {
  for (auto f : {FilterFamily::Tikhonov, FilterFamily::SpectralCutoff, FilterFamily::Showalter,
                 FilterFamily::Landweber})
    if (name == filter_name(f)) return Filter{f};
  throw Error(ErrorCode::BadConfig, "unknown filter '" + std::string(name) +
                                        "' (expected tikhonov|cutoff|showalter|landweber)");
}

/// 1 for Tikhonov, infinity for the other families.
inline double qualification(const Filter& filter) {
  return filter.family == FilterFamily::Tikhonov ? 1.0 : kInfinity;
}

/// Landweber runs t = max(1, round(1/lambda)) steps.
inline long landweber_steps(double lambda) {
  return std::max(1L, static_cast<long>(std::llround(1.0 / lambda)));
}

/// The regularization level the family actually realizes: 1/t for
/// Landweber, lambda otherwise.
inline double effective_lambda(const Filter& filter, double lambda) {
  if (filter.family == FilterFamily::Landweber)
    return 1.0 / static_cast<double>(landweber_steps(lambda));
  return lambda;
}

namespace detail {

inline void check_filter_args(const Filter& filter, double lambda, double sigma,
                              double spectral_bound) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorCode::BadLambda, "lambda must be positive and finite");
  const double upper = spectral_bound * (1.0 + tol::kSpectralSlack);
  if (!(sigma >= 0.0) || sigma > upper)
    throw Error(ErrorCode::OutOfSpectralRange,
                "sigma " + std::to_string(sigma) + " outside [0, " +
                    std::to_string(spectral_bound) + "]");
  // Unit-step Landweber only contracts on [0,1].
  if (filter.family == FilterFamily::Landweber && sigma > 1.0 + tol::kSpectralSlack)
    throw Error(ErrorCode::OutOfSpectralRange,
                "Landweber needs spectrum in [0,1], got sigma " + std::to_string(sigma));
}

// (1 - sigma)^t without cancellation near sigma = 0.
inline double landweber_power(double sigma, long steps) {
  if (sigma >= 1.0) return sigma == 1.0 ? 0.0 : std::pow(1.0 - sigma, static_cast<double>(steps));
  return std::exp(static_cast<double>(steps) * std::log1p(-sigma));
}

}  // namespace detail

/// g_lambda(sigma) for sigma in [0, spectral_bound].
inline double g(const Filter& filter, double lambda, double sigma, double spectral_bound = 1.0) {
  detail::check_filter_args(filter, lambda, sigma, spectral_bound);
  switch (filter.family) {
    case FilterFamily::Tikhonov:
      return 1.0 / (sigma + lambda);
    case FilterFamily::SpectralCutoff:
      return sigma >= lambda ? 1.0 / sigma : 0.0;
    case FilterFamily::Showalter:
      if (sigma == 0.0) return 1.0 / lambda;
      return -std::expm1(-sigma / lambda) / sigma;
    case FilterFamily::Landweber: {
      const long t = landweber_steps(lambda);
      if (sigma == 0.0) return static_cast<double>(t);
      if (sigma < 1.0)
        return -std::expm1(static_cast<double>(t) * std::log1p(-sigma)) / sigma;
      return (1.0 - detail::landweber_power(sigma, t)) / sigma;
    }
  }
  return 0.0;
}

/// r_lambda(sigma) = 1 - sigma g_lambda(sigma), evaluated in closed form.
inline double residual(const Filter& filter, double lambda, double sigma,
                       double spectral_bound = 1.0) {
  detail::check_filter_args(filter, lambda, sigma, spectral_bound);
  switch (filter.family) {
    case FilterFamily::Tikhonov:
      return lambda / (sigma + lambda);
    case FilterFamily::SpectralCutoff:
      return sigma >= lambda ? 0.0 : 1.0;
    case FilterFamily::Showalter:
      return std::exp(-sigma / lambda);
    case FilterFamily::Landweber:
      return detail::landweber_power(sigma, landweber_steps(lambda));
  }
  return 0.0;
}

/// Declared omega_p with sup_sigma |r| sigma^p <= omega_p lambda^p. Infinite
/// when p exceeds the qualification.
inline double declared_omega(const Filter& filter, double p) {
  switch (filter.family) {
    case FilterFamily::Tikhonov:
      return p <= 1.0 ? 1.0 : kInfinity;
    case FilterFamily::SpectralCutoff:
      return 1.0;
    case FilterFamily::Showalter:
    case FilterFamily::Landweber:
      // sup e^{-s/lambda} s^p = (p/e)^p lambda^p; (1-s)^t <= e^{-st}.
      return std::max(1.0, std::pow(p / std::numbers::e, p));
  }
  return kInfinity;
}

/// sup over sigma_grid of |r_lambda(sigma)| sigma^p / lambda_eff^p.
inline double qualification_envelope(const Filter& filter, double lambda, double p,
                                     const std::vector<double>& sigma_grid) {
  const double lam = effective_lambda(filter, lambda);
  double worst = 0.0;
  for (double s : sigma_grid)
    worst = std::max(worst, std::abs(residual(filter, lambda, s)) * std::pow(s / lam, p));
  return worst;
}

struct QualificationCheck {
  double p = 0.0;
  double observed = 0.0;  // max |r| sigma^p / lambda^p over the grids
  double declared = 0.0;  // omega_p, infinite past the qualification
  bool pass = false;
};

struct FilterReport {
  Filter filter;
  std::vector<double> lambda_grid;
  std::vector<double> sigma_grid;
  double a1 = 0.0;  // max sigma g
  double a2 = 0.0;  // max lambda g
  double a3 = 0.0;  // max |r|
  double min_sigma_g = 0.0;
  bool a1_pass = false;
  bool a2_pass = false;
  bool a3_pass = false;
  std::vector<QualificationCheck> qualification;

  bool pass() const {
    bool ok = a1_pass && a2_pass && a3_pass;
    for (const auto& q : qualification) ok = ok && q.pass;
    return ok;
  }
};

/// Log-spaced grid from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.back() = hi;
  return out;
}

/// Empirical constants of the four family conditions over a (sigma, lambda)
/// grid; lambda-normalized quantities use effective_lambda.
inline FilterReport verify_family(const Filter& filter, const std::vector<double>& lambda_grid,
                                  const std::vector<double>& sigma_grid,
                                  const std::vector<double>& p_list) {
  FilterReport rep;
  rep.filter = filter;
  rep.lambda_grid = lambda_grid;
  rep.sigma_grid = sigma_grid;
  rep.min_sigma_g = kInfinity;
  for (double p : p_list) rep.qualification.push_back({p, 0.0, declared_omega(filter, p), false});
  for (double lambda : lambda_grid) {
    const double lam = effective_lambda(filter, lambda);
    for (double s : sigma_grid) {
      const double gv = g(filter, lambda, s);
      const double r = residual(filter, lambda, s);
      rep.a1 = std::max(rep.a1, s * gv);
      rep.min_sigma_g = std::min(rep.min_sigma_g, s * gv);
      rep.a2 = std::max(rep.a2, lam * gv);
      rep.a3 = std::max(rep.a3, std::abs(r));
      for (auto& q : rep.qualification)
        q.observed = std::max(q.observed, std::abs(r) * std::pow(s / lam, q.p));
    }
  }
  const double bound = 1.0 + tol::kFilterSlack;
  rep.a1_pass = rep.a1 <= bound && rep.min_sigma_g >= 0.0;
  rep.a2_pass = rep.a2 <= bound;
  rep.a3_pass = rep.a3 <= bound;
  for (auto& q : rep.qualification) q.pass = q.observed <= q.declared + tol::kFilterSlack;
  return rep;
}

}  // namespace specfda
