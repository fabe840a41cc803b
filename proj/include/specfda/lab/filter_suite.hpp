#pragma once

// The filter-family check run by `rate_lab verify-filters`: the four
// family conditions for every shipped filter, plus the Tikhonov
// qualification witness (p = 1 bounded, p = 2 unbounded as lambda -> 0).

#include <algorithm>
#include <vector>

#include "specfda/filters.hpp"

namespace specfda::lab {

struct FilterSuite {
  std::vector<FilterReport> reports;
  double tikhonov_p1_envelope = 0.0;  // max over the lambda grid
  double tikhonov_p2_envelope = 0.0;  // at witness_lambda
  double witness_lambda = 1e-3;
  bool witness_pass = false;

  bool pass() const {
    return witness_pass &&
           std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass(); });
  }
};

inline FilterSuite run_filter_suite(std::size_t sigma_points = 200, std::size_t lambda_points = 25) {
  const auto sigmas = log_grid(1e-6, 1.0, sigma_points);
  const auto lambdas = log_grid(1e-6, 1.0, lambda_points);
  FilterSuite s;
  for (auto f : {FilterFamily::Tikhonov, FilterFamily::SpectralCutoff, FilterFamily::Showalter,
                 FilterFamily::Landweber})
    s.reports.push_back(verify_family(Filter{f}, lambdas, sigmas, {0.5, 1.0, 2.0, 5.0}));
  const Filter tik{FilterFamily::Tikhonov};
  for (double lambda : lambdas)
    s.tikhonov_p1_envelope =
        std::max(s.tikhonov_p1_envelope, qualification_envelope(tik, lambda, 1.0, sigmas));
  s.tikhonov_p2_envelope = qualification_envelope(tik, s.witness_lambda, 2.0, sigmas);
  s.witness_pass = s.tikhonov_p1_envelope <= 1.0 + tol::kFilterSlack && s.tikhonov_p2_envelope > 10.0;
  return s;
}

}  // namespace specfda::lab
