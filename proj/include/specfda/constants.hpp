#pragma once

#include <cstddef>

// Central table of numerical tolerances and defaults. All tolerances are
// absolute unless the name says otherwise.
namespace specfda::tol {

inline constexpr double kSymmetry = 1e-10;        // max |A - A^T| accepted by sym_eigen
inline constexpr double kPsdRelative = 1e-10;     // eigenvalues >= -kPsdRelative * trace
inline constexpr double kFilterSlack = 1e-9;      // slack on declared filter constants
inline constexpr double kSpectralSlack = 1e-12;   // relative slack on sigma <= a
inline constexpr double kMercerPositive = 1e-12;  // Nystrom keeps lambda_i > this * lambda_1

}  // namespace specfda::tol

namespace specfda::defaults {

inline constexpr std::size_t kNystromGrid = 512;
inline constexpr std::size_t kMercerTruncation = 200;
inline constexpr std::size_t kKlTruncation = 100;
inline constexpr std::size_t kPairCap = 6000;
inline constexpr std::size_t kNormGrid1 = 513;
inline constexpr std::size_t kNormGrid2 = 129;
inline constexpr std::size_t kReplications = 50;
inline constexpr double kSlopeTolerance = 0.15;
inline constexpr double kCovSlopeTolerance = 0.20;

}  // namespace specfda::defaults
