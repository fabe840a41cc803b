#pragma once

// Applies a spectral filter to a weighted kernel system
//
//   coefficients = rule(gram, weights, rhs; g_lambda)
//
// shared by the mean and covariance estimators. Two coefficient rules exist:
//
//   EmpiricalOperator:  c = W^{1/2} g(W^{1/2} K W^{1/2}) W^{1/2} y  (= g(WK) W y)
//     the coordinate form of g_lambda applied to the empirical operator
//     sum_p w_p k(x_p,.) (x) k(x_p,.); it agrees with the L2 operator form.
//
//   GramWeightGram:     c = g(K W K) K W y
//     the filter applied to K W K, a different estimator for lambda > 0.

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "specfda/error.hpp"
#include "specfda/filters.hpp"
#include "specfda/kernels.hpp"
#include "specfda/numerics.hpp"

namespace specfda {

enum class FilterTarget { EmpiricalOperator, GramWeightGram };

inline std::string_view target_name(FilterTarget t) {
  return t == FilterTarget::EmpiricalOperator ? "empirical-operator" : "gram-weight-gram";
}

inline FilterTarget parse_target(std::string_view name) {
  if (name == "empirical-operator") return FilterTarget::EmpiricalOperator;
  if (name == "gram-weight-gram") return FilterTarget::GramWeightGram;
  throw Error(ErrorCode::BadConfig, "unknown coefficient rule '" + std::string(name) + "'");
}

/// How g_lambda is applied. Auto uses a Cholesky solve for Tikhonov, the
/// eigenpairs above lambda for the spectral cut-off, and a full
/// eigendecomposition otherwise; all three give the same coefficients.
enum class SolveStrategy { Auto, FullSpectrum };

struct SpectrumSummary {
  Vector spectrum;  // descending, clamped at 0
  double effective_dimension = 0.0;
};

/// A symmetric weighted kernel system ready for filtering.
class FilteredSystem {
 public:
  FilteredSystem(Matrix gram, Vector weights, Vector rhs, FilterTarget target)
      : gram_(std::move(gram)), weights_(std::move(weights)), rhs_(std::move(rhs)),
        target_(target) {
    if (gram_.rows() != gram_.cols() || weights_.size() != gram_.rows() ||
        rhs_.size() != gram_.rows())
      throw Error(ErrorCode::ShapeMismatch, "gram, weights and rhs sizes disagree");
    if ((weights_.array() <= 0.0).any())
      throw Error(ErrorCode::BadSize, "weights must be positive");
    sqrt_w_ = weights_.cwiseSqrt();
    if (target_ == FilterTarget::EmpiricalOperator) {
      operator_ = sqrt_w_.asDiagonal() * gram_ * sqrt_w_.asDiagonal();
      filtered_rhs_ = sqrt_w_.cwiseProduct(rhs_);
    } else {
      operator_ = gram_ * weights_.asDiagonal() * gram_;
      filtered_rhs_ = gram_ * weights_.cwiseProduct(rhs_);
    }
    operator_ = 0.5 * (operator_ + operator_.transpose()).eval();
  }

  FilterTarget target() const { return target_; }
  const Matrix& gram() const { return gram_; }
  const Vector& weights() const { return weights_; }
  const Vector& rhs() const { return rhs_; }

  /// The symmetric matrix the filter acts on.
  const Matrix& filtered_operator() const { return operator_; }

  /// Computes and caches the full clamped spectrum; later solves reuse it.
  const SymEigen& decompose() {
    if (!eig_) {
      SymEigen e = sym_eigen(operator_);
      clamp_psd(e, operator_.trace());
      eig_ = std::move(e);
    }
    return *eig_;
  }

  bool has_spectrum() const { return eig_.has_value(); }

  SpectrumSummary summary(double lambda) const {
    if (!eig_) throw Error(ErrorCode::BadConfig, "spectrum not computed");
    return {eig_->eigenvalues, effective_dimension_of(eig_->eigenvalues, lambda)};
  }

  /// Filtered coefficients for (filter, lambda).
  Vector solve(const Filter& filter, double lambda,
               SolveStrategy strategy = SolveStrategy::Auto) const {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw Error(ErrorCode::BadLambda, "lambda must be positive and finite");
    Vector inner;
    if (eig_) {
      inner = apply_filter(*eig_, filter, lambda);
    } else if (strategy == SolveStrategy::Auto && filter.family == FilterFamily::Tikhonov) {
      inner = spd_shift_solve(operator_, lambda, filtered_rhs_);
    } else if (strategy == SolveStrategy::Auto &&
               filter.family == FilterFamily::SpectralCutoff) {
      // g vanishes below lambda; only the eigenpairs above it contribute.
      const SymEigen top = sym_eigen_above(operator_, std::nextafter(lambda, 0.0));
      inner = apply_filter(top, filter, lambda);
    } else {
      SymEigen e = sym_eigen(operator_);
      clamp_psd(e, operator_.trace());
      inner = apply_filter(e, filter, lambda);
    }
    if (target_ == FilterTarget::EmpiricalOperator) return sqrt_w_.cwiseProduct(inner);
    return inner;
  }

 private:
  static double effective_dimension_of(const Vector& spectrum, double lambda) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
      total += spectrum[i] / (spectrum[i] + lambda);
    return total;
  }

  Vector apply_filter(const SymEigen& e, const Filter& filter, double lambda) const {
    const double bound = e.size() > 0 ? std::max(e.eigenvalues.maxCoeff(), 0.0) : 0.0;
    return apply_matrix_function(
        e, [&](double s) { return g(filter, lambda, std::max(s, 0.0), std::max(bound, s)); },
        filtered_rhs_);
  }

  Matrix gram_;
  Vector weights_;
  Vector rhs_;
  FilterTarget target_;
  Vector sqrt_w_;
  Matrix operator_;
  Vector filtered_rhs_;
  std::optional<SymEigen> eig_;
};

}  // namespace specfda
