#pragma once

// Spectrally regularized mean estimation from sparse curves.
//
// The estimate lives in the span of kernel sections at the observed points,
// mu(t) = sum_ij alpha_ij k(t_ij, t); the coefficients come from filtering
// the weighted Gram system with W = diag(1/(n m_i)).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "specfda/error.hpp"
#include "specfda/filtered_system.hpp"
#include "specfda/filters.hpp"
#include "specfda/kernels.hpp"
#include "specfda/numerics.hpp"
#include "specfda/sample_set.hpp"

namespace specfda {

/// Diagonal of W: 1/(n m_i) repeated m_i times per curve. Sums to 1.
inline Vector assemble_weight(const SampleSet& samples) {
  Vector w(static_cast<Eigen::Index>(samples.total_points()));
  const double n = static_cast<double>(samples.n());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < samples.n(); ++i) {
    const double wi = 1.0 / (n * static_cast<double>(samples.m(i)));
    for (std::size_t j = 0; j < samples.m(i); ++j) w[k++] = wi;
  }
  return w;
}

struct MeanEstimate {
  Vector anchors;
  Vector alpha;
  Kernel1 kernel;
  double lambda = 0.0;
  Filter filter;
  FilterTarget target = FilterTarget::EmpiricalOperator;

  /// mu_hat at arbitrary points of [0,1].
  Vector at(const Vector& points) const { return cross_gram(kernel, points, anchors) * alpha; }
};

struct MeanFitDiagnostics {
  Vector spectrum;  // of the filtered operator, descending
  double effective_dimension = 0.0;
  double weighted_sse = 0.0;  // sum_ij w_ij (Y_ij - mu_hat(t_ij))^2
};

struct MeanFit {
  MeanEstimate estimate;
  std::optional<MeanFitDiagnostics> diagnostics;
};

struct MeanFitOptions {
  FilterTarget target = FilterTarget::EmpiricalOperator;
  SolveStrategy strategy = SolveStrategy::Auto;
  bool diagnostics = true;
};

/// Gram system of one sample set; reusable across filters and lambdas.
class MeanProblem {
 public:
  MeanProblem(const SampleSet& samples, Kernel1 kernel,
              FilterTarget target = FilterTarget::EmpiricalOperator)
      : kernel_(std::move(kernel)),
        anchors_(samples.points()),
        system_(gram_matrix(kernel_, anchors_), assemble_weight(samples), samples.responses(),
                target) {}

  const FilteredSystem& system() const { return system_; }
  const Vector& anchors() const { return anchors_; }
  const Kernel1& kernel() const { return kernel_; }

  /// Caches the full spectrum so subsequent fits share one eigensolve.
  void decompose() { system_.decompose(); }

  MeanEstimate fit(const Filter& filter, double lambda,
                   SolveStrategy strategy = SolveStrategy::Auto) const {
    MeanEstimate est;
    est.anchors = anchors_;
    est.alpha = system_.solve(filter, lambda, strategy);
    est.kernel = kernel_;
    est.lambda = lambda;
    est.filter = filter;
    est.target = system_.target();
    return est;
  }

  MeanFitDiagnostics diagnostics(const MeanEstimate& est) const {
    MeanFitDiagnostics d;
    const auto s = system_.summary(est.lambda);
    d.spectrum = s.spectrum;
    d.effective_dimension = s.effective_dimension;
    const Vector resid = system_.rhs() - system_.gram() * est.alpha;
    d.weighted_sse = system_.weights().dot(resid.cwiseAbs2());
    return d;
  }

 private:
  Kernel1 kernel_;
  Vector anchors_;
  FilteredSystem system_;
};

inline MeanFit fit_mean(const SampleSet& samples, const Kernel1& kernel, const Filter& filter,
                        double lambda, const MeanFitOptions& options = {}) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::BadLambda, "lambda must be positive");
  MeanProblem problem(samples, kernel, options.target);
  if (options.diagnostics) problem.decompose();
  MeanFit out{problem.fit(filter, lambda, options.strategy), std::nullopt};
  if (options.diagnostics) out.diagnostics = problem.diagnostics(out.estimate);
  return out;
}

inline Vector evaluate_mean(const MeanEstimate& est, const Grid1D& grid) {
  return est.at(grid.nodes);
}

/// (mn)^{-b/(1+2rb)} with r = min(smoothness, qualification).
inline double oracle_lambda_mean(double n, double m, double smoothness, double b,
                                 double qualification_nu) {
  if (!(b > 1.0)) throw Error(ErrorCode::BadExponent, "eigen-decay exponent b must exceed 1");
  if (!(n >= 1.0 && m >= 1.0)) throw Error(ErrorCode::BadSize, "n and m must be at least 1");
  if (!(smoothness > 0.0)) throw Error(ErrorCode::BadExponent, "smoothness must be positive");
  const double r = std::min(smoothness, qualification_nu);
  return std::pow(m * n, -b / (1.0 + 2.0 * r * b));
}

/// Mean estimate through the L2 operator form
///   mu_hat = Lambda^{1/2} g(A_n) V_1,
/// A_n = sum_p w_p k^{1/2}(t_p,.) (x) k^{1/2}(t_p,.), V_1 = sum_p w_p Y_p k^{1/2}(t_p,.),
/// in the truncated eigen-coordinates of the Mercer system. Returns mu_hat on
/// the grid nodes.
inline Vector fit_mean_operator_form(const SampleSet& samples, const MercerSystem& mercer,
                                     const Filter& filter, double lambda, const Grid1D& grid) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::BadLambda, "lambda must be positive");
  if (mercer.truncation() < 100)
    throw Error(ErrorCode::TruncationTooLarge, "operator form needs truncation >= 100");
  if (grid.size() < 256) throw Error(ErrorCode::BadSize, "operator form needs >= 256 grid nodes");
  const Vector sqrt_ev = mercer.eigenvalues().cwiseSqrt();
  // features(p, l) = sqrt(lambda_l) psi_l(t_p)
  const Matrix features = mercer.eigenfunctions_at(samples.points()) * sqrt_ev.asDiagonal();
  const Vector w = assemble_weight(samples);
  Matrix a_n = features.transpose() * w.asDiagonal() * features;
  a_n = 0.5 * (a_n + a_n.transpose()).eval();
  const Vector v1 = features.transpose() * w.cwiseProduct(samples.responses());
  SymEigen eig = sym_eigen(a_n);
  clamp_psd(eig, a_n.trace());
  const double bound = std::max(eig.eigenvalues.maxCoeff(), 0.0);
  const Vector c = apply_matrix_function(
      eig, [&](double s) { return g(filter, lambda, s, bound); }, v1);
  const Vector coeffs = sqrt_ev.cwiseProduct(c);
  return mercer.eigenfunctions_at(grid.nodes) * coeffs;
}

inline void write_mean_csv(const MeanEstimate& est, std::ostream& out) {
  out << "t_anchor,alpha\n";
  for (Eigen::Index i = 0; i < est.anchors.size(); ++i)
    out << format_double(est.anchors[i]) << ',' << format_double(est.alpha[i]) << '\n';
}

inline void write_mean_csv(const MeanEstimate& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_mean_csv(est, out);
}

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;  // held-out weighted squared error per candidate
};

/// Plumbing, not part of the estimator theory: picks lambda from a user
/// list by K-fold cross-validation over whole curves (curve i goes to fold
/// i mod folds). Held-out error weights each curve's points by 1/m_i.
inline LambdaSelection select_lambda_cv(const SampleSet& samples, const Kernel1& kernel,
                                        const Filter& filter, const std::vector<double>& candidates,
                                        std::size_t folds = 5, const MeanFitOptions& options = {}) {
  if (candidates.empty()) throw Error(ErrorCode::BadConfig, "no lambda candidates");
  folds = std::min(folds, samples.n());
  if (folds < 2) throw Error(ErrorCode::BadSize, "cross-validation needs at least 2 curves");
  LambdaSelection sel;
  sel.candidates = candidates;
  sel.scores.assign(candidates.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Curve> train, test;
    for (std::size_t i = 0; i < samples.n(); ++i)
      (i % folds == f ? test : train).push_back(samples.curves()[i]);
    MeanProblem problem(SampleSet(train), kernel, options.target);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const MeanEstimate est = problem.fit(filter, candidates[c], options.strategy);
      for (const auto& curve : test) {
        const Vector t = Eigen::Map<const Vector>(curve.t.data(), static_cast<Eigen::Index>(curve.t.size()));
        const Vector y = Eigen::Map<const Vector>(curve.y.data(), static_cast<Eigen::Index>(curve.y.size()));
        sel.scores[c] += (y - est.at(t)).squaredNorm() / static_cast<double>(curve.t.size());
      }
    }
  }
  const auto best = std::min_element(sel.scores.begin(), sel.scores.end());
  sel.lambda = candidates[static_cast<std::size_t>(best - sel.scores.begin())];
  return sel;
}

}  // namespace specfda
