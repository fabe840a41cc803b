#pragma once

// Synthetic processes with controlled smoothness: source-condition means
// mu_0 = Lambda^alpha h, Karhunen-Loeve Gaussian paths, uniform random
// designs, heterogeneous m_i and Gaussian measurement noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "specfda/error.hpp"
#include "specfda/kernels.hpp"
#include "specfda/numerics.hpp"
#include "specfda/sample_set.hpp"

namespace specfda {

struct FixedUnit {};
struct PolynomialH {
  double decay = 1.0;  // h_l = l^{-decay} normalized to unit norm, decay > 1/2
};
struct ExplicitH {
  std::vector<double> values;
};
using HRule = std::variant<FixedUnit, PolynomialH, ExplicitH>;

/// mu_0 = sum_l lambda_l^alpha h_l psi_l.
class SourceMean {
 public:
  SourceMean(MercerSystem mercer, double smoothness, Vector h)
      : mercer_(std::move(mercer)), smoothness_(smoothness), h_(std::move(h)) {
    coeffs_ = mercer_.eigenvalues().array().pow(smoothness_).matrix().cwiseProduct(h_);
  }

  const MercerSystem& mercer() const { return mercer_; }
  double smoothness() const { return smoothness_; }
  const Vector& h() const { return h_; }
  double h_norm() const { return h_.norm(); }
  const Vector& coefficients() const { return coeffs_; }

  Vector at(const Vector& points) const { return mercer_.eigenfunctions_at(points) * coeffs_; }

 private:
  MercerSystem mercer_;
  double smoothness_;
  Vector h_;
  Vector coeffs_;
};

inline SourceMean make_source_mean(const MercerSystem& mercer, double smoothness,
                                   const HRule& rule) {
  if (!(smoothness > 0.0)) throw Error(ErrorCode::BadRule, "smoothness must be positive");
  const Eigen::Index L = mercer.truncation();
  Vector h = Vector::Zero(L);
  if (std::holds_alternative<FixedUnit>(rule)) {
    h[0] = 1.0;
  } else if (const auto* p = std::get_if<PolynomialH>(&rule)) {
    if (!(p->decay > 0.5)) throw Error(ErrorCode::BadRule, "polynomial h needs decay > 1/2");
    for (Eigen::Index l = 0; l < L; ++l) h[l] = std::pow(static_cast<double>(l + 1), -p->decay);
    h /= h.norm();
  } else {
    const auto& v = std::get<ExplicitH>(rule).values;
    if (static_cast<Eigen::Index>(v.size()) > L)
      throw Error(ErrorCode::BadRule, "explicit h longer than the truncation");
    for (std::size_t l = 0; l < v.size(); ++l) h[static_cast<Eigen::Index>(l)] = v[l];
    if (!h.allFinite()) throw Error(ErrorCode::BadRule, "explicit h has non-finite entries");
  }
  return SourceMean(mercer, smoothness, std::move(h));
}

struct ConstantM {};
struct TwoPointM {
  std::size_t low = 2;
  std::size_t high = 10;
  double low_fraction = 0.5;
};
using MScheme = std::variant<ConstantM, TwoPointM>;

struct PolynomialXi {
  double decay = 2.0;  // xi_k = scale * k^{-decay}, decay > 1
  double scale = 1.0;
};
struct FiniteXi {
  std::vector<double> values;
};
using XiRule = std::variant<PolynomialXi, FiniteXi>;

/// Process X = mu_0 + sum_k sqrt(xi_k) Z_k phi_k observed with N(0, sigma0^2)
/// noise at i.i.d. Uniform[0,1] design points.
struct ProcessSpec {
  SourceMean mean;
  Vector xi;           // KL variances
  MercerSystem basis;  // phi_k = basis eigenfunctions, k < xi.size()
  double sigma0 = 0.0;
  MScheme m_scheme = ConstantM{};

  /// sum_k xi_k sup_t phi_k(t)^2, an upper bound on sup_t Var X(t).
  double variance_bound() const {
    double sup_sq = 2.0;  // analytic Brownian eigenfunctions have sup |phi| = sqrt(2)
    if (basis.source() == MercerSystem::Source::Nystrom)
      sup_sq = basis.grid_values().cwiseAbs2().maxCoeff();
    return xi.sum() * sup_sq;
  }
};

inline ProcessSpec make_process(const SourceMean& mean, const MercerSystem& basis,
                                const XiRule& rule, std::size_t kl_truncation, double sigma0,
                                MScheme scheme = ConstantM{}) {
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0))
    throw Error(ErrorCode::BadVariances, "noise level must be nonnegative");
  Vector xi;
  if (const auto* p = std::get_if<PolynomialXi>(&rule)) {
    if (!(p->decay > 1.0) || !(p->scale >= 0.0))
      throw Error(ErrorCode::BadVariances, "polynomial xi needs decay > 1 and scale >= 0");
    if (static_cast<Eigen::Index>(kl_truncation) > basis.truncation())
      throw Error(ErrorCode::TruncationTooLarge, "KL truncation exceeds basis size");
    xi.resize(static_cast<Eigen::Index>(kl_truncation));
    for (Eigen::Index k = 0; k < xi.size(); ++k)
      xi[k] = p->scale * std::pow(static_cast<double>(k + 1), -p->decay);
  } else {
    const auto& v = std::get<FiniteXi>(rule).values;
    if (static_cast<Eigen::Index>(v.size()) > basis.truncation())
      throw Error(ErrorCode::TruncationTooLarge, "more KL variances than basis functions");
    xi = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  for (Eigen::Index k = 0; k < xi.size(); ++k)
    if (!(xi[k] >= 0.0) || !std::isfinite(xi[k]))
      throw Error(ErrorCode::BadVariances, "KL variances must be finite and nonnegative");
  if (const auto* tp = std::get_if<TwoPointM>(&scheme);
      tp && (tp->low < 1 || tp->high < 1 || !(tp->low_fraction >= 0.0 && tp->low_fraction <= 1.0)))
    throw Error(ErrorCode::BadScheme, "two-point scheme needs m >= 1 and fraction in [0,1]");
  return ProcessSpec{mean, xi, basis, sigma0, scheme};
}

struct DrawnDataset {
  SampleSet samples;
  std::shared_ptr<const ProcessSpec> spec;
  std::uint64_t seed = 0;
};

/// Per-curve counts for a scheme. Constant needs an integer target; TwoPoint
/// gives round(fraction * n) curves m = low and the rest m = high, shuffled.
inline std::vector<std::size_t> realize_counts(const MScheme& scheme, std::size_t n,
                                               double target_m, std::mt19937_64& rng) {
  if (std::holds_alternative<ConstantM>(scheme)) {
    if (target_m != std::floor(target_m))
      throw Error(ErrorCode::BadScheme, "constant scheme needs an integer m");
    return std::vector<std::size_t>(n, static_cast<std::size_t>(target_m));
  }
  std::vector<std::size_t> m(n);
  if (const auto* tp = std::get_if<TwoPointM>(&scheme)) {
    const auto n_low = static_cast<std::size_t>(std::llround(tp->low_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) m[i] = i < n_low ? tp->low : tp->high;
    std::shuffle(m.begin(), m.end(), rng);
    double inv = 0.0;
    for (auto v : m) inv += 1.0 / static_cast<double>(v);
    const double harmonic = static_cast<double>(n) / inv;
    if (std::abs(harmonic - target_m) > 0.05 * target_m)
      throw Error(ErrorCode::BadScheme, "two-point scheme realizes harmonic mean " +
                                            std::to_string(harmonic) + ", target " +
                                            format_double(target_m));
  }
  return m;
}

/// Deterministic in (spec, n, target_m, seed).
inline DrawnDataset draw(std::shared_ptr<const ProcessSpec> spec, std::size_t n,
                         double target_m, std::uint64_t seed) {
  if (n < 1 || !(target_m >= 1.0)) throw Error(ErrorCode::BadSize, "n and target m must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto counts = realize_counts(spec->m_scheme, n, target_m, rng);
  const Eigen::Index L_x = spec->xi.size();
  const Vector sd = spec->xi.cwiseSqrt();
  std::vector<Curve> curves(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector t(static_cast<Eigen::Index>(counts[i]));
    for (Eigen::Index j = 0; j < t.size(); ++j) t[j] = unif(rng);
    Vector z(L_x);
    for (Eigen::Index k = 0; k < L_x; ++k) z[k] = normal(rng);
    Vector y = spec->mean.at(t);
    if (L_x > 0) y += spec->basis.eigenfunctions_at(t).leftCols(L_x) * sd.cwiseProduct(z);
    for (Eigen::Index j = 0; j < t.size(); ++j) y[j] += spec->sigma0 * normal(rng);
    curves[i].t.assign(t.data(), t.data() + t.size());
    curves[i].y.assign(y.data(), y.data() + y.size());
  }
  return DrawnDataset{SampleSet(std::move(curves)), std::move(spec), seed};
}

/// Noise-free path values X_i(points) for `count` independent paths
/// (rows), used for moment checks.
inline Matrix draw_paths(const ProcessSpec& spec, const Vector& points, std::size_t count,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index L_x = spec.xi.size();
  const Matrix phi = spec.basis.eigenfunctions_at(points).leftCols(L_x);
  const Matrix loadings = phi * spec.xi.cwiseSqrt().asDiagonal();  // points x L_x
  const Vector mu = spec.mean.at(points);
  Matrix out(static_cast<Eigen::Index>(count), points.size());
  Vector z(L_x);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index k = 0; k < L_x; ++k) z[k] = normal(rng);
    out.row(r) = (mu + loadings * z).transpose();
  }
  return out;
}

inline Vector true_mean_on_grid(const ProcessSpec& spec, const Grid1D& grid) {
  return spec.mean.at(grid.nodes);
}

/// C_0(s,t) = sum_k xi_k phi_k(s) phi_k(t) on grid x grid.
inline Matrix true_cov_on_grid(const ProcessSpec& spec, const Grid1D& grid) {
  const Eigen::Index L_x = spec.xi.size();
  if (L_x == 0) return Matrix::Zero(grid.size(), grid.size());
  const Matrix phi = spec.basis.eigenfunctions_at(grid.nodes).leftCols(L_x);
  const Matrix c = phi * spec.xi.asDiagonal() * phi.transpose();
  return 0.5 * (c + c.transpose());
}

}  // namespace specfda
