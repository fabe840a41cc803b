#pragma once

// Reproducing kernels on [0,1] and [0,1]^2, Gram assembly, truncated Mercer
// eigensystems and the effective dimension.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "specfda/constants.hpp"
#include "specfda/error.hpp"
#include "specfda/numerics.hpp"

namespace specfda {

struct BrownianMin {};
struct Gaussian {
  double bandwidth = 1.0;
};
struct Matern {
  double smoothness = 1.5;
  double lengthscale = 1.0;
};

using KernelFamily = std::variant<BrownianMin, Gaussian, Matern>;

namespace detail {

inline void check_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error(ErrorCode::OutOfDomain, "point " + std::to_string(x) + " outside [0,1]");
}

inline double matern_of_distance(const Matern& m, double r) {
  if (r == 0.0) return 1.0;
  const double nu = m.smoothness;
  const double x = std::sqrt(2.0 * nu) * r / m.lengthscale;
  if (nu == 0.5) return std::exp(-x);
  if (nu == 1.5) return (1.0 + x) * std::exp(-x);
  if (nu == 2.5) return (1.0 + x + x * x / 3.0) * std::exp(-x);
  if (x > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * std::cyl_bessel_k(nu, x);
}

inline double radial(const KernelFamily& family, double sq_dist) {
  if (const auto* g = std::get_if<Gaussian>(&family))
    return std::exp(-sq_dist / (2.0 * g->bandwidth * g->bandwidth));
  if (const auto* m = std::get_if<Matern>(&family))
    return matern_of_distance(*m, std::sqrt(sq_dist));
  throw Error(ErrorCode::BadRule, "BrownianMin is not a radial kernel");
}

inline void validate_family(const KernelFamily& family) {
  if (const auto* g = std::get_if<Gaussian>(&family); g && !(g->bandwidth > 0.0))
    throw Error(ErrorCode::BadRule, "Gaussian bandwidth must be positive");
  if (const auto* m = std::get_if<Matern>(&family);
      m && !(m->smoothness > 0.0 && m->lengthscale > 0.0))
    throw Error(ErrorCode::BadRule, "Matern smoothness and lengthscale must be positive");
}

}  // namespace detail

/// Reproducing kernel on [0,1] x [0,1]. All shipped families satisfy
/// sup_t k(t,t) <= kappa_sq = 1.
class Kernel1 {
 public:
  Kernel1() = default;
  explicit Kernel1(KernelFamily family) : family_(family) { detail::validate_family(family_); }

  const KernelFamily& family() const { return family_; }
  double kappa_sq() const { return 1.0; }
  bool is_brownian() const { return std::holds_alternative<BrownianMin>(family_); }

  /// Unchecked evaluation; callers guarantee s, t in [0,1].
  double operator()(double s, double t) const {
    if (std::holds_alternative<BrownianMin>(family_)) return std::min(s, t);
    return detail::radial(family_, (s - t) * (s - t));
  }

  std::string name() const {
    if (is_brownian()) return "brownian";
    if (const auto* g = std::get_if<Gaussian>(&family_))
      return "gaussian:" + std::to_string(g->bandwidth);
    const auto& m = std::get<Matern>(family_);
    return "matern:" + std::to_string(m.smoothness) + ":" + std::to_string(m.lengthscale);
  }

 private:
  KernelFamily family_ = BrownianMin{};
};

inline double eval_kernel1(const Kernel1& k, double s, double t) {
  detail::check_unit(s);
  detail::check_unit(t);
  return k(s, t);
}

inline void check_points(const Vector& points) {
  for (Eigen::Index i = 0; i < points.size(); ++i) detail::check_unit(points[i]);
}

/// Rectangular kernel matrix (k(a_i, b_j)).
inline Matrix cross_gram(const Kernel1& k, const Vector& a, const Vector& b) {
  check_points(a);
  check_points(b);
  Matrix g(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j)
    for (Eigen::Index i = 0; i < a.size(); ++i) g(i, j) = k(a[i], b[j]);
  return g;
}

/// Symmetric Gram matrix over one point set. Entries are filled from the
/// lower triangle so the result is exactly symmetric.
inline Matrix gram_matrix(const Kernel1& k, const Vector& points) {
  check_points(points);
  const Eigen::Index n = points.size();
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) g(i, j) = g(j, i) = k(points[i], points[j]);
  return g;
}

/// Truncated Mercer eigensystem of the integral operator of a Kernel1.
class MercerSystem {
 public:
  enum class Source { Analytic, Nystrom };

  /// Analytic Brownian system: lambda_i = 1/((i-1/2)^2 pi^2),
  /// psi_i(t) = sqrt(2) sin((i-1/2) pi t).
  static MercerSystem brownian(std::size_t truncation, const Grid1D& grid) {
    MercerSystem sys;
    sys.kernel_ = Kernel1{BrownianMin{}};
    sys.source_ = Source::Analytic;
    sys.grid_ = grid;
    const auto L = static_cast<Eigen::Index>(truncation);
    sys.eigenvalues_.resize(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      const double freq = (static_cast<double>(i) + 0.5) * std::numbers::pi;
      sys.eigenvalues_[i] = 1.0 / (freq * freq);
    }
    sys.grid_values_ = sys.eigenfunctions_at(grid.nodes).transpose();
    return sys;
  }

  /// Nystrom system from the quadrature-weighted Gram W^{1/2} G W^{1/2}.
  static MercerSystem nystrom(const Kernel1& k, std::size_t truncation, const Grid1D& grid) {
    MercerSystem sys;
    sys.kernel_ = k;
    sys.source_ = Source::Nystrom;
    sys.grid_ = grid;
    const Vector sqrt_w = grid.weights.cwiseSqrt();
    Matrix b = gram_matrix(k, grid.nodes);
    b = sqrt_w.asDiagonal() * b * sqrt_w.asDiagonal();
    b = 0.5 * (b + b.transpose()).eval();
    const SymEigen eig = sym_eigen(b);
    const double top = eig.eigenvalues.size() > 0 ? eig.eigenvalues[0] : 0.0;
    Eigen::Index keep = 0;
    while (keep < static_cast<Eigen::Index>(truncation) && keep < eig.eigenvalues.size() &&
           eig.eigenvalues[keep] > tol::kMercerPositive * top)
      ++keep;
    sys.eigenvalues_ = eig.eigenvalues.head(keep);
    // psi_i(s_g) = u_gi / sqrt(w_g), stored as rows.
    sys.grid_values_ =
        (sqrt_w.cwiseInverse().asDiagonal() * eig.eigenvectors.leftCols(keep)).transpose();
    return sys;
  }

  Source source() const { return source_; }
  const Kernel1& kernel() const { return kernel_; }
  const Grid1D& grid() const { return grid_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  Eigen::Index truncation() const { return eigenvalues_.size(); }

  /// L x grid matrix, row i holds psi_i on the grid nodes.
  const Matrix& grid_values() const { return grid_values_; }

  /// points.size() x L matrix of eigenfunction values. Nystrom systems use
  /// the extension psi_i(t) = lambda_i^{-1} sum_g w_g k(t, s_g) psi_i(s_g).
  Matrix eigenfunctions_at(const Vector& points) const {
    check_points(points);
    const Eigen::Index L = truncation();
    Matrix out(points.size(), L);
    if (source_ == Source::Analytic) {
      for (Eigen::Index l = 0; l < L; ++l) {
        const double freq = (static_cast<double>(l) + 0.5) * std::numbers::pi;
        for (Eigen::Index p = 0; p < points.size(); ++p)
          out(p, l) = std::numbers::sqrt2 * std::sin(freq * points[p]);
      }
      return out;
    }
    const Matrix cross = cross_gram(kernel_, points, grid_.nodes);
    out = cross * grid_.weights.asDiagonal() * grid_values_.transpose();
    out = out * eigenvalues_.cwiseInverse().asDiagonal();
    return out;
  }

 private:
  Kernel1 kernel_;
  Source source_ = Source::Analytic;
  Grid1D grid_;
  Vector eigenvalues_;
  Matrix grid_values_;
};

inline MercerSystem mercer_system(const Kernel1& k, std::size_t truncation, const Grid1D& grid) {
  if (truncation == 0 || truncation > static_cast<std::size_t>(grid.size()))
    throw Error(ErrorCode::TruncationTooLarge, "truncation " + std::to_string(truncation) +
                                                   " exceeds grid size " +
                                                   std::to_string(grid.size()));
  if (k.is_brownian()) return MercerSystem::brownian(truncation, grid);
  return MercerSystem::nystrom(k, truncation, grid);
}

/// N(lambda) = sum_i lambda_i / (lambda_i + lambda).
inline double effective_dimension(const Vector& eigs, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::BadLambda, "lambda must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) total += eigs[i] / (eigs[i] + lambda);
  return total;
}

/// A point of [0,1]^2.
struct Pair {
  double first = 0.0;
  double second = 0.0;

  Pair swapped() const { return {second, first}; }
  friend bool operator==(const Pair&, const Pair&) = default;
};

/// Reproducing kernel on ([0,1]^2) x ([0,1]^2): either k (x) k for a Kernel1
/// k, or a radial family applied to the Euclidean distance in the plane.
class Kernel2 {
 public:
  enum class Kind { Product, Direct };

  static Kernel2 product(Kernel1 k) { return Kernel2(Kind::Product, std::move(k)); }

  static Kernel2 direct(KernelFamily family) {
    if (std::holds_alternative<BrownianMin>(family))
      throw Error(ErrorCode::BadRule, "direct 2-D kernels must be Gaussian or Matern");
    return Kernel2(Kind::Direct, Kernel1(family));
  }

  Kind kind() const { return kind_; }
  const Kernel1& base() const { return base_; }

  double operator()(const Pair& p, const Pair& q) const {
    if (kind_ == Kind::Product) return base_(p.first, q.first) * base_(p.second, q.second);
    const double d1 = p.first - q.first;
    const double d2 = p.second - q.second;
    return detail::radial(base_.family(), d1 * d1 + d2 * d2);
  }

  std::string name() const {
    return (kind_ == Kind::Product ? "product:" : "direct:") + base_.name();
  }

 private:
  Kernel2(Kind kind, Kernel1 base) : kind_(kind), base_(std::move(base)) {}

  Kind kind_;
  Kernel1 base_;
};

inline double eval_kernel2(const Kernel2& k, const Pair& p, const Pair& q) {
  detail::check_unit(p.first);
  detail::check_unit(p.second);
  detail::check_unit(q.first);
  detail::check_unit(q.second);
  return k(p, q);
}

/// Eigenvalues lambda_i lambda_j of k (x) k from a 1-D system, sorted
/// descending and truncated to `limit` entries.
inline Vector product_spectrum(const MercerSystem& sys, std::size_t limit) {
  const Vector& ev = sys.eigenvalues();
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(ev.size() * ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    for (Eigen::Index j = 0; j < ev.size(); ++j) all.push_back(ev[i] * ev[j]);
  std::sort(all.begin(), all.end(), std::greater<>());
  all.resize(std::min(limit, all.size()));
  return Eigen::Map<Vector>(all.data(), static_cast<Eigen::Index>(all.size()));
}

}  // namespace specfda
