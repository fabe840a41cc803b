#pragma once

// Plug-in covariance estimation. Residual products over within-curve
// ordered pairs j != k are regressed on a kernel over [0,1]^2:
//
//   C_hat(s,t) = sum_p alpha_p K(pair_p, (s,t)),
//
// with pair weights 1/(n m_i (m_i - 1)) and the same filtered-system rules
// as the mean estimator.

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "specfda/constants.hpp"
#include "specfda/error.hpp"
#include "specfda/filtered_system.hpp"
#include "specfda/kernels.hpp"
#include "specfda/mean.hpp"
#include "specfda/numerics.hpp"
#include "specfda/sample_set.hpp"

namespace specfda {

struct PairOptions {
  /// Adds the j == k products (weights 1/(n m_i^2) for every pair). This is
  /// the noise-biased variant, kept only for diagnostics.
  bool include_diagonal = false;
};

struct PairDesign {
  std::vector<Pair> pairs;            // (t_ij, t_ik)
  std::vector<Eigen::Index> first;    // flattened index of t_ij
  std::vector<Eigen::Index> second;   // flattened index of t_ik
  std::vector<std::size_t> twin;      // index of the swapped pair (self for j == k)
  Vector responses;                   // centered residual products
  Vector weights;
  std::vector<std::size_t> pairs_per_curve;
  std::size_t skipped_curves = 0;     // curves with m_i < 2
  std::size_t n_curves = 0;
  bool includes_diagonal = false;

  std::size_t size() const { return pairs.size(); }
};

/// Pairs from residuals Y_ij - fitted_ij (flattened order). Enumeration is
/// curve by curve, then lexicographic in (j, k).
inline PairDesign assemble_pairs(const SampleSet& samples, const Vector& fitted,
                                 const PairOptions& options = {}) {
  if (static_cast<std::size_t>(fitted.size()) != samples.total_points())
    throw Error(ErrorCode::ShapeMismatch, "fitted values do not match sample size");
  PairDesign d;
  d.n_curves = samples.n();
  d.includes_diagonal = options.include_diagonal;
  const double n = static_cast<double>(samples.n());
  std::vector<double> resp, wts;
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < samples.n(); ++i) {
    const auto& c = samples.curves()[i];
    const std::size_t m = c.t.size();
    if (m < 2) {
      ++d.skipped_curves;
      d.pairs_per_curve.push_back(0);
      offset += static_cast<Eigen::Index>(m);
      continue;
    }
    const double md = static_cast<double>(m);
    const double w = options.include_diagonal ? 1.0 / (n * md * md) : 1.0 / (n * md * (md - 1.0));
    const std::size_t start = d.pairs.size();
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < m; ++k) {
        if (j == k && !options.include_diagonal) continue;
        const auto gj = offset + static_cast<Eigen::Index>(j);
        const auto gk = offset + static_cast<Eigen::Index>(k);
        d.pairs.push_back({c.t[j], c.t[k]});
        d.first.push_back(gj);
        d.second.push_back(gk);
        resp.push_back((c.y[j] - fitted[gj]) * (c.y[k] - fitted[gk]));
        wts.push_back(w);
      }
    }
    // Twins: (j,k) <-> (k,j) inside this curve's block.
    const auto local = [&](std::size_t j, std::size_t k) {
      if (options.include_diagonal) return start + j * m + k;
      return start + j * (m - 1) + (k < j ? k : k - 1);
    };
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) {
        if (j == k && !options.include_diagonal) continue;
        d.twin.push_back(local(k, j));
      }
    d.pairs_per_curve.push_back(d.pairs.size() - start);
    offset += static_cast<Eigen::Index>(m);
  }
  if (d.pairs.empty()) throw Error(ErrorCode::NoPairs, "every curve has fewer than 2 points");
  d.responses = Eigen::Map<Vector>(resp.data(), static_cast<Eigen::Index>(resp.size()));
  d.weights = Eigen::Map<Vector>(wts.data(), static_cast<Eigen::Index>(wts.size()));
  return d;
}

/// Centering by the exact kernel expansion of the mean estimate.
inline PairDesign assemble_pairs(const SampleSet& samples, const MeanEstimate& mean_est,
                                 const PairOptions& options = {}) {
  return assemble_pairs(samples, mean_est.at(samples.points()), options);
}

/// Centering by an arbitrary function, e.g. the true mean in simulations.
inline PairDesign assemble_pairs(const SampleSet& samples,
                                 const std::function<double(double)>& centering,
                                 const PairOptions& options = {}) {
  const Vector pts = samples.points();
  Vector fitted(pts.size());
  for (Eigen::Index i = 0; i < pts.size(); ++i) fitted[i] = centering(pts[i]);
  return assemble_pairs(samples, fitted, options);
}

struct CovEstimate {
  std::vector<Pair> anchors;
  Vector alpha;
  Kernel2 kernel = Kernel2::product(Kernel1{});
  double lambda = 0.0;
  double eta = 0.0;  // regularization used for the centering mean, 0 if none
  Filter filter;
  FilterTarget target = FilterTarget::EmpiricalOperator;

  double at(double s, double t) const {
    double v = 0.0;
    for (std::size_t p = 0; p < anchors.size(); ++p)
      v += alpha[static_cast<Eigen::Index>(p)] * kernel(anchors[p], {s, t});
    return v;
  }
};

struct CovFitOptions {
  FilterTarget target = FilterTarget::EmpiricalOperator;
  SolveStrategy strategy = SolveStrategy::Auto;
  std::size_t pair_cap = defaults::kPairCap;
  /// Solve on swap orbits {(j,k),(k,j)}. Exact because the kernel, weights
  /// and responses are invariant under swapping both pair arguments.
  bool reduce_swap_orbits = true;
};

namespace detail {

// Full P x P pair Gram.
inline Matrix pair_gram(const PairDesign& d, const Kernel2& kernel, const Matrix* point_gram) {
  const auto P = static_cast<Eigen::Index>(d.size());
  Matrix g(P, P);
  for (Eigen::Index q = 0; q < P; ++q)
    for (Eigen::Index p = q; p < P; ++p) {
      const auto pu = static_cast<std::size_t>(p), qu = static_cast<std::size_t>(q);
      const double v = point_gram ? (*point_gram)(d.first[pu], d.first[qu]) *
                                        (*point_gram)(d.second[pu], d.second[qu])
                                  : kernel(d.pairs[pu], d.pairs[qu]);
      g(p, q) = g(q, p) = v;
    }
  return g;
}

}  // namespace detail

/// Fits C_hat on an assembled pair design.
inline CovEstimate fit_covariance(const SampleSet& samples, const PairDesign& design,
                                  const Kernel2& kernel, const Filter& filter, double lambda,
                                  const CovFitOptions& options = {}) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::BadLambda, "lambda must be positive");
  if (design.size() == 0) throw Error(ErrorCode::NoPairs, "empty pair design");
  if (design.size() > options.pair_cap)
    throw Error(ErrorCode::PairCapExceeded, std::to_string(design.size()) + " pairs exceed cap " +
                                                std::to_string(options.pair_cap));
  const Matrix point_gram = kernel.kind() == Kernel2::Kind::Product
                                ? gram_matrix(kernel.base(), samples.points())
                                : Matrix();
  const Matrix* pg = kernel.kind() == Kernel2::Kind::Product ? &point_gram : nullptr;

  CovEstimate est;
  est.anchors = design.pairs;
  est.kernel = kernel;
  est.lambda = lambda;
  est.filter = filter;
  est.target = options.target;

  if (!options.reduce_swap_orbits) {
    FilteredSystem sys(detail::pair_gram(design, kernel, pg), design.weights, design.responses,
                       options.target);
    est.alpha = sys.solve(filter, lambda, options.strategy);
    return est;
  }

  // One representative per orbit: the pair itself when j <= k.
  std::vector<std::size_t> reps;
  for (std::size_t p = 0; p < design.size(); ++p)
    if (design.twin[p] >= p) reps.push_back(p);
  const auto A = static_cast<Eigen::Index>(reps.size());
  Vector orbit_size(A), w(A), y(A);
  for (Eigen::Index a = 0; a < A; ++a) {
    const std::size_t p = reps[static_cast<std::size_t>(a)];
    orbit_size[a] = design.twin[p] == p ? 1.0 : 2.0;
    w[a] = design.weights[static_cast<Eigen::Index>(p)];
    y[a] = std::sqrt(orbit_size[a]) * design.responses[static_cast<Eigen::Index>(p)];
  }
  const auto kval = [&](std::size_t p, std::size_t q) {
    return pg ? (*pg)(design.first[p], design.first[q]) * (*pg)(design.second[p], design.second[q])
              : kernel(design.pairs[p], design.pairs[q]);
  };
  // K_s[a,b] = sqrt(|a|/|b|) sum_{q in orbit b} K(rep_a, q)
  Matrix ks(A, A);
  for (Eigen::Index b = 0; b < A; ++b) {
    const std::size_t q = reps[static_cast<std::size_t>(b)];
    const std::size_t qt = design.twin[q];
    for (Eigen::Index a = b; a < A; ++a) {
      const std::size_t p = reps[static_cast<std::size_t>(a)];
      double sum = kval(p, q);
      if (qt != q) sum += kval(p, qt);
      const double v = std::sqrt(orbit_size[a] / orbit_size[b]) * sum;
      ks(a, b) = ks(b, a) = v;
    }
  }
  FilteredSystem sys(std::move(ks), w, y, options.target);
  const Vector c = sys.solve(filter, lambda, options.strategy);
  est.alpha.resize(static_cast<Eigen::Index>(design.size()));
  for (Eigen::Index a = 0; a < A; ++a) {
    const std::size_t p = reps[static_cast<std::size_t>(a)];
    const double v = c[a] / std::sqrt(orbit_size[a]);
    est.alpha[static_cast<Eigen::Index>(p)] = v;
    est.alpha[static_cast<Eigen::Index>(design.twin[p])] = v;
  }
  return est;
}

/// Centers by mean_est, assembles off-diagonal pairs and fits.
inline CovEstimate fit_covariance(const SampleSet& samples, const MeanEstimate& mean_est,
                                  const Kernel2& kernel, const Filter& filter, double lambda,
                                  const CovFitOptions& options = {}) {
  const PairDesign design = assemble_pairs(samples, mean_est);
  CovEstimate est = fit_covariance(samples, design, kernel, filter, lambda, options);
  est.eta = mean_est.lambda;
  return est;
}

/// C_hat on grid x grid; entry (i, j) is C_hat(nodes[i], nodes[j]).
inline Matrix evaluate_cov(const CovEstimate& est, const Grid1D& grid) {
  const Eigen::Index G = grid.size();
  const auto P = static_cast<Eigen::Index>(est.anchors.size());
  if (est.kernel.kind() == Kernel2::Kind::Product) {
    const Kernel1& k = est.kernel.base();
    Matrix left(G, P), right(G, P);
    for (Eigen::Index p = 0; p < P; ++p) {
      const Pair& a = est.anchors[static_cast<std::size_t>(p)];
      for (Eigen::Index i = 0; i < G; ++i) {
        left(i, p) = k(a.first, grid.nodes[i]);
        right(i, p) = k(a.second, grid.nodes[i]);
      }
    }
    return left * est.alpha.asDiagonal() * right.transpose();
  }
  Matrix out(G, G);
  for (Eigen::Index i = 0; i < G; ++i)
    for (Eigen::Index j = 0; j < G; ++j) out(i, j) = est.at(grid.nodes[i], grid.nodes[j]);
  return out;
}

/// (mn)^{-b1/(1+2 r1 b1)}, r1 = min(alpha1, nu).
inline double oracle_lambda_cov(double n, double m, double smoothness, double b,
                                double qualification_nu) {
  return oracle_lambda_mean(n, m, smoothness, b, qualification_nu);
}

inline void write_cov_csv(const CovEstimate& est, std::ostream& out) {
  out << "t1_anchor,t2_anchor,alpha\n";
  for (std::size_t p = 0; p < est.anchors.size(); ++p)
    out << format_double(est.anchors[p].first) << ',' << format_double(est.anchors[p].second)
        << ',' << format_double(est.alpha[static_cast<Eigen::Index>(p)]) << '\n';
}

inline void write_cov_csv(const CovEstimate& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_cov_csv(est, out);
}

inline void write_surface_csv(const Matrix& surface, const Grid1D& grid, std::ostream& out) {
  out << "s,t,c_hat\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    for (Eigen::Index j = 0; j < grid.size(); ++j)
      out << format_double(grid.nodes[i]) << ',' << format_double(grid.nodes[j]) << ','
          << format_double(surface(i, j)) << '\n';
}

inline void write_surface_csv(const Matrix& surface, const Grid1D& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_surface_csv(surface, grid, out);
}

}  // namespace specfda
