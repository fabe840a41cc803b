#pragma once

// Dense linear-algebra and quadrature substrate: symmetric
// eigendecomposition, spectral matrix functions, trapezoid grids on [0,1]
// and discrete L2 norms.

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "specfda/constants.hpp"
#include "specfda/error.hpp"

namespace specfda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order and
/// eigenvectors stored as orthonormal columns.
struct SymEigen {
  Vector eigenvalues;
  Matrix eigenvectors;

  Eigen::Index size() const { return eigenvalues.size(); }
};

namespace detail {

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline double max_asymmetry(const Matrix& a) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = j + 1; i < a.rows(); ++i)
      worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
  return worst;
}

inline void check_symmetric(const Matrix& a) {
  if (a.rows() != a.cols())
    throw Error(ErrorCode::ShapeMismatch, "matrix is " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()));
  if (!all_finite(a)) throw Error(ErrorCode::NonFinite, "matrix has NaN/Inf entries");
  const double asym = max_asymmetry(a);
  if (asym > tol::kSymmetry)
    throw Error(ErrorCode::NonSymmetric, "max asymmetry " + std::to_string(asym));
}

// LAPACK returns ascending order; flip in place.
inline void to_descending(Vector& values, Matrix& vectors) {
  values.reverseInPlace();
  vectors.rowwise().reverseInPlace();
}

}  // namespace detail

/// Full symmetric eigendecomposition (divide and conquer).
inline SymEigen sym_eigen(const Matrix& a) {
  detail::check_symmetric(a);
  const auto n = static_cast<lapack_int>(a.rows());
  SymEigen out;
  out.eigenvectors = a;
  out.eigenvalues.resize(n);
  if (n == 0) return out;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.eigenvectors.data(),
                                         n, out.eigenvalues.data());
  if (info != 0) throw Error(ErrorCode::NonFinite, "dsyevd failed, info=" + std::to_string(info));
  detail::to_descending(out.eigenvalues, out.eigenvectors);
  return out;
}

/// Eigenpairs with eigenvalue >= lower only. Used where the applied function
/// vanishes below a threshold, so the remaining spectrum is never needed.
inline SymEigen sym_eigen_above(const Matrix& a, double lower) {
  detail::check_symmetric(a);
  const auto n = static_cast<lapack_int>(a.rows());
  SymEigen out;
  if (n == 0) {
    out.eigenvectors.resize(0, 0);
    return out;
  }
  Matrix work = a;
  Vector values(n);
  Matrix vectors(n, n);
  Eigen::VectorXi support(2 * n);
  lapack_int found = 0;
  const double upper = std::max(lower, work.cwiseAbs().rowwise().sum().maxCoeff()) * 2.0 + 1.0;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'L', n, work.data(), n, lower, upper, 0, 0, 0.0,
                     &found, values.data(), vectors.data(), n, support.data());
  if (info != 0) throw Error(ErrorCode::NonFinite, "dsyevr failed, info=" + std::to_string(info));
  out.eigenvalues = values.head(found);
  out.eigenvectors = vectors.leftCols(found);
  detail::to_descending(out.eigenvalues, out.eigenvectors);
  return out;
}

/// Enforces numerical positive semidefiniteness: eigenvalues below
/// -kPsdRelative * trace are an error, the remaining negative ones become 0.
inline void clamp_psd(SymEigen& eig, double trace) {
  const double floor = -tol::kPsdRelative * std::max(std::abs(trace), 1e-300);
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    double& d = eig.eigenvalues[i];
    if (d < floor)
      throw Error(ErrorCode::NotPsd, "eigenvalue " + std::to_string(d) + " below clamp floor " +
                                         std::to_string(floor));
    if (d < 0.0) d = 0.0;
  }
}

template <typename F>
Vector map_spectrum(const Vector& values, F&& f) {
  Vector out(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out[i] = f(values[i]);
    if (!std::isfinite(out[i]))
      throw Error(ErrorCode::NonFinite,
                  "matrix function is not finite at eigenvalue " + std::to_string(values[i]));
  }
  return out;
}

/// V diag(f(d)) V^T.
template <typename F>
Matrix apply_matrix_function(const SymEigen& eig, F&& f) {
  const Vector fd = map_spectrum(eig.eigenvalues, std::forward<F>(f));
  return eig.eigenvectors * fd.asDiagonal() * eig.eigenvectors.transpose();
}

/// V diag(f(d)) V^T x without forming the matrix.
template <typename F>
Vector apply_matrix_function(const SymEigen& eig, F&& f, const Vector& x) {
  if (x.size() != eig.eigenvectors.rows())
    throw Error(ErrorCode::ShapeMismatch, "vector length does not match eigensystem");
  const Vector fd = map_spectrum(eig.eigenvalues, std::forward<F>(f));
  const Vector coords = eig.eigenvectors.transpose() * x;
  return eig.eigenvectors * fd.cwiseProduct(coords);
}

/// Solves (A + shift I) x = rhs for symmetric A with A + shift I positive
/// definite, via Cholesky.
inline Vector spd_shift_solve(const Matrix& a, double shift, const Vector& rhs) {
  detail::check_symmetric(a);
  if (rhs.size() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "rhs length mismatch");
  if (a.rows() == 0) return rhs;
  Matrix work = a;
  work.diagonal().array() += shift;
  const Eigen::LLT<Matrix> llt(work);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPsd, "Cholesky failed (matrix + shift not positive definite)");
  return llt.solve(rhs);
}

/// Reconstruction check of sym_eigen on a fixed 96 x 96 Gram matrix. Some
/// OpenBLAS builds select kernels that return wrong results on CPUs they
/// misdetect; callers run this once before trusting eigensolves.
inline bool blas_self_check() {
  constexpr Eigen::Index n = 96;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = static_cast<double>(std::min(i, j) + 1) / static_cast<double>(n);
  const SymEigen e = sym_eigen(a);
  const Matrix rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
  return (rec - a).cwiseAbs().maxCoeff() <= 1e-10;
}

/// Uniform nodes on [0,1] with trapezoid weights.
struct Grid1D {
  Vector nodes;
  Vector weights;

  Eigen::Index size() const { return nodes.size(); }
};

inline Grid1D trapezoid_grid(std::size_t n_nodes) {
  if (n_nodes < 2) throw Error(ErrorCode::BadSize, "trapezoid grid needs at least 2 nodes");
  const auto n = static_cast<Eigen::Index>(n_nodes);
  const double h = 1.0 / static_cast<double>(n - 1);
  Grid1D grid;
  grid.nodes.resize(n);
  grid.weights.setConstant(n, h);
  for (Eigen::Index i = 0; i < n; ++i) grid.nodes[i] = static_cast<double>(i) * h;
  grid.nodes[n - 1] = 1.0;
  grid.weights[0] = h / 2.0;
  grid.weights[n - 1] = h / 2.0;
  return grid;
}

inline double l2_norm_grid(const Vector& values, const Grid1D& grid) {
  if (values.size() != grid.size())
    throw Error(ErrorCode::ShapeMismatch, "values do not match grid size");
  return std::sqrt(grid.weights.dot(values.cwiseAbs2()));
}

/// Tensor-product trapezoid norm over [0,1]^2; values(i, j) sits at
/// (nodes[i], nodes[j]).
inline double l2_norm_grid2(const Matrix& values, const Grid1D& grid) {
  if (values.rows() != grid.size() || values.cols() != grid.size())
    throw Error(ErrorCode::ShapeMismatch, "values do not match grid x grid");
  const double sq = grid.weights.transpose() * values.cwiseAbs2() * grid.weights;
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace specfda
