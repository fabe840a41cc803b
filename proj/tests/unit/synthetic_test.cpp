#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "specfda/synthetic.hpp"

using namespace specfda;

namespace {

const Grid1D& mercer_grid() {
  static const Grid1D grid = trapezoid_grid(512);
  return grid;
}

const MercerSystem& brownian() {
  static const MercerSystem sys = mercer_system(Kernel1{BrownianMin{}}, 200, mercer_grid());
  return sys;
}

std::shared_ptr<const ProcessSpec> spec_with(const XiRule& xi, std::size_t kl, double sigma0,
                                             MScheme scheme = ConstantM{}, HRule h = FixedUnit{}) {
  const auto mean = make_source_mean(brownian(), 0.5, h);
  return std::make_shared<const ProcessSpec>(make_process(mean, brownian(), xi, kl, sigma0, scheme));
}

}  // namespace

TEST(SourceMean, FixedUnitIsScaledFirstEigenfunction) {
  const auto mean = make_source_mean(brownian(), 0.5, FixedUnit{});
  Vector pts(3);
  pts << 0.0, 0.5, 1.0;
  const Vector v = mean.at(pts);
  const double scale = 2.0 / std::numbers::pi;  // lambda_1^{1/2}
  EXPECT_NEAR(v[0], 0.0, 1e-15);
  EXPECT_NEAR(v[1], scale * std::numbers::sqrt2 * std::sin(std::numbers::pi / 4.0), 1e-14);
  EXPECT_NEAR(v[2], scale * std::numbers::sqrt2, 1e-14);
}

TEST(SourceMean, PolynomialHHasUnitNormAndRejectsSlowDecay) {
  const auto mean = make_source_mean(brownian(), 1.0, PolynomialH{0.8});
  EXPECT_NEAR(mean.h_norm(), 1.0, 1e-14);
  EXPECT_THROW(make_source_mean(brownian(), 1.0, PolynomialH{0.5}), Error);
  EXPECT_THROW(make_source_mean(brownian(), 0.0, FixedUnit{}), Error);
}

TEST(SourceMean, ExplicitZeroGivesZero) {
  const auto spec = spec_with(FiniteXi{{}}, 0, 0.0, ConstantM{}, ExplicitH{{0.0, 0.0}});
  EXPECT_EQ(true_mean_on_grid(*spec, trapezoid_grid(33)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(make_source_mean(brownian(), 1.0, ExplicitH{std::vector<double>(201, 1.0)}), Error);
}

TEST(Process, RankOneCovariance) {
  const auto spec = spec_with(FiniteXi{{1.0}}, 0, 0.0);
  const auto grid = trapezoid_grid(3);
  const Matrix c = true_cov_on_grid(*spec, grid);
  EXPECT_NEAR(c(1, 1), 1.0, 1e-14);  // 2 sin^2(pi/4)
  EXPECT_EQ(c, c.transpose());
}

TEST(Process, PolynomialTraceMatchesPartialSums) {
  const auto spec = spec_with(PolynomialXi{2.0, 1.0}, 100, 0.0);
  // Oracle: sum_{k<=100} k^{-2}, and its limit pi^2/6.
  double partial = 0.0;
  for (int k = 1; k <= 100; ++k) partial += 1.0 / (static_cast<double>(k) * k);
  EXPECT_NEAR(spec->xi.sum(), partial, 1e-14);
  EXPECT_NEAR(partial, std::numbers::pi * std::numbers::pi / 6.0, 1.0 / 99.0);
  // Trace of C_0 through quadrature of the diagonal.
  const auto grid = trapezoid_grid(2049);
  const Matrix c = true_cov_on_grid(*spec, grid);
  EXPECT_NEAR(grid.weights.dot(c.diagonal()), partial, 1e-5);
}

TEST(Process, Errors) {
  EXPECT_THROW(spec_with(PolynomialXi{1.0, 1.0}, 10, 0.0), Error);
  EXPECT_THROW(spec_with(FiniteXi{{1.0, -0.5}}, 0, 0.0), Error);
  EXPECT_THROW(spec_with(FiniteXi{{1.0}}, 0, -1.0), Error);
  EXPECT_THROW(spec_with(PolynomialXi{2.0, 1.0}, 500, 0.0), Error);
}

TEST(Process, TruncationChangeMatchesTail) {
  // Going from 50 to 100 KL terms adds sum_{k=51}^{100} k^{-2} phi_k(s) phi_k(t);
  // at s = t = 1 every phi_k^2 equals 2.
  const auto grid = trapezoid_grid(129);
  const Matrix c50 = true_cov_on_grid(*spec_with(PolynomialXi{2.0, 1.0}, 50, 0.0), grid);
  const Matrix c100 = true_cov_on_grid(*spec_with(PolynomialXi{2.0, 1.0}, 100, 0.0), grid);
  double tail = 0.0, tail_sq = 0.0;
  for (int k = 51; k <= 100; ++k) {
    tail += 1.0 / (static_cast<double>(k) * k);
    tail_sq += std::pow(static_cast<double>(k), -4.0);
  }
  EXPECT_NEAR((c100 - c50).cwiseAbs().maxCoeff(), 2.0 * tail, 1e-12);
  EXPECT_NEAR(l2_norm_grid2(c100 - c50, grid), std::sqrt(tail_sq), 1e-4);
}

TEST(Draw, DeterministicPerSeed) {
  const auto spec = spec_with(PolynomialXi{2.0, 1.0}, 100, 0.5);
  const auto a = draw(spec, 20, 5, 42);
  const auto b = draw(spec, 20, 5, 42);
  const auto c = draw(spec, 20, 5, 43);
  EXPECT_EQ(a.samples.points(), b.samples.points());
  EXPECT_EQ(a.samples.responses(), b.samples.responses());
  EXPECT_NE(a.samples.responses(), c.samples.responses());
  EXPECT_EQ(a.seed, 42u);
}

TEST(Draw, NoiselessMeanOnlyIsExact) {
  const auto spec = spec_with(FiniteXi{{}}, 0, 0.0, ConstantM{}, PolynomialH{1.0});
  const auto d = draw(spec, 10, 4, 7);
  EXPECT_EQ(d.samples.responses(), spec->mean.at(d.samples.points()));
  for (std::size_t i = 0; i < d.samples.n(); ++i) EXPECT_EQ(d.samples.m(i), 4u);
}

TEST(Draw, NoiselessResponsesArePathValues) {
  const auto spec = spec_with(FiniteXi{{1.0}}, 0, 0.0);
  const auto d = draw(spec, 50, 3, 11);
  // Rank one: Y - mu_0 = Z_i phi_1(t), so within a curve the ratio is constant.
  const Vector mu = spec->mean.at(d.samples.points());
  const Matrix phi = brownian().eigenfunctions_at(d.samples.points());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < d.samples.n(); ++i) {
    const double z = (d.samples.responses()[k] - mu[k]) / phi(k, 0);
    for (std::size_t j = 0; j < d.samples.m(i); ++j, ++k)
      EXPECT_NEAR(d.samples.responses()[k] - mu[k], z * phi(k, 0), 1e-12);
  }
}

TEST(Draw, TwoPointScheme) {
  const auto spec = spec_with(FiniteXi{{1.0}}, 0, 0.1, TwoPointM{2, 10, 0.5});
  const auto d = draw(spec, 40, 10.0 / 3.0, 5);
  EXPECT_NEAR(d.samples.harmonic_mean_m(), 10.0 / 3.0, 1e-12);
  std::size_t low = 0;
  for (std::size_t i = 0; i < 40; ++i) low += d.samples.m(i) == 2 ? 1 : 0;
  EXPECT_EQ(low, 20u);
  try {
    draw(spec, 40, 6, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadScheme);
  }
}

TEST(Draw, ConstantSchemeNeedsIntegerTarget) {
  EXPECT_THROW(draw(spec_with(FiniteXi{{1.0}}, 0, 0.1), 5, 2.5, 1), Error);
}

TEST(Draw, HarmonicBookkeepingAcrossSchemes) {
  for (const MScheme& scheme : {MScheme{ConstantM{}}, MScheme{TwoPointM{3, 7, 0.4}}}) {
    const auto spec = spec_with(FiniteXi{{1.0}}, 0, 0.1, scheme);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const double target = std::holds_alternative<ConstantM>(scheme) ? 6.0 : 4.5;
      const auto d = draw(spec, 30, target, seed);
      double inv = 0.0;
      for (std::size_t i = 0; i < d.samples.n(); ++i) inv += 1.0 / static_cast<double>(d.samples.m(i));
      EXPECT_NEAR(d.samples.harmonic_mean_m(), 30.0 / inv, 1e-12);
    }
  }
}

TEST(Draw, EmpiricalVarianceAtMidpoint) {
  const auto spec = spec_with(PolynomialXi{2.0, 1.0}, 100, 0.0);
  Vector t(1);
  t << 0.5;
  const Matrix paths = draw_paths(*spec, t, 100000, 3);
  const Vector x = paths.col(0);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
  const Matrix phi = brownian().eigenfunctions_at(t).leftCols(100);
  const double expected = (phi.row(0).transpose().cwiseAbs2().cwiseProduct(spec->xi)).sum();
  // Gaussian: Var(s^2) = 2 sigma^4 / (N - 1).
  const double se = expected * std::sqrt(2.0 / static_cast<double>(x.size() - 1));
  EXPECT_NEAR(var, expected, 3.0 * se);
  EXPECT_NEAR(mean, spec->mean.at(t)[0], 3.0 * std::sqrt(expected / 1e5));
}

TEST(Process, VarianceBound) {
  const auto spec = spec_with(PolynomialXi{2.0, 1.0}, 100, 0.0);
  EXPECT_NEAR(spec->variance_bound(), 2.0 * spec->xi.sum(), 1e-14);
  const auto grid = trapezoid_grid(257);
  EXPECT_LE(true_cov_on_grid(*spec, grid).diagonal().maxCoeff(), spec->variance_bound() + 1e-12);
}
