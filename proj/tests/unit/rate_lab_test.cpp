#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "specfda/lab/config.hpp"
#include "specfda/lab/experiment.hpp"
#include "specfda/lab/filter_suite.hpp"
#include "specfda/lab/report.hpp"

using namespace specfda;
using namespace specfda::lab;

namespace {

std::vector<std::pair<double, double>> power_law(double scale, double slope) {
  std::vector<std::pair<double, double>> pts;
  for (double x : {125.0, 250.0, 500.0, 1000.0, 2000.0}) pts.emplace_back(x, scale * std::pow(x, slope));
  return pts;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

// Small, fast mean experiment.
const char* kSmallMean =
    "task = mean\n"
    "kernel = brownian\n"
    "filter = tikhonov\n"
    "h_rule = polynomial:1\n"
    "xi_rule = polynomial:2:0.1\n"
    "sigma0 = 0.3\n"
    "n_list = 10,20,40,80\n"
    "m_list = 3\n"
    "replications = 4\n"
    "seed = 9\n"
    "grid_nodes = 129\n";

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (const char* old = std::getenv("RATE_LAB_THREADS")) saved_ = old;
    setenv("RATE_LAB_THREADS", value, 1);
  }
  ~ThreadsEnv() {
    if (saved_.empty()) unsetenv("RATE_LAB_THREADS");
    else setenv("RATE_LAB_THREADS", saved_.c_str(), 1);
  }

 private:
  std::string saved_;
};

}  // namespace

TEST(FitSlope, ExactPowerLaws) {
  const SlopeFit a = fit_slope(power_law(1.0, -1.0 / 3.0));
  EXPECT_NEAR(a.slope, -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(a.r2, 1.0, 1e-12);
  const SlopeFit b = fit_slope(power_law(2.0, -0.5));
  EXPECT_NEAR(b.slope, -0.5, 1e-12);
  EXPECT_NEAR(b.intercept, std::log(2.0), 1e-12);
  const SlopeFit c = fit_slope(power_law(0.7, 0.0));
  EXPECT_NEAR(c.slope, 0.0, 1e-15);
  EXPECT_EQ(c.r2, 1.0);
}

TEST(FitSlope, RecoversSlopeUnderMultiplicativeNoise) {
  // Property: for log-symmetric noise the OLS slope is unbiased; over many
  // draws the average slope approaches the truth.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 0.05);
  double total = 0.0;
  const int draws = 400;
  for (int d = 0; d < draws; ++d) {
    auto pts = power_law(3.0, -0.4);
    for (auto& p : pts) p.second *= std::exp(z(rng));
    total += fit_slope(pts).slope;
  }
  EXPECT_NEAR(total / draws, -0.4, 0.01);
}

TEST(FitSlope, DegenerateInputs) {
  auto pts = power_law(1.0, -0.5);
  pts.pop_back();
  pts.pop_back();
  EXPECT_EQ(code_of([&] { fit_slope(pts); }), ErrorCode::DegenerateCells);
  auto dup = power_law(1.0, -0.5);
  dup[1].first = dup[0].first;
  EXPECT_EQ(code_of([&] { fit_slope(dup); }), ErrorCode::DegenerateCells);
  auto zero = power_law(1.0, -0.5);
  zero[2].second = 0.0;
  EXPECT_EQ(code_of([&] { fit_slope(zero); }), ErrorCode::DegenerateCells);
}

TEST(Summary, QuantilesAndSingleReplication) {
  EXPECT_DOUBLE_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 0.25), 1.75);
  CellResult c;
  c.errors = {0.3};
  summarize(c);
  EXPECT_EQ(c.median, 0.3);
  EXPECT_EQ(c.iqr, 0.0);
}

TEST(Exponents, TheoryValues) {
  EXPECT_NEAR(mean_rate_exponent(0.5, 2.0, kInfinity), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(mean_rate_exponent(3.0, 2.0, kInfinity), -6.0 / 13.0, 1e-15);
  EXPECT_NEAR(mean_rate_exponent(3.0, 2.0, 1.0), -2.0 / 5.0, 1e-15);
  EXPECT_NEAR(mean_rate_exponent(0.5, 2.0, 1.0), mean_rate_exponent(0.5, 2.0, kInfinity), 0.0);
  EXPECT_NEAR(cov_rate_exponent(0.5, 2.0, 1.0), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(phase_target(0.25, -1.0 / 3.0), -1.25 / 3.0, 1e-15);
  EXPECT_EQ(phase_target(1.0, -1.0 / 3.0), -0.5);
  // At gamma* = 1/(2rb) both terms give -1/2.
  EXPECT_NEAR(phase_target(0.5, -1.0 / 3.0), -0.5, 1e-15);
  EXPECT_EQ(m_for_gamma(16, 0.5), 4u);
  EXPECT_EQ(m_for_gamma(25, 0.25), 3u);
  EXPECT_EQ(m_for_gamma(40, 1.0), 40u);
}

TEST(Config, ParsesKeysCommentsAndLists) {
  const auto c = parse_config_text(
      "# comment\n\ntask = covariance\nkernel = matern:1.5:0.3\nn_list = 25, 50,100\n"
      "m_list = 6\nlambda_policy = gridcv:0.1;0.01\ngamma_list = 0.25,1\n"
      "gamma_n_lists = 25,50;8,16\ninclude_diagonal = true\nseed = 7\n");
  EXPECT_EQ(c.task, Task::Covariance);
  EXPECT_EQ(c.n_list, (std::vector<std::size_t>{25, 50, 100}));
  EXPECT_EQ(c.lambda_policy.kind, LambdaPolicy::Kind::GridCV);
  EXPECT_EQ(c.lambda_policy.grid, (std::vector<double>{0.1, 0.01}));
  ASSERT_EQ(c.gamma_n_lists.size(), 2u);
  EXPECT_EQ(c.gamma_n_lists[1], (std::vector<std::size_t>{8, 16}));
  EXPECT_TRUE(c.include_diagonal);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.source.size(), 9u);
  EXPECT_EQ(c.source[1].second, "matern:1.5:0.3");
}

TEST(Config, SlopeToleranceDefaultsByTask) {
  EXPECT_EQ(parse_config_text("task = mean\n").slope_tolerance, defaults::kSlopeTolerance);
  EXPECT_EQ(parse_config_text("task = covariance\n").slope_tolerance, defaults::kCovSlopeTolerance);
  EXPECT_EQ(parse_config_text("task = covariance\nslope_tolerance = 0.1\n").slope_tolerance, 0.1);
}

TEST(Config, Errors) {
  for (const char* bad : {"nonsense = 1\n", "alpha = 1\nalpha = 2\n", "alpha\n", "alpha = x\n",
                          "alpha = 0\n", "replications = 0\n", "b = 1\n", "kernel = cubic\n",
                          "filter = ridge\n", "lambda_policy = fixed:-1\n", "n_list = 1\n",
                          "task = covariance\nm_list = 1\n", "gamma_list = 0.5\ngamma_n_lists = 1,2;3,4\n",
                          "kl_truncation = 300\n", "include_diagonal = maybe\n", "m_list = 2.5,\n"})
    EXPECT_EQ(code_of([&] { parse_config_text(bad); }), ErrorCode::BadConfig) << bad;
  EXPECT_EQ(code_of([] { load_config("/nonexistent/x.cfg"); }), ErrorCode::Io);
}

TEST(Config, KernelAndRuleParsers) {
  EXPECT_TRUE(parse_kernel("brownian").is_brownian());
  EXPECT_EQ(std::get<Gaussian>(parse_kernel("gaussian:0.2").family()).bandwidth, 0.2);
  EXPECT_EQ(std::get<Matern>(parse_kernel("matern:2.5:0.1").family()).smoothness, 2.5);
  EXPECT_THROW(parse_kernel("gaussian"), Error);
  EXPECT_TRUE(std::holds_alternative<FixedUnit>(parse_h_rule("unit")));
  EXPECT_EQ(std::get<ExplicitH>(parse_h_rule("explicit:1;0.5")).values.size(), 2u);
  EXPECT_EQ(std::get<PolynomialXi>(parse_xi_rule("polynomial:2.6:0.2")).scale, 0.2);
  EXPECT_TRUE(std::get<FiniteXi>(parse_xi_rule("none")).values.empty());
  EXPECT_EQ(std::get<TwoPointM>(parse_m_scheme("twopoint:2:10:0.5")).high, 10u);
  EXPECT_EQ(parse_eta_policy("true-mean").kind, EtaPolicy::Kind::TrueMean);
}

TEST(RunCell, NoiselessDenseMeanIsAccurate) {
  // sigma0 = 0, xi = 0, n = m = 50, alpha = 1/2.
  const auto c = parse_config_text(
      "task = mean\nfilter = cutoff\nh_rule = unit\nxi_rule = none\nsigma0 = 0\n"
      "replications = 1\nn_list = 50\nm_list = 50\n");
  const Setting s = make_setting(c);
  const CellResult cell = run_cell(s, 50, 50.0, replication_seeds(c));
  ASSERT_TRUE(cell.ok) << cell.reason;
  EXPECT_LE(cell.median, 1e-2);
  EXPECT_EQ(cell.iqr, 0.0);
  EXPECT_EQ(cell.errors.size(), 1u);
}

TEST(RunCell, DeterministicAcrossRerunsAndThreadCounts) {
  const auto c = parse_config_text(kSmallMean);
  const Setting s = make_setting(c);
  CellResult one, three;
  {
    ThreadsEnv env("1");
    one = run_cell(s, 40, 3.0, replication_seeds(c));
  }
  {
    ThreadsEnv env("3");
    three = run_cell(s, 40, 3.0, replication_seeds(c));
  }
  EXPECT_EQ(one.errors, three.errors);
  EXPECT_EQ(one.median, three.median);
  const CellResult again = run_cell(s, 40, 3.0, replication_seeds(c));
  EXPECT_EQ(one.errors, again.errors);
}

TEST(RunCell, EstimatorErrorAbortsCellWithReason) {
  const auto c = parse_config_text(
      "task = covariance\nfilter = tikhonov\nh_rule = zero\nxi_rule = polynomial:2.6\n"
      "n_list = 20\nm_list = 4\nreplications = 2\npair_cap = 10\n");
  const CellResult cell = run_cell(make_setting(c), 20, 4.0, replication_seeds(c));
  EXPECT_FALSE(cell.ok);
  EXPECT_NE(cell.reason.find("PairCapExceeded"), std::string::npos);
  EXPECT_TRUE(std::isnan(cell.median));
}

TEST(RunCell, CovarianceCellAndBandRegion) {
  const char* base =
      "task = covariance\nfilter = tikhonov\nh_rule = zero\nxi_rule = polynomial:2.6\n"
      "sigma0 = 0.2\nn_list = 30\nm_list = 4\nreplications = 2\ngrid2_nodes = 33\n";
  const auto full = parse_config_text(base);
  const auto band = parse_config_text(std::string(base) + "error_band = 0.1\n");
  const Setting sf = make_setting(full);
  const Setting sb = make_setting(band);
  // The band mask keeps |s - t| <= 0.1: on a 33-node grid, offsets up to 3 steps.
  EXPECT_EQ(sb.region(0, 3), 1.0);
  EXPECT_EQ(sb.region(0, 4), 0.0);
  const CellResult a = run_cell(sf, 30, 4.0, replication_seeds(full));
  const CellResult b = run_cell(sb, 30, 4.0, replication_seeds(band));
  ASSERT_TRUE(a.ok && b.ok);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_LT(b.errors[r], a.errors[r]);
}

TEST(RunRate, SmallSweepReport) {
  const auto c = parse_config_text(kSmallMean);
  const RateReport r = run_rate(c);
  ASSERT_EQ(r.cells.size(), 4u);
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_NEAR(r.target, -1.0 / 3.0, 1e-15);  // r = min(1/2, 1)
  const ReportFiles a = render(r);
  const ReportFiles b = render(run_rate(c));
  EXPECT_EQ(a.report_json, b.report_json);
  EXPECT_EQ(a.cells_csv, b.cells_csv);
  EXPECT_EQ(a.plotdata_csv, b.plotdata_csv);
  EXPECT_EQ(a.cells_csv.substr(0, a.cells_csv.find('\n')), "n,m,nm,median_err,iqr");
  const auto doc = Json::parse(a.report_json);
  EXPECT_EQ(doc["report"], "rate");
  EXPECT_EQ(doc["cells"].size(), 4u);
  EXPECT_EQ(doc["config"]["seed"], "9");
}

TEST(PhaseScan, SingleGammaGivesOneRowWithoutCrossing) {
  const auto c = parse_config_text(std::string(kSmallMean) + "gamma_list = 0.5\n");
  const PhaseReport r = phase_transition_scan(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.crossing.has_value());
  EXPECT_NEAR(r.gamma_star, 0.5, 1e-15);
  EXPECT_EQ(r.rows[0].regime, "boundary");
  EXPECT_EQ(r.rows[0].cells[2].m, 7.0);  // ceil(sqrt(40))
  EXPECT_TRUE(to_json(r)["crossing"].is_null());
}

TEST(Saturation, IdenticalArmsGiveUnitRatios) {
  const auto c = parse_config_text(std::string(kSmallMean) + "compare_filter = tikhonov\n");
  const SaturationReport r = saturation_compare(c);
  for (const auto& pc : r.cells)
    for (double ratio : pc.ratios) EXPECT_EQ(ratio, 1.0);
  EXPECT_EQ(r.largest_cell_fraction, 1.0);
  EXPECT_EQ(r.first_fit->slope, r.second_fit->slope);
}

TEST(Saturation, ExponentsFollowQualification) {
  auto c = parse_config_text(std::string(kSmallMean) + "compare_filter = cutoff\n");
  c.alpha = 3.0;
  c.replications = 1;
  const SaturationReport r = saturation_compare(c);
  EXPECT_NEAR(r.first_exponent, -0.4, 1e-15);
  EXPECT_NEAR(r.second_exponent, -6.0 / 13.0, 1e-15);
}

TEST(FilterSuite, AllFamiliesPassWithWitness) {
  const FilterSuite s = run_filter_suite();
  EXPECT_TRUE(s.pass());
  EXPECT_EQ(s.reports.size(), 4u);
  EXPECT_GT(s.tikhonov_p2_envelope, 10.0);
}
