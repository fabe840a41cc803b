#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "specfda/mean.hpp"
#include "specfda/sample_set.hpp"

using namespace specfda;

namespace {

SampleSet random_samples(std::mt19937_64& rng, std::size_t n, std::size_t max_m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> mdist(1, max_m);
  std::vector<Curve> curves(n);
  for (auto& c : curves) {
    const std::size_t m = mdist(rng);
    for (std::size_t j = 0; j < m; ++j) {
      c.t.push_back(u(rng));
      c.y.push_back(z(rng));
    }
  }
  return SampleSet(std::move(curves));
}

}  // namespace

TEST(SampleSet, Validation) {
  EXPECT_THROW(SampleSet(std::vector<Curve>{}), Error);
  EXPECT_THROW(SampleSet({Curve{{}, {}}}), Error);
  EXPECT_THROW(SampleSet({Curve{{0.5}, {1.0, 2.0}}}), Error);
  try {
    SampleSet({Curve{{1.5}, {1.0}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfDomain);
  }
  EXPECT_THROW(SampleSet({Curve{{0.5}, {NAN}}}), Error);
  EXPECT_NO_THROW(SampleSet({Curve{{0.0, 1.0}, {1.0, 2.0}}}));
}

TEST(SampleSet, HarmonicMeanCache) {
  const SampleSet s({Curve{{0.1, 0.2}, {0, 0}}, Curve{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, std::vector<double>(10, 0.0)}});
  EXPECT_NEAR(s.harmonic_mean_m(), 10.0 / 3.0, 1e-12);
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const auto r = random_samples(rng, 1 + rep % 17, 9);
    double inv = 0.0;
    for (std::size_t i = 0; i < r.n(); ++i) inv += 1.0 / static_cast<double>(r.m(i));
    EXPECT_NEAR(r.harmonic_mean_m(), static_cast<double>(r.n()) / inv, 1e-12);
  }
}

TEST(SampleSet, FlatteningOrder) {
  const SampleSet s({Curve{{0.1, 0.2}, {1, 2}}, Curve{{0.3}, {3}}});
  EXPECT_EQ(s.total_points(), 3u);
  EXPECT_EQ(s.points()[2], 0.3);
  EXPECT_EQ(s.responses()[1], 2.0);
  const auto swapped = s.with_responses(Vector::Constant(3, 7.0));
  EXPECT_EQ(swapped.responses()[0], 7.0);
  EXPECT_EQ(swapped.points(), s.points());
}

TEST(SampleCsv, RoundTripIsExact) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_samples(rng, 1 + rep, 6);
    std::stringstream buf;
    write_sample_csv(s, buf);
    const auto back = read_sample_csv(buf);
    ASSERT_EQ(back.n(), s.n());
    EXPECT_EQ(back.points(), s.points());
    EXPECT_EQ(back.responses(), s.responses());
  }
}

TEST(SampleCsv, HeaderBomAndOrdering) {
  std::stringstream good("\xEF\xBB\xBF" "curve_id,t,y\r\n5,0.5,1\n2,0.25,2\n5,0.75,3\n");
  const auto s = read_sample_csv(good);
  ASSERT_EQ(s.n(), 2u);
  EXPECT_EQ(s.m(0), 1u);
  EXPECT_EQ(s.curves()[0].y[0], 2.0);
  EXPECT_EQ(s.curves()[1].t[1], 0.75);

  std::stringstream no_header("0,0.5,1\n");
  EXPECT_THROW(read_sample_csv(no_header), Error);
  std::stringstream bad_number("curve_id,t,y\n0,abc,1\n");
  EXPECT_THROW(read_sample_csv(bad_number), Error);
  std::stringstream bad_fields("curve_id,t,y\n0,0.5\n");
  EXPECT_THROW(read_sample_csv(bad_fields), Error);
  std::stringstream out_of_domain("curve_id,t,y\n0,1.5,1\n");
  EXPECT_THROW(read_sample_csv(out_of_domain), Error);
}

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(AssembleWeight, Examples) {
  const SampleSet one({Curve{{0.2, 0.4}, {0, 0}}});
  const Vector w1 = assemble_weight(one);
  EXPECT_DOUBLE_EQ(w1[0], 0.5);
  EXPECT_DOUBLE_EQ(w1[1], 0.5);
  const SampleSet two({Curve{{0.2}, {0}}, Curve{{0.4}, {0}}});
  const Vector w2 = assemble_weight(two);
  EXPECT_DOUBLE_EQ(w2[0], 0.5);
  EXPECT_DOUBLE_EQ(w2[1], 0.5);
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep)
    EXPECT_NEAR(assemble_weight(random_samples(rng, 1 + rep % 13, 8)).sum(), 1.0, 1e-14);
}
