#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "jcas/point_process.hpp"
#include "support/stats.hpp"

using namespace jcas;

namespace {

struct Moments {
  double mean = 0.0, var = 0.0;
};

template <class Draw>
Moments count_moments(int n, double r, Draw draw) {
  double s = 0.0, ss = 0.0;
  for (int t = 0; t < n; ++t) {
    Rng rng = make_stream(42, t, Stream::test);
    const PointSet ps = draw(rng);
    double c = 0.0;
    for (const auto& p : ps.points) c += p.radius2 <= r * r;
    s += c;
    ss += c * c;
  }
  Moments m;
  m.mean = s / n;
  m.var = ss / n - m.mean * m.mean;
  return m;
}

} // namespace

TEST(BetaGpp, IntensityIsPreserved) {
  const double lambda = 20e-6, window = 1000.0, r = 500.0;
  const double expected = lambda * pi * r * r; // 15.7
  for (double beta : {0.3, 0.6, 1.0}) {
    const int n = 4000;
    auto m = count_moments(n, r, [&](Rng& rng) { return sample_beta_gpp({lambda, beta, window}, rng); });
    EXPECT_NEAR(m.mean, expected, 4.0 * std::sqrt(m.var / n)) << "beta " << beta;
  }
}

TEST(BetaGpp, CountVarianceShowsRepulsion) {
  const double lambda = 20e-6, window = 1000.0, r = 500.0;
  const int n = 4000;
  auto v_ppp = count_moments(n, r, [&](Rng& rng) { return sample_ppp(lambda, window, rng); }).var;
  auto v_03 = count_moments(n, r, [&](Rng& rng) { return sample_beta_gpp({lambda, 0.3, window}, rng); }).var;
  auto v_09 = count_moments(n, r, [&](Rng& rng) { return sample_beta_gpp({lambda, 0.9, window}, rng); }).var;
  EXPECT_LT(v_09, v_03);
  EXPECT_LT(v_03, v_ppp);
  EXPECT_NEAR(v_ppp, lambda * pi * r * r, 0.1 * lambda * pi * r * r);
}

TEST(BetaGpp, NearestDistanceMatchesAnalyticLaw) {
  // The window is small enough that the nearest point often lies outside it.
  const GppParams g{1e-6, 0.9, 400.0};
  const NearestLaw law = NearestLaw::of(g);
  const std::size_t n = 10000;
  std::vector<double> x;
  for (std::size_t t = 0; t < n; ++t) {
    Rng rng = make_stream(7, t, Stream::test);
    auto s = sample_beta_gpp_with_nearest(g, rng);
    ASSERT_TRUE(s.nearest.has_value());
    x.push_back(s.nearest->radius2);
  }
  const double d = fixtures::ks_statistic(x, [&](double v) { return law.cdf(v); });
  EXPECT_GT(fixtures::ks_pvalue(d, n), 0.01) << "D = " << d;
}

TEST(Ppp, NearestDistanceIsExponentialInSquaredRadius) {
  const double lambda = 1e-6;
  const std::size_t n = 10000;
  std::vector<double> x;
  for (std::size_t t = 0; t < n; ++t) {
    Rng rng = make_stream(8, t, Stream::test);
    x.push_back(sample_ppp_with_nearest(lambda, 400.0, rng).nearest->radius2);
  }
  const double d = fixtures::ks_statistic(x, [&](double v) { return 1.0 - std::exp(-pi * lambda * v); });
  EXPECT_GT(fixtures::ks_pvalue(d, n), 0.01) << "D = " << d;
}

TEST(NearestLaw, DensityIntegratesToCdf) {
  const NearestLaw law(2e-6, 0.7, false);
  for (double x : {1e4, 1e5, 5e5}) {
    const double bp[] = {0.1 * x, 0.5 * x};
    auto r = integrate([&](double v) { return law.pdf(v); }, 0.0, x, 1e-11, bp);
    EXPECT_NEAR(r.value, law.cdf(x), 1e-9);
  }
}

TEST(NearestLaw, OrderDensitiesSumToPdfAndSurvivalIsConsistent) {
  const NearestLaw law(1e-6, 0.9, false);
  const auto o = law.orders(3e5);
  double s = 0.0;
  for (double d : o.density) s += d;
  EXPECT_NEAR(s, law.pdf(3e5), 1e-15);
  EXPECT_NEAR(1.0 - o.survival, law.cdf(3e5), 1e-15);
  EXPECT_LT(o.residual, 1e-12);
  EXPECT_GT(o.truncation, 1u);
}

TEST(NearestLaw, ApproachesPppAsBetaVanishes) {
  const double lambda = 1e-6;
  const NearestLaw small(lambda, 0.01, false), ppp(lambda, 1.0, true);
  for (double x : {5e4, 2e5, 6e5, 1.5e6}) EXPECT_NEAR(small.cdf(x), ppp.cdf(x), 5e-3) << x;
}

TEST(NearestLaw, RepulsionShrinksVoidProbability) {
  // A repulsive layout leaves fewer large holes around a typical location.
  const double lambda = 1e-6, x = 6e5;
  const double void_ppp = 1.0 - NearestLaw(lambda, 1.0, true).cdf(x);
  const double void_gpp = 1.0 - NearestLaw(lambda, 1.0, false).cdf(x);
  EXPECT_LT(void_gpp, void_ppp);
}

TEST(BetaGpp, DeterministicPerSeedAndParameterPaired) {
  Rng a = make_stream(3, 0, Stream::test), b = make_stream(3, 0, Stream::test);
  auto p = sample_beta_gpp({5e-6, 0.5, 800.0}, a);
  auto q = sample_beta_gpp({5e-6, 0.5, 800.0}, b);
  ASSERT_EQ(p.points.size(), q.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) EXPECT_EQ(p.points[i].radius2, q.points[i].radius2);

  // Draws are standard Gamma variates scaled afterwards, so a density change rescales
  // every shared order by the same factor.
  Rng c = make_stream(3, 1, Stream::test), d = make_stream(3, 1, Stream::test);
  auto sparse = sample_beta_gpp({5e-6, 0.6, 800.0}, c);
  auto dense = sample_beta_gpp({10e-6, 0.6, 800.0}, d);
  std::size_t shared = 0;
  for (const auto& pd : dense.points)
    for (const auto& ps : sparse.points)
      if (pd.index == ps.index) {
        EXPECT_NEAR(ps.radius2 / pd.radius2, 2.0, 1e-12);
        EXPECT_EQ(ps.angle, pd.angle);
        ++shared;
      }
  EXPECT_GT(shared, 0u);
}

TEST(BetaGpp, ValidatesParameters) {
  Rng rng(1);
  EXPECT_THROW(sample_beta_gpp({1e-6, 0.0, 100.0}, rng), ConfigError);
  EXPECT_THROW(sample_beta_gpp({1e-6, 1.5, 100.0}, rng), ConfigError);
  EXPECT_THROW(sample_beta_gpp({-1.0, 0.5, 100.0}, rng), ConfigError);
  EXPECT_TRUE(sample_beta_gpp({0.0, 0.5, 100.0}, rng).points.empty());
}

TEST(SamplingOrderCount, TailBelowTolerance) {
  const double r2 = 400.0 * 400.0, scale = 0.9 / (pi * 4e-6);
  const std::size_t j = sampling_order_count(r2, scale);
  EXPECT_LT(gamma_cdf_tail_sum(r2, j + 1, scale), sampling_tail_tolerance);
  EXPECT_GE(static_cast<double>(j), r2 / scale);
}

TEST(Thin, RetainsExpectedFraction) {
  Rng rng(5);
  PointSet all = sample_ppp(1e-3, 1000.0, rng); // about 3100 points
  PointSet kept = thin(all, 0.25, rng);
  const double n = static_cast<double>(all.points.size());
  EXPECT_NEAR(static_cast<double>(kept.points.size()), 0.25 * n, 4.0 * std::sqrt(n * 0.25 * 0.75));
}

TEST(NearestPerTier, TiesGoToLowerIndexAndEmptyIsNull) {
  PointSet a, b;
  a.points = {{100.0, 0.0, 4}, {100.0, 1.0, 2}, {400.0, 0.0, 1}};
  std::vector<PointSet> tiers = {a, b};
  auto n = nearest_point_per_tier(tiers);
  ASSERT_TRUE(n[0].has_value());
  EXPECT_EQ(n[0]->index, 2u);
  EXPECT_FALSE(n[1].has_value());
}
