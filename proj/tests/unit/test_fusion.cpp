#include <vector>

#include <gtest/gtest.h>

#include "jcas/fusion.hpp"

using namespace jcas;

namespace {

/// Enumerates inclusion and hit patterns for independent tiers.
double brute_fused(const std::vector<double>& inc, const std::vector<double>& hit, const Fusion& f) {
  const std::size_t k = inc.size();
  double total = 0.0;
  std::size_t states = 1;
  for (std::size_t i = 0; i < k; ++i) states *= 3;
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t code = s;
    double p = 1.0;
    int included = 0, votes = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const int st = static_cast<int>(code % 3); // 0 excluded, 1 included miss, 2 included hit
      code /= 3;
      if (st == 0) p *= 1.0 - inc[i];
      if (st == 1) p *= inc[i] - hit[i];
      if (st == 2) p *= hit[i];
      included += st > 0;
      votes += st == 2;
    }
    if (included > 0 && votes >= f.required_votes(included)) total += p;
  }
  return total;
}

} // namespace

TEST(Fusion, RequiredVotes) {
  Fusion f;
  f.rule = FusionRule::or_rule;
  EXPECT_EQ(f.required_votes(3), 1);
  f.rule = FusionRule::and_rule;
  EXPECT_EQ(f.required_votes(3), 3);
  f.rule = FusionRule::majority;
  EXPECT_EQ(f.required_votes(3), 2);
  EXPECT_EQ(f.required_votes(2), 1);
  EXPECT_EQ(f.required_votes(4), 2);
  f.rule = FusionRule::k_out_of_n;
  f.kappa = 3;
  EXPECT_EQ(f.required_votes(2), 2);
  EXPECT_EQ(f.required_votes(0), 1);
}

TEST(Fusion, WeightKeepsClosestAndCutsFarOnes) {
  EXPECT_TRUE(fusion_weight(100.0, 100.0, 0.9));
  EXPECT_TRUE(fusion_weight(400.0, 100.0, 0.4));  // r_min / r = 0.5 > 0.4
  EXPECT_FALSE(fusion_weight(400.0, 100.0, 0.6)); // 0.5 < 0.6
  EXPECT_TRUE(fusion_weight(1e12, 1.0, 0.0));
}

TEST(PoissonBinomial, MatchesEnumeration) {
  const std::vector<double> p = {0.1, 0.5, 0.8, 0.33};
  for (int kappa = 0; kappa <= 5; ++kappa) {
    double brute = 0.0;
    for (int m = 0; m < 16; ++m) {
      double q = 1.0;
      int c = 0;
      for (int i = 0; i < 4; ++i) {
        const bool on = (m >> i) & 1;
        q *= on ? p[i] : 1.0 - p[i];
        c += on;
      }
      if (c >= kappa) brute += q;
    }
    EXPECT_NEAR(poisson_binomial_tail(p, kappa), brute, 1e-15) << kappa;
  }
}

TEST(FusedProbability, MatchesEnumerationForEveryRule) {
  const std::vector<double> inc = {1.0, 0.6, 0.3};
  const std::vector<double> hit = {0.7, 0.4, 0.1};
  for (auto rule : {FusionRule::or_rule, FusionRule::majority, FusionRule::and_rule, FusionRule::k_out_of_n}) {
    Fusion f;
    f.rule = rule;
    f.kappa = 2;
    EXPECT_NEAR(fused_probability(inc, hit, f), brute_fused(inc, hit, f), 1e-15) << to_string(rule);
  }
}

TEST(FusedJoint, IndependentSlotsFactorUnderFullInclusion) {
  // With every tier included and slot outcomes independent per tier, the joint is the product.
  const std::vector<double> p = {0.7, 0.4, 0.2};
  std::vector<TierOutcome> t(3);
  for (std::size_t k = 0; k < 3; ++k) {
    t[k].hit_both = p[k] * p[k];
    t[k].hit_first = t[k].hit_second = p[k] * (1.0 - p[k]);
    t[k].miss_both = (1.0 - p[k]) * (1.0 - p[k]);
  }
  Fusion f;
  f.rule = FusionRule::majority;
  const double single = poisson_binomial_tail(p, 2);
  EXPECT_NEAR(fused_joint_probability(t, f), single * single, 1e-15);
}

TEST(FusedProbability, RuleOrdering) {
  const std::vector<double> inc = {1.0, 0.8, 0.5};
  const std::vector<double> hit = {0.6, 0.5, 0.2};
  Fusion o, m, a;
  o.rule = FusionRule::or_rule;
  m.rule = FusionRule::majority;
  a.rule = FusionRule::and_rule;
  EXPECT_GT(fused_probability(inc, hit, o), fused_probability(inc, hit, m));
  EXPECT_GT(fused_probability(inc, hit, m), fused_probability(inc, hit, a));
}
