#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "jcas/network.hpp"

namespace jcas {

/// Binary cooperation weight from squared distances: r_min / r > varsigma.
/// The closest cooperator always keeps its weight.
inline bool fusion_weight(double u, double u_min, double varsigma) {
  return u <= u_min || varsigma * varsigma * u < u_min;
}

/// P(at least kappa successes) for independent, non-identical Bernoulli trials.
inline double poisson_binomial_tail(std::span<const double> p, int kappa) {
  std::vector<double> dist(p.size() + 1, 0.0);
  dist[0] = 1.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t n = k + 1; n-- > 0;) {
      dist[n + 1] += dist[n] * p[k];
      dist[n] *= 1.0 - p[k];
    }
  double tail = 0.0;
  for (std::size_t n = static_cast<std::size_t>(std::max(kappa, 0)); n < dist.size(); ++n) tail += dist[n];
  return tail;
}

/// Outcome masses of one tier across two slots. `excluded` covers a zero weight.
/// For a single slot leave `hit_first` and `hit_second` at zero.
struct TierOutcome {
  double excluded = 0.0;
  double miss_both = 0.0;
  double hit_first = 0.0;  // detected in the first slot only
  double hit_second = 0.0; // detected in the second slot only
  double hit_both = 0.0;
};

/// Probability that the fused decision succeeds in both slots, over independent tiers.
/// Votes are counted among included tiers only; a rule needs its effective kappa
/// out of the included count.
inline double fused_joint_probability(std::span<const TierOutcome> tiers, const Fusion& fusion) {
  const std::size_t k = tiers.size();
  const std::size_t n = k + 1;
  std::vector<double> dp(n * n * n, 0.0), next(n * n * n);
  auto at = [n](std::size_t a, std::size_t b, std::size_t c) { return (a * n + b) * n + c; };
  dp[at(0, 0, 0)] = 1.0;
  for (std::size_t t = 0; t < k; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    const auto& o = tiers[t];
    for (std::size_t a = 0; a <= t; ++a)
      for (std::size_t b = 0; b <= a; ++b)
        for (std::size_t c = 0; c <= a; ++c) {
          const double m = dp[at(a, b, c)];
          if (m == 0.0) continue;
          next[at(a, b, c)] += m * o.excluded;
          next[at(a + 1, b, c)] += m * o.miss_both;
          next[at(a + 1, b + 1, c)] += m * o.hit_first;
          next[at(a + 1, b, c + 1)] += m * o.hit_second;
          next[at(a + 1, b + 1, c + 1)] += m * o.hit_both;
        }
    dp.swap(next);
  }
  double out = 0.0;
  for (std::size_t a = 1; a < n; ++a) {
    const auto need = static_cast<std::size_t>(fusion.required_votes(static_cast<int>(a)));
    for (std::size_t b = need; b <= a; ++b)
      for (std::size_t c = need; c <= a; ++c) out += dp[at(a, b, c)];
  }
  return out;
}

/// Single-slot fused detection: each tier is included with probability
/// `included[k]` and detects with `hit[k]` (a joint mass, not conditional).
inline double fused_probability(std::span<const double> included, std::span<const double> hit, const Fusion& fusion) {
  std::vector<TierOutcome> t(included.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].excluded = 1.0 - included[k];
    t[k].hit_both = hit[k];
    t[k].miss_both = included[k] - hit[k];
  }
  return fused_joint_probability(t, fusion);
}

} // namespace jcas
