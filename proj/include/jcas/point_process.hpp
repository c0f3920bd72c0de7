#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jcas/errors.hpp"
#include "jcas/rng.hpp"
#include "jcas/special_functions.hpp"
#include "jcas/units.hpp"

namespace jcas {

/// beta-GPP layout parameters. The Gamma scale beta / (pi lambda) is derived.
struct GppParams {
  double density = 0.0;       // m^-2
  double beta = 1.0;
  double region_radius = 0.0; // m

  double radial_scale() const { return beta / (pi * density); }

  void validate() const {
    if (!(density >= 0.0)) throw ConfigError("point process: density must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("point process: beta must be in (0, 1]");
    if (!(region_radius > 0.0)) throw ConfigError("point process: region_radius must be > 0");
  }
};

struct RadialPoint {
  double radius2 = 0.0; // squared distance to the origin, m^2
  double angle = 0.0;   // rad, [0, 2 pi)
  std::size_t index = 0; // Gamma order (beta-GPP) or distance rank (PPP)

  double radius() const { return std::sqrt(radius2); }
  double x() const { return radius() * std::cos(angle); }
  double y() const { return radius() * std::sin(angle); }
};

struct PointSet {
  std::vector<RadialPoint> points;
  std::size_t orders_drawn = 0; // highest Gamma order examined
};

/// Density of B_i ~ Gamma(i, beta / t) at squared distance y.
inline double gamma_radial_pdf(double y, std::size_t order, double beta, double t) {
  if (order == 0) throw std::domain_error("gamma_radial_pdf: order must be >= 1");
  if (!(t > 0.0)) throw std::domain_error("gamma_radial_pdf: t must be positive");
  if (!(beta > 0.0 && beta <= 1.0)) throw std::domain_error("gamma_radial_pdf: beta must be in (0, 1]");
  return gamma_pdf(y, static_cast<double>(order), beta / t);
}

inline constexpr double sampling_tail_tolerance = 1e-6;
inline constexpr std::size_t sampling_order_cap = 1'000'000;

/// Smallest J such that orders past J land inside squared radius r2 with total
/// probability below `tol`.
inline std::size_t sampling_order_count(double r2, double scale, double tol = sampling_tail_tolerance) {
  struct Entry {
    double r2, scale, tol;
    std::size_t j;
  };
  thread_local std::vector<Entry> cache;
  for (const auto& e : cache)
    if (e.r2 == r2 && e.scale == scale && e.tol == tol) return e.j;
  const double y = r2 / scale;
  std::size_t j = static_cast<std::size_t>(std::max(1.0, std::ceil(y)));
  while (j < sampling_order_cap && !(gamma_cdf_tail_sum(r2, j + 1, scale) < tol)) ++j;
  if (cache.size() >= 32) cache.erase(cache.begin());
  cache.push_back({r2, scale, tol, j});
  return j;
}

namespace detail {

inline RadialPoint draw_order(std::size_t i, double scale, Rng& rng, bool& kept, double beta) {
  // Standard Gamma first, then scaled: the draw sequence does not depend on beta or density.
  const double g = std::gamma_distribution<double>(static_cast<double>(i), 1.0)(rng);
  const double keep = uniform01(rng);
  const double ang = uniform01(rng) * two_pi;
  kept = keep < beta;
  return {g * scale, ang, i};
}

} // namespace detail

namespace detail {

/// Draws orders 1..J into the window. `nearest`, when given, tracks the closest
/// retained point over all drawn orders, inside the window or not.
inline PointSet sample_orders(const GppParams& params, Rng& rng, std::optional<RadialPoint>* nearest) {
  params.validate();
  PointSet out;
  if (params.density == 0.0) return out;
  const double scale = params.radial_scale();
  const double r2 = params.region_radius * params.region_radius;
  const std::size_t orders = sampling_order_count(r2, scale);
  for (std::size_t i = 1; i <= orders; ++i) {
    bool kept = false;
    auto p = draw_order(i, scale, rng, kept, params.beta);
    if (!kept) continue;
    if (p.radius2 <= r2) out.points.push_back(p);
    if (nearest && (!*nearest || p.radius2 < (*nearest)->radius2)) *nearest = p;
  }
  out.orders_drawn = orders;
  return out;
}

} // namespace detail

/// beta-GPP restricted to the disk of radius region_radius.
inline PointSet sample_beta_gpp(const GppParams& params, Rng& rng) {
  return detail::sample_orders(params, rng, nullptr);
}

/// Points in the window plus the true nearest retained point, which may lie
/// outside the window. The radial sequence continues past the window until no
/// later order can undercut the nearest point (probability below 1e-9).
struct TierSample {
  PointSet window;
  std::optional<RadialPoint> nearest;
};

inline TierSample sample_beta_gpp_with_nearest(const GppParams& params, Rng& rng) {
  TierSample out;
  out.window = detail::sample_orders(params, rng, &out.nearest);
  if (params.density == 0.0) return out;
  const double scale = params.radial_scale();
  const double r2 = params.region_radius * params.region_radius;
  if (out.nearest && out.nearest->radius2 <= r2) return out;

  std::size_t i = out.window.orders_drawn;
  while (i < sampling_order_cap) {
    if (out.nearest && gamma_cdf_tail_sum(out.nearest->radius2, i + 1, scale) < 1e-9) break;
    ++i;
    bool kept = false;
    auto p = detail::draw_order(i, scale, rng, kept, params.beta);
    if (kept && (!out.nearest || p.radius2 < out.nearest->radius2)) out.nearest = p;
  }
  out.window.orders_drawn = i;
  return out;
}

/// Homogeneous PPP on the disk; points carry their distance rank as index.
inline PointSet sample_ppp(double density, double region_radius, Rng& rng) {
  PointSet out;
  if (!(density > 0.0)) return out;
  const double r2 = region_radius * region_radius;
  std::poisson_distribution<long> count(density * pi * r2);
  const long n = count(rng);
  out.points.reserve(static_cast<std::size_t>(n));
  for (long m = 0; m < n; ++m) {
    const double u = uniform01(rng) * r2;
    const double ang = uniform01(rng) * two_pi;
    out.points.push_back({u, ang, 0});
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const RadialPoint& a, const RadialPoint& b) { return a.radius2 < b.radius2; });
  for (std::size_t m = 0; m < out.points.size(); ++m) out.points[m].index = m + 1;
  return out;
}

/// PPP window plus its nearest point. An empty window puts the nearest point at
/// squared distance r2 + Exp(pi lambda), the PPP void law.
inline TierSample sample_ppp_with_nearest(double density, double region_radius, Rng& rng) {
  TierSample out;
  out.window = sample_ppp(density, region_radius, rng);
  if (!(density > 0.0)) return out;
  if (!out.window.points.empty()) {
    out.nearest = out.window.points.front();
    return out;
  }
  const double e = -std::log1p(-uniform01(rng)) / (pi * density);
  const double ang = uniform01(rng) * two_pi;
  out.nearest = RadialPoint{region_radius * region_radius + e, ang, 1};
  return out;
}

/// Independent thinning; order indices are preserved.
inline PointSet thin(const PointSet& points, double retain_prob, Rng& rng) {
  PointSet out;
  out.orders_drawn = points.orders_drawn;
  for (const auto& p : points.points)
    if (bernoulli(rng, retain_prob)) out.points.push_back(p);
  return out;
}

/// Per-tier nearest point; ties go to the lower order index. Empty tiers give nullopt.
inline std::vector<std::optional<RadialPoint>> nearest_point_per_tier(std::span<const PointSet> tiers) {
  std::vector<std::optional<RadialPoint>> out;
  out.reserve(tiers.size());
  for (const auto& t : tiers) {
    std::optional<RadialPoint> best;
    for (const auto& p : t.points)
      if (!best || p.radius2 < best->radius2 || (p.radius2 == best->radius2 && p.index < best->index)) best = p;
    out.push_back(best);
  }
  return out;
}

/// Law of the nearest retained point of a beta-GPP (or PPP) tier, in squared distance.
///
/// For the beta-GPP, order j is the nearest retained point at x with density
///   beta f_j(x) prod_{i != j} (1 - beta F_i(x)).
class NearestLaw {
public:
  struct Orders {
    std::vector<double> density; // density[j - 1]: order j is nearest at x
    double survival = 1.0;       // P(no retained point within x)
    double residual = 0.0;       // bound on the mass dropped by truncation
    std::size_t truncation = 0;
  };

  NearestLaw() = default;
  NearestLaw(double density, double beta, bool poisson)
    : density_(density), beta_(beta), poisson_(poisson) {
    if (density_ > 0.0 && !poisson_) scale_ = beta_ / (pi * density_);
  }

  static NearestLaw of(const GppParams& p) { return NearestLaw(p.density, p.beta, false); }

  bool empty() const { return !(density_ > 0.0); }
  bool poisson() const { return poisson_; }
  double density() const { return density_; }
  double beta() const { return beta_; }

  Orders orders(double x, double tail_tol = 1e-12) const {
    Orders out;
    if (empty() || x <= 0.0) {
      if (!empty() && x == 0.0) {
        if (poisson_) out.density.push_back(pi * density_);
        else out.density.push_back(beta_ / scale_);
        out.truncation = 1;
      }
      return out;
    }
    if (poisson_) {
      const double rate = pi * density_;
      out.survival = std::exp(-rate * x);
      out.density.push_back(rate * out.survival);
      out.truncation = 1;
      return out;
    }
    const double y = x / scale_;
    if (y > 5000.0) {
      out.survival = 0.0;
      return out;
    }
    std::vector<double> cdf, pdf;
    std::size_t i = 0;
    for (;;) {
      ++i;
      const double order = static_cast<double>(i);
      cdf.push_back(gamma_cdf(x, order, scale_));
      pdf.push_back(gamma_pdf(x, order, scale_));
      if (order > y + 1.0) {
        const double tail = beta_ * gamma_cdf_tail_sum(x, i + 1, scale_);
        if (tail < tail_tol) {
          out.residual = tail;
          break;
        }
      }
      if (i >= max_orders) {
        out.residual = beta_ * gamma_cdf_tail_sum(x, i + 1, scale_);
        if (!(out.residual <= 1e-6))
          throw ConvergenceError("nearest-point law: order truncation did not converge");
        break;
      }
    }
    const std::size_t n = cdf.size();
    std::vector<double> suffix(n + 1, 1.0);
    for (std::size_t m = n; m-- > 0;) suffix[m] = suffix[m + 1] * (1.0 - beta_ * cdf[m]);
    out.density.resize(n);
    double prefix = 1.0;
    for (std::size_t m = 0; m < n; ++m) {
      out.density[m] = beta_ * pdf[m] * prefix * suffix[m + 1];
      prefix *= 1.0 - beta_ * cdf[m];
    }
    out.survival = prefix;
    out.truncation = n;
    return out;
  }

  double pdf(double x) const {
    double s = 0.0;
    for (double d : orders(x).density) s += d;
    return s;
  }

  double cdf(double x) const { return empty() ? 0.0 : 1.0 - orders(x).survival; }

  static constexpr std::size_t max_orders = 10'000;

private:
  double density_ = 0.0;
  double beta_ = 1.0;
  bool poisson_ = false;
  double scale_ = 0.0;
};

/// Density of the nearest retained point's squared distance.
inline double nearest_retained_pdf(double x, const GppParams& params) {
  return NearestLaw::of(params).pdf(x);
}

inline double nearest_retained_cdf(double x, const GppParams& params) {
  return NearestLaw::of(params).cdf(x);
}

} // namespace jcas
