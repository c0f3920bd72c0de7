#pragma once

#include <cmath>

#include "jcas/network.hpp"
#include "jcas/rng.hpp"
#include "jcas/units.hpp"

namespace jcas {

/// Bounded path loss 1 / (eps + d^a).
inline double pathloss(double dist, const ChannelParams& c) {
  return 1.0 / (c.pathloss_offset + std::pow(dist, c.pathloss_exponent));
}

/// Same law written in squared distance: 1 / (eps + u^(a/2)).
inline double pathloss_sq(double u, const ChannelParams& c) {
  return 1.0 / (c.pathloss_offset + std::pow(u, 0.5 * c.pathloss_exponent));
}

/// Gamma(shape, scale); shape 1 by inversion of a single uniform.
inline double sample_gamma(double shape, double scale, Rng& rng) {
  if (shape == 1.0) return -scale * std::log1p(-uniform01(rng));
  return std::gamma_distribution<double>(shape, scale)(rng);
}

/// Nakagami-m power gain, Gamma(nu, 1/nu).
inline double sample_fading_power(int nu, Rng& rng) {
  return sample_gamma(nu, 1.0 / nu, rng);
}

/// Residual self-interference gain, Gamma(mu, sigma_SI^2 / mu). Draws even when sigma_SI^2 = 0.
inline double sample_si_power_gain(const ChannelParams& c, Rng& rng) {
  const double g = sample_gamma(c.si_mu, 1.0, rng);
  return c.si_var == 0.0 ? 0.0 : g * c.si_var / c.si_mu;
}

enum class LinkState { los, nlos };

/// LoS ball: LoS with probability p_L inside R, never outside. Always consumes one draw.
inline LinkState los_indicator(double dist, const ChannelParams& c, Rng& rng) {
  const bool hit = bernoulli(rng, c.los_prob);
  return (dist <= c.los_radius && hit) ? LinkState::los : LinkState::nlos;
}

/// (phi / 2 pi)^2 p_L chi
inline double interferer_activity_prob(const ChannelParams& c, double jcas_fraction) {
  const double sector = c.beamwidth / two_pi;
  return sector * sector * c.los_prob * jcas_fraction;
}

/// min{rho (eps + d^a)^eps_pc, P_k}
inline double power_control(double d, double tier_power, const ChannelParams& c) {
  const double inv = c.pc_rho * std::pow(c.pathloss_offset + std::pow(d, c.pathloss_exponent), c.pc_fraction);
  return std::min(inv, tier_power);
}

/// P_k G^2 (A l / 4 pi) h L(r)^2
inline double radar_echo_power(double r, double tier_power, double fading, const ChannelParams& c) {
  const double l = pathloss(r, c);
  return tier_power * c.mainlobe_gain * c.mainlobe_gain * c.rcs * c.wavelength_factor() / (4.0 * pi) * fading * l * l;
}

/// Radar echo constant P_k G^2 A l / (4 pi) without fading and path loss.
inline double radar_echo_gain(double tier_power, const ChannelParams& c) {
  return tier_power * c.mainlobe_gain * c.mainlobe_gain * c.rcs * c.wavelength_factor() / (4.0 * pi);
}

} // namespace jcas
