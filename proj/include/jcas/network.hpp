#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "jcas/errors.hpp"
#include "jcas/units.hpp"

namespace jcas {

/// One tier of base stations. All quantities SI-linear.
struct TierConfig {
  double density = 0.0;       // BSs per m^2
  double power = 0.0;         // maximum transmit power P_k, W
  double beta = 1.0;          // repulsion, (0, 1]
  double jcas_fraction = 0.0; // share of BSs that also serve downlink traffic
  bool poisson = false;       // PPP layout instead of beta-GPP
};

/// Channel, antenna, blockage, power-control and self-interference parameters.
struct ChannelParams {
  double pathloss_exponent = 4.0; // a > 2
  double pathloss_offset = 1.0;   // bounded path-loss offset, > 0
  int nakagami_nu = 2;
  double los_prob = 0.7;
  double los_radius = 400.0;      // m
  double beamwidth = pi / 6.0;    // rad
  double mainlobe_gain = 10.0;    // linear
  double carrier_freq = 30e9;     // Hz
  double rcs = 10.0;              // linear radar cross-section
  double noise_var = 1e-6;        // W
  int si_mu = 4;
  double si_var = 1e-6;           // mean residual SI gain, linear
  double pc_rho = 1e-4;           // W
  double pc_fraction = 0.9;       // power-control exponent in [0, 1]
  double blockage_density = 0.0;  // per m^2
  double object_prob = 1.0;
  double serving_distance = 10.0; // m, <= los_radius

  /// (c / 4 pi f)^2
  double wavelength_factor() const {
    const double x = speed_of_light / (4.0 * pi * carrier_freq);
    return x * x;
  }
};

enum class FusionRule { or_rule, majority, and_rule, k_out_of_n };

inline std::string_view to_string(FusionRule r) {
  switch (r) {
  case FusionRule::or_rule: return "OR";
  case FusionRule::majority: return "MAJORITY";
  case FusionRule::and_rule: return "AND";
  case FusionRule::k_out_of_n: return "K_OUT_OF_N";
  }
  return "?";
}

inline FusionRule parse_fusion_rule(std::string_view s) {
  if (s == "OR") return FusionRule::or_rule;
  if (s == "MAJORITY") return FusionRule::majority;
  if (s == "AND") return FusionRule::and_rule;
  if (s == "K_OUT_OF_N") return FusionRule::k_out_of_n;
  throw ConfigError("unknown fusion rule '" + std::string(s) + "'");
}

struct Fusion {
  FusionRule rule = FusionRule::or_rule;
  int kappa = 1;         // only read for K_OUT_OF_N
  double varsigma = 0.0; // weight fraction; 0 keeps every cooperator

  /// Votes required among `included` cooperators.
  int required_votes(int included) const {
    if (included <= 0) return 1;
    switch (rule) {
    case FusionRule::or_rule: return 1;
    case FusionRule::and_rule: return included;
    case FusionRule::majority: return (included + 1) / 2;
    case FusionRule::k_out_of_n: return std::max(1, std::min(kappa, included));
    }
    return 1;
  }
};

struct NetworkConfig {
  std::vector<TierConfig> tiers;
  ChannelParams channel;
  Fusion fusion;

  std::size_t tier_count() const { return tiers.size(); }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    const auto& c = channel;
    if (tiers.empty()) out.emplace_back("tiers: at least one tier is required");
    for (std::size_t k = 0; k < tiers.size(); ++k) {
      const auto& t = tiers[k];
      const std::string p = "tiers[" + std::to_string(k) + "].";
      if (!(t.density >= 0.0)) out.push_back(p + "density must be >= 0");
      if (!(t.power > 0.0)) out.push_back(p + "power must be > 0");
      if (!t.poisson && !(t.beta > 0.0 && t.beta <= 1.0)) out.push_back(p + "beta must be in (0, 1]");
      if (!(t.jcas_fraction >= 0.0 && t.jcas_fraction <= 1.0)) out.push_back(p + "jcas_fraction must be in [0, 1]");
      if (k > 0 && !(tiers[k - 1].power > t.power))
        out.push_back(p + "power must be strictly below tier " + std::to_string(k - 1) + " power");
    }
    if (!(c.pathloss_exponent > 2.0)) out.emplace_back("channel.pathloss_exponent must be > 2");
    if (!(c.pathloss_offset > 0.0)) out.emplace_back("channel.pathloss_offset must be > 0");
    if (c.nakagami_nu < 1 || c.nakagami_nu > 30) out.emplace_back("channel.nakagami_nu must be an integer in [1, 30]");
    if (!(c.los_prob >= 0.0 && c.los_prob <= 1.0)) out.emplace_back("channel.los_prob must be in [0, 1]");
    if (!(c.los_radius > 0.0)) out.emplace_back("channel.los_radius must be > 0");
    if (!(c.beamwidth > 0.0 && c.beamwidth <= two_pi)) out.emplace_back("channel.beamwidth must be in (0, 2 pi]");
    if (!(c.mainlobe_gain > 0.0)) out.emplace_back("channel.mainlobe_gain must be > 0");
    if (!(c.carrier_freq > 0.0)) out.emplace_back("channel.carrier_freq must be > 0");
    if (!(c.rcs > 0.0)) out.emplace_back("channel.rcs must be > 0");
    if (!(c.noise_var > 0.0)) out.emplace_back("channel.noise_var must be > 0");
    if (c.si_mu < 1) out.emplace_back("channel.si_mu must be >= 1");
    if (!(c.si_var >= 0.0)) out.emplace_back("channel.si_var must be >= 0");
    if (!(c.pc_rho > 0.0)) out.emplace_back("channel.pc_rho must be > 0");
    if (!(c.pc_fraction >= 0.0 && c.pc_fraction <= 1.0)) out.emplace_back("channel.pc_fraction must be in [0, 1]");
    if (!(c.blockage_density >= 0.0)) out.emplace_back("channel.blockage_density must be >= 0");
    if (!(c.object_prob >= 0.0 && c.object_prob <= 1.0)) out.emplace_back("channel.object_prob must be in [0, 1]");
    if (!(c.serving_distance >= 0.0 && c.serving_distance <= c.los_radius))
      out.emplace_back("channel.serving_distance must be in [0, los_radius]");
    if (!(fusion.varsigma >= 0.0 && fusion.varsigma <= 1.0)) out.emplace_back("fusion.varsigma must be in [0, 1]");
    if (fusion.rule == FusionRule::k_out_of_n &&
        (fusion.kappa < 1 || fusion.kappa > static_cast<int>(tiers.size())))
      out.emplace_back("fusion.kappa must be in [1, K]");
    return out;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw ConfigError(std::move(p));
  }
};

/// Reference three-tier HetNet: 1/2/4 BSs per km^2 at 15/10/5 dBm.
/// Blockage density, object probability and user distance mirror configs/default.json.
inline NetworkConfig default_network() {
  NetworkConfig cfg;
  const double dens[] = {1.0, 2.0, 4.0};
  const double dbm[] = {15.0, 10.0, 5.0};
  for (int k = 0; k < 3; ++k)
    cfg.tiers.push_back({per_km2_to_per_m2(dens[k]), dbm_to_watt(dbm[k]), 0.9, 0.8, false});
  auto& c = cfg.channel;
  c.pathloss_exponent = 4.0;
  c.pathloss_offset = 1.0;
  c.nakagami_nu = 2;
  c.los_prob = 0.7;
  c.los_radius = 400.0;
  c.beamwidth = pi / 6.0;
  c.mainlobe_gain = db_to_linear(10.0);
  c.carrier_freq = 30e9;
  c.rcs = db_to_linear(10.0);
  c.noise_var = db_to_linear(-60.0);
  c.si_mu = 4;
  c.si_var = db_to_linear(-60.0);
  c.pc_rho = db_to_linear(-40.0);
  c.pc_fraction = 0.9;
  c.blockage_density = per_km2_to_per_m2(50.0);
  c.object_prob = 0.9;
  c.serving_distance = 10.0;
  return cfg;
}

} // namespace jcas
