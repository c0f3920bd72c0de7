#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "jcas/channel_model.hpp"
#include "jcas/fusion.hpp"
#include "jcas/network.hpp"
#include "jcas/point_process.hpp"
#include "jcas/rng.hpp"

namespace jcas {

struct Estimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n_trials = 0;
  std::uint64_t seed = 0;
};

inline Estimate binomial_estimate(std::uint64_t hits, std::uint64_t n, std::uint64_t seed) {
  Estimate e;
  e.n_trials = n;
  e.seed = seed;
  if (n == 0) return e;
  e.mean = static_cast<double>(hits) / static_cast<double>(n);
  e.std_err = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
  return e;
}

/// Mean and standard error of per-trial values, summed in trial order.
inline Estimate sample_estimate(std::span<const double> values, std::uint64_t seed) {
  Estimate e;
  e.n_trials = values.size();
  e.seed = seed;
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  if (values.size() > 1) e.std_err = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  return e;
}

/// Runs fn(trial, acc) over trials [0, n) on `workers` threads, each with its own
/// accumulator, then folds the accumulators with +=. Accumulators must hold
/// integer counts (or be otherwise order-insensitive).
template <class Acc, class Fn>
Acc run_trials(std::uint64_t n, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2) {
    Acc acc{};
    for (std::uint64_t t = 0; t < n; ++t) fn(t, acc);
    return acc;
  }
  std::vector<Acc> parts(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::uint64_t t = static_cast<std::uint64_t>(w); t < n; t += static_cast<std::uint64_t>(workers))
        fn(t, parts[static_cast<std::size_t>(w)]);
    });
  for (auto& th : pool) th.join();
  Acc acc{};
  for (const auto& p : parts) acc += p;
  return acc;
}

/// Per-trial values written by index; fn(trial) -> double.
template <class Fn>
std::vector<double> run_values(std::uint64_t n, int workers, Fn&& fn) {
  std::vector<double> out(n);
  struct Nothing {
    Nothing& operator+=(const Nothing&) { return *this; }
  };
  run_trials<Nothing>(n, workers, [&](std::uint64_t t, Nothing&) { out[t] = fn(t); });
  return out;
}

struct BsMarks {
  bool jcas = false;
  bool aligned = false;
  bool los_to_poi = false;
};

struct BaseStation {
  std::size_t tier = 0;
  RadialPoint point;
  BsMarks marks;
  double x = 0.0, y = 0.0;
};

/// One layout of every tier around the PoI at the origin. Stations cover a
/// disk of twice the LoS radius so that every interferer of an in-range
/// cooperator is present. `nearest` is the true nearest BS per tier.
struct NetworkRealization {
  std::vector<BaseStation> stations;
  std::vector<std::optional<BaseStation>> nearest;
  bool object_present = false;
};

namespace detail {

inline BsMarks draw_marks(double radius, double jcas_fraction, const ChannelParams& c, Rng& rng) {
  BsMarks m;
  m.jcas = bernoulli(rng, jcas_fraction);
  const double sector = c.beamwidth / two_pi;
  m.aligned = bernoulli(rng, sector * sector * c.los_prob);
  m.los_to_poi = los_indicator(radius, c, rng) == LinkState::los;
  return m;
}

inline BaseStation make_station(std::size_t tier, const RadialPoint& p, const BsMarks& m) {
  return {tier, p, m, p.x(), p.y()};
}

} // namespace detail

inline NetworkRealization generate_realization(const NetworkConfig& cfg, Rng& rng) {
  NetworkRealization real;
  const auto& c = cfg.channel;
  real.object_present = bernoulli(rng, c.object_prob);
  const std::size_t kt = cfg.tiers.size();
  std::vector<std::uint64_t> layout_seed(kt), mark_seed(kt);
  for (std::size_t k = 0; k < kt; ++k) {
    layout_seed[k] = rng();
    mark_seed[k] = rng();
  }
  const double window = 2.0 * c.los_radius;
  real.nearest.resize(kt);
  for (std::size_t k = 0; k < kt; ++k) {
    const auto& t = cfg.tiers[k];
    Rng lr(layout_seed[k]), mr(mark_seed[k]);
    TierSample s = t.poisson ? sample_ppp_with_nearest(t.density, window, lr)
                             : sample_beta_gpp_with_nearest(GppParams{t.density, t.beta, window}, lr);
    std::optional<std::size_t> nearest_at;
    for (const auto& p : s.window.points) {
      auto m = detail::draw_marks(p.radius(), t.jcas_fraction, c, mr);
      if (s.nearest && p.index == s.nearest->index && p.radius2 == s.nearest->radius2) nearest_at = real.stations.size();
      real.stations.push_back(detail::make_station(k, p, m));
    }
    if (nearest_at) real.nearest[k] = real.stations[*nearest_at];
    else if (s.nearest) real.nearest[k] = detail::make_station(k, *s.nearest, detail::draw_marks(s.nearest->radius(), t.jcas_fraction, c, mr));
  }
  return real;
}

/// Radar SINR at a cooperative BS for one slot. Interferers are the JCAS,
/// beam-aligned BSs of every tier within R of the cooperator, other than itself.
inline double radar_sinr(const NetworkRealization& real, const BaseStation& serving, const NetworkConfig& cfg, Rng& rng) {
  const auto& c = cfg.channel;
  const double tier_power = cfg.tiers[serving.tier].power;
  const double h0 = sample_fading_power(c.nakagami_nu, rng);
  const double g_si = sample_si_power_gain(c, rng);
  const double echo = radar_echo_power(serving.point.radius(), tier_power, h0, c);
  const double g2l = c.mainlobe_gain * c.mainlobe_gain * c.wavelength_factor();
  double interference = 0.0;
  for (const auto& b : real.stations) {
    if (b.tier == serving.tier && b.point.index == serving.point.index && b.point.radius2 == serving.point.radius2) continue;
    if (!(b.marks.jcas && b.marks.aligned)) continue;
    const double dx = b.x - serving.x, dy = b.y - serving.y;
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist > c.los_radius) continue;
    const double h = sample_fading_power(c.nakagami_nu, rng);
    interference += power_control(c.serving_distance, cfg.tiers[b.tier].power, c) * g2l * h * pathloss(dist, c);
  }
  const double si = serving.marks.jcas ? power_control(c.serving_distance, tier_power, c) * g_si : 0.0;
  return echo / (interference + si + c.noise_var);
}

enum class Association { ptdb, db };

/// Cooperator set: nearest BS per tier (PTDB) or the K nearest overall (DB).
inline std::vector<BaseStation> association_baseline(const NetworkRealization& real, Association mode, std::size_t k_count) {
  std::vector<BaseStation> out;
  if (mode == Association::ptdb) {
    for (const auto& n : real.nearest)
      if (n) out.push_back(*n);
    return out;
  }
  std::vector<BaseStation> all = real.stations;
  for (const auto& n : real.nearest) {
    if (!n) continue;
    const bool known = std::any_of(all.begin(), all.end(), [&](const BaseStation& b) {
      return b.tier == n->tier && b.point.index == n->point.index && b.point.radius2 == n->point.radius2;
    });
    if (!known) all.push_back(*n);
  }
  std::stable_sort(all.begin(), all.end(), [](const BaseStation& a, const BaseStation& b) {
    if (a.point.radius2 != b.point.radius2) return a.point.radius2 < b.point.radius2;
    return a.point.index < b.point.index;
  });
  if (all.size() > k_count) all.resize(k_count);
  return all;
}

struct TierDecision {
  std::size_t tier = 0;
  double distance = 0.0;
  bool weight = false;
  bool local = false;
  double sinr = 0.0;
};

struct DetectionOutcome {
  bool fused = false;
  std::vector<TierDecision> per_tier;
};

/// Local decisions and weighted fusion for one slot.
inline DetectionOutcome comrd_trial(const NetworkRealization& real, std::span<const BaseStation> cooperators,
                                    std::span<const double> theta, const NetworkConfig& cfg, Rng& slot_rng) {
  DetectionOutcome out;
  if (cooperators.empty()) return out;
  double u_min = std::numeric_limits<double>::infinity();
  for (const auto& b : cooperators) u_min = std::min(u_min, b.point.radius2);
  // Each cooperator gets its own sub-stream so that draws stay aligned across configurations.
  std::vector<std::uint64_t> sub(cooperators.size());
  for (auto& s : sub) s = slot_rng();
  int included = 0, votes = 0;
  for (std::size_t i = 0; i < cooperators.size(); ++i) {
    const auto& b = cooperators[i];
    Rng r(sub[i]);
    TierDecision d;
    d.tier = b.tier;
    d.distance = b.point.radius();
    d.weight = fusion_weight(b.point.radius2, u_min, cfg.fusion.varsigma);
    d.sinr = radar_sinr(real, b, cfg, r);
    d.local = real.object_present && b.marks.los_to_poi && d.sinr >= theta[b.tier];
    included += d.weight;
    votes += d.weight && d.local;
    out.per_tier.push_back(d);
  }
  out.fused = included > 0 && votes >= cfg.fusion.required_votes(included);
  return out;
}

struct SimOptions {
  int workers = 1;
  Association association = Association::ptdb;
  bool fresh_layout = false;     // second slot on an independent realization
  bool redraw_alignment = false; // second slot redraws beam-alignment marks
};

namespace detail {

struct Counts {
  std::uint64_t a = 0, b = 0, ab = 0;
  Counts& operator+=(const Counts& o) {
    a += o.a;
    b += o.b;
    ab += o.ab;
    return *this;
  }
};

inline bool detect_once(const NetworkRealization& real, std::span<const double> theta, const NetworkConfig& cfg,
                        Association assoc, Rng& slot) {
  auto coop = association_baseline(real, assoc, cfg.tiers.size());
  return comrd_trial(real, coop, theta, cfg, slot).fused;
}

} // namespace detail

inline Estimate estimate_detection(const NetworkConfig& cfg, std::span<const double> theta, std::uint64_t n_trials,
                                   std::uint64_t base_seed, const SimOptions& opt = {}) {
  cfg.validate();
  auto c = run_trials<detail::Counts>(n_trials, opt.workers, [&](std::uint64_t t, detail::Counts& acc) {
    Rng layout = make_stream(base_seed, t, Stream::layout);
    Rng slot = make_stream(base_seed, t, Stream::slot_a);
    auto real = generate_realization(cfg, layout);
    acc.a += detail::detect_once(real, theta, cfg, opt.association, slot);
  });
  return binomial_estimate(c.a, n_trials, base_seed);
}

struct TemporalEstimate {
  Estimate single; // first slot
  Estimate joint;  // both slots
  double conditional = std::numeric_limits<double>::quiet_NaN();
  double conditional_se = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double rho_se = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

/// Two slots over one realization (layout and marks shared, fading redrawn).
/// Standard errors of the ratios come from the delta method.
inline TemporalEstimate estimate_joint_detection(const NetworkConfig& cfg, std::span<const double> theta,
                                                 std::uint64_t n_trials, std::uint64_t base_seed,
                                                 const SimOptions& opt = {}) {
  cfg.validate();
  auto c = run_trials<detail::Counts>(n_trials, opt.workers, [&](std::uint64_t t, detail::Counts& acc) {
    Rng layout = make_stream(base_seed, t, Stream::layout);
    Rng slot_a = make_stream(base_seed, t, Stream::slot_a);
    Rng slot_b = make_stream(base_seed, t, Stream::slot_b);
    auto real = generate_realization(cfg, layout);
    const bool a = detail::detect_once(real, theta, cfg, opt.association, slot_a);
    bool b = false;
    if (opt.fresh_layout) {
      Rng fresh = make_stream(base_seed, t, Stream::fresh_layout);
      auto other = generate_realization(cfg, fresh);
      b = detail::detect_once(other, theta, cfg, opt.association, slot_b);
    } else if (opt.redraw_alignment) {
      Rng marks = make_stream(base_seed, t, Stream::fresh_layout);
      const double sector = cfg.channel.beamwidth / two_pi;
      auto second = real;
      for (auto& s : second.stations) s.marks.aligned = bernoulli(marks, sector * sector * cfg.channel.los_prob);
      b = detail::detect_once(second, theta, cfg, opt.association, slot_b);
    } else {
      b = detail::detect_once(real, theta, cfg, opt.association, slot_b);
    }
    acc.a += a;
    acc.b += b;
    acc.ab += a && b;
  });
  TemporalEstimate out;
  out.single = binomial_estimate(c.a, n_trials, base_seed);
  out.joint = binomial_estimate(c.ab, n_trials, base_seed);
  const double a = out.single.mean, j = out.joint.mean, n = static_cast<double>(n_trials);
  if (a > 0.0) {
    out.defined = true;
    out.conditional = j / a;
    out.conditional_se = std::sqrt(j * (a - j) / (a * a * a) / n);
    out.rho = j / (a * a);
    out.rho_se = std::sqrt(j * (1.0 - j) / (a * a * a * a) / n);
  }
  return out;
}

/// Interferers seen from a receiver: per tier a beta-GPP (or PPP) at the thinned
/// density inside the LoS ball. Order j of tier k (j >= 1) is removed.
struct FieldPoint {
  std::size_t tier;
  double radius2;
};

inline std::vector<FieldPoint> sample_interferer_field(const NetworkConfig& cfg, Rng& rng, std::size_t k = 0,
                                                       std::size_t j = 0, double same_tier_lower_sq = 0.0) {
  std::vector<FieldPoint> out;
  const auto& c = cfg.channel;
  for (std::size_t z = 0; z < cfg.tiers.size(); ++z) {
    const auto& t = cfg.tiers[z];
    const double dens = t.density * interferer_activity_prob(c, t.jcas_fraction);
    Rng tr(rng());
    if (!(dens > 0.0)) continue;
    PointSet s = t.poisson ? sample_ppp(dens, c.los_radius, tr) : sample_beta_gpp(GppParams{dens, t.beta, c.los_radius}, tr);
    for (const auto& p : s.points) {
      if (z == k && !t.poisson && j != 0 && p.index == j) continue;
      if (z == k && p.radius2 < same_tier_lower_sq) continue;
      out.push_back({z, p.radius2});
    }
  }
  return out;
}

/// Aggregate interference power of a field sample with fresh fading.
inline double field_interference(const std::vector<FieldPoint>& field, const NetworkConfig& cfg, bool with_wavelength,
                                 Rng& rng) {
  const auto& c = cfg.channel;
  const double g2l = c.mainlobe_gain * c.mainlobe_gain * (with_wavelength ? c.wavelength_factor() : 1.0);
  double sum = 0.0;
  for (const auto& p : field) {
    const double h = sample_fading_power(c.nakagami_nu, rng);
    sum += power_control(c.serving_distance, cfg.tiers[p.tier].power, c) * g2l * h * pathloss_sq(p.radius2, c);
  }
  return sum;
}

/// E[exp(-s I)] per s over receiver-centred interferer fields.
inline std::vector<Estimate> estimate_laplace(const NetworkConfig& cfg, std::span<const double> s, std::size_t k,
                                              std::size_t j, std::uint64_t n_trials, std::uint64_t base_seed,
                                              int workers = 1) {
  std::vector<std::vector<double>> values(s.size(), std::vector<double>(n_trials));
  run_values(n_trials, workers, [&](std::uint64_t t) {
    Rng rng = make_stream(base_seed, t, Stream::laplace);
    auto field = sample_interferer_field(cfg, rng, k, j);
    const double i = field_interference(field, cfg, true, rng);
    for (std::size_t m = 0; m < s.size(); ++m) values[m][t] = std::exp(-s[m] * i);
    return 0.0;
  });
  std::vector<Estimate> out;
  for (const auto& v : values) out.push_back(sample_estimate(v, base_seed));
  return out;
}

/// E[exp(-s I(1)) exp(-s I(2))] with the field shared and fading redrawn.
inline std::vector<Estimate> estimate_joint_laplace(const NetworkConfig& cfg, std::span<const double> s, std::size_t k,
                                                    std::size_t j, std::uint64_t n_trials, std::uint64_t base_seed,
                                                    int workers = 1) {
  std::vector<std::vector<double>> values(s.size(), std::vector<double>(n_trials));
  run_values(n_trials, workers, [&](std::uint64_t t) {
    Rng rng = make_stream(base_seed, t, Stream::laplace);
    auto field = sample_interferer_field(cfg, rng, k, j);
    const double i1 = field_interference(field, cfg, true, rng);
    const double i2 = field_interference(field, cfg, true, rng);
    for (std::size_t m = 0; m < s.size(); ++m) values[m][t] = std::exp(-s[m] * (i1 + i2));
    return 0.0;
  });
  std::vector<Estimate> out;
  for (const auto& v : values) out.push_back(sample_estimate(v, base_seed));
  return out;
}

/// Detection frequency of a tier-k BS of Gamma order j placed at squared
/// distance u, including its retention, object presence and LoS.
inline Estimate estimate_conditional_detection(const NetworkConfig& cfg, double theta, double u, std::size_t k,
                                               std::size_t j, std::uint64_t n_trials, std::uint64_t base_seed,
                                               int workers = 1) {
  const auto& c = cfg.channel;
  const auto& t = cfg.tiers.at(k);
  auto cnt = run_trials<detail::Counts>(n_trials, workers, [&](std::uint64_t trial, detail::Counts& acc) {
    Rng rng = make_stream(base_seed, trial, Stream::conditional);
    const bool retained = bernoulli(rng, t.poisson ? 1.0 : t.beta);
    const bool present = bernoulli(rng, c.object_prob);
    const bool los = bernoulli(rng, c.los_prob);
    const bool jcas = bernoulli(rng, t.jcas_fraction);
    const double h0 = sample_fading_power(c.nakagami_nu, rng);
    const double g_si = sample_si_power_gain(c, rng);
    auto field = sample_interferer_field(cfg, rng, k, j);
    const double i = field_interference(field, cfg, true, rng);
    const double si = jcas ? power_control(c.serving_distance, t.power, c) * g_si : 0.0;
    const double echo = radar_echo_power(std::sqrt(u), t.power, h0, c);
    acc.a += retained && present && los && echo / (i + si + c.noise_var) >= theta;
  });
  return binomial_estimate(cnt.a, n_trials, base_seed);
}

/// False-alarm frequency for tier k: the echo off the nearest blockage (Rayleigh
/// distance law at the blockage density) against the interferer field, SIR only.
inline Estimate estimate_false_alarm(const NetworkConfig& cfg, double theta, std::size_t k, std::uint64_t n_trials,
                                     std::uint64_t base_seed, int workers = 1) {
  const auto& c = cfg.channel;
  auto cnt = run_trials<detail::Counts>(n_trials, workers, [&](std::uint64_t t, detail::Counts& acc) {
    Rng rng = make_stream(base_seed, t, Stream::false_alarm);
    const bool blocked = bernoulli(rng, 1.0 - c.los_prob);
    const bool present = bernoulli(rng, c.object_prob);
    const double u = std::sqrt(-std::log1p(-uniform01(rng)) / (pi * c.blockage_density));
    const double h0 = sample_fading_power(c.nakagami_nu, rng);
    auto field = sample_interferer_field(cfg, rng);
    const double i = field_interference(field, cfg, true, rng);
    const double echo = radar_echo_power(u, cfg.tiers.at(k).power, h0, c);
    acc.a += blocked && present && u <= c.los_radius && echo >= theta * i;
  });
  return binomial_estimate(cnt.a, n_trials, base_seed);
}

/// DL coverage of a user at distance d from its tier-k BS.
inline Estimate estimate_dl_coverage(const NetworkConfig& cfg, double eta, double d, std::size_t k,
                                     std::uint64_t n_trials, std::uint64_t base_seed, int workers = 1) {
  const auto& c = cfg.channel;
  const double p = power_control(d, cfg.tiers.at(k).power, c);
  auto cnt = run_trials<detail::Counts>(n_trials, workers, [&](std::uint64_t t, detail::Counts& acc) {
    Rng rng = make_stream(base_seed, t, Stream::coverage);
    const bool los = bernoulli(rng, c.los_prob);
    const double g = sample_fading_power(c.nakagami_nu, rng);
    auto field = sample_interferer_field(cfg, rng, k, 0, d * d);
    const double i = field_interference(field, cfg, false, rng);
    const double signal = p * c.mainlobe_gain * c.mainlobe_gain * g * pathloss(d, c);
    acc.a += los && signal >= eta * (i + c.noise_var);
  });
  return binomial_estimate(cnt.a, n_trials, base_seed);
}

} // namespace jcas
