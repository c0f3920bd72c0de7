#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "jcas/channel_model.hpp"
#include "jcas/errors.hpp"
#include "jcas/fusion.hpp"
#include "jcas/network.hpp"
#include "jcas/point_process.hpp"
#include "jcas/quadrature.hpp"
#include "jcas/special_functions.hpp"

namespace jcas {

struct AnalyticResult {
  double value = 0.0;
  double quadrature_abs_err = 0.0;
  std::size_t product_truncation_index = 0;
  double residual_bound = 0.0;
  bool exceeds_unit = false; // only the literal serving-order sum can do this
};

struct AnalyticOptions {
  double quad_tol = 1e-8;
  double factor_tol = 1e-9;
  bool presence_factor = true;
  bool compat_eq20 = false;
  bool compat_eq24 = false;
};

namespace detail {

struct Diagnostics {
  double quad_err = 0.0;
  std::size_t truncation = 0;
  double residual = 0.0;

  void absorb(double err, std::size_t trunc, double resid) {
    quad_err = std::max(quad_err, err);
    truncation = std::max(truncation, trunc);
    residual = std::max(residual, resid);
  }
};

inline AnalyticResult finish(double value, const Diagnostics& d, double outer_err = 0.0) {
  AnalyticResult r;
  r.value = value;
  r.quadrature_abs_err = outer_err + d.quad_err;
  r.product_truncation_index = d.truncation;
  r.residual_bound = d.residual;
  return r;
}

inline void add_breakpoint(std::vector<double>& bp, double x, double lo, double hi) {
  if (std::isfinite(x) && x > lo && x < hi) bp.push_back(x);
}

} // namespace detail

/// Interfering JCAS BSs of every tier seen from a receiver: per tier a beta-GPP
/// (or PPP) at the thinned density lambda (phi/2pi)^2 p_L chi, inside the LoS ball.
///
/// For Laplace arguments sigma_1..sigma_T (one per slot, locations shared, fading
/// independent), order i of a beta-GPP tier contributes
///   1 - beta int f_{C_i}(y) (1 - prod_t M_t(y)) dy,   M_t = 1 / (1 + sigma_t c / (eps + y^(a/2)))
/// over squared distance y in [lower, R^2]. The printed variant treats retention
/// as independent per slot: 1 - int f_{C_i}(y) (1 - prod_t (1 - beta + beta M_t(y))) dy.
class InterfererField {
public:
  enum class Form { derived, printed };

  struct Tier {
    double density = 0.0; // thinned, m^-2
    double beta = 1.0;
    bool poisson = false;
    double coeff = 0.0;   // P_z(d) G^2 [l]
    double lower_sq = 0.0;
  };

  struct Factors {
    std::vector<std::vector<double>> orders; // beta-GPP tiers only
    std::vector<double> tier;
    double abs_err = 0.0;
    std::size_t truncation = 0;
    double residual = 0.0;

    double total() const {
      double p = 1.0;
      for (double t : tier) p *= t;
      return p;
    }

    /// Product with order j (1-based) of tier k removed. j = 0 removes nothing.
    double excluding(std::size_t k, std::size_t j) const {
      double p = 1.0;
      for (std::size_t z = 0; z < tier.size(); ++z) {
        if (z != k || j == 0 || orders[z].empty() || j > orders[z].size()) {
          p *= tier[z];
          continue;
        }
        for (std::size_t i = 0; i < orders[z].size(); ++i)
          if (i + 1 != j) p *= orders[z][i];
      }
      return p;
    }
  };

  InterfererField(const NetworkConfig& cfg, bool with_wavelength, double quad_tol = 1e-9, double factor_tol = 1e-9)
    : ch_(cfg.channel), quad_tol_(quad_tol), factor_tol_(factor_tol) {
    const double l = with_wavelength ? cfg.channel.wavelength_factor() : 1.0;
    const double g2 = cfg.channel.mainlobe_gain * cfg.channel.mainlobe_gain;
    for (const auto& t : cfg.tiers) {
      Tier f;
      f.density = t.density * interferer_activity_prob(cfg.channel, t.jcas_fraction);
      f.beta = t.beta;
      f.poisson = t.poisson;
      f.coeff = power_control(cfg.channel.serving_distance, t.power, cfg.channel) * g2 * l;
      tiers_.push_back(f);
    }
  }

  void set_lower(std::size_t k, double lower_sq) { tiers_.at(k).lower_sq = lower_sq; }
  const std::vector<Tier>& tiers() const { return tiers_; }

  Factors evaluate(std::span<const double> sigma, Form form = Form::derived) const {
    Factors out;
    out.orders.resize(tiers_.size());
    out.tier.assign(tiers_.size(), 1.0);
    for (std::size_t z = 0; z < tiers_.size(); ++z) evaluate_tier(z, sigma, form, out);
    return out;
  }

private:
  void evaluate_tier(std::size_t z, std::span<const double> sigma, Form form, Factors& out) const {
    const Tier& t = tiers_[z];
    const double r2 = ch_.los_radius * ch_.los_radius;
    const double lo = std::min(t.lower_sq, r2);
    bool active = t.density > 0.0 && t.coeff > 0.0 && r2 > lo;
    bool any_sigma = false;
    for (double s : sigma) any_sigma = any_sigma || s > 0.0;
    if (!active || !any_sigma) return;

    const double half_a = 0.5 * ch_.pathloss_exponent;
    const double eps = ch_.pathloss_offset;
    const double beta = t.poisson ? 1.0 : t.beta;
    const bool printed = form == Form::printed && !t.poisson;

    // 1 - prod M, and its printed counterpart, both via log1p for small x.
    auto weights = [&](double y, double& derived, double& print) {
      const double base = eps + std::pow(y, half_a);
      double log_m = 0.0, log_p = 0.0;
      for (double s : sigma) {
        const double x = s * t.coeff / base;
        log_m += std::log1p(x);
        log_p += std::log1p(-beta * x / (1.0 + x));
      }
      derived = -std::expm1(-log_m);
      print = -std::expm1(log_p);
    };
    auto driver = [&](double y) {
      double d, p;
      weights(y, d, p);
      return d;
    };

    std::vector<double> bp;
    for (double s : sigma) {
      const double knee = std::pow(s * t.coeff, 1.0 / half_a);
      for (double m : {0.01, 0.1, 1.0, 10.0}) detail::add_breakpoint(bp, knee * m, lo, r2);
    }
    const double rate = pi * t.density;
    const double tol_w = std::max(quad_tol_ / rate, 1e-14 * r2);
    int evals = 0;
    auto panels = adaptive_partition(driver, lo, r2, tol_w, bp, 2000, evals);

    if (t.poisson) {
      double integral = 0.0, err = 0.0;
      for (const auto& p : panels) {
        integral += p.value;
        err += p.error;
      }
      out.tier[z] = std::exp(-rate * integral);
      out.abs_err += rate * err;
      out.truncation = std::max<std::size_t>(out.truncation, 1);
      return;
    }

    struct Node {
      double log_y, y, wk, wg, weight;
    };
    std::vector<Node> nodes;
    nodes.reserve(panels.size() * 15);
    for (const auto& p : panels)
      for (const auto& n : gk15_rule(p.lo, p.hi)) {
        double d, pr;
        weights(n.x, d, pr);
        nodes.push_back({std::log(n.x), n.x, n.kronrod, n.gauss, printed ? pr : beta * d});
      }

    const double scale = t.beta / rate;
    const double log_scale = std::log(scale);
    const double y_r = r2 / scale;
    const double beta_eff = printed ? std::min(1.0, beta * static_cast<double>(sigma.size())) : beta;
    std::vector<double> log_f(nodes.size());
    for (std::size_t n = 0; n < nodes.size(); ++n) log_f[n] = -nodes[n].y / scale - log_scale;

    double tier_product = 1.0;
    auto& orders = out.orders[z];
    for (std::size_t i = 1;; ++i) {
      if (i > 1)
        for (std::size_t n = 0; n < nodes.size(); ++n)
          log_f[n] += nodes[n].log_y - log_scale - std::log(static_cast<double>(i - 1));
      double k_sum = 0.0, g_sum = 0.0;
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        const double v = std::exp(log_f[n]) * nodes[n].weight;
        k_sum += nodes[n].wk * v;
        g_sum += nodes[n].wg * v;
      }
      const double factor = std::clamp(1.0 - k_sum, 0.0, 1.0);
      orders.push_back(factor);
      tier_product *= factor;
      out.abs_err += std::abs(k_sum - g_sum);

      if (static_cast<double>(i) > y_r + 1.0) {
        const double tail = beta_eff * gamma_cdf_tail_sum(r2, i + 1, scale);
        if (tail < factor_tol_) {
          out.residual += tail / (1.0 - tail);
          break;
        }
      }
      if (i >= max_orders) {
        const double tail = beta_eff * gamma_cdf_tail_sum(r2, i + 1, scale);
        if (!(tail <= 1e-6)) throw ConvergenceError("interference product did not converge within the order cap");
        out.residual += tail / (1.0 - tail);
        break;
      }
    }
    out.tier[z] = tier_product;
    out.truncation = std::max(out.truncation, orders.size());
  }

  static constexpr std::size_t max_orders = 10'000;

  ChannelParams ch_;
  std::vector<Tier> tiers_;
  double quad_tol_;
  double factor_tol_;
};

/// E[exp(-s I)] with order j of the serving tier k removed (j = 0 keeps all).
inline AnalyticResult laplace_interference(double s, const NetworkConfig& cfg, std::size_t k, std::size_t j,
                                           const AnalyticOptions& opt = {}) {
  if (s < 0.0) throw std::domain_error("laplace_interference: s must be >= 0");
  InterfererField field(cfg, true, opt.factor_tol, opt.factor_tol);
  const double sig[] = {s};
  auto f = field.evaluate(sig);
  AnalyticResult r;
  r.value = f.excluding(k, j);
  r.quadrature_abs_err = f.abs_err;
  r.product_truncation_index = f.truncation;
  r.residual_bound = f.residual;
  return r;
}

/// E[exp(-s I(1)) exp(-s I(2))] for two slots sharing locations and marks.
inline AnalyticResult joint_laplace_interference(double s, const NetworkConfig& cfg, std::size_t k, std::size_t j,
                                                 const AnalyticOptions& opt = {}) {
  if (s < 0.0) throw std::domain_error("joint_laplace_interference: s must be >= 0");
  InterfererField field(cfg, true, opt.factor_tol, opt.factor_tol);
  const double sig[] = {s, s};
  auto f = field.evaluate(sig, opt.compat_eq24 ? InterfererField::Form::printed : InterfererField::Form::derived);
  AnalyticResult r;
  r.value = f.excluding(k, j);
  r.quadrature_abs_err = f.abs_err;
  r.product_truncation_index = f.truncation;
  r.residual_bound = f.residual;
  return r;
}

/// (mu / (mu + s sigma_SI^2 P_k(d)))^mu
inline double laplace_si(double s, double d, std::size_t k, const NetworkConfig& cfg) {
  const auto& c = cfg.channel;
  const double p = power_control(d, cfg.tiers.at(k).power, c);
  const double mu = static_cast<double>(c.si_mu);
  return std::pow(mu / (mu + s * c.si_var * p), mu);
}

/// Closed form for PPP interferers (every tier), Gauss hypergeometric kernel.
inline double laplace_interference_ppp(double s, const NetworkConfig& cfg) {
  if (s < 0.0) throw std::domain_error("laplace_interference_ppp: s must be >= 0");
  const auto& c = cfg.channel;
  const double l = c.wavelength_factor();
  const double g2 = c.mainlobe_gain * c.mainlobe_gain;
  const double r2 = c.los_radius * c.los_radius;
  const double b = 2.0 / c.pathloss_exponent;
  double exponent = 0.0;
  for (const auto& t : cfg.tiers) {
    const double dens = t.density * interferer_activity_prob(c, t.jcas_fraction);
    const double x = s * power_control(c.serving_distance, t.power, c) * g2 * l;
    if (dens <= 0.0 || x <= 0.0) continue;
    const double q = c.pathloss_offset + x;
    exponent += pi * dens * r2 * (x / q) * hyp2f1_unit_a(b, std::pow(c.los_radius, c.pathloss_exponent) / q, 1e-13);
  }
  return std::exp(-exponent);
}

/// Scaled detection threshold s = 4 pi theta (eps + u^(a/2))^2 / (P_k G^2 A l).
inline double detection_scale(double theta, double u, std::size_t k, const NetworkConfig& cfg) {
  const auto& c = cfg.channel;
  const double base = c.pathloss_offset + std::pow(u, 0.5 * c.pathloss_exponent);
  return theta * base * base / radar_echo_gain(cfg.tiers.at(k).power, c);
}

namespace detail {

/// Per-tier pieces of the detection analysis for one serving tier k.
class TierDetection {
public:
  TierDetection(const NetworkConfig& cfg, const AnalyticOptions& opt, std::size_t k, double theta)
    : cfg_(cfg), opt_(opt), k_(k), theta_(theta), field_(cfg, true, opt.factor_tol, opt.factor_tol),
      law_(cfg.tiers[k].density, cfg.tiers[k].beta, cfg.tiers[k].poisson),
      weights_(alzer_weights(cfg.channel.nakagami_nu)), rate_(alzer_rate(cfg.channel.nakagami_nu)) {}

  const NearestLaw& law() const { return law_; }
  double r2() const { return cfg_.channel.los_radius * cfg_.channel.los_radius; }

  /// Conditional success probability given the serving point of order j sits at
  /// u, for each serving order j = 1..J (index j-1), plus the value with nothing
  /// excluded in `rest`. Includes p_L but neither beta nor zeta.
  void conditional(double u, std::vector<double>& by_order, double& rest, Diagnostics& diag) const {
    by_order.clear();
    rest = 0.0;
    const auto& c = cfg_.channel;
    const double s = detection_scale(theta_, u, k_, cfg_);
    const double chi = cfg_.tiers[k_].jcas_fraction;
    for (std::size_t x = 0; x < weights_.size(); ++x) {
      const double sigma = s * static_cast<double>(x + 1) * rate_;
      const double noise = std::exp(-sigma * c.noise_var);
      if (noise == 0.0) continue;
      const double si = chi * laplace_si(sigma, c.serving_distance, k_, cfg_) + 1.0 - chi;
      const double sig[] = {sigma};
      auto f = field_.evaluate(sig);
      diag.absorb(f.abs_err, f.truncation, f.residual);
      const double coef = c.los_prob * weights_[x] * noise * si;
      accumulate(f, coef, by_order, rest);
    }
  }

  /// Both-slot counterpart: double exponential sum, shared SI mark, per-slot SI gain.
  void conditional_joint(double u, std::vector<double>& by_order, double& rest, Diagnostics& diag) const {
    by_order.clear();
    rest = 0.0;
    const auto& c = cfg_.channel;
    const double s = detection_scale(theta_, u, k_, cfg_);
    const double chi = cfg_.tiers[k_].jcas_fraction;
    const auto form = opt_.compat_eq24 ? InterfererField::Form::printed : InterfererField::Form::derived;
    for (std::size_t x1 = 0; x1 < weights_.size(); ++x1) {
      const double s1 = s * static_cast<double>(x1 + 1) * rate_;
      for (std::size_t x2 = 0; x2 < weights_.size(); ++x2) {
        const double s2 = s * static_cast<double>(x2 + 1) * rate_;
        const double noise = std::exp(-(s1 + s2) * c.noise_var);
        if (noise == 0.0) continue;
        const double si = chi * laplace_si(s1, c.serving_distance, k_, cfg_) *
                              laplace_si(s2, c.serving_distance, k_, cfg_) + 1.0 - chi;
        const double sig[] = {s1, s2};
        auto f = field_.evaluate(sig, form);
        diag.absorb(f.abs_err, f.truncation, f.residual);
        accumulate(f, c.los_prob * weights_[x1] * weights_[x2] * noise * si, by_order, rest);
      }
    }
  }

  /// Joint density over u of (serving point at u) and (success), marginalized over
  /// the serving order with the nearest-retained law.
  double success_density(double u, bool joint, Diagnostics& diag) const {
    if (u > r2()) return 0.0;
    std::vector<double> p;
    double rest = 0.0;
    if (joint) conditional_joint(u, p, rest, diag);
    else conditional(u, p, rest, diag);
    if (law_.poisson()) return rest * law_.pdf(u);
    auto o = law_.orders(u, 1e-13);
    diag.absorb(0.0, o.truncation, o.residual);
    double sum = 0.0, covered = 0.0;
    const std::size_t n = std::min(p.size(), o.density.size());
    for (std::size_t j = 0; j < n; ++j) {
      sum += p[j] * o.density[j];
      covered += o.density[j];
    }
    double total = 0.0;
    for (double g : o.density) total += g;
    return sum + rest * (total - covered);
  }

  /// Literal serving-order sum: sum_j beta f_{B_j}(u) p(u | j), no nearest-point weighting.
  double literal_density(double u, Diagnostics& diag) const {
    if (u > r2()) return 0.0;
    std::vector<double> p;
    double rest = 0.0;
    conditional(u, p, rest, diag);
    const auto& t = cfg_.tiers[k_];
    if (t.poisson) return rest * law_.pdf(u);
    const double scale = t.beta / (pi * t.density);
    double sum = 0.0, covered = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double f = gamma_pdf(u, static_cast<double>(j + 1), scale);
      sum += p[j] * f;
      covered += f;
    }
    // sum_j f_{B_j}(u) = 1 / scale for every u
    return t.beta * (sum + rest * std::max(0.0, 1.0 / scale - covered));
  }

  std::vector<double> breakpoints() const {
    std::vector<double> bp;
    const auto& c = cfg_.channel;
    const double e = radar_echo_gain(cfg_.tiers[k_].power, c);
    const double hi = r2();
    const double half_a = 0.5 * c.pathloss_exponent;
    auto u_at = [&](double level) {
      const double base = std::sqrt(level * e / theta_);
      return base > c.pathloss_offset ? std::pow(base - c.pathloss_offset, 1.0 / half_a) : -1.0;
    };
    if (theta_ > 0.0) {
      const double si_scale = c.si_var * power_control(c.serving_distance, cfg_.tiers[k_].power, c);
      for (double m : {0.1, 1.0, 10.0}) {
        detail::add_breakpoint(bp, u_at(m / c.noise_var), 0.0, hi);
        if (si_scale > 0.0) detail::add_breakpoint(bp, u_at(m / si_scale), 0.0, hi);
      }
    }
    if (cfg_.tiers[k_].density > 0.0) {
      const double mean = 1.0 / (pi * cfg_.tiers[k_].density);
      for (double m : {0.1, 1.0, 3.0}) detail::add_breakpoint(bp, mean * m, 0.0, hi);
    }
    return bp;
  }

private:
  void accumulate(const InterfererField::Factors& f, double coef, std::vector<double>& by_order, double& rest) const {
    const std::size_t n = f.orders[k_].size();
    if (by_order.size() < n) by_order.resize(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) by_order[j] += coef * f.excluding(k_, j + 1);
    rest += coef * f.total();
  }

  const NetworkConfig& cfg_;
  const AnalyticOptions& opt_;
  std::size_t k_;
  double theta_;
  InterfererField field_;
  NearestLaw law_;
  std::vector<double> weights_;
  double rate_;
};

} // namespace detail

/// Conditional detection bound for a serving point of order j at squared
/// distance u: beta [zeta p_L] sum_xi c_xi e^{-s xi w sigma_n^2} L_I L_SI mix.
inline AnalyticResult cond_detection_prob(double theta, double u, std::size_t k, const NetworkConfig& cfg,
                                          bool with_presence_factor = true, std::size_t j = 1,
                                          const AnalyticOptions& opt = {}) {
  if (theta < 0.0 || u < 0.0) throw std::domain_error("cond_detection_prob: theta and u must be >= 0");
  detail::Diagnostics diag;
  detail::TierDetection td(cfg, opt, k, theta);
  std::vector<double> p;
  double rest = 0.0;
  td.conditional(u, p, rest, diag);
  double v = (j >= 1 && j <= p.size()) ? p[j - 1] : rest;
  v /= cfg.channel.los_prob > 0.0 ? cfg.channel.los_prob : 1.0;
  if (cfg.channel.los_prob == 0.0) v = 0.0;
  const auto& t = cfg.tiers[k];
  v *= t.poisson ? 1.0 : t.beta;
  if (with_presence_factor) v *= cfg.channel.object_prob * cfg.channel.los_prob;
  return detail::finish(v, diag);
}

/// Single- and two-slot fused detection with the derived serving-order law.
struct TemporalResult {
  AnalyticResult single;
  AnalyticResult joint;
  double conditional = 0.0; // joint / single
  double rho = 0.0;         // joint / single^2
};

namespace detail {

/// Cumulative integral of a density on [0, r2] with cheap evaluation at any point.
class Cumulative {
public:
  Cumulative(std::function<double(double)> f, double r2, double tol, std::span<const double> bp)
    : f_(std::move(f)), r2_(r2) {
    int evals = 0;
    auto panels = adaptive_partition(f_, 0.0, r2, tol, bp, 4000, evals);
    edges_.push_back(0.0);
    cum_.push_back(0.0);
    for (const auto& p : panels) {
      edges_.push_back(p.hi);
      cum_.push_back(cum_.back() + p.value);
      err_ += p.error;
    }
  }

  double total() const { return cum_.back(); }
  double error() const { return err_; }

  double at(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= r2_) return total();
    auto it = std::upper_bound(edges_.begin(), edges_.end(), u);
    const std::size_t i = static_cast<std::size_t>(it - edges_.begin()) - 1;
    const double lo = edges_[i];
    double part = 0.0;
    if (u > lo)
      for (const auto& n : gk15_rule(lo, u)) part += n.kronrod * f_(n.x);
    return cum_[i] + part;
  }

private:
  std::function<double(double)> f_;
  double r2_;
  std::vector<double> edges_, cum_;
  double err_ = 0.0;
};

inline void check_inputs(std::span<const double> theta, const NetworkConfig& cfg) {
  cfg.validate();
  if (theta.size() != cfg.tiers.size()) throw ConfigError("thresholds: need one per tier");
  for (double t : theta)
    if (!(t >= 0.0)) throw ConfigError("thresholds must be >= 0");
}

inline TemporalResult fused_detection(std::span<const double> theta, const NetworkConfig& cfg,
                                      const AnalyticOptions& opt, bool want_joint) {
  check_inputs(theta, cfg);
  const std::size_t kt = cfg.tiers.size();
  const double r2 = cfg.channel.los_radius * cfg.channel.los_radius;
  const double zeta = cfg.channel.object_prob;
  Diagnostics diag;
  double outer_err = 0.0;

  std::vector<std::unique_ptr<TierDetection>> td;
  std::vector<std::size_t> present;
  for (std::size_t k = 0; k < kt; ++k) {
    td.push_back(std::make_unique<TierDetection>(cfg, opt, k, theta[k]));
    if (cfg.tiers[k].density > 0.0) present.push_back(k);
  }

  TemporalResult out;
  if (opt.compat_eq20) {
    std::vector<double> inc, hit;
    bool over = false;
    for (std::size_t k : present) {
      auto bp = td[k]->breakpoints();
      auto q = integrate([&](double u) { return cfg.channel.object_prob * td[k]->literal_density(u, diag); }, 0.0, r2,
                         opt.quad_tol, bp);
      outer_err += q.abs_error;
      inc.push_back(1.0);
      hit.push_back(q.value);
      over = over || q.value > 1.0;
    }
    out.single = finish(fused_probability(inc, hit, cfg.fusion), diag, outer_err);
    out.single.exceeds_unit = over || out.single.value > 1.0;
    out.joint = out.single;
    return out;
  }

  const double vs = cfg.fusion.varsigma;
  if (vs == 0.0) {
    std::vector<TierOutcome> single(present.size()), joint(present.size());
    for (std::size_t m = 0; m < present.size(); ++m) {
      const std::size_t k = present[m];
      auto bp = td[k]->breakpoints();
      auto q1 = integrate([&](double u) { return td[k]->success_density(u, false, diag); }, 0.0, r2, opt.quad_tol, bp);
      outer_err += q1.abs_error;
      const double p1 = q1.value;
      single[m].hit_both = p1;
      single[m].miss_both = 1.0 - p1;
      if (want_joint) {
        auto q2 = integrate([&](double u) { return td[k]->success_density(u, true, diag); }, 0.0, r2, opt.quad_tol, bp);
        outer_err += q2.abs_error;
        const double p11 = q2.value;
        joint[m].hit_both = p11;
        joint[m].hit_first = p1 - p11;
        joint[m].hit_second = p1 - p11;
        joint[m].miss_both = 1.0 - 2.0 * p1 + p11;
      }
    }
    out.single = finish(zeta * fused_joint_probability(single, cfg.fusion), diag, zeta * outer_err);
    if (want_joint) out.joint = finish(zeta * fused_joint_probability(joint, cfg.fusion), diag, zeta * outer_err);
  } else {
    // Outer integral over the closest tier m at squared distance x. Tier k != m is
    // farther than x; it keeps its weight while its squared distance is below x / vs^2.
    std::vector<std::unique_ptr<Cumulative>> h1(kt), h11(kt);
    for (std::size_t k : present) {
      auto bp = td[k]->breakpoints();
      TierDetection* t = td[k].get();
      h1[k] = std::make_unique<Cumulative>([t, &diag](double u) { return t->success_density(u, false, diag); }, r2,
                                           opt.quad_tol, bp);
      outer_err += h1[k]->error();
      if (want_joint) {
        h11[k] = std::make_unique<Cumulative>([t, &diag](double u) { return t->success_density(u, true, diag); }, r2,
                                              opt.quad_tol, bp);
        outer_err += h11[k]->error();
      }
    }
    const double inv = 1.0 / (vs * vs);
    auto integrand = [&](std::size_t m, double x, bool joint) {
      std::vector<TierOutcome> st;
      st.reserve(present.size());
      for (std::size_t k : present) {
        TierOutcome o;
        if (k == m) {
          const double g = td[k]->law().pdf(x);
          const double a = td[k]->success_density(x, false, diag);
          const double b = joint ? td[k]->success_density(x, true, diag) : a;
          o.hit_both = b;
          o.hit_first = o.hit_second = a - b;
          o.miss_both = g - 2.0 * a + b;
        } else {
          const double far = x * inv;
          const double g_lo = td[k]->law().cdf(x);
          const double g_hi = td[k]->law().cdf(far);
          const double a = h1[k]->at(std::min(far, r2)) - h1[k]->at(x);
          const double b = joint ? h11[k]->at(std::min(far, r2)) - h11[k]->at(x) : a;
          o.excluded = 1.0 - g_hi;
          o.hit_both = b;
          o.hit_first = o.hit_second = a - b;
          o.miss_both = (g_hi - g_lo) - 2.0 * a + b;
        }
        st.push_back(o);
      }
      return fused_joint_probability(st, cfg.fusion);
    };
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t m : present) {
      auto bp = td[m]->breakpoints();
      auto q = integrate([&](double x) { return integrand(m, x, false); }, 0.0, r2, opt.quad_tol, bp);
      s1 += q.value;
      outer_err += q.abs_error;
      if (want_joint) {
        auto qj = integrate([&](double x) { return integrand(m, x, true); }, 0.0, r2, opt.quad_tol, bp);
        s2 += qj.value;
        outer_err += qj.abs_error;
      }
    }
    out.single = finish(zeta * s1, diag, zeta * outer_err);
    if (want_joint) out.joint = finish(zeta * s2, diag, zeta * outer_err);
  }
  if (want_joint && out.single.value > 0.0) {
    out.conditional = out.joint.value / out.single.value;
    out.rho = out.joint.value / (out.single.value * out.single.value);
  }
  return out;
}

} // namespace detail

/// Fused CoMRD detection probability (single slot).
inline AnalyticResult comrd_detection_prob(std::span<const double> theta, const NetworkConfig& cfg,
                                           const AnalyticOptions& opt = {}) {
  return detail::fused_detection(theta, cfg, opt, false).single;
}

/// The same with every tier laid out as a PPP.
inline AnalyticResult comrd_detection_prob_ppp(std::span<const double> theta, const NetworkConfig& cfg,
                                               const AnalyticOptions& opt = {}) {
  NetworkConfig ppp = cfg;
  for (auto& t : ppp.tiers) t.poisson = true;
  AnalyticOptions o = opt;
  o.compat_eq20 = false;
  return detail::fused_detection(theta, ppp, o, false).single;
}

inline TemporalResult temporal_detection(std::span<const double> theta, const NetworkConfig& cfg,
                                         const AnalyticOptions& opt = {}) {
  AnalyticOptions o = opt;
  o.compat_eq20 = false;
  return detail::fused_detection(theta, cfg, o, true);
}

/// Probability of detecting the object in both slots.
inline AnalyticResult joint_detection_prob(std::span<const double> theta, const NetworkConfig& cfg,
                                           const AnalyticOptions& opt = {}) {
  return temporal_detection(theta, cfg, opt).joint;
}

inline double conditional_detection_prob(std::span<const double> theta, const NetworkConfig& cfg,
                                         const AnalyticOptions& opt = {}) {
  auto t = temporal_detection(theta, cfg, opt);
  if (!(t.single.value >= 1e-12)) throw std::domain_error("conditional detection: single-slot probability vanishes");
  return t.conditional;
}

inline double correlation_ratio(std::span<const double> theta, const NetworkConfig& cfg,
                                const AnalyticOptions& opt = {}) {
  auto t = temporal_detection(theta, cfg, opt);
  if (!(t.single.value >= 1e-12)) throw std::domain_error("correlation ratio: single-slot probability vanishes");
  return t.rho;
}

/// DL coverage bound for a user at distance d from a tier-k BS. Same-tier
/// interferers lie beyond d, other tiers anywhere inside R.
inline AnalyticResult dl_coverage_prob(double eta, double d, std::size_t k, const NetworkConfig& cfg,
                                       const AnalyticOptions& opt = {}) {
  if (eta < 0.0) throw std::domain_error("dl_coverage_prob: eta must be >= 0");
  const auto& c = cfg.channel;
  if (d > c.los_radius) throw std::domain_error("dl_coverage_prob: d must not exceed the LoS radius");
  InterfererField field(cfg, false, opt.factor_tol, opt.factor_tol);
  field.set_lower(k, d * d);
  const auto w = alzer_weights(c.nakagami_nu);
  const double rate = alzer_rate(c.nakagami_nu);
  const double p = power_control(d, cfg.tiers.at(k).power, c);
  const double base = eta * (c.pathloss_offset + std::pow(d, c.pathloss_exponent)) /
                      (p * c.mainlobe_gain * c.mainlobe_gain);
  detail::Diagnostics diag;
  double v = 0.0;
  for (std::size_t x = 0; x < w.size(); ++x) {
    const double sigma = base * static_cast<double>(x + 1) * rate;
    const double sig[] = {sigma};
    auto f = field.evaluate(sig);
    diag.absorb(f.abs_err, f.truncation, f.residual);
    v += w[x] * std::exp(-sigma * c.noise_var) * f.total();
  }
  return detail::finish(c.los_prob * v, diag);
}

/// Closed-form FA probability for omnidirectional PPP tiers with a = 4.
inline double false_alarm_prob(double theta, std::size_t k, const NetworkConfig& cfg) {
  const auto& c = cfg.channel;
  return (1.0 - c.los_prob) * c.object_prob /
         (1.0 + c.los_prob * std::sqrt(pi * theta) * cfg.tiers.at(k).density / c.blockage_density);
}

/// FA probability evaluated without the far-field limit: the blockage echo at
/// distance u (nearest-blockage law) against the configured interferer field, SIR only.
/// Echo fading enters through the Alzer sum, exact for nu = 1 and an upper bound otherwise.
inline AnalyticResult false_alarm_integral(double theta, std::size_t k, const NetworkConfig& cfg,
                                           const AnalyticOptions& opt = {}) {
  const auto& c = cfg.channel;
  InterfererField field(cfg, true, opt.factor_tol, opt.factor_tol);
  const double lb = c.blockage_density;
  const auto w = alzer_weights(c.nakagami_nu);
  const double rate = alzer_rate(c.nakagami_nu);
  detail::Diagnostics diag;
  auto integrand = [&](double u) {
    const double s = detection_scale(theta, u * u, k, cfg);
    double v = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) {
      const double sig[] = {s * static_cast<double>(x + 1) * rate};
      auto f = field.evaluate(sig);
      diag.absorb(f.abs_err, f.truncation, f.residual);
      v += w[x] * f.total();
    }
    return v * 2.0 * pi * lb * u * std::exp(-pi * lb * u * u);
  };
  std::vector<double> bp;
  const double mode = 1.0 / std::sqrt(2.0 * pi * lb);
  for (double m : {0.3, 1.0, 3.0}) detail::add_breakpoint(bp, mode * m, 0.0, c.los_radius);
  auto q = integrate(integrand, 0.0, c.los_radius, opt.quad_tol, bp);
  const double pre = (1.0 - c.los_prob) * c.object_prob;
  return detail::finish(pre * q.value, diag, pre * q.abs_error);
}

struct ThresholdResult {
  double theta = 0.0;
  bool trivially_met = false; // target at or above the FA ceiling
  bool attainable = true;
};

/// Closed-form CFAR threshold as published for tier k.
inline ThresholdResult detection_threshold(double target_fa, std::size_t k, const NetworkConfig& cfg) {
  const auto& c = cfg.channel;
  const double ceiling = (1.0 - c.los_prob) * c.object_prob;
  if (!(target_fa > 0.0)) return {std::numeric_limits<double>::infinity(), false, false};
  if (target_fa >= ceiling) return {0.0, true, true};
  const double lk = cfg.tiers.at(k).density;
  const double r = 1.0 - ceiling / target_fa;
  return {c.rcs * c.blockage_density * c.blockage_density / (lk * lk * c.los_prob * pi * pi * pi * c.los_radius * c.los_radius) * r * r,
          false, true};
}

/// Algebraic inverse of the closed-form FA probability.
inline ThresholdResult detection_threshold_inverse(double target_fa, std::size_t k, const NetworkConfig& cfg) {
  const auto& c = cfg.channel;
  const double ceiling = (1.0 - c.los_prob) * c.object_prob;
  if (!(target_fa > 0.0)) return {std::numeric_limits<double>::infinity(), false, false};
  if (target_fa >= ceiling) return {0.0, true, true};
  const double lead = c.blockage_density / (cfg.tiers.at(k).density * c.los_prob * std::sqrt(pi));
  const double r = ceiling / target_fa - 1.0;
  return {lead * lead * r * r, false, true};
}

/// Threshold at which the FA integral equals the target, by bracketing in log theta.
inline ThresholdResult detection_threshold_numeric(double target_fa, std::size_t k, const NetworkConfig& cfg,
                                                   const AnalyticOptions& opt = {}) {
  auto fa = [&](double theta) { return false_alarm_integral(theta, k, cfg, opt).value; };
  const double top = fa(0.0);
  if (target_fa >= top) return {0.0, true, true};
  double lo = -120.0, hi = 120.0; // log10 theta
  if (fa(std::pow(10.0, hi)) > target_fa) return {std::numeric_limits<double>::infinity(), false, false};
  while (fa(std::pow(10.0, lo)) < target_fa) lo -= 40.0;
  auto g = [&](double e) { return fa(std::pow(10.0, e)) - target_fa; };
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(40), iters);
  return {std::pow(10.0, 0.5 * (r.first + r.second)), false, true};
}

} // namespace jcas
