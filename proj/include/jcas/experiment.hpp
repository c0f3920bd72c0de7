#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <locale>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jcas/analytic_engine.hpp"
#include "jcas/errors.hpp"
#include "jcas/monte_carlo.hpp"
#include "jcas/network.hpp"
#include "jcas/units.hpp"

namespace jcas {

using json = nlohmann::json;

enum class Mode { detection, false_alarm, temporal, coverage, compare };

inline Mode parse_mode(const std::string& s) {
  if (s == "detection") return Mode::detection;
  if (s == "false-alarm") return Mode::false_alarm;
  if (s == "temporal") return Mode::temporal;
  if (s == "coverage") return Mode::coverage;
  if (s == "compare") return Mode::compare;
  throw ConfigError("unknown mode '" + s + "'");
}

inline std::string to_string(Mode m) {
  switch (m) {
  case Mode::detection: return "detection";
  case Mode::false_alarm: return "false-alarm";
  case Mode::temporal: return "temporal";
  case Mode::coverage: return "coverage";
  case Mode::compare: return "compare";
  }
  return "?";
}

enum class ThresholdSource { given, closed_form, inverse, numeric };

struct DetectionSettings {
  std::vector<double> threshold_db; // one per tier
  ThresholdSource source = ThresholdSource::given;
  std::optional<double> target_fa;
};

struct FalseAlarmSettings {
  std::size_t tier = 0;
  double threshold_db = 0.0;
  std::optional<double> target_fa;
};

struct CoverageSettings {
  std::size_t tier = 0;
  double distance_m = 10.0;
  double eta_db = 0.0;
};

struct TemporalSettings {
  bool fresh_layout = false;
  bool redraw_alignment = false;
};

struct McSettings {
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct Sweep {
  std::string path;
  std::vector<std::string> tokens;
};

/// Everything needed to run one experiment. `document` is the canonical JSON
/// (defaults merged in), from which every other field is derived.
struct ExperimentSpec {
  Mode mode = Mode::detection;
  json document;
  NetworkConfig network;
  DetectionSettings detection;
  FalseAlarmSettings false_alarm;
  CoverageSettings coverage;
  TemporalSettings temporal;
  std::vector<FusionRule> compare_rules;
  AnalyticOptions analytic;
  McSettings mc;
  std::optional<Sweep> sweep;
};

/// Reference values in configuration units. Blockage density and object
/// probability are deliberately absent: every configuration must state them.
inline json default_document() {
  return json::parse(R"({
    "tiers": [
      {"density_per_km2": 1, "power_dbm": 15, "beta": 0.9, "jcas_fraction": 0.8, "poisson": false},
      {"density_per_km2": 2, "power_dbm": 10, "beta": 0.9, "jcas_fraction": 0.8, "poisson": false},
      {"density_per_km2": 4, "power_dbm": 5, "beta": 0.9, "jcas_fraction": 0.8, "poisson": false}
    ],
    "channel": {
      "pathloss_exponent": 4, "pathloss_offset": 1, "nakagami_nu": 2, "los_prob": 0.7,
      "los_radius_m": 400, "beamwidth_deg": 30, "mainlobe_gain_db": 10, "carrier_freq_ghz": 30,
      "rcs_db": 10, "noise_var_db": -60, "si_mu": 4, "si_var_db": -60, "pc_rho_db": -40,
      "pc_fraction": 0.9, "serving_distance_m": 10
    },
    "fusion": {"rule": "OR", "kappa": 1, "varsigma": 0},
    "detection": {"threshold_db": -200, "threshold_source": "given", "target_fa": null},
    "false_alarm": {"tier": 0, "threshold_db": 0, "target_fa": null},
    "coverage": {"tier": 0, "distance_m": 10, "eta_db": 0},
    "temporal": {"fresh_layout": false, "redraw_alignment": false},
    "compare": {"rules": ["OR", "MAJORITY", "AND"]},
    "analytic": {"quad_tol": 1e-8},
    "mc": {"trials": 10000, "seed": 1}
  })");
}

namespace detail {

/// Recursively overlays `user` onto `base`, reporting keys the base does not know.
inline void merge_into(json& base, const json& user, const std::string& where, std::vector<std::string>& errors) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (it.key() == "tiers") {
      base[it.key()] = it.value();
      continue;
    }
    if (base.is_object() && !base.contains(it.key()) && path != "channel.blockage_density_per_km2" &&
        path != "channel.object_prob") {
      errors.push_back(path + ": unknown field");
      continue;
    }
    if (it.value().is_object() && base[it.key()].is_object()) merge_into(base[it.key()], it.value(), path, errors);
    else base[it.key()] = it.value();
  }
}

class Reader {
public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  const json* find(const json& obj, const std::string& key, const std::string& path, bool required = true) {
    if (obj.is_object() && obj.contains(key)) return &obj.at(key);
    if (required) errors_.push_back(path + ": required field is missing");
    return nullptr;
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback = 0.0) {
    const json* v = find(obj, key, path);
    if (!v) return fallback;
    if (!v->is_number()) {
      errors_.push_back(path + ": expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& path) {
    const json* v = find(obj, key, path, false);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) {
      errors_.push_back(path + ": expected a number or null");
      return std::nullopt;
    }
    return v->get<double>();
  }

  long integer(const json& obj, const std::string& key, const std::string& path, long fallback = 0) {
    const json* v = find(obj, key, path);
    if (!v) return fallback;
    if (!v->is_number_integer() && !(v->is_number() && std::floor(v->get<double>()) == v->get<double>())) {
      errors_.push_back(path + ": expected an integer");
      return fallback;
    }
    return v->get<long>();
  }

  bool boolean(const json& obj, const std::string& key, const std::string& path, bool fallback = false) {
    const json* v = find(obj, key, path);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      errors_.push_back(path + ": expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& path, std::string fallback = {}) {
    const json* v = find(obj, key, path);
    if (!v) return fallback;
    if (!v->is_string()) {
      errors_.push_back(path + ": expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  void error(std::string msg) { errors_.push_back(std::move(msg)); }

private:
  std::vector<std::string>& errors_;
};

inline std::optional<FusionRule> try_rule(const std::string& s) {
  try {
    return parse_fusion_rule(s);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

} // namespace detail

/// Builds a spec from a canonical document, listing every problem at once.
inline ExperimentSpec spec_from_document(const json& doc, Mode mode) {
  std::vector<std::string> errors;
  detail::Reader rd(errors);
  ExperimentSpec spec;
  spec.mode = mode;
  spec.document = doc;

  const json* tiers = rd.find(doc, "tiers", "tiers");
  if (tiers && (!tiers->is_array() || tiers->empty())) {
    rd.error("tiers: expected a non-empty array");
    tiers = nullptr;
  }
  if (tiers) {
    for (std::size_t k = 0; k < tiers->size(); ++k) {
      const json& t = (*tiers)[k];
      const std::string p = "tiers[" + std::to_string(k) + "]";
      if (!t.is_object()) {
        rd.error(p + ": expected an object");
        continue;
      }
      for (auto it = t.begin(); it != t.end(); ++it)
        if (it.key() != "density_per_km2" && it.key() != "power_dbm" && it.key() != "beta" &&
            it.key() != "jcas_fraction" && it.key() != "poisson")
          rd.error(p + "." + it.key() + ": unknown field");
      TierConfig tc;
      tc.density = per_km2_to_per_m2(rd.number(t, "density_per_km2", p + ".density_per_km2"));
      tc.power = dbm_to_watt(rd.number(t, "power_dbm", p + ".power_dbm"));
      tc.beta = rd.number(t, "beta", p + ".beta", 1.0);
      tc.jcas_fraction = rd.number(t, "jcas_fraction", p + ".jcas_fraction");
      tc.poisson = t.contains("poisson") ? rd.boolean(t, "poisson", p + ".poisson") : false;
      spec.network.tiers.push_back(tc);
    }
  }

  const json empty = json::object();
  const json* chp = rd.find(doc, "channel", "channel");
  const json& ch = chp ? *chp : empty;
  auto& c = spec.network.channel;
  c.pathloss_exponent = rd.number(ch, "pathloss_exponent", "channel.pathloss_exponent");
  c.pathloss_offset = rd.number(ch, "pathloss_offset", "channel.pathloss_offset");
  c.nakagami_nu = static_cast<int>(rd.integer(ch, "nakagami_nu", "channel.nakagami_nu", 1));
  c.los_prob = rd.number(ch, "los_prob", "channel.los_prob");
  c.los_radius = rd.number(ch, "los_radius_m", "channel.los_radius_m");
  c.beamwidth = rd.number(ch, "beamwidth_deg", "channel.beamwidth_deg") * pi / 180.0;
  c.mainlobe_gain = db_to_linear(rd.number(ch, "mainlobe_gain_db", "channel.mainlobe_gain_db"));
  c.carrier_freq = rd.number(ch, "carrier_freq_ghz", "channel.carrier_freq_ghz") * 1e9;
  c.rcs = db_to_linear(rd.number(ch, "rcs_db", "channel.rcs_db"));
  c.noise_var = db_to_linear(rd.number(ch, "noise_var_db", "channel.noise_var_db"));
  c.si_mu = static_cast<int>(rd.integer(ch, "si_mu", "channel.si_mu", 1));
  if (ch.contains("si_var_db") && ch.at("si_var_db").is_null()) c.si_var = 0.0;
  else c.si_var = db_to_linear(rd.number(ch, "si_var_db", "channel.si_var_db"));
  c.pc_rho = db_to_linear(rd.number(ch, "pc_rho_db", "channel.pc_rho_db"));
  c.pc_fraction = rd.number(ch, "pc_fraction", "channel.pc_fraction");
  c.blockage_density = per_km2_to_per_m2(rd.number(ch, "blockage_density_per_km2", "channel.blockage_density_per_km2"));
  c.object_prob = rd.number(ch, "object_prob", "channel.object_prob");
  c.serving_distance = rd.number(ch, "serving_distance_m", "channel.serving_distance_m");

  const json* fu = rd.find(doc, "fusion", "fusion");
  if (fu) {
    const std::string rule = rd.string(*fu, "rule", "fusion.rule", "OR");
    if (auto r = detail::try_rule(rule)) spec.network.fusion.rule = *r;
    else rd.error("fusion.rule: expected OR, MAJORITY, AND or K_OUT_OF_N");
    spec.network.fusion.kappa = static_cast<int>(rd.integer(*fu, "kappa", "fusion.kappa", 1));
    spec.network.fusion.varsigma = rd.number(*fu, "varsigma", "fusion.varsigma");
  }

  const std::size_t kt = spec.network.tiers.size();
  const json* de = rd.find(doc, "detection", "detection");
  if (de) {
    const json* th = rd.find(*de, "threshold_db", "detection.threshold_db");
    if (th && th->is_number()) spec.detection.threshold_db.assign(kt, th->get<double>());
    else if (th && th->is_array() && th->size() == kt && std::all_of(th->begin(), th->end(), [](const json& v) { return v.is_number(); }))
      for (const auto& v : *th) spec.detection.threshold_db.push_back(v.get<double>());
    else if (th) rd.error("detection.threshold_db: expected a number or one number per tier");
    const std::string src = rd.string(*de, "threshold_source", "detection.threshold_source", "given");
    if (src == "given") spec.detection.source = ThresholdSource::given;
    else if (src == "closed_form") spec.detection.source = ThresholdSource::closed_form;
    else if (src == "inverse") spec.detection.source = ThresholdSource::inverse;
    else if (src == "numeric") spec.detection.source = ThresholdSource::numeric;
    else rd.error("detection.threshold_source: expected given, closed_form, inverse or numeric");
    spec.detection.target_fa = rd.optional_number(*de, "target_fa", "detection.target_fa");
    if (spec.detection.source != ThresholdSource::given && !spec.detection.target_fa)
      rd.error("detection.target_fa: required when threshold_source is not 'given'");
  }

  const json* fa = rd.find(doc, "false_alarm", "false_alarm");
  if (fa) {
    spec.false_alarm.tier = static_cast<std::size_t>(rd.integer(*fa, "tier", "false_alarm.tier"));
    spec.false_alarm.threshold_db = rd.number(*fa, "threshold_db", "false_alarm.threshold_db");
    spec.false_alarm.target_fa = rd.optional_number(*fa, "target_fa", "false_alarm.target_fa");
    if (spec.false_alarm.tier >= kt && kt > 0) rd.error("false_alarm.tier: out of range");
  }

  const json* co = rd.find(doc, "coverage", "coverage");
  if (co) {
    spec.coverage.tier = static_cast<std::size_t>(rd.integer(*co, "tier", "coverage.tier"));
    spec.coverage.distance_m = rd.number(*co, "distance_m", "coverage.distance_m");
    spec.coverage.eta_db = rd.number(*co, "eta_db", "coverage.eta_db");
    if (spec.coverage.tier >= kt && kt > 0) rd.error("coverage.tier: out of range");
    if (spec.coverage.distance_m > c.los_radius) rd.error("coverage.distance_m: must not exceed los_radius_m");
  }

  const json* te = rd.find(doc, "temporal", "temporal");
  if (te) {
    spec.temporal.fresh_layout = rd.boolean(*te, "fresh_layout", "temporal.fresh_layout");
    spec.temporal.redraw_alignment = rd.boolean(*te, "redraw_alignment", "temporal.redraw_alignment");
  }

  const json* cm = rd.find(doc, "compare", "compare");
  if (cm) {
    const json* rules = rd.find(*cm, "rules", "compare.rules");
    if (rules && rules->is_array() && !rules->empty()) {
      for (const auto& r : *rules) {
        auto fr = r.is_string() ? detail::try_rule(r.get<std::string>()) : std::nullopt;
        if (fr) spec.compare_rules.push_back(*fr);
        else rd.error("compare.rules: unknown rule");
      }
    } else if (rules) {
      rd.error("compare.rules: expected a non-empty array");
    }
  }

  const json* an = rd.find(doc, "analytic", "analytic");
  if (an) {
    spec.analytic.quad_tol = rd.number(*an, "quad_tol", "analytic.quad_tol", 1e-8);
    if (!(spec.analytic.quad_tol > 0.0)) rd.error("analytic.quad_tol: must be > 0");
  }

  const json* mc = rd.find(doc, "mc", "mc");
  if (mc) {
    const long trials = rd.integer(*mc, "trials", "mc.trials", 1);
    if (trials < 1) rd.error("mc.trials: must be >= 1");
    spec.mc.trials = static_cast<std::uint64_t>(std::max(1L, trials));
    const json* seed = rd.find(*mc, "seed", "mc.seed");
    if (seed && seed->is_number_unsigned()) spec.mc.seed = seed->get<std::uint64_t>();
    else if (seed && seed->is_number_integer() && seed->get<long long>() >= 0) spec.mc.seed = seed->get<std::uint64_t>();
    else if (seed) rd.error("mc.seed: expected a non-negative integer");
  }

  if (errors.empty()) {
    auto more = spec.network.problems();
    errors.insert(errors.end(), more.begin(), more.end());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return spec;
}

/// Defaults overlaid with the user's document. Blockage density and object
/// probability have no default. Unknown keys are appended to `errors`.
inline json canonical_document(const json& user, std::vector<std::string>& errors) {
  if (!user.is_object()) throw ConfigError("configuration: top level must be a JSON object");
  json doc = default_document();
  detail::merge_into(doc, user, "", errors);
  return doc;
}

inline ExperimentSpec load_config_text(const std::string& text, Mode mode) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration: invalid JSON: ") + e.what());
  }
  std::vector<std::string> errors;
  json doc = canonical_document(user, errors);
  std::optional<ExperimentSpec> spec;
  try {
    spec = spec_from_document(doc, mode);
  } catch (const ConfigError& e) {
    errors.insert(errors.end(), e.issues().begin(), e.issues().end());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return std::move(*spec);
}

inline ExperimentSpec load_config(const std::string& path, Mode mode = Mode::detection) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read configuration file '" + path + "'");
  return load_config_text(ss.str(), mode);
}

/// "key=v1,v2,..." with a dot path; array indices are numbers and '*' selects every element.
inline Sweep parse_sweep(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= arg.size())
    throw ConfigError("sweep: expected key=v1,v2,...");
  Sweep s;
  s.path = arg.substr(0, eq);
  std::string rest = arg.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string tok = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok.empty()) throw ConfigError("sweep: empty value in '" + arg + "'");
    s.tokens.push_back(tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return s;
}

namespace detail {

inline json token_value(const std::string& tok) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok == "null") return nullptr;
  std::istringstream is(tok);
  is.imbue(std::locale::classic());
  double v = 0.0;
  if (is >> v && is.peek() == std::char_traits<char>::eof()) return v;
  return tok;
}

inline void assign_path(json& node, const std::vector<std::string>& parts, std::size_t at, const json& value,
                        const std::string& full) {
  const std::string& key = parts[at];
  const bool last = at + 1 == parts.size();
  auto apply = [&](json& child) {
    if (last) {
      if (child.is_object() || (child.is_array() && !child.empty() && child.front().is_object()))
        throw ConfigError("sweep: '" + full + "' does not name a scalar field");
      child = value;
    } else {
      assign_path(child, parts, at + 1, value, full);
    }
  };
  if (node.is_array()) {
    if (key == "*") {
      if (node.empty()) throw ConfigError("sweep: '" + full + "' selects an empty array");
      for (auto& child : node) apply(child);
      return;
    }
    char* end = nullptr;
    const unsigned long idx = std::strtoul(key.c_str(), &end, 10);
    if (key.empty() || *end != '\0' || idx >= node.size())
      throw ConfigError("sweep: '" + full + "' has an invalid index '" + key + "'");
    apply(node[idx]);
    return;
  }
  if (!node.is_object() || !node.contains(key)) throw ConfigError("sweep: '" + full + "' does not resolve");
  apply(node[key]);
}

} // namespace detail

inline json apply_override(json doc, const std::string& path, const json& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("sweep: malformed path '" + path + "'");
  detail::assign_path(doc, parts, 0, value, path);
  return doc;
}

/// 64-bit FNV-1a of the canonical document dump.
inline std::uint64_t config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

using Row = std::vector<std::string>;

inline Row csv_header(Mode mode) {
  switch (mode) {
  case Mode::detection:
    return {"sweep_key", "sweep_value", "rule", "kappa", "varsigma", "theta_db", "analytic", "analytic_quad_err",
            "truncation_index", "residual_bound", "exceeds_unit", "mc_mean", "mc_std_err", "n_trials"};
  case Mode::compare:
    return {"sweep_key", "sweep_value", "rule", "kappa", "varsigma", "theta_db", "analytic", "analytic_quad_err",
            "mc_mean", "mc_std_err", "abs_diff", "tolerance", "exceeds_tolerance", "n_trials"};
  case Mode::temporal:
    return {"sweep_key", "sweep_value", "rule", "kappa", "varsigma", "theta_db", "analytic_single",
            "analytic_joint", "analytic_conditional", "analytic_rho", "mc_single", "mc_single_std_err", "mc_joint",
            "mc_joint_std_err", "mc_conditional", "mc_conditional_std_err", "mc_rho", "mc_rho_std_err",
            "rho_not_above_one", "n_trials"};
  case Mode::coverage:
    return {"sweep_key", "sweep_value", "tier", "distance_m", "eta_db", "analytic", "analytic_quad_err", "mc_mean",
            "mc_std_err", "n_trials"};
  case Mode::false_alarm:
    return {"sweep_key", "sweep_value", "tier", "target_fa", "threshold_source", "theta_db", "closed_form_fa",
            "integral_fa", "integral_quad_err", "mc_mean", "mc_std_err", "n_trials"};
  }
  return {};
}

inline std::string csv_line(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    const std::string& f = row[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out += '"';
      for (char ch : f) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    } else {
      out += f;
    }
  }
  return out;
}

struct RunSummary {
  std::size_t rows = 0;
  std::size_t flagged = 0;
  std::size_t max_truncation = 0;
  double max_residual = 0.0;
  bool exceeds_unit = false;
};

namespace detail {

inline double theta_db_of(double theta) { return theta > 0.0 ? linear_to_db(theta) : -std::numeric_limits<double>::infinity(); }

inline std::vector<double> detection_thresholds(const ExperimentSpec& s) {
  std::vector<double> th;
  for (std::size_t k = 0; k < s.network.tiers.size(); ++k) {
    switch (s.detection.source) {
    case ThresholdSource::given: th.push_back(db_to_linear(s.detection.threshold_db[k])); break;
    case ThresholdSource::closed_form: th.push_back(detection_threshold(*s.detection.target_fa, k, s.network).theta); break;
    case ThresholdSource::inverse: th.push_back(detection_threshold_inverse(*s.detection.target_fa, k, s.network).theta); break;
    case ThresholdSource::numeric:
      th.push_back(detection_threshold_numeric(*s.detection.target_fa, k, s.network, s.analytic).theta);
      break;
    }
  }
  return th;
}

inline std::string theta_list_db(std::span<const double> th) {
  std::string out;
  for (std::size_t k = 0; k < th.size(); ++k) {
    if (k) out += ';';
    out += format_number(theta_db_of(th[k]));
  }
  return out;
}

inline void note(RunSummary& sum, const AnalyticResult& r) {
  sum.max_truncation = std::max(sum.max_truncation, r.product_truncation_index);
  sum.max_residual = std::max(sum.max_residual, r.residual_bound);
  sum.exceeds_unit = sum.exceeds_unit || r.exceeds_unit;
}

inline void run_point(const ExperimentSpec& s, const std::string& key, const std::string& value,
                      const std::function<void(const Row&)>& sink, RunSummary& sum) {
  const auto& cfg = s.network;
  const std::string n = std::to_string(s.mc.trials);
  SimOptions sim;
  sim.workers = s.mc.workers;
  switch (s.mode) {
  case Mode::detection: {
    auto th = detection_thresholds(s);
    auto a = comrd_detection_prob(th, cfg, s.analytic);
    note(sum, a);
    auto e = estimate_detection(cfg, th, s.mc.trials, s.mc.seed, sim);
    sink({key, value, std::string(to_string(cfg.fusion.rule)), std::to_string(cfg.fusion.kappa),
          format_number(cfg.fusion.varsigma), theta_list_db(th), format_number(a.value),
          format_number(a.quadrature_abs_err), std::to_string(a.product_truncation_index),
          format_number(a.residual_bound), a.exceeds_unit ? "1" : "0", format_number(e.mean),
          format_number(e.std_err), n});
    sum.flagged += a.exceeds_unit;
    ++sum.rows;
    break;
  }
  case Mode::compare: {
    auto th = detection_thresholds(s);
    for (FusionRule rule : s.compare_rules) {
      NetworkConfig c2 = cfg;
      c2.fusion.rule = rule;
      auto a = comrd_detection_prob(th, c2, s.analytic);
      note(sum, a);
      auto e = estimate_detection(c2, th, s.mc.trials, s.mc.seed, sim);
      const double diff = std::abs(a.value - e.mean);
      const double tol = 3.0 * e.std_err + a.quadrature_abs_err;
      const bool flag = diff > tol;
      sink({key, value, std::string(to_string(rule)), std::to_string(c2.fusion.kappa),
            format_number(c2.fusion.varsigma), theta_list_db(th), format_number(a.value),
            format_number(a.quadrature_abs_err), format_number(e.mean), format_number(e.std_err),
            format_number(diff), format_number(tol), flag ? "1" : "0", n});
      sum.flagged += flag;
      ++sum.rows;
    }
    break;
  }
  case Mode::temporal: {
    auto th = detection_thresholds(s);
    auto a = temporal_detection(th, cfg, s.analytic);
    note(sum, a.single);
    note(sum, a.joint);
    sim.fresh_layout = s.temporal.fresh_layout;
    sim.redraw_alignment = s.temporal.redraw_alignment;
    auto e = estimate_joint_detection(cfg, th, s.mc.trials, s.mc.seed, sim);
    const bool flag = !(e.defined && e.rho > 1.0);
    sink({key, value, std::string(to_string(cfg.fusion.rule)), std::to_string(cfg.fusion.kappa),
          format_number(cfg.fusion.varsigma), theta_list_db(th), format_number(a.single.value),
          format_number(a.joint.value), format_number(a.conditional), format_number(a.rho),
          format_number(e.single.mean), format_number(e.single.std_err), format_number(e.joint.mean),
          format_number(e.joint.std_err), format_number(e.conditional), format_number(e.conditional_se),
          format_number(e.rho), format_number(e.rho_se), flag ? "1" : "0", n});
    sum.flagged += flag;
    ++sum.rows;
    break;
  }
  case Mode::coverage: {
    const auto& cv = s.coverage;
    const double eta = db_to_linear(cv.eta_db);
    auto a = dl_coverage_prob(eta, cv.distance_m, cv.tier, cfg, s.analytic);
    note(sum, a);
    auto e = estimate_dl_coverage(cfg, eta, cv.distance_m, cv.tier, s.mc.trials, s.mc.seed, s.mc.workers);
    sink({key, value, std::to_string(cv.tier), format_number(cv.distance_m), format_number(cv.eta_db),
          format_number(a.value), format_number(a.quadrature_abs_err), format_number(e.mean),
          format_number(e.std_err), n});
    ++sum.rows;
    break;
  }
  case Mode::false_alarm: {
    const auto& fa = s.false_alarm;
    std::vector<std::pair<std::string, double>> cases;
    if (fa.target_fa) {
      cases.emplace_back("closed_form", detection_threshold(*fa.target_fa, fa.tier, cfg).theta);
      cases.emplace_back("inverse", detection_threshold_inverse(*fa.target_fa, fa.tier, cfg).theta);
      cases.emplace_back("numeric", detection_threshold_numeric(*fa.target_fa, fa.tier, cfg, s.analytic).theta);
    } else {
      cases.emplace_back("given", db_to_linear(fa.threshold_db));
    }
    for (const auto& [src, theta] : cases) {
      auto a = false_alarm_integral(theta, fa.tier, cfg, s.analytic);
      note(sum, a);
      auto e = estimate_false_alarm(cfg, theta, fa.tier, s.mc.trials, s.mc.seed, s.mc.workers);
      sink({key, value, std::to_string(fa.tier), fa.target_fa ? format_number(*fa.target_fa) : "", src,
            format_number(theta_db_of(theta)), format_number(false_alarm_prob(theta, fa.tier, cfg)),
            format_number(a.value), format_number(a.quadrature_abs_err), format_number(e.mean),
            format_number(e.std_err), n});
      ++sum.rows;
    }
    break;
  }
  }
}

} // namespace detail

/// Runs every sweep point in order and hands each finished row to `sink`.
/// Sweep points share the base seed so that neighbouring points are paired.
inline RunSummary run_experiment(const ExperimentSpec& spec, const std::function<void(const Row&)>& sink) {
  RunSummary sum;
  if (!spec.sweep) {
    detail::run_point(spec, "", "", sink, sum);
    return sum;
  }
  for (const auto& tok : spec.sweep->tokens) {
    json doc = apply_override(spec.document, spec.sweep->path, detail::token_value(tok));
    ExperimentSpec point;
    try {
      point = spec_from_document(doc, spec.mode);
    } catch (const ConfigError& e) {
      std::vector<std::string> issues;
      for (const auto& i : e.issues()) issues.push_back(spec.sweep->path + "=" + tok + ": " + i);
      throw ConfigError(std::move(issues));
    }
    point.mc = spec.mc;
    point.analytic.compat_eq20 = spec.analytic.compat_eq20;
    point.analytic.compat_eq24 = spec.analytic.compat_eq24;
    detail::run_point(point, spec.sweep->path, tok, sink, sum);
  }
  return sum;
}

/// Provenance: enough to regenerate every row bit for bit.
inline json seed_report(const ExperimentSpec& spec, const RunSummary* summary = nullptr) {
  json r;
  r["mode"] = to_string(spec.mode);
  r["base_seed"] = spec.mc.seed;
  r["n_trials"] = spec.mc.trials;
  r["workers"] = spec.mc.workers;
  r["config_hash"] = [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(spec.document)));
    return std::string(buf);
  }();
  r["streams"] = {{"layout", static_cast<int>(Stream::layout)},
                  {"slot_a", static_cast<int>(Stream::slot_a)},
                  {"slot_b", static_cast<int>(Stream::slot_b)},
                  {"fresh_layout", static_cast<int>(Stream::fresh_layout)},
                  {"false_alarm", static_cast<int>(Stream::false_alarm)},
                  {"coverage", static_cast<int>(Stream::coverage)}};
  r["seed_derivation"] = "splitmix64(splitmix64(base) ^ splitmix64(trial + c)) ^ stream";
  r["compat"] = {{"eq20", spec.analytic.compat_eq20}, {"eq24", spec.analytic.compat_eq24}};
  if (spec.sweep) r["sweep"] = {{"path", spec.sweep->path}, {"values", spec.sweep->tokens}};
  else r["sweep"] = nullptr;
  if (summary) {
    r["analytic_truncation_index"] = summary->max_truncation;
    r["analytic_residual_bound"] = summary->max_residual;
    r["rows"] = summary->rows;
    r["flagged_rows"] = summary->flagged;
  }
  r["config"] = spec.document;
  return r;
}

} // namespace jcas
