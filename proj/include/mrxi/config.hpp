#ifndef MRXI_CONFIG_HPP
#define MRXI_CONFIG_HPP

// Experiment configuration: flat key=value text with '#' comments, resolved as
// preset < file < command-line overrides.

#include "mrxi/criteria.hpp"
#include "mrxi/grid.hpp"
#include "mrxi/optimize.hpp"
#include "mrxi/random.hpp"
#include "mrxi/sequential.hpp"
#include "mrxi/tv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mrxi {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RoiKind { Full, LeftHalf, Indicator };

struct ExperimentConfig {
  std::string experiment = "custom";
  std::string variant = "a";   // gaussian-roi only
  std::string scale = "desk";  // desk | paper
  double rho = 0.5;
  double eta = 1.0;
  double ell = 0.15;
  double gamma_sd = 1.0;
  int n_recon = 40;
  int n_opt = 20;
  int n_data = 48;
  int n_act = 10;
  int n_sensors = 36;
  CriterionKind criterion = CriterionKind::A;
  RoiKind roi = RoiKind::Full;
  HalfPlane roi_region{};  // for roi=indicator
  DesignMethod method = DesignMethod::Newton;
  Phantom phantom = Phantom::p_shaped();
  TvConfig tv{};
  OptimizerConfig opt{};
  int resolution = 100;
  bool refine_exhaustive = false;
  int landscape_step = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  std::vector<std::string> warnings;  // filled by validation

  bool is_tv() const { return experiment == "tv-1" || experiment == "tv-2"; }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline double positive(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!(x > 0.0)) throw ConfigError("config key '" + key + "': must be positive, got '" + v + "'");
  return x;
}

inline int int_at_least(const std::string& key, const std::string& v, long long lo) {
  const long long x = to_integer(key, v);
  if (x < lo || x > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "': must be an integer >= " + std::to_string(lo) + ", got '" + v + "'");
  return static_cast<int>(x);
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MRXI_DOUBLE_KEY(NAME, FIELD, CHECK) \
  Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = CHECK(NAME, v); }, \
      [](const ExperimentConfig& c) { return fmt(c.FIELD); }}
#define MRXI_INT_KEY(NAME, FIELD, LO) \
  Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = int_at_least(NAME, v, LO); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }}

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"experiment",
          [](ExperimentConfig& c, const std::string& v) {
            if (v != "gaussian-1" && v != "gaussian-roi" && v != "tv-1" && v != "tv-2" && v != "custom")
              throw ConfigError("config key 'experiment': unknown experiment '" + v +
                                "' (expected gaussian-1, gaussian-roi, tv-1, tv-2 or custom)");
            c.experiment = v;
          },
          [](const ExperimentConfig& c) { return c.experiment; }},
      Key{"variant",
          [](ExperimentConfig& c, const std::string& v) {
            if (v != "a" && v != "b") throw ConfigError("config key 'variant': expected a or b, got '" + v + "'");
            c.variant = v;
          },
          [](const ExperimentConfig& c) { return c.variant; }},
      Key{"scale",
          [](ExperimentConfig& c, const std::string& v) {
            if (v != "desk" && v != "paper") throw ConfigError("config key 'scale': expected desk or paper, got '" + v + "'");
            c.scale = v;
          },
          [](const ExperimentConfig& c) { return c.scale; }},
      MRXI_DOUBLE_KEY("rho", rho, positive),
      MRXI_DOUBLE_KEY("eta", eta, positive),
      MRXI_DOUBLE_KEY("ell", ell, positive),
      MRXI_DOUBLE_KEY("gamma_sd", gamma_sd, positive),
      MRXI_INT_KEY("n_recon", n_recon, 4),
      MRXI_INT_KEY("n_opt", n_opt, 4),
      MRXI_INT_KEY("n_data", n_data, 4),
      MRXI_INT_KEY("n_act", n_act, 0),
      MRXI_INT_KEY("n_sensors", n_sensors, 1),
      Key{"criterion",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "A") c.criterion = CriterionKind::A;
            else if (v == "D") c.criterion = CriterionKind::D;
            else throw ConfigError("config key 'criterion': expected A or D, got '" + v + "'");
          },
          [](const ExperimentConfig& c) { return std::string(c.criterion == CriterionKind::A ? "A" : "D"); }},
      Key{"roi",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "full") c.roi = RoiKind::Full;
            else if (v == "left-half") c.roi = RoiKind::LeftHalf;
            else if (v == "custom-indicator") c.roi = RoiKind::Indicator;
            else throw ConfigError("config key 'roi': expected full, left-half or custom-indicator, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.roi == RoiKind::Full ? "full" : c.roi == RoiKind::LeftHalf ? "left-half" : "custom-indicator");
          }},
      Key{"roi_side",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "left") c.roi_region.side = HalfPlane::Side::Left;
            else if (v == "right") c.roi_region.side = HalfPlane::Side::Right;
            else throw ConfigError("config key 'roi_side': expected left or right, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.roi_region.side == HalfPlane::Side::Left ? "left" : "right");
          }},
      Key{"roi_offset", [](ExperimentConfig& c, const std::string& v) { c.roi_region.offset = to_double("roi_offset", v); },
          [](const ExperimentConfig& c) { return fmt(c.roi_region.offset); }},
      Key{"method",
          [](ExperimentConfig& c, const std::string& v) {
            try {
              c.method = parse_method(v);
            } catch (const std::invalid_argument&) {
              throw ConfigError("config key 'method': expected gd, newton, exhaustive or reference, got '" + v + "'");
            }
          },
          [](const ExperimentConfig& c) { return to_string(c.method); }},
      Key{"phantom",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "p-shape") c.phantom.kind = Phantom::Kind::PShape;
            else if (v == "constant") c.phantom.kind = Phantom::Kind::Constant;
            else if (v == "indicator") c.phantom.kind = Phantom::Kind::Indicator;
            else throw ConfigError("config key 'phantom': expected p-shape, constant or indicator, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
            switch (c.phantom.kind) {
              case Phantom::Kind::Constant: return std::string("constant");
              case Phantom::Kind::Indicator: return std::string("indicator");
              default: return std::string("p-shape");
            }
          }},
      Key{"phantom_background",
          [](ExperimentConfig& c, const std::string& v) { c.phantom.background = to_double("phantom_background", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.background); }},
      Key{"phantom_inclusion",
          [](ExperimentConfig& c, const std::string& v) { c.phantom.inclusion = to_double("phantom_inclusion", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.inclusion); }},
      Key{"phantom_side",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "left") c.phantom.region.side = HalfPlane::Side::Left;
            else if (v == "right") c.phantom.region.side = HalfPlane::Side::Right;
            else throw ConfigError("config key 'phantom_side': expected left or right, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
            return std::string(c.phantom.region.side == HalfPlane::Side::Left ? "left" : "right");
          }},
      Key{"phantom_offset",
          [](ExperimentConfig& c, const std::string& v) { c.phantom.region.offset = to_double("phantom_offset", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.region.offset); }},
      Key{"pshape_stem_xmin", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.stem_x0 = to_double("pshape_stem_xmin", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.stem_x0); }},
      Key{"pshape_stem_ymin", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.stem_y0 = to_double("pshape_stem_ymin", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.stem_y0); }},
      Key{"pshape_stem_xmax", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.stem_x1 = to_double("pshape_stem_xmax", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.stem_x1); }},
      Key{"pshape_stem_ymax", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.stem_y1 = to_double("pshape_stem_ymax", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.stem_y1); }},
      Key{"pshape_loop_cx", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.loop_cx = to_double("pshape_loop_cx", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.loop_cx); }},
      Key{"pshape_loop_cy", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.loop_cy = to_double("pshape_loop_cy", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.loop_cy); }},
      Key{"pshape_loop_outer", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.loop_outer = positive("pshape_loop_outer", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.loop_outer); }},
      Key{"pshape_loop_inner", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.loop_inner = to_double("pshape_loop_inner", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.loop_inner); }},
      Key{"pshape_loop_xmin", [](ExperimentConfig& c, const std::string& v) { c.phantom.p_shape.loop_min_x = to_double("pshape_loop_xmin", v); },
          [](const ExperimentConfig& c) { return fmt(c.phantom.p_shape.loop_min_x); }},
      MRXI_DOUBLE_KEY("T", tv.T, positive),
      MRXI_DOUBLE_KEY("gamma", tv.gamma, positive),
      MRXI_DOUBLE_KEY("tau", tv.tau, positive),
      MRXI_INT_KEY("tv_max_iters", tv.max_iters, 1),
      MRXI_DOUBLE_KEY("epsilon", opt.epsilon, positive),
      MRXI_DOUBLE_KEY("lambda0", opt.lambda0, positive),
      MRXI_INT_KEY("max_iters", opt.max_iters, 1),
      MRXI_DOUBLE_KEY("delta", opt.delta, positive),
      MRXI_INT_KEY("n_wolfe", opt.n_wolfe, 0),
      MRXI_DOUBLE_KEY("beta1", opt.beta1, positive),
      MRXI_DOUBLE_KEY("beta2", opt.beta2, positive),
      MRXI_INT_KEY("resolution", resolution, 1),
      Key{"refine_exhaustive",
          [](ExperimentConfig& c, const std::string& v) { c.refine_exhaustive = to_bool("refine_exhaustive", v); },
          [](const ExperimentConfig& c) { return std::string(c.refine_exhaustive ? "true" : "false"); }},
      MRXI_INT_KEY("landscape_step", landscape_step, 1),
      Key{"seed",
          [](ExperimentConfig& c, const std::string& v) {
            std::uint64_t s = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
            if (ec != std::errc() || ptr != v.data() + v.size())
              throw ConfigError("config key 'seed': expected a nonnegative integer, got '" + v + "'");
            c.seed = s;
          },
          [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      Key{"output_dir",
          [](ExperimentConfig& c, const std::string& v) {
            if (v.empty()) throw ConfigError("config key 'output_dir': must not be empty");
            c.output_dir = v;
          },
          [](const ExperimentConfig& c) { return c.output_dir; }},
  };
  return table;
}

#undef MRXI_DOUBLE_KEY
#undef MRXI_INT_KEY

inline const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace config_detail

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Splits `key=value` lines; '#' starts a comment. `origin` names the source in messages.
inline ConfigEntries parse_entries(std::istream& is, const std::string& origin) {
  ConfigEntries out;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key=value, got '" + line + "'");
    std::string key = config_detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), config_detail::trim(line.substr(eq + 1)));
  }
  return out;
}

inline ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_entries(in, path);
}

/// Parses one `key=value` override.
inline std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not of the form key=value");
  std::string key = config_detail::trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + text + "' has an empty key");
  return {key, config_detail::trim(text.substr(eq + 1))};
}

/// Grid sides for the desk (default) and paper scales.
inline void apply_scale(ExperimentConfig& c) {
  if (c.scale == "paper") {
    c.n_recon = 74;
    c.n_opt = 34;
    c.n_data = 81;
  } else {
    c.n_recon = 40;
    c.n_opt = 20;
    c.n_data = 48;
  }
}

inline void apply_preset(ExperimentConfig& c) {
  const std::string& e = c.experiment;
  if (e == "gaussian-1") {
    c.rho = 0.5, c.eta = 1.0, c.ell = 0.15, c.gamma_sd = 1.0, c.n_act = 10;
    c.criterion = CriterionKind::A, c.roi = RoiKind::Full, c.method = DesignMethod::Newton;
  } else if (e == "gaussian-roi") {
    if (c.variant == "b") c.rho = 5.0, c.eta = 0.1, c.ell = 1.5;
    else c.rho = 0.5, c.eta = 1.0, c.ell = 0.15;
    c.gamma_sd = 1.0, c.n_act = 10;
    c.criterion = CriterionKind::A, c.roi = RoiKind::LeftHalf, c.method = DesignMethod::Newton;
  } else if (e == "tv-1" || e == "tv-2") {
    if (e == "tv-1") c.rho = 0.5, c.eta = 0.1;
    else c.rho = 5.0, c.eta = 0.01;
    c.n_act = 15;
    c.criterion = CriterionKind::A, c.roi = RoiKind::Full, c.method = DesignMethod::Exhaustive;
    c.phantom = Phantom::p_shaped();
  }
}

inline void validate(ExperimentConfig& c) {
  c.warnings.clear();
  try {
    c.tv.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("config keys 'T', 'gamma', 'tau', 'tv_max_iters': ") + err.what());
  }
  if (!(c.opt.beta1 < c.opt.beta2 && c.opt.beta2 < 1.0))
    throw ConfigError("config keys 'beta1', 'beta2': need 0 < beta1 < beta2 < 1");
  if (c.is_tv() && c.n_act < 1) throw ConfigError("config key 'n_act': sequential experiments need n_act >= 1");
  if (c.is_tv() && c.criterion != CriterionKind::A)
    throw ConfigError("config key 'criterion': sequential experiments use A-optimality only");
  if (c.criterion == CriterionKind::D && c.roi != RoiKind::Full)
    throw ConfigError("config key 'roi': D-optimality supports roi=full only");
  if (!c.is_tv() && c.method != DesignMethod::GradientDescent && c.method != DesignMethod::Newton)
    throw ConfigError("config key 'method': Gaussian experiments use gd or newton");
  if (c.phantom.kind == Phantom::Kind::PShape && !(c.phantom.p_shape.loop_inner < c.phantom.p_shape.loop_outer))
    throw ConfigError("config key 'pshape_loop_inner': must be smaller than pshape_loop_outer");
  if (!(c.n_opt <= c.n_recon && c.n_recon <= c.n_data))
    c.warnings.push_back("grid sides are not ordered n_opt <= n_recon <= n_data");
  if (c.landscape_step > std::max(c.n_act, 1))
    throw ConfigError("config key 'landscape_step': must not exceed n_act");
}

/// Resolves preset < file < overrides. The experiment (and variant and scale)
/// are looked up first so that their defaults can be laid down before any
/// other key is applied.
inline ExperimentConfig resolve_config(const ConfigEntries& file, const ConfigEntries& overrides) {
  auto lookup = [&](const std::string& key) -> std::optional<std::string> {
    std::optional<std::string> v;
    for (const auto& [k, val] : file)
      if (k == key) v = val;
    for (const auto& [k, val] : overrides)
      if (k == key) v = val;
    return v;
  };
  for (const auto* list : {&file, &overrides})
    for (const auto& [k, v] : *list) (void)config_detail::find_key(k);

  ExperimentConfig c;
  const auto experiment = lookup("experiment");
  if (!experiment) throw ConfigError("config key 'experiment' is required (gaussian-1, gaussian-roi, tv-1, tv-2 or custom)");
  config_detail::find_key("experiment").set(c, *experiment);
  if (auto v = lookup("variant")) config_detail::find_key("variant").set(c, *v);
  if (auto v = lookup("scale")) config_detail::find_key("scale").set(c, *v);
  apply_scale(c);
  apply_preset(c);

  if (c.experiment == "custom") {
    std::vector<std::string> missing;
    for (const char* key : {"rho", "eta", "n_act"})
      if (!lookup(key)) missing.emplace_back(key);
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw ConfigError("custom experiment is missing required keys: " + list);
    }
  }
  for (const auto* list : {&file, &overrides})
    for (const auto& [k, v] : *list) config_detail::find_key(k).set(c, v);
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::optional<std::string>& path, const ConfigEntries& overrides) {
  return resolve_config(path ? read_config_file(*path) : ConfigEntries{}, overrides);
}

/// Every key with its resolved value, one `key=value` per line; parses back to
/// the same configuration.
inline std::string to_config_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& k : config_detail::keys()) out += k.name + "=" + k.get(c) + "\n";
  return out;
}

/// Hash of the resolved configuration; the output location does not take part.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::string text;
  for (const auto& k : config_detail::keys())
    if (k.name != "output_dir") text += k.name + "=" + k.get(c) + "\n";
  return fnv1a(text);
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline RoiWeight make_roi(const ExperimentConfig& c, const std::vector<Vec2>& points) {
  switch (c.roi) {
    case RoiKind::Full: return RoiWeight::full(static_cast<Eigen::Index>(points.size()));
    case RoiKind::LeftHalf: return RoiWeight::left_half(points);
    case RoiKind::Indicator: {
      RoiWeight w{Vector::Zero(static_cast<Eigen::Index>(points.size()))};
      for (std::size_t i = 0; i < points.size(); ++i)
        if (c.roi_region.contains(points[i] / c.rho)) w.diag[static_cast<Eigen::Index>(i)] = 1.0;
      if (w.diag.sum() < 1.0) throw ConfigError("config keys 'roi_side', 'roi_offset': region contains no pixel");
      return w;
    }
  }
  return RoiWeight::full(static_cast<Eigen::Index>(points.size()));
}

}  // namespace mrxi

#endif  // MRXI_CONFIG_HPP
