#pragma once

// Flat key=value run configuration covering every module's tunables.
//
//   # comment
//   scenario.kind = ramp
//   map.theta = 0.2

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "offroad/cost_eval.hpp"
#include "offroad/errors.hpp"
#include "offroad/io.hpp"
#include "offroad/map_builder.hpp"
#include "offroad/planner.hpp"
#include "offroad/primitive_lib.hpp"
#include "offroad/scenario_gen.hpp"
#include "offroad/session.hpp"
#include "offroad/weight_adapt.hpp"

namespace offroad {

struct RunConfig {
  std::uint64_t seed = 1;
  ScenarioKind kind = ScenarioKind::straight;
  std::size_t frames = 20;
  std::size_t first_frame = 0;
  ScenarioParams scenario;
  double map_extent = 100.0;
  std::array<double, 3> map_resolutions{4.0, 1.0, 0.25};
  MapConfig map;
  PrimitiveGenSpec primitives;
  ClusterConfig cluster;
  EvalConfig eval;
  // Hidden oracle weights default to the published row for the scenario kind.
  bool oracle_weights_set = false;
  OracleSpec oracle;
  AdaptConfig adapt;
  std::size_t window = 10;
  std::size_t queue_capacity = 4;
  double goal_radius = 3.0;
  std::size_t max_primitives = 2;
  double rate_hz = 10.0;
  bool adaptive = true;
  bool deterministic = true;
  CostWeights baseline = human_weights(ScenarioKind::straight);

  MapConfig map_config() const {
    MapConfig m = map;
    for (std::size_t i = 0; i < 3; ++i) m.specs[i] = centered_grid(map_extent, map_resolutions[i]);
    return m;
  }

  ScenarioSpec scenario_spec() const { return {kind, seed, scenario}; }

  OracleSpec oracle_spec() const {
    OracleSpec o = oracle;
    if (!oracle_weights_set) o.hidden_weights = human_weights(kind);
    return o;
  }

  FrameGenConfig frame_gen() const { return {map_config(), cluster, eval, first_frame}; }

  PlanConfig plan_config() const {
    PlanConfig p;
    p.goal_radius = goal_radius;
    p.max_primitives = max_primitives;
    p.rate_hz = rate_hz;
    p.eval = eval;
    p.cluster = cluster;
    return p;
  }

  WorkerConfig worker_config() const {
    WorkerConfig w;
    w.adapt = adapt;
    w.window = window;
    w.queue_capacity = queue_capacity;
    w.cluster = cluster;
    w.eval = eval;
    return w;
  }

  SessionConfig session_config() const {
    SessionConfig s;
    s.plan = plan_config();
    s.worker = worker_config();
    s.adaptive = adaptive;
    s.deterministic = deterministic;
    s.baseline = baseline;
    return s;
  }

  void validate() const {
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (!(map_extent > 0)) throw ConfigError("map.extent must be positive");
    scenario.validate();
    map_config().validate();
    primitives.validate();
    eval.validate();
    oracle_spec().validate();
    session_config().validate();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline CostWeights to_weights(const std::string& key, const std::string& v) {
  std::vector<double> vals;
  for (auto part : split(v, ',')) vals.push_back(to_double(key, trim(part)));
  if (vals.size() != kNumCosts) throw ConfigError(key + ": expected 4 comma-separated weights");
  CostWeights w{{vals[0], vals[1], vals[2], vals[3]}};
  return w;
}

inline std::string weights_text(const CostWeights& w) {
  std::string out;
  for (std::size_t c = 0; c < kNumCosts; ++c) out += (c ? "," : "") + format_double(w[c]);
  return out;
}

}  // namespace detail

struct ConfigField {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

// Every recognized key, bound to a field of `cfg`.
inline std::map<std::string, ConfigField> config_fields(RunConfig& cfg) {
  std::map<std::string, ConfigField> f;
  auto real = [&f](std::string key, double& ref) {
    f[key] = {[key, &ref](const std::string& v) { ref = detail::to_double(key, v); },
              [&ref] { return format_double(ref); }};
  };
  auto count = [&f](std::string key, std::size_t& ref) {
    f[key] = {[key, &ref](const std::string& v) {
                const long long n = detail::to_integer(key, v);
                if (n < 0) throw ConfigError(key + ": must be >= 0");
                ref = static_cast<std::size_t>(n);
              },
              [&ref] { return std::to_string(ref); }};
  };
  auto integer = [&f](std::string key, int& ref) {
    f[key] = {[key, &ref](const std::string& v) { ref = static_cast<int>(detail::to_integer(key, v)); },
              [&ref] { return std::to_string(ref); }};
  };
  auto flag = [&f](std::string key, bool& ref) {
    f[key] = {[key, &ref](const std::string& v) { ref = detail::to_bool(key, v); },
              [&ref] { return std::string(ref ? "true" : "false"); }};
  };

  f["seed"] = {[&cfg](const std::string& v) {
                 const long long n = detail::to_integer("seed", v);
                 if (n < 0) throw ConfigError("seed: must be >= 0");
                 cfg.seed = static_cast<std::uint64_t>(n);
               },
               [&cfg] { return std::to_string(cfg.seed); }};
  f["scenario.kind"] = {[&cfg](const std::string& v) {
                          try {
                            cfg.kind = scenario_from_name(v);
                          } catch (const Error&) {
                            throw ConfigError("scenario.kind: unknown scenario '" + v + "'");
                          }
                        },
                        [&cfg] { return std::string(scenario_name(cfg.kind)); }};
  count("scenario.frames", cfg.frames);
  count("scenario.first_frame", cfg.first_frame);
  auto& s = cfg.scenario;
  real("scenario.ramp_grade", s.ramp_grade);
  real("scenario.ramp_tilt", s.ramp_tilt);
  real("scenario.ramp_start", s.ramp_start);
  real("scenario.ramp_end", s.ramp_end);
  real("scenario.curve_radius", s.curve_radius);
  real("scenario.crown_height", s.crown_height);
  real("scenario.crown_width", s.crown_width);
  real("scenario.corridor_half_width", s.corridor_half_width);
  real("scenario.bank_height", s.bank_height);
  real("scenario.cross_distance", s.cross_distance);
  real("scenario.turn_radius", s.turn_radius);
  real("scenario.undulation_amplitude", s.undulation_amplitude);
  real("scenario.undulation_wavelength", s.undulation_wavelength);
  real("scenario.roughness_sigma", s.roughness_sigma);
  real("scenario.roughness_wavelength", s.roughness_wavelength);
  real("scenario.base_noise", s.base_noise);
  count("scenario.point_count", s.point_count);
  real("scenario.scan_range", s.scan_range);
  real("scenario.nominal_speed", s.nominal_speed);
  real("scenario.frame_spacing", s.frame_spacing);
  real("scenario.lateral_jitter", s.lateral_jitter);
  real("scenario.heading_jitter", s.heading_jitter);
  real("scenario.speed_jitter", s.speed_jitter);

  real("map.extent", cfg.map_extent);
  real("map.coarse_resolution", cfg.map_resolutions[0]);
  real("map.mid_resolution", cfg.map_resolutions[1]);
  real("map.fine_resolution", cfg.map_resolutions[2]);
  real("map.default_elevation", cfg.map.default_elevation);
  real("map.obstacle_threshold", cfg.map.obstacle_threshold);
  real("map.theta", cfg.map.potential.attraction_gain);
  real("map.eta", cfg.map.potential.repulsion_gain);
  real("map.d_star", cfg.map.potential.attraction_radius);
  real("map.D_star", cfg.map.potential.repulsion_radius);
  real("map.zeta", cfg.map.momentum.gain);

  auto& p = cfg.primitives;
  real("primitives.max_speed", p.max_speed);
  real("primitives.max_curvature", p.max_curvature);
  real("primitives.max_curvature_rate", p.max_curvature_rate);
  real("primitives.max_acceleration", p.max_acceleration);
  integer("primitives.segments", p.segments);
  real("primitives.segment_duration", p.segment_duration);
  real("primitives.sample_dt", p.sample_dt);
  integer("primitives.substeps", p.substeps);
  real("primitives.speed_change", p.speed_change);
  integer("primitives.search_levels", p.search_levels);
  real("primitives.bin_speed_min", p.bins.speed_min);
  real("primitives.bin_speed_max", p.bins.speed_max);
  real("primitives.bin_speed_step", p.bins.speed_step);
  real("primitives.bin_curvature_max", p.bins.curvature_max);
  real("primitives.bin_curvature_step", p.bins.curvature_step);

  count("cluster.horizon", cfg.cluster.horizon);
  count("cluster.members", cfg.cluster.members);
  real("cluster.window_stride", cfg.cluster.window_stride);

  real("cost.w_d", cfg.eval.deviation.distance_weight);
  real("cost.w_theta", cfg.eval.deviation.heading_weight);
  count("cost.n_p", cfg.eval.deviation.samples);
  f["cost.normalization"] = {[&cfg](const std::string& v) {
                               if (v == "none")
                                 cfg.eval.normalization = CostNormalization::none;
                               else if (v == "cluster_mean")
                                 cfg.eval.normalization = CostNormalization::cluster_mean;
                               else if (v == "cluster_range")
                                 cfg.eval.normalization = CostNormalization::cluster_range;
                               else
                                 throw ConfigError("cost.normalization: expected none, cluster_mean or cluster_range");
                             },
                             [&cfg] {
                               switch (cfg.eval.normalization) {
                                 case CostNormalization::none: return std::string("none");
                                 case CostNormalization::cluster_mean: return std::string("cluster_mean");
                                 default: return std::string("cluster_range");
                               }
                             }};
  real("cost.normalization_scale", cfg.eval.normalization_scale);
  integer("cost.obstacle_margin", cfg.eval.obstacle_margin);

  f["oracle.weights"] = {[&cfg](const std::string& v) {
                           cfg.oracle.hidden_weights = detail::to_weights("oracle.weights", v);
                           cfg.oracle_weights_set = true;
                         },
                         [&cfg] { return detail::weights_text(cfg.oracle_spec().hidden_weights); }};
  real("oracle.noise_sigma", cfg.oracle.noise_sigma);
  flag("oracle.softmax_sampling", cfg.oracle.softmax_sampling);

  integer("adapt.max_iterations", cfg.adapt.max_iterations);
  real("adapt.gradient_tolerance", cfg.adapt.gradient_tolerance);
  count("adapt.memory", cfg.adapt.memory);
  f["adapt.init"] = {[&cfg](const std::string& v) { cfg.adapt.init = detail::to_weights("adapt.init", v); },
                     [&cfg] { return detail::weights_text(cfg.adapt.init); }};
  flag("adapt.vertex_starts", cfg.adapt.vertex_starts);
  real("adapt.vertex_share", cfg.adapt.vertex_share);
  count("adapt.window", cfg.window);
  count("adapt.queue_capacity", cfg.queue_capacity);

  real("plan.goal_radius", cfg.goal_radius);
  count("plan.max_primitives", cfg.max_primitives);
  real("plan.rate_hz", cfg.rate_hz);
  flag("session.adaptive", cfg.adaptive);
  flag("session.deterministic", cfg.deterministic);
  f["session.baseline"] = {[&cfg](const std::string& v) { cfg.baseline = detail::to_weights("session.baseline", v); },
                           [&cfg] { return detail::weights_text(cfg.baseline); }};
  return f;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto fields = config_fields(cfg);
  const auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(value);
}

// Applies "key=value" lines; `source` labels error messages.
inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source) {
  auto fields = config_fields(cfg);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(source + ":" + std::to_string(n) + ": unknown config key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  apply_config_text(base, in, path.string());
  return base;
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  apply_config_text(base, in, "<text>");
  return base;
}

// Every key with its current value, sorted; parses back to the same config.
inline std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& [key, field] : config_fields(copy)) {
    if (key == "oracle.weights" && !copy.oracle_weights_set) continue;
    out += key + " = " + field.get() + "\n";
  }
  return out;
}

}  // namespace offroad
