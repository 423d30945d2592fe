#pragma once

// Synthetic terrain archetypes, reference routes and oracle demonstrations.
// The oracle stands in for a learned human-trajectory predictor: it picks the
// cluster member a driver with hidden cost weights would choose.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "offroad/core.hpp"
#include "offroad/cost_eval.hpp"
#include "offroad/errors.hpp"
#include "offroad/map_builder.hpp"
#include "offroad/primitive_lib.hpp"

namespace offroad {

enum class ScenarioKind { straight, ramp, cross, long_curve, undulate, rough };

inline constexpr std::array<ScenarioKind, 6> kAllScenarios{ScenarioKind::straight, ScenarioKind::ramp,
                                                           ScenarioKind::cross,    ScenarioKind::long_curve,
                                                           ScenarioKind::undulate, ScenarioKind::rough};

inline const char* scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::straight: return "straight";
    case ScenarioKind::ramp: return "ramp";
    case ScenarioKind::cross: return "cross";
    case ScenarioKind::long_curve: return "long_curve";
    case ScenarioKind::undulate: return "undulate";
    case ScenarioKind::rough: return "rough";
  }
  return "?";
}

inline ScenarioKind scenario_from_name(const std::string& s) {
  for (auto k : kAllScenarios)
    if (s == scenario_name(k)) return k;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

// Learned-weight rows observed for each archetype, as published (three decimals).
inline CostWeights published_weight_row(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::straight: return {{0.184, 0.377, 0.167, 0.272}};
    case ScenarioKind::ramp: return {{0.879, 0.085, 0.007, 0.028}};
    case ScenarioKind::cross: return {{0.241, 0.542, 0.114, 0.102}};
    case ScenarioKind::long_curve: return {{0.010, 0.019, 0.875, 0.097}};
    case ScenarioKind::undulate: return {{0.848, 0.072, 0.014, 0.065}};
    case ScenarioKind::rough: return {{0.177, 0.797, 0.012, 0.013}};
  }
  return CostWeights::uniform();
}

inline CostWeights simplex_projected(CostWeights w) {
  double sum = 0.0;
  for (double v : w.values) sum += std::max(0.0, v);
  for (double& v : w.values) v = std::max(0.0, v) / sum;
  return w;
}

// Published rows rescaled onto the simplex; used as planted oracle weights.
inline CostWeights human_weights(ScenarioKind k) { return simplex_projected(published_weight_row(k)); }

struct ScenarioParams {
  double ramp_grade = 0.25;          // dz/dy on the ramp band
  double ramp_tilt = 0.04;           // cross slope dz/dx on the ramp
  double ramp_start = -20.0;         // ramp band along world y
  double ramp_end = 400.0;
  double curve_radius = 25.0;        // long_curve arc radius
  double crown_height = 0.6;         // long_curve road crown above the sides
  double crown_width = 3.0;          // long_curve crown 1/e half-width
  double corridor_half_width = 3.0;  // cross
  double bank_height = 0.5;          // cross banks above the road
  double cross_distance = 40.0;      // cross: intersection ahead of the start
  double turn_radius = 10.0;         // cross: reference turn radius
  double undulation_amplitude = 0.6;
  double undulation_wavelength = 16.0;
  double roughness_sigma = 0.15;     // peak per-point z noise on rough terrain
  double roughness_wavelength = 14.0;
  double base_noise = 0.0;           // uniform per-point z noise on every kind
  std::size_t point_count = 150000;  // points per scan
  double scan_range = 72.0;          // meters; density decays as 1/r
  double nominal_speed = 5.0;
  double frame_spacing = 2.0;        // meters along the reference between frames
  double lateral_jitter = 0.5;       // frame pose offsets (uniform +-)
  double heading_jitter = 0.05;
  double speed_jitter = 0.4;

  void validate() const {
    const bool ok = ramp_grade > 0 && curve_radius > 0 && crown_height > 0 && crown_width > 0 &&
                    corridor_half_width > 0 && bank_height > 0 && cross_distance > turn_radius &&
                    turn_radius > 0 && undulation_amplitude > 0 && undulation_wavelength > 0 &&
                    roughness_sigma > 0 && roughness_wavelength > 0 && base_noise >= 0 && point_count > 0 &&
                    scan_range > 0 && nominal_speed > 0 && frame_spacing > 0 && lateral_jitter >= 0 &&
                    heading_jitter >= 0 && speed_jitter >= 0 && ramp_end > ramp_start && ramp_tilt >= 0;
    if (!ok) throw ConfigError("scenario params must be positive");
  }
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::straight;
  std::uint64_t seed = 1;
  ScenarioParams params;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51ED27ull));
}

// Analytic terrain: smooth height plus a per-point noise level field.
class Terrain {
 public:
  explicit Terrain(const ScenarioSpec& spec) : spec_(spec) {
    spec_.params.validate();
    std::mt19937_64 rng(derive_seed(spec.seed, 0xC0FFEE));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (double& p : phases_) p = phase(rng);
  }

  ScenarioKind kind() const { return spec_.kind; }
  const ScenarioParams& params() const { return spec_.params; }

  double height(double x, double y) const {
    const auto& p = spec_.params;
    switch (spec_.kind) {
      case ScenarioKind::straight: return 0.0;
      case ScenarioKind::ramp:
        return p.ramp_grade * std::clamp(y, p.ramp_start, p.ramp_end) + p.ramp_tilt * x;
      case ScenarioKind::cross: {
        const double off = corridor_offset(x, y) - p.corridor_half_width;
        return p.bank_height * smoothstep(off / 2.0);
      }
      case ScenarioKind::long_curve: {
        const double r = std::hypot(x + p.curve_radius, y);
        const double u = (r - p.curve_radius) / p.crown_width;
        return p.crown_height * std::exp(-u * u);
      }
      case ScenarioKind::undulate: {
        const double k = 2.0 * kPi / p.undulation_wavelength;
        return p.undulation_amplitude * std::sin(k * x + phases_[0]) * std::sin(k * y + phases_[1]);
      }
      case ScenarioKind::rough: {
        const double k = 2.0 * kPi / 40.0;
        return 0.1 * std::sin(k * x + phases_[0]) * std::sin(k * y + phases_[1]);
      }
    }
    return 0.0;
  }

  // Standard deviation of the per-point z noise at (x, y).
  double noise_sigma(double x, double y) const {
    const auto& p = spec_.params;
    switch (spec_.kind) {
      case ScenarioKind::rough: {
        const double k = 2.0 * kPi / p.roughness_wavelength;
        const double s = 0.5 * (1.0 + std::sin(k * x + phases_[2]) * std::cos(k * y + phases_[3]));
        return p.base_noise + p.roughness_sigma * s * s;
      }
      case ScenarioKind::cross: {
        const double off = corridor_offset(x, y) - p.corridor_half_width;
        return p.base_noise + 0.6 * p.roughness_sigma * smoothstep(off / 2.0);
      }
      default: return p.base_noise;
    }
  }

 private:
  static double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
  }

  // Distance outside the nearer of the two cross corridors' centerlines.
  double corridor_offset(double x, double y) const {
    const auto& p = spec_.params;
    return std::min(std::abs(x), std::abs(y - p.cross_distance));
  }

  ScenarioSpec spec_;
  std::array<double, 4> phases_{};
};

// Range-decaying scan around `pose`, returned in the vehicle frame of `pose`.
inline PointCloud sample_scan(const Terrain& terrain, const Pose2D& pose, std::uint64_t seed) {
  const auto& p = terrain.params();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Rigid2D to_world = vehicle_frame_transform(pose).inverse();
  PointCloud cloud;
  cloud.points.reserve(p.point_count);
  for (std::size_t i = 0; i < p.point_count; ++i) {
    // Uniform range gives an areal density proportional to 1/r.
    const double r = p.scan_range * unit(rng);
    const double a = 2.0 * kPi * unit(rng);
    const Vec2 local{r * std::cos(a), r * std::sin(a)};
    const Vec2 w = to_world.apply(local);
    double z = terrain.height(w.x, w.y);
    const double sigma = terrain.noise_sigma(w.x, w.y);
    // Zero-mean uniform noise with standard deviation sigma; bounded so that
    // surface texture alone stays under the obstacle range threshold.
    const double noise = std::sqrt(3.0) * (2.0 * unit(rng) - 1.0);
    if (sigma > 0.0) z += sigma * noise;
    cloud.points.push_back({local.x, local.y, z});
  }
  return cloud;
}

struct TerrainSample {
  Terrain terrain;
  PointCloud cloud;  // scan from the scenario start pose (world origin facing +y)
};

inline TerrainSample gen_terrain(const ScenarioSpec& spec) {
  Terrain terrain(spec);
  PointCloud cloud = sample_scan(terrain, Pose2D{0.0, 0.0, kForwardHeading}, derive_seed(spec.seed, 0));
  return {std::move(terrain), std::move(cloud)};
}

namespace detail {

inline void append_line(Trajectory& ref, Vec2 from, double heading, double length, double step, double speed) {
  const int n = static_cast<int>(std::ceil(length / step));
  for (int i = ref.empty() ? 0 : 1; i <= n; ++i) {
    const double s = length * i / n;
    TimedState st;
    st.pose = Pose2D{from.x + s * std::cos(heading), from.y + s * std::sin(heading), heading};
    st.speed = speed;
    st.curvature = 0.0;
    ref.states.push_back(st);
  }
}

inline void append_arc(Trajectory& ref, Vec2 center, double radius, double a0, double a1, double step,
                       double speed) {
  const double sweep = a1 - a0;
  const int n = static_cast<int>(std::ceil(std::abs(sweep) * radius / step));
  const double turn = sweep > 0 ? 1.0 : -1.0;
  for (int i = ref.empty() ? 0 : 1; i <= n; ++i) {
    const double a = a0 + sweep * i / n;
    TimedState st;
    st.pose = Pose2D{center.x + radius * std::cos(a), center.y + radius * std::sin(a), a + turn * kPi / 2};
    st.speed = speed;
    st.curvature = turn / radius;
    ref.states.push_back(st);
  }
}

inline void stamp_times(Trajectory& ref) {
  const auto s = arc_lengths(ref);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i].t = s[i] / ref[i].speed;
}

}  // namespace detail

// Arc length along the reference from its start to the world origin.
inline constexpr double kReferenceLeadIn = 30.0;

// World-frame corridor centerline at nominal speed. The vehicle starts at the
// origin facing +y, kReferenceLeadIn meters after the reference start.
inline Trajectory gen_reference(const ScenarioSpec& spec) {
  const auto& p = spec.params;
  p.validate();
  const double step = 0.5, v = p.nominal_speed;
  Trajectory ref;
  ref.frame_id = "world";
  switch (spec.kind) {
    case ScenarioKind::cross: {
      const double straight = p.cross_distance - p.turn_radius;
      detail::append_line(ref, {0.0, -kReferenceLeadIn}, kForwardHeading, straight + kReferenceLeadIn, step, v);
      detail::append_arc(ref, {-p.turn_radius, straight}, p.turn_radius, 0.0, kPi / 2, step, v);
      detail::append_line(ref, {-p.turn_radius, p.cross_distance}, kPi, 300.0, step, v);
      break;
    }
    case ScenarioKind::long_curve: {
      const double R = p.curve_radius;
      const double lead = kReferenceLeadIn / R;
      detail::append_arc(ref, {-R, 0.0}, R, -lead, 1.75 * kPi, step, v);
      break;
    }
    default:
      detail::append_line(ref, {0.0, -kReferenceLeadIn}, kForwardHeading, 430.0, step, v);
      break;
  }
  detail::stamp_times(ref);
  return ref;
}

// Pose, speed and curvature of the reference at arc length s.
inline TimedState reference_at(const Trajectory& ref, double s) {
  const auto arc = arc_lengths(ref);
  if (s <= 0.0) return ref.front();
  if (s >= arc.back()) return ref.back();
  const auto it = std::upper_bound(arc.begin(), arc.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - arc.begin()) - 1;
  const double len = arc[i + 1] - arc[i];
  return interpolate(ref[i], ref[i + 1], len > 0 ? (s - arc[i]) / len : 0.0);
}

struct OracleSpec {
  CostWeights hidden_weights = CostWeights::uniform();
  double noise_sigma = 0.0;     // meters of Gaussian position noise
  bool softmax_sampling = false;  // sample the member from the softmax instead of taking the argmin

  void validate() const {
    hidden_weights.validate(1e-6);
    if (!(noise_sigma >= 0)) throw ConfigError("oracle noise sigma must be >= 0");
  }
};

struct Demonstration {
  Trajectory trajectory;
  std::size_t member = 0;  // cluster index the oracle chose
};

// Scores the cluster for the frame, picks the member the hidden weights
// prefer among feasible ones, and perturbs its positions.
inline Demonstration oracle_demonstration(const FeatureMapStack& stack, const VehicleState& state,
                                          const Trajectory& reference, const TrajectoryCluster& cluster,
                                          const OracleSpec& oracle, const EvalConfig& eval, std::uint64_t seed,
                                          Diagnostics* diag = nullptr) {
  oracle.validate();
  (void)state;
  if (cluster.empty()) throw DataError("oracle_demonstration: empty cluster");
  const auto scored = score_candidates(cluster.members, stack, reference, eval, diag);
  std::mt19937_64 rng(seed);
  std::optional<std::size_t> pick;
  if (oracle.softmax_sampling) {
    const auto idx = scored.feasible_indices();
    if (!idx.empty()) {
      std::vector<double> f;
      for (auto k : idx) f.push_back(total_cost(scored.scaled[k], oracle.hidden_weights));
      const auto p = selection_probabilities(f);
      std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
      pick = idx[dist(rng)];
    }
  } else {
    pick = best_feasible(scored, oracle.hidden_weights);
  }
  if (!pick) throw BlockedError("oracle_demonstration: no feasible cluster member");
  Demonstration demo{cluster.members[*pick], *pick};
  if (oracle.noise_sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, oracle.noise_sigma);
    for (auto& s : demo.trajectory.states) {
      const double dx = gauss(rng);
      const double dy = gauss(rng);
      s.pose = Pose2D{s.pose.x + dx, s.pose.y + dy, s.pose.heading};
      s.curvature = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return demo;
}

struct FrameSample {
  int index = 0;
  Pose2D world_pose;
  PointCloud cloud;       // vehicle frame
  FeatureMapStack stack;  // vehicle frame
  VehicleState state;     // vehicle frame: origin facing +y
  Trajectory reference;   // vehicle frame
  Trajectory human;       // length H, vehicle frame
  std::optional<std::size_t> oracle_member;
};

struct FrameGenConfig {
  MapConfig map;
  ClusterConfig cluster;
  EvalConfig eval;
  std::size_t first_frame = 0;  // frame index offset along the route
};

// Builds the vehicle-frame inputs for one frame at world pose `pose`.
inline FrameSample make_frame(const Terrain& terrain, const Trajectory& world_ref, const Pose2D& pose,
                              double speed, double curvature, int index, std::uint64_t scan_seed,
                              const MapConfig& map) {
  FrameSample f;
  f.index = index;
  f.world_pose = pose;
  f.cloud = sample_scan(terrain, pose, scan_seed);
  f.state = VehicleState{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, speed, curvature};
  f.reference = to_vehicle_frame(world_ref, pose);
  f.stack = build_stack(f.cloud, f.state, f.reference, map);
  return f;
}

// Frames advance along the reference by `frame_spacing`, each with a seeded
// pose jitter, a fresh scan and an oracle demonstration.
inline std::vector<FrameSample> gen_frames(const ScenarioSpec& spec, std::size_t count, const OracleSpec& oracle,
                                           const PrimitiveLibrary& library, const FrameGenConfig& config,
                                           Diagnostics* diag = nullptr) {
  if (count < 1) throw ConfigError("gen_frames: count must be >= 1");
  oracle.validate();
  const Terrain terrain(spec);
  const Trajectory ref = gen_reference(spec);
  const auto& p = spec.params;
  std::vector<FrameSample> frames;
  frames.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t i = config.first_frame + n;
    std::mt19937_64 rng(derive_seed(spec.seed, 1000 + i));
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const double s = kReferenceLeadIn + p.frame_spacing * static_cast<double>(i);
    const TimedState on_ref = reference_at(ref, s);
    const double lateral = p.lateral_jitter * sym(rng);
    const double heading = on_ref.pose.heading + p.heading_jitter * sym(rng);
    const double speed = p.nominal_speed + p.speed_jitter * sym(rng);
    const Pose2D pose{on_ref.pose.x - lateral * std::sin(on_ref.pose.heading),
                      on_ref.pose.y + lateral * std::cos(on_ref.pose.heading), heading};
    FrameSample f = make_frame(terrain, ref, pose, speed, on_ref.curvature, static_cast<int>(i),
                               derive_seed(spec.seed, 2000 + i), config.map);
    const TrajectoryCluster cluster = extract_clusters(library, f.state, config.cluster, diag);
    const Demonstration demo = oracle_demonstration(f.stack, f.state, f.reference, cluster, oracle, config.eval,
                                                    derive_seed(spec.seed, 3000 + i), diag);
    f.human = demo.trajectory;
    f.oracle_member = demo.member;
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace offroad
