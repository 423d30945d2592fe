#pragma once

// Behavioral primitive library: kinematic unicycle segments generated offline
// per entry-state bin, rigid concatenation at junctions, fixed-horizon
// trajectory clusters and nearest-member matching.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "offroad/core.hpp"
#include "offroad/errors.hpp"

namespace offroad {

enum class Behavior { straight, left_turn, right_turn, accelerate, decelerate };

inline const char* behavior_name(Behavior b) {
  switch (b) {
    case Behavior::straight: return "straight";
    case Behavior::left_turn: return "left_turn";
    case Behavior::right_turn: return "right_turn";
    case Behavior::accelerate: return "accelerate";
    case Behavior::decelerate: return "decelerate";
  }
  return "?";
}

inline std::optional<Behavior> behavior_from_name(const std::string& s) {
  for (Behavior b : {Behavior::straight, Behavior::left_turn, Behavior::right_turn,
                     Behavior::accelerate, Behavior::decelerate})
    if (s == behavior_name(b)) return b;
  return std::nullopt;
}

// Entry-state bins over (speed, curvature); bin centers are the grid nodes.
struct BinGrid {
  double speed_min = 0.0;
  double speed_max = 10.0;
  double speed_step = 1.0;
  double curvature_max = 0.2;
  double curvature_step = 0.05;

  int speed_bins() const { return static_cast<int>(std::lround((speed_max - speed_min) / speed_step)) + 1; }
  int curvature_bins() const { return 2 * static_cast<int>(std::lround(curvature_max / curvature_step)) + 1; }
  int count() const { return speed_bins() * curvature_bins(); }

  double speed_center(int iv) const { return speed_min + iv * speed_step; }
  double curvature_center(int ik) const { return -curvature_max + ik * curvature_step; }

  struct Bin {
    int speed = 0;
    int curvature = 0;
    friend auto operator<=>(const Bin&, const Bin&) = default;
  };

  Bin bin_of(double v, double kappa) const {
    const int iv = std::clamp(static_cast<int>(std::lround((v - speed_min) / speed_step)), 0, speed_bins() - 1);
    const int ik = std::clamp(static_cast<int>(std::lround((kappa + curvature_max) / curvature_step)), 0,
                              curvature_bins() - 1);
    return {iv, ik};
  }

  bool contains(Bin b, double v, double kappa, double slack = 1e-9) const {
    return std::abs(v - speed_center(b.speed)) <= speed_step / 2 + slack &&
           std::abs(kappa - curvature_center(b.curvature)) <= curvature_step / 2 + slack;
  }

  void validate() const {
    if (!(speed_step > 0 && curvature_step > 0 && curvature_max > 0 && speed_max > speed_min && speed_min >= 0))
      throw ConfigError("bin grid: steps and ranges must be positive");
  }
};

using EntryBin = BinGrid::Bin;

struct PrimitiveGenSpec {
  // Bounds U.
  double max_speed = 10.0;
  double max_curvature = 0.2;
  double max_curvature_rate = 0.1;  // 1/(m s)
  double max_acceleration = 1.0;    // m/s^2
  // Piecewise-constant controls: duration = segments * segment_duration.
  int segments = 4;
  double segment_duration = 1.0;
  double sample_dt = 0.1;
  int substeps = 10;  // RK4 steps per sample
  // Exit targets for accelerate / decelerate.
  double speed_change = 2.0;
  // Grid-search levels per control (odd count, symmetric around zero).
  int search_levels = 5;
  BinGrid bins;

  double duration() const { return segments * segment_duration; }
  int samples_per_segment() const { return static_cast<int>(std::lround(segment_duration / sample_dt)); }

  void validate() const {
    if (!(max_speed > 0 && max_curvature > 0 && max_curvature_rate > 0 && max_acceleration > 0 &&
          segments > 0 && segment_duration > 0 && sample_dt > 0 && substeps > 0 && speed_change > 0 &&
          search_levels >= 3 && search_levels % 2 == 1))
      throw ConfigError("primitive spec: bounds and durations must be positive");
    if (std::abs(samples_per_segment() * sample_dt - segment_duration) > 1e-9)
      throw ConfigError("primitive spec: segment duration must be a multiple of the sample period");
    bins.validate();
  }
};

// Piecewise-constant control on one segment.
struct Control {
  double curvature_rate = 0.0;
  double acceleration = 0.0;
  friend bool operator==(const Control&, const Control&) = default;
};

struct BehavioralPrimitive {
  int id = -1;
  EntryBin bin;
  Behavior behavior = Behavior::straight;
  double entry_speed = 0.0;
  double entry_curvature = 0.0;
  std::vector<Control> controls;  // one per segment
  Trajectory states;              // starts at the origin facing +y, t = 0
  double objective = 0.0;         // integral of squared controls

  const TimedState& exit() const { return states.back(); }
};

struct UnicycleState {
  double x = 0.0, y = 0.0, heading = kForwardHeading, speed = 0.0, curvature = 0.0;
};

namespace detail {

inline UnicycleState derivative(const UnicycleState& s, const Control& u) {
  return {s.speed * std::cos(s.heading), s.speed * std::sin(s.heading), s.speed * s.curvature,
          u.acceleration, u.curvature_rate};
}

inline UnicycleState axpy(const UnicycleState& s, double h, const UnicycleState& d) {
  return {s.x + h * d.x, s.y + h * d.y, s.heading + h * d.heading, s.speed + h * d.speed,
          s.curvature + h * d.curvature};
}

inline UnicycleState rk4_step(const UnicycleState& s, const Control& u, double h) {
  const auto k1 = derivative(s, u);
  const auto k2 = derivative(axpy(s, h / 2, k1), u);
  const auto k3 = derivative(axpy(s, h / 2, k2), u);
  const auto k4 = derivative(axpy(s, h, k3), u);
  UnicycleState r;
  r.x = s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  r.y = s.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
  r.heading = s.heading + h / 6 * (k1.heading + 2 * k2.heading + 2 * k3.heading + k4.heading);
  r.speed = s.speed + h / 6 * (k1.speed + 2 * k2.speed + 2 * k3.speed + k4.speed);
  r.curvature = s.curvature + h / 6 * (k1.curvature + 2 * k2.curvature + 2 * k3.curvature + k4.curvature);
  return r;
}

inline TimedState to_timed(double t, const UnicycleState& s) {
  return TimedState{t, Pose2D{s.x, s.y, s.heading}, s.speed, s.curvature};
}

}  // namespace detail

// Fixed-step RK4 integration of the unicycle from the origin (facing +y).
inline Trajectory integrate_controls(double entry_speed, double entry_curvature,
                                     const std::vector<Control>& controls, const PrimitiveGenSpec& spec) {
  Trajectory out;
  out.frame_id = "primitive";
  UnicycleState s{0.0, 0.0, kForwardHeading, entry_speed, entry_curvature};
  const int per_seg = spec.samples_per_segment();
  const double h = spec.sample_dt / spec.substeps;
  int sample = 0;
  out.states.push_back(detail::to_timed(0.0, s));
  for (const auto& u : controls) {
    for (int k = 0; k < per_seg; ++k) {
      for (int j = 0; j < spec.substeps; ++j) s = detail::rk4_step(s, u, h);
      ++sample;
      out.states.push_back(detail::to_timed(sample * spec.sample_dt, s));
    }
  }
  return out;
}

inline double control_objective(const std::vector<Control>& controls, double segment_duration) {
  double g = 0.0;
  for (const auto& u : controls)
    g += (u.curvature_rate * u.curvature_rate + u.acceleration * u.acceleration) * segment_duration;
  return g;
}

inline bool within_bounds(const Trajectory& traj, const std::vector<Control>& controls,
                          const PrimitiveGenSpec& spec, double tol = 1e-9) {
  for (const auto& u : controls)
    if (std::abs(u.curvature_rate) > spec.max_curvature_rate + tol ||
        std::abs(u.acceleration) > spec.max_acceleration + tol)
      return false;
  for (const auto& s : traj.states)
    if (s.speed < -tol || s.speed > spec.max_speed + tol || std::abs(s.curvature) > spec.max_curvature + tol)
      return false;
  return true;
}

namespace detail {

// Per-segment profile for one scalar channel: minimizes sum u_j^2 subject to
// x0 + dt * sum u_j = target, |u_j| <= umax and lo <= x(t) <= hi at every
// segment boundary. Coarse grid search, then projected-gradient refinement.
inline std::optional<std::vector<double>> search_channel(double x0, double target, double umax, double lo,
                                                         double hi, int segments, double dt, int levels) {
  const double tol = 1e-9;
  std::vector<double> grid(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) grid[static_cast<std::size_t>(i)] = umax * (2.0 * i / (levels - 1) - 1.0);

  auto feasible = [&](const std::vector<double>& u, double slack) {
    double x = x0;
    for (double v : u) {
      if (std::abs(v) > umax + tol) return false;
      x += v * dt;
      if (x < lo - tol || x > hi + tol) return false;
    }
    return std::abs(x - target) <= slack;
  };
  auto energy = [](const std::vector<double>& u) {
    double e = 0.0;
    for (double v : u) e += v * v;
    return e;
  };

  std::optional<std::vector<double>> best;
  double best_e = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(segments), 0);
  const double slack = umax * dt / (levels - 1);  // half a grid step of the exit value
  while (true) {
    std::vector<double> u(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) u[j] = grid[static_cast<std::size_t>(idx[j])];
    if (feasible(u, slack)) {
      const double e = energy(u);
      if (e < best_e - 1e-15) {
        best_e = e;
        best = u;
      }
    }
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == levels) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  if (!best) return std::nullopt;

  // Refinement: hit the target exactly, then descend on the energy while
  // staying on the equality constraint.
  std::vector<double> u = *best;
  const double need = (target - x0) / dt;
  double sum = 0.0;
  for (double v : u) sum += v;
  for (double& v : u) v += (need - sum) / static_cast<double>(u.size());
  const double step = 0.25;
  for (int it = 0; it < 200; ++it) {
    double mean = 0.0;
    for (double v : u) mean += v;
    mean /= static_cast<double>(u.size());
    std::vector<double> trial = u;
    for (double& v : trial) v -= step * 2.0 * (v - mean);
    if (!feasible(trial, 1e-9) || energy(trial) > energy(u)) break;
    u = std::move(trial);
  }
  if (!feasible(u, 1e-9)) return std::nullopt;
  return u;
}

}  // namespace detail

struct PrimitiveLibrary {
  PrimitiveGenSpec spec;
  std::vector<BehavioralPrimitive> primitives;
  std::map<EntryBin, std::vector<int>> by_bin;  // primitive ids per entry bin
  std::vector<std::string> diagnostics;

  std::size_t size() const { return primitives.size(); }
  bool covers(EntryBin b) const {
    auto it = by_bin.find(b);
    return it != by_bin.end() && !it->second.empty();
  }
  const std::vector<int>& in_bin(EntryBin b) const {
    static const std::vector<int> none;
    auto it = by_bin.find(b);
    return it == by_bin.end() ? none : it->second;
  }
  const BehavioralPrimitive& operator[](int id) const { return primitives.at(static_cast<std::size_t>(id)); }

  void reindex() {
    by_bin.clear();
    for (auto& p : primitives) by_bin[p.bin].push_back(p.id);
  }
};

struct ExitTarget {
  Behavior behavior;
  double speed;
  double curvature;
};

// Exit-state families for one entry bin: every curvature bin center at the
// entry speed (straight / left / right by sign), plus speed changes.
inline std::vector<ExitTarget> exit_targets(const PrimitiveGenSpec& spec, double v0) {
  std::vector<ExitTarget> out;
  const auto& bins = spec.bins;
  for (int ik = 0; ik < bins.curvature_bins(); ++ik) {
    const double k = bins.curvature_center(ik);
    const Behavior b = std::abs(k) < 1e-12 ? Behavior::straight : (k > 0 ? Behavior::left_turn : Behavior::right_turn);
    out.push_back({b, v0, std::abs(k) < 1e-12 ? 0.0 : k});
  }
  const double up = std::min(v0 + spec.speed_change, std::min(spec.max_speed, bins.speed_max));
  const double down = std::max(v0 - spec.speed_change, bins.speed_min);
  if (up > v0 + 1e-12) out.push_back({Behavior::accelerate, up, 0.0});
  if (down < v0 - 1e-12) out.push_back({Behavior::decelerate, down, 0.0});
  return out;
}

// Builds one primitive for (entry, target) or nullopt when no bounded profile
// reaches the target.
inline std::optional<BehavioralPrimitive> generate_primitive(const PrimitiveGenSpec& spec, EntryBin bin,
                                                             const ExitTarget& target) {
  const double v0 = spec.bins.speed_center(bin.speed);
  const double k0 = spec.bins.curvature_center(bin.curvature);
  const auto rates = detail::search_channel(k0, target.curvature, spec.max_curvature_rate, -spec.max_curvature,
                                            spec.max_curvature, spec.segments, spec.segment_duration,
                                            spec.search_levels);
  const auto accels = detail::search_channel(v0, target.speed, spec.max_acceleration, 0.0, spec.max_speed,
                                             spec.segments, spec.segment_duration, spec.search_levels);
  if (!rates || !accels) return std::nullopt;
  BehavioralPrimitive p;
  p.bin = bin;
  p.behavior = target.behavior;
  p.entry_speed = v0;
  p.entry_curvature = k0;
  for (int j = 0; j < spec.segments; ++j)
    p.controls.push_back({(*rates)[static_cast<std::size_t>(j)], (*accels)[static_cast<std::size_t>(j)]});
  p.states = integrate_controls(v0, k0, p.controls, spec);
  p.objective = control_objective(p.controls, spec.segment_duration);
  if (!within_bounds(p.states, p.controls, spec)) return std::nullopt;
  const auto& e = p.exit();
  if (std::abs(e.speed - target.speed) > 1e-6 || std::abs(e.curvature - target.curvature) > 1e-6)
    return std::nullopt;
  return p;
}

inline PrimitiveLibrary generate_primitives(const PrimitiveGenSpec& spec, const std::vector<EntryBin>& entry_bins) {
  spec.validate();
  PrimitiveLibrary lib;
  lib.spec = spec;
  for (const auto& bin : entry_bins) {
    const double v0 = spec.bins.speed_center(bin.speed);
    for (const auto& target : exit_targets(spec, v0)) {
      auto p = generate_primitive(spec, bin, target);
      if (!p) {
        lib.diagnostics.push_back("no feasible profile for bin (" + std::to_string(bin.speed) + "," +
                                  std::to_string(bin.curvature) + ") behavior " + behavior_name(target.behavior) +
                                  " exit curvature " + std::to_string(target.curvature));
        continue;
      }
      p->id = static_cast<int>(lib.primitives.size());
      lib.primitives.push_back(std::move(*p));
    }
  }
  if (lib.primitives.empty()) throw DataError("generate_primitives: library is empty");
  lib.reindex();
  return lib;
}

inline std::vector<EntryBin> all_bins(const BinGrid& grid) {
  std::vector<EntryBin> out;
  for (int iv = 0; iv < grid.speed_bins(); ++iv)
    for (int ik = 0; ik < grid.curvature_bins(); ++ik) out.push_back({iv, ik});
  return out;
}

inline PrimitiveLibrary generate_primitives(const PrimitiveGenSpec& spec) {
  return generate_primitives(spec, all_bins(spec.bins));
}

// Joins b onto the end of a: b is rotated and translated so its first pose
// coincides with a's last pose, and its clock continues a's.
inline Trajectory concatenate(const Trajectory& a, const Trajectory& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const TimedState& junction = a.back();
  const Rigid2D place = vehicle_frame_transform(junction.pose).inverse().compose(vehicle_frame_transform(b.front().pose));
  Trajectory out = a;
  out.states.reserve(a.size() + b.size() - 1);
  for (std::size_t i = 1; i < b.size(); ++i) {
    TimedState s = b[i];
    s.pose = place.apply(s.pose);
    s.t = junction.t + (b[i].t - b.front().t);
    out.states.push_back(s);
  }
  return out;
}

inline Trajectory concatenate(const BehavioralPrimitive& a, const BehavioralPrimitive& b, const BinGrid& bins) {
  const auto& e = a.exit();
  if (!bins.contains(b.bin, e.speed, e.curvature))
    throw DataError("concatenate: exit state of primitive " + std::to_string(a.id) +
                    " is outside the entry bin of primitive " + std::to_string(b.id));
  return concatenate(a.states, b.states);
}

struct ClusterSource {
  int first = -1;   // primitive id of B(S_i)
  int second = -1;  // primitive id of B(S_{i+1})
  double offset = 0.0;  // window start within the concatenation, seconds
  double energy = 0.0;  // integral of squared controls over the window
};

struct TrajectoryCluster {
  EntryBin bin;
  std::vector<Trajectory> members;
  std::vector<ClusterSource> sources;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

struct ClusterConfig {
  std::size_t horizon = 60;   // H
  std::size_t members = 16;   // m
  double window_stride = 0.5;  // seconds between candidate window starts

  void validate() const {
    if (horizon < 3 || members < 1 || !(window_stride > 0)) throw ConfigError("cluster config: invalid values");
  }
};

namespace detail {

inline double window_energy(const BehavioralPrimitive& a, const BehavioralPrimitive& b, double t0, double span,
                            const PrimitiveGenSpec& spec) {
  const double da = spec.duration();
  double e = 0.0;
  auto add = [&](const BehavioralPrimitive& p, double offset) {
    for (std::size_t j = 0; j < p.controls.size(); ++j) {
      const double s0 = offset + static_cast<double>(j) * spec.segment_duration;
      const double s1 = s0 + spec.segment_duration;
      const double overlap = std::max(0.0, std::min(s1, t0 + span) - std::max(s0, t0));
      const auto& u = p.controls[j];
      e += (u.curvature_rate * u.curvature_rate + u.acceleration * u.acceleration) * overlap;
    }
  };
  add(a, 0.0);
  add(b, da);
  return e;
}

}  // namespace detail

// Candidate windows of H samples cut from every concatenation B(S_i)+B(S_i+1)
// whose start state lies in the vehicle's bin, expressed from `state.pose`.
// Members are picked by farthest-point selection seeded with the lowest-energy
// candidate.
inline TrajectoryCluster extract_clusters(const PrimitiveLibrary& lib, const VehicleState& state,
                                          const ClusterConfig& config, Diagnostics* diag = nullptr) {
  config.validate();
  const auto& spec = lib.spec;
  const auto& bins = spec.bins;
  const EntryBin bin = bins.bin_of(state.speed(), state.curvature);
  if (!lib.covers(bin)) throw DataError("extract_clusters: library does not cover the vehicle state bin");

  const std::size_t H = config.horizon;
  const double span = static_cast<double>(H - 1) * spec.sample_dt;
  const int stride = std::max(1, static_cast<int>(std::lround(config.window_stride / spec.sample_dt)));
  const Rigid2D to_state = vehicle_frame_transform(state.pose).inverse();

  std::vector<Trajectory> cands;
  std::vector<ClusterSource> srcs;
  for (int ia : lib.in_bin(bin)) {
    const auto& a = lib[ia];
    const auto& e = a.exit();
    const EntryBin next = bins.bin_of(e.speed, e.curvature);
    for (int ib : lib.in_bin(next)) {
      const auto& b = lib[ib];
      if (!bins.contains(b.bin, e.speed, e.curvature)) continue;
      const Trajectory joined = concatenate(a.states, b.states);
      for (std::size_t i0 = 0; i0 + H <= joined.size(); i0 += static_cast<std::size_t>(stride)) {
        const TimedState& start = joined[i0];
        if (start.t > a.states.back().t + 1e-9) break;  // window must start inside B(S_i)
        if (!bins.contains(bin, start.speed, start.curvature)) continue;
        const Rigid2D place = to_state.compose(vehicle_frame_transform(start.pose));
        Trajectory w;
        w.frame_id = "vehicle";
        w.states.reserve(H);
        for (std::size_t h = 0; h < H; ++h) {
          TimedState s = joined[i0 + h];
          s.pose = place.apply(s.pose);
          s.t = joined[i0 + h].t - start.t;
          w.states.push_back(s);
        }
        const bool duplicate = std::any_of(cands.begin(), cands.end(), [&](const Trajectory& c) {
          return distance(c.back().position(), w.back().position()) < 1e-9 && traj_distance(c, w) < 1e-9;
        });
        if (duplicate) continue;
        cands.push_back(std::move(w));
        srcs.push_back({ia, ib, start.t, detail::window_energy(a, b, start.t, span, spec)});
      }
    }
  }

  TrajectoryCluster cluster;
  cluster.bin = bin;
  if (cands.empty()) {
    note(diag, "extract_clusters: no candidate windows for the vehicle bin");
    return cluster;
  }
  std::size_t seed = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (srcs[i].energy < srcs[seed].energy - 1e-12) seed = i;

  const std::size_t want = std::min(config.members, cands.size());
  if (want < config.members)
    note(diag, "extract_clusters: only " + std::to_string(cands.size()) + " distinct candidates available");
  std::vector<double> gap(cands.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(cands.size(), false);
  std::size_t pick = seed;
  for (std::size_t n = 0; n < want; ++n) {
    taken[pick] = true;
    cluster.members.push_back(cands[pick]);
    cluster.sources.push_back(srcs[pick]);
    std::size_t next = cands.size();
    double far = -1.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (taken[i]) continue;
      gap[i] = std::min(gap[i], traj_distance(cands[i], cands[pick]));
      if (gap[i] > far) {
        far = gap[i];
        next = i;
      }
    }
    if (next == cands.size()) break;
    pick = next;
  }
  return cluster;
}

struct ClusterMatch {
  std::size_t index = 0;
  double distance = 0.0;
  Trajectory fitted;
};

// Nearest cluster member under the mean point distance. Raw trajectories with
// a different sample count are first resampled uniformly to H points.
inline ClusterMatch match_to_cluster(const Trajectory& raw, const TrajectoryCluster& cluster) {
  if (raw.size() < 2) throw DataError("match_to_cluster: need at least 2 states");
  if (cluster.empty()) throw DataError("match_to_cluster: empty cluster");
  const std::size_t H = cluster.members.front().size();
  const Trajectory probe = raw.size() == H ? raw : resample_uniform(raw, H);
  ClusterMatch best{0, std::numeric_limits<double>::infinity(), {}};
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const double d = traj_distance(cluster.members[k], probe);
    if (d < best.distance) {
      best.index = k;
      best.distance = d;
    }
  }
  best.fitted = cluster.members[best.index];
  return best;
}

}  // namespace offroad
