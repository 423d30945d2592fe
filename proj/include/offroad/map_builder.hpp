#pragma once

// Point cloud rasterization and the co-registered feature layers:
// elevation, roughness, obstacle, artificial potential field and ego momentum.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "offroad/core.hpp"
#include "offroad/errors.hpp"
#include "offroad/grid.hpp"

namespace offroad {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct PointCloud {
  std::vector<Point3> points;
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct CellStats {
  std::uint32_t count = 0;
  double mean = 0.0;   // mean z
  double msd = 0.0;    // mean squared deviation from the mean (population form)
  double range = 0.0;  // max z - min z
  bool filled = false;
  bool inherited = false;  // value copied from a coarser level
};

struct GridStats {
  GridSpec spec;
  std::vector<CellStats> cells;
  std::size_t out_of_bounds = 0;

  const CellStats& at(int ix, int iy) const { return cells[spec.index(ix, iy)]; }
  CellStats& at(int ix, int iy) { return cells[spec.index(ix, iy)]; }

  std::size_t empty_cells() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const CellStats& c) { return !c.filled; }));
  }
};

inline GridStats rasterize(const PointCloud& cloud, const GridSpec& spec) {
  spec.validate();
  GridStats stats{spec, std::vector<CellStats>(spec.cell_count()), 0};
  std::vector<double> sum(spec.cell_count(), 0.0);
  std::vector<double> zmin(spec.cell_count(), std::numeric_limits<double>::infinity());
  std::vector<double> zmax(spec.cell_count(), -std::numeric_limits<double>::infinity());
  std::vector<std::ptrdiff_t> owner(cloud.points.size(), -1);

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto cell = spec.cell_of({p.x, p.y});
    if (!cell) {
      ++stats.out_of_bounds;
      continue;
    }
    const std::size_t idx = spec.index(cell->first, cell->second);
    owner[i] = static_cast<std::ptrdiff_t>(idx);
    stats.cells[idx].count += 1;
    sum[idx] += p.z;
    zmin[idx] = std::min(zmin[idx], p.z);
    zmax[idx] = std::max(zmax[idx], p.z);
  }
  for (std::size_t idx = 0; idx < stats.cells.size(); ++idx) {
    auto& c = stats.cells[idx];
    if (c.count == 0) continue;
    c.filled = true;
    c.mean = sum[idx] / c.count;
    c.range = zmax[idx] - zmin[idx];
  }
  // Second pass keeps the squared deviations exact for small cells.
  std::vector<double> sq(spec.cell_count(), 0.0);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (owner[i] < 0) continue;
    const auto idx = static_cast<std::size_t>(owner[i]);
    const double d = cloud.points[i].z - stats.cells[idx].mean;
    sq[idx] += d * d;
  }
  for (std::size_t idx = 0; idx < stats.cells.size(); ++idx) {
    auto& c = stats.cells[idx];
    if (c.count > 1) c.msd = sq[idx] / c.count;
  }
  return stats;
}

namespace detail {

// Ratio between two nested resolutions; throws unless it is a positive integer.
inline int nesting_ratio(const GridSpec& coarse, const GridSpec& fine) {
  const double r = coarse.resolution / fine.resolution;
  const long k = std::lround(r);
  const double extent_gap =
      std::max(std::abs(coarse.width * coarse.resolution - fine.width * fine.resolution),
               std::abs(coarse.height * coarse.resolution - fine.height * fine.resolution));
  const double origin_gap = distance(coarse.origin.position(), fine.origin.position()) +
                            angle_distance(coarse.origin.heading, fine.origin.heading);
  if (k < 1 || std::abs(r - static_cast<double>(k)) > 1e-9 * r || extent_gap > 1e-9 * r ||
      origin_gap > 1e-9) {
    throw ConfigError("fill_multires: resolutions must be nested integer multiples over one extent");
  }
  return static_cast<int>(k);
}

}  // namespace detail

// Three-level fallback: empty fine cells read the enclosing mid cell, empty mid
// cells read the enclosing low cell, empty low cells take `default_elevation`.
inline GridStats fill_multires(const PointCloud& cloud, const std::array<GridSpec, 3>& specs,
                               double default_elevation) {
  for (const auto& s : specs) s.validate();
  const int k_low_mid = detail::nesting_ratio(specs[0], specs[1]);
  const int k_mid_high = detail::nesting_ratio(specs[1], specs[2]);

  GridStats low = rasterize(cloud, specs[0]);
  GridStats mid = rasterize(cloud, specs[1]);
  GridStats high = rasterize(cloud, specs[2]);

  for (auto& c : low.cells) {
    if (c.filled) continue;
    c = CellStats{0, default_elevation, 0.0, 0.0, true, true};
  }
  for (int iy = 0; iy < mid.spec.height; ++iy) {
    for (int ix = 0; ix < mid.spec.width; ++ix) {
      auto& c = mid.at(ix, iy);
      if (c.filled) continue;
      const auto& src = low.at(ix / k_low_mid, iy / k_low_mid);
      c = CellStats{0, src.mean, src.msd, src.range, true, true};
    }
  }
  for (int iy = 0; iy < high.spec.height; ++iy) {
    for (int ix = 0; ix < high.spec.width; ++ix) {
      auto& c = high.at(ix, iy);
      if (c.filled) continue;
      const auto& src = mid.at(ix / k_mid_high, iy / k_mid_high);
      c = CellStats{0, src.mean, src.msd, src.range, true, true};
    }
  }
  return high;
}

inline Layer elevation_layer(const GridStats& stats) {
  Layer out(stats.spec);
  for (std::size_t i = 0; i < stats.cells.size(); ++i) out.values[i] = stats.cells[i].mean;
  return out;
}

inline Layer roughness_layer(const GridStats& stats) {
  Layer out(stats.spec);
  for (std::size_t i = 0; i < stats.cells.size(); ++i) out.values[i] = stats.cells[i].msd;
  return out;
}

// 1 where the in-cell height range strictly exceeds the threshold.
inline BinaryLayer obstacle_map(const GridStats& stats, double threshold) {
  BinaryLayer out(stats.spec, 0);
  for (std::size_t i = 0; i < stats.cells.size(); ++i)
    out.values[i] = stats.cells[i].filled && stats.cells[i].range > threshold ? 1 : 0;
  return out;
}

namespace detail {

// Liang-Barsky clip of segment a->b against the rectangle [0,w]x[0,h].
// Returns the parameter interval inside, if any.
inline std::optional<std::pair<double, double>> clip_segment(Vec2 a, Vec2 b, double w, double h) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const std::array<double, 4> p{-dx, dx, -dy, dy};
  const std::array<double, 4> q{a.x, w - a.x, a.y, h - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return std::nullopt;
  }
  return std::pair{t0, t1};
}

}  // namespace detail

// First exit of the reference polyline from the map rectangle, or the
// reference's final pose when it ends inside.
inline Pose2D guide_point(const Trajectory& global_ref, const GridSpec& spec) {
  spec.validate();
  if (global_ref.empty()) throw BlockedError("guide_point: empty reference");
  const double w = spec.width * spec.resolution, h = spec.height * spec.resolution;
  bool entered = spec.contains(global_ref.front().position());
  for (std::size_t i = 0; i + 1 < global_ref.size(); ++i) {
    const Vec2 a = global_ref[i].position(), b = global_ref[i + 1].position();
    const Vec2 la = spec.to_local(a), lb = spec.to_local(b);
    const auto clip = detail::clip_segment(la, lb, w, h);
    if (!clip) {
      if (entered) break;  // numerically outside after being inside
      continue;
    }
    entered = true;
    if (clip->second < 1.0 && !spec.contains(b)) {
      const Vec2 exit = a + clip->second * (b - a);
      const double heading = std::atan2(b.y - a.y, b.x - a.x);
      return Pose2D{exit.x, exit.y, heading};
    }
  }
  if (!entered) throw BlockedError("guide_point: reference never enters the map; no guidance available");
  return global_ref.back().pose;
}

struct PotentialParams {
  double attraction_gain = 0.2;   // theta
  double repulsion_gain = 50.0;   // eta
  double attraction_radius = 20.0;  // d*: quadratic inside, linear beyond
  double repulsion_radius = 5.0;    // D*: obstacles farther than this exert nothing

  void validate() const {
    if (!(attraction_gain > 0 && repulsion_gain > 0 && attraction_radius > 0 && repulsion_radius > 0))
      throw ConfigError("potential params must all be positive");
  }
};

inline double attractive_potential(double d, const PotentialParams& p) {
  if (d <= p.attraction_radius) return 0.5 * p.attraction_gain * d * d;
  return p.attraction_gain * p.attraction_radius * d -
         0.5 * p.attraction_gain * p.attraction_radius * p.attraction_radius;
}

inline double repulsive_potential(double d, const PotentialParams& p) {
  if (d > p.repulsion_radius) return 0.0;
  const double g = 1.0 / d - 1.0 / p.repulsion_radius;
  return 0.5 * p.repulsion_gain * g * g;
}

// Attraction toward `goal` plus the sum of repulsion from every obstacle cell
// within the repulsion radius. Center-to-center distances are floored at half a
// cell so a pixel on top of an obstacle stays finite.
inline Layer potential_field(const BinaryLayer& obstacles, const Pose2D& goal,
                             const PotentialParams& params) {
  params.validate();
  const GridSpec& spec = obstacles.spec;
  if (!spec.contains(goal.position())) throw DataError("potential_field: goal outside the map");
  Layer out(spec);
  for (int iy = 0; iy < spec.height; ++iy)
    for (int ix = 0; ix < spec.width; ++ix)
      out.at(ix, iy) = attractive_potential(distance(spec.cell_center(ix, iy), goal.position()), params);

  const double floor_d = spec.resolution / 2.0;
  const int reach = static_cast<int>(std::ceil(params.repulsion_radius / spec.resolution));
  for (int oy = 0; oy < spec.height; ++oy) {
    for (int ox = 0; ox < spec.width; ++ox) {
      if (!obstacles.at(ox, oy)) continue;
      for (int iy = std::max(0, oy - reach); iy <= std::min(spec.height - 1, oy + reach); ++iy) {
        for (int ix = std::max(0, ox - reach); ix <= std::min(spec.width - 1, ox + reach); ++ix) {
          // Grid is rigid, so the metric distance follows from cell offsets.
          const double d = std::max(floor_d, spec.resolution * std::hypot(ix - ox, iy - oy));
          out.at(ix, iy) += repulsive_potential(d, params);
        }
      }
    }
  }
  return out;
}

struct MomentumParams {
  double gain = 42.0;  // zeta
  void validate() const {
    if (!(gain > 0)) throw ConfigError("momentum gain must be positive");
  }
};

// Unclamped per-pixel momentum for a pixel at `p` (vehicle frame).
inline double momentum_value(Vec2 p, Vec2 v, double gain) {
  const double r = norm(p), speed = norm(v);
  if (speed <= 0.0 || r < 1e-12) return 0.0;
  return gain * dot(p, v) * (1.0 / r - 1.0 / speed);
}

inline Layer momentum_map(Vec2 velocity, const MomentumParams& params, const GridSpec& spec) {
  params.validate();
  spec.validate();
  Layer out(spec, 0.0);
  if (!(norm(velocity) > 0.0)) return out;
  for (int iy = 0; iy < spec.height; ++iy)
    for (int ix = 0; ix < spec.width; ++ix)
      out.at(ix, iy) = std::max(0.0, momentum_value(spec.cell_center(ix, iy), velocity, params.gain));
  return out;
}

struct MapConfig {
  std::array<GridSpec, 3> specs{centered_grid(100.0, 4.0), centered_grid(100.0, 1.0),
                                centered_grid(100.0, 0.25)};
  double default_elevation = 0.0;
  double obstacle_threshold = 0.6;
  PotentialParams potential;
  MomentumParams momentum;

  void validate() const {
    for (const auto& s : specs) s.validate();
    detail::nesting_ratio(specs[0], specs[1]);
    detail::nesting_ratio(specs[1], specs[2]);
    if (!(obstacle_threshold > 0)) throw ConfigError("obstacle threshold must be positive");
    potential.validate();
    momentum.validate();
  }
};

struct FeatureMapStack {
  GridSpec spec;
  Layer elevation;
  Layer roughness;
  BinaryLayer obstacle;
  Layer potential;
  Layer momentum;
  Pose2D guide_point;
};

// All inputs in the vehicle frame.
inline FeatureMapStack build_stack(const PointCloud& cloud, const VehicleState& state,
                                   const Trajectory& global_ref, const MapConfig& config) {
  config.validate();
  const GridStats stats = fill_multires(cloud, config.specs, config.default_elevation);
  FeatureMapStack stack;
  stack.spec = stats.spec;
  stack.elevation = elevation_layer(stats);
  stack.roughness = roughness_layer(stats);
  stack.obstacle = obstacle_map(stats, config.obstacle_threshold);
  stack.guide_point = guide_point(global_ref, stats.spec);
  stack.potential = potential_field(stack.obstacle, stack.guide_point, config.potential);
  stack.momentum = momentum_map({state.vx, state.vy}, config.momentum, stats.spec);
  return stack;
}

}  // namespace offroad
