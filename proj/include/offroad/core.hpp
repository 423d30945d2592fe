#pragma once

// Geometric and trajectory value types shared by every module.
//
// Frame convention: headings are measured counter-clockwise from +x. In a
// vehicle frame the vehicle sits at the origin facing +y (heading pi/2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "offroad/errors.hpp"

namespace offroad {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kForwardHeading = kPi / 2.0;

// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  if (!std::isfinite(a)) return a;
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// Smallest absolute difference between two headings, in [0, pi].
inline double angle_distance(double a, double b) {
  return std::abs(normalize_angle(a - b));
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double heading_)
      : x(x_), y(y_), heading(normalize_angle(heading_)) {}

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct TimedState {
  double t = 0.0;
  Pose2D pose;
  double speed = 0.0;
  // NaN marks "unknown" (raw recorded trajectories); generators store exact values.
  double curvature = 0.0;

  Vec2 position() const { return pose.position(); }
  friend bool operator==(const TimedState&, const TimedState&) = default;
};

struct Trajectory {
  std::vector<TimedState> states;
  std::string frame_id = "vehicle";

  std::size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
  const TimedState& operator[](std::size_t i) const { return states[i]; }
  TimedState& operator[](std::size_t i) { return states[i]; }
  const TimedState& front() const { return states.front(); }
  const TimedState& back() const { return states.back(); }

  // True when every state carries a stored (non-NaN) curvature.
  bool has_curvature() const {
    return std::none_of(states.begin(), states.end(),
                        [](const TimedState& s) { return std::isnan(s.curvature); });
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct VehicleState {
  Pose2D pose;
  double vx = 0.0;
  double vy = 0.0;
  double curvature = 0.0;

  double speed() const { return std::hypot(vx, vy); }
  bool finite() const {
    return std::isfinite(pose.x) && std::isfinite(pose.y) && std::isfinite(pose.heading) &&
           std::isfinite(vx) && std::isfinite(vy) && std::isfinite(curvature);
  }
};

// Row-major raster geometry. Cell (ix, iy) covers [ix, ix+1) x [iy, iy+1) in
// grid units measured from `origin`, with the grid x axis along origin.heading.
struct GridSpec {
  Pose2D origin;
  double resolution = 1.0;
  int width = 0;
  int height = 0;

  bool valid() const {
    return resolution > 0.0 && std::isfinite(resolution) && width > 0 && height > 0 &&
           std::isfinite(origin.x) && std::isfinite(origin.y);
  }
  void validate() const {
    if (!valid()) throw ConfigError("invalid grid spec: resolution must be > 0 and size positive");
  }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(ix);
  }

  // Point expressed in grid-aligned meters relative to the origin corner.
  Vec2 to_local(Vec2 p) const {
    const double c = std::cos(origin.heading), s = std::sin(origin.heading);
    const Vec2 d = p - origin.position();
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
  }
  Vec2 from_local(Vec2 q) const {
    const double c = std::cos(origin.heading), s = std::sin(origin.heading);
    return {origin.x + c * q.x - s * q.y, origin.y + s * q.x + c * q.y};
  }

  std::optional<std::pair<int, int>> cell_of(Vec2 p) const {
    const Vec2 q = to_local(p);
    const double fx = std::floor(q.x / resolution);
    const double fy = std::floor(q.y / resolution);
    if (!(fx >= 0.0 && fy >= 0.0 && fx < width && fy < height)) return std::nullopt;
    return std::pair{static_cast<int>(fx), static_cast<int>(fy)};
  }

  Vec2 cell_center(int ix, int iy) const {
    return from_local({(ix + 0.5) * resolution, (iy + 0.5) * resolution});
  }

  // Closed rectangle test, boundary inclusive.
  bool contains(Vec2 p, double tol = 1e-9) const {
    const Vec2 q = to_local(p);
    return q.x >= -tol && q.y >= -tol && q.x <= width * resolution + tol &&
           q.y <= height * resolution + tol;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Square grid of `extent` meters centred on the vehicle-frame origin.
inline GridSpec centered_grid(double extent, double resolution) {
  const int cells = static_cast<int>(std::lround(extent / resolution));
  return GridSpec{Pose2D{-extent / 2.0, -extent / 2.0, 0.0}, resolution, cells, cells};
}

// Rigid motion p' = R(rotation) * p + translation.
struct Rigid2D {
  double rotation = 0.0;
  Vec2 translation;

  Vec2 apply(Vec2 p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {c * p.x - s * p.y + translation.x, s * p.x + c * p.y + translation.y};
  }
  Pose2D apply(const Pose2D& p) const {
    const Vec2 q = apply(p.position());
    return Pose2D{q.x, q.y, p.heading + rotation};
  }
  Rigid2D inverse() const {
    const double c = std::cos(-rotation), s = std::sin(-rotation);
    return {-rotation, {-(c * translation.x - s * translation.y),
                        -(s * translation.x + c * translation.y)}};
  }
  // (this * other)(p) = this(other(p))
  Rigid2D compose(const Rigid2D& other) const {
    return {rotation + other.rotation, apply(other.translation)};
  }
};

// Maps `origin` to (0, 0) facing +y.
inline Rigid2D vehicle_frame_transform(const Pose2D& origin) {
  const double rot = kForwardHeading - origin.heading;
  const double c = std::cos(rot), s = std::sin(rot);
  return {rot, {-(c * origin.x - s * origin.y), -(s * origin.x + c * origin.y)}};
}

inline Trajectory transform(const Trajectory& traj, const Rigid2D& tf, std::string frame_id) {
  Trajectory out;
  out.frame_id = std::move(frame_id);
  out.states.reserve(traj.size());
  for (const auto& s : traj.states) {
    TimedState r = s;
    r.pose = tf.apply(s.pose);
    out.states.push_back(r);
  }
  return out;
}

inline Trajectory to_vehicle_frame(const Trajectory& traj, const Pose2D& origin) {
  return transform(traj, vehicle_frame_transform(origin), "vehicle");
}

inline Trajectory from_vehicle_frame(const Trajectory& traj, const Pose2D& origin,
                                     std::string frame_id = "world") {
  return transform(traj, vehicle_frame_transform(origin).inverse(), std::move(frame_id));
}

// Cumulative arc length at each state.
inline std::vector<double> arc_lengths(const Trajectory& traj) {
  std::vector<double> s(traj.size(), 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i)
    s[i] = s[i - 1] + distance(traj[i].position(), traj[i - 1].position());
  return s;
}

inline double path_length(const Trajectory& traj) {
  const auto s = arc_lengths(traj);
  return s.empty() ? 0.0 : s.back();
}

inline double lerp(double a, double b, double u) { return a + (b - a) * u; }

inline double lerp_angle(double a, double b, double u) {
  return normalize_angle(a + normalize_angle(b - a) * u);
}

inline TimedState interpolate(const TimedState& a, const TimedState& b, double u) {
  TimedState r;
  r.t = lerp(a.t, b.t, u);
  r.pose = Pose2D{lerp(a.pose.x, b.pose.x, u), lerp(a.pose.y, b.pose.y, u),
                  lerp_angle(a.pose.heading, b.pose.heading, u)};
  r.speed = lerp(a.speed, b.speed, u);
  r.curvature = lerp(a.curvature, b.curvature, u);
  return r;
}

// n states equally spaced by arc length; endpoints preserved.
inline Trajectory resample_uniform(const Trajectory& traj, std::size_t n) {
  if (traj.size() < 2) throw DataError("resample_uniform: need at least 2 states");
  if (n < 2) throw ConfigError("resample_uniform: n must be >= 2");
  const auto s = arc_lengths(traj);
  const double total = s.back();
  if (!(total > 1e-12) || !std::isfinite(total))
    throw DataError("resample_uniform: zero-length trajectory");

  Trajectory out;
  out.frame_id = traj.frame_id;
  out.states.reserve(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out.states.push_back(traj.front());
      continue;
    }
    if (i + 1 == n) {
      out.states.push_back(traj.back());
      continue;
    }
    const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 2 < traj.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double u = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.states.push_back(interpolate(traj[seg], traj[seg + 1], u));
  }
  return out;
}

// Closest point on a polyline.
struct PolylineProjection {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t segment = 0;
  double fraction = 0.0;  // position along the segment in [0, 1]
  Vec2 point;
};

inline PolylineProjection project_onto(const Trajectory& poly, Vec2 p) {
  PolylineProjection best;
  if (poly.empty()) return best;
  if (poly.size() == 1) {
    best.point = poly.front().position();
    best.distance = distance(p, best.point);
    return best;
  }
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const Vec2 a = poly[i].position(), b = poly[i + 1].position();
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double u = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + u * ab;
    const double d = distance(p, q);
    if (d < best.distance) best = {d, i, u, q};
  }
  return best;
}

// Mean Euclidean distance between index-matched positions of two equal-length
// trajectories.
inline double traj_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw DataError("traj_distance: length mismatch");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t h = 0; h < a.size(); ++h) sum += distance(a[h].position(), b[h].position());
  return sum / static_cast<double>(a.size());
}

// Signed curvature of the circle through three points; 0 when collinear or degenerate.
inline double three_point_curvature(Vec2 a, Vec2 b, Vec2 c) {
  const double ab = distance(a, b), bc = distance(b, c), ca = distance(c, a);
  const double denom = ab * bc * ca;
  if (!(denom > 1e-15)) return 0.0;
  return 2.0 * cross(b - a, c - b) / denom;
}

}  // namespace offroad
