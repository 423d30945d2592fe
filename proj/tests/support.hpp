#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "offroad/core.hpp"
#include "offroad/grid.hpp"
#include "offroad/map_builder.hpp"
#include "offroad/primitive_lib.hpp"

namespace testing_support {

using namespace offroad;

// Exact equality that treats NaN fields (unknown curvature) as equal.
inline bool same_states(const Trajectory& a, const Trajectory& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &p = a[i], &q = b[i];
    if (!(eq(p.t, q.t) && p.pose == q.pose && eq(p.speed, q.speed) && eq(p.curvature, q.curvature))) return false;
  }
  return true;
}

// n states along +y starting at (x0, y0), spacing `step`.
inline Trajectory line_y(std::size_t n, double step, double x0 = 0.0, double y0 = 0.0, double speed = 1.0) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i)
    t.states.push_back({static_cast<double>(i) * step / speed, Pose2D{x0, y0 + step * static_cast<double>(i), kForwardHeading},
                        speed, 0.0});
  return t;
}

// CCW arc of radius r about (cx, cy), angles a0..a1, n states.
inline Trajectory arc(double cx, double cy, double r, double a0, double a1, std::size_t n) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / static_cast<double>(n - 1);
    t.states.push_back({static_cast<double>(i), Pose2D{cx + r * std::cos(a), cy + r * std::sin(a), a + kPi / 2}, 1.0,
                        1.0 / r});
  }
  return t;
}

// A stack with every layer on `spec`, all zero, guide point straight ahead.
inline FeatureMapStack flat_stack(const GridSpec& spec) {
  FeatureMapStack s;
  s.spec = spec;
  s.elevation = Layer(spec, 0.0);
  s.roughness = Layer(spec, 0.0);
  s.obstacle = BinaryLayer(spec, 0);
  s.potential = Layer(spec, 0.0);
  s.momentum = Layer(spec, 0.0);
  s.guide_point = Pose2D{0.0, spec.origin.y + spec.height * spec.resolution, kForwardHeading};
  return s;
}

inline const PrimitiveLibrary& default_library() {
  static const PrimitiveLibrary lib = generate_primitives(PrimitiveGenSpec{});
  return lib;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("offroad_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
