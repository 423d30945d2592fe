#pragma once

// Line-oriented file formats: trajectory CSV, XYZ clouds, layer CSV/PGM with
// JSON sidecars, primitive library directories, frame bundles, weights JSON
// and the report CSVs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "offroad/core.hpp"
#include "offroad/cost_eval.hpp"
#include "offroad/errors.hpp"
#include "offroad/grid.hpp"
#include "offroad/map_builder.hpp"
#include "offroad/planner.hpp"
#include "offroad/primitive_lib.hpp"
#include "offroad/scenario_gen.hpp"
#include "offroad/session.hpp"
#include "offroad/weight_adapt.hpp"

namespace offroad {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

inline std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

// ---- trajectories -------------------------------------------------------

inline constexpr const char* kTrajectoryHeader = "t,x,y,heading,speed,curvature";

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryHeader << '\n';
  for (const auto& s : traj.states)
    out << format_double(s.t) << ',' << format_double(s.pose.x) << ',' << format_double(s.pose.y) << ','
        << format_double(s.pose.heading) << ',' << format_double(s.speed) << ',' << format_double(s.curvature)
        << '\n';
}

inline void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
  auto out = open_out(path);
  write_trajectory_csv(out, traj);
}

inline Trajectory read_trajectory_csv(const fs::path& path, std::string frame_id = "vehicle") {
  auto in = open_in(path);
  Trajectory traj;
  traj.frame_id = std::move(frame_id);
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kTrajectoryHeader) throw DataError(where(path, n) + ": expected header " + kTrajectoryHeader);
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) throw DataError(where(path, n) + ": expected 6 fields");
    double v[6];
    for (int i = 0; i < 6; ++i) {
      const auto p = parse_double(f[static_cast<std::size_t>(i)]);
      if (!p) throw DataError(where(path, n) + ": malformed number");
      v[i] = *p;
    }
    if (!traj.empty() && !(v[0] > traj.back().t))
      throw DataError(where(path, n) + ": timestamps must be strictly increasing");
    traj.states.push_back({v[0], Pose2D{v[1], v[2], v[3]}, v[4], v[5]});
  }
  if (!header) throw DataError(path.string() + ": empty trajectory file");
  return traj;
}

// ---- point clouds -------------------------------------------------------

inline void write_xyz(const fs::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  for (const auto& p : cloud.points)
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
}

// Whitespace-separated "x y z" per line; blank lines and '#' comments are skipped.
inline PointCloud read_xyz(const fs::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tok;
    std::vector<double> v;
    while (ss >> tok) {
      const auto p = parse_double(tok);
      if (!p || !std::isfinite(*p)) throw DataError(where(path, n) + ": malformed point");
      v.push_back(*p);
    }
    if (v.empty()) continue;
    if (v.size() != 3) throw DataError(where(path, n) + ": expected 3 values, got " + std::to_string(v.size()));
    cloud.points.push_back({v[0], v[1], v[2]});
  }
  return cloud;
}

// ---- layers -------------------------------------------------------------

inline Json grid_spec_json(const GridSpec& s) {
  return Json{{"origin_x", s.origin.x}, {"origin_y", s.origin.y}, {"origin_heading", s.origin.heading},
              {"resolution", s.resolution}, {"width", s.width}, {"height", s.height}};
}

inline GridSpec grid_spec_from_json(const Json& j) {
  GridSpec s{Pose2D{j.at("origin_x").get<double>(), j.at("origin_y").get<double>(),
                    j.at("origin_heading").get<double>()},
             j.at("resolution").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
  s.validate();
  return s;
}

// One CSV row per grid row, iy = 0 first; columns run along ix.
template <typename T>
void write_layer_csv(const fs::path& path, const Grid<T>& layer) {
  auto out = open_out(path);
  const auto& s = layer.spec;
  for (int iy = 0; iy < s.height; ++iy) {
    for (int ix = 0; ix < s.width; ++ix) {
      if (ix) out << ',';
      if constexpr (std::is_floating_point_v<T>)
        out << format_double(layer.at(ix, iy));
      else
        out << static_cast<int>(layer.at(ix, iy));
    }
    out << '\n';
  }
}

inline Layer read_layer_csv(const fs::path& path, const GridSpec& spec) {
  auto in = open_in(path);
  Layer layer(spec);
  std::string line;
  int iy = 0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (iy >= spec.height) throw DataError(where(path, n) + ": more rows than the grid height");
    const auto f = split(line, ',');
    if (static_cast<int>(f.size()) != spec.width) throw DataError(where(path, n) + ": row width mismatch");
    for (int ix = 0; ix < spec.width; ++ix) {
      const auto p = parse_double(f[static_cast<std::size_t>(ix)]);
      if (!p) throw DataError(where(path, n) + ": malformed number");
      layer.at(ix, iy) = *p;
    }
    ++iy;
  }
  if (iy != spec.height) throw DataError(path.string() + ": fewer rows than the grid height");
  return layer;
}

struct LayerScale {
  double min = 0.0;
  double max = 0.0;
};

// Plain (ASCII) 16-bit PGM, top image row = highest iy. Values map linearly
// from [min, max] onto [0, 65535]; the scale goes to the sidecar.
template <typename T>
LayerScale write_layer_pgm(const fs::path& path, const Grid<T>& layer) {
  const auto& s = layer.spec;
  LayerScale sc{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : layer.values) {
    const double d = static_cast<double>(v);
    if (!std::isfinite(d)) continue;
    sc.min = std::min(sc.min, d);
    sc.max = std::max(sc.max, d);
  }
  if (!std::isfinite(sc.min)) sc = {0.0, 0.0};
  auto out = open_out(path);
  out << "P2\n" << s.width << ' ' << s.height << "\n65535\n";
  const double span = sc.max - sc.min;
  for (int iy = s.height - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < s.width; ++ix) {
      const double d = static_cast<double>(layer.at(ix, iy));
      const double u = span > 0 && std::isfinite(d) ? (d - sc.min) / span : 0.0;
      if (ix) out << ' ';
      out << static_cast<int>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
    }
    out << '\n';
  }
  return sc;
}

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<int> pixels;  // row-major, top row first
};

inline PgmImage read_pgm(const fs::path& path) {
  auto in = open_in(path);
  std::string magic;
  PgmImage img;
  in >> magic >> img.width >> img.height >> img.maxval;
  if (magic != "P2" || !in || img.width <= 0 || img.height <= 0) throw DataError(path.string() + ": not a P2 PGM");
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (auto& p : img.pixels)
    if (!(in >> p)) throw DataError(path.string() + ": truncated PGM");
  return img;
}

inline void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline Json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename T>
void export_layer(const fs::path& dir, const std::string& name, const Grid<T>& layer) {
  write_layer_csv(dir / (name + ".csv"), layer);
  const LayerScale sc = write_layer_pgm(dir / (name + ".pgm"), layer);
  Json side = grid_spec_json(layer.spec);
  side["layer"] = name;
  side["pgm_min"] = sc.min;
  side["pgm_max"] = sc.max;
  write_json(dir / (name + ".json"), side);
}

inline void export_stack(const fs::path& dir, const FeatureMapStack& stack) {
  export_layer(dir, "elevation", stack.elevation);
  export_layer(dir, "roughness", stack.roughness);
  export_layer(dir, "obstacle", stack.obstacle);
  export_layer(dir, "potential", stack.potential);
  export_layer(dir, "momentum", stack.momentum);
  write_json(dir / "guide_point.json",
             Json{{"x", stack.guide_point.x}, {"y", stack.guide_point.y}, {"heading", stack.guide_point.heading}});
}

// ---- primitive libraries -----------------------------------------------

inline Json gen_spec_json(const PrimitiveGenSpec& s) {
  return Json{{"max_speed", s.max_speed},
              {"max_curvature", s.max_curvature},
              {"max_curvature_rate", s.max_curvature_rate},
              {"max_acceleration", s.max_acceleration},
              {"segments", s.segments},
              {"segment_duration", s.segment_duration},
              {"sample_dt", s.sample_dt},
              {"substeps", s.substeps},
              {"speed_change", s.speed_change},
              {"search_levels", s.search_levels},
              {"bins",
               {{"speed_min", s.bins.speed_min},
                {"speed_max", s.bins.speed_max},
                {"speed_step", s.bins.speed_step},
                {"curvature_max", s.bins.curvature_max},
                {"curvature_step", s.bins.curvature_step}}}};
}

inline PrimitiveGenSpec gen_spec_from_json(const Json& j) {
  PrimitiveGenSpec s;
  s.max_speed = j.at("max_speed").get<double>();
  s.max_curvature = j.at("max_curvature").get<double>();
  s.max_curvature_rate = j.at("max_curvature_rate").get<double>();
  s.max_acceleration = j.at("max_acceleration").get<double>();
  s.segments = j.at("segments").get<int>();
  s.segment_duration = j.at("segment_duration").get<double>();
  s.sample_dt = j.at("sample_dt").get<double>();
  s.substeps = j.at("substeps").get<int>();
  s.speed_change = j.at("speed_change").get<double>();
  s.search_levels = j.at("search_levels").get<int>();
  const auto& b = j.at("bins");
  s.bins.speed_min = b.at("speed_min").get<double>();
  s.bins.speed_max = b.at("speed_max").get<double>();
  s.bins.speed_step = b.at("speed_step").get<double>();
  s.bins.curvature_max = b.at("curvature_max").get<double>();
  s.bins.curvature_step = b.at("curvature_step").get<double>();
  s.validate();
  return s;
}

inline std::string primitive_file(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "prim_%05d.csv", id);
  return buf;
}

inline void write_library(const fs::path& dir, const PrimitiveLibrary& lib) {
  Json prims = Json::array();
  for (const auto& p : lib.primitives) {
    Json controls = Json::array();
    for (const auto& u : p.controls) controls.push_back({u.curvature_rate, u.acceleration});
    prims.push_back({{"id", p.id},
                     {"speed_bin", p.bin.speed},
                     {"curvature_bin", p.bin.curvature},
                     {"behavior", behavior_name(p.behavior)},
                     {"entry_speed", p.entry_speed},
                     {"entry_curvature", p.entry_curvature},
                     {"objective", p.objective},
                     {"controls", controls},
                     {"states", primitive_file(p.id)}});
    write_trajectory_csv(dir / primitive_file(p.id), p.states);
  }
  write_json(dir / "library.json",
             Json{{"spec", gen_spec_json(lib.spec)}, {"primitives", prims}, {"diagnostics", lib.diagnostics}});
}

// Primitives are rebuilt by integrating the stored controls; the stored
// state files must agree within `tolerance`.
inline PrimitiveLibrary read_library(const fs::path& dir, double tolerance = 1e-9) {
  const Json j = read_json(dir / "library.json");
  PrimitiveLibrary lib;
  try {
    lib.spec = gen_spec_from_json(j.at("spec"));
    for (const auto& jp : j.at("primitives")) {
      BehavioralPrimitive p;
      p.id = jp.at("id").get<int>();
      p.bin = {jp.at("speed_bin").get<int>(), jp.at("curvature_bin").get<int>()};
      const auto b = behavior_from_name(jp.at("behavior").get<std::string>());
      if (!b) throw DataError("library.json: unknown behavior for primitive " + std::to_string(p.id));
      p.behavior = *b;
      p.entry_speed = jp.at("entry_speed").get<double>();
      p.entry_curvature = jp.at("entry_curvature").get<double>();
      p.objective = jp.at("objective").get<double>();
      for (const auto& u : jp.at("controls")) p.controls.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
      if (static_cast<int>(p.controls.size()) != lib.spec.segments)
        throw DataError("library.json: primitive " + std::to_string(p.id) + " has the wrong control count");
      p.states = integrate_controls(p.entry_speed, p.entry_curvature, p.controls, lib.spec);
      const Trajectory stored = read_trajectory_csv(dir / jp.at("states").get<std::string>());
      if (stored.size() != p.states.size())
        throw DataError("primitive " + std::to_string(p.id) + ": stored states differ in length");
      for (std::size_t i = 0; i < stored.size(); ++i) {
        const auto& a = stored[i];
        const auto& c = p.states[i];
        const double err = std::max({std::abs(a.pose.x - c.pose.x), std::abs(a.pose.y - c.pose.y),
                                     angle_distance(a.pose.heading, c.pose.heading), std::abs(a.speed - c.speed),
                                     std::abs(a.curvature - c.curvature), std::abs(a.t - c.t)});
        if (err > tolerance)
          throw DataError("primitive " + std::to_string(p.id) + ": stored states disagree with its controls");
      }
      if (p.id != static_cast<int>(lib.primitives.size()))
        throw DataError("library.json: primitive ids must be consecutive from 0");
      lib.primitives.push_back(std::move(p));
    }
    for (const auto& d : j.value("diagnostics", Json::array())) lib.diagnostics.push_back(d.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("library.json: ") + e.what());
  }
  if (lib.primitives.empty()) throw DataError("library.json: no primitives");
  lib.reindex();
  return lib;
}

// ---- scenario bundles ---------------------------------------------------

inline Json weights_json(const CostWeights& w) {
  return Json{{"w_h", w[kHeight]}, {"w_r", w[kRoughness]}, {"w_T", w[kDeviation]}, {"w_s", w[kSmoothness]}};
}

inline CostWeights weights_from_json(const Json& j) {
  CostWeights w{{j.at("w_h").get<double>(), j.at("w_r").get<double>(), j.at("w_T").get<double>(),
                 j.at("w_s").get<double>()}};
  return w;
}

inline Json scenario_params_json(const ScenarioParams& p) {
  return Json{{"ramp_grade", p.ramp_grade},
              {"ramp_tilt", p.ramp_tilt},
              {"ramp_start", p.ramp_start},
              {"ramp_end", p.ramp_end},
              {"curve_radius", p.curve_radius},
              {"crown_height", p.crown_height},
              {"crown_width", p.crown_width},
              {"corridor_half_width", p.corridor_half_width},
              {"bank_height", p.bank_height},
              {"cross_distance", p.cross_distance},
              {"turn_radius", p.turn_radius},
              {"undulation_amplitude", p.undulation_amplitude},
              {"undulation_wavelength", p.undulation_wavelength},
              {"roughness_sigma", p.roughness_sigma},
              {"roughness_wavelength", p.roughness_wavelength},
              {"base_noise", p.base_noise},
              {"point_count", p.point_count},
              {"scan_range", p.scan_range},
              {"nominal_speed", p.nominal_speed},
              {"frame_spacing", p.frame_spacing},
              {"lateral_jitter", p.lateral_jitter},
              {"heading_jitter", p.heading_jitter},
              {"speed_jitter", p.speed_jitter}};
}

inline ScenarioParams scenario_params_from_json(const Json& j) {
  ScenarioParams p;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("ramp_grade", p.ramp_grade);
  get("ramp_tilt", p.ramp_tilt);
  get("ramp_start", p.ramp_start);
  get("ramp_end", p.ramp_end);
  get("curve_radius", p.curve_radius);
  get("crown_height", p.crown_height);
  get("crown_width", p.crown_width);
  get("corridor_half_width", p.corridor_half_width);
  get("bank_height", p.bank_height);
  get("cross_distance", p.cross_distance);
  get("turn_radius", p.turn_radius);
  get("undulation_amplitude", p.undulation_amplitude);
  get("undulation_wavelength", p.undulation_wavelength);
  get("roughness_sigma", p.roughness_sigma);
  get("roughness_wavelength", p.roughness_wavelength);
  get("base_noise", p.base_noise);
  get("point_count", p.point_count);
  get("scan_range", p.scan_range);
  get("nominal_speed", p.nominal_speed);
  get("frame_spacing", p.frame_spacing);
  get("lateral_jitter", p.lateral_jitter);
  get("heading_jitter", p.heading_jitter);
  get("speed_jitter", p.speed_jitter);
  p.validate();
  return p;
}

inline std::string frame_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03d", index);
  return buf;
}

struct BundleInfo {
  ScenarioSpec spec;
  OracleSpec oracle;
  bool has_oracle = false;
};

inline void write_state_csv(const fs::path& path, const VehicleState& s) {
  auto out = open_out(path);
  out << "x,y,heading,vx,vy,curvature\n"
      << format_double(s.pose.x) << ',' << format_double(s.pose.y) << ',' << format_double(s.pose.heading) << ','
      << format_double(s.vx) << ',' << format_double(s.vy) << ',' << format_double(s.curvature) << '\n';
}

inline VehicleState read_state_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string header, row;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != "x,y,heading,vx,vy,curvature") throw DataError(where(path, 1) + ": unexpected header");
  if (!std::getline(in, row)) throw DataError(where(path, 2) + ": missing state row");
  const auto f = split(row, ',');
  if (f.size() != 6) throw DataError(where(path, 2) + ": expected 6 fields");
  double v[6];
  for (int i = 0; i < 6; ++i) {
    const auto p = parse_double(f[static_cast<std::size_t>(i)]);
    if (!p || !std::isfinite(*p)) throw DataError(where(path, 2) + ": malformed number");
    v[i] = *p;
  }
  return VehicleState{Pose2D{v[0], v[1], v[2]}, v[3], v[4], v[5]};
}

inline void write_frame(const fs::path& dir, const FrameSample& f, const BundleInfo& info) {
  fs::create_directories(dir);
  write_xyz(dir / "cloud.xyz", f.cloud);
  write_trajectory_csv(dir / "reference.csv", f.reference);
  write_state_csv(dir / "state.csv", f.state);
  if (!f.human.empty()) write_trajectory_csv(dir / "human.csv", f.human);
  Json j{{"index", f.index},
         {"kind", scenario_name(info.spec.kind)},
         {"seed", info.spec.seed},
         {"params", scenario_params_json(info.spec.params)},
         {"world_pose", {{"x", f.world_pose.x}, {"y", f.world_pose.y}, {"heading", f.world_pose.heading}}}};
  if (info.has_oracle) {
    j["oracle"] = {{"weights", weights_json(info.oracle.hidden_weights)},
                   {"noise_sigma", info.oracle.noise_sigma},
                   {"softmax_sampling", info.oracle.softmax_sampling}};
    if (f.oracle_member) j["oracle"]["member"] = *f.oracle_member;
  }
  write_json(dir / "scenario.json", j);
}

inline void write_bundle(const fs::path& dir, const std::vector<FrameSample>& frames, const BundleInfo& info) {
  fs::create_directories(dir);
  Json names = Json::array();
  for (const auto& f : frames) {
    write_frame(dir / frame_dir_name(f.index), f, info);
    names.push_back(frame_dir_name(f.index));
  }
  Json j{{"kind", scenario_name(info.spec.kind)},
         {"seed", info.spec.seed},
         {"params", scenario_params_json(info.spec.params)},
         {"frames", names}};
  if (info.has_oracle)
    j["oracle"] = {{"weights", weights_json(info.oracle.hidden_weights)},
                   {"noise_sigma", info.oracle.noise_sigma},
                   {"softmax_sampling", info.oracle.softmax_sampling}};
  write_json(dir / "bundle.json", j);
}

// Rebuilds the frame's map stack from its cloud with `map`.
inline FrameSample read_frame(const fs::path& dir, const MapConfig& map, BundleInfo* info = nullptr) {
  FrameSample f;
  const Json j = read_json(dir / "scenario.json");
  try {
    f.index = j.at("index").get<int>();
    const auto& wp = j.at("world_pose");
    f.world_pose = Pose2D{wp.at("x").get<double>(), wp.at("y").get<double>(), wp.at("heading").get<double>()};
    if (info) {
      info->spec.kind = scenario_from_name(j.at("kind").get<std::string>());
      info->spec.seed = j.at("seed").get<std::uint64_t>();
      info->spec.params = scenario_params_from_json(j.at("params"));
      info->has_oracle = j.contains("oracle");
      if (info->has_oracle) {
        const auto& o = j.at("oracle");
        info->oracle.hidden_weights = weights_from_json(o.at("weights"));
        info->oracle.noise_sigma = o.at("noise_sigma").get<double>();
        info->oracle.softmax_sampling = o.at("softmax_sampling").get<bool>();
      }
    }
    if (j.contains("oracle") && j.at("oracle").contains("member"))
      f.oracle_member = j.at("oracle").at("member").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "scenario.json").string() + ": " + e.what());
  }
  f.cloud = read_xyz(dir / "cloud.xyz");
  f.reference = read_trajectory_csv(dir / "reference.csv");
  f.state = read_state_csv(dir / "state.csv");
  if (fs::exists(dir / "human.csv")) f.human = read_trajectory_csv(dir / "human.csv");
  f.stack = build_stack(f.cloud, f.state, f.reference, map);
  return f;
}

// Frames sorted by directory name (frame_NNN).
inline std::vector<FrameSample> read_bundle(const fs::path& dir, const MapConfig& map, BundleInfo* info = nullptr) {
  if (!fs::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("frame_", 0) == 0) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("bundle has no frame_NNN directories: " + dir.string());
  std::vector<FrameSample> frames;
  for (std::size_t i = 0; i < dirs.size(); ++i) frames.push_back(read_frame(dirs[i], map, i == 0 ? info : nullptr));
  std::sort(frames.begin(), frames.end(), [](const FrameSample& a, const FrameSample& b) { return a.index < b.index; });
  return frames;
}

// ---- results ------------------------------------------------------------

inline void write_weights(const fs::path& path, const CostWeights& w, double objective, std::size_t frames,
                          const std::vector<std::string>& diagnostics = {}) {
  Json j = weights_json(w);
  j["objective"] = objective;
  j["frames"] = frames;
  if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
  write_json(path, j);
}

inline CostWeights read_weights(const fs::path& path) {
  const Json j = read_json(path);
  try {
    CostWeights w = weights_from_json(j);
    w.validate(1e-6);
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_cost_report(const fs::path& path, const ScoredCandidates& scored, const CostWeights& w) {
  auto out = open_out(path);
  out << "member,J_h,J_r,J_T,J_s,total,probability\n";
  const auto idx = scored.feasible_indices();
  std::vector<double> f;
  for (auto k : idx) f.push_back(total_cost(scored.scaled[k], w));
  std::vector<double> p;
  if (!f.empty()) p = selection_probabilities(f);
  std::size_t j = 0;
  for (std::size_t k = 0; k < scored.size(); ++k) {
    out << k;
    for (std::size_t c = 0; c < kNumCosts; ++c) out << ',' << format_double(scored.raw[k][c]);
    if (scored.feasible[k]) {
      out << ',' << format_double(f[j]) << ',' << format_double(p[j]) << '\n';
      ++j;
    } else {
      out << ",nan,0\n";
    }
  }
}

inline Json plan_report_json(const PlannedTrajectory& plan) {
  Json segs = Json::array();
  for (const auto& s : plan.segments) {
    Json b;
    for (std::size_t c = 0; c < kNumCosts; ++c) b[kCostNames[c]] = s.breakdown[c];
    segs.push_back({{"member", s.member},
                    {"primitives", {s.source.first, s.source.second}},
                    {"window_offset", s.source.offset},
                    {"costs", b},
                    {"total", s.total}});
  }
  return Json{{"weights", weights_json(plan.weights_used)},
              {"success", plan.success},
              {"blocked", plan.blocked},
              {"states", plan.states.size()},
              {"segments", segs},
              {"diagnostics", plan.diagnostics}};
}

inline std::string opt_index(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

inline void write_metrics_csv(const fs::path& path, const std::vector<FrameMetrics>& metrics) {
  auto out = open_out(path);
  out << "frame,wall_ms,J_h,J_r,J_T,J_s,total,selected,baseline_selected,agree\n";
  for (const auto& m : metrics) {
    out << m.frame << ',' << format_double(m.wall_ms);
    for (std::size_t c = 0; c < kNumCosts; ++c) out << ',' << format_double(m.costs[c]);
    out << ',' << format_double(m.total) << ',' << opt_index(m.selected) << ',' << opt_index(m.baseline_selected)
        << ',' << (m.agree() ? 1 : 0) << '\n';
  }
}

struct EvalRow {
  std::string scenario;
  SelectionCounts counts;
};

inline void write_eval_report(const fs::path& path, const std::vector<EvalRow>& rows) {
  auto out = open_out(path);
  out << "scenario,optimal,joint_optimal,non_optimal,total,percent_optimal,baseline_percent_optimal\n";
  for (const auto& r : rows) {
    const auto& c = r.counts;
    out << r.scenario << ',' << c.optimal << ',' << c.joint_optimal << ',' << c.non_optimal << ',' << c.total()
        << ',' << format_double(100.0 * c.adaptive_rate()) << ',' << format_double(100.0 * c.baseline_rate())
        << '\n';
  }
}

}  // namespace offroad
