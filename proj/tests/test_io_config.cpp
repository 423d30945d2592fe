#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "offroad/config.hpp"
#include "offroad/io.hpp"
#include "support.hpp"

using namespace offroad;
using testing_support::default_library;
using testing_support::line_y;
using testing_support::scratch_dir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 13 - 6);
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_TRUE(std::isnan(*parse_double("nan")));
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
}

TEST(TrajectoryCsv, RoundTripExact) {
  const auto dir = scratch_dir("traj");
  Trajectory t = line_y(7, 0.37, 1.0 / 3.0);
  t.states[2].curvature = 0.123456789;
  write_trajectory_csv(dir / "t.csv", t);
  EXPECT_TRUE(read_trajectory_csv(dir / "t.csv") == t);
}

TEST(TrajectoryCsv, MalformedInputs) {
  const auto dir = scratch_dir("traj_bad");
  spit(dir / "a.csv", "t,x,y\n0,1,2\n");
  EXPECT_THROW(read_trajectory_csv(dir / "a.csv"), DataError);
  spit(dir / "b.csv", "t,x,y,heading,speed,curvature\n0,0,0,0,1,0\n0,1,0,0,1,0\n");
  EXPECT_THROW(read_trajectory_csv(dir / "b.csv"), DataError);
  spit(dir / "c.csv", "t,x,y,heading,speed,curvature\n0,0,zero,0,1,0\n");
  try {
    read_trajectory_csv(dir / "c.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
  EXPECT_THROW(read_trajectory_csv(dir / "missing.csv"), DataError);
}

TEST(Xyz, RoundTripAndComments) {
  const auto dir = scratch_dir("xyz");
  PointCloud c;
  for (int i = 0; i < 50; ++i) c.points.push_back({0.1 * i, -0.2 * i, 1.0 / (i + 1)});
  write_xyz(dir / "c.xyz", c);
  EXPECT_TRUE(read_xyz(dir / "c.xyz") == c);
  spit(dir / "d.xyz", "# header\n1 2 3\n\n  4\t5 6  # trailing\n");
  const PointCloud d = read_xyz(dir / "d.xyz");
  ASSERT_EQ(d.points.size(), 2u);
  EXPECT_EQ(d.points[1].y, 5.0);
}

TEST(Xyz, MalformedLineReportsLineNumber) {
  const auto dir = scratch_dir("xyz_bad");
  spit(dir / "e.xyz", "1 2 3\n4 5\n");
  try {
    read_xyz(dir / "e.xyz");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("e.xyz:2"), std::string::npos) << e.what();
  }
}

TEST(Layers, CsvRoundTripAndPgmShape) {
  const auto dir = scratch_dir("layers");
  const GridSpec g{Pose2D{-5.0, -5.0, 0.0}, 0.5, 20, 12};
  Layer l(g);
  for (int iy = 0; iy < g.height; ++iy)
    for (int ix = 0; ix < g.width; ++ix) l.at(ix, iy) = std::sin(0.3 * ix) + 0.1 * iy;
  export_layer(dir, "h", l);
  const Layer back = read_layer_csv(dir / "h.csv", grid_spec_from_json(read_json(dir / "h.json")));
  EXPECT_TRUE(back == l);
  const PgmImage img = read_pgm(dir / "h.pgm");
  EXPECT_EQ(img.width, g.width);
  EXPECT_EQ(img.height, g.height);
  EXPECT_EQ(img.maxval, 65535);
  // Top image row is the highest iy; the max value sits there.
  const int top_right = img.pixels[static_cast<std::size_t>(img.width - 1)];
  const int bottom_right = img.pixels.back();
  EXPECT_GT(top_right, bottom_right);
}

TEST(Layers, FlatCloudExportsConstantElevation) {
  const auto dir = scratch_dir("flat_maps");
  PointCloud c;
  for (double x = -49.9; x < 50.0; x += 0.5)
    for (double y = -49.9; y < 50.0; y += 0.5) c.points.push_back({x, y, 0.25});
  const VehicleState st{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, 5.0, 0.0};
  export_stack(dir, build_stack(c, st, line_y(150, 1.0), MapConfig{}));
  const auto spec = grid_spec_from_json(read_json(dir / "elevation.json"));
  const Layer h = read_layer_csv(dir / "elevation.csv", spec);
  for (double v : h.values) EXPECT_EQ(v, 0.25);
  for (const char* name : {"elevation", "roughness", "obstacle", "potential", "momentum"}) {
    EXPECT_TRUE(fs::exists(dir / (std::string(name) + ".pgm")));
    EXPECT_TRUE(fs::exists(dir / (std::string(name) + ".json")));
  }
}

TEST(Library, RoundTripVerifiesControls) {
  const auto dir = scratch_dir("lib");
  PrimitiveGenSpec spec;
  const auto lib = generate_primitives(spec, {EntryBin{5, 4}, EntryBin{3, 2}});
  write_library(dir, lib);
  const auto back = read_library(dir);
  ASSERT_EQ(back.size(), lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) {
    EXPECT_EQ(back.primitives[i].controls, lib.primitives[i].controls);
    EXPECT_TRUE(back.primitives[i].states == lib.primitives[i].states);
  }
  // Tamper with a stored state file: the control check must catch it.
  const fs::path f = dir / primitive_file(0);
  std::string text = slurp(f);
  const auto pos = text.rfind('\n', text.size() - 2);
  text = text.substr(0, pos + 1) + "4,0.5,20,1.5707963267948966,5,0\n";
  spit(f, text);
  EXPECT_THROW(read_library(dir), DataError);
}

TEST(Bundle, RoundTripRebuildsStack) {
  const auto dir = scratch_dir("bundle");
  ScenarioSpec spec{ScenarioKind::rough, 4, {}};
  spec.params.point_count = 20000;
  const OracleSpec oracle{human_weights(ScenarioKind::rough), 0.1, false};
  const auto frames = gen_frames(spec, 2, oracle, default_library(), FrameGenConfig{});
  write_bundle(dir, frames, BundleInfo{spec, oracle, true});
  BundleInfo info;
  const auto back = read_bundle(dir, MapConfig{}, &info);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(info.spec.kind, ScenarioKind::rough);
  EXPECT_EQ(info.oracle.noise_sigma, 0.1);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(back[i].cloud == frames[i].cloud);
    EXPECT_TRUE(testing_support::same_states(back[i].human, frames[i].human));
    EXPECT_EQ(back[i].oracle_member, frames[i].oracle_member);
    EXPECT_TRUE(back[i].stack.elevation == frames[i].stack.elevation);
    EXPECT_EQ(back[i].state.vy, frames[i].state.vy);
  }
  // Writing again produces identical bytes.
  const auto dir2 = scratch_dir("bundle2");
  write_bundle(dir2, back, info);
  EXPECT_EQ(slurp(dir / "frame_000" / "cloud.xyz"), slurp(dir2 / "frame_000" / "cloud.xyz"));
  EXPECT_EQ(slurp(dir / "bundle.json"), slurp(dir2 / "bundle.json"));
}

TEST(Bundle, MissingDirectoryIsDataError) {
  EXPECT_THROW(read_bundle("/nonexistent/bundle", MapConfig{}), DataError);
}

TEST(Weights, RoundTripAndValidation) {
  const auto dir = scratch_dir("weights");
  const CostWeights w{{0.1, 0.2, 0.3, 0.4}};
  write_weights(dir / "w.json", w, 1.5, 10);
  EXPECT_EQ(read_weights(dir / "w.json"), w);
  const Json j = read_json(dir / "w.json");
  EXPECT_EQ(j.at("frames").get<int>(), 10);
  spit(dir / "bad.json", R"({"w_h":0.9,"w_r":0.9,"w_T":0,"w_s":0})");
  EXPECT_THROW(read_weights(dir / "bad.json"), ConfigError);
  spit(dir / "broken.json", "{");
  EXPECT_THROW(read_weights(dir / "broken.json"), DataError);
}

TEST(Reports, MetricsAndEvalHeaders) {
  const auto dir = scratch_dir("reports");
  FrameMetrics m;
  m.frame = 3;
  m.selected = 2;
  m.optimal = 2;
  write_metrics_csv(dir / "m.csv", {m});
  EXPECT_EQ(slurp(dir / "m.csv"),
            "frame,wall_ms,J_h,J_r,J_T,J_s,total,selected,baseline_selected,agree\n3,0,0,0,0,0,0,2,,1\n");
  SelectionCounts c{5, 40, 3, 42};
  write_eval_report(dir / "e.csv", {EvalRow{"ramp", c}});
  const std::string e = slurp(dir / "e.csv");
  EXPECT_NE(e.find("ramp,5,40,3,48,"), std::string::npos);
}

TEST(Config, DefaultsValidateAndDumpRoundTrips) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  const std::string text = dump_config(cfg);
  EXPECT_EQ(dump_config(parse_config(text)), text);
  EXPECT_NE(text.find("map.theta = 0.2"), std::string::npos);
  EXPECT_NE(text.find("map.eta = 50"), std::string::npos);
  EXPECT_NE(text.find("map.zeta = 42"), std::string::npos);
  EXPECT_NE(text.find("cost.n_p = 20"), std::string::npos);
  EXPECT_NE(text.find("cluster.horizon = 60"), std::string::npos);
}

TEST(Config, OverridesApply) {
  const RunConfig cfg = parse_config("# comment\nscenario.kind = ramp\nseed=9\nmap.D_star = 4  # inline\n"
                                     "oracle.weights = 0.7,0.1,0.1,0.1\nsession.deterministic = false\n");
  EXPECT_EQ(cfg.kind, ScenarioKind::ramp);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.map.potential.repulsion_radius, 4.0);
  EXPECT_EQ(cfg.oracle_spec().hidden_weights[0], 0.7);
  EXPECT_FALSE(cfg.deterministic);
  RunConfig ramp_default;
  ramp_default.kind = ScenarioKind::ramp;
  EXPECT_EQ(ramp_default.oracle_spec().hidden_weights, human_weights(ScenarioKind::ramp));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("map.thetaa = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("map.theta = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario.kind = swamp\n"), ConfigError);
  EXPECT_THROW(parse_config("session.adaptive = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("adapt.init = 1,2\n"), ConfigError);
  try {
    parse_config("seed = 1\nbogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(Config, ValidationCatchesModuleInvariants) {
  auto bad = [](const std::string& text) { return parse_config(text); };
  EXPECT_THROW(bad("map.theta = -1\n").validate(), ConfigError);
  EXPECT_THROW(bad("map.mid_resolution = 1.5\n").validate(), ConfigError);
  EXPECT_THROW(bad("primitives.search_levels = 4\n").validate(), ConfigError);
  EXPECT_THROW(bad("cluster.horizon = 2\n").validate(), ConfigError);
  EXPECT_THROW(bad("oracle.weights = 0.5,0.5,0.5,0\n").validate(), ConfigError);
  EXPECT_THROW(bad("adapt.window = 0\n").validate(), ConfigError);
  EXPECT_THROW(bad("cost.normalization_scale = 0\n").validate(), ConfigError);
  EXPECT_THROW(bad("scenario.frames = 0\n").validate(), ConfigError);
  EXPECT_THROW(bad("oracle.noise_sigma = -0.1\n").validate(), ConfigError);
}
