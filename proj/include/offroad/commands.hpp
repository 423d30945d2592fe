#pragma once

// End-to-end commands behind the `offroad` executable. Each writes its
// outputs below `out` and returns a short human-readable summary.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "offroad/config.hpp"
#include "offroad/io.hpp"

namespace offroad {

inline PrimitiveLibrary library_for(const RunConfig& cfg, const std::optional<fs::path>& dir) {
  if (dir) return read_library(*dir);
  return generate_primitives(cfg.primitives);
}

inline std::string cmd_gen(const RunConfig& cfg, const fs::path& out, const std::optional<fs::path>& library_dir = {}) {
  cfg.validate();
  const PrimitiveLibrary lib = library_for(cfg, library_dir);
  Diagnostics diag;
  const auto frames = gen_frames(cfg.scenario_spec(), cfg.frames, cfg.oracle_spec(), lib, cfg.frame_gen(), &diag);
  write_bundle(out, frames, BundleInfo{cfg.scenario_spec(), cfg.oracle_spec(), true});
  return "wrote " + std::to_string(frames.size()) + " " + scenario_name(cfg.kind) + " frames to " + out.string();
}

// Builds the layer stack for a cloud given in the vehicle frame. Without a
// reference file the route runs straight ahead along +y.
inline std::string cmd_maps(const RunConfig& cfg, const fs::path& cloud_file, const fs::path& out,
                            const std::optional<fs::path>& reference_file = {}) {
  cfg.validate();
  const PointCloud cloud = read_xyz(cloud_file);
  Trajectory ref;
  if (reference_file) {
    ref = read_trajectory_csv(*reference_file);
  } else {
    const double v = cfg.scenario.nominal_speed;
    for (int i = 0; i <= 100; ++i)
      ref.states.push_back({i * 2.0 / v, Pose2D{0.0, 2.0 * i, kForwardHeading}, v, 0.0});
  }
  const VehicleState state{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, cfg.scenario.nominal_speed, 0.0};
  const FeatureMapStack stack = build_stack(cloud, state, ref, cfg.map_config());
  fs::create_directories(out);
  export_stack(out, stack);
  return "exported 5 layers (" + std::to_string(stack.spec.width) + "x" + std::to_string(stack.spec.height) +
         ") to " + out.string();
}

inline std::string cmd_primitives(const RunConfig& cfg, const fs::path& out) {
  cfg.primitives.validate();
  const PrimitiveLibrary lib = generate_primitives(cfg.primitives);
  write_library(out, lib);
  return "wrote " + std::to_string(lib.primitives.size()) + " primitives to " + out.string();
}

inline AdaptResult adapt_bundle(const std::vector<FrameSample>& frames, const PrimitiveLibrary& lib,
                                const RunConfig& cfg) {
  std::vector<AdaptFrame> batch;
  Diagnostics diag;
  for (const auto& f : frames) batch.push_back(make_adapt_frame(f, lib, cfg.cluster, cfg.eval, &diag));
  AdaptResult res = optimize_weights(batch, cfg.adapt);
  for (auto& m : diag.messages) res.diagnostics.push_back(std::move(m));
  return res;
}

inline std::string cmd_adapt(const RunConfig& cfg, const fs::path& bundle, const fs::path& out,
                             const std::optional<fs::path>& library_dir = {}) {
  cfg.validate();
  const PrimitiveLibrary lib = library_for(cfg, library_dir);
  const auto frames = read_bundle(bundle, cfg.map_config());
  const AdaptResult res = adapt_bundle(frames, lib, cfg);
  write_weights(out / "weights.json", res.weights, res.objective, frames.size(), res.diagnostics);
  return "weights " + detail::weights_text(res.weights) + " over " + std::to_string(frames.size()) + " frames";
}

struct PlanOutcome {
  std::string summary;
  bool blocked = false;
};

// Plans one bundle frame; the first step's candidate costs go to cost_report.csv.
inline PlanOutcome cmd_plan(const RunConfig& cfg, const fs::path& bundle, int frame_index, const fs::path& out,
                            const std::optional<fs::path>& weights_file = {},
                            const std::optional<fs::path>& library_dir = {}) {
  cfg.validate();
  const PrimitiveLibrary lib = library_for(cfg, library_dir);
  const fs::path dir = bundle / frame_dir_name(frame_index);
  if (!fs::is_directory(dir)) throw DataError("frame not found: " + dir.string());
  const FrameSample f = read_frame(dir, cfg.map_config());
  const CostWeights w = weights_file ? read_weights(*weights_file) : CostWeights::uniform();
  const PlanConfig pc = cfg.plan_config();
  const PlannedTrajectory planned = plan(f.stack, f.state, f.reference, w, lib, pc);
  write_trajectory_csv(out / "plan.csv", planned.states);
  write_json(out / "cost_report.json", plan_report_json(planned));
  Diagnostics diag;
  const TrajectoryCluster cluster = extract_clusters(lib, f.state, pc.cluster, &diag);
  if (!cluster.empty())
    write_cost_report(out / "cost_report.csv", score_candidates(cluster.members, f.stack, f.reference, pc.eval), w);
  PlanOutcome o;
  o.blocked = planned.blocked;
  o.summary = std::string(planned.blocked ? "blocked" : planned.success ? "planned" : "incomplete") + ": " +
              std::to_string(planned.segments.size()) + " segments, " + std::to_string(planned.states.size()) +
              " states";
  return o;
}

inline Json session_json(const SessionResult& res, const std::string& scenario) {
  const auto& c = res.counts;
  Json j{{"scenario", scenario},
         {"optimal", c.optimal},
         {"joint_optimal", c.joint_optimal},
         {"non_optimal", c.non_optimal},
         {"total", c.total()},
         {"adaptive_rate", c.adaptive_rate()},
         {"baseline_rate", c.baseline_rate()}};
  if (!res.metrics.empty()) j["final_weights"] = weights_json(res.metrics.back().weights);
  j["diagnostics"] = res.diagnostics;
  return j;
}

inline SessionResult run_bundle(const RunConfig& cfg, const fs::path& bundle, const PrimitiveLibrary& lib,
                                BundleInfo* info = nullptr) {
  const auto frames = read_bundle(bundle, cfg.map_config(), info);
  return replan_session(frames, lib, cfg.session_config());
}

inline std::string cmd_run(const RunConfig& cfg, const fs::path& bundle, const fs::path& out,
                           const std::optional<fs::path>& library_dir = {}) {
  cfg.validate();
  const PrimitiveLibrary lib = library_for(cfg, library_dir);
  BundleInfo info;
  const SessionResult res = run_bundle(cfg, bundle, lib, &info);
  write_metrics_csv(out / "metrics.csv", res.metrics);
  for (std::size_t i = 0; i < res.plans.size(); ++i)
    write_trajectory_csv(out / "plans" / (frame_dir_name(res.metrics[i].frame) + ".csv"), res.plans[i].states);
  write_json(out / "session.json", session_json(res, scenario_name(info.spec.kind)));
  return "ran " + std::to_string(res.metrics.size()) + " frames, adaptive agreement " +
         format_double(100.0 * res.counts.adaptive_rate()) + "%";
}

inline std::string cmd_eval(const RunConfig& cfg, const std::vector<fs::path>& bundles, const fs::path& out,
                            const std::optional<fs::path>& library_dir = {}) {
  cfg.validate();
  if (bundles.empty()) throw ConfigError("eval: at least one bundle is required");
  const PrimitiveLibrary lib = library_for(cfg, library_dir);
  std::vector<EvalRow> rows;
  auto table = open_out(out / "weights_table.csv");
  table << "scenario,w_h,w_r,w_T,w_s\n";
  Json sessions = Json::array();
  for (const auto& b : bundles) {
    BundleInfo info;
    const SessionResult res = run_bundle(cfg, b, lib, &info);
    const std::string name = scenario_name(info.spec.kind);
    rows.push_back({name, res.counts});
    write_metrics_csv(out / ("metrics_" + b.filename().string() + ".csv"), res.metrics);
    const CostWeights w = res.metrics.empty() ? CostWeights::uniform() : res.metrics.back().weights;
    table << name;
    for (std::size_t c = 0; c < kNumCosts; ++c) table << ',' << format_double(w[c]);
    table << '\n';
    sessions.push_back(session_json(res, name));
  }
  write_eval_report(out / "eval_report.csv", rows);
  write_json(out / "eval_sessions.json", sessions);
  std::string summary;
  for (const auto& r : rows)
    summary += r.scenario + ": " + std::to_string(r.counts.optimal + r.counts.joint_optimal) + "/" +
               std::to_string(r.counts.total()) + "\n";
  return summary;
}

}  // namespace offroad
