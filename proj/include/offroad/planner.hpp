#pragma once

// Greedy primitive expansion: at each step the cluster for the current state
// is scored, the cheapest feasible member is appended, and the state advances
// to its end.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offroad/core.hpp"
#include "offroad/cost_eval.hpp"
#include "offroad/errors.hpp"
#include "offroad/map_builder.hpp"
#include "offroad/primitive_lib.hpp"

namespace offroad {

struct PlanConfig {
  double goal_radius = 3.0;  // meters around the guide point
  std::size_t max_primitives = 2;
  double rate_hz = 10.0;
  EvalConfig eval;
  ClusterConfig cluster;

  void validate() const {
    if (!(goal_radius > 0) || max_primitives < 1 || !(rate_hz > 0))
      throw ConfigError("plan config: goal_radius, max_primitives and rate must be positive");
    eval.validate();
    cluster.validate();
  }
};

struct PlanSegment {
  std::size_t member = 0;  // index into the cluster extracted for this step
  ClusterSource source;
  CostBreakdown breakdown;  // raw costs
  double total = 0.0;       // weighted, after the configured normalization
};

struct PlannedTrajectory {
  Trajectory states;
  std::vector<PlanSegment> segments;
  CostWeights weights_used;
  bool success = false;
  bool blocked = false;
  std::vector<std::string> diagnostics;

  std::vector<int> primitive_ids() const {
    std::vector<int> ids;
    for (const auto& s : segments) {
      ids.push_back(s.source.first);
      ids.push_back(s.source.second);
    }
    return ids;
  }
};

struct Selection {
  std::size_t index = 0;
  ScoredCandidates scored;
};

inline Selection select_best_scored(std::span<const Trajectory> candidates, const FeatureMapStack& stack,
                                    const Trajectory& reference, const CostWeights& w, const EvalConfig& eval,
                                    Diagnostics* diag = nullptr) {
  if (candidates.empty()) throw DataError("select_best: no candidates");
  Selection sel;
  sel.scored = score_candidates(candidates, stack, reference, eval, diag);
  const auto best = best_feasible(sel.scored, w);
  if (!best) throw BlockedError("select_best: every candidate is infeasible");
  sel.index = *best;
  return sel;
}

inline std::size_t select_best(std::span<const Trajectory> candidates, const FeatureMapStack& stack,
                               const Trajectory& reference, const CostWeights& w, const EvalConfig& eval,
                               Diagnostics* diag = nullptr) {
  return select_best_scored(candidates, stack, reference, w, eval, diag).index;
}

inline bool on_map(const Trajectory& traj, const GridSpec& spec) {
  return std::all_of(traj.states.begin(), traj.states.end(),
                     [&](const TimedState& s) { return spec.cell_of(s.position()).has_value(); });
}

inline PlannedTrajectory plan(const FeatureMapStack& stack, const VehicleState& state, const Trajectory& reference,
                              const CostWeights& w, const PrimitiveLibrary& library, const PlanConfig& config) {
  config.validate();
  w.validate(1e-6);
  if (reference.empty()) throw DataError("plan: empty reference");

  PlannedTrajectory out;
  out.weights_used = w;
  out.states.frame_id = "vehicle";
  const Vec2 goal = stack.guide_point.position();
  VehicleState cur = state;
  double t0 = 0.0;
  Diagnostics diag;

  for (std::size_t step = 0; step < config.max_primitives; ++step) {
    if (distance(cur.pose.position(), goal) <= config.goal_radius) {
      out.success = true;
      break;
    }
    const TrajectoryCluster cluster = extract_clusters(library, cur, config.cluster, &diag);
    if (cluster.empty()) {
      out.blocked = true;
      diag.add("plan: empty cluster at step " + std::to_string(step));
      break;
    }
    if (step > 0 && !std::any_of(cluster.members.begin(), cluster.members.end(), [&](const Trajectory& m) {
          return on_map(m, stack.obstacle.spec);
        })) {
      diag.add("plan: map boundary reached after " + std::to_string(step) + " segments");
      out.success = true;
      break;
    }
    Selection sel;
    try {
      sel = select_best_scored(cluster.members, stack, reference, w, config.eval, &diag);
    } catch (const BlockedError& e) {
      out.blocked = true;
      diag.add(std::string("plan: blocked at step ") + std::to_string(step) + ": " + e.what());
      break;
    }
    const Trajectory& seg = cluster.members[sel.index];
    for (std::size_t h = out.states.empty() ? 0 : 1; h < seg.size(); ++h) {
      TimedState s = seg[h];
      s.t += t0;
      out.states.states.push_back(s);
    }
    out.segments.push_back({sel.index, cluster.sources[sel.index], sel.scored.raw[sel.index],
                            total_cost(sel.scored.scaled[sel.index], w)});
    const TimedState& end = seg.back();
    t0 += end.t;
    cur.pose = end.pose;
    cur.vx = end.speed * std::cos(end.pose.heading);
    cur.vy = end.speed * std::sin(end.pose.heading);
    cur.curvature = end.curvature;
  }
  if (!out.blocked && distance(cur.pose.position(), goal) <= config.goal_radius) out.success = true;
  if (!out.blocked && out.segments.size() == config.max_primitives) out.success = true;
  out.diagnostics = std::move(diag.messages);
  return out;
}

}  // namespace offroad
