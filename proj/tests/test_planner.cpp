#include <gtest/gtest.h>

#include "offroad/planner.hpp"
#include "offroad/session.hpp"
#include "support.hpp"

using namespace offroad;
using testing_support::default_library;
using testing_support::flat_stack;
using testing_support::line_y;

namespace {

const GridSpec kGrid{Pose2D{-20.0, -20.0, 0.0}, 0.5, 80, 80};

ScenarioSpec quiet_spec(ScenarioKind k, std::uint64_t seed = 5) {
  ScenarioSpec s{k, seed, {}};
  s.params.point_count = 60000;
  return s;
}

std::vector<FrameSample> frames_for(ScenarioKind k, std::size_t n, std::uint64_t seed = 5) {
  return gen_frames(quiet_spec(k, seed), n, OracleSpec{human_weights(k), 0.0, false}, default_library(),
                    FrameGenConfig{});
}

}  // namespace

TEST(SelectBest, SingleCandidate) {
  const auto s = flat_stack(kGrid);
  const std::vector<Trajectory> c{line_y(10, 1.0)};
  EXPECT_EQ(select_best(c, s, line_y(30, 1.0), CostWeights::uniform(), EvalConfig{}), 0u);
}

TEST(SelectBest, FlatCandidateBeatsRidgeUnderHeightWeight) {
  auto s = flat_stack(kGrid);
  for (int ix = 0; ix < kGrid.width; ++ix) s.elevation.at(ix, 60) = 0.8;  // ridge across y = 10
  // Candidate 0 crosses the ridge; candidate 1 stops short of it.
  const std::vector<Trajectory> c{line_y(15, 1.0, 1.0), line_y(9, 1.0, -1.0)};
  EXPECT_EQ(select_best(c, s, line_y(30, 1.0), CostWeights::vertex(kHeight), EvalConfig{}), 1u);
}

TEST(SelectBest, IdenticalCandidatesLowerIndex) {
  const auto s = flat_stack(kGrid);
  const std::vector<Trajectory> c{line_y(10, 1.0, 2.0), line_y(10, 1.0, 1.0), line_y(10, 1.0, 1.0)};
  EXPECT_EQ(select_best(c, s, line_y(30, 1.0, 1.0), CostWeights::vertex(kDeviation), EvalConfig{}), 1u);
}

TEST(SelectBest, InvariantToCommonCostScale) {
  auto s = flat_stack(kGrid);
  for (int iy = 0; iy < kGrid.height; ++iy)
    for (int ix = 0; ix < kGrid.width; ++ix) s.elevation.at(ix, iy) = 0.03 * ix * ix * 0.01 + 0.02 * iy;
  std::vector<Trajectory> c;
  for (int i = 0; i < 6; ++i) c.push_back(line_y(12, 1.0, -6.0 + 2.5 * i));
  EvalConfig eval;
  eval.normalization = CostNormalization::none;
  auto scaled = s;
  for (double& v : scaled.elevation.values) v *= 4.0;
  const CostWeights w = CostWeights::vertex(kHeight);
  EXPECT_EQ(select_best(c, s, line_y(30, 1.0), w, eval), select_best(c, scaled, line_y(30, 1.0), w, eval));
  EXPECT_EQ(select_best(c, s, line_y(30, 1.0), w, EvalConfig{}), select_best(c, scaled, line_y(30, 1.0), w, EvalConfig{}));
}

TEST(SelectBest, AllInfeasibleIsBlocked) {
  auto s = flat_stack(kGrid);
  std::fill(s.obstacle.values.begin(), s.obstacle.values.end(), 1);
  const std::vector<Trajectory> c{line_y(10, 1.0)};
  EXPECT_THROW(select_best(c, s, line_y(30, 1.0), CostWeights::uniform(), EvalConfig{}), BlockedError);
}

TEST(Plan, GoalAlreadyWithinRadius) {
  auto s = flat_stack(kGrid);
  s.guide_point = Pose2D{0.5, 1.0, kForwardHeading};
  const VehicleState st{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, 5.0, 0.0};
  const auto p = plan(s, st, line_y(30, 1.0), CostWeights::uniform(), default_library(), PlanConfig{});
  EXPECT_TRUE(p.success);
  EXPECT_TRUE(p.states.empty());
  EXPECT_TRUE(p.segments.empty());
}

TEST(Plan, StraightScenarioTracksReference) {
  auto spec = quiet_spec(ScenarioKind::straight);
  spec.params.lateral_jitter = spec.params.heading_jitter = 0.0;
  const auto frames = gen_frames(spec, 3, OracleSpec{}, default_library(), FrameGenConfig{});
  for (const auto& f : frames) {
    const auto p = plan(f.stack, f.state, f.reference, human_weights(ScenarioKind::straight), default_library(),
                        PlanConfig{});
    ASSERT_TRUE(p.success) << (p.diagnostics.empty() ? "" : p.diagnostics.back());
    ASSERT_FALSE(p.states.empty());
    for (const auto& s : p.states.states) EXPECT_LT(project_onto(f.reference, s.position()).distance, 0.5);
  }
}

TEST(Plan, TimestampsIncreaseAndBoundsHold) {
  const auto& lib = default_library();
  for (auto k : {ScenarioKind::cross, ScenarioKind::rough}) {
    const auto f = frames_for(k, 2);
    for (const auto& fr : f) {
      const auto p = plan(fr.stack, fr.state, fr.reference, human_weights(k), lib, PlanConfig{});
      for (std::size_t i = 1; i < p.states.size(); ++i) EXPECT_GT(p.states[i].t, p.states[i - 1].t);
      for (const auto& s : p.states.states) {
        EXPECT_LE(std::abs(s.curvature), lib.spec.max_curvature + 1e-9);
        EXPECT_LE(s.speed, lib.spec.max_speed + 1e-9);
        EXPECT_GE(s.speed, -1e-9);
      }
      EXPECT_TRUE(is_feasible(p.states, fr.stack, EvalConfig{}.obstacle_margin));
    }
  }
}

TEST(Plan, BlockedAfterFirstSegmentKeepsPartialPlan) {
  auto s = flat_stack(centered_grid(100.0, 0.25));
  const VehicleState st{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, 5.0, 0.0};
  PlanConfig one;
  one.max_primitives = 1;
  const auto first = plan(s, st, line_y(200, 0.5), CostWeights::uniform(), default_library(), one);
  ASSERT_EQ(first.segments.size(), 1u);
  // Free space is only the first segment's footprint; every continuation leaves it.
  const auto& g = s.spec;
  for (int iy = 0; iy < g.height; ++iy)
    for (int ix = 0; ix < g.width; ++ix) {
      const Vec2 c = g.cell_center(ix, iy);
      double d = 1e9;
      for (const auto& p : first.states.states) d = std::min(d, distance(c, p.position()));
      s.obstacle.at(ix, iy) = d > 1.5 ? 1 : 0;
    }
  PlanConfig cfg;
  cfg.max_primitives = 4;
  const auto p = plan(s, st, line_y(200, 0.5), CostWeights::uniform(), default_library(), cfg);
  EXPECT_TRUE(p.blocked);
  EXPECT_FALSE(p.success);
  EXPECT_EQ(p.segments.size(), 1u);
  EXPECT_TRUE(p.states == first.states);
  EXPECT_NE(p.diagnostics.back().find("blocked"), std::string::npos);
}

TEST(Plan, InvalidInputsRejected) {
  const auto s = flat_stack(kGrid);
  const VehicleState st{Pose2D{0.0, 0.0, kForwardHeading}, 0.0, 5.0, 0.0};
  EXPECT_THROW(plan(s, st, Trajectory{}, CostWeights::uniform(), default_library(), PlanConfig{}), DataError);
  EXPECT_THROW(plan(s, st, line_y(5, 1.0), CostWeights{{1, 1, 0, 0}}, default_library(), PlanConfig{}), ConfigError);
  PlanConfig bad;
  bad.goal_radius = 0.0;
  EXPECT_THROW(plan(s, st, line_y(5, 1.0), CostWeights::uniform(), default_library(), bad), ConfigError);
}

TEST(Session, DisabledWorkerUsesUniformWeights) {
  const auto frames = frames_for(ScenarioKind::straight, 3);
  SessionConfig cfg;
  cfg.adaptive = false;
  const auto r = replan_session(frames, default_library(), cfg);
  ASSERT_EQ(r.metrics.size(), 3u);
  for (const auto& m : r.metrics) EXPECT_EQ(m.weights, CostWeights::uniform());
  for (const auto& p : r.plans) EXPECT_EQ(p.weights_used, CostWeights::uniform());
}

TEST(Session, DeterministicSessionsIdentical) {
  const auto frames = frames_for(ScenarioKind::undulate, 5);
  const auto a = replan_session(frames, default_library(), SessionConfig{});
  const auto b = replan_session(frames, default_library(), SessionConfig{});
  ASSERT_EQ(a.plans.size(), b.plans.size());
  for (std::size_t i = 0; i < a.plans.size(); ++i) {
    EXPECT_TRUE(a.plans[i].states == b.plans[i].states);
    EXPECT_EQ(a.metrics[i].weights, b.metrics[i].weights);
    EXPECT_EQ(a.metrics[i].wall_ms, 0.0);
  }
  // Lag-1 schedule: the first frame always plans with the initial weights.
  EXPECT_EQ(a.metrics[0].weights, CostWeights::uniform());
  EXPECT_NE(a.metrics[2].weights, CostWeights::uniform());
}

TEST(Session, CountsPartitionFrames) {
  const auto frames = frames_for(ScenarioKind::long_curve, 6);
  const auto r = replan_session(frames, default_library(), SessionConfig{});
  const auto& c = r.counts;
  EXPECT_EQ(c.total(), frames.size());
  std::size_t agree = 0, base = 0;
  for (const auto& m : r.metrics) {
    agree += m.agree();
    base += m.baseline_agree();
  }
  EXPECT_EQ(c.optimal + c.joint_optimal, agree);
  EXPECT_EQ(c.baseline_hits, base);
  EXPECT_LE(c.joint_optimal, base);
}

TEST(Session, FramesOutOfOrderRejected) {
  auto frames = frames_for(ScenarioKind::straight, 2);
  std::swap(frames[0], frames[1]);
  EXPECT_THROW(replan_session(frames, default_library(), SessionConfig{}), DataError);
}

TEST(Session, RampAdaptivePlansFlatterThanBaseline) {
  const auto frames = frames_for(ScenarioKind::ramp, 14, 11);
  const auto r = replan_session(frames, default_library(), SessionConfig{});
  int ok = 0, n = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto& a = r.plans[i];
    const auto& b = r.baseline_plans[i];
    if (a.states.size() < 2 || b.states.size() < 2) continue;
    ++n;
    ok += height_cost(a.states, frames[i].stack.elevation) <= height_cost(b.states, frames[i].stack.elevation) + 1e-12;
  }
  ASSERT_GT(n, 10);
  EXPECT_GE(ok, static_cast<int>(std::ceil(0.9 * n)));
}
