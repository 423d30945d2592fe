#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "offroad/session.hpp"
#include "offroad/weight_adapt.hpp"
#include "support.hpp"

using namespace offroad;
using testing_support::default_library;
using testing_support::line_y;

namespace {

AdaptFrame random_frame(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  AdaptFrame f;
  for (std::size_t k = 0; k < m; ++k) {
    f.breakdowns.push_back(CostBreakdown{{u(rng), u(rng), u(rng), u(rng)}});
    f.distances.push_back(u(rng));
  }
  return f;
}

CostWeights random_weights(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  return simplex_projected(CostWeights{{u(rng), u(rng), u(rng), u(rng)}});
}

// Central differences of the batch objective along each raw weight coordinate.
std::array<double, kNumCosts> fd_gradient(std::span<const AdaptFrame> frames, const CostWeights& w, double h) {
  std::array<double, kNumCosts> g{};
  for (std::size_t c = 0; c < kNumCosts; ++c) {
    CostWeights a = w, b = w;
    a[c] += h;
    b[c] -= h;
    g[c] = (batch_objective(frames, a) - batch_objective(frames, b)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(TrajDistance, ZeroShiftAndSymmetry) {
  const Trajectory a = line_y(20, 0.5);
  EXPECT_EQ(traj_distance(a, a), 0.0);
  const Trajectory b = line_y(20, 0.5, 0.0, 0.3);
  EXPECT_NEAR(traj_distance(a, b), 0.3, 1e-12);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  Trajectory c = a, d = a;
  for (auto& s : c.states) s.pose = Pose2D{u(rng), u(rng), 0.0};
  for (auto& s : d.states) s.pose = Pose2D{u(rng), u(rng), 0.0};
  EXPECT_EQ(traj_distance(c, d), traj_distance(d, c));
  EXPECT_THROW(traj_distance(a, line_y(3, 1.0)), DataError);
}

TEST(MeLoss, SingleMemberIsItsDistance) {
  AdaptFrame f{{CostBreakdown{{3, 1, 4, 1}}}, {0.42}};
  EXPECT_EQ(me_loss(f, CostWeights::uniform()), 0.42);
  EXPECT_EQ(me_loss(f, CostWeights::vertex(2)), 0.42);
}

TEST(MeLoss, EqualTotalsGiveMeanDistance) {
  AdaptFrame f{{CostBreakdown{{1, 1, 1, 1}}, CostBreakdown{{1, 1, 1, 1}}, CostBreakdown{{1, 1, 1, 1}}},
               {0.3, 0.6, 1.2}};
  EXPECT_NEAR(me_loss(f, CostWeights::uniform()), 0.7, 1e-15);
}

TEST(MeLoss, TwoMemberHandValue) {
  AdaptFrame f{{CostBreakdown{{1, 0, 0, 0}}, CostBreakdown{{0, 1, 0, 0}}}, {0.0, 1.0}};
  const double e = std::exp(-1.0);
  EXPECT_NEAR(me_loss(f, CostWeights::vertex(kHeight)), 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(me_loss(f, CostWeights::vertex(kHeight)), 0.7311, 1e-4);
}

TEST(BatchObjective, AdditiveAndPermutationInvariant) {
  std::mt19937_64 rng(2);
  std::vector<AdaptFrame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(random_frame(rng, 4));
  const CostWeights w = random_weights(rng);
  EXPECT_EQ(batch_objective(std::span(frames.data(), 1), w), me_loss(frames[0], w));
  std::vector<AdaptFrame> twice{frames[1], frames[1]};
  EXPECT_EQ(batch_objective(twice, w), 2.0 * me_loss(frames[1], w));
  std::vector<AdaptFrame> perm = frames;
  std::reverse(perm.begin(), perm.end());
  EXPECT_NEAR(batch_objective(perm, w), batch_objective(frames, w), 1e-12);
  EXPECT_THROW(batch_objective(std::vector<AdaptFrame>{}, w), DataError);
}

TEST(Gradient, ZeroWhenObjectiveConstant) {
  std::mt19937_64 rng(3);
  AdaptFrame eq = random_frame(rng, 5);
  std::fill(eq.distances.begin(), eq.distances.end(), 0.8);
  AdaptFrame one = random_frame(rng, 1);
  for (const auto& f : {eq, one}) {
    const auto g = objective_gradient(std::vector<AdaptFrame>{f}, random_weights(rng));
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(Gradient, MatchesFiniteDifferencesOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> m_of(2, 5), n_of(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AdaptFrame> frames;
    const std::size_t n = n_of(rng);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(random_frame(rng, m_of(rng)));
    const CostWeights w = random_weights(rng);
    const auto g = objective_gradient(frames, w);
    const auto fd = fd_gradient(frames, w, 1e-6);
    for (std::size_t c = 0; c < kNumCosts; ++c) {
      const double scale = std::max(std::abs(fd[c]), 1e-3);
      EXPECT_LT(std::abs(g[c] - fd[c]) / scale, 1e-5) << "trial " << trial << " c " << c;
    }
  }
}

TEST(Gradient, ShiftOfFrameCostsChangesNothing) {
  std::mt19937_64 rng(5);
  std::vector<AdaptFrame> frames{random_frame(rng, 4), random_frame(rng, 3)};
  std::vector<AdaptFrame> shifted = frames;
  for (auto& b : shifted[0].breakdowns)
    for (double& v : b.values) v += 0.75;  // uniform w: adds 0.75 to every total
  const CostWeights w = CostWeights::uniform();
  EXPECT_NEAR(me_loss(frames[0], w), me_loss(shifted[0], w), 1e-12);
  const auto p = selection_probabilities(member_costs(frames[0], w));
  const auto q = selection_probabilities(member_costs(shifted[0], w));
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
}

TEST(Logits, RoundTrip) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const CostWeights w = random_weights(rng);
    const auto l = weights_to_logits(w);
    const CostWeights back = softmax_weights(l);
    for (std::size_t c = 0; c < kNumCosts; ++c) EXPECT_NEAR(back[c], w[c], 1e-12);
  }
}

TEST(Optimize, SeparableInstanceDrivesObjectiveDown) {
  // Member 0 is cheapest exactly in J_r; the demonstration is member 0.
  std::vector<AdaptFrame> frames;
  for (int i = 0; i < 6; ++i) {
    AdaptFrame f;
    f.breakdowns = {CostBreakdown{{5, 0, 5, 5}}, CostBreakdown{{0, 5, 5, 5}}, CostBreakdown{{5, 5, 0, 5}},
                    CostBreakdown{{5, 5, 5, 0}}};
    f.distances = {0.0, 1.0, 1.0, 1.0};
    frames.push_back(f);
  }
  const AdaptResult r = optimize_weights(frames, AdaptConfig{}, true);
  // Best reachable on the simplex is the J_r vertex: per frame 3e^-5 / (1 + 3e^-5).
  const double vertex = 6.0 * 3.0 * std::exp(-5.0) / (1.0 + 3.0 * std::exp(-5.0));
  EXPECT_LT(r.objective, 1.05 * vertex);
  EXPECT_EQ(r.weights.argmax(), static_cast<std::size_t>(kRoughness));
  EXPECT_LT(r.objective, r.initial_objective);
  for (const auto& w : r.evaluated) {
    double sum = 0.0;
    for (double v : w.values) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
}

TEST(Optimize, SingleMemberFramesKeepInit) {
  std::vector<AdaptFrame> frames{AdaptFrame{{CostBreakdown{{1, 2, 3, 4}}}, {0.5}}};
  AdaptConfig cfg;
  cfg.init = CostWeights{{0.4, 0.3, 0.2, 0.1}};
  const AdaptResult r = optimize_weights(frames, cfg);
  EXPECT_EQ(r.weights, cfg.init);
  EXPECT_TRUE(r.converged);
  EXPECT_FALSE(r.diagnostics.empty());
}

TEST(Optimize, NonFiniteCostIsDataError) {
  std::vector<AdaptFrame> frames{AdaptFrame{{CostBreakdown{{1, 0, 0, 0}}, CostBreakdown{{0, std::nan(""), 0, 0}}},
                                            {0.0, 1.0}}};
  EXPECT_THROW(optimize_weights(frames, AdaptConfig{}), DataError);
}

TEST(Optimize, InvalidConfigRejected) {
  AdaptConfig cfg;
  cfg.max_iterations = 0;
  std::vector<AdaptFrame> frames{AdaptFrame{{CostBreakdown{}}, {0.0}}};
  EXPECT_THROW(optimize_weights(frames, cfg), ConfigError);
  cfg = AdaptConfig{};
  cfg.init = CostWeights{{0.5, 0.5, 0.5, 0.5}};
  EXPECT_THROW(optimize_weights(frames, cfg), ConfigError);
}

TEST(Optimize, PlantedWeightsRecoveredOnSyntheticClusters) {
  // Synthetic clusters scored by a hidden weight vector; demonstration is the
  // argmin member. Recovered weights must pick the same members on fresh frames.
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  const CostWeights hidden{{0.879, 0.085, 0.007, 0.029}};
  auto make = [&](std::size_t n) {
    std::vector<AdaptFrame> out;
    for (std::size_t i = 0; i < n; ++i) {
      AdaptFrame f;
      for (int k = 0; k < 16; ++k) f.breakdowns.push_back(CostBreakdown{{u(rng), u(rng), u(rng), u(rng)}});
      const std::size_t best = argmin_cost(f.breakdowns, hidden);
      for (int k = 0; k < 16; ++k) f.distances.push_back(k == static_cast<int>(best) ? 0.0 : 1.0 + 0.1 * k);
      out.push_back(f);
    }
    return out;
  };
  const auto train = make(40);
  const auto test = make(50);
  const AdaptResult r = optimize_weights(train, AdaptConfig{});
  int agree = 0;
  for (const auto& f : test) agree += argmin_cost(f.breakdowns, r.weights) == argmin_cost(f.breakdowns, hidden);
  EXPECT_GE(agree, 48);
  EXPECT_EQ(r.weights.argmax(), static_cast<std::size_t>(kHeight));
}

TEST(Worker, PublishesAfterEachFrameAndKeepsWindow) {
  const auto& lib = default_library();
  ScenarioSpec spec{ScenarioKind::ramp, 3, {}};
  spec.params.point_count = 30000;
  const auto frames = gen_frames(spec, 4, OracleSpec{human_weights(ScenarioKind::ramp), 0.0, false}, lib, FrameGenConfig{});
  WorkerConfig cfg;
  cfg.window = 2;
  WeightWorker worker(lib, cfg);
  EXPECT_EQ(worker.latest()->sequence, 0u);
  EXPECT_EQ(worker.latest()->weights, CostWeights::uniform());
  for (const auto& f : frames) {
    worker.submit(std::make_shared<const FrameSample>(f));
    worker.wait_idle();
    const auto pub = worker.latest();
    EXPECT_EQ(pub->last_frame, f.index);
    EXPECT_LE(pub->frames, 2u);
    EXPECT_TRUE(pub->weights.on_simplex(1e-9));
  }
  EXPECT_EQ(worker.latest()->sequence, frames.size());
  EXPECT_EQ(worker.dropped(), 0u);
}

TEST(Worker, FullQueueDropsOldest) {
  const auto& lib = default_library();
  ScenarioSpec spec{ScenarioKind::straight, 3, {}};
  spec.params.point_count = 20000;
  const auto frames = gen_frames(spec, 6, OracleSpec{}, lib, FrameGenConfig{});
  WorkerConfig cfg;
  cfg.queue_capacity = 1;
  WeightWorker worker(lib, cfg);
  for (const auto& f : frames) worker.submit(std::make_shared<const FrameSample>(f));
  worker.wait_idle();
  const auto pub = worker.latest();
  EXPECT_EQ(pub->last_frame, frames.back().index);
  EXPECT_EQ(pub->sequence + worker.dropped(), frames.size());
}

TEST(Worker, FrameWithoutDemonstrationIsSkipped) {
  const auto& lib = default_library();
  ScenarioSpec spec{ScenarioKind::straight, 3, {}};
  spec.params.point_count = 20000;
  auto frames = gen_frames(spec, 1, OracleSpec{}, lib, FrameGenConfig{});
  frames[0].human = Trajectory{};
  WeightWorker worker(lib, WorkerConfig{});
  worker.submit(std::make_shared<const FrameSample>(frames[0]));
  worker.wait_idle();
  EXPECT_EQ(worker.latest()->sequence, 0u);
  ASSERT_EQ(worker.diagnostics().size(), 1u);
}
