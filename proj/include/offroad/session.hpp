#pragma once

// Replanning sessions: a weight worker thread solves for weights over a
// sliding window of recent frames while the planner runs frame by frame with
// whatever weights were last published.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "offroad/cost_eval.hpp"
#include "offroad/errors.hpp"
#include "offroad/planner.hpp"
#include "offroad/primitive_lib.hpp"
#include "offroad/scenario_gen.hpp"
#include "offroad/weight_adapt.hpp"

namespace offroad {

// Feasible cluster members with their (normalized) costs and distances to the
// frame's demonstration.
struct FrameCandidates {
  TrajectoryCluster cluster;
  ScoredCandidates scored;
  std::vector<std::size_t> feasible;
  AdaptFrame adapt;
};

inline FrameCandidates frame_candidates(const FrameSample& sample, const PrimitiveLibrary& library,
                                        const ClusterConfig& cluster_cfg, const EvalConfig& eval,
                                        Diagnostics* diag = nullptr) {
  FrameCandidates fc;
  fc.cluster = extract_clusters(library, sample.state, cluster_cfg, diag);
  fc.scored = score_candidates(fc.cluster.members, sample.stack, sample.reference, eval, diag);
  fc.feasible = fc.scored.feasible_indices();
  if (sample.human.size() < 2) throw DataError("frame " + std::to_string(sample.index) + ": no demonstration");
  const std::size_t H = cluster_cfg.horizon;
  const Trajectory human = sample.human.size() == H ? sample.human : resample_uniform(sample.human, H);
  for (auto k : fc.feasible) {
    fc.adapt.breakdowns.push_back(fc.scored.scaled[k]);
    fc.adapt.distances.push_back(traj_distance(fc.cluster.members[k], human));
  }
  return fc;
}

inline AdaptFrame make_adapt_frame(const FrameSample& sample, const PrimitiveLibrary& library,
                                   const ClusterConfig& cluster_cfg, const EvalConfig& eval,
                                   Diagnostics* diag = nullptr) {
  return frame_candidates(sample, library, cluster_cfg, eval, diag).adapt;
}

// Member of the frame's cluster the demonstration corresponds to: the oracle's
// pick when known, otherwise the nearest member.
inline std::size_t demonstrated_member(const FrameSample& sample, const TrajectoryCluster& cluster) {
  if (sample.oracle_member) return *sample.oracle_member;
  return match_to_cluster(sample.human, cluster).index;
}

struct WorkerConfig {
  AdaptConfig adapt;
  std::size_t window = 10;  // frames per solve
  std::size_t queue_capacity = 4;
  ClusterConfig cluster;
  EvalConfig eval;

  void validate() const {
    adapt.validate();
    if (window < 1 || queue_capacity < 1) throw ConfigError("worker config: window and queue capacity must be >= 1");
    cluster.validate();
    eval.validate();
  }
};

struct PublishedWeights {
  CostWeights weights;
  double objective = 0.0;
  std::size_t frames = 0;     // window size used for the solve
  std::size_t sequence = 0;   // number of solves published so far
  int last_frame = -1;        // newest frame index in the window
};

// Solves weights on a background thread. Frames are queued; each dequeued
// frame extends the sliding window and triggers a warm-started solve whose
// result replaces the published slot.
class WeightWorker {
 public:
  WeightWorker(const PrimitiveLibrary& library, WorkerConfig config)
      : library_(library), config_(std::move(config)) {
    config_.validate();
    published_ = std::make_shared<const PublishedWeights>(PublishedWeights{config_.adapt.init, 0.0, 0, 0, -1});
    thread_ = std::thread([this] { loop(); });
  }

  WeightWorker(const WeightWorker&) = delete;
  WeightWorker& operator=(const WeightWorker&) = delete;

  ~WeightWorker() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    thread_.join();
  }

  // Never blocks on a solve; when the queue is full the oldest pending frame is dropped.
  void submit(std::shared_ptr<const FrameSample> frame) {
    {
      std::lock_guard lock(mutex_);
      if (queue_.size() >= config_.queue_capacity) {
        queue_.pop_front();
        ++dropped_;
      }
      queue_.push_back(std::move(frame));
    }
    wake_.notify_all();
  }

  std::shared_ptr<const PublishedWeights> latest() const {
    std::lock_guard lock(slot_mutex_);
    return published_;
  }

  // Blocks until every queued frame has been solved and published.
  void wait_idle() {
    std::unique_lock lock(mutex_);
    idle_.wait(lock, [this] { return queue_.empty() && !busy_; });
  }

  std::size_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

  std::vector<std::string> diagnostics() const {
    std::lock_guard lock(mutex_);
    return diagnostics_;
  }

 private:
  void loop() {
    std::deque<AdaptFrame> window;
    CostWeights warm = config_.adapt.init;
    std::size_t sequence = 0;
    for (;;) {
      std::shared_ptr<const FrameSample> frame;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        frame = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
      }
      std::vector<std::string> notes;
      try {
        Diagnostics diag;
        AdaptFrame af = make_adapt_frame(*frame, library_, config_.cluster, config_.eval, &diag);
        window.push_back(std::move(af));
        while (window.size() > config_.window) window.pop_front();
        AdaptConfig cfg = config_.adapt;
        cfg.init = warm;
        std::vector<AdaptFrame> batch(window.begin(), window.end());
        const AdaptResult res = optimize_weights(batch, cfg);
        warm = res.weights;
        auto pub = std::make_shared<const PublishedWeights>(
            PublishedWeights{res.weights, res.objective, batch.size(), ++sequence, frame->index});
        {
          std::lock_guard lock(slot_mutex_);
          published_ = std::move(pub);
        }
        for (auto& m : res.diagnostics) notes.push_back("frame " + std::to_string(frame->index) + ": " + m);
      } catch (const Error& e) {
        notes.push_back("frame " + std::to_string(frame->index) + ": solve skipped: " + e.what());
      }
      {
        std::lock_guard lock(mutex_);
        for (auto& n : notes) diagnostics_.push_back(std::move(n));
        busy_ = false;
      }
      idle_.notify_all();
    }
  }

  const PrimitiveLibrary& library_;
  WorkerConfig config_;

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::shared_ptr<const FrameSample>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::size_t dropped_ = 0;
  std::vector<std::string> diagnostics_;

  mutable std::mutex slot_mutex_;
  std::shared_ptr<const PublishedWeights> published_;

  std::thread thread_;
};

struct SessionConfig {
  PlanConfig plan;
  WorkerConfig worker;
  bool adaptive = true;        // false: uniform weights, no worker
  bool deterministic = true;   // worker results applied at frame boundaries
  CostWeights baseline = human_weights(ScenarioKind::straight);

  void validate() const {
    plan.validate();
    worker.validate();
    baseline.validate(1e-6);
  }
};

struct FrameMetrics {
  int frame = 0;
  double wall_ms = 0.0;
  CostBreakdown costs;           // first selected member, raw
  CostBreakdown baseline_costs;  // baseline planner's first member, raw
  double total = 0.0;
  std::optional<std::size_t> selected;
  std::optional<std::size_t> baseline_selected;
  std::optional<std::size_t> optimal;  // demonstrated member
  CostWeights weights;
  bool agree() const { return selected && optimal && *selected == *optimal; }
  bool baseline_agree() const { return baseline_selected && optimal && *baseline_selected == *optimal; }
};

struct SelectionCounts {
  std::size_t optimal = 0;        // only the adaptive planner picked the demonstrated member
  std::size_t joint_optimal = 0;  // both planners did
  std::size_t non_optimal = 0;    // the adaptive planner did not
  std::size_t baseline_hits = 0;  // frames where the baseline picked it
  std::size_t total() const { return optimal + joint_optimal + non_optimal; }
  double adaptive_rate() const { return total() ? double(optimal + joint_optimal) / double(total()) : 0.0; }
  double baseline_rate() const { return total() ? double(baseline_hits) / double(total()) : 0.0; }
};

struct SessionResult {
  std::vector<PlannedTrajectory> plans;
  std::vector<PlannedTrajectory> baseline_plans;
  std::vector<FrameMetrics> metrics;
  SelectionCounts counts;
  std::vector<std::string> diagnostics;
};

inline SelectionCounts count_selections(const std::vector<FrameMetrics>& metrics) {
  SelectionCounts c;
  for (const auto& m : metrics) {
    if (m.baseline_agree()) ++c.baseline_hits;
    if (!m.agree())
      ++c.non_optimal;
    else if (m.baseline_agree())
      ++c.joint_optimal;
    else
      ++c.optimal;
  }
  return c;
}

inline SessionResult replan_session(const std::vector<FrameSample>& frames, const PrimitiveLibrary& library,
                                    const SessionConfig& config) {
  config.validate();
  SessionResult out;
  std::unique_ptr<WeightWorker> worker;
  if (config.adaptive) worker = std::make_unique<WeightWorker>(library, config.worker);

  int previous = std::numeric_limits<int>::min();
  for (const auto& frame : frames) {
    if (frame.index <= previous) throw DataError("replan_session: frames out of temporal order");
    previous = frame.index;

    const auto start = std::chrono::steady_clock::now();
    CostWeights w = CostWeights::uniform();
    if (worker) {
      // Deterministic mode reads the slot before this frame's solve can race in.
      if (config.deterministic) w = worker->latest()->weights;
      worker->submit(std::make_shared<const FrameSample>(frame));
      if (!config.deterministic) w = worker->latest()->weights;
    }
    PlannedTrajectory planned;
    try {
      planned = plan(frame.stack, frame.state, frame.reference, w, library, config.plan);
    } catch (const BlockedError& e) {
      planned.weights_used = w;
      planned.blocked = true;
      planned.diagnostics.push_back(e.what());
    }
    const auto stop = std::chrono::steady_clock::now();

    PlannedTrajectory base;
    try {
      base = plan(frame.stack, frame.state, frame.reference, config.baseline, library, config.plan);
    } catch (const BlockedError& e) {
      base.weights_used = config.baseline;
      base.blocked = true;
      base.diagnostics.push_back(e.what());
    }

    FrameMetrics m;
    m.frame = frame.index;
    m.wall_ms = config.deterministic ? 0.0 : std::chrono::duration<double, std::milli>(stop - start).count();
    m.weights = w;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.costs = m.baseline_costs = CostBreakdown{{nan, nan, nan, nan}};
    m.total = nan;
    if (!planned.segments.empty()) {
      m.selected = planned.segments.front().member;
      m.costs = planned.segments.front().breakdown;
      m.total = planned.segments.front().total;
    }
    if (!base.segments.empty()) {
      m.baseline_selected = base.segments.front().member;
      m.baseline_costs = base.segments.front().breakdown;
    }
    if (frame.human.size() >= 2) {
      Diagnostics diag;
      const auto cluster = extract_clusters(library, frame.state, config.plan.cluster, &diag);
      if (!cluster.empty()) m.optimal = demonstrated_member(frame, cluster);
    }
    out.metrics.push_back(m);
    out.plans.push_back(std::move(planned));
    out.baseline_plans.push_back(std::move(base));

    if (worker && config.deterministic) worker->wait_idle();
  }
  if (worker) {
    worker->wait_idle();
    for (auto& d : worker->diagnostics()) out.diagnostics.push_back(d);
    if (worker->dropped() > 0)
      out.diagnostics.push_back("weight worker dropped " + std::to_string(worker->dropped()) + " frames");
  }
  out.counts = count_selections(out.metrics);
  return out;
}

}  // namespace offroad
