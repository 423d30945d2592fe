#pragma once

// Cost-weight learning from demonstrations. Each frame contributes the
// expected distance between cluster members and the demonstration under
// softmax selection probabilities; the batch objective sums frames and is
// minimized over the simplex via a softmax reparameterization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offroad/cost_eval.hpp"
#include "offroad/core.hpp"
#include "offroad/errors.hpp"
#include "offroad/lbfgs.hpp"

namespace offroad {

struct AdaptFrame {
  std::vector<CostBreakdown> breakdowns;  // one per cluster member
  std::vector<double> distances;          // member-to-demonstration distance

  void validate() const {
    if (breakdowns.size() != distances.size())
      throw DataError("adapt frame: breakdowns and distances differ in length");
    for (double d : distances)
      if (!(d >= 0.0)) throw DataError("adapt frame: distances must be >= 0");
  }
};

using WeightGradient = std::array<double, kNumCosts>;

inline std::vector<double> member_costs(const AdaptFrame& frame, const CostWeights& w) {
  std::vector<double> f(frame.breakdowns.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = total_cost(frame.breakdowns[k], w);
  return f;
}

inline double me_loss(const AdaptFrame& frame, const CostWeights& w) {
  frame.validate();
  if (frame.breakdowns.empty()) return 0.0;
  const auto p = selection_probabilities(member_costs(frame, w));
  double loss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) loss += p[k] * frame.distances[k];
  return loss;
}

inline double batch_objective(std::span<const AdaptFrame> frames, const CostWeights& w) {
  if (frames.empty()) throw DataError("batch_objective: empty batch");
  double sum = 0.0;
  for (const auto& f : frames) sum += me_loss(f, w);
  return sum;
}

// d/dw_c sum_k P_k d_k = sum_k P_k d_k (E_P[J_c] - J_kc), summed over frames.
inline WeightGradient objective_gradient(std::span<const AdaptFrame> frames, const CostWeights& w) {
  if (frames.empty()) throw DataError("objective_gradient: empty batch");
  WeightGradient grad{};
  for (const auto& frame : frames) {
    frame.validate();
    if (frame.breakdowns.empty()) continue;
    const auto p = selection_probabilities(member_costs(frame, w));
    double expected_d = 0.0;
    std::array<double, kNumCosts> expected_j{};
    std::array<double, kNumCosts> expected_dj{};
    for (std::size_t k = 0; k < p.size(); ++k) {
      expected_d += p[k] * frame.distances[k];
      for (std::size_t c = 0; c < kNumCosts; ++c) {
        expected_j[c] += p[k] * frame.breakdowns[k][c];
        expected_dj[c] += p[k] * frame.distances[k] * frame.breakdowns[k][c];
      }
    }
    for (std::size_t c = 0; c < kNumCosts; ++c) grad[c] += expected_d * expected_j[c] - expected_dj[c];
  }
  return grad;
}

inline CostWeights softmax_weights(std::span<const double> logits) {
  CostWeights w;
  double hi = logits[0];
  for (double v : logits) hi = std::max(hi, v);
  double z = 0.0;
  for (std::size_t c = 0; c < kNumCosts; ++c) {
    w[c] = std::exp(logits[c] - hi);
    z += w[c];
  }
  for (double& v : w.values) v /= z;
  return w;
}

inline std::vector<double> weights_to_logits(const CostWeights& w) {
  std::vector<double> l(kNumCosts);
  for (std::size_t c = 0; c < kNumCosts; ++c) l[c] = std::log(std::max(w[c], 1e-12));
  double mean = 0.0;
  for (double v : l) mean += v;
  mean /= static_cast<double>(kNumCosts);
  for (double& v : l) v -= mean;
  return l;
}

struct AdaptConfig {
  int max_iterations = 100;
  double gradient_tolerance = 1e-7;
  std::size_t memory = 6;
  CostWeights init = CostWeights::uniform();
  // Extra solves started near each simplex vertex; the lowest objective wins.
  bool vertex_starts = true;
  double vertex_share = 0.7;

  void validate() const {
    if (max_iterations < 1 || !(gradient_tolerance > 0) || memory < 1)
      throw ConfigError("adapt config: iterations, tolerance and memory must be positive");
    if (!(vertex_share > 0.25 && vertex_share < 1.0)) throw ConfigError("adapt config: vertex_share must be in (0.25, 1)");
    init.validate(1e-6);
  }

  std::vector<CostWeights> starts() const {
    std::vector<CostWeights> out{init};
    if (!vertex_starts) return out;
    for (std::size_t c = 0; c < kNumCosts; ++c) {
      CostWeights w;
      w.values.fill((1.0 - vertex_share) / static_cast<double>(kNumCosts - 1));
      w[c] = vertex_share;
      out.push_back(w);
    }
    return out;
  }
};

struct AdaptResult {
  CostWeights weights;
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> diagnostics;
  // Every weight vector the solver evaluated, for simplex auditing.
  std::vector<CostWeights> evaluated;
  std::vector<double> history;
};

inline AdaptResult optimize_weights(std::span<const AdaptFrame> frames, const AdaptConfig& config,
                                    bool record_evaluations = false) {
  config.validate();
  if (frames.empty()) throw DataError("optimize_weights: empty batch");
  for (const auto& f : frames) f.validate();

  AdaptResult result;
  result.weights = config.init;
  const bool informative = std::any_of(frames.begin(), frames.end(), [](const AdaptFrame& f) {
    if (f.distances.size() < 2) return false;
    for (double d : f.distances)
      if (d != f.distances.front()) return true;
    return false;
  });
  if (!informative) {
    result.objective = result.initial_objective = batch_objective(frames, config.init);
    result.converged = true;
    result.diagnostics.push_back("objective is constant in the weights (single-member or equidistant clusters)");
    result.history.push_back(result.objective);
    return result;
  }

  auto make_fg = [&](std::span<const AdaptFrame> batch, bool record) {
    return [&, batch, record](const std::vector<double>& logits, std::vector<double>& grad) {
      const CostWeights w = softmax_weights(logits);
      if (record) result.evaluated.push_back(w);
      double value = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        double li = std::numeric_limits<double>::quiet_NaN();
        try {
          li = me_loss(batch[i], w);
        } catch (const DataError&) {
        }
        if (!std::isfinite(li))
          throw DataError("optimize_weights: non-finite objective in frame " + std::to_string(i));
        value += li;
      }
      const WeightGradient gw = objective_gradient(batch, w);
      double mean = 0.0;
      for (std::size_t c = 0; c < kNumCosts; ++c) mean += w[c] * gw[c];
      for (std::size_t c = 0; c < kNumCosts; ++c) grad[c] = w[c] * (gw[c] - mean);
      return value;
    };
  };

  LbfgsOptions opt;
  opt.max_iterations = config.max_iterations;
  opt.gradient_tolerance = config.gradient_tolerance;
  opt.memory = config.memory;
  auto consider = [&](const LbfgsReport& rep, bool first) {
    result.iterations += rep.iterations;
    if (first || rep.value < result.objective) {
      result.weights = softmax_weights(rep.x);
      result.objective = rep.value;
      result.converged = rep.converged;
      result.history = rep.history;
    }
  };

  const auto fg = make_fg(frames, record_evaluations);
  const auto starts = config.starts();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const LbfgsReport rep = lbfgs_minimize(fg, weights_to_logits(starts[i]), opt);
    if (i == 0) result.initial_objective = rep.initial_value;
    consider(rep, i == 0);
  }
  return result;
}

}  // namespace offroad
