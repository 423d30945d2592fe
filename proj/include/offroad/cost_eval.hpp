#pragma once

// Trajectory costs (height, roughness, deviation, smoothness), their weighted
// combination and the softmax that turns cluster costs into selection
// probabilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offroad/core.hpp"
#include "offroad/errors.hpp"
#include "offroad/grid.hpp"
#include "offroad/map_builder.hpp"

namespace offroad {

inline constexpr std::size_t kNumCosts = 4;
enum CostIndex : std::size_t { kHeight = 0, kRoughness = 1, kDeviation = 2, kSmoothness = 3 };

inline constexpr std::array<const char*, kNumCosts> kCostNames{"J_h", "J_r", "J_T", "J_s"};

// (w_h, w_r, w_T, w_s) on the probability simplex.
struct CostWeights {
  std::array<double, kNumCosts> values{0.25, 0.25, 0.25, 0.25};

  static CostWeights uniform() { return {}; }
  static CostWeights vertex(std::size_t c) {
    CostWeights w{{0.0, 0.0, 0.0, 0.0}};
    w.values.at(c) = 1.0;
    return w;
  }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  bool on_simplex(double tol = 1e-9) const {
    double sum = 0.0;
    for (double v : values) {
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
      sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
  }
  void validate(double tol = 1e-9) const {
    if (!on_simplex(tol)) throw ConfigError("cost weights must be nonnegative and sum to 1");
  }
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  }
  friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

struct CostBreakdown {
  std::array<double, kNumCosts> values{0.0, 0.0, 0.0, 0.0};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const CostBreakdown&, const CostBreakdown&) = default;
};

struct DeviationParams {
  double distance_weight = 0.8;  // w_d
  double heading_weight = 0.2;   // w_theta
  std::size_t samples = 20;      // N_p; N_p + 1 points are compared

  void validate() const {
    if (!(distance_weight >= 0 && heading_weight >= 0) || samples < 1)
      throw ConfigError("deviation params: weights must be >= 0 and N_p >= 1");
  }
};

// How a cluster's raw breakdowns are scaled before weighting.
enum class CostNormalization { none, cluster_mean, cluster_range };

namespace detail {

inline void require_on_map(const Trajectory& traj, const GridSpec& spec, const char* what) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (!spec.cell_of(traj[i].position()))
      throw DataError(std::string(what) + ": trajectory point " + std::to_string(i) + " is off the map");
  }
}

}  // namespace detail

// Mean absolute terrain slope along the trajectory, central differences in
// the interior and one-sided at the ends.
inline double height_cost(const Trajectory& traj, const Layer& elevation, Diagnostics* diag = nullptr) {
  detail::require_on_map(traj, elevation.spec, "height_cost");
  const std::size_t n = traj.size();
  if (n < 2) return 0.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = *elevation.sample(traj[i].position());

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == n ? n - 1 : k + 1;
    const double run = distance(traj[hi].position(), traj[lo].position());
    if (!(run > 1e-9)) continue;
    sum += std::abs((z[hi] - z[lo]) / run);
    ++used;
  }
  if (used < n)
    note(diag, "height_cost: skipped " + std::to_string(n - used) + " stationary samples");
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

inline double roughness_cost(const Trajectory& traj, const Layer& roughness) {
  detail::require_on_map(traj, roughness.spec, "roughness_cost");
  if (traj.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : traj.states) sum += *roughness.sample(s.position());
  return sum / static_cast<double>(traj.size());
}

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

// Heading of the reference at a projection point.
inline double heading_at(const Trajectory& ref, const PolylineProjection& proj) {
  if (ref.size() == 1) return ref.front().pose.heading;
  return lerp_angle(ref[proj.segment].pose.heading, ref[proj.segment + 1].pose.heading, proj.fraction);
}

// Gaussian-weighted deviation from the reference over N_p + 1 equidistant
// trajectory points; index n = 0 is the trajectory start.
inline double deviation_cost(const Trajectory& traj, const Trajectory& reference,
                             const DeviationParams& params) {
  params.validate();
  if (reference.empty()) throw DataError("deviation_cost: empty reference");
  const std::size_t np = params.samples;
  const Trajectory pts = resample_uniform(traj, np + 1);
  double sum = 0.0;
  for (std::size_t n = 0; n <= np; ++n) {
    const auto proj = project_onto(reference, pts[n].position());
    const double dtheta = angle_distance(pts[n].pose.heading, heading_at(reference, proj));
    const double j = params.distance_weight * proj.distance + params.heading_weight * dtheta;
    sum += standard_normal_pdf(1.0 - static_cast<double>(n) / static_cast<double>(np)) * j;
  }
  return sum / static_cast<double>(np + 1);
}

// Discrete three-point curvature at every sample; ends copy their neighbour.
inline std::vector<double> discrete_curvature(const Trajectory& traj) {
  const std::size_t n = traj.size();
  std::vector<double> k(n, 0.0);
  if (n < 3) return k;
  for (std::size_t i = 1; i + 1 < n; ++i)
    k[i] = three_point_curvature(traj[i - 1].position(), traj[i].position(), traj[i + 1].position());
  k[0] = k[1];
  k[n - 1] = k[n - 2];
  return k;
}

// Trapezoidal integral of squared curvature over arc length.
inline double smoothness_cost(const Trajectory& traj) {
  if (traj.size() < 3) throw DataError("smoothness_cost: need at least 3 points");
  std::vector<double> k;
  if (traj.has_curvature()) {
    k.reserve(traj.size());
    for (const auto& s : traj.states) k.push_back(s.curvature);
  } else {
    k = discrete_curvature(traj);
  }
  double sum = 0.0;
  for (std::size_t n = 1; n < traj.size(); ++n) {
    const double ds = distance(traj[n].position(), traj[n - 1].position());
    sum += (k[n - 1] * k[n - 1] + k[n] * k[n]) * ds / 2.0;
  }
  return sum;
}

inline CostBreakdown evaluate_costs(const Trajectory& traj, const FeatureMapStack& stack,
                                    const Trajectory& reference, const DeviationParams& dev,
                                    Diagnostics* diag = nullptr) {
  CostBreakdown b;
  b[kHeight] = height_cost(traj, stack.elevation, diag);
  b[kRoughness] = roughness_cost(traj, stack.roughness);
  b[kDeviation] = deviation_cost(traj, reference, dev);
  b[kSmoothness] = smoothness_cost(traj);
  return b;
}

inline double total_cost(const CostBreakdown& b, const CostWeights& w) {
  double f = 0.0;
  for (std::size_t c = 0; c < kNumCosts; ++c) f += w[c] * b[c];
  return f;
}

// Rescales each cost component across a candidate set. cluster_mean divides
// by the mean; cluster_range maps [min, max] onto [0, scale]. Components whose
// mean (or spread) is below `floor` are left untouched (mean) or zeroed (range).
inline std::vector<CostBreakdown> normalize_breakdowns(std::span<const CostBreakdown> raw,
                                                       CostNormalization mode, double scale = 1.0,
                                                       double floor = 1e-9) {
  std::vector<CostBreakdown> out(raw.begin(), raw.end());
  if (mode == CostNormalization::none || raw.empty()) return out;
  for (std::size_t c = 0; c < kNumCosts; ++c) {
    if (mode == CostNormalization::cluster_mean) {
      double mean = 0.0;
      for (const auto& b : raw) mean += b[c];
      mean /= static_cast<double>(raw.size());
      if (!(mean > floor)) continue;
      for (auto& b : out) b[c] = scale * b[c] / mean;
    } else {
      double lo = raw.front()[c], hi = raw.front()[c];
      for (const auto& b : raw) {
        lo = std::min(lo, b[c]);
        hi = std::max(hi, b[c]);
      }
      for (auto& b : out) b[c] = hi - lo > floor ? scale * (b[c] - lo) / (hi - lo) : 0.0;
    }
  }
  return out;
}

// P_k = exp(-f_k) / sum_j exp(-f_j), shifted by the minimum cost for stability.
inline std::vector<double> selection_probabilities(std::span<const double> costs) {
  if (costs.empty()) throw DataError("selection_probabilities: empty cost list");
  const double lo = *std::min_element(costs.begin(), costs.end());
  if (!std::isfinite(lo)) throw DataError("selection_probabilities: non-finite cost");
  std::vector<double> p(costs.size());
  double z = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!std::isfinite(costs[k])) throw DataError("selection_probabilities: non-finite cost");
    p[k] = std::exp(-(costs[k] - lo));
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

// Index of the lowest total cost; ties go to the lowest index.
inline std::size_t argmin_cost(std::span<const CostBreakdown> costs, const CostWeights& w) {
  if (costs.empty()) throw DataError("argmin_cost: no candidates");
  std::size_t best = 0;
  double best_f = total_cost(costs[0], w);
  for (std::size_t k = 1; k < costs.size(); ++k) {
    const double f = total_cost(costs[k], w);
    if (f < best_f) {
      best_f = f;
      best = k;
    }
  }
  return best;
}

// True when every point is on the map and clear of obstacle cells dilated by
// `margin` cells.
inline bool is_feasible(const Trajectory& traj, const FeatureMapStack& stack, int margin) {
  const GridSpec& spec = stack.obstacle.spec;
  for (const auto& s : traj.states) {
    const auto c = spec.cell_of(s.position());
    if (!c) return false;
    for (int iy = std::max(0, c->second - margin); iy <= std::min(spec.height - 1, c->second + margin); ++iy)
      for (int ix = std::max(0, c->first - margin); ix <= std::min(spec.width - 1, c->first + margin); ++ix)
        if (stack.obstacle.at(ix, iy)) return false;
  }
  return true;
}

struct EvalConfig {
  DeviationParams deviation;
  CostNormalization normalization = CostNormalization::cluster_range;
  double normalization_scale = 1000.0;
  int obstacle_margin = 1;  // cells

  void validate() const {
    deviation.validate();
    if (obstacle_margin < 0) throw ConfigError("obstacle margin must be >= 0");
    if (!(normalization_scale > 0)) throw ConfigError("normalization scale must be > 0");
  }
};

// Costs of a candidate set. Infeasible candidates keep NaN breakdowns and are
// excluded from normalization.
struct ScoredCandidates {
  std::vector<CostBreakdown> raw;
  std::vector<CostBreakdown> scaled;
  std::vector<bool> feasible;

  std::size_t size() const { return raw.size(); }
  std::vector<std::size_t> feasible_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < feasible.size(); ++k)
      if (feasible[k]) out.push_back(k);
    return out;
  }
};

inline ScoredCandidates score_candidates(std::span<const Trajectory> candidates, const FeatureMapStack& stack,
                                         const Trajectory& reference, const EvalConfig& config,
                                         Diagnostics* diag = nullptr) {
  ScoredCandidates out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.raw.assign(candidates.size(), CostBreakdown{{nan, nan, nan, nan}});
  out.feasible.assign(candidates.size(), false);
  std::vector<CostBreakdown> ok;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!is_feasible(candidates[k], stack, config.obstacle_margin)) continue;
    try {
      out.raw[k] = evaluate_costs(candidates[k], stack, reference, config.deviation, diag);
      out.feasible[k] = true;
      ok.push_back(out.raw[k]);
    } catch (const DataError& e) {
      note(diag, "candidate " + std::to_string(k) + " not scored: " + e.what());
    }
  }
  const auto scaled = normalize_breakdowns(ok, config.normalization, config.normalization_scale);
  out.scaled = out.raw;
  std::size_t j = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (out.feasible[k]) out.scaled[k] = scaled[j++];
  return out;
}

// Lowest total cost among feasible candidates; ties go to the lowest index.
inline std::optional<std::size_t> best_feasible(const ScoredCandidates& scored, const CostWeights& w) {
  std::optional<std::size_t> best;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scored.size(); ++k) {
    if (!scored.feasible[k]) continue;
    const double f = total_cost(scored.scaled[k], w);
    if (f < best_f) {
      best_f = f;
      best = k;
    }
  }
  return best;
}

}  // namespace offroad
