#pragma once

// Limited-memory BFGS with a backtracking (Armijo) line search.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace offroad {

struct LbfgsOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  std::size_t memory = 6;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct LbfgsReport {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  int iterations = 0;
  bool converged = false;
  // Objective after every accepted step, starting with the initial value.
  std::vector<double> history;
};

namespace detail {

inline double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vnorm(const std::vector<double>& a) { return std::sqrt(vdot(a, a)); }

}  // namespace detail

// `fg(x, grad)` returns f(x) and writes the gradient into `grad`.
template <typename ValueAndGradient>
LbfgsReport lbfgs_minimize(ValueAndGradient&& fg, std::vector<double> x, const LbfgsOptions& opt) {
  using detail::vdot;
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), d(n);
  double f = fg(x, g);

  LbfgsReport rep;
  rep.initial_value = f;
  rep.history.push_back(f);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (detail::vnorm(g) < opt.gradient_tolerance) {
      rep.converged = true;
      break;
    }
    // Two-loop recursion for d = -H g.
    std::vector<double> q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * vdot(s_hist[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * y_hist[i][j];
    }
    // Without curvature pairs the first trial step has unit length.
    double gamma = 1.0 / detail::vnorm(g);
    if (!s_hist.empty()) gamma = vdot(s_hist.back(), y_hist.back()) / vdot(y_hist.back(), y_hist.back());
    for (double& v : q) v *= gamma;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * vdot(y_hist[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] += s_hist[i][j] * (alpha[i] - beta);
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = -q[j];
    double slope = vdot(g, d);
    if (!(slope < 0.0)) {  // not a descent direction: restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double inv = 1.0 / detail::vnorm(g);
      for (std::size_t j = 0; j < n; ++j) d[j] = -g[j] * inv;
      slope = vdot(g, d);
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b) {
      for (std::size_t j = 0; j < n; ++j) x_new[j] = x[j] + step * d[j];
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }
    rep.iterations = it + 1;
    if (!accepted) {
      // No decrease possible at this resolution; treat as stationary.
      rep.converged = detail::vnorm(g) < std::sqrt(opt.gradient_tolerance);
      break;
    }

    std::vector<double> s(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = x_new[j] - x[j];
      y[j] = g_new[j] - g[j];
    }
    const double sy = vdot(s, y);
    if (sy > 1e-12 * detail::vnorm(s) * detail::vnorm(y)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    g = g_new;
    f = f_new;
    rep.history.push_back(f);
  }
  if (!rep.converged && detail::vnorm(g) < opt.gradient_tolerance) rep.converged = true;
  rep.x = std::move(x);
  rep.value = f;
  return rep;
}

}  // namespace offroad
