#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "adamve/approx.hpp"
#include "adamve/dynamics.hpp"
#include "adamve/grid.hpp"
#include "adamve/rng.hpp"

namespace adamve {

// Q networks put one head per action, in action-index order.
inline Action greedy_action(const Approximator& q, GridState s) {
  double row[kNumActions];
  q.eval_state_into(to_vec(s), std::span<double>(row, kNumActions));
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (row[a] > row[best]) best = a;
  }
  return static_cast<Action>(best);
}

inline double max_q_value(const Approximator& q, GridState s) {
  double row[kNumActions];
  q.eval_state_into(to_vec(s), std::span<double>(row, kNumActions));
  return *std::max_element(row, row + kNumActions);
}

// Expands one model rollout from `start` into per-horizon value estimates:
//   v[h] = sum_{t<h} gamma^t R(s_t, a_t) + gamma^h max_a qbar(s_h, a),
// where actions follow the greedy policy of the online q and successor
// states are drawn from the model, all horizons sharing the single
// trajectory. v[0] is the plain model-free bootstrap. Rollout states may be
// real-valued (learned models); rewards, policies and bootstraps read them
// through the nearest cell. The known reward rule is evaluated directly, and
// a rollout that reaches the goal is truncated there: later horizons repeat
// the value at the time of arrival, since the episode would have ended.
inline std::vector<double> rollout_values(const DynamicsModel& model,
                                          const Approximator& q,
                                          const Approximator& qbar,
                                          GridState start, int h_max,
                                          double gamma, Rng& rng) {
  if (h_max < 0) {
    throw std::invalid_argument("value-expansion: h_max must be >= 0");
  }
  const GridSpec& spec = model.spec();
  std::vector<double> v(static_cast<std::size_t>(h_max) + 1);
  v[0] = max_q_value(qbar, start);
  Vec2 cur = to_vec(start);
  double prefix = 0.0;
  double disc = 1.0;
  for (int h = 1; h <= h_max; ++h) {
    const GridState cell = snap_to_cell(spec, cur);
    if (cell == spec.goal()) {
      v[h] = v[h - 1];
      continue;
    }
    const Action a = greedy_action(q, cell);
    prefix += disc * true_reward(spec, cell, a);
    cur = model.predict_sample(cell, a, rng);
    disc *= gamma;
    v[h] = prefix + disc * max_q_value(qbar, snap_to_cell(spec, cur));
  }
  return v;
}

// Softmax over horizons with temperature tau: low cumulative model error
// means high weight. Shifting by the smallest error keeps the exponents in
// [-max_spread/tau, 0], so nothing overflows and an all-equal error vector
// yields exactly uniform weights.
inline std::vector<double> horizon_weights(std::span<const double> errs,
                                           double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("value-expansion: tau must be positive");
  }
  if (errs.empty()) {
    throw std::invalid_argument("value-expansion: no horizons");
  }
  for (double e : errs) {
    if (!std::isfinite(e)) {
      throw std::invalid_argument("value-expansion: non-finite error");
    }
  }
  const double lo = *std::min_element(errs.begin(), errs.end());
  std::vector<double> w(errs.size());
  double total = 0.0;
  for (std::size_t h = 0; h < errs.size(); ++h) {
    w[h] = std::exp(-(errs[h] - lo) / tau);
    total += w[h];
  }
  for (double& x : w) x /= total;
  return w;
}

// The convex mix of horizon values the weights prescribe; the regression
// target of the adaptive algorithm.
inline double mixed_target(std::span<const double> values,
                           std::span<const double> weights) {
  if (values.size() != weights.size()) {
    throw std::invalid_argument("value-expansion: length mismatch");
  }
  double out = 0.0;
  for (std::size_t h = 0; h < values.size(); ++h) out += weights[h] * values[h];
  return out;
}

// How many model steps the weights amount to; the quantity the horizon
// heatmaps display.
inline double weighted_avg_horizon(std::span<const double> weights) {
  double out = 0.0;
  for (std::size_t h = 0; h < weights.size(); ++h) {
    out += weights[h] * static_cast<double>(h);
  }
  return out;
}

}  // namespace adamve
