#pragma once

#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "adamve/approx.hpp"
#include "adamve/grid.hpp"
#include "adamve/replay.hpp"
#include "adamve/rng.hpp"

namespace adamve::testing {

// Transitions from uniform-random episodes, resetting on termination.
inline std::vector<Transition> random_walk(const GridSpec& spec, int steps,
                                           std::uint64_t seed) {
  GridEnv env(spec);
  Rng reset = Rng::stream(seed, "walk-reset");
  Rng act = Rng::stream(seed, "walk-action");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(steps));
  GridState s = env.reset(reset);
  for (int i = 0; i < steps; ++i) {
    const Action a = static_cast<Action>(act.below(kNumActions));
    const auto step = env.step(a);
    out.push_back({s, a, step.reward, step.next, step.entered_goal});
    s = env.done() ? env.reset(reset) : step.next;
  }
  return out;
}

// Batch loss matching Approximator::grad_step_raw, evaluated without
// taking a step.
inline double batch_loss(const Approximator& a, std::span<const double> inputs,
                         std::span<const HeadTarget> batch) {
  const std::size_t in = inputs.size() / batch.size();
  std::vector<double> out(a.heads());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    a.eval_raw_into(inputs.subspan(i * in, in), out);
    const double r = out[batch[i].head] - batch[i].target;
    loss += 0.5 * r * r;
  }
  return loss / static_cast<double>(batch.size());
}

// Compares the analytic batch gradient against central finite differences
// with the given perturbation; returns the worst relative error over all
// parameters. The analytic gradient is recovered from a unit-rate plain
// gradient step on a copy. Parameters whose perturbation interval crosses a
// ReLU kink are skipped: there the loss is not differentiable and central
// differencing is meaningless. Crossings are detected by comparing the h and
// h/2 central estimates, which agree to roundoff on the piecewise-smooth
// regions and diverge across a kink.
inline double gradcheck_max_rel_err(const Approximator& net,
                                    std::span<const double> inputs,
                                    std::span<const HeadTarget> batch,
                                    double h = 1e-5,
                                    std::size_t* skipped = nullptr) {
  Approximator stepped = net;
  stepped.set_optimizer({.kind = OptimConfig::Kind::PlainGradient, .lr = 1.0});
  stepped.grad_step_raw(inputs, batch);

  Approximator probe = net;
  double worst = 0.0;
  std::size_t skips = 0;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    const double analytic = net.params()[i] - stepped.params()[i];
    const double saved = probe.params()[i];
    const auto loss_at = [&](double offset) {
      probe.mutable_params()[i] = saved + offset;
      return batch_loss(probe, inputs, batch);
    };
    const double full = (loss_at(h) - loss_at(-h)) / (2.0 * h);
    const double half = (loss_at(h / 2) - loss_at(-h / 2)) / h;
    probe.mutable_params()[i] = saved;
    if (std::abs(full - half) > 1e-6 * std::max(1.0, std::abs(full))) {
      ++skips;
      continue;
    }
    const double rel = std::abs(analytic - full) /
                       std::max({std::abs(analytic), std::abs(full), 1e-2});
    worst = std::max(worst, rel);
  }
  if (skipped) *skipped = skips;
  return worst;
}

// Breadth-first search distances (in steps) from every cell to the goal,
// following the true motion rule. Unreachable or wall cells get INT_MAX.
inline std::vector<int> bfs_distances_to_goal(const GridSpec& spec) {
  const int n = spec.num_cells();
  std::vector<int> dist(n, std::numeric_limits<int>::max());
  std::queue<GridState> frontier;
  dist[spec.cell_index(spec.goal())] = 0;
  frontier.push(spec.goal());
  while (!frontier.empty()) {
    const GridState s = frontier.front();
    frontier.pop();
    const int d = dist[spec.cell_index(s)];
    const GridState neighbours[4] = {
        {s.x - 1, s.y}, {s.x + 1, s.y}, {s.x, s.y - 1}, {s.x, s.y + 1}};
    for (const GridState& t : neighbours) {
      if (!spec.open(t)) continue;
      int& dt = dist[spec.cell_index(t)];
      if (dt > d + 1) {
        dt = d + 1;
        frontier.push(t);
      }
    }
  }
  return dist;
}

}  // namespace adamve::testing
