#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "adamve/dynamics.hpp"
#include "adamve/grid.hpp"

namespace adamve {

// An explicit per-cell action distribution; the policy argument of the exact
// dynamic-programming routines.
class PolicyTable {
 public:
  static PolicyTable uniform_random(const GridSpec& spec) {
    PolicyTable p(spec);
    std::fill(p.probs_.begin(), p.probs_.end(), 1.0 / kNumActions);
    return p;
  }

  static PolicyTable always(const GridSpec& spec, Action a) {
    PolicyTable p(spec);
    for (std::size_t cell = 0; cell * kNumActions < p.probs_.size(); ++cell) {
      p.probs_[cell * kNumActions + action_index(a)] = 1.0;
    }
    return p;
  }

  std::span<const double> at(GridState s) const {
    return {&probs_[static_cast<std::size_t>(spec_->cell_index(s)) *
                    kNumActions],
            kNumActions};
  }

  void set(GridState s, std::span<const double> probs) {
    if (probs.size() != kNumActions) {
      throw std::invalid_argument("policy: need one probability per action");
    }
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("policy: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("policy: probabilities must sum to 1");
    }
    std::copy(probs.begin(), probs.end(),
              probs_.begin() +
                  static_cast<std::size_t>(spec_->cell_index(s)) * kNumActions);
  }

  const GridSpec& spec() const { return *spec_; }

 private:
  explicit PolicyTable(const GridSpec& spec)
      : spec_(&spec),
        probs_(static_cast<std::size_t>(spec.width()) * spec.height() *
               kNumActions) {}

  const GridSpec* spec_;
  std::vector<double> probs_;
};

// Enumerated transition kernel over the full cell table (wall cells
// included, since imperfect models can predict them). The goal row is
// absorbing with zero reward and zero W: episodes end there, so no further
// return or model error accrues. Values bootstrapped at the goal therefore
// keep discounting, which coincides with episode-termination semantics
// whenever the bootstrap assigns the goal value zero.
class DpDynamics {
 public:
  static DpDynamics from_env(const GridSpec& spec) {
    DpDynamics d(spec);
    d.fill([&](GridState s, Action a) {
      return std::vector<WeightedNext>{{apply_move(spec, s, a).next, 1.0}};
    });
    return d;
  }

  static DpDynamics from_model(const DynamicsModel& model) {
    if (!model.enumerable()) {
      throw std::invalid_argument("dp: model has no enumerable transitions");
    }
    DpDynamics d(model.spec());
    d.fill([&](GridState s, Action a) { return model.transitions(s, a); });
    return d;
  }

  const GridSpec& spec() const { return *spec_; }

  std::span<const WeightedNext> next_of(GridState s, Action a) const {
    return next_[slot(s, a)];
  }

  double reward(GridState s, Action a) const { return reward_[slot(s, a)]; }

 private:
  explicit DpDynamics(const GridSpec& spec)
      : spec_(&spec),
        next_(static_cast<std::size_t>(spec.width()) * spec.height() *
              kNumActions),
        reward_(next_.size(), 0.0) {}

  std::size_t slot(GridState s, Action a) const {
    return static_cast<std::size_t>(spec_->cell_index(s)) * kNumActions +
           action_index(a);
  }

  template <class NextFn>
  void fill(NextFn&& next_fn) {
    for (int y = 0; y < spec_->height(); ++y) {
      for (int x = 0; x < spec_->width(); ++x) {
        const GridState s{x, y};
        for (Action a : kAllActions) {
          if (s == spec_->goal()) {
            next_[slot(s, a)] = {{s, 1.0}};
            reward_[slot(s, a)] = 0.0;
          } else {
            next_[slot(s, a)] = next_fn(s, a);
            reward_[slot(s, a)] = true_reward(*spec_, s, a);
          }
        }
      }
    }
  }

  const GridSpec* spec_;
  std::vector<std::vector<WeightedNext>> next_;
  std::vector<double> reward_;
};

// Per-(cell, horizon) values from backward induction.
class ValueTable {
 public:
  ValueTable(const GridSpec& spec, int h_max)
      : spec_(&spec),
        h_max_(h_max),
        cells_(static_cast<std::size_t>(spec.width()) * spec.height()),
        values_(cells_ * (static_cast<std::size_t>(h_max) + 1), 0.0) {}

  int h_max() const { return h_max_; }
  const GridSpec& spec() const { return *spec_; }

  double at(GridState s, int h) const { return values_[index(s, h)]; }
  double& at(GridState s, int h) { return values_[index(s, h)]; }

  std::span<const double> slice(int h) const {
    check_h(h);
    return {&values_[static_cast<std::size_t>(h) * cells_], cells_};
  }
  std::span<double> slice(int h) {
    check_h(h);
    return {&values_[static_cast<std::size_t>(h) * cells_], cells_};
  }

 private:
  std::size_t index(GridState s, int h) const {
    check_h(h);
    return static_cast<std::size_t>(h) * cells_ + spec_->cell_index(s);
  }

  void check_h(int h) const {
    if (h < 0 || h > h_max_) {
      throw std::invalid_argument("dp: horizon out of range");
    }
  }

  const GridSpec* spec_;
  int h_max_;
  std::size_t cells_;
  std::vector<double> values_;
};

namespace detail {

inline void check_dp_args(std::size_t vbar_size, std::size_t cells, int h,
                          double gamma) {
  if (h < 0 || h > 10) {
    throw std::invalid_argument("dp: horizon must be in [0, 10]");
  }
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("dp: gamma must be in [0, 1)");
  }
  if (vbar_size != cells) {
    throw std::invalid_argument("dp: bootstrap table has the wrong size");
  }
}

}  // namespace detail

// Exact finite-horizon policy evaluation:
//   v[0] = vbar,
//   v[h](s) = sum_a pi(a|s) ( R(s,a) + gamma * E_{s' ~ dyn}[ v[h-1](s') ] ).
inline ValueTable exact_h_values(const DpDynamics& dyn, const PolicyTable& pi,
                                 std::span<const double> vbar, int h_max,
                                 double gamma) {
  const GridSpec& spec = dyn.spec();
  const std::size_t cells =
      static_cast<std::size_t>(spec.width()) * spec.height();
  detail::check_dp_args(vbar.size(), cells, h_max, gamma);
  ValueTable table(spec, h_max);
  std::copy(vbar.begin(), vbar.end(), table.slice(0).begin());
  for (int h = 1; h <= h_max; ++h) {
    const auto prev = table.slice(h - 1);
    const auto cur = table.slice(h);
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        const GridState s{x, y};
        const auto probs = pi.at(s);
        double v = 0.0;
        for (Action a : kAllActions) {
          const double pa = probs[action_index(a)];
          if (pa == 0.0) continue;
          double succ = 0.0;
          for (const WeightedNext& wn : dyn.next_of(s, a)) {
            succ += wn.prob * prev[spec.cell_index(wn.next)];
          }
          v += pa * (dyn.reward(s, a) + gamma * succ);
        }
        cur[spec.cell_index(s)] = v;
      }
    }
  }
  return table;
}

// Exact cumulative model error under the policy: the same backward induction
// run in the error MDP, which keeps the *true* transitions and replaces the
// reward with the model's prediction gap W. The goal is absorbing with zero
// W, matching episode termination.
inline ValueTable exact_model_error(const DynamicsModel& model,
                                    const PolicyTable& pi, int h_max,
                                    double gamma) {
  if (!model.enumerable()) {
    throw std::invalid_argument("dp: model has no enumerable transitions");
  }
  const GridSpec& spec = model.spec();
  const std::size_t cells =
      static_cast<std::size_t>(spec.width()) * spec.height();
  detail::check_dp_args(cells, cells, h_max, gamma);
  std::vector<double> w(cells * kNumActions, 0.0);
  for (int y = 0; y < spec.height(); ++y) {
    for (int x = 0; x < spec.width(); ++x) {
      const GridState s{x, y};
      if (s == spec.goal()) continue;
      for (Action a : kAllActions) {
        w[static_cast<std::size_t>(spec.cell_index(s)) * kNumActions +
          action_index(a)] = model.w_reward(s, a, apply_move(spec, s, a).next);
      }
    }
  }
  ValueTable table(spec, h_max);
  for (int h = 1; h <= h_max; ++h) {
    const auto prev = table.slice(h - 1);
    const auto cur = table.slice(h);
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        const GridState s{x, y};
        const auto probs = pi.at(s);
        double v = 0.0;
        for (Action a : kAllActions) {
          const double pa = probs[action_index(a)];
          if (pa == 0.0) continue;
          if (s == spec.goal()) {
            v += pa * gamma * prev[spec.cell_index(s)];
            continue;
          }
          const GridState succ = apply_move(spec, s, a).next;
          v += pa * (w[static_cast<std::size_t>(spec.cell_index(s)) *
                           kNumActions +
                       action_index(a)] +
                     gamma * prev[spec.cell_index(succ)]);
        }
        cur[spec.cell_index(s)] = v;
      }
    }
  }
  return table;
}

// Numerical audit of the value-error bound: the exact gap between model-side
// and environment-side H-step values against the bound
//   |gap(s)| <= K * gamma * E_exact(s, H),
// with K estimated as the largest per-unit value difference across adjacent
// open-cell pairs of the model-side tables (a finite-difference stand-in for
// the Lipschitz constant of the estimated values). The estimate is a lower
// bound on the continuous constant, so violations are reported, not fatal;
// the strict zero-error implication (zero E forces zero gap) is what callers
// should hard-assert.
struct BoundReport {
  double k_hat = 0.0;
  std::vector<double> lhs;    // per cell: |model-side value - env-side value|
  std::vector<double> rhs;    // per cell: k_hat * gamma * E_exact(s, H)
  std::vector<double> err_h;  // per cell: E_exact(s, H)
  std::vector<GridState> violations;  // open cells with lhs > rhs + 1e-12
};

inline BoundReport value_bound_check(const DynamicsModel& model,
                                  const PolicyTable& pi,
                                  std::span<const double> vbar, int h_max,
                                  double gamma) {
  const GridSpec& spec = model.spec();
  const ValueTable model_side =
      exact_h_values(DpDynamics::from_model(model), pi, vbar, h_max, gamma);
  const ValueTable env_side =
      exact_h_values(DpDynamics::from_env(spec), pi, vbar, h_max, gamma);
  const ValueTable err = exact_model_error(model, pi, h_max, gamma);

  BoundReport report;
  for (int h = 0; h <= h_max; ++h) {
    for (const GridState& s : spec.open_cells()) {
      for (const GridState n : {GridState{s.x + 1, s.y}, GridState{s.x, s.y + 1}}) {
        if (!spec.open(n)) continue;
        report.k_hat = std::max(
            report.k_hat, std::abs(model_side.at(s, h) - model_side.at(n, h)));
      }
    }
  }

  const std::size_t cells =
      static_cast<std::size_t>(spec.width()) * spec.height();
  report.lhs.resize(cells);
  report.rhs.resize(cells);
  report.err_h.resize(cells);
  for (int y = 0; y < spec.height(); ++y) {
    for (int x = 0; x < spec.width(); ++x) {
      const GridState s{x, y};
      const int c = spec.cell_index(s);
      report.lhs[c] = std::abs(model_side.at(s, h_max) - env_side.at(s, h_max));
      report.err_h[c] = err.at(s, h_max);
      report.rhs[c] = report.k_hat * gamma * report.err_h[c];
    }
  }
  for (const GridState& s : spec.open_cells()) {
    const int c = spec.cell_index(s);
    if (report.lhs[c] > report.rhs[c] + 1e-12) report.violations.push_back(s);
  }
  return report;
}

// One row per (cell, horizon): x,y,h,value.
inline void write_value_table_csv(std::ostream& os, const ValueTable& table) {
  const GridSpec& spec = table.spec();
  os << "x,y,h,value\n";
  char buf[64];
  for (int h = 0; h <= table.h_max(); ++h) {
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g\n", x, y, h,
                      table.at({x, y}, h));
        os << buf;
      }
    }
  }
}

}  // namespace adamve
