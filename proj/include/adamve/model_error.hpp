#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adamve/approx.hpp"
#include "adamve/dynamics.hpp"
#include "adamve/grid.hpp"
#include "adamve/replay.hpp"
#include "adamve/rng.hpp"

namespace adamve {

// Which fixed policy the cumulative model error is learned under.
//   Conservative: the successor action maximizes the target error, giving a
//                 worst-case (largest) error estimate.
//   Greedy:       the successor action maximizes the target Q-value, tracking
//                 the error along the improving policy.
//   Replay:       no action selection; a state-value function learned
//                 on-policy from whatever the buffer contains.
enum class ReferenceKind { Conservative, Greedy, Replay };

inline const char* reference_kind_name(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::Conservative: return "conservative";
    case ReferenceKind::Greedy: return "greedy";
    case ReferenceKind::Replay: return "replay";
  }
  return "?";
}

inline ReferenceKind parse_reference_kind(std::string_view name) {
  if (name == "conservative") return ReferenceKind::Conservative;
  if (name == "greedy") return ReferenceKind::Greedy;
  if (name == "replay") return ReferenceKind::Replay;
  throw std::invalid_argument("model-error: unknown reference kind '" +
                              std::string(name) + "'");
}

// TD-learned cumulative model error. Estimates how much predicted-vs-real
// next-state distance accrues over h model steps from a state: the h-step
// return of the W-reward under the reference policy. Conservative and Greedy
// learn the action form E(s,a,h); Replay learns the state form E(s,h). The
// h = 0 heads are pinned to zero (no steps, no error) and every read is
// clamped to >= 0, since transient negative estimates would distort the
// horizon weights downstream.
class ErrorFunction {
 public:
  static ErrorFunction tabular(const GridSpec& spec, ReferenceKind kind,
                               int h_max, double gamma) {
    ErrorFunction e(kind, h_max, gamma);
    e.online_ = Approximator::tabular(spec.width(), spec.height(),
                                      e.head_count());
    e.online_.set_optimizer({OptimConfig::Kind::Adam, 1e-3});
    e.finish_init();
    return e;
  }

  static ErrorFunction mlp(const GridSpec& spec, ReferenceKind kind, int h_max,
                           double gamma, std::vector<int> hidden, Rng& init) {
    ErrorFunction e(kind, h_max, gamma);
    e.online_ = Approximator::mlp_state(FeatureEncoding::ScaledXY, spec.width(),
                                        spec.height(), std::move(hidden),
                                        e.head_count(), init);
    e.online_.set_optimizer({OptimConfig::Kind::Adam, 1e-4});
    e.finish_init();
    return e;
  }

  ReferenceKind kind() const { return kind_; }
  bool action_form() const { return kind_ != ReferenceKind::Replay; }
  int h_max() const { return h_max_; }
  double gamma() const { return gamma_; }
  Approximator& online() { return online_; }
  const Approximator& online() const { return online_; }
  Approximator& target() { return target_; }
  const Approximator& target() const { return target_; }

  void polyak(double mix) { polyak_update(target_, online_, mix); }

  // One TD regression step over the batch: for every sample and every
  // h in [1, h_max], push the online estimate at (s, a, h) toward
  //   W(s, a) + gamma * (target estimate at the successor, horizon h - 1),
  // where the successor action follows the reference kind and goal-terminal
  // samples bootstrap with zero. Returns the pre-step mean loss.
  double td_update(std::span<const Transition> batch,
                   const DynamicsModel& model,
                   const Approximator* qbar = nullptr) {
    if (batch.empty()) throw std::invalid_argument("model-error: empty batch");
    if (kind_ == ReferenceKind::Greedy && qbar == nullptr) {
      throw std::invalid_argument(
          "model-error: greedy updates need the target Q function");
    }
    targets_.clear();
    for (const Transition& t : batch) {
      const double w = model.w_reward(t.s, t.a, t.next);
      if (!t.goal_terminal) next_errors(t.next, qbar);
      for (int h = 1; h <= h_max_; ++h) {
        const double boot = t.goal_terminal ? 0.0 : boot_[h - 1];
        targets_.push_back(
            {to_vec(t.s), head(t.a, h), w + gamma_ * boot});
      }
    }
    return online_.grad_step(targets_);
  }

  // Online estimate for one action and horizon (action forms only).
  double action_error(GridState s, Action a, int h) const {
    require_action_form();
    check_h(h);
    return clamp0(online_.eval_state_head(to_vec(s), head(a, h)));
  }

  // Online estimate aggregated over actions the way the reference kind
  // prescribes; the state form reads its head directly. Greedy aggregation
  // needs the target Q function it follows.
  double eval_state_error(GridState s, int h,
                          const Approximator* qbar = nullptr) const {
    check_h(h);
    if (h == 0) return 0.0;
    switch (kind_) {
      case ReferenceKind::Replay:
        return clamp0(online_.eval_state_head(to_vec(s), h));
      case ReferenceKind::Conservative: {
        double best = 0.0;
        for (Action a : kAllActions) {
          best = std::max(best,
                          clamp0(online_.eval_state_head(to_vec(s), head(a, h))));
        }
        return best;
      }
      case ReferenceKind::Greedy: {
        if (qbar == nullptr) {
          throw std::invalid_argument(
              "model-error: greedy aggregation needs the target Q function");
        }
        const Action pick = argmax_q(*qbar, s);
        return clamp0(online_.eval_state_head(to_vec(s), head(pick, h)));
      }
    }
    throw std::logic_error("model-error: bad kind");
  }

  void save(std::ostream& os,
            const std::map<std::string, std::string>& extra = {}) const {
    std::map<std::string, std::string> meta = extra;
    meta["refkind"] = reference_kind_name(kind_);
    meta["h_max"] = std::to_string(h_max_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", gamma_);
    meta["gamma"] = buf;
    ApproximatorIo::save(os, online_, meta);
  }

  static ErrorFunction load(std::istream& is) {
    ApproximatorIo::Loaded got = ApproximatorIo::load(is);
    const auto need = [&](const char* key) -> const std::string& {
      auto it = got.meta.find(key);
      if (it == got.meta.end()) {
        throw std::runtime_error(std::string("model-error checkpoint: missing ") +
                                 key);
      }
      return it->second;
    };
    ErrorFunction e(parse_reference_kind(need("refkind")),
                    std::stoi(need("h_max")), std::stod(need("gamma")));
    if (got.approx.heads() != e.head_count()) {
      throw std::runtime_error("model-error checkpoint: head count mismatch");
    }
    e.online_ = std::move(got.approx);
    e.target_ = e.online_;
    return e;
  }

 private:
  ErrorFunction(ReferenceKind kind, int h_max, double gamma)
      : kind_(kind), h_max_(h_max), gamma_(gamma) {
    if (h_max < 1) throw std::invalid_argument("model-error: h_max must be >= 1");
    if (!(gamma >= 0.0) || gamma >= 1.0) {
      throw std::invalid_argument("model-error: gamma must be in [0, 1)");
    }
  }

  int head_count() const {
    return action_form() ? kNumActions * (h_max_ + 1) : h_max_ + 1;
  }

  int head(Action a, int h) const {
    return action_form() ? action_index(a) * (h_max_ + 1) + h : h;
  }

  void finish_init() {
    std::vector<int> zero_heads;
    if (action_form()) {
      for (int a = 0; a < kNumActions; ++a) zero_heads.push_back(a * (h_max_ + 1));
    } else {
      zero_heads.push_back(0);
    }
    online_.pin_heads(zero_heads);
    target_ = online_;
    row_.resize(online_.heads());
    boot_.resize(h_max_);
  }

  void require_action_form() const {
    if (!action_form()) {
      throw std::logic_error("model-error: state form has no per-action read");
    }
  }

  void check_h(int h) const {
    if (h < 0 || h > h_max_) {
      throw std::invalid_argument("model-error: horizon out of range");
    }
  }

  static double clamp0(double v) { return v < 0.0 ? 0.0 : v; }

  static Action argmax_q(const Approximator& q, GridState s) {
    double row[kNumActions];
    q.eval_state_into(to_vec(s), std::span<double>(row, kNumActions));
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
      if (row[a] > row[best]) best = a;
    }
    return static_cast<Action>(best);
  }

  // Fills boot_[h-1] with the target-side bootstrap for horizon h, reading
  // the whole head row once per successor state.
  void next_errors(GridState next, const Approximator* qbar) {
    target_.eval_state_into(to_vec(next), row_);
    switch (kind_) {
      case ReferenceKind::Replay:
        for (int h = 1; h <= h_max_; ++h) boot_[h - 1] = clamp0(row_[h - 1]);
        return;
      case ReferenceKind::Conservative:
        for (int h = 1; h <= h_max_; ++h) {
          double best = 0.0;
          for (int a = 0; a < kNumActions; ++a) {
            best = std::max(best, clamp0(row_[a * (h_max_ + 1) + h - 1]));
          }
          boot_[h - 1] = best;
        }
        return;
      case ReferenceKind::Greedy: {
        if (qbar == nullptr) {
          throw std::invalid_argument(
              "model-error: greedy updates need the target Q function");
        }
        const int pick = action_index(argmax_q(*qbar, next));
        for (int h = 1; h <= h_max_; ++h) {
          boot_[h - 1] = clamp0(row_[pick * (h_max_ + 1) + h - 1]);
        }
        return;
      }
    }
    throw std::logic_error("model-error: bad kind");
  }

  ReferenceKind kind_;
  int h_max_;
  double gamma_;
  Approximator online_;
  Approximator target_;
  std::vector<double> row_;
  std::vector<double> boot_;
  std::vector<StateTarget> targets_;
};

// The ceil(keep_percent/100 * n) batch entries whose states have the lowest
// learned model error at horizon h_sml; what the model-fitting step trains on.
inline std::vector<Transition> select_for_sml(std::span<const Transition> batch,
                                              const ErrorFunction& errfn,
                                              int h_sml, double keep_percent,
                                              const Approximator* qbar = nullptr) {
  return select_for_sml(
      batch,
      [&](GridState s) { return errfn.eval_state_error(s, h_sml, qbar); },
      keep_percent);
}

}  // namespace adamve
