#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adamve/approx.hpp"
#include "adamve/dynamics.hpp"
#include "adamve/grid.hpp"
#include "adamve/model_error.hpp"
#include "adamve/replay.hpp"
#include "adamve/rng.hpp"
#include "adamve/value_expansion.hpp"

namespace adamve {

// Which bootstrap target the Q regression uses:
//   Dqn     max_a Qbar(s', a)
//   Mve     the single expanded value v[mve_h]
//   MveAvg  the uniform average of v[0..h_max]
//   AdaMve  the error-weighted mixture of v[0..h_max]
enum class Algorithm { Dqn, Mve, MveAvg, AdaMve };

inline std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Mve: return "mve";
    case Algorithm::MveAvg: return "mve_avg";
    case Algorithm::AdaMve: return "adamve";
  }
  throw std::logic_error("algorithm: bad enum value");
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "dqn") return Algorithm::Dqn;
  if (name == "mve") return Algorithm::Mve;
  if (name == "mve_avg") return Algorithm::MveAvg;
  if (name == "adamve") return Algorithm::AdaMve;
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

// Hyperparameters for Agent. The defaults are the values used throughout
// the grid experiments; only the learning rates depend on the
// representation (tabular Q and errors both train well at 1e-3, the MLP
// error head prefers 1e-4).
struct AgentConfig {
  Algorithm algorithm = Algorithm::AdaMve;
  ReferenceKind reference = ReferenceKind::Conservative;
  bool tabular = true;
  std::vector<int> hidden = {200, 200, 200};  // MLP layers when !tabular

  double gamma = 0.98;
  double eps = 0.2;    // exploration rate, constant over training
  double tau = 0.01;   // softmax temperature over horizons
  int h_max = 5;       // deepest expansion for MveAvg / AdaMve
  int mve_h = 5;       // fixed depth for Mve

  int batch = 128;
  double q_lr = 1e-3;
  double err_lr = 1e-3;
  double model_lr = 1e-3;
  std::size_t buffer_capacity = 1000000;
  std::size_t warmup = 2000;
  double polyak_mix = 1e-3;  // applied to every target net, every step

  bool fit_model = false;    // one fit step per env step (learned model only)
  bool sml = false;          // fit only the high-error share of each batch
  int h_sml = 1;             // horizon whose error ranks states for sml
  double sml_percent = 50.0; // share of the batch kept by sml
};

struct EvalResult {
  double mean_return = 0.0;
  std::vector<double> returns;  // one undiscounted return per episode
};

// Greedy episodes under q from uniformly random starts; returns the
// undiscounted return of each episode. Episodes end at the goal or at the
// step cap.
inline EvalResult evaluate_greedy(const GridSpec& spec, const Approximator& q,
                                  int episodes, Rng& rng) {
  if (episodes <= 0) {
    throw std::invalid_argument("evaluate_greedy: episodes must be positive");
  }
  GridEnv env(spec);
  EvalResult out;
  out.returns.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    GridState pos = env.reset(rng);
    double ret = 0.0;
    while (!env.done()) {
      const GridEnv::StepResult r = env.step(greedy_action(q, pos));
      ret += r.reward;
      pos = r.next;
    }
    out.returns.push_back(ret);
    out.mean_return += ret;
  }
  out.mean_return /= episodes;
  return out;
}

// Epsilon-greedy over the Q heads; ties go to the lowest action index.
// Always consumes exactly one uniform draw when eps > 0 (plus one more for
// the random branch), so the stream layout is independent of Q.
inline Action act_eps_greedy(const Approximator& q, GridState s, double eps,
                             Rng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("act_eps_greedy: eps must be in [0, 1]");
  }
  if (eps > 0.0 && rng.uniform01() < eps) {
    return kAllActions[rng.below(kNumActions)];
  }
  return greedy_action(q, s);
}

// One environment-interaction loop: epsilon-greedy acting into a replay
// buffer, Q-learning with a pluggable bootstrap target, and optionally a
// model fit step and a TD step on the cumulative model error. Every
// train_step advances the environment by one transition and, once the
// buffer is warm, applies exactly one Q gradient step.
//
// All randomness comes from per-purpose streams derived from the seed, so
// reruns are byte-identical and evaluation never perturbs training.
class Agent {
 public:
  struct StepInfo {
    double reward = 0.0;
    bool episode_done = false;
    bool updated = false;  // false until the buffer reaches its warm-up fill
    double q_loss = 0.0;
    double err_loss = 0.0;
    double model_loss = 0.0;
  };

  Agent(const GridSpec& spec, DynamicsModel model, AgentConfig cfg,
        std::uint64_t seed)
      : spec_(&spec),
        model_(std::move(model)),
        cfg_(std::move(cfg)),
        seed_(seed),
        env_(spec),
        buffer_(cfg_.buffer_capacity, cfg_.warmup),
        reset_rng_(Rng::stream(seed, "env-reset")),
        explore_rng_(Rng::stream(seed, "explore")),
        batch_rng_(Rng::stream(seed, "batch")),
        rollout_rng_(Rng::stream(seed, "rollout")),
        q_(make_q(spec, cfg_, seed)),
        qbar_(q_) {
    validate();
    if (cfg_.algorithm == Algorithm::AdaMve) {
      errfn_.emplace(make_error_function(spec, cfg_, seed));
    }
    state_ = env_.reset(reset_rng_);
  }

  StepInfo train_step() {
    StepInfo info;

    // (1) Act, advance the environment, store the transition.
    const GridState s = state_;
    const Action a = act_eps_greedy(q_, s, cfg_.eps, explore_rng_);
    const GridEnv::StepResult r = env_.step(a);
    buffer_.push({s, a, r.reward, r.next, r.entered_goal});
    info.reward = r.reward;
    info.episode_done = r.done;
    state_ = r.done ? env_.reset(reset_rng_) : r.next;
    ++steps_;
    if (!buffer_.warm()) return info;
    info.updated = true;

    // (2) Refine the learned model on (a high-error share of) a batch.
    if (cfg_.fit_model) {
      const auto batch = sample_batch();
      if (cfg_.sml) {
        sml_keep_ = select_for_sml(batch, *errfn_, cfg_.h_sml,
                                   cfg_.sml_percent, &qbar_);
        info.model_loss = model_.fit_step(sml_keep_, cfg_.model_lr);
      } else {
        info.model_loss = model_.fit_step(batch, cfg_.model_lr);
      }
    }

    // (3) TD step on the cumulative model error.
    if (errfn_.has_value() && !errfn_frozen_) {
      info.err_loss = errfn_->td_update(sample_batch(), model_, &qbar_);
    }

    // (4) Q regression toward the algorithm's bootstrap target.
    const auto batch = sample_batch();
    q_targets_.clear();
    for (const Transition& t : batch) {
      q_targets_.push_back({to_vec(t.s), action_index(t.a),
                            bootstrap_target(t)});
    }
    info.q_loss = q_.grad_step(q_targets_);

    // (5) Target-network mixing.
    polyak_update(qbar_, q_, cfg_.polyak_mix);
    if (errfn_.has_value() && !errfn_frozen_) errfn_->polyak(cfg_.polyak_mix);
    return info;
  }

  // Bootstrap target y for one replayed transition: the observed reward,
  // plus the discounted tail unless the episode ended by reaching the goal
  // (timeouts are a horizon artifact and still bootstrap). Public so tests
  // can check termination handling and target composition directly; note a
  // stochastic model draws rollout noise from the agent's rollout stream.
  double bootstrap_target(const Transition& t) {
    if (t.goal_terminal) return t.reward;
    return t.reward + cfg_.gamma * tail_value(t.next);
  }

  // Greedy episodes with the online Q, on a private environment and a
  // per-call random stream: evaluation neither touches the buffer nor
  // shifts any training stream, and repeating an eval_index repeats its
  // returns exactly.
  EvalResult evaluate(int episodes, std::uint64_t eval_index) const {
    Rng rng = Rng::stream(seed_, "eval", eval_index);
    return evaluate_greedy(*spec_, q_, episodes, rng);
  }

  // Install a pre-trained error function (e.g. one checkpointed on another
  // layout). Frozen means steps (3) and the error half of (5) stop: the
  // estimates are used as-is for weighting.
  void install_error_function(ErrorFunction e, bool freeze) {
    if (cfg_.algorithm != Algorithm::AdaMve) {
      throw std::invalid_argument(
          "agent: only the adaptive algorithm uses an error function");
    }
    if (e.h_max() != cfg_.h_max || e.gamma() != cfg_.gamma) {
      throw std::invalid_argument(
          "agent: installed error function disagrees on h_max or gamma");
    }
    if (e.online().kind() == Approximator::Kind::Tabular &&
        e.online().num_params() !=
            static_cast<std::size_t>(spec_->num_cells()) *
                static_cast<std::size_t>(e.online().heads())) {
      throw std::invalid_argument(
          "agent: installed error table does not match the grid");
    }
    errfn_ = std::move(e);
    errfn_frozen_ = freeze;
  }

  // Per-horizon online error estimates at s, h = 0..h_max.
  std::vector<double> state_errors(GridState s) const {
    const ErrorFunction& e = error_function();
    std::vector<double> errs(static_cast<std::size_t>(cfg_.h_max) + 1);
    for (int h = 0; h <= cfg_.h_max; ++h) {
      errs[static_cast<std::size_t>(h)] = e.eval_state_error(s, h, &qbar_);
    }
    return errs;
  }

  // Softmax weights the adaptive target would use at s.
  std::vector<double> horizon_weights_at(GridState s) const {
    return horizon_weights(state_errors(s), cfg_.tau);
  }

  // Mean expansion depth at s under those weights.
  double expected_horizon(GridState s) const {
    return weighted_avg_horizon(horizon_weights_at(s));
  }

  const GridSpec& spec() const { return *spec_; }
  const AgentConfig& config() const { return cfg_; }
  const DynamicsModel& model() const { return model_; }
  DynamicsModel& model() { return model_; }
  const Approximator& q() const { return q_; }
  Approximator& q() { return q_; }
  const Approximator& q_target() const { return qbar_; }
  Approximator& q_target() { return qbar_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::int64_t steps_done() const { return steps_; }
  bool error_function_frozen() const { return errfn_frozen_; }
  bool has_error_function() const { return errfn_.has_value(); }

  const ErrorFunction& error_function() const {
    if (!errfn_.has_value()) {
      throw std::logic_error("agent: algorithm trains no error function");
    }
    return *errfn_;
  }
  ErrorFunction& error_function() {
    if (!errfn_.has_value()) {
      throw std::logic_error("agent: algorithm trains no error function");
    }
    return *errfn_;
  }

 private:
  static Approximator make_q(const GridSpec& spec, const AgentConfig& cfg,
                             std::uint64_t seed) {
    Approximator q = [&] {
      if (cfg.tabular) {
        return Approximator::tabular(spec.width(), spec.height(),
                                     kNumActions);
      }
      Rng init = Rng::stream(seed, "q-init");
      return Approximator::mlp_state(FeatureEncoding::ScaledXY, spec.width(),
                                     spec.height(), cfg.hidden, kNumActions,
                                     init);
    }();
    q.set_optimizer({OptimConfig::Kind::Adam, cfg.q_lr});
    return q;
  }

  static ErrorFunction make_error_function(const GridSpec& spec,
                                           const AgentConfig& cfg,
                                           std::uint64_t seed) {
    ErrorFunction e = [&] {
      if (cfg.tabular) {
        return ErrorFunction::tabular(spec, cfg.reference, cfg.h_max,
                                      cfg.gamma);
      }
      Rng init = Rng::stream(seed, "error-init");
      return ErrorFunction::mlp(spec, cfg.reference, cfg.h_max, cfg.gamma,
                                cfg.hidden, init);
    }();
    e.online().set_optimizer({OptimConfig::Kind::Adam, cfg.err_lr});
    return e;
  }

  void validate() const {
    if (!(cfg_.gamma >= 0.0 && cfg_.gamma < 1.0)) {
      throw std::invalid_argument("agent: gamma must be in [0, 1)");
    }
    if (!(cfg_.eps >= 0.0 && cfg_.eps <= 1.0)) {
      throw std::invalid_argument("agent: eps must be in [0, 1]");
    }
    if (cfg_.batch < 1) {
      throw std::invalid_argument("agent: batch must be positive");
    }
    if (cfg_.q_lr <= 0.0 || cfg_.err_lr <= 0.0 || cfg_.model_lr <= 0.0) {
      throw std::invalid_argument("agent: learning rates must be positive");
    }
    if (!(cfg_.polyak_mix > 0.0 && cfg_.polyak_mix <= 1.0)) {
      throw std::invalid_argument("agent: polyak_mix must be in (0, 1]");
    }
    if (cfg_.algorithm == Algorithm::Mve && cfg_.mve_h < 1) {
      throw std::invalid_argument("agent: mve_h must be at least 1");
    }
    if (cfg_.algorithm == Algorithm::AdaMve && cfg_.tau <= 0.0) {
      throw std::invalid_argument("agent: tau must be positive");
    }
    if (cfg_.fit_model && model_.kind() != ModelKind::Learned) {
      throw std::invalid_argument("agent: only a learned model can be fit");
    }
    if (cfg_.sml) {
      if (!cfg_.fit_model || cfg_.algorithm != Algorithm::AdaMve) {
        throw std::invalid_argument(
            "agent: sml needs a fitted model and the adaptive algorithm");
      }
      if (cfg_.h_sml < 1 || cfg_.h_sml > cfg_.h_max) {
        throw std::invalid_argument("agent: h_sml must be in [1, h_max]");
      }
      if (!(cfg_.sml_percent > 0.0 && cfg_.sml_percent <= 100.0)) {
        throw std::invalid_argument(
            "agent: sml_percent must be in (0, 100]");
      }
    }
  }

  std::span<const Transition> sample_batch() {
    batch_.resize(static_cast<std::size_t>(cfg_.batch));
    buffer_.sample(batch_rng_, batch_);
    return batch_;
  }

  // Value of the greedy continuation from s under the current algorithm.
  double tail_value(GridState s) {
    switch (cfg_.algorithm) {
      case Algorithm::Dqn:
        return max_q_value(qbar_, s);
      case Algorithm::Mve:
        values_ = rollout_values(model_, q_, qbar_, s, cfg_.mve_h, cfg_.gamma,
                                 rollout_rng_);
        return values_.back();
      case Algorithm::MveAvg: {
        values_ = rollout_values(model_, q_, qbar_, s, cfg_.h_max, cfg_.gamma,
                                 rollout_rng_);
        const double sum =
            std::accumulate(values_.begin(), values_.end(), 0.0);
        return sum / static_cast<double>(values_.size());
      }
      case Algorithm::AdaMve: {
        values_ = rollout_values(model_, q_, qbar_, s, cfg_.h_max, cfg_.gamma,
                                 rollout_rng_);
        weights_ = horizon_weights(state_errors(s), cfg_.tau);
        return mixed_target(values_, weights_);
      }
    }
    throw std::logic_error("agent: bad algorithm enum value");
  }

  const GridSpec* spec_;
  DynamicsModel model_;
  AgentConfig cfg_;
  std::uint64_t seed_;
  GridEnv env_;
  ReplayBuffer buffer_;
  Rng reset_rng_;
  Rng explore_rng_;
  Rng batch_rng_;
  Rng rollout_rng_;
  Approximator q_;
  Approximator qbar_;
  std::optional<ErrorFunction> errfn_;
  bool errfn_frozen_ = false;
  std::int64_t steps_ = 0;
  GridState state_{0, 0};

  std::vector<Transition> batch_;
  std::vector<Transition> sml_keep_;
  std::vector<StateTarget> q_targets_;
  std::vector<double> values_;
  std::vector<double> weights_;
};

}  // namespace adamve
