#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adamve/approx.hpp"
#include "adamve/grid.hpp"
#include "adamve/replay.hpp"
#include "adamve/rng.hpp"

namespace adamve {

enum class ModelKind { Oracle, ThreeRoom, NoWall, Learned };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Oracle: return "oracle";
    case ModelKind::ThreeRoom: return "threeroom";
    case ModelKind::NoWall: return "nowall";
    case ModelKind::Learned: return "learned";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "oracle") return ModelKind::Oracle;
  if (name == "threeroom") return ModelKind::ThreeRoom;
  if (name == "nowall") return ModelKind::NoWall;
  if (name == "learned") return ModelKind::Learned;
  throw std::invalid_argument("dynamics: unknown model kind '" +
                              std::string(name) + "'");
}

// One entry of an enumerable predicted next-state distribution.
struct WeightedNext {
  GridState next;
  double prob = 0.0;
};

// Approximate transition model of the gridworld. Four variants:
//   Oracle:    the true motion rule.
//   ThreeRoom: true motion everywhere except the bottom-left room, where it
//              predicts a uniform draw over every open cell.
//   NoWall:    straight-line motion that passes through interior walls (and
//              may land on one) but is still blocked by the outer boundary.
//   Learned:   an MLP regressor from (scaled position, one-hot action) to
//              the scaled next position; predictions are real-valued points.
// The first three are fixed closed-form dynamics; only Learned has
// parameters and can be fit.
class DynamicsModel {
 public:
  static DynamicsModel oracle(const GridSpec& spec) {
    return DynamicsModel(ModelKind::Oracle, spec);
  }

  static DynamicsModel no_wall(const GridSpec& spec) {
    return DynamicsModel(ModelKind::NoWall, spec);
  }

  static DynamicsModel three_room(const GridSpec& spec) {
    DynamicsModel m(ModelKind::ThreeRoom, spec);
    // Mean distance from each cell to the uniform open-cell distribution,
    // tabulated once so w_reward stays O(1) per call.
    const auto& open = spec.open_cells();
    m.mean_open_dist_.resize(static_cast<std::size_t>(spec.width()) *
                             spec.height());
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        const Vec2 p = to_vec({x, y});
        double acc = 0.0;
        for (const GridState& c : open) acc += distance(p, to_vec(c));
        m.mean_open_dist_[m.spec_->cell_index({x, y})] =
            acc / static_cast<double>(open.size());
      }
    }
    return m;
  }

  static DynamicsModel learned(const GridSpec& spec, std::vector<int> hidden,
                               Rng& init) {
    DynamicsModel m(ModelKind::Learned, spec);
    m.net_ = Approximator::mlp_raw(2 + kNumActions, std::move(hidden), 2, init);
    m.feature_scale_ =
        1.0 / static_cast<double>(std::max(spec.width(), spec.height()) - 1);
    return m;
  }

  ModelKind kind() const { return kind_; }
  const GridSpec& spec() const { return *spec_; }
  bool enumerable() const { return kind_ != ModelKind::Learned; }

  // One draw from the predicted next-state distribution. Deterministic
  // variants do not consume the generator.
  Vec2 predict_sample(GridState s, Action a, Rng& rng) const {
    switch (kind_) {
      case ModelKind::Oracle:
        return to_vec(apply_move(*spec_, s, a).next);
      case ModelKind::NoWall:
        return to_vec(no_wall_next(s, a));
      case ModelKind::ThreeRoom: {
        if (!in_bottom_left(s)) return to_vec(apply_move(*spec_, s, a).next);
        const auto& open = spec_->open_cells();
        return to_vec(open[rng.below(open.size())]);
      }
      case ModelKind::Learned:
        return learned_predict(s, a);
    }
    throw std::logic_error("dynamics: bad kind");
  }

  // Full support of the predicted distribution, for exact expectations.
  std::vector<WeightedNext> transitions(GridState s, Action a) const {
    switch (kind_) {
      case ModelKind::Oracle:
        return {{apply_move(*spec_, s, a).next, 1.0}};
      case ModelKind::NoWall:
        return {{no_wall_next(s, a), 1.0}};
      case ModelKind::ThreeRoom: {
        if (!in_bottom_left(s)) return {{apply_move(*spec_, s, a).next, 1.0}};
        const auto& open = spec_->open_cells();
        const double p = 1.0 / static_cast<double>(open.size());
        std::vector<WeightedNext> out;
        out.reserve(open.size());
        for (const GridState& c : open) out.push_back({c, p});
        return out;
      }
      case ModelKind::Learned:
        throw std::logic_error(
            "dynamics: learned model has no enumerable transition support");
    }
    throw std::logic_error("dynamics: bad kind");
  }

  // Expected Euclidean distance between the model's predicted next state and
  // the next state the environment actually produced. Zero exactly when the
  // prediction matches the truth; this is the reward signal the error
  // function accumulates.
  double w_reward(GridState s, Action a, GridState true_next) const {
    switch (kind_) {
      case ModelKind::Oracle:
        return distance(to_vec(apply_move(*spec_, s, a).next),
                        to_vec(true_next));
      case ModelKind::NoWall:
        return distance(to_vec(no_wall_next(s, a)), to_vec(true_next));
      case ModelKind::ThreeRoom:
        if (!in_bottom_left(s)) {
          return distance(to_vec(apply_move(*spec_, s, a).next),
                          to_vec(true_next));
        }
        return mean_open_dist_[spec_->cell_index(true_next)];
      case ModelKind::Learned:
        return distance(learned_predict(s, a), to_vec(true_next));
    }
    throw std::logic_error("dynamics: bad kind");
  }

  // One regression step of the learned variant toward the batch's observed
  // next states (both coordinates, feature scale). Returns the pre-step loss.
  double fit_step(std::span<const Transition> batch, double lr) {
    if (kind_ != ModelKind::Learned) {
      throw std::logic_error("dynamics: model fitting requires the learned variant");
    }
    if (batch.empty()) throw std::invalid_argument("dynamics: empty batch");
    OptimConfig cfg = net_.optimizer();
    cfg.lr = lr;
    net_.set_optimizer(cfg);
    const int in_dim = 2 + kNumActions;
    std::vector<double> inputs(batch.size() * 2 * in_dim, 0.0);
    std::vector<HeadTarget> rows(batch.size() * 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double* row = &inputs[i * 2 * in_dim];
      encode(batch[i].s, batch[i].a, row);
      std::copy(row, row + in_dim, row + in_dim);
      rows[i * 2] = {0, batch[i].next.x * feature_scale_};
      rows[i * 2 + 1] = {1, batch[i].next.y * feature_scale_};
    }
    return net_.grad_step_raw(inputs, rows);
  }

  const Approximator& net() const { return require_net(); }
  Approximator& net() {
    require_net();
    return net_;
  }

 private:
  DynamicsModel(ModelKind kind, const GridSpec& spec)
      : kind_(kind), spec_(&spec) {}

  const Approximator& require_net() const {
    if (kind_ != ModelKind::Learned) {
      throw std::logic_error("dynamics: only the learned variant has a network");
    }
    return net_;
  }

  bool in_bottom_left(GridState s) const {
    return s.x < spec_->width() / 2 && s.y < spec_->height() / 2;
  }

  GridState no_wall_next(GridState s, Action a) const {
    GridState d = moved(s, a);
    return spec_->in_bounds(d.x, d.y) ? d : s;
  }

  void encode(GridState s, Action a, double* out) const {
    out[0] = s.x * feature_scale_;
    out[1] = s.y * feature_scale_;
    for (int i = 0; i < kNumActions; ++i) out[2 + i] = 0.0;
    out[2 + action_index(a)] = 1.0;
  }

  Vec2 learned_predict(GridState s, Action a) const {
    double in[2 + kNumActions];
    encode(s, a, in);
    double out[2];
    net_.eval_raw_into(std::span<const double>(in, 2 + kNumActions),
                       std::span<double>(out, 2));
    return {out[0] / feature_scale_, out[1] / feature_scale_};
  }

  ModelKind kind_;
  const GridSpec* spec_;
  std::vector<double> mean_open_dist_;  // ThreeRoom only
  Approximator net_;                    // Learned only
  double feature_scale_ = 1.0;
};

// The slice of a batch the model is allowed to train on: the
// ceil(keep_percent/100 * n) entries whose current states score lowest under
// `state_score` (the learned model error), ties resolved by batch order.
template <class StateScore>
std::vector<Transition> select_for_sml(std::span<const Transition> batch,
                                       StateScore&& state_score,
                                       double keep_percent) {
  if (!(keep_percent > 0.0) || keep_percent > 100.0) {
    throw std::invalid_argument("dynamics: keep_percent must be in (0, 100]");
  }
  if (batch.empty()) return {};
  std::vector<std::pair<double, std::size_t>> ranked(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ranked[i] = {state_score(batch[i].s), i};
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto keep = static_cast<std::size_t>(
      std::ceil(keep_percent / 100.0 * static_cast<double>(batch.size())));
  std::vector<std::size_t> idx(keep);
  for (std::size_t i = 0; i < keep; ++i) idx[i] = ranked[i].second;
  std::sort(idx.begin(), idx.end());
  std::vector<Transition> out;
  out.reserve(keep);
  for (std::size_t i : idx) out.push_back(batch[i]);
  return out;
}

}  // namespace adamve
