#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adamve/grid.hpp"
#include "adamve/rng.hpp"

namespace adamve {

// How a network turns a grid position into an input vector.
//   ScaledXY:   [x, y] divided by the largest coordinate (18 on the 19-grid).
//   OneHotCell: one indicator per cell; a single linear layer on this
//               encoding reproduces a table exactly.
enum class FeatureEncoding { ScaledXY, OneHotCell };

struct OptimConfig {
  enum class Kind { Adam, PlainGradient };
  Kind kind = Kind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One regression example: push output head `head`, evaluated at `state`,
// toward `target`.
struct StateTarget {
  Vec2 state;
  int head = 0;
  double target = 0.0;
};

struct HeadTarget {
  int head = 0;
  double target = 0.0;
};

// Value function over grid positions with a fixed number of output heads.
// Two variants behind one parameter vector: a dense table over cells
// (positions snap to the nearest cell) and a ReLU multilayer perceptron.
// Keeping parameters flat makes Polyak mixing, checkpoints and the
// optimizer uniform across variants. Copies are deep, which is how target
// networks are created.
class Approximator {
 public:
  enum class Kind { Tabular, Mlp };

  static Approximator tabular(int width, int height, int heads) {
    Approximator a;
    a.kind_ = Kind::Tabular;
    a.width_ = width;
    a.height_ = height;
    a.heads_ = heads;
    a.params_.assign(static_cast<std::size_t>(width) * height * heads, 0.0);
    a.pinned_.assign(heads, 0);
    return a;
  }

  // MLP keyed by grid position. use_bias = false keeps every bias frozen at
  // zero, which makes a hidden-layer-free one-hot network arithmetically
  // identical to a table.
  static Approximator mlp_state(FeatureEncoding enc, int width, int height,
                                std::vector<int> hidden, int heads, Rng& init,
                                bool use_bias = true) {
    const int inputs = enc == FeatureEncoding::ScaledXY ? 2 : width * height;
    Approximator a = mlp_raw(inputs, std::move(hidden), heads, init, use_bias);
    a.encoding_ = enc;
    a.width_ = width;
    a.height_ = height;
    a.input_scale_ = 1.0 / static_cast<double>(std::max(width, height) - 1);
    return a;
  }

  // MLP over caller-supplied feature vectors (used by the learned dynamics
  // model, whose input is state features plus a one-hot action).
  static Approximator mlp_raw(int inputs, std::vector<int> hidden, int outputs,
                              Rng& init, bool use_bias = true) {
    if (inputs <= 0 || outputs <= 0) {
      throw std::invalid_argument("approximator: bad mlp dimensions");
    }
    Approximator a;
    a.kind_ = Kind::Mlp;
    a.use_bias_ = use_bias;
    a.heads_ = outputs;
    a.dims_.push_back(inputs);
    for (int h : hidden) {
      if (h <= 0) throw std::invalid_argument("approximator: bad hidden width");
      a.dims_.push_back(h);
    }
    a.dims_.push_back(outputs);
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < a.dims_.size(); ++l) {
      n += static_cast<std::size_t>(a.dims_[l + 1]) * a.dims_[l] + a.dims_[l + 1];
    }
    a.params_.resize(n);
    a.pinned_.assign(outputs, 0);
    // He-uniform fan-in initialization; biases start at zero.
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < a.dims_.size(); ++l) {
      const int fan_in = a.dims_[l];
      const int fan_out = a.dims_[l + 1];
      const double bound = std::sqrt(6.0 / fan_in);
      for (int i = 0; i < fan_out * fan_in; ++i) {
        a.params_[off++] = init.uniform(-bound, bound);
      }
      for (int i = 0; i < fan_out; ++i) a.params_[off++] = 0.0;
    }
    return a;
  }

  Kind kind() const { return kind_; }
  int heads() const { return heads_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  // Heads that are structurally zero: they evaluate to 0 and reject
  // training. Model-error functions pin their h = 0 heads this way.
  void pin_heads(std::span<const int> heads) {
    for (int h : heads) {
      check_head(h);
      pinned_[h] = 1;
    }
  }
  bool pinned(int head) const { return pinned_[head] != 0; }

  void set_optimizer(OptimConfig cfg) { opt_ = cfg; }
  const OptimConfig& optimizer() const { return opt_; }

  // ----- evaluation ---------------------------------------------------

  void eval_state_into(Vec2 s, std::span<double> out) const {
    if (static_cast<int>(out.size()) != heads_) {
      throw std::invalid_argument("approximator: output span size mismatch");
    }
    if (kind_ == Kind::Tabular) {
      const double* row = &params_[static_cast<std::size_t>(snap_index(s)) * heads_];
      for (int h = 0; h < heads_; ++h) out[h] = pinned_[h] ? 0.0 : row[h];
      return;
    }
    encode(s);
    forward(scratch_in_.data(), out.data());
    for (int h = 0; h < heads_; ++h) {
      if (pinned_[h]) out[h] = 0.0;
    }
  }

  double eval_state_head(Vec2 s, int head) const {
    check_head(head);
    if (pinned_[head]) return 0.0;
    if (kind_ == Kind::Tabular) {
      return params_[static_cast<std::size_t>(snap_index(s)) * heads_ + head];
    }
    std::vector<double> out(heads_);
    eval_state_into(s, out);
    return out[head];
  }

  void eval_raw_into(std::span<const double> x, std::span<double> out) const {
    if (kind_ != Kind::Mlp) {
      throw std::logic_error("approximator: raw features require the mlp variant");
    }
    if (static_cast<int>(x.size()) != dims_.front() ||
        static_cast<int>(out.size()) != heads_) {
      throw std::invalid_argument("approximator: raw feature size mismatch");
    }
    forward(x.data(), out.data());
    for (int h = 0; h < heads_; ++h) {
      if (pinned_[h]) out[h] = 0.0;
    }
  }

  // ----- training -----------------------------------------------------

  // One optimizer step on the batch loss  1/(2B) sum_i (f(x_i)[h_i] - y_i)^2.
  // Returns the loss before the step.
  double grad_step(std::span<const StateTarget> batch) {
    if (batch.empty()) throw std::invalid_argument("approximator: empty batch");
    if (kind_ == Kind::Tabular) return tabular_step(batch);
    std::vector<double> inputs(batch.size() * dims_.front());
    std::vector<HeadTarget> ht(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      encode(batch[i].state);
      std::memcpy(&inputs[i * dims_.front()], scratch_in_.data(),
                  sizeof(double) * dims_.front());
      ht[i] = {batch[i].head, batch[i].target};
    }
    return grad_step_raw(inputs, ht);
  }

  double grad_step_raw(std::span<const double> inputs,
                       std::span<const HeadTarget> batch) {
    if (kind_ != Kind::Mlp) {
      throw std::logic_error("approximator: raw features require the mlp variant");
    }
    if (batch.empty()) throw std::invalid_argument("approximator: empty batch");
    if (inputs.size() != batch.size() * static_cast<std::size_t>(dims_.front())) {
      throw std::invalid_argument("approximator: raw feature size mismatch");
    }
    grad_.assign(params_.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      check_trainable(batch[i].head);
      const double r = backward(&inputs[i * dims_.front()], batch[i].head,
                                batch[i].target, inv_b);
      loss += 0.5 * r * r;
    }
    apply_dense(grad_);
    return loss * inv_b;
  }

 private:
  double tabular_step(std::span<const StateTarget> batch) {
    // Gradients touch at most one table entry per sample, so the optimizer
    // update runs sparsely over the touched entries (moments elsewhere are
    // untouched, as their gradient is zero).
    sparse_idx_.clear();
    sparse_grad_.clear();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const StateTarget& st : batch) {
      check_trainable(st.head);
      const std::size_t idx =
          static_cast<std::size_t>(snap_index(st.state)) * heads_ + st.head;
      const double r = params_[idx] - st.target;
      loss += 0.5 * r * r;
      bool found = false;
      for (std::size_t k = 0; k < sparse_idx_.size(); ++k) {
        if (sparse_idx_[k] == idx) {
          sparse_grad_[k] += r * inv_b;
          found = true;
          break;
        }
      }
      if (!found) {
        sparse_idx_.push_back(idx);
        sparse_grad_.push_back(r * inv_b);
      }
    }
    apply_sparse();
    return loss * inv_b;
  }

  void ensure_moments() {
    if (m_.size() != params_.size()) {
      m_.assign(params_.size(), 0.0);
      v_.assign(params_.size(), 0.0);
    }
  }

  void apply_dense(const std::vector<double>& g) {
    if (opt_.kind == OptimConfig::Kind::PlainGradient) {
      for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= opt_.lr * g[i];
      return;
    }
    ensure_moments();
    ++adam_t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, adam_t_);
    const double c2 = 1.0 - std::pow(opt_.beta2, adam_t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g[i];
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      params_[i] -= opt_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opt_.eps);
    }
  }

  void apply_sparse() {
    if (opt_.kind == OptimConfig::Kind::PlainGradient) {
      for (std::size_t k = 0; k < sparse_idx_.size(); ++k) {
        params_[sparse_idx_[k]] -= opt_.lr * sparse_grad_[k];
      }
      return;
    }
    ensure_moments();
    ++adam_t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, adam_t_);
    const double c2 = 1.0 - std::pow(opt_.beta2, adam_t_);
    for (std::size_t k = 0; k < sparse_idx_.size(); ++k) {
      const std::size_t i = sparse_idx_[k];
      const double g = sparse_grad_[k];
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g * g;
      params_[i] -= opt_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opt_.eps);
    }
  }

  int snap_index(Vec2 s) const {
    auto clamp = [](long v, int hi) {
      return static_cast<int>(v < 0 ? 0 : (v > hi ? hi : v));
    };
    const int x = clamp(std::lround(s.x), width_ - 1);
    const int y = clamp(std::lround(s.y), height_ - 1);
    return y * width_ + x;
  }

  void encode(Vec2 s) const {
    scratch_in_.assign(dims_.front(), 0.0);
    if (encoding_ == FeatureEncoding::ScaledXY) {
      scratch_in_[0] = s.x * input_scale_;
      scratch_in_[1] = s.y * input_scale_;
    } else {
      scratch_in_[snap_index(s)] = 1.0;
    }
  }

  // Forward pass; keeps per-layer activations for the backward pass.
  void forward(const double* x, double* out) const {
    const std::size_t layers = dims_.size() - 1;
    acts_.resize(layers + 1);
    acts_[0].assign(x, x + dims_.front());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const int in = dims_[l];
      const int on = dims_[l + 1];
      acts_[l + 1].assign(on, 0.0);
      const double* w = &params_[off];
      const double* b = &params_[off + static_cast<std::size_t>(on) * in];
      const double* src = acts_[l].data();
      double* dst = acts_[l + 1].data();
      for (int o = 0; o < on; ++o) {
        double z = b[o];
        const double* wr = &w[static_cast<std::size_t>(o) * in];
        for (int i = 0; i < in; ++i) z += wr[i] * src[i];
        dst[o] = (l + 1 < layers && z < 0.0) ? 0.0 : z;  // ReLU on hidden layers
      }
      off += static_cast<std::size_t>(on) * in + on;
    }
    std::memcpy(out, acts_[layers].data(), sizeof(double) * heads_);
  }

  // Backprop of one sample's residual through the cached activations;
  // accumulates into grad_ and returns the raw residual f - y.
  double backward(const double* x, int head, double target, double inv_b) {
    std::vector<double> out(heads_);
    forward(x, out.data());
    const double residual = out[head] - target;
    const std::size_t layers = dims_.size() - 1;
    delta_.assign(heads_, 0.0);
    delta_[head] = residual * inv_b;
    // Walk the layers backwards; off points at the weight block of layer l.
    std::size_t off = params_.size();
    for (std::size_t l = layers; l-- > 0;) {
      const int in = dims_[l];
      const int on = dims_[l + 1];
      off -= static_cast<std::size_t>(on) * in + on;
      const double* w = &params_[off];
      double* gw = &grad_[off];
      double* gb = &grad_[off + static_cast<std::size_t>(on) * in];
      const double* a = acts_[l].data();
      next_delta_.assign(in, 0.0);
      for (int o = 0; o < on; ++o) {
        const double d = delta_[o];
        if (d == 0.0) continue;
        if (use_bias_) gb[o] += d;
        double* gwr = &gw[static_cast<std::size_t>(o) * in];
        const double* wr = &w[static_cast<std::size_t>(o) * in];
        for (int i = 0; i < in; ++i) {
          gwr[i] += d * a[i];
          next_delta_[i] += d * wr[i];
        }
      }
      if (l > 0) {
        // ReLU derivative: pass gradient only where the activation fired.
        for (int i = 0; i < in; ++i) {
          if (acts_[l][i] <= 0.0) next_delta_[i] = 0.0;
        }
      }
      delta_.swap(next_delta_);
    }
    return residual;
  }

  void check_head(int head) const {
    if (head < 0 || head >= heads_) {
      throw std::invalid_argument("approximator: head out of range");
    }
  }
  void check_trainable(int head) const {
    check_head(head);
    if (pinned_[head]) {
      throw std::logic_error("approximator: attempt to train a pinned head");
    }
  }

  friend void polyak_update(Approximator&, const Approximator&, double);
  friend struct ApproximatorIo;

  Kind kind_ = Kind::Tabular;
  int width_ = 0;
  int height_ = 0;
  int heads_ = 0;
  bool use_bias_ = true;
  FeatureEncoding encoding_ = FeatureEncoding::ScaledXY;
  double input_scale_ = 1.0;
  std::vector<int> dims_;
  std::vector<double> params_;
  std::vector<std::uint8_t> pinned_;

  OptimConfig opt_;
  std::vector<double> m_, v_;
  long adam_t_ = 0;

  mutable std::vector<double> scratch_in_;
  mutable std::vector<std::vector<double>> acts_;
  std::vector<double> grad_, delta_, next_delta_;
  std::vector<std::size_t> sparse_idx_;
  std::vector<double> sparse_grad_;
};

// target <- (1 - mix) * target + mix * online. mix = 1 copies, mix = 0 is a
// no-op; applied every step this is the exponential ("Polyak") target update.
inline void polyak_update(Approximator& target, const Approximator& online,
                          double mix) {
  if (target.params_.size() != online.params_.size() ||
      target.kind_ != online.kind_) {
    throw std::invalid_argument("polyak_update: mismatched approximators");
  }
  if (mix < 0.0 || mix > 1.0) {
    throw std::invalid_argument("polyak_update: mix must be in [0, 1]");
  }
  for (std::size_t i = 0; i < target.params_.size(); ++i) {
    target.params_[i] =
        (1.0 - mix) * target.params_[i] + mix * online.params_[i];
  }
}

// Checkpoint format: a plain-text header describing the variant, shapes and
// caller metadata, then one binary block of little-endian 64-bit floats.
// Optimizer state is not serialized; loading yields fresh moments.
struct ApproximatorIo {
  static void save(std::ostream& os, const Approximator& a,
                   const std::map<std::string, std::string>& meta = {}) {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    os << "adamve-approx 1\n";
    if (a.kind_ == Approximator::Kind::Tabular) {
      os << "kind tabular\n";
      os << "grid " << a.width_ << ' ' << a.height_ << '\n';
      os << "heads " << a.heads_ << '\n';
    } else {
      os << "kind mlp\n";
      os << "encoding "
         << (a.dims_.front() == 2 && a.encoding_ == FeatureEncoding::ScaledXY
                 ? "xy"
                 : (a.encoding_ == FeatureEncoding::OneHotCell ? "onehot" : "raw"))
         << '\n';
      if (a.width_ > 0) os << "grid " << a.width_ << ' ' << a.height_ << '\n';
      os << "layout";
      for (int d : a.dims_) os << ' ' << d;
      os << '\n';
      os << "bias " << (a.use_bias_ ? 1 : 0) << '\n';
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", a.input_scale_);
      os << "input_scale " << buf << '\n';
    }
    os << "pinned";
    for (int h = 0; h < a.heads_; ++h) {
      if (a.pinned_[h]) os << ' ' << h;
    }
    os << '\n';
    for (const auto& [k, v] : meta) os << "meta " << k << ' ' << v << '\n';
    os << "data " << a.params_.size() << '\n';
    os.write(reinterpret_cast<const char*>(a.params_.data()),
             static_cast<std::streamsize>(a.params_.size() * sizeof(double)));
    if (!os) throw std::runtime_error("checkpoint: write failed");
  }

  struct Loaded {
    Approximator approx;
    std::map<std::string, std::string> meta;
  };

  static Loaded load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "adamve-approx 1") {
      throw std::runtime_error("checkpoint: bad magic line");
    }
    std::string kind, encoding = "raw";
    int width = 0, height = 0, heads = 0, bias = 1;
    double input_scale = 1.0;
    std::vector<int> layout;
    std::vector<int> pinned;
    std::map<std::string, std::string> meta;
    std::size_t count = 0;
    bool have_data = false;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "kind") {
        ls >> kind;
      } else if (key == "grid") {
        ls >> width >> height;
      } else if (key == "heads") {
        ls >> heads;
      } else if (key == "encoding") {
        ls >> encoding;
      } else if (key == "layout") {
        int d;
        while (ls >> d) layout.push_back(d);
      } else if (key == "input_scale") {
        ls >> input_scale;
      } else if (key == "bias") {
        ls >> bias;
      } else if (key == "pinned") {
        int h;
        while (ls >> h) pinned.push_back(h);
      } else if (key == "meta") {
        std::string k;
        ls >> k;
        std::string v;
        std::getline(ls, v);
        if (!v.empty() && v.front() == ' ') v.erase(0, 1);
        meta[k] = v;
      } else if (key == "data") {
        ls >> count;
        have_data = true;
        break;
      } else {
        throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
      }
    }
    if (!have_data) throw std::runtime_error("checkpoint: missing data block");

    Approximator a;
    if (kind == "tabular") {
      a = Approximator::tabular(width, height, heads);
    } else if (kind == "mlp") {
      if (layout.size() < 2) throw std::runtime_error("checkpoint: bad layout");
      std::vector<int> hidden(layout.begin() + 1, layout.end() - 1);
      Rng dummy(0);
      a = Approximator::mlp_raw(layout.front(), hidden, layout.back(), dummy,
                                bias != 0);
      if (encoding == "xy") a.encoding_ = FeatureEncoding::ScaledXY;
      else if (encoding == "onehot") a.encoding_ = FeatureEncoding::OneHotCell;
      a.width_ = width;
      a.height_ = height;
      a.input_scale_ = input_scale;
    } else {
      throw std::runtime_error("checkpoint: unknown kind '" + kind + "'");
    }
    if (a.params_.size() != count) {
      throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    is.read(reinterpret_cast<char*>(a.params_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
      throw std::runtime_error("checkpoint: truncated data block");
    }
    a.pin_heads(pinned);
    return {std::move(a), std::move(meta)};
  }
};

}  // namespace adamve
