#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "adamve/grid.hpp"
#include "adamve/rng.hpp"

namespace adamve {

// One environment transition. goal_terminal marks true termination (the
// goal was entered); timeout endings are stored with it false so learning
// targets still bootstrap through them.
struct Transition {
  GridState s;
  Action a = Action::Stay;
  double reward = 0.0;
  GridState next;
  bool goal_terminal = false;
};

// Fixed-capacity ring buffer with uniform with-replacement sampling.
// Sampling before the warm-up fill is an error so callers cannot silently
// train on a near-empty buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::size_t warmup)
      : capacity_(capacity), warmup_(warmup) {
    if (capacity_ == 0 || warmup_ == 0 || warmup_ > capacity_) {
      throw std::invalid_argument("replay: need 0 < warmup <= capacity");
    }
    data_.reserve(std::min<std::size_t>(capacity_, 1 << 20));
  }

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[write_] = t;  // overwrite the oldest entry
    }
    write_ = (write_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool warm() const { return data_.size() >= warmup_; }

  void sample(Rng& rng, std::span<Transition> out) const {
    if (!warm()) {
      throw std::logic_error("replay: sampled before warm-up fill");
    }
    for (Transition& t : out) t = data_[rng.below(data_.size())];
  }

  const Transition& at(std::size_t i) const { return data_[i]; }

 private:
  std::size_t capacity_;
  std::size_t warmup_;
  std::size_t write_ = 0;
  std::vector<Transition> data_;
};

}  // namespace adamve
