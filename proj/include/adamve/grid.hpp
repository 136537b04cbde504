#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adamve/rng.hpp"

namespace adamve {

enum class Action : int { Left = 0, Right = 1, Up = 2, Down = 3, Stay = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Left, Action::Right, Action::Up, Action::Down, Action::Stay};

inline constexpr int action_index(Action a) { return static_cast<int>(a); }

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Stay: return "stay";
  }
  return "?";
}

// Integer cell position. x is the column, y the row; y grows upward, so the
// bottom-left room of the four-room grid is the low-x, low-y quadrant.
struct GridState {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridState&, const GridState&) = default;
};

// Real-valued position, used for model rollouts whose predictions need not
// land on a cell (learned models) or may land on wall cells.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 to_vec(GridState s) {
  return {static_cast<double>(s.x), static_cast<double>(s.y)};
}

inline double distance(Vec2 a, Vec2 b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Rectangular gridworld with wall cells, a single goal cell and an episode
// step cap. Instances are immutable once built.
class GridSpec {
 public:
  GridSpec(int width, int height, std::vector<std::uint8_t> walls, GridState goal,
           int episode_cap = 50)
      : width_(width), height_(height), wall_(std::move(walls)), goal_(goal),
        episode_cap_(episode_cap) {
    if (width_ <= 0 || height_ <= 0 ||
        wall_.size() != static_cast<std::size_t>(width_ * height_)) {
      throw std::invalid_argument("grid: wall table does not match dimensions");
    }
    if (!in_bounds(goal_.x, goal_.y) || wall(goal_.x, goal_.y)) {
      throw std::invalid_argument("grid: goal must be an open in-bounds cell");
    }
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        if (wall(x, y)) continue;
        open_.push_back({x, y});
        if (GridState{x, y} != goal_) open_nongoal_.push_back({x, y});
      }
    }
  }

  // The 19x19 four-room layout: four 9x9 rooms separated by the wall row
  // y = 9 and wall column x = 9, with door cells at (4,9), (14,9), (9,4)
  // and (9,14). Goal in the top-right room.
  static GridSpec four_room() { return four_room_with_goal({15, 15}); }

  // Same walls, goal moved to the top-left room. Used for transfer runs.
  static GridSpec four_room2() { return four_room_with_goal({2, 18}); }

  // Parses the plain-text layout format: one character per cell, '.' open,
  // '#' wall, 'G' the goal (open). The first line is the top row (highest y).
  static GridSpec from_layout(std::string_view text, int episode_cap = 50) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        if (!cur.empty()) lines.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) lines.push_back(cur);
    if (lines.empty()) throw std::invalid_argument("layout: empty");
    const int height = static_cast<int>(lines.size());
    const int width = static_cast<int>(lines.front().size());
    std::vector<std::uint8_t> wall(static_cast<std::size_t>(width) * height, 0);
    GridState goal{-1, -1};
    int goals = 0;
    for (int row = 0; row < height; ++row) {
      const std::string& line = lines[row];
      if (static_cast<int>(line.size()) != width) {
        throw std::invalid_argument("layout: ragged lines");
      }
      const int y = height - 1 - row;
      for (int x = 0; x < width; ++x) {
        switch (line[x]) {
          case '.': break;
          case '#': wall[static_cast<std::size_t>(y) * width + x] = 1; break;
          case 'G': goal = {x, y}; ++goals; break;
          default:
            throw std::invalid_argument(std::string("layout: invalid character '") +
                                        line[x] + "'");
        }
      }
    }
    if (goals != 1) throw std::invalid_argument("layout: expected exactly one 'G'");
    return GridSpec(width, height, std::move(wall), goal, episode_cap);
  }

  std::string to_layout() const {
    std::string out;
    out.reserve(static_cast<std::size_t>((width_ + 1)) * height_);
    for (int row = 0; row < height_; ++row) {
      const int y = height_ - 1 - row;
      for (int x = 0; x < width_; ++x) {
        if (wall(x, y)) out.push_back('#');
        else if (GridState{x, y} == goal_) out.push_back('G');
        else out.push_back('.');
      }
      out.push_back('\n');
    }
    return out;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int num_cells() const { return width_ * height_; }
  GridState goal() const { return goal_; }
  int episode_cap() const { return episode_cap_; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }
  bool wall(int x, int y) const {
    return wall_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool open(GridState s) const { return in_bounds(s.x, s.y) && !wall(s.x, s.y); }

  int cell_index(GridState s) const { return s.y * width_ + s.x; }
  GridState cell_at(int index) const { return {index % width_, index / width_}; }

  // Open cells in cell-index order; the reset distribution excludes the goal.
  const std::vector<GridState>& open_cells() const { return open_; }
  const std::vector<GridState>& open_nongoal_cells() const { return open_nongoal_; }

  bool same_walls(const GridSpec& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           wall_ == other.wall_;
  }

 private:
  static GridSpec four_room_with_goal(GridState goal) {
    constexpr int kSize = 19;
    std::vector<std::uint8_t> wall(kSize * kSize, 0);
    auto set = [&wall](int x, int y, std::uint8_t v) {
      wall[static_cast<std::size_t>(y) * kSize + x] = v;
    };
    for (int i = 0; i < kSize; ++i) {
      set(i, 9, 1);
      set(9, i, 1);
    }
    set(4, 9, 0);   // door between the two left rooms
    set(14, 9, 0);  // door between the two right rooms
    set(9, 4, 0);   // door between the two bottom rooms
    set(9, 14, 0);  // door between the two top rooms
    return GridSpec(kSize, kSize, std::move(wall), goal);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> wall_;
  GridState goal_;
  int episode_cap_;
  std::vector<GridState> open_;
  std::vector<GridState> open_nongoal_;
};

struct MoveResult {
  GridState next;
  double reward = 0.0;
  bool entered_goal = false;
};

// The environment motion rule as a pure function: move one cell in the
// action direction; moves into walls or off the grid leave the state
// unchanged. Reward is 1 exactly when the resulting cell is the goal.
// Also well defined from wall cells, which model rollouts may occupy.
inline GridState moved(GridState s, Action a) {
  switch (a) {
    case Action::Left: return {s.x - 1, s.y};
    case Action::Right: return {s.x + 1, s.y};
    case Action::Up: return {s.x, s.y + 1};
    case Action::Down: return {s.x, s.y - 1};
    case Action::Stay: break;
  }
  return s;
}

inline MoveResult apply_move(const GridSpec& spec, GridState s, Action a) {
  GridState d = moved(s, a);
  if (!spec.in_bounds(d.x, d.y) || spec.wall(d.x, d.y)) d = s;
  MoveResult r;
  r.next = d;
  r.entered_goal = (d == spec.goal());
  r.reward = r.entered_goal ? 1.0 : 0.0;
  return r;
}

inline double true_reward(const GridSpec& spec, GridState s, Action a) {
  return apply_move(spec, s, a).reward;
}

// Nearest grid cell to a real-valued position, clamped to the grid. Used to
// look up rewards and tabular values for fictional rollout states.
inline GridState snap_to_cell(const GridSpec& spec, Vec2 p) {
  auto clamp = [](long v, int hi) {
    return static_cast<int>(v < 0 ? 0 : (v > hi ? hi : v));
  };
  return {clamp(std::lround(p.x), spec.width() - 1),
          clamp(std::lround(p.y), spec.height() - 1)};
}

// Episode-stepping wrapper around the pure motion rule. Owns the position
// and the step counter; episodes end on reaching the goal or after
// episode_cap steps, whichever comes first.
class GridEnv {
 public:
  explicit GridEnv(const GridSpec& spec) : spec_(&spec) {}

  struct StepResult {
    GridState next;
    double reward = 0.0;
    bool done = false;
    bool entered_goal = false;  // distinguishes goal termination from timeout
  };

  // Uniform over open non-goal cells.
  GridState reset(Rng& rng) {
    const auto& cells = spec_->open_nongoal_cells();
    pos_ = cells[rng.below(cells.size())];
    steps_ = 0;
    done_ = false;
    return pos_;
  }

  StepResult step(Action a) {
    if (done_) throw std::logic_error("GridEnv::step called on finished episode");
    const MoveResult m = apply_move(*spec_, pos_, a);
    pos_ = m.next;
    ++steps_;
    StepResult r;
    r.next = m.next;
    r.reward = m.reward;
    r.entered_goal = m.entered_goal;
    r.done = m.entered_goal || steps_ >= spec_->episode_cap();
    done_ = r.done;
    return r;
  }

  const GridSpec& spec() const { return *spec_; }
  GridState pos() const { return pos_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

 private:
  const GridSpec* spec_;
  GridState pos_{0, 0};
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace adamve
