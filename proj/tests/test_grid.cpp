#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "adamve/grid.hpp"
#include "helpers.hpp"

using namespace adamve;

TEST_CASE("four-room geometry: cell counts from enumeration") {
  const GridSpec spec = GridSpec::four_room();
  REQUIRE(spec.width() == 19);
  REQUIRE(spec.height() == 19);
  REQUIRE(spec.num_cells() == 361);
  // 4 rooms x 81 cells + 4 doors.
  REQUIRE(spec.open_cells().size() == 328);
  REQUIRE(spec.open_nongoal_cells().size() == 327);
  REQUIRE(spec.goal() == GridState{15, 15});
  REQUIRE(GridSpec::four_room2().goal() == GridState{2, 18});
  REQUIRE(spec.same_walls(GridSpec::four_room2()));

  // The doors are open, the rest of the dividing row/column is wall.
  for (int i = 0; i < 19; ++i) {
    const bool door_in_col = (i == 4 || i == 14);
    REQUIRE(spec.wall(9, i) == !door_in_col);
    REQUIRE(spec.wall(i, 9) == !door_in_col);
  }
}

TEST_CASE("motion rule: boundary and wall moves stay put") {
  const GridSpec spec = GridSpec::four_room();

  SECTION("grid boundary") {
    const MoveResult m = apply_move(spec, {0, 0}, Action::Left);
    REQUIRE(m.next == GridState{0, 0});
    REQUIRE(m.reward == 0.0);
    REQUIRE_FALSE(m.entered_goal);
  }
  SECTION("internal wall, no door at y = 0") {
    const MoveResult m = apply_move(spec, {8, 0}, Action::Right);
    REQUIRE(m.next == GridState{8, 0});
    REQUIRE(m.reward == 0.0);
  }
  SECTION("door passage") {
    REQUIRE(apply_move(spec, {8, 4}, Action::Right).next == GridState{9, 4});
    REQUIRE(apply_move(spec, {4, 8}, Action::Up).next == GridState{4, 9});
  }
  SECTION("stay") {
    REQUIRE(apply_move(spec, {3, 7}, Action::Stay).next == GridState{3, 7});
  }
  SECTION("goal entry rewards 1") {
    const MoveResult m = apply_move(spec, {14, 15}, Action::Right);
    REQUIRE(m.next == spec.goal());
    REQUIRE(m.reward == 1.0);
    REQUIRE(m.entered_goal);
  }
}

TEST_CASE("motion rule: pure and closed over open cells") {
  const GridSpec spec = GridSpec::four_room();
  for (const GridState& s : spec.open_cells()) {
    for (Action a : kAllActions) {
      const MoveResult m1 = apply_move(spec, s, a);
      const MoveResult m2 = apply_move(spec, s, a);
      REQUIRE(m1.next == m2.next);
      REQUIRE(m1.reward == m2.reward);
      REQUIRE(spec.open(m1.next));
      REQUIRE((m1.reward == 0.0 || m1.reward == 1.0));
      REQUIRE((m1.next == spec.goal()) == (m1.reward == 1.0));
    }
  }
}

TEST_CASE("reset: uniform over open non-goal cells") {
  const GridSpec spec = GridSpec::four_room();
  GridEnv env(spec);

  Rng rng = Rng::stream(7, "reset");
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < 10000; ++i) {
    const GridState s = env.reset(rng);
    REQUIRE(spec.open(s));
    REQUIRE(s != spec.goal());
    seen.insert({s.x, s.y});
  }
  // Coupon-collector: 10k draws over 327 cells miss a cell with
  // probability ~2e-11, so full coverage is a stable check.
  REQUIRE(seen.size() == spec.open_nongoal_cells().size());

  Rng r1 = Rng::stream(123, "reset");
  Rng r2 = Rng::stream(123, "reset");
  for (int i = 0; i < 100; ++i) REQUIRE(env.reset(r1) == env.reset(r2));
}

TEST_CASE("episode accounting: goal ends early, cap ends at 50") {
  const GridSpec spec = GridSpec::four_room();
  GridEnv env(spec);
  Rng rng = Rng::stream(3, "reset");

  SECTION("timeout after episode_cap steps") {
    env.reset(rng);
    GridEnv::StepResult r;
    for (int i = 0; i < 50; ++i) {
      REQUIRE_FALSE(env.done());
      r = env.step(Action::Stay);
    }
    REQUIRE(r.done);
    REQUIRE_FALSE(r.entered_goal);
    REQUIRE(env.steps() == 50);
    REQUIRE_THROWS_AS(env.step(Action::Stay), std::logic_error);
  }

  SECTION("goal termination flags the transition") {
    // Walk a fresh env to a known pre-goal cell by resetting until adjacent.
    GridState s = env.reset(rng);
    while (!(s == GridState{14, 15})) s = env.reset(rng);
    const GridEnv::StepResult r = env.step(Action::Right);
    REQUIRE(r.done);
    REQUIRE(r.entered_goal);
    REQUIRE(r.reward == 1.0);
  }
}

TEST_CASE("layout text round-trips and validates") {
  const GridSpec spec = GridSpec::four_room();
  const std::string text = spec.to_layout();

  REQUIRE(std::count(text.begin(), text.end(), '#') == 33);
  REQUIRE(std::count(text.begin(), text.end(), 'G') == 1);
  REQUIRE(std::count(text.begin(), text.end(), '.') == 327);

  // First line is the top row (y = 18); the goal at (15,15) sits on the
  // fourth line from the top.
  std::vector<std::string> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 19);
  REQUIRE(lines[3][15] == 'G');

  const GridSpec back = GridSpec::from_layout(text);
  REQUIRE(back.same_walls(spec));
  REQUIRE(back.goal() == spec.goal());
  REQUIRE(back.to_layout() == text);

  REQUIRE_THROWS_AS(GridSpec::from_layout("..\n.\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(GridSpec::from_layout("..\nX.\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(GridSpec::from_layout("..\n..\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(GridSpec::from_layout("GG\n..\n"), std::invalid_argument);
}

TEST_CASE("every open cell reaches the goal within the episode cap") {
  for (const GridSpec& spec : {GridSpec::four_room(), GridSpec::four_room2()}) {
    const std::vector<int> dist = testing::bfs_distances_to_goal(spec);
    int longest = 0;
    for (const GridState& s : spec.open_cells()) {
      const int d = dist[spec.cell_index(s)];
      REQUIRE(d <= spec.episode_cap());
      longest = std::max(longest, d);
    }
    REQUIRE(longest <= 50);
  }
}

TEST_CASE("snap_to_cell rounds and clamps") {
  const GridSpec spec = GridSpec::four_room();
  REQUIRE(snap_to_cell(spec, {8.6, 0.2}) == GridState{9, 0});
  REQUIRE(snap_to_cell(spec, {8.4, 0.0}) == GridState{8, 0});
  REQUIRE(snap_to_cell(spec, {-3.0, 25.0}) == GridState{0, 18});
  REQUIRE(snap_to_cell(spec, {15.0, 15.0}) == GridState{15, 15});
}
