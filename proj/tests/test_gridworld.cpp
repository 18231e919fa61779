#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <deque>
#include <map>
#include <sstream>

#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/gridworld.hpp"

using namespace survival;
using namespace survival::grid;

namespace {

// Shortest number of actions from the start to the goal avoiding lava, by
// BFS over (cell, heading) with hand-written moves.
int shortest_safe_route(const GridLayout& layout) {
  const int dx[] = {0, -1, 1, 0}, dy[] = {-1, 0, 0, 1};
  const int left[] = {1, 3, 0, 2}, right[] = {2, 0, 3, 1};
  using Node = std::tuple<int, int, int>;
  std::map<Node, int> dist;
  std::deque<Node> queue;
  const Node start{layout.start->x, layout.start->y, static_cast<int>(layout.start_dir)};
  dist[start] = 0;
  queue.push_back(start);
  while (!queue.empty()) {
    const auto [x, y, d] = queue.front();
    queue.pop_front();
    const int here = dist[{x, y, d}];
    std::vector<Node> next{{x, y, left[d]}, {x, y, right[d]}};
    const int nx = x + dx[d], ny = y + dy[d];
    const Cell c{nx, ny};
    if (layout.inside(c) && !layout.is_wall(c)) {
      if (c == *layout.goal) return here + 1;
      if (!layout.is_lava(c)) next.emplace_back(nx, ny, d);
    }
    for (const Node& n : next) {
      if (dist.emplace(n, here + 1).second) queue.push_back(n);
    }
  }
  return -1;
}

// Walks the rendered arrows from the start marker position.
bool arrows_reach_goal(const std::string& picture, Cell start) {
  std::vector<std::string> rows;
  std::istringstream in(picture);
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  int x = start.x, y = start.y;
  for (int steps = 0; steps < 30; ++steps) {
    const char c = rows[static_cast<std::size_t>(y + 1)][static_cast<std::size_t>(x + 1)];
    if (c == 'K') return true;
    if (c == '^') --y;
    else if (c == 'v') ++y;
    else if (c == '<') --x;
    else if (c == '>') ++x;
    else return false;
  }
  return false;
}

}  // namespace

TEST_CASE("optimal return of the default layout is 0.92") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  const OptimalSolution opt = value_iteration(world.mdp(), world.mdp().rewards());
  CHECK(opt.values.at_initial(world.mdp().d0()) == doctest::Approx(0.92).epsilon(1e-12));
  CHECK(shortest_safe_route(world.layout()) == 9);
}

TEST_CASE("optimal return is one minus the step cost of the shortest safe route") {
  std::vector<GridLayout> layouts{GridLayout::default_layout()};
  GridLayout extra = GridLayout::default_layout();
  extra.walls.insert({4, 3});
  layouts.push_back(extra);
  GridLayout open = GridLayout::blank();
  open.goal = Cell{0, 0};
  open.start = Cell{4, 4};
  open.start_dir = Direction::north;
  layouts.push_back(open);
  for (const GridLayout& layout : layouts) {
    const GridWorld world = build_gridworld(layout);
    const int k = shortest_safe_route(layout) - 1;
    const double v = value_iteration(world.mdp(), world.mdp().rewards()).values.at_initial(world.mdp().d0());
    CHECK(v == doctest::Approx(1.0 - 0.01 * k).epsilon(1e-12));
  }
}

TEST_CASE("four left turns return to the same state") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  for (std::size_t s = 0; s < world.cell_states(); ++s) {
    std::size_t x = s;
    for (int i = 0; i < 4; ++i) x = world.step(x, Action::left).first;
    CHECK(x == s);
  }
  for (Direction d : {Direction::north, Direction::west, Direction::east, Direction::south}) {
    CHECK(turn_left(turn_left(turn_left(turn_left(d)))) == d);
    CHECK(turn_right(turn_left(d)) == d);
  }
}

TEST_CASE("lava is a terminal that keeps its step reward") {
  GridRewards zero_after;
  zero_after.lava_step = 0.0;
  const GridWorld world = build_gridworld(GridLayout::default_layout(), zero_after);
  const std::size_t start = world.start_state();
  const auto [turned, r0] = world.step(start, Action::right);
  const auto [mid, r1] = world.step(turned, Action::forward);
  const auto [lava, r2] = world.step(mid, Action::forward);
  CHECK(r0 == -0.01);
  CHECK(r1 == -0.01);
  CHECK(r2 == -1.0);
  CHECK(lava == world.lava_state());
  for (Action a : {Action::forward, Action::left, Action::right}) {
    const auto [next, r] = world.step(lava, a);
    CHECK(next == world.lava_state());
    CHECK(r == 0.0);
  }
  CHECK(world.mdp().is_terminal(world.lava_state()));

  const GridWorld shipped = build_gridworld(GridLayout::default_layout());
  CHECK(shipped.step(shipped.lava_state(), Action::left).second == -0.01);
}

TEST_CASE("goal is absorbing with zero reward and zero value") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  for (Action a : {Action::forward, Action::left, Action::right}) {
    const auto [next, r] = world.step(world.goal_state(), a);
    CHECK(next == world.goal_state());
    CHECK(r == 0.0);
  }
  const OptimalSolution opt = value_iteration(world.mdp(), world.mdp().rewards());
  for (std::size_t h = 0; h < world.horizon(); ++h) CHECK(opt.values.at(h, world.goal_state()) == 0.0);
  const std::size_t next_to_goal = world.encode({{1, 4}, Direction::west});
  const auto [g, r] = world.step(next_to_goal, Action::forward);
  CHECK(g == world.goal_state());
  CHECK(r == 1.0);
}

TEST_CASE("forward into a wall or the border is a no-op") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  const std::size_t facing_wall = world.encode({{3, 2}, Direction::west});
  CHECK(world.step(facing_wall, Action::forward).first == facing_wall);
  CHECK(world.step(facing_wall, Action::forward).second == -0.01);
  const std::size_t facing_border = world.encode({{4, 0}, Direction::east});
  CHECK(world.step(facing_border, Action::forward).first == facing_border);
}

TEST_CASE("dynamics are deterministic") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  const FiniteMdp& mdp = world.mdp();
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      int ones = 0;
      for (double p : mdp.next(s, a)) {
        CHECK((p == 0.0 || p == 1.0));
        ones += p == 1.0;
      }
      CHECK(ones == 1);
    }
  }
  CHECK(mdp.n_actions() == 3);
  CHECK(mdp.horizon() == 20);
}

TEST_CASE("state encoding is a bijection") {
  const GridWorld world = build_gridworld(GridLayout::default_layout());
  CHECK(world.n_states() == 102);
  for (std::size_t s = 0; s < world.cell_states(); ++s) {
    const auto decoded = world.decode(s);
    REQUIRE(decoded.has_value());
    CHECK(world.encode(*decoded) == s);
  }
  CHECK_FALSE(world.decode(world.goal_state()).has_value());
  CHECK_FALSE(world.decode(world.lava_state()).has_value());
}

TEST_CASE("layouts are validated") {
  GridLayout start_in_lava = GridLayout::default_layout();
  start_in_lava.start = Cell{2, 0};
  CHECK_THROWS_AS(start_in_lava.validate(), ValidationError);
  GridLayout goal_in_wall = GridLayout::default_layout();
  goal_in_wall.goal = Cell{2, 1};
  CHECK_THROWS_AS(goal_in_wall.validate(), ValidationError);
  GridLayout sealed = GridLayout::default_layout();
  sealed.lava.insert({0, 3});
  sealed.lava.insert({1, 4});
  CHECK_THROWS_AS(build_gridworld(sealed), ValidationError);
  CHECK_THROWS_AS(GridLayout::blank().validate(), ValidationError);
}

TEST_CASE("layout text round-trips") {
  const GridLayout layout = GridLayout::default_layout();
  const GridLayout back = GridLayout::parse(layout.to_text());
  CHECK(back.walls == layout.walls);
  CHECK(back.lava == layout.lava);
  CHECK(back.goal == layout.goal);
  CHECK(back.start == layout.start);
  CHECK(back.start_dir == layout.start_dir);
  CHECK(back.to_text() == layout.to_text());
  CHECK_THROWS_AS(GridLayout::parse("..x\n...\ndir=N\n"), ParseError);
  CHECK_THROWS_AS(GridLayout::parse("...\n..\ndir=N\n"), ParseError);
}

TEST_CASE("rendering") {
  const std::string blank = render_ascii(GridLayout::blank());
  CHECK(blank == "+-----+\n|.....|\n|.....|\n|.....|\n|.....|\n|.....|\n+-----+\n");

  GridLayout with_goal = GridLayout::blank();
  with_goal.goal = Cell{0, 4};
  CHECK(render_ascii(with_goal).find("|K....|") != std::string::npos);

  const GridLayout layout = GridLayout::default_layout();
  const GridWorld world = build_gridworld(layout);
  const Policy optimal = value_iteration(world.mdp(), world.mdp().rewards()).policy;
  const std::string picture = render_ascii(layout, &optimal);
  CHECK(arrows_reach_goal(picture, *layout.start));
  CHECK(picture == render_ascii(layout, &optimal));
  CHECK_THROWS(render_ascii(GridLayout::blank(), &optimal));
}

TEST_CASE("lava-seeking policy heads for the topmost lava cell") {
  const GridLayout layout = GridLayout::default_layout();
  CHECK(topmost_lava(layout) == Cell{2, 0});
  const GridWorld world = build_gridworld(layout);
  const Policy pi = lava_seeking_policy(world, topmost_lava(layout));
  std::size_t s = world.start_state();
  int steps = 0;
  while (s != world.lava_state() && steps < 10) {
    s = world.step(s, static_cast<Action>(pi.mode(static_cast<std::size_t>(steps), s))).first;
    ++steps;
  }
  CHECK(s == world.lava_state());
  CHECK(steps == 3);
}
