#pragma once

// Oriented-agent grid navigation task with walls, lava and a key (goal).
//
// State encoding: ((y * width + x) * 4 + d) for every cell and heading, then
// one absorbing goal-reached state, then one lava terminal state. Headings
// are ordered N, W, E, S; actions are forward, turn-left, turn-right.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "survival/mdp.hpp"

namespace survival::grid {

enum class Direction { north = 0, west = 1, east = 2, south = 3 };
enum class Action { forward = 0, left = 1, right = 2 };
inline constexpr std::size_t kActionCount = 3;

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct GridState {
  Cell cell;
  Direction dir = Direction::north;
  friend bool operator==(const GridState&, const GridState&) = default;
};

Direction turn_left(Direction d);
Direction turn_right(Direction d);
Cell ahead(Cell c, Direction d);
char direction_char(Direction d);

struct GridLayout {
  int width = 5;
  int height = 5;
  std::set<Cell> walls;
  std::set<Cell> lava;
  /// Absent only in blank layouts used for drawing; validate() requires both.
  std::optional<Cell> goal;
  std::optional<Cell> start;
  Direction start_dir = Direction::south;

  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const { return walls.contains(c); }
  bool is_lava(Cell c) const { return lava.contains(c); }

  /// Throws ValidationError when start/goal placement is invalid or no
  /// lava-free route from start to goal exists.
  void validate() const;

  /// The shipped 5x5 layout: a wall column at x=2 (rows 1-3), lava at (2,0)
  /// and (1,3), key at (0,4), start at the top-right corner facing south.
  /// Its shortest safe route is 9 actions.
  static GridLayout default_layout();
  /// Floor-only grid without start or goal.
  static GridLayout blank(int width = 5, int height = 5);

  /// Rows of `. # ~ K S` followed by a `dir=N|W|E|S` line.
  static GridLayout parse(const std::string& text);
  static GridLayout load(const std::string& path);
  std::string to_text() const;
};

struct GridRewards {
  double step = -0.01;
  double lava = -1.0;
  double goal = 1.0;
  /// Reward per action while stuck in the lava terminal.
  double lava_step = -0.01;
};

class GridWorld {
 public:
  GridWorld(GridLayout layout, GridRewards rewards, std::size_t horizon);

  const GridLayout& layout() const { return layout_; }
  const FiniteMdp& mdp() const { return mdp_; }
  std::size_t horizon() const { return mdp_.horizon(); }

  std::size_t n_states() const { return cell_states() + 2; }
  std::size_t cell_states() const { return static_cast<std::size_t>(layout_.width * layout_.height) * 4; }
  std::size_t goal_state() const { return cell_states(); }
  std::size_t lava_state() const { return cell_states() + 1; }
  std::size_t start_state() const { return encode({*layout_.start, layout_.start_dir}); }

  std::size_t encode(const GridState& state) const;
  /// Empty for the goal-reached and lava terminal states.
  std::optional<GridState> decode(std::size_t index) const;

  /// Deterministic successor and reward of (state, action).
  std::pair<std::size_t, double> step(std::size_t state, Action action) const;

 private:
  GridLayout layout_;
  GridRewards rewards_;
  FiniteMdp mdp_;
};

/// Builds the task as a finite-horizon MDP (horizon 20 by default).
GridWorld build_gridworld(const GridLayout& layout, const GridRewards& rewards = {}, std::size_t horizon = 20);

/// Deterministic policy following a shortest action sequence that enters the
/// given lava cell from the start state. Used to log failing demonstrations.
Policy lava_seeking_policy(const GridWorld& world, Cell lava_cell);

/// The lava cell with the smallest row index (leftmost on ties).
Cell topmost_lava(const GridLayout& layout);

/// ASCII picture with a border. With a policy, the greedy route from the
/// start is traced and each cell left by a forward move shows an arrow.
std::string render_ascii(const GridLayout& layout, const Policy* policy = nullptr);

}  // namespace survival::grid
