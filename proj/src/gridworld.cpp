#include "survival/gridworld.hpp"

#include <deque>
#include <map>
#include <sstream>
#include <vector>

#include "survival/errors.hpp"
#include "survival/text_io.hpp"

namespace survival::grid {

Direction turn_left(Direction d) {
  switch (d) {
    case Direction::north: return Direction::west;
    case Direction::west: return Direction::south;
    case Direction::south: return Direction::east;
    case Direction::east: return Direction::north;
  }
  return d;
}

Direction turn_right(Direction d) {
  switch (d) {
    case Direction::north: return Direction::east;
    case Direction::east: return Direction::south;
    case Direction::south: return Direction::west;
    case Direction::west: return Direction::north;
  }
  return d;
}

Cell ahead(Cell c, Direction d) {
  switch (d) {
    case Direction::north: return {c.x, c.y - 1};
    case Direction::west: return {c.x - 1, c.y};
    case Direction::east: return {c.x + 1, c.y};
    case Direction::south: return {c.x, c.y + 1};
  }
  return c;
}

char direction_char(Direction d) {
  switch (d) {
    case Direction::north: return 'N';
    case Direction::west: return 'W';
    case Direction::east: return 'E';
    case Direction::south: return 'S';
  }
  return '?';
}

namespace {

char arrow(Direction d) {
  switch (d) {
    case Direction::north: return '^';
    case Direction::west: return '<';
    case Direction::east: return '>';
    case Direction::south: return 'v';
  }
  return '?';
}

Direction parse_direction(std::string_view token) {
  if (token == "N") return Direction::north;
  if (token == "W") return Direction::west;
  if (token == "E") return Direction::east;
  if (token == "S") return Direction::south;
  throw ValidationError("direction must be one of N, W, E, S");
}

// Layout-level successor of a cell state; nullopt-free encoding via tags.
enum class Outcome { moved, goal, lava };

struct Move {
  Outcome outcome;
  GridState state;
};

Move layout_step(const GridLayout& layout, const GridState& state, Action action) {
  switch (action) {
    case Action::left: return {Outcome::moved, {state.cell, turn_left(state.dir)}};
    case Action::right: return {Outcome::moved, {state.cell, turn_right(state.dir)}};
    case Action::forward: break;
  }
  const Cell target = ahead(state.cell, state.dir);
  if (!layout.inside(target) || layout.is_wall(target)) return {Outcome::moved, state};
  if (target == layout.goal) return {Outcome::goal, {target, state.dir}};
  if (layout.is_lava(target)) return {Outcome::lava, {target, state.dir}};
  return {Outcome::moved, {target, state.dir}};
}

std::size_t cell_index(const GridLayout& layout, const GridState& s) {
  return (static_cast<std::size_t>(s.cell.y * layout.width + s.cell.x)) * 4 + static_cast<std::size_t>(s.dir);
}

}  // namespace

void GridLayout::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("grid must have positive size");
  if (!start || !goal) throw ValidationError("layout needs a start and a goal");
  if (!inside(*start) || !inside(*goal)) throw ValidationError("start and goal must lie inside the grid");
  if (is_wall(*start) || is_lava(*start) || *start == *goal) {
    throw ValidationError("start cell must be floor (not wall, lava or goal)");
  }
  if (is_wall(*goal)) throw ValidationError("goal cell cannot be a wall");
  for (const Cell& c : walls) {
    if (!inside(c)) throw ValidationError("wall outside the grid");
  }
  for (const Cell& c : lava) {
    if (!inside(c)) throw ValidationError("lava outside the grid");
    if (is_wall(c) || c == *goal) throw ValidationError("lava overlaps a wall or the goal");
  }
  // Lava-free reachability over (cell, heading).
  std::vector<bool> seen(static_cast<std::size_t>(width * height) * 4, false);
  std::deque<GridState> frontier{{*start, start_dir}};
  seen[cell_index(*this, frontier.front())] = true;
  while (!frontier.empty()) {
    const GridState cur = frontier.front();
    frontier.pop_front();
    for (Action a : {Action::forward, Action::left, Action::right}) {
      const Move m = layout_step(*this, cur, a);
      if (m.outcome == Outcome::goal) return;
      if (m.outcome == Outcome::lava) continue;
      const std::size_t idx = cell_index(*this, m.state);
      if (!seen[idx]) {
        seen[idx] = true;
        frontier.push_back(m.state);
      }
    }
  }
  throw ValidationError("goal is unreachable from the start without crossing lava");
}

GridLayout GridLayout::default_layout() {
  GridLayout layout;
  layout.walls = {{2, 1}, {2, 2}, {2, 3}};
  layout.lava = {{2, 0}, {1, 3}};
  layout.goal = {0, 4};
  layout.start = {4, 0};
  layout.start_dir = Direction::south;
  return layout;
}

GridLayout GridLayout::blank(int width, int height) {
  GridLayout layout;
  layout.width = width;
  layout.height = height;
  return layout;
}

GridLayout GridLayout::parse(const std::string& text) {
  GridLayout layout;
  layout.walls.clear();
  layout.lava.clear();
  std::vector<std::string> rows;
  std::optional<Direction> dir;
  int goals = 0, starts = 0;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || (line.starts_with("# "))) continue;
    if (line.starts_with("dir=")) {
      try {
        dir = parse_direction(trim(line.substr(4)));
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), line_no, "dir");
      }
      continue;
    }
    rows.emplace_back(line);
  }
  if (rows.empty()) throw ParseError("layout has no grid rows", 0, "grid");
  if (!dir) throw ParseError("layout needs a dir= line", 0, "dir");
  layout.height = static_cast<int>(rows.size());
  layout.width = static_cast<int>(rows.front().size());
  for (int y = 0; y < layout.height; ++y) {
    if (static_cast<int>(rows[y].size()) != layout.width) throw ParseError("grid rows differ in width", y + 1, "grid");
    for (int x = 0; x < layout.width; ++x) {
      const Cell c{x, y};
      switch (rows[y][x]) {
        case '.': break;
        case '#': layout.walls.insert(c); break;
        case '~': layout.lava.insert(c); break;
        case 'K': layout.goal = c; ++goals; break;
        case 'S': layout.start = c; ++starts; break;
        default: throw ParseError(std::string("unknown layout character '") + rows[y][x] + "'", y + 1, "grid");
      }
    }
  }
  if (goals != 1 || starts != 1) throw ParseError("layout needs exactly one K and one S", 0, "grid");
  layout.start_dir = *dir;
  layout.validate();
  return layout;
}

GridLayout GridLayout::load(const std::string& path) { return parse(read_file(path)); }

std::string GridLayout::to_text() const {
  std::string out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Cell c{x, y};
      char ch = '.';
      if (is_wall(c)) ch = '#';
      else if (is_lava(c)) ch = '~';
      else if (goal && c == *goal) ch = 'K';
      else if (start && c == *start) ch = 'S';
      out += ch;
    }
    out += '\n';
  }
  out += "dir=";
  out += direction_char(start_dir);
  out += '\n';
  return out;
}

namespace {

FiniteMdp make_mdp(const GridLayout& layout, const GridRewards& rewards, std::size_t horizon) {
  const std::size_t cells = static_cast<std::size_t>(layout.width * layout.height) * 4;
  const std::size_t n = cells + 2;
  const std::size_t goal = cells, lava = cells + 1;
  std::vector<double> transition(n * kActionCount * n, 0.0);
  StateActionTable reward(n, kActionCount);
  auto set = [&](std::size_t s, std::size_t a, std::size_t t, double r) {
    transition[(s * kActionCount + a) * n + t] = 1.0;
    reward(s, a) = r;
  };
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      for (int d = 0; d < 4; ++d) {
        const GridState state{{x, y}, static_cast<Direction>(d)};
        const std::size_t s = cell_index(layout, state);
        for (std::size_t a = 0; a < kActionCount; ++a) {
          const Move m = layout_step(layout, state, static_cast<Action>(a));
          switch (m.outcome) {
            case Outcome::goal: set(s, a, goal, rewards.goal); break;
            case Outcome::lava: set(s, a, lava, rewards.lava); break;
            case Outcome::moved: set(s, a, cell_index(layout, m.state), rewards.step); break;
          }
        }
      }
    }
  }
  for (std::size_t a = 0; a < kActionCount; ++a) {
    set(goal, a, goal, 0.0);
    set(lava, a, lava, rewards.lava_step);
  }
  std::vector<double> d0(n, 0.0);
  d0[cell_index(layout, {*layout.start, layout.start_dir})] = 1.0;
  return FiniteMdp(n, kActionCount, std::move(transition), std::move(reward), std::move(d0), horizon, {goal, lava});
}

}  // namespace

GridWorld::GridWorld(GridLayout layout, GridRewards rewards, std::size_t horizon)
    : layout_((layout.validate(), std::move(layout))),
      rewards_(rewards),
      mdp_(make_mdp(layout_, rewards_, horizon)) {}

std::size_t GridWorld::encode(const GridState& state) const {
  if (!layout_.inside(state.cell)) throw ShapeError("cell outside the grid");
  return cell_index(layout_, state);
}

std::optional<GridState> GridWorld::decode(std::size_t index) const {
  if (index >= n_states()) throw ShapeError("state index out of range");
  if (index >= cell_states()) return std::nullopt;
  const int d = static_cast<int>(index % 4);
  const int cell = static_cast<int>(index / 4);
  return GridState{{cell % layout_.width, cell / layout_.width}, static_cast<Direction>(d)};
}

std::pair<std::size_t, double> GridWorld::step(std::size_t state, Action action) const {
  const auto a = static_cast<std::size_t>(action);
  auto row = mdp_.next(state, a);
  return {argmax_lowest(row), mdp_.reward(state, a)};
}

GridWorld build_gridworld(const GridLayout& layout, const GridRewards& rewards, std::size_t horizon) {
  return GridWorld(layout, rewards, horizon);
}

Cell topmost_lava(const GridLayout& layout) {
  if (layout.lava.empty()) throw ValidationError("layout has no lava");
  Cell best = *layout.lava.begin();
  for (const Cell& c : layout.lava) {
    if (c.y < best.y || (c.y == best.y && c.x < best.x)) best = c;
  }
  return best;
}

Policy lava_seeking_policy(const GridWorld& world, Cell lava_cell) {
  const GridLayout& layout = world.layout();
  if (!layout.is_lava(lava_cell)) throw ValidationError("target cell is not lava");
  const std::size_t cells = world.cell_states();
  std::vector<std::ptrdiff_t> parent(cells, -1);
  std::vector<std::size_t> via(cells, 0);
  std::vector<bool> seen(cells, false);
  const GridState start{*layout.start, layout.start_dir};
  std::deque<GridState> frontier{start};
  seen[world.encode(start)] = true;
  std::optional<std::pair<GridState, std::size_t>> hit;
  while (!frontier.empty() && !hit) {
    const GridState cur = frontier.front();
    frontier.pop_front();
    for (std::size_t a = 0; a < kActionCount && !hit; ++a) {
      const Move m = layout_step(layout, cur, static_cast<Action>(a));
      if (m.outcome == Outcome::lava && m.state.cell == lava_cell) {
        hit = {cur, a};
      } else if (m.outcome == Outcome::moved) {
        const std::size_t idx = world.encode(m.state);
        if (!seen[idx]) {
          seen[idx] = true;
          parent[idx] = static_cast<std::ptrdiff_t>(world.encode(cur));
          via[idx] = a;
          frontier.push_back(m.state);
        }
      }
    }
  }
  if (!hit) throw ValidationError("lava cell is unreachable from the start");

  std::vector<std::size_t> actions(world.n_states(), 0);
  std::size_t s = world.encode(hit->first);
  actions[s] = hit->second;
  while (parent[s] >= 0) {
    const std::size_t p = static_cast<std::size_t>(parent[s]);
    actions[p] = via[s];
    s = p;
  }
  return Policy::deterministic(kActionCount, actions);
}

std::string render_ascii(const GridLayout& layout, const Policy* policy) {
  std::vector<std::string> canvas(static_cast<std::size_t>(layout.height), std::string(static_cast<std::size_t>(layout.width), '.'));
  auto at = [&](Cell c) -> char& { return canvas[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)]; };
  for (const Cell& c : layout.walls) at(c) = '#';
  for (const Cell& c : layout.lava) at(c) = '~';
  if (layout.goal) at(*layout.goal) = 'K';
  if (layout.start) at(*layout.start) = 'S';

  if (policy != nullptr) {
    if (!layout.start) throw ValidationError("tracing a policy needs a start cell");
    const std::size_t cells = static_cast<std::size_t>(layout.width * layout.height) * 4;
    if (policy->n_states() < cells) throw ShapeError("policy does not cover the grid states");
    const std::size_t steps = policy->is_stationary() ? cells : policy->horizon();
    GridState cur{*layout.start, layout.start_dir};
    for (std::size_t h = 0; h < steps; ++h) {
      const auto action = static_cast<Action>(policy->mode(h, cell_index(layout, cur)));
      const Move m = layout_step(layout, cur, action);
      if (action == Action::forward && !(m.outcome == Outcome::moved && m.state.cell == cur.cell)) {
        at(cur.cell) = arrow(cur.dir);
      }
      if (m.outcome != Outcome::moved) break;
      cur = m.state;
    }
  }

  std::string border = "+" + std::string(static_cast<std::size_t>(layout.width), '-') + "+\n";
  std::string out = border;
  for (const std::string& row : canvas) out += "|" + row + "|\n";
  out += border;
  return out;
}

}  // namespace survival::grid
