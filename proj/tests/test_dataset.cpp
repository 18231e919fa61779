#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/gridworld.hpp"

using namespace survival;

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

// Pairs visited by a deterministic policy, stepping the grid by hand.
std::vector<Pair> trace(const grid::GridWorld& world, const Policy& pi) {
  std::vector<Pair> out;
  std::size_t s = world.start_state();
  for (std::size_t h = 0; h + 1 < world.horizon(); ++h) {
    const std::size_t a = pi.mode(pi.is_stationary() ? 0 : h, s);
    out.emplace_back(s, a);
    s = world.step(s, static_cast<grid::Action>(a)).first;
    if (s == world.goal_state() || s == world.lava_state()) break;
  }
  return out;
}

Dataset tiny(double r) {
  Trajectory traj{{0, 0, 0, 1, r, 1, false, false}, {0, 1, 1, 0, r, 0, true, false}};
  return Dataset(2, 2, 5, {traj});
}

Dataset ten_transitions() {
  std::vector<Trajectory> trajectories(2);
  for (std::size_t i = 0; i < 10; ++i) {
    trajectories[i / 5].push_back({i / 5, i % 5, i % 3, i % 2, 0.1 * static_cast<double>(i), (i + 1) % 3, false, false});
  }
  return Dataset(3, 2, 5, trajectories);
}

}  // namespace

TEST_CASE("rollout of the optimal grid policy reaches the goal in 9 steps") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Policy pi = value_iteration(world.mdp(), world.mdp().rewards()).policy;
  Rng rng(1);
  const Trajectory traj = rollout(world.mdp(), pi, TerminationRule{{}, 19}, rng);
  REQUIRE(traj.size() == 9);
  CHECK(traj.back().terminal);
  CHECK_FALSE(traj.back().timeout);
  CHECK(traj.back().s_next == world.goal_state());
  CHECK(traj.back().r == 1.0);
  for (std::size_t t = 0; t < traj.size(); ++t) CHECK(traj[t].t == t);
}

TEST_CASE("rollout into lava stops at lava entry") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Policy pi = grid::lava_seeking_policy(world, grid::topmost_lava(world.layout()));
  Rng rng(1);
  const Trajectory traj = rollout(world.mdp(), pi, TerminationRule{{}, 19}, rng);
  REQUIRE(traj.size() == 3);
  CHECK(traj.back().terminal);
  CHECK(traj.back().s_next == world.lava_state());
  CHECK(traj.back().r == -1.0);
}

TEST_CASE("spinning in place times out after H-1 steps") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Policy spin = Policy::deterministic(3, std::vector<std::size_t>(world.n_states(), 1));
  Rng rng(1);
  const Trajectory traj = rollout(world.mdp(), spin, TerminationRule{{}, world.horizon() - 1}, rng);
  CHECK(traj.size() == 19);
  CHECK(traj.back().timeout);
  CHECK_FALSE(traj.back().terminal);
}

TEST_CASE("stop states end a rollout on a discounted model") {
  const TabularMdp mdp = oracle::random_mdp(3, 4, 2, 0.9);
  Rng rng(2);
  TerminationRule rule{{0, 1, 2, 3}, 50};
  const Trajectory traj = rollout(mdp, Policy::uniform(4, 2), rule, rng);
  CHECK(traj.size() == 1);
  CHECK(traj[0].terminal);
}

TEST_CASE("grid recipe: 100 goal episodes and 400 lava episodes") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = oracle::grid_recipe(world, 0, false);
  CHECK(d.n_episodes() == 500);
  int goal = 0, lava = 0;
  for (const Trajectory& traj : d.trajectories()) {
    goal += traj.back().s_next == world.goal_state();
    lava += traj.back().s_next == world.lava_state();
    CHECK(traj.back().terminal);
  }
  CHECK(goal == 100);
  CHECK(lava == 400);
  CHECK(d.n_transitions() == 100 * 9 + 400 * 3);
}

TEST_CASE("collection is byte-deterministic under its seed") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  CHECK(write_dataset(oracle::grid_recipe(world, 7, true)) == write_dataset(oracle::grid_recipe(world, 7, true)));

  const TabularMdp mdp = oracle::random_mdp(5, 4, 2, 0.9);
  CollectionSpec spec;
  spec.behaviors = {{Policy::uniform(4, 2), 1.0, "uniform"}};
  spec.n_episodes = 30;
  spec.rule.timeout_at = 10;
  spec.seed = 11;
  const std::string a = write_dataset(collect(mdp, spec));
  CHECK(a == write_dataset(collect(mdp, spec)));
  spec.seed = 12;
  CHECK(a != write_dataset(collect(mdp, spec)));
}

TEST_CASE("collection spec validation") {
  CollectionSpec spec;
  spec.behaviors = {{Policy::uniform(2, 2), 1.0, "uniform"}};
  spec.n_episodes = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.n_episodes = 3;
  CHECK_NOTHROW(spec.validate());
  spec.behaviors[0].weight = 0.5;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.behaviors.clear();
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("sampled mixing draws behaviors per episode") {
  const TabularMdp mdp = oracle::random_mdp(5, 3, 2, 0.9);
  CollectionSpec spec;
  spec.behaviors = {{Policy::deterministic(2, {0, 0, 0}), 0.5, "a0"}, {Policy::deterministic(2, {1, 1, 1}), 0.5, "a1"}};
  spec.n_episodes = 2000;
  spec.rule.timeout_at = 1;
  spec.mixing = Mixing::sampled;
  const Dataset d = collect(mdp, spec);
  std::size_t first = 0;
  for (const Trajectory& traj : d.trajectories()) first += traj[0].a == 0;
  CHECK(first > 900);
  CHECK(first < 1100);
  spec.mixing = Mixing::stratified;
  first = 0;
  const Dataset stratified = collect(mdp, spec);
  for (const Trajectory& traj : stratified.trajectories()) first += traj[0].a == 0;
  CHECK(first == 1000);
}

TEST_CASE("corruption touches rewards only") {
  CHECK(corrupt(tiny(0.5), {RewardKind::negative}).trajectories()[0][0].r == -0.5);
  CHECK(corrupt(tiny(0.5), {RewardKind::zero}).trajectories()[0][1].r == 0.0);
  CHECK(corrupt(tiny(0.5), {RewardKind::original}).trajectories() == tiny(0.5).trajectories());

  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset base = oracle::grid_recipe(world, 0, true);
  const CorruptionSpec spec{RewardKind::random, 0.0, 1.0, 42};
  const Dataset x = corrupt(base, spec), y = corrupt(base, spec);
  CHECK(x == y);
  const auto bx = x.transitions(), bb = base.transitions();
  for (std::size_t i = 0; i < bx.size(); ++i) {
    CHECK(bx[i].r >= 0.0);
    CHECK(bx[i].r <= 1.0);
    Transition t = bx[i];
    t.r = bb[i].r;
    CHECK(t == bb[i]);
  }
  // Same corruption seed on a dataset from another collection seed gives the
  // same reward sequence.
  const auto other = corrupt(oracle::grid_recipe(world, 9, true), spec).transitions();
  for (std::size_t i = 0; i < std::min(other.size(), bx.size()); ++i) CHECK(other[i].r == bx[i].r);
  CHECK_THROWS_AS(corrupt(base, {RewardKind::random, 1.0, 0.0, 0}), ValidationError);
}

TEST_CASE("reward kind names") {
  for (RewardKind k : kAllRewardKinds) CHECK(parse_reward_kind(to_string(k)) == k);
  CHECK_THROWS(parse_reward_kind("bogus"));
}

TEST_CASE("strip_terminal_transitions") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = oracle::grid_recipe(world, 0, false);
  const Dataset stripped = strip_terminal_transitions(d);
  CHECK(stripped.n_transitions() == 100 * 8 + 400 * 2);
  for (const Transition& tr : stripped.transitions()) CHECK_FALSE(tr.terminal);
  CHECK(stripped.support().subset_of(d.support()));
  const Transition lava_entry = d.trajectories().back().back();
  CHECK(d.support().contains(lava_entry.s, lava_entry.a));
  CHECK_FALSE(stripped.support().contains(lava_entry.s, lava_entry.a));
  CHECK(stripped.count(lava_entry.s, lava_entry.a) == 0);

  const Dataset no_terminals = ten_transitions();
  CHECK(strip_terminal_transitions(no_terminals).trajectories() == no_terminals.trajectories());
}

TEST_CASE("split_folds") {
  const Dataset d = ten_transitions();
  const auto folds = split_folds(d, 5, 3);
  REQUIRE(folds.size() == 5);
  for (const Dataset& f : folds) CHECK(f.n_transitions() == 2);

  const auto one = split_folds(d, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].transitions() == d.transitions());

  const auto three = split_folds(d, 3, 8);
  std::size_t total = 0;
  for (std::size_t s = 0; s < d.n_states(); ++s) {
    for (std::size_t a = 0; a < d.n_actions(); ++a) {
      std::size_t recount = 0;
      for (const Dataset& f : three) recount += f.count(s, a);
      CHECK(recount == d.count(s, a));
    }
  }
  for (const Dataset& f : three) {
    CHECK(f.n_transitions() >= 3);
    CHECK(f.n_transitions() <= 4);
    total += f.n_transitions();
  }
  CHECK(total == 10);
  CHECK(split_folds(d, 3, 8)[1].transitions() == three[1].transitions());
  CHECK_THROWS_AS(split_folds(d, 11, 0), ValidationError);
  CHECK_THROWS_AS(split_folds(d, 0, 0), ValidationError);
}

TEST_CASE("support of the grid recipe is the two logged paths") {
  CHECK(Dataset(3, 2, 4, {}).support().empty());

  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = oracle::grid_recipe(world, 0, false);
  std::set<Pair> expected;
  for (const Pair& p : trace(world, value_iteration(world.mdp(), world.mdp().rewards()).policy)) expected.insert(p);
  for (const Pair& p : trace(world, grid::lava_seeking_policy(world, grid::topmost_lava(world.layout())))) {
    expected.insert(p);
  }
  const auto pairs = d.support().pairs();
  CHECK(std::set<Pair>(pairs.begin(), pairs.end()) == expected);
  CHECK(expected.size() == 12);

  const Dataset padded = extend_goal_absorption(d, world.mdp(), world.goal_state());
  CHECK(padded.support().size() == 13);
  CHECK(padded.support().contains(world.goal_state(), 0));
}

TEST_CASE("cached counts match a recount") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = oracle::grid_recipe(world, 4, true);
  std::vector<std::size_t> counts(d.n_states() * d.n_actions()), counts_h(d.horizon() * d.n_states() * d.n_actions());
  for (const Transition& tr : d.transitions()) {
    ++counts[tr.s * d.n_actions() + tr.a];
    ++counts_h[(tr.t * d.n_states() + tr.s) * d.n_actions() + tr.a];
  }
  for (std::size_t s = 0; s < d.n_states(); ++s) {
    std::size_t state_total = 0;
    for (std::size_t a = 0; a < d.n_actions(); ++a) {
      CHECK(d.count(s, a) == counts[s * d.n_actions() + a]);
      state_total += counts[s * d.n_actions() + a];
      for (std::size_t h = 0; h < d.horizon(); ++h) {
        CHECK(d.count_at(h, s, a) == counts_h[(h * d.n_states() + s) * d.n_actions() + a]);
      }
    }
    CHECK(d.state_count(s) == state_total);
  }
}

TEST_CASE("goal absorption pads goal episodes to full length") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = oracle::grid_recipe(world, 0, true);
  for (const Trajectory& traj : d.trajectories()) {
    if (traj.size() == 20) {
      CHECK(traj.back().s_next == world.goal_state());
      CHECK(traj.back().terminal);
      CHECK(traj[9].s == world.goal_state());
      CHECK(traj[9].r == 0.0);
    } else {
      CHECK(traj.size() == 3);
    }
  }
  CHECK(d.n_transitions() == 100 * 20 + 400 * 3);
}

TEST_CASE("empirical reward and transitions") {
  Trajectory traj{{0, 0, 0, 0, 1.0, 1, false, false}, {0, 1, 0, 0, 3.0, 0, false, false}, {0, 2, 0, 1, 5.0, 1, false, false}};
  const Dataset d(2, 2, 5, {traj});
  const StateActionTable r = data_reward(d);
  CHECK(r(0, 0) == 2.0);
  CHECK(r(0, 1) == 5.0);
  CHECK(r(1, 0) == 0.0);
  const std::vector<double> p = empirical_transition(d);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 1.0);
  CHECK(p[4] + p[5] == 0.0);
}

TEST_CASE("dataset csv round-trips") {
  const grid::GridWorld world = grid::build_gridworld(grid::GridLayout::default_layout());
  const Dataset d = corrupt(oracle::grid_recipe(world, 2, true), {RewardKind::random, 0.0, 1.0, 5});
  const std::string text = write_dataset(d);
  const Dataset back = parse_dataset(text);
  CHECK(back == d);
  CHECK(write_dataset(back) == text);
  CHECK_THROWS_AS(parse_dataset("# n_states=2\n# n_actions=2\n# horizon=3\n# provenance=\nepisode,t,s,a,r,s_next,terminal,timeout\n0,0,5,0,1,0,0,0\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_dataset("garbage\n"), ParseError);
}
