#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "survival/dp.hpp"
#include "survival/rng.hpp"

namespace oracle {

namespace {

std::vector<double> random_rows(survival::Rng& rng, std::size_t rows, std::size_t width) {
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) total += (out[r * width + i] = rng.uniform() + 1e-3);
    for (std::size_t i = 0; i < width; ++i) out[r * width + i] /= total;
  }
  return out;
}

}  // namespace

TabularMdp random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions, double gamma) {
  survival::Rng rng = survival::Rng::substream(seed, "test-mdp");
  auto p = random_rows(rng, n_states * n_actions, n_states);
  std::vector<double> r(n_states * n_actions);
  for (double& x : r) x = rng.uniform(-1.0, 1.0);
  auto d0 = random_rows(rng, 1, n_states);
  return TabularMdp(n_states, n_actions, std::move(p), StateActionTable(n_states, n_actions, std::move(r)),
                    std::move(d0), gamma);
}

FiniteMdp random_finite_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions, std::size_t horizon) {
  survival::Rng rng = survival::Rng::substream(seed, "test-finite-mdp");
  auto p = random_rows(rng, n_states * n_actions, n_states);
  std::vector<double> r(n_states * n_actions);
  for (double& x : r) x = rng.uniform(-1.0, 1.0);
  auto d0 = random_rows(rng, 1, n_states);
  return FiniteMdp(n_states, n_actions, std::move(p), StateActionTable(n_states, n_actions, std::move(r)),
                   std::move(d0), horizon);
}

Policy random_policy(std::uint64_t seed, std::size_t n_states, std::size_t n_actions) {
  survival::Rng rng = survival::Rng::substream(seed, "test-policy");
  return Policy::stationary(n_states, n_actions, random_rows(rng, n_states, n_actions));
}

std::vector<double> random_vector(std::uint64_t seed, std::size_t n, double lo, double hi) {
  survival::Rng rng = survival::Rng::substream(seed, "test-vector");
  std::vector<double> out(n);
  for (double& x : out) x = rng.uniform(lo, hi);
  return out;
}

survival::Cmdp random_cmdp(std::uint64_t seed) {
  survival::Rng rng = survival::Rng::substream(seed, "test-cmdp");
  const std::size_t S = 2 + rng.below(3), A = 2;
  const double gamma = rng.uniform(0.5, 0.95);
  TabularMdp mdp = random_mdp(rng.next_u64(), S, A, gamma);
  StateActionTable f(S, A), g(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      f(s, a) = rng.uniform(-1.0, 1.0);
      g(s, a) = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
    }
  }
  // Cost range over deterministic policies, found by enumeration.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<std::size_t> actions(S);
  for (std::size_t code = 0; code < (std::size_t{1} << S); ++code) {
    for (std::size_t s = 0; s < S; ++s) actions[s] = (code >> s) & 1U;
    const double v = survival::initial_value(mdp, Policy::deterministic(A, actions), g);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double budget = lo + rng.uniform() * (hi - lo) * 0.5;
  return survival::Cmdp{mdp, f, g, budget};
}

std::vector<double> series_value(const TabularMdp& mdp, const Policy& policy, const StateActionTable& signal) {
  const std::size_t S = mdp.n_states();
  std::vector<double> term(S), value(S, 0.0), next(S);
  for (std::size_t s = 0; s < S; ++s) {
    term[s] = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) term[s] += policy.prob(0, s, a) * signal(s, a);
  }
  // term_t = gamma^t (P^pi)^t r^pi, accumulated until negligible.
  const std::vector<double> r = term;
  for (int t = 0; t < 100000; ++t) {
    double norm = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      value[s] += term[s];
      norm = std::max(norm, std::abs(term[s]));
    }
    if (norm < 1e-16) break;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        const double pa = policy.prob(0, s, a);
        if (pa == 0.0) continue;
        acc += pa * mdp.expected_next(s, a, term);
      }
      next[s] = mdp.gamma() * acc;
    }
    std::swap(term, next);
  }
  return value;
}

double best_deterministic_value(const TabularMdp& mdp, const StateActionTable& signal) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  std::size_t total = 1;
  for (std::size_t s = 0; s < S; ++s) total *= A;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> actions(S);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t s = 0; s < S; ++s) {
      actions[s] = c % A;
      c /= A;
    }
    const auto v = series_value(mdp, Policy::deterministic(A, actions), signal);
    double at_d0 = 0.0;
    for (std::size_t s = 0; s < S; ++s) at_d0 += mdp.d0()[s] * v[s];
    best = std::max(best, at_d0);
  }
  return best;
}

double mc_escape(const FiniteMdp& mdp, const Policy& policy, const survival::Support& support, std::size_t n,
                 std::uint64_t seed) {
  std::size_t escaped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    survival::Rng rng = survival::Rng::substream(seed, "test-escape", i);
    std::size_t s = rng.categorical(mdp.d0());
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
      const std::size_t a = rng.categorical(policy.probs(h, s));
      if (!support.contains(s, a)) {
        ++escaped;
        break;
      }
      s = rng.categorical(mdp.next(s, a));
    }
  }
  return static_cast<double>(escaped) / static_cast<double>(n);
}

survival::Dataset grid_recipe(const survival::grid::GridWorld& world, std::uint64_t seed, bool absorb) {
  using namespace survival;
  const FiniteMdp& mdp = world.mdp();
  CollectionSpec spec;
  spec.behaviors.push_back({value_iteration(mdp, mdp.rewards()).policy, 0.2, "optimal"});
  spec.behaviors.push_back({grid::lava_seeking_policy(world, grid::topmost_lava(world.layout())), 0.8, "lava"});
  spec.n_episodes = 500;
  spec.rule.timeout_at = mdp.horizon() - 1;
  spec.seed = seed;
  Dataset d = collect(mdp, spec);
  return absorb ? extend_goal_absorption(d, mdp, world.goal_state()) : d;
}

survival::Dataset expert_dataset(const FiniteMdp& mdp, std::size_t n_episodes, std::uint64_t seed) {
  survival::CollectionSpec spec;
  spec.behaviors.push_back({survival::value_iteration(mdp, mdp.rewards()).policy, 1.0, "expert"});
  spec.n_episodes = n_episodes;
  spec.rule.timeout_at = mdp.horizon();
  spec.seed = seed;
  return survival::collect(mdp, spec);
}

survival::Dataset expert_dataset(const TabularMdp& mdp, std::size_t n_episodes, std::size_t steps, std::uint64_t seed) {
  survival::CollectionSpec spec;
  spec.behaviors.push_back({survival::exact_optimal_policy(mdp, mdp.rewards()), 1.0, "expert"});
  spec.n_episodes = n_episodes;
  spec.rule.timeout_at = steps;
  spec.seed = seed;
  return survival::collect(mdp, spec);
}

}  // namespace oracle
