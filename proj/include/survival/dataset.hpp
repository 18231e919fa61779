#pragma once

// Offline datasets: logged transitions, counts, supports, collection by
// behavior-policy rollouts, reward corruption and fold splitting.

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "survival/mdp.hpp"
#include "survival/rng.hpp"

namespace survival {

struct Transition {
  std::size_t episode = 0;
  std::size_t t = 0;
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
  /// Environment terminal (or a stop state) was entered.
  bool terminal = false;
  /// Cut by the timeout rule.
  bool timeout = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

using Trajectory = std::vector<Transition>;

/// Set of state-action pairs, stored as a dense mask.
class Support {
 public:
  Support() = default;
  Support(std::size_t n_states, std::size_t n_actions) : n_states_(n_states), n_actions_(n_actions), mask_(n_states * n_actions, false) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  bool contains(std::size_t s, std::size_t a) const { return mask_[s * n_actions_ + a]; }
  void insert(std::size_t s, std::size_t a) { mask_[s * n_actions_ + a] = true; }
  void erase(std::size_t s, std::size_t a) { mask_[s * n_actions_ + a] = false; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  bool subset_of(const Support& other) const;
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
  /// True when some action at s is in the set.
  bool covers_state(std::size_t s) const;

  static Support full(std::size_t n_states, std::size_t n_actions);

  friend bool operator==(const Support&, const Support&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<bool> mask_;
};

class Dataset {
 public:
  Dataset(std::size_t n_states, std::size_t n_actions, std::size_t horizon, std::vector<Trajectory> trajectories,
          std::string provenance = {});

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  /// Every transition has t < horizon.
  std::size_t horizon() const { return horizon_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t n_transitions() const { return n_transitions_; }
  std::size_t n_episodes() const { return trajectories_.size(); }
  bool empty() const { return n_transitions_ == 0; }

  std::size_t count(std::size_t s, std::size_t a) const { return counts_[s * n_actions_ + a]; }
  std::size_t count_at(std::size_t h, std::size_t s, std::size_t a) const {
    return counts_h_[(h * n_states_ + s) * n_actions_ + a];
  }
  std::size_t state_count(std::size_t s) const;

  Support support() const;
  Support support_at(std::size_t h) const;

  /// Transitions in trajectory order.
  std::vector<Transition> transitions() const;

  friend bool operator==(const Dataset& x, const Dataset& y) {
    return x.n_states_ == y.n_states_ && x.n_actions_ == y.n_actions_ && x.horizon_ == y.horizon_ &&
           x.trajectories_ == y.trajectories_ && x.provenance_ == y.provenance_;
  }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t horizon_;
  std::vector<Trajectory> trajectories_;
  std::string provenance_;
  std::size_t n_transitions_ = 0;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> counts_h_;
};

struct TerminationRule {
  std::set<std::size_t> stop_on_states;
  /// Episodes are cut after this many steps (H-1 in the grid recipe).
  std::size_t timeout_at = 19;
};

struct Behavior {
  Policy policy;
  double weight = 1.0;
  std::string label;
};

enum class Mixing {
  /// Episode counts per behavior are round(weight * n) by largest remainder,
  /// laid out in behavior order.
  stratified,
  /// Each episode draws its behavior independently.
  sampled,
};

struct CollectionSpec {
  std::vector<Behavior> behaviors;
  std::size_t n_episodes = 1;
  TerminationRule rule;
  std::uint64_t seed = 0;
  Mixing mixing = Mixing::stratified;

  void validate() const;
  /// Stable digest of the whole spec.
  std::string digest() const;
};

enum class RewardKind { original, zero, random, negative };

std::string to_string(RewardKind kind);
RewardKind parse_reward_kind(std::string_view name);
inline constexpr RewardKind kAllRewardKinds[] = {RewardKind::original, RewardKind::zero, RewardKind::random,
                                                  RewardKind::negative};

struct CorruptionSpec {
  RewardKind kind = RewardKind::original;
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t seed = 0;
};

/// One episode. Terminal states of a FiniteMdp stop the episode like
/// rule.stop_on_states do.
Trajectory rollout(const MdpModel& mdp, const Policy& policy, const TerminationRule& rule, Rng& rng,
                   std::size_t episode = 0);
Trajectory rollout(const FiniteMdp& mdp, const Policy& policy, const TerminationRule& rule, Rng& rng,
                   std::size_t episode = 0);

/// Episode i is rolled out from its own substream (seed, "collect", i).
Dataset collect(const TabularMdp& mdp, const CollectionSpec& spec);
Dataset collect(const FiniteMdp& mdp, const CollectionSpec& spec);

Dataset corrupt(const Dataset& dataset, const CorruptionSpec& spec);
Dataset strip_terminal_transitions(const Dataset& dataset);
std::vector<Dataset> split_folds(const Dataset& dataset, std::size_t k_folds, std::uint64_t seed);

/// Pads every trajectory that ends by entering goal_state with absorbing
/// goal self-transitions (action 0, model reward) up to the dataset horizon,
/// so that only goal-reaching episodes have full length.
Dataset extend_goal_absorption(const Dataset& dataset, const FiniteMdp& mdp, std::size_t goal_state);

/// Empirical mean logged reward per pair; 0 off support.
StateActionTable data_reward(const Dataset& dataset);

/// Empirical transition tensor [s][a][s'] from counts. Rows of unseen pairs
/// are all zero.
std::vector<double> empirical_transition(const Dataset& dataset);

/// CSV text: '#' header lines (n_states, n_actions, horizon, provenance)
/// then `episode,t,s,a,r,s_next,terminal,timeout`.
std::string write_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::string& path);

}  // namespace survival
