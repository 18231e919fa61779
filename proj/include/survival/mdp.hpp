#pragma once

// Tabular MDP representations: discounted (TabularMdp) and horizon-H
// (FiniteMdp) models, stationary and time-indexed policies, value tables.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace survival {

inline constexpr double kProbabilityTolerance = 1e-12;

/// Dense real table indexed by (state, action). Used for rewards, costs,
/// counts and Q-values alike.
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0);
  StateActionTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double operator()(std::size_t s, std::size_t a) const { return values_[s * n_actions_ + a]; }
  double& operator()(std::size_t s, std::size_t a) { return values_[s * n_actions_ + a]; }

  std::span<const double> row(std::size_t s) const {
    return {values_.data() + s * n_actions_, n_actions_};
  }
  const std::vector<double>& values() const { return values_; }

  double max() const;
  double min() const;
  double max_in_row(std::size_t s) const;
  bool same_shape(const StateActionTable& other) const {
    return n_states_ == other.n_states_ && n_actions_ == other.n_actions_;
  }

  friend bool operator==(const StateActionTable&, const StateActionTable&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

/// Transition kernel, reward table and initial distribution shared by both
/// MDP kinds. Transition rows are validated (and renormalized when within
/// tolerance) at construction.
class MdpModel {
 public:
  MdpModel(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
           StateActionTable reward, std::vector<double> d0);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  /// P(. | s, a) as a dense probability vector over next states.
  std::span<const double> next(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
  const StateActionTable& rewards() const { return reward_; }
  const std::vector<double>& transition() const { return transition_; }
  std::span<const double> d0() const { return d0_; }

  /// Expected one-step continuation sum_s' P(s'|s,a) v(s').
  double expected_next(std::size_t s, std::size_t a, std::span<const double> v) const;

 protected:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> transition_;
  StateActionTable reward_;
  std::vector<double> d0_;
};

class TabularMdp : public MdpModel {
 public:
  TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
             StateActionTable reward, std::vector<double> d0, double gamma);
  double gamma() const { return gamma_; }
  TabularMdp with_reward(StateActionTable reward) const;

 private:
  double gamma_;
};

class FiniteMdp : public MdpModel {
 public:
  FiniteMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
            StateActionTable reward, std::vector<double> d0, std::size_t horizon,
            std::vector<std::size_t> terminal_states = {});
  std::size_t horizon() const { return horizon_; }
  const std::vector<std::size_t>& terminal_states() const { return terminal_states_; }
  bool is_terminal(std::size_t s) const;
  FiniteMdp with_reward(StateActionTable reward) const;
  FiniteMdp with_horizon(std::size_t horizon) const;
  /// Same dynamics and rewards under discount gamma (terminal states stay absorbing).
  TabularMdp discounted(double gamma) const;

 private:
  std::size_t horizon_;
  std::vector<std::size_t> terminal_states_;
};

/// Action distributions per state (stationary) or per (h, state).
class Policy {
 public:
  enum class Kind { stationary, time_indexed };

  /// Placeholder: one state, one action.
  Policy() : Policy(Kind::stationary, 0, 1, 1, {1.0}) {}

  static Policy stationary(std::size_t n_states, std::size_t n_actions, std::vector<double> probs);
  static Policy time_indexed(std::size_t horizon, std::size_t n_states, std::size_t n_actions,
                             std::vector<double> probs);
  static Policy deterministic(std::size_t n_actions, const std::vector<std::size_t>& actions);
  /// actions laid out as [h * n_states + s].
  static Policy deterministic_time_indexed(std::size_t horizon, std::size_t n_actions,
                                           const std::vector<std::size_t>& actions);
  static Policy uniform(std::size_t n_states, std::size_t n_actions);

  Kind kind() const { return kind_; }
  bool is_stationary() const { return kind_ == Kind::stationary; }
  /// 0 for stationary policies.
  std::size_t horizon() const { return horizon_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  /// Action distribution at (h, s); h is ignored by stationary policies.
  std::span<const double> probs(std::size_t h, std::size_t s) const;
  double prob(std::size_t h, std::size_t s, std::size_t a) const { return probs(h, s)[a]; }
  /// Highest-probability action, lowest index on ties.
  std::size_t mode(std::size_t h, std::size_t s) const;
  bool is_deterministic() const;
  const std::vector<double>& table() const { return probs_; }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  Policy(Kind kind, std::size_t horizon, std::size_t n_states, std::size_t n_actions,
         std::vector<double> probs);

  Kind kind_;
  std::size_t horizon_;
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> probs_;
};

/// V over states (discounted) or over (h, s) for h in [0, H) (finite; V_H = 0
/// is implicit).
struct ValueTable {
  std::string signal_name;
  std::size_t n_states = 0;
  std::size_t horizon = 0;
  std::vector<double> values;

  bool is_stationary() const { return horizon == 0; }
  double at(std::size_t h, std::size_t s) const {
    return horizon == 0 ? values[s] : values[h * n_states + s];
  }
  std::span<const double> layer(std::size_t h) const {
    return {values.data() + (horizon == 0 ? 0 : h * n_states), n_states};
  }
  /// Expectation of the (first layer of the) value under d0.
  double at_initial(std::span<const double> d0) const;
};

/// Lowest-index argmax; exact comparisons so identical inputs give identical picks.
std::size_t argmax_lowest(std::span<const double> values);

}  // namespace survival
