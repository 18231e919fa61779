#include "survival/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "survival/errors.hpp"

namespace survival {

namespace {

// Rows within tolerance are renormalized in place; anything else is rejected.
void validate_distribution(std::span<double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError(what + " has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    throw ValidationError(what + " sums to " + std::to_string(sum) + ", not 1");
  }
  // Rounding-level deviations are kept so that renormalized rows are fixed points.
  if (std::abs(sum - 1.0) > static_cast<double>(row.size()) * std::numeric_limits<double>::epsilon()) {
    for (double& p : row) p /= sum;
  }
}

}  // namespace

StateActionTable::StateActionTable(std::size_t n_states, std::size_t n_actions, double fill)
    : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, fill) {}

StateActionTable::StateActionTable(std::size_t n_states, std::size_t n_actions,
                                   std::vector<double> values)
    : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
  if (values_.size() != n_states * n_actions) {
    throw ShapeError("state-action table expects " + std::to_string(n_states * n_actions) +
                     " entries, got " + std::to_string(values_.size()));
  }
}

double StateActionTable::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double StateActionTable::min() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double StateActionTable::max_in_row(std::size_t s) const {
  auto r = row(s);
  return *std::max_element(r.begin(), r.end());
}

MdpModel::MdpModel(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                   StateActionTable reward, std::vector<double> d0)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      d0_(std::move(d0)) {
  if (n_states_ == 0 || n_actions_ == 0) throw ValidationError("MDP needs at least one state and one action");
  if (transition_.size() != n_states_ * n_actions_ * n_states_) {
    throw ShapeError("transition tensor has " + std::to_string(transition_.size()) +
                     " entries, expected " + std::to_string(n_states_ * n_actions_ * n_states_));
  }
  if (reward_.n_states() != n_states_ || reward_.n_actions() != n_actions_) {
    throw ShapeError("reward table shape does not match the MDP");
  }
  if (d0_.size() != n_states_) throw ShapeError("initial distribution has the wrong length");
  for (double r : reward_.values()) {
    if (!std::isfinite(r)) throw ValidationError("reward table has a non-finite entry");
  }
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      std::span<double> row(transition_.data() + (s * n_actions_ + a) * n_states_, n_states_);
      validate_distribution(row, "transition row (" + std::to_string(s) + "," + std::to_string(a) + ")");
    }
  }
  validate_distribution(d0_, "initial distribution");
}

double MdpModel::expected_next(std::size_t s, std::size_t a, std::span<const double> v) const {
  auto row = next(s, a);
  double acc = 0.0;
  for (std::size_t t = 0; t < n_states_; ++t) {
    if (row[t] != 0.0) acc += row[t] * v[t];
  }
  return acc;
}

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                       StateActionTable reward, std::vector<double> d0, double gamma)
    : MdpModel(n_states, n_actions, std::move(transition), std::move(reward), std::move(d0)),
      gamma_(gamma) {
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
}

TabularMdp TabularMdp::with_reward(StateActionTable reward) const {
  return TabularMdp(n_states_, n_actions_, transition_, std::move(reward), d0_, gamma_);
}

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                     StateActionTable reward, std::vector<double> d0, std::size_t horizon,
                     std::vector<std::size_t> terminal_states)
    : MdpModel(n_states, n_actions, std::move(transition), std::move(reward), std::move(d0)),
      horizon_(horizon),
      terminal_states_(std::move(terminal_states)) {
  if (horizon_ == 0) throw ValidationError("horizon must be positive");
  std::sort(terminal_states_.begin(), terminal_states_.end());
  terminal_states_.erase(std::unique(terminal_states_.begin(), terminal_states_.end()),
                         terminal_states_.end());
  for (std::size_t s : terminal_states_) {
    if (s >= n_states_) throw ShapeError("terminal state index out of range");
    for (std::size_t a = 0; a < n_actions_; ++a) {
      if (next(s, a)[s] != 1.0) {
        throw ValidationError("terminal state " + std::to_string(s) + " must self-loop under every action");
      }
    }
  }
}

bool FiniteMdp::is_terminal(std::size_t s) const {
  return std::binary_search(terminal_states_.begin(), terminal_states_.end(), s);
}

FiniteMdp FiniteMdp::with_reward(StateActionTable reward) const {
  return FiniteMdp(n_states_, n_actions_, transition_, std::move(reward), d0_, horizon_, terminal_states_);
}

FiniteMdp FiniteMdp::with_horizon(std::size_t horizon) const {
  return FiniteMdp(n_states_, n_actions_, transition_, reward_, d0_, horizon, terminal_states_);
}

TabularMdp FiniteMdp::discounted(double gamma) const {
  return TabularMdp(n_states_, n_actions_, transition_, reward_, d0_, gamma);
}

Policy::Policy(Kind kind, std::size_t horizon, std::size_t n_states, std::size_t n_actions,
               std::vector<double> probs)
    : kind_(kind), horizon_(horizon), n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  const std::size_t layers = kind_ == Kind::stationary ? 1 : horizon_;
  if (n_states_ == 0 || n_actions_ == 0) throw ValidationError("policy needs states and actions");
  if (kind_ == Kind::time_indexed && horizon_ == 0) throw ValidationError("time-indexed policy needs a horizon");
  if (probs_.size() != layers * n_states_ * n_actions_) throw ShapeError("policy table has the wrong size");
  for (std::size_t i = 0; i < layers * n_states_; ++i) {
    validate_distribution(std::span<double>(probs_.data() + i * n_actions_, n_actions_),
                          "policy action distribution");
  }
}

Policy Policy::stationary(std::size_t n_states, std::size_t n_actions, std::vector<double> probs) {
  return Policy(Kind::stationary, 0, n_states, n_actions, std::move(probs));
}

Policy Policy::time_indexed(std::size_t horizon, std::size_t n_states, std::size_t n_actions,
                            std::vector<double> probs) {
  return Policy(Kind::time_indexed, horizon, n_states, n_actions, std::move(probs));
}

Policy Policy::deterministic(std::size_t n_actions, const std::vector<std::size_t>& actions) {
  std::vector<double> probs(actions.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw ShapeError("action index out of range");
    probs[s * n_actions + actions[s]] = 1.0;
  }
  return stationary(actions.size(), n_actions, std::move(probs));
}

Policy Policy::deterministic_time_indexed(std::size_t horizon, std::size_t n_actions,
                                          const std::vector<std::size_t>& actions) {
  if (horizon == 0 || actions.size() % horizon != 0) throw ShapeError("action table is not H x S");
  std::vector<double> probs(actions.size() * n_actions, 0.0);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] >= n_actions) throw ShapeError("action index out of range");
    probs[i * n_actions + actions[i]] = 1.0;
  }
  return time_indexed(horizon, actions.size() / horizon, n_actions, std::move(probs));
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
  return stationary(n_states, n_actions,
                    std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
}

std::span<const double> Policy::probs(std::size_t h, std::size_t s) const {
  const std::size_t layer = kind_ == Kind::stationary ? 0 : h;
  return {probs_.data() + (layer * n_states_ + s) * n_actions_, n_actions_};
}

std::size_t Policy::mode(std::size_t h, std::size_t s) const { return argmax_lowest(probs(h, s)); }

bool Policy::is_deterministic() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

double ValueTable::at_initial(std::span<const double> d0) const {
  auto v = layer(0);
  double acc = 0.0;
  for (std::size_t s = 0; s < d0.size(); ++s) {
    if (d0[s] != 0.0) acc += d0[s] * v[s];
  }
  return acc;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace survival
