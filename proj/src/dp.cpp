#include "survival/dp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "survival/errors.hpp"

namespace survival {

namespace {

void check_signal(const MdpModel& mdp, const StateActionTable& signal) {
  if (signal.n_states() != mdp.n_states() || signal.n_actions() != mdp.n_actions()) {
    throw ShapeError("signal table shape does not match the MDP");
  }
}

void check_policy(const MdpModel& mdp, const Policy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ShapeError("policy shape does not match the MDP");
  }
}

void check_policy(const TabularMdp& mdp, const Policy& policy) {
  check_policy(static_cast<const MdpModel&>(mdp), policy);
  if (!policy.is_stationary()) throw ShapeError("discounted models need a stationary policy");
}

void check_policy(const FiniteMdp& mdp, const Policy& policy) {
  check_policy(static_cast<const MdpModel&>(mdp), policy);
  if (!policy.is_stationary() && policy.horizon() != mdp.horizon()) {
    throw ShapeError("policy horizon does not match the MDP horizon");
  }
}

double policy_signal(const Policy& policy, std::size_t h, std::size_t s, const StateActionTable& signal) {
  auto probs = policy.probs(h, s);
  double acc = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] != 0.0) acc += probs[a] * signal(s, a);
  }
  return acc;
}

// P^pi as a dense matrix.
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Policy& policy) {
  const std::size_t n = mdp.n_states();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    auto probs = policy.probs(0, s);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      if (probs[a] == 0.0) continue;
      auto row = mdp.next(s, a);
      for (std::size_t t = 0; t < n; ++t) p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += probs[a] * row[t];
    }
  }
  return p;
}

double backup_max(const MdpModel& mdp, double discount, std::size_t s, std::span<const double> v,
                  const StateActionTable& signal) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
    best = std::max(best, signal(s, a) + discount * mdp.expected_next(s, a, v));
  }
  return best;
}

std::vector<std::size_t> greedy_actions(const MdpModel& mdp, double discount, std::span<const double> v,
                                        const StateActionTable& signal) {
  std::vector<std::size_t> actions(mdp.n_states());
  std::vector<double> q(mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) q[a] = signal(s, a) + discount * mdp.expected_next(s, a, v);
    actions[s] = argmax_lowest(q);
  }
  return actions;
}

}  // namespace

ValueTable policy_evaluation(const TabularMdp& mdp, const Policy& policy, const StateActionTable& signal,
                             const EvaluationOptions& options) {
  check_signal(mdp, signal);
  check_policy(mdp, policy);
  const std::size_t n = mdp.n_states();
  const double gamma = mdp.gamma();
  ValueTable out{"", n, 0, std::vector<double>(n, 0.0)};

  const bool direct = options.method == EvaluationMethod::direct ||
                      (options.method == EvaluationMethod::automatic && n <= options.direct_limit);
  if (direct) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) r(static_cast<Eigen::Index>(s)) = policy_signal(policy, 0, s, signal);
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
                             gamma * policy_transition(mdp, policy);
    Eigen::VectorXd v = system.partialPivLu().solve(r);
    for (std::size_t s = 0; s < n; ++s) out.values[s] = v(static_cast<Eigen::Index>(s));
    return out;
  }

  // Iterative sweep: residual contracts by gamma each pass.
  std::vector<double> r(n);
  for (std::size_t s = 0; s < n; ++s) r[s] = policy_signal(policy, 0, s, signal);
  std::vector<double> v(n, 0.0), next(n, 0.0);
  const double scale = std::max(1.0, *std::max_element(r.begin(), r.end(), [](double x, double y) {
    return std::abs(x) < std::abs(y);
  }));
  const std::size_t cap = gamma == 0.0 ? 2
                                       : static_cast<std::size_t>(std::ceil(
                                             std::log(options.tolerance * (1.0 - gamma) / (scale + 1.0)) /
                                             std::log(gamma))) + 100;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < cap && residual > options.tolerance; ++it) {
    residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      auto probs = policy.probs(0, s);
      double cont = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        if (probs[a] != 0.0) cont += probs[a] * mdp.expected_next(s, a, v);
      }
      next[s] = r[s] + gamma * cont;
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    std::swap(v, next);
  }
  if (residual > options.tolerance) throw ConvergenceError("iterative policy evaluation did not converge", residual);
  out.values = std::move(v);
  return out;
}

ValueTable policy_evaluation(const FiniteMdp& mdp, const Policy& policy, const StateActionTable& signal) {
  check_signal(mdp, signal);
  check_policy(mdp, policy);
  const std::size_t n = mdp.n_states();
  const std::size_t horizon = mdp.horizon();
  ValueTable out{"", n, horizon, std::vector<double>(horizon * n, 0.0)};
  std::vector<double> next(n, 0.0);
  for (std::size_t h = horizon; h-- > 0;) {
    for (std::size_t s = 0; s < n; ++s) {
      auto probs = policy.probs(h, s);
      double acc = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        if (probs[a] != 0.0) acc += probs[a] * (signal(s, a) + mdp.expected_next(s, a, next));
      }
      out.values[h * n + s] = acc;
    }
    std::copy_n(out.values.begin() + static_cast<std::ptrdiff_t>(h * n), n, next.begin());
  }
  return out;
}

OptimalSolution value_iteration(const TabularMdp& mdp, const StateActionTable& signal, double tol) {
  check_signal(mdp, signal);
  if (!(tol > 0.0)) throw ValidationError("value iteration tolerance must be positive");
  const std::size_t n = mdp.n_states();
  const double gamma = mdp.gamma();
  const double scale = std::max({std::abs(signal.max()), std::abs(signal.min()), signal.max() - signal.min()});

  std::size_t cap = 2;
  if (gamma > 0.0 && scale > 0.0) {
    const double needed = std::log(tol * (1.0 - gamma) / scale) / std::log(gamma);
    cap = static_cast<std::size_t>(std::max(0.0, std::ceil(needed))) + 10;
  }

  std::vector<double> v(n, 0.0), next(n, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < cap; ++it) {
    residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      next[s] = backup_max(mdp, gamma, s, v, signal);
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    std::swap(v, next);
    if (residual <= tol) break;
  }
  if (residual > tol) throw ConvergenceError("value iteration hit its iteration cap", residual);

  ValueTable values{"", n, 0, v};
  Policy policy = Policy::deterministic(mdp.n_actions(), greedy_actions(mdp, gamma, v, signal));
  return {std::move(values), std::move(policy)};
}

OptimalSolution value_iteration(const FiniteMdp& mdp, const StateActionTable& signal, double tol) {
  check_signal(mdp, signal);
  if (!(tol > 0.0)) throw ValidationError("value iteration tolerance must be positive");
  const std::size_t n = mdp.n_states();
  const std::size_t horizon = mdp.horizon();
  ValueTable values{"", n, horizon, std::vector<double>(horizon * n, 0.0)};
  std::vector<std::size_t> actions(horizon * n, 0);
  std::vector<double> next(n, 0.0), q(mdp.n_actions());
  for (std::size_t h = horizon; h-- > 0;) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) q[a] = signal(s, a) + mdp.expected_next(s, a, next);
      const std::size_t best = argmax_lowest(q);
      actions[h * n + s] = best;
      values.values[h * n + s] = q[best];
    }
    std::copy_n(values.values.begin() + static_cast<std::ptrdiff_t>(h * n), n, next.begin());
  }
  return {std::move(values), Policy::deterministic_time_indexed(horizon, mdp.n_actions(), actions)};
}

Policy exact_optimal_policy(const TabularMdp& mdp, const StateActionTable& signal) {
  const double scale = std::max(1.0, std::max(std::abs(signal.max()), std::abs(signal.min())));
  Policy policy = value_iteration(mdp, signal, 1e-12 * scale).policy;
  std::vector<std::size_t> actions(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) actions[s] = policy.mode(0, s);
  std::vector<double> q(mdp.n_actions());
  for (int round = 0; round < 1000; ++round) {
    const ValueTable v = policy_evaluation(mdp, policy, signal);
    bool changed = false;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) q[a] = signal(s, a) + mdp.gamma() * mdp.expected_next(s, a, v.values);
      const std::size_t best = argmax_lowest(q);
      // Only switch on a strict improvement beyond rounding noise; keeps the
      // iteration finite and the lowest-index choice among exact ties.
      const double margin = 1e-13 * std::max(1.0, std::abs(q[actions[s]]));
      if (best != actions[s] && q[best] > q[actions[s]] + margin) {
        actions[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
    policy = Policy::deterministic(mdp.n_actions(), actions);
  }
  return policy;
}

StateActionTable q_values(const TabularMdp& mdp, const ValueTable& v, const StateActionTable& signal) {
  check_signal(mdp, signal);
  if (!v.is_stationary() || v.n_states != mdp.n_states() || v.values.size() != mdp.n_states()) {
    throw ShapeError("value table shape does not match the discounted MDP");
  }
  StateActionTable q(mdp.n_states(), mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      q(s, a) = signal(s, a) + mdp.gamma() * mdp.expected_next(s, a, v.values);
    }
  }
  return q;
}

std::vector<StateActionTable> q_values(const FiniteMdp& mdp, const ValueTable& v, const StateActionTable& signal) {
  check_signal(mdp, signal);
  if (v.horizon != mdp.horizon() || v.n_states != mdp.n_states() ||
      v.values.size() != mdp.horizon() * mdp.n_states()) {
    throw ShapeError("value table shape does not match the finite MDP");
  }
  const std::vector<double> zeros(mdp.n_states(), 0.0);
  std::vector<StateActionTable> out;
  out.reserve(mdp.horizon());
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    std::span<const double> next = h + 1 < mdp.horizon() ? v.layer(h + 1) : std::span<const double>(zeros);
    StateActionTable q(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) q(s, a) = signal(s, a) + mdp.expected_next(s, a, next);
    }
    out.push_back(std::move(q));
  }
  return out;
}

StateActionTable occupancy(const TabularMdp& mdp, const Policy& policy) {
  check_policy(mdp, policy);
  const std::size_t n = mdp.n_states();
  const double gamma = mdp.gamma();
  // d_s^T (I - gamma P^pi) = (1 - gamma) d0^T
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
                           gamma * policy_transition(mdp, policy);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) rhs(static_cast<Eigen::Index>(s)) = (1.0 - gamma) * mdp.d0()[s];
  Eigen::VectorXd ds = system.transpose().partialPivLu().solve(rhs);
  StateActionTable d(n, mdp.n_actions());
  for (std::size_t s = 0; s < n; ++s) {
    auto probs = policy.probs(0, s);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) d(s, a) = ds(static_cast<Eigen::Index>(s)) * probs[a];
  }
  return d;
}

StateActionTable occupancy(const FiniteMdp&, const Policy&) {
  throw UnsupportedError("discounted occupancy is undefined for finite-horizon models; use time_averaged_occupancy");
}

StateActionTable time_averaged_occupancy(const FiniteMdp& mdp, const Policy& policy) {
  check_policy(mdp, policy);
  const std::size_t n = mdp.n_states();
  StateActionTable d(n, mdp.n_actions());
  std::vector<double> dist(mdp.d0().begin(), mdp.d0().end()), next(n);
  const double weight = 1.0 / static_cast<double>(mdp.horizon());
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      if (dist[s] == 0.0) continue;
      auto probs = policy.probs(h, s);
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        const double mass = dist[s] * probs[a];
        if (mass == 0.0) continue;
        d(s, a) += weight * mass;
        auto row = mdp.next(s, a);
        for (std::size_t t = 0; t < n; ++t) next[t] += mass * row[t];
      }
    }
    std::swap(dist, next);
  }
  return d;
}

double pd_lemma_residual(const TabularMdp& mdp, const Policy& pi, std::span<const double> h) {
  if (h.size() != mdp.n_states()) throw ShapeError("comparator function has the wrong length");
  const double v_pi = initial_value(mdp, pi, mdp.rewards());
  double h0 = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) h0 += mdp.d0()[s] * h[s];
  const StateActionTable d = occupancy(mdp, pi);
  double advantage = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      if (d(s, a) == 0.0) continue;
      advantage += d(s, a) * (mdp.reward(s, a) + mdp.gamma() * mdp.expected_next(s, a, h) - h[s]);
    }
  }
  return std::abs(v_pi - h0 - advantage / (1.0 - mdp.gamma()));
}

double initial_value(const TabularMdp& mdp, const Policy& policy, const StateActionTable& signal) {
  return policy_evaluation(mdp, policy, signal).at_initial(mdp.d0());
}

double initial_value(const FiniteMdp& mdp, const Policy& policy, const StateActionTable& signal) {
  return policy_evaluation(mdp, policy, signal).at_initial(mdp.d0());
}

double bellman_residual(const TabularMdp& mdp, std::span<const double> v, const StateActionTable& signal) {
  double residual = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    residual = std::max(residual, std::abs(backup_max(mdp, mdp.gamma(), s, v, signal) - v[s]));
  }
  return residual;
}

}  // namespace survival
