#pragma once

// Exact dynamic programming on tabular models.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "survival/mdp.hpp"

namespace survival {

enum class EvaluationMethod { automatic, direct, iterative };

struct EvaluationOptions {
  EvaluationMethod method = EvaluationMethod::automatic;
  /// Largest state count solved directly when method is automatic.
  std::size_t direct_limit = 2000;
  /// Sup-norm residual target of the iterative sweep.
  double tolerance = 1e-12;
};

/// V^pi for the given signal. Discounted: solves (I - gamma P^pi) V = r^pi.
/// Finite: backward recursion from V_H = 0. Stationary policies are
/// broadcast over h on finite models.
ValueTable policy_evaluation(const TabularMdp& mdp, const Policy& policy, const StateActionTable& signal,
                             const EvaluationOptions& options = {});
ValueTable policy_evaluation(const FiniteMdp& mdp, const Policy& policy, const StateActionTable& signal);

struct OptimalSolution {
  ValueTable values;
  Policy policy;
};

/// Bellman optimality iteration. The returned V has sup-norm Bellman residual
/// <= tol; the policy is greedy with lowest-index tie-break. Finite models
/// use exact backward induction and ignore tol.
OptimalSolution value_iteration(const TabularMdp& mdp, const StateActionTable& signal, double tol = 1e-10);
OptimalSolution value_iteration(const FiniteMdp& mdp, const StateActionTable& signal, double tol = 1e-10);

/// Value iteration followed by exact policy iteration until the greedy
/// policy is stable; used where an exactly optimal deterministic policy is needed.
Policy exact_optimal_policy(const TabularMdp& mdp, const StateActionTable& signal);

/// One-step backup Q(s,a) = signal(s,a) + gamma * E[V(s')].
StateActionTable q_values(const TabularMdp& mdp, const ValueTable& v, const StateActionTable& signal);
/// Q_h(s,a) = signal(s,a) + E[V_{h+1}(s')], one table per h.
std::vector<StateActionTable> q_values(const FiniteMdp& mdp, const ValueTable& v,
                                       const StateActionTable& signal);

/// Normalized discounted state-action occupancy d^pi.
StateActionTable occupancy(const TabularMdp& mdp, const Policy& policy);
/// Finite models have no discounted occupancy; this overload always throws
/// UnsupportedError. Use time_averaged_occupancy instead.
StateActionTable occupancy(const FiniteMdp& mdp, const Policy& policy);
/// (1/H) sum_h Pr(s_h = s, a_h = a).
StateActionTable time_averaged_occupancy(const FiniteMdp& mdp, const Policy& policy);

/// |V^pi(d0) - h(d0) - 1/(1-gamma) E_{d^pi}[r + gamma E h(s') - h(s)]|.
double pd_lemma_residual(const TabularMdp& mdp, const Policy& pi, std::span<const double> h);

/// Return at d0.
double initial_value(const TabularMdp& mdp, const Policy& policy, const StateActionTable& signal);
double initial_value(const FiniteMdp& mdp, const Policy& policy, const StateActionTable& signal);

/// Sup-norm Bellman optimality residual of v.
double bellman_residual(const TabularMdp& mdp, std::span<const double> v, const StateActionTable& signal);

}  // namespace survival
