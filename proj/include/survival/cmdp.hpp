#pragma once

// Constrained MDPs: the implicit support-constrained problem, an exact
// Lagrangian solver, a brute-force oracle, sensitivity and duality checks,
// and survival measurements for learned policies.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "survival/dataset.hpp"
#include "survival/mdp.hpp"
#include "survival/mdp_io.hpp"

namespace survival {

/// max_pi V_f(d0) subject to V_g(d0) <= budget.
struct Cmdp {
  AnyMdp mdp;
  StateActionTable f;
  StateActionTable g;
  double budget = 0.0;

  void validate() const;
  bool is_finite() const { return std::holds_alternative<FiniteMdp>(mdp); }
  const MdpModel& model() const;
  Cmdp with_budget(double b) const;
};

/// Runs `first` with probability alpha per episode, `second` otherwise.
struct MixedPolicy {
  Policy first;
  Policy second;
  double alpha = 1.0;

  static MixedPolicy single(const Policy& p) { return {p, p, 1.0}; }
  bool is_single() const { return alpha == 1.0 || alpha == 0.0 || first == second; }
};

/// Return at d0 under `signal`; for mixtures the alpha-combination.
double mixture_value(const AnyMdp& mdp, const MixedPolicy& policy, const StateActionTable& signal);
double policy_value(const AnyMdp& mdp, const Policy& policy, const StateActionTable& signal);

struct CmdpSolution {
  double value = 0.0;
  double violation = 0.0;
  double lambda = 0.0;
  MixedPolicy policy;
  std::string method;

  nlohmann::ordered_json to_json() const;
};

/// f = data reward, g = 1 off the support, budget 0.
Cmdp build_implicit_cmdp(const AnyMdp& mdp, const StateActionTable& data_reward, const Support& support);

/// Bisection on the multiplier of max V_{f - lambda g}. The returned lambda
/// is the upper end of the final bracket. Throws InfeasibleError (carrying
/// the minimum achievable V_g) when no policy meets the budget.
CmdpSolution solve_lagrangian(const Cmdp& cmdp, double tol = 1e-9);

/// Exhaustive search over deterministic policies (time-indexed for finite
/// models) and their pairwise episode mixtures. Needs at most 4096 policies.
/// Its lambda is the slope of the active frontier segment (0 when a single
/// policy is optimal).
CmdpSolution brute_force_oracle(const Cmdp& cmdp);

struct SensitivityPoint {
  double delta = 0.0;
  double kappa = 0.0;
  double lambda = 0.0;
};

/// kappa(delta) = value(budget + delta) - value(budget); lambda from the
/// relaxed solve. Deltas must be non-negative and sorted.
std::vector<SensitivityPoint> sensitivity_curve(const Cmdp& cmdp, std::span<const double> deltas, double tol = 1e-9);

struct DualBoundCheck {
  bool pass = false;
  double delta = 0.0;
  double kappa = 0.0;
  double lambda_0 = 0.0;
  double lambda_delta = 0.0;
  /// kappa / delta - lambda_delta.
  double dual_margin = 0.0;
  /// lambda_0 * delta - kappa.
  double sensitivity_margin = 0.0;
};

/// pass iff lambda_delta <= kappa/delta + tol and kappa <= lambda_0 delta + tol.
DualBoundCheck dual_bound_check(const Cmdp& cmdp, double delta, double tol = 1e-6);

struct EscapeResult {
  /// Finite: P(some (s_t, a_t) with t <= H-1 is off support).
  /// Discounted: P(ever off support).
  double probability = 0.0;
  /// E[gamma^T] for the first off-support step T, which equals
  /// (1-gamma) sum_t gamma^t P(escaped by t). Finite models report the
  /// finite probability here as well.
  double discounted = 0.0;
};

EscapeResult escape_probability(const FiniteMdp& mdp, const Policy& policy, const Support& support);
EscapeResult escape_probability(const TabularMdp& mdp, const Policy& policy, const Support& support);
EscapeResult escape_probability(const AnyMdp& mdp, const Policy& policy, const Support& support);

struct SurvivalReport {
  double regret_data_reward = 0.0;
  double support_violation = 0.0;
  double escape_probability = 0.0;
  double discounted_escape = 0.0;
  /// The implicit-CMDP optimum used as the comparator.
  CmdpSolution reference;

  nlohmann::ordered_json to_json() const;
};

/// Solves the implicit CMDP of the dataset for the comparator and measures
/// the learned policy against it. An infeasible implicit CMDP raises
/// InfeasibleError naming the minimum support violation.
SurvivalReport verify_survival(const AnyMdp& true_mdp, const Dataset& dataset, const StateActionTable& data_reward,
                               const Policy& learned, double tol = 1e-9);

}  // namespace survival
