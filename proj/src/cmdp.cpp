#include "survival/cmdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/text_io.hpp"

namespace survival {

namespace {

constexpr double kFeasibilityTolerance = 1e-12;

StateActionTable combine(const StateActionTable& f, const StateActionTable& g, double lambda) {
  std::vector<double> out(f.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.values()[i] - lambda * g.values()[i];
  return StateActionTable(f.n_states(), f.n_actions(), std::move(out));
}

Policy greedy(const AnyMdp& mdp, const StateActionTable& signal) {
  if (const auto* finite = std::get_if<FiniteMdp>(&mdp)) return value_iteration(*finite, signal).policy;
  return exact_optimal_policy(std::get<TabularMdp>(mdp), signal);
}

struct Evaluated {
  Policy policy;
  double vf;
  double vg;
};

Evaluated evaluate(const Cmdp& cmdp, Policy policy) {
  const double vf = policy_value(cmdp.mdp, policy, cmdp.f);
  const double vg = policy_value(cmdp.mdp, policy, cmdp.g);
  return {std::move(policy), vf, vg};
}

nlohmann::ordered_json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

}  // namespace

void Cmdp::validate() const {
  const MdpModel& m = model();
  if (f.n_states() != m.n_states() || f.n_actions() != m.n_actions() || g.n_states() != m.n_states() ||
      g.n_actions() != m.n_actions()) {
    throw ShapeError("CMDP signal shapes do not match the MDP");
  }
  if (!(budget >= 0.0)) throw ValidationError("CMDP budget must be non-negative");
}

const MdpModel& Cmdp::model() const {
  return std::visit([](const auto& m) -> const MdpModel& { return m; }, mdp);
}

Cmdp Cmdp::with_budget(double b) const {
  Cmdp out = *this;
  out.budget = b;
  return out;
}

double policy_value(const AnyMdp& mdp, const Policy& policy, const StateActionTable& signal) {
  return std::visit([&](const auto& m) { return initial_value(m, policy, signal); }, mdp);
}

double mixture_value(const AnyMdp& mdp, const MixedPolicy& policy, const StateActionTable& signal) {
  if (policy.alpha == 1.0) return policy_value(mdp, policy.first, signal);
  if (policy.alpha == 0.0) return policy_value(mdp, policy.second, signal);
  return policy.alpha * policy_value(mdp, policy.first, signal) +
         (1.0 - policy.alpha) * policy_value(mdp, policy.second, signal);
}

nlohmann::ordered_json CmdpSolution::to_json() const {
  nlohmann::ordered_json j;
  j["value"] = finite_or_string(value);
  j["violation"] = finite_or_string(violation);
  j["lambda"] = finite_or_string(lambda);
  j["method"] = method;
  j["alpha"] = policy.alpha;
  j["mixed"] = !policy.is_single();
  return j;
}

Cmdp build_implicit_cmdp(const AnyMdp& mdp, const StateActionTable& data_reward, const Support& support) {
  const MdpModel& m = std::visit([](const auto& x) -> const MdpModel& { return x; }, mdp);
  if (support.n_states() != m.n_states() || support.n_actions() != m.n_actions()) {
    throw ShapeError("support shape does not match the MDP");
  }
  StateActionTable g(m.n_states(), m.n_actions());
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    for (std::size_t a = 0; a < m.n_actions(); ++a) g(s, a) = support.contains(s, a) ? 0.0 : 1.0;
  }
  Cmdp out{mdp, data_reward, std::move(g), 0.0};
  out.validate();
  return out;
}

CmdpSolution solve_lagrangian(const Cmdp& cmdp, double tol) {
  cmdp.validate();
  if (!(tol > 0.0)) throw ValidationError("solver tolerance must be positive");
  const double b = cmdp.budget;

  const Evaluated least = evaluate(cmdp, greedy(cmdp.mdp, combine(StateActionTable(cmdp.g.n_states(), cmdp.g.n_actions()), cmdp.g, 1.0)));
  if (least.vg > b + kFeasibilityTolerance) {
    throw InfeasibleError("no policy meets the budget " + format_double(b) + ": the smallest achievable cost is " +
                              format_double(least.vg),
                          least.vg);
  }

  Evaluated lo = evaluate(cmdp, greedy(cmdp.mdp, cmdp.f));
  if (lo.vg <= b + kFeasibilityTolerance) return {lo.vf, lo.vg, 0.0, MixedPolicy::single(lo.policy), "lagrangian"};

  const double cap = (cmdp.f.max() - cmdp.f.min()) / tol;
  double lambda_lo = 0.0, lambda_hi = 1.0;
  Evaluated hi = evaluate(cmdp, greedy(cmdp.mdp, combine(cmdp.f, cmdp.g, lambda_hi)));
  while (hi.vg > b + kFeasibilityTolerance) {
    if (lambda_hi > cap) {
      throw ConvergenceError("multiplier search exceeded its ceiling " + format_double(cap), hi.vg - b);
    }
    lambda_lo = lambda_hi;
    lo = std::move(hi);
    lambda_hi *= 2.0;
    hi = evaluate(cmdp, greedy(cmdp.mdp, combine(cmdp.f, cmdp.g, lambda_hi)));
  }

  double alpha = 0.0, primal = hi.vf, gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 500; ++it) {
    // alpha is the weight on the budget-violating policy.
    alpha = std::clamp((b - hi.vg) / (lo.vg - hi.vg), 0.0, 1.0);
    primal = alpha * lo.vf + (1.0 - alpha) * hi.vf;
    const double dual_lo = lo.vf - lambda_lo * (lo.vg - b);
    const double dual_hi = hi.vf - lambda_hi * (hi.vg - b);
    gap = std::min(dual_lo, dual_hi) - primal;
    if (gap <= tol && lambda_hi - lambda_lo <= 1e-10 * std::max(1.0, lambda_hi)) break;
    const double mid = 0.5 * (lambda_lo + lambda_hi);
    if (mid <= lambda_lo || mid >= lambda_hi) break;
    Evaluated m = evaluate(cmdp, greedy(cmdp.mdp, combine(cmdp.f, cmdp.g, mid)));
    if (m.vg <= b + kFeasibilityTolerance) {
      lambda_hi = mid;
      hi = std::move(m);
    } else {
      lambda_lo = mid;
      lo = std::move(m);
    }
  }
  if (gap > tol) throw ConvergenceError("Lagrangian bisection left a primal-dual gap", gap);

  CmdpSolution out;
  out.value = primal;
  out.violation = alpha * lo.vg + (1.0 - alpha) * hi.vg;
  out.lambda = lambda_hi;
  out.policy = alpha == 0.0 ? MixedPolicy::single(hi.policy) : MixedPolicy{lo.policy, hi.policy, alpha};
  out.method = "lagrangian";
  return out;
}

CmdpSolution brute_force_oracle(const Cmdp& cmdp) {
  cmdp.validate();
  const MdpModel& m = cmdp.model();
  const std::size_t S = m.n_states(), A = m.n_actions();
  const std::size_t layers = cmdp.is_finite() ? std::get<FiniteMdp>(cmdp.mdp).horizon() : 1;
  const std::size_t slots = layers * S;
  std::size_t total = 1;
  for (std::size_t i = 0; i < slots; ++i) {
    total *= A;
    if (total > 4096) throw ValidationError("brute-force oracle is limited to 4096 deterministic policies");
  }

  std::vector<Evaluated> all;
  all.reserve(total);
  std::vector<std::size_t> actions(slots, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t code = k;
    for (std::size_t i = 0; i < slots; ++i) {
      actions[i] = code % A;
      code /= A;
    }
    Policy p = cmdp.is_finite() ? Policy::deterministic_time_indexed(layers, A, actions) : Policy::deterministic(A, actions);
    all.push_back(evaluate(cmdp, std::move(p)));
  }

  const double b = cmdp.budget;
  double min_vg = std::numeric_limits<double>::infinity();
  for (const Evaluated& e : all) min_vg = std::min(min_vg, e.vg);
  if (min_vg > b + kFeasibilityTolerance) {
    throw InfeasibleError("no policy meets the budget: the smallest achievable cost is " + format_double(min_vg), min_vg);
  }

  CmdpSolution best;
  best.value = -std::numeric_limits<double>::infinity();
  best.method = "brute_force";
  for (const Evaluated& p : all) {
    if (p.vg > b + kFeasibilityTolerance) continue;
    if (p.vf > best.value) {
      best.value = p.vf;
      best.violation = p.vg;
      best.lambda = 0.0;
      best.policy = MixedPolicy::single(p.policy);
    }
    for (const Evaluated& q : all) {
      if (q.vg <= b + kFeasibilityTolerance || q.vf <= p.vf) continue;
      const double alpha = (b - p.vg) / (q.vg - p.vg);
      const double value = alpha * q.vf + (1.0 - alpha) * p.vf;
      if (value > best.value) {
        best.value = value;
        best.violation = alpha * q.vg + (1.0 - alpha) * p.vg;
        best.lambda = (q.vf - p.vf) / (q.vg - p.vg);
        best.policy = MixedPolicy{q.policy, p.policy, alpha};
      }
    }
  }
  return best;
}

std::vector<SensitivityPoint> sensitivity_curve(const Cmdp& cmdp, std::span<const double> deltas, double tol) {
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] >= 0.0)) throw ValidationError("sensitivity deltas must be non-negative");
    if (i > 0 && deltas[i] < deltas[i - 1]) throw ValidationError("sensitivity deltas must be sorted");
  }
  const double base = solve_lagrangian(cmdp, tol).value;
  std::vector<SensitivityPoint> out;
  out.reserve(deltas.size());
  for (double delta : deltas) {
    const CmdpSolution relaxed = solve_lagrangian(cmdp.with_budget(cmdp.budget + delta), tol);
    out.push_back({delta, delta == 0.0 ? 0.0 : relaxed.value - base, relaxed.lambda});
  }
  return out;
}

DualBoundCheck dual_bound_check(const Cmdp& cmdp, double delta, double tol) {
  if (!(delta > 0.0)) throw ValidationError("dual bound check needs delta > 0");
  const CmdpSolution strict = solve_lagrangian(cmdp);
  const CmdpSolution relaxed = solve_lagrangian(cmdp.with_budget(cmdp.budget + delta));
  DualBoundCheck out;
  out.delta = delta;
  out.kappa = relaxed.value - strict.value;
  out.lambda_0 = strict.lambda;
  out.lambda_delta = relaxed.lambda;
  out.dual_margin = out.kappa / delta - out.lambda_delta;
  out.sensitivity_margin = out.lambda_0 * delta - out.kappa;
  out.pass = out.dual_margin >= -tol && out.sensitivity_margin >= -tol;
  return out;
}

namespace {

void check_policy_shape(const MdpModel& mdp, const Policy& policy, const Support& support) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ShapeError("policy shape does not match the MDP");
  }
  if (support.n_states() != mdp.n_states() || support.n_actions() != mdp.n_actions()) {
    throw ShapeError("support shape does not match the MDP");
  }
}

}  // namespace

EscapeResult escape_probability(const FiniteMdp& mdp, const Policy& policy, const Support& support) {
  check_policy_shape(mdp, policy, support);
  if (!policy.is_stationary() && policy.horizon() != mdp.horizon()) throw ShapeError("policy horizon mismatch");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  std::vector<double> inside(mdp.d0().begin(), mdp.d0().end()), next(S);
  double escaped = 0.0;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      if (inside[s] == 0.0) continue;
      auto probs = policy.probs(h, s);
      for (std::size_t a = 0; a < A; ++a) {
        const double mass = inside[s] * probs[a];
        if (mass == 0.0) continue;
        if (!support.contains(s, a)) {
          escaped += mass;
          continue;
        }
        auto row = mdp.next(s, a);
        for (std::size_t t = 0; t < S; ++t) next[t] += mass * row[t];
      }
    }
    std::swap(inside, next);
  }
  escaped = std::clamp(escaped, 0.0, 1.0);
  return {escaped, escaped};
}

EscapeResult escape_probability(const TabularMdp& mdp, const Policy& policy, const Support& support) {
  check_policy_shape(mdp, policy, support);
  if (!policy.is_stationary()) throw ShapeError("discounted models need a stationary policy");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const auto n = static_cast<Eigen::Index>(S);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p_in = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < S; ++s) {
    auto probs = policy.probs(0, s);
    for (std::size_t a = 0; a < A; ++a) {
      if (probs[a] == 0.0) continue;
      if (!support.contains(s, a)) {
        c(static_cast<Eigen::Index>(s)) += probs[a];
        continue;
      }
      auto row = mdp.next(s, a);
      for (std::size_t t = 0; t < S; ++t) p_in(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += probs[a] * row[t];
    }
  }

  // States from which an escape is reachable; elsewhere the ever-escape
  // probability is 0 and the restricted system below stays nonsingular.
  std::vector<bool> reach(S, false);
  std::deque<std::size_t> frontier;
  for (std::size_t s = 0; s < S; ++s) {
    if (c(static_cast<Eigen::Index>(s)) > 0.0) {
      reach[s] = true;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const std::size_t t = frontier.front();
    frontier.pop_front();
    for (std::size_t s = 0; s < S; ++s) {
      if (!reach[s] && p_in(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) > 0.0) {
        reach[s] = true;
        frontier.push_back(s);
      }
    }
  }
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < S; ++s) {
    if (reach[s]) idx.push_back(s);
  }
  std::vector<double> ever(S, 0.0);
  if (!idx.empty()) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      rhs(i) = c(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
      for (Eigen::Index j = 0; j < k; ++j) {
        system(i, j) -= p_in(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                             static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
      }
    }
    const Eigen::VectorXd x = system.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < k; ++i) ever[idx[static_cast<std::size_t>(i)]] = x(i);
  }

  const Eigen::VectorXd y =
      (Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * p_in).partialPivLu().solve(c);
  EscapeResult out;
  for (std::size_t s = 0; s < S; ++s) {
    out.probability += mdp.d0()[s] * ever[s];
    out.discounted += mdp.d0()[s] * y(static_cast<Eigen::Index>(s));
  }
  out.probability = std::clamp(out.probability, 0.0, 1.0);
  out.discounted = std::clamp(out.discounted, 0.0, 1.0);
  return out;
}

EscapeResult escape_probability(const AnyMdp& mdp, const Policy& policy, const Support& support) {
  return std::visit([&](const auto& m) { return escape_probability(m, policy, support); }, mdp);
}

nlohmann::ordered_json SurvivalReport::to_json() const {
  nlohmann::ordered_json j;
  j["regret_data_reward"] = finite_or_string(regret_data_reward);
  j["support_violation"] = finite_or_string(support_violation);
  j["escape_probability"] = finite_or_string(escape_probability);
  j["discounted_escape"] = finite_or_string(discounted_escape);
  j["reference"] = reference.to_json();
  return j;
}

SurvivalReport verify_survival(const AnyMdp& true_mdp, const Dataset& dataset, const StateActionTable& data_reward,
                               const Policy& learned, double tol) {
  const Support support = dataset.support();
  const Cmdp cmdp = build_implicit_cmdp(true_mdp, data_reward, support);
  SurvivalReport report;
  try {
    report.reference = solve_lagrangian(cmdp, tol);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError("the implicit CMDP of this dataset is infeasible: every policy leaves the data support "
                          "with cost at least " + format_double(e.min_violation()) +
                              " (the data does not cover any complete policy)",
                          e.min_violation());
  }
  report.regret_data_reward = report.reference.value - policy_value(true_mdp, learned, data_reward);
  report.support_violation = policy_value(true_mdp, learned, cmdp.g);
  const EscapeResult escape = escape_probability(true_mdp, learned, support);
  report.escape_probability = escape.probability;
  report.discounted_escape = escape.discounted;
  return report;
}

}  // namespace survival
