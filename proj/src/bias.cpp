#include "survival/bias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/text_io.hpp"

namespace survival {

BiasEstimate estimate_positive_bias(double j_star, double j_zero, double j_rand, double j_neg, double tie_tol) {
  if (!std::isfinite(j_star)) throw ValidationError("J* must be finite");
  const double denom = std::max(j_star - std::min({j_zero, j_rand, j_neg}), 0.0);
  if (denom <= tie_tol) return {std::numeric_limits<double>::infinity(), true};
  return {j_star / denom, false};
}

std::string LengthReturnTable::to_csv() const {
  std::string out = "length,return\n";
  for (const LengthReturnRow& row : rows) out += std::to_string(row.length) + "," + format_double(row.ret) + "\n";
  return out;
}

LengthReturnTable length_return_table(const Dataset& dataset, const StateActionTable& true_reward) {
  if (true_reward.n_states() != dataset.n_states() || true_reward.n_actions() != dataset.n_actions()) {
    throw ShapeError("reward table does not match the dataset");
  }
  LengthReturnTable table;
  for (const Trajectory& traj : dataset.trajectories()) {
    double ret = 0.0;
    for (const Transition& tr : traj) ret += true_reward(tr.s, tr.a);
    table.rows.push_back({traj.size(), ret});
  }
  const std::size_t n = table.rows.size();
  if (n < 2) return table;
  double mx = 0.0, my = 0.0;
  for (const auto& row : table.rows) {
    mx += static_cast<double>(row.length);
    my += row.ret;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& row : table.rows) {
    const double dx = static_cast<double>(row.length) - mx, dy = row.ret - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return table;
  table.correlation = sxy / std::sqrt(sxx * syy);
  table.degenerate = false;
  return table;
}

double check_rmax_condition(const Dataset& dataset, const StateActionTable& true_reward) {
  const Support support = dataset.support();
  if (support.empty()) throw ValidationError("the dataset support is empty");
  const double r_max = true_reward.max();
  double eps = 0.0;
  for (auto [s, a] : support.pairs()) eps = std::max(eps, r_max - true_reward(s, a));
  return eps;
}

double check_gap_condition(const TabularMdp& mdp, const Dataset& dataset) {
  const OptimalSolution opt = value_iteration(mdp, mdp.rewards());
  // V* is re-derived from Q* so that optimal actions give exactly 0.
  const StateActionTable q = q_values(mdp, opt.values, mdp.rewards());
  double eps = 0.0;
  for (auto [s, a] : dataset.support().pairs()) eps = std::max(eps, q.max_in_row(s) - q(s, a));
  return eps;
}

double check_gap_condition(const FiniteMdp& mdp, const Dataset& dataset) {
  const OptimalSolution opt = value_iteration(mdp, mdp.rewards());
  const std::vector<StateActionTable> q = q_values(mdp, opt.values, mdp.rewards());
  double eps = 0.0;
  for (std::size_t h = 0; h < std::min(mdp.horizon(), dataset.horizon()); ++h) {
    for (auto [s, a] : dataset.support_at(h).pairs()) eps = std::max(eps, q[h].max_in_row(s) - q[h](s, a));
  }
  return eps;
}

double check_gap_condition(const AnyMdp& mdp, const Dataset& dataset) {
  return std::visit([&](const auto& m) { return check_gap_condition(m, dataset); }, mdp);
}

std::optional<double> check_full_length_condition(const Dataset& dataset, const FiniteMdp& mdp, std::size_t horizon) {
  if (horizon == 0) throw ValidationError("horizon must be positive");
  const double v_star = value_iteration(mdp, mdp.rewards()).values.at_initial(mdp.d0());
  std::optional<double> eps;
  for (const Trajectory& traj : dataset.trajectories()) {
    if (traj.size() != horizon) continue;
    double ret = 0.0;
    for (const Transition& tr : traj) ret += mdp.reward(tr.s, tr.a);
    const double gap = (v_star - ret) / static_cast<double>(horizon);
    eps = eps ? std::max(*eps, gap) : gap;
  }
  return eps;
}

nlohmann::ordered_json BiasReport::to_json() const {
  nlohmann::ordered_json j;
  j["learner"] = learner;
  j["seed"] = seed;
  j["j_star"] = j_star;
  j["j_zero"] = j_zero;
  j["j_rand"] = j_rand;
  j["j_neg"] = j_neg;
  if (estimate.infinite) {
    j["estimate"] = "inf";
  } else {
    j["estimate"] = estimate.value;
  }
  j["estimate_infinite"] = estimate.infinite;
  j["eps_rmax"] = eps_rmax;
  j["eps_gap"] = eps_gap;
  if (eps_full_length) {
    j["eps_full_length"] = *eps_full_length;
  } else {
    j["eps_full_length"] = nullptr;
  }
  j["eps_full_length_defined"] = eps_full_length.has_value();
  j["length_return_correlation"] = length_return.correlation;
  j["length_return_degenerate"] = length_return.degenerate;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : length_return.rows) rows.push_back({row.length, row.ret});
  j["length_return_rows"] = std::move(rows);
  return j;
}

BiasReport bias_report(const AnyMdp& mdp, const Dataset& dataset, const BiasPipelineSpec& spec) {
  BiasReport report;
  report.learner = to_string(spec.learner.kind);
  report.seed = spec.seed;
  if (const auto* finite = std::get_if<FiniteMdp>(&mdp)) {
    report.j_star = value_iteration(*finite, finite->rewards()).values.at_initial(finite->d0());
  } else {
    const auto& discounted = std::get<TabularMdp>(mdp);
    report.j_star = evaluate_exact(discounted, exact_optimal_policy(discounted, discounted.rewards()));
  }
  const auto run = [&](RewardKind kind) {
    const Dataset relabeled = corrupt(dataset, {kind, spec.lo, spec.hi, spec.seed});
    return evaluate_exact(mdp, train_learner(spec.learner, relabeled, mdp, kind, spec.seed));
  };
  report.j_zero = run(RewardKind::zero);
  report.j_rand = run(RewardKind::random);
  report.j_neg = run(RewardKind::negative);
  report.estimate = estimate_positive_bias(report.j_star, report.j_zero, report.j_rand, report.j_neg, spec.tie_tol);

  const StateActionTable& reward = std::visit([](const auto& m) -> const StateActionTable& { return m.rewards(); }, mdp);
  report.length_return = length_return_table(dataset, reward);
  report.eps_rmax = check_rmax_condition(dataset, reward);
  report.eps_gap = check_gap_condition(mdp, dataset);
  if (const auto* finite = std::get_if<FiniteMdp>(&mdp)) {
    report.eps_full_length = check_full_length_condition(dataset, *finite, finite->horizon());
  }
  return report;
}

}  // namespace survival
