#include "survival/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/rng.hpp"

namespace survival {

Policy bc_train(const Dataset& dataset) {
  if (dataset.empty()) throw ValidationError("behavior cloning needs a non-empty dataset");
  const std::size_t S = dataset.n_states(), A = dataset.n_actions();
  std::vector<double> probs(S * A, 0.0);
  std::vector<double> counts(A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) counts[a] = static_cast<double>(dataset.count(s, a));
    if (dataset.state_count(s) == 0) {
      std::fill_n(probs.begin() + static_cast<std::ptrdiff_t>(s * A), A, 1.0 / static_cast<double>(A));
    } else {
      probs[s * A + argmax_lowest(counts)] = 1.0;
    }
  }
  return Policy::stationary(S, A, std::move(probs));
}

PeviBounds pevi_default_bounds(RewardKind kind, double beta, std::size_t horizon) {
  if (horizon == 0) throw ValidationError("horizon must be positive");
  if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
  PeviBounds out{std::vector<double>(horizon), std::vector<double>(horizon)};
  for (std::size_t t = 0; t < horizon; ++t) {
    const double remaining = static_cast<double>(horizon - t);  // H - h + 1 with h = t + 1
    double lo = 0.0, hi = 0.0;
    switch (kind) {
      case RewardKind::original: lo = -remaining; hi = 1.0; break;
      case RewardKind::negative: lo = -1.0; hi = remaining; break;
      case RewardKind::random: lo = 0.0; hi = remaining; break;
      case RewardKind::zero: lo = 0.0; hi = 0.0; break;
    }
    out.v_min[t] = lo - beta * remaining - 1.0;
    out.v_max[t] = hi;
  }
  return out;
}

PeviConfig PeviConfig::defaults(RewardKind kind, double beta, std::size_t horizon) {
  return {beta, pevi_default_bounds(kind, beta, horizon)};
}

void PeviConfig::validate(std::size_t horizon) const {
  if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
  if (bounds.v_min.size() != horizon || bounds.v_max.size() != horizon) {
    throw ShapeError("PEVI bounds need one entry per timestep");
  }
  for (std::size_t t = 0; t < horizon; ++t) {
    if (!(bounds.v_min[t] <= bounds.v_max[t])) throw ValidationError("PEVI bounds need v_min <= v_max");
  }
}

PeviResult pevi_train(const Dataset& dataset, std::size_t horizon, const PeviConfig& config) {
  if (dataset.horizon() != horizon) {
    throw ValidationError("dataset horizon " + std::to_string(dataset.horizon()) + " does not match H=" +
                          std::to_string(horizon));
  }
  config.validate(horizon);
  const std::size_t S = dataset.n_states(), A = dataset.n_actions();

  std::vector<std::vector<const Transition*>> by_t(horizon);
  for (const Trajectory& traj : dataset.trajectories()) {
    for (const Transition& tr : traj) by_t[tr.t].push_back(&tr);
  }

  std::vector<StateActionTable> q(horizon);
  ValueTable v{"pevi", S, horizon, std::vector<double>(horizon * S, 0.0)};
  std::vector<std::size_t> actions(horizon * S, 0);
  const std::vector<double> zeros(S, 0.0);

  for (std::size_t t = horizon; t-- > 0;) {
    std::span<const double> next = t + 1 < horizon ? v.layer(t + 1) : std::span<const double>(zeros);
    StateActionTable sum(S, A);
    for (const Transition* tr : by_t[t]) sum(tr->s, tr->a) += tr->r + next[tr->s_next];
    const double lo = config.bounds.v_min[t], hi = config.bounds.v_max[t];
    StateActionTable qt(S, A, lo);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t n = dataset.count_at(t, s, a);
        if (n == 0) continue;
        const double q_tilde = sum(s, a) / static_cast<double>(n);
        const double q_bar = q_tilde - config.beta / std::sqrt(static_cast<double>(n));
        qt(s, a) = std::max(lo, std::min(q_bar, hi));
      }
      const std::size_t best = argmax_lowest(qt.row(s));
      actions[t * S + s] = best;
      v.values[t * S + s] = qt(s, best);
    }
    q[t] = std::move(qt);
  }
  return {Policy::deterministic_time_indexed(horizon, A, actions), std::move(q), std::move(v)};
}

void ViLcbConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  if (!(v_max > 0.0)) throw ValidationError("v_max must be positive");
  if (!(delta_conf > 0.0 && delta_conf <= 1.0)) throw ValidationError("delta_conf must lie in (0, 1]");
}

std::size_t vi_lcb_iterations(std::size_t n_transitions, double gamma) {
  if (n_transitions == 0) return 0;
  return static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(n_transitions)) / (1.0 - gamma)));
}

double vi_lcb_log_term(std::size_t iterations, std::size_t n_states, std::size_t n_actions, double delta) {
  return 2000.0 * std::log(2.0 * static_cast<double>(iterations + 1) * static_cast<double>(n_states) *
                           static_cast<double>(n_actions) / delta);
}

double vi_lcb_penalty(double v_max, double log_term, std::size_t count) {
  return 2.0 * v_max * std::sqrt(log_term / static_cast<double>(std::max<std::size_t>(count, 1)));
}

ViLcbResult vi_lcb_train(const Dataset& dataset, const ViLcbConfig& config) {
  config.validate();
  const std::size_t S = dataset.n_states(), A = dataset.n_actions();
  const std::size_t N = dataset.n_transitions();
  const std::size_t J = vi_lcb_iterations(N, config.gamma);
  if (N == 0 || N < J + 1) {
    throw ValidationError("VI-LCB needs at least J+1 = " + std::to_string(J + 1) + " transitions, got " +
                          std::to_string(N));
  }
  const double L = vi_lcb_log_term(J, S, A, config.delta_conf);
  const std::vector<Dataset> folds = split_folds(dataset, J + 1, config.seed);

  std::vector<std::size_t> pi(S);
  std::vector<double> m0(A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) m0[a] = static_cast<double>(folds[0].count(s, a));
    pi[s] = argmax_lowest(m0);
  }
  std::vector<double> v(S, -config.v_max);
  ViLcbResult result{Policy::deterministic(A, pi), {v}, J, L};

  std::vector<double> q(A), row(S);
  for (std::size_t j = 1; j <= J; ++j) {
    const Dataset& fold = folds[j];
    const StateActionTable r_hat = data_reward(fold);
    const std::vector<double> p_hat = empirical_transition(fold);
    Rng placeholder = Rng::substream(config.seed, "vilcb-placeholder", j);
    std::vector<double> v_next = v;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t m = fold.count(s, a);
        double r = 0.0;
        if (m >= 1) {
          r = r_hat(s, a);
          std::copy_n(p_hat.begin() + static_cast<std::ptrdiff_t>((s * A + a) * S), S, row.begin());
        } else {
          double total = 0.0;
          for (double& p : row) total += (p = placeholder.uniform());
          if (total > 0.0) {
            for (double& p : row) p /= total;
          } else {
            std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(S));
          }
        }
        double cont = 0.0;
        for (std::size_t t = 0; t < S; ++t) cont += row[t] * v[t];
        q[a] = r - vi_lcb_penalty(config.v_max, L, m) + config.gamma * cont;
      }
      const std::size_t best = argmax_lowest(q);
      if (q[best] > v[s]) {
        v_next[s] = q[best];
        pi[s] = best;
      }
    }
    v = std::move(v_next);
    result.value_trace.push_back(v);
  }
  result.policy = Policy::deterministic(A, pi);
  return result;
}

void FilterConfig::validate() const {
  if (!(b > 0.0 && b <= 1.0)) throw ValidationError("filter threshold b must lie in (0, 1]");
  if (n_iters == 0) throw ValidationError("n_iters must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  if (!(v_max > 0.0)) throw ValidationError("v_max must be positive");
}

Support frequency_filter(const Dataset& dataset, double b) {
  Support out(dataset.n_states(), dataset.n_actions());
  if (dataset.empty()) return out;
  const double total = static_cast<double>(dataset.n_transitions());
  for (std::size_t s = 0; s < dataset.n_states(); ++s) {
    for (std::size_t a = 0; a < dataset.n_actions(); ++a) {
      if (static_cast<double>(dataset.count(s, a)) / total >= b) out.insert(s, a);
    }
  }
  return out;
}

namespace {

struct EmpiricalModel {
  std::size_t S, A;
  StateActionTable r;
  std::vector<double> p;
  Support filter;
};

EmpiricalModel empirical_model(const Dataset& dataset, double b) {
  return {dataset.n_states(), dataset.n_actions(), data_reward(dataset), empirical_transition(dataset),
          frequency_filter(dataset, b)};
}

// Best filtered value at s; 0 when no action survives.
double filtered_max(const EmpiricalModel& model, const StateActionTable& f, std::size_t s) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < model.A; ++a) {
    if (model.filter.contains(s, a)) best = std::max(best, f(s, a));
  }
  return std::isinf(best) ? 0.0 : best;
}

// One filtered backup of every logged pair; unlogged pairs stay 0.
template <class Target>
StateActionTable backup(const Dataset& dataset, const EmpiricalModel& model, const FilterConfig& config,
                        Target target) {
  std::vector<double> t(model.S);
  for (std::size_t s = 0; s < model.S; ++s) t[s] = target(s);
  StateActionTable out(model.S, model.A);
  for (std::size_t s = 0; s < model.S; ++s) {
    for (std::size_t a = 0; a < model.A; ++a) {
      if (dataset.count(s, a) == 0) continue;
      double cont = 0.0;
      const double* row = model.p.data() + (s * model.A + a) * model.S;
      for (std::size_t x = 0; x < model.S; ++x) {
        if (row[x] != 0.0) cont += row[x] * t[x];
      }
      out(s, a) = std::clamp(model.r(s, a) + config.gamma * cont, -config.v_max, config.v_max);
    }
  }
  return out;
}

std::vector<std::size_t> filtered_greedy(const Dataset& dataset, const EmpiricalModel& model,
                                         const StateActionTable& f, std::vector<std::string>* warnings) {
  std::vector<std::size_t> actions(model.S, 0);
  for (std::size_t s = 0; s < model.S; ++s) {
    bool found = false;
    for (std::size_t a = 0; a < model.A; ++a) {
      if (!model.filter.contains(s, a)) continue;
      if (!found || f(s, a) > f(s, actions[s])) actions[s] = a;
      found = true;
    }
    if (!found && warnings != nullptr && dataset.state_count(s) > 0) {
      warnings->push_back("state " + std::to_string(s) + " has no action passing the filter; using action 0");
    }
  }
  return actions;
}

}  // namespace

FilterResult pqi_train(const Dataset& dataset, const FilterConfig& config) {
  config.validate();
  if (dataset.empty()) throw ValidationError("PQI needs a non-empty dataset");
  const EmpiricalModel model = empirical_model(dataset, config.b);
  StateActionTable f(model.S, model.A);
  for (std::size_t i = 0; i < config.n_iters; ++i) {
    f = backup(dataset, model, config, [&](std::size_t s) { return filtered_max(model, f, s); });
  }
  FilterResult result{Policy::uniform(model.S, model.A), f, model.filter, {}};
  result.policy = Policy::deterministic(model.A, filtered_greedy(dataset, model, f, &result.warnings));
  return result;
}

FilterResult ppi_train(const Dataset& dataset, const FilterConfig& config, std::size_t n_eval_iters) {
  config.validate();
  if (n_eval_iters == 0) throw ValidationError("n_eval_iters must be at least 1");
  if (dataset.empty()) throw ValidationError("PPI needs a non-empty dataset");
  const EmpiricalModel model = empirical_model(dataset, config.b);
  StateActionTable f(model.S, model.A);
  std::vector<std::size_t> pi = filtered_greedy(dataset, model, f, nullptr);
  for (std::size_t i = 0; i < config.n_iters; ++i) {
    for (std::size_t k = 0; k < n_eval_iters; ++k) {
      f = backup(dataset, model, config,
                 [&](std::size_t s) { return model.filter.contains(s, pi[s]) ? f(s, pi[s]) : 0.0; });
    }
    pi = filtered_greedy(dataset, model, f, nullptr);
  }
  FilterResult result{Policy::uniform(model.S, model.A), f, model.filter, {}};
  result.policy = Policy::deterministic(model.A, filtered_greedy(dataset, model, f, &result.warnings));
  return result;
}

double evaluate_exact(const TabularMdp& mdp, const Policy& policy) {
  return initial_value(mdp, policy, mdp.rewards());
}

double evaluate_exact(const FiniteMdp& mdp, const Policy& policy) {
  return initial_value(mdp, policy, mdp.rewards());
}

namespace {

McEstimate summarize(const std::vector<double>& returns) {
  McEstimate out;
  out.n_episodes = returns.size();
  if (returns.empty()) return out;
  if (std::all_of(returns.begin(), returns.end(), [&](double r) { return r == returns.front(); })) {
    out.mean = returns.front();
    return out;
  }
  double sum = 0.0;
  for (double r : returns) sum += r;
  out.mean = sum / static_cast<double>(returns.size());
  if (returns.size() > 1) {
    double ss = 0.0;
    for (double r : returns) ss += (r - out.mean) * (r - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(returns.size() - 1) / static_cast<double>(returns.size()));
  }
  return out;
}

void check_shapes(const MdpModel& mdp, const Policy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ShapeError("policy shape does not match the MDP");
  }
}

}  // namespace

McEstimate evaluate_mc(const FiniteMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed) {
  check_shapes(mdp, policy);
  if (!policy.is_stationary() && policy.horizon() != mdp.horizon()) throw ShapeError("policy horizon mismatch");
  std::vector<double> returns(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    Rng rng = Rng::substream(seed, "evaluate", i);
    std::size_t s = rng.categorical(mdp.d0());
    double ret = 0.0;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
      const std::size_t a = rng.categorical(policy.probs(h, s));
      ret += mdp.reward(s, a);
      s = rng.categorical(mdp.next(s, a));
    }
    returns[i] = ret;
  }
  return summarize(returns);
}

McEstimate evaluate_mc(const TabularMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed) {
  check_shapes(mdp, policy);
  if (!policy.is_stationary()) throw ShapeError("discounted models need a stationary policy");
  const double gamma = mdp.gamma();
  const std::size_t steps =
      gamma == 0.0 ? 1 : static_cast<std::size_t>(std::ceil(std::log(1e-10) / std::log(gamma)));
  std::vector<double> returns(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    Rng rng = Rng::substream(seed, "evaluate", i);
    std::size_t s = rng.categorical(mdp.d0());
    double ret = 0.0, discount = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t a = rng.categorical(policy.probs(0, s));
      ret += discount * mdp.reward(s, a);
      discount *= gamma;
      s = rng.categorical(mdp.next(s, a));
    }
    returns[i] = ret;
  }
  return summarize(returns);
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::bc: return "bc";
    case LearnerKind::pevi: return "pevi";
    case LearnerKind::vi_lcb: return "vi_lcb";
    case LearnerKind::pqi: return "pqi";
    case LearnerKind::ppi: return "ppi";
  }
  return "?";
}

LearnerKind parse_learner(std::string_view name) {
  if (name == "bc") return LearnerKind::bc;
  if (name == "pevi") return LearnerKind::pevi;
  if (name == "vi_lcb" || name == "vi-lcb") return LearnerKind::vi_lcb;
  if (name == "pqi") return LearnerKind::pqi;
  if (name == "ppi") return LearnerKind::ppi;
  throw ValidationError("unknown learner '" + std::string(name) + "'");
}

Policy train_learner(const LearnerSpec& spec, const Dataset& dataset, const AnyMdp& mdp, RewardKind kind,
                     std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerKind::bc: return bc_train(dataset);
    case LearnerKind::pevi: {
      const auto* finite = std::get_if<FiniteMdp>(&mdp);
      if (finite == nullptr) throw UnsupportedError("PEVI needs a finite-horizon model");
      return pevi_train(dataset, finite->horizon(), PeviConfig::defaults(kind, spec.beta, finite->horizon())).policy;
    }
    case LearnerKind::vi_lcb: {
      ViLcbConfig config = spec.vi_lcb;
      config.seed = seed;
      return vi_lcb_train(dataset, config).policy;
    }
    case LearnerKind::pqi: return pqi_train(dataset, spec.filter).policy;
    case LearnerKind::ppi: return ppi_train(dataset, spec.filter, spec.ppi_eval_iters).policy;
  }
  throw ValidationError("unknown learner");
}

double evaluate_exact(const AnyMdp& mdp, const Policy& policy) {
  return std::visit([&](const auto& m) { return evaluate_exact(m, policy); }, mdp);
}

McEstimate evaluate_mc(const AnyMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed) {
  return std::visit([&](const auto& m) { return evaluate_mc(m, policy, n_episodes, seed); }, mdp);
}

}  // namespace survival
