#include "survival/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "survival/errors.hpp"
#include "survival/mdp_io.hpp"
#include "survival/text_io.hpp"

namespace survival {

std::size_t Support::size() const { return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), true)); }

bool Support::subset_of(const Support& other) const {
  if (n_states_ != other.n_states_ || n_actions_ != other.n_actions_) throw ShapeError("support shapes differ");
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] && !other.mask_[i]) return false;
  }
  return true;
}

std::vector<std::pair<std::size_t, std::size_t>> Support::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      if (contains(s, a)) out.emplace_back(s, a);
    }
  }
  return out;
}

bool Support::covers_state(std::size_t s) const {
  for (std::size_t a = 0; a < n_actions_; ++a) {
    if (contains(s, a)) return true;
  }
  return false;
}

Support Support::full(std::size_t n_states, std::size_t n_actions) {
  Support out(n_states, n_actions);
  out.mask_.assign(n_states * n_actions, true);
  return out;
}

Dataset::Dataset(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                 std::vector<Trajectory> trajectories, std::string provenance)
    : n_states_(n_states),
      n_actions_(n_actions),
      horizon_(horizon),
      trajectories_(std::move(trajectories)),
      provenance_(std::move(provenance)),
      counts_(n_states * n_actions, 0),
      counts_h_(horizon * n_states * n_actions, 0) {
  if (n_states_ == 0 || n_actions_ == 0) throw ValidationError("dataset needs at least one state and one action");
  if (horizon_ == 0) throw ValidationError("dataset horizon must be positive");
  for (const Trajectory& traj : trajectories_) {
    for (const Transition& tr : traj) {
      if (tr.s >= n_states_ || tr.s_next >= n_states_ || tr.a >= n_actions_) {
        throw ShapeError("transition index out of range in episode " + std::to_string(tr.episode));
      }
      if (tr.t >= horizon_) throw ValidationError("transition timestep exceeds the dataset horizon");
      if (tr.terminal && tr.timeout) throw ValidationError("a transition cannot be both terminal and timeout");
      if (!std::isfinite(tr.r)) throw ValidationError("non-finite reward in dataset");
      ++counts_[tr.s * n_actions_ + tr.a];
      ++counts_h_[(tr.t * n_states_ + tr.s) * n_actions_ + tr.a];
      ++n_transitions_;
    }
  }
}

std::size_t Dataset::state_count(std::size_t s) const {
  std::size_t total = 0;
  for (std::size_t a = 0; a < n_actions_; ++a) total += count(s, a);
  return total;
}

Support Dataset::support() const {
  Support out(n_states_, n_actions_);
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      if (count(s, a) >= 1) out.insert(s, a);
    }
  }
  return out;
}

Support Dataset::support_at(std::size_t h) const {
  if (h >= horizon_) throw ShapeError("timestep outside the dataset horizon");
  Support out(n_states_, n_actions_);
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      if (count_at(h, s, a) >= 1) out.insert(s, a);
    }
  }
  return out;
}

std::vector<Transition> Dataset::transitions() const {
  std::vector<Transition> out;
  out.reserve(n_transitions_);
  for (const Trajectory& traj : trajectories_) out.insert(out.end(), traj.begin(), traj.end());
  return out;
}

void CollectionSpec::validate() const {
  if (behaviors.empty()) throw ValidationError("collection needs at least one behavior policy");
  if (n_episodes == 0) throw ValidationError("n_episodes must be at least 1");
  if (rule.timeout_at == 0) throw ValidationError("timeout_at must be at least 1");
  double total = 0.0;
  for (const Behavior& b : behaviors) {
    if (!(b.weight >= 0.0)) throw ValidationError("behavior weights must be non-negative");
    total += b.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("behavior weights must sum to 1");
}

std::string CollectionSpec::digest() const {
  std::ostringstream out;
  out << "episodes=" << n_episodes << " seed=" << seed << " timeout=" << rule.timeout_at
      << " mixing=" << (mixing == Mixing::stratified ? "stratified" : "sampled") << " stop=";
  for (std::size_t s : rule.stop_on_states) out << s << ',';
  out << '\n';
  for (const Behavior& b : behaviors) {
    out << "behavior " << b.label << " weight=" << format_double(b.weight) << '\n' << write_policy(b.policy);
  }
  return digest_hex(out.str());
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::original: return "original";
    case RewardKind::zero: return "zero";
    case RewardKind::random: return "random";
    case RewardKind::negative: return "negative";
  }
  return "?";
}

RewardKind parse_reward_kind(std::string_view name) {
  if (name == "original") return RewardKind::original;
  if (name == "zero") return RewardKind::zero;
  if (name == "random") return RewardKind::random;
  if (name == "negative" || name == "negate") return RewardKind::negative;
  throw ValidationError("unknown reward kind '" + std::string(name) + "'");
}

namespace {

Trajectory rollout_impl(const MdpModel& mdp, const Policy& policy, const std::set<std::size_t>& stop,
                        std::size_t timeout_at, Rng& rng, std::size_t episode) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ShapeError("behavior policy shape does not match the MDP");
  }
  if (timeout_at == 0) throw ValidationError("timeout_at must be at least 1");
  Trajectory traj;
  std::size_t s = rng.categorical(mdp.d0());
  for (std::size_t t = 0;; ++t) {
    const std::size_t layer = policy.is_stationary() ? 0 : std::min(t, policy.horizon() - 1);
    const std::size_t a = rng.categorical(policy.probs(layer, s));
    const std::size_t s_next = rng.categorical(mdp.next(s, a));
    Transition tr{episode, t, s, a, mdp.reward(s, a), s_next, false, false};
    if (stop.contains(s_next)) {
      tr.terminal = true;
    } else if (t + 1 >= timeout_at) {
      tr.timeout = true;
    }
    traj.push_back(tr);
    if (tr.terminal || tr.timeout) break;
    s = s_next;
  }
  return traj;
}

// Behavior index of every episode.
std::vector<std::size_t> assign_behaviors(const CollectionSpec& spec) {
  const std::size_t n = spec.n_episodes;
  const std::size_t k = spec.behaviors.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  if (spec.mixing == Mixing::sampled) {
    std::vector<double> weights;
    for (const Behavior& b : spec.behaviors) weights.push_back(b.weight);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = Rng::substream(spec.seed, "behavior", i);
      out.push_back(rng.categorical(weights));
    }
    return out;
  }
  // Largest remainder; ties go to the earlier behavior.
  std::vector<std::size_t> quota(k);
  std::vector<double> frac(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = spec.behaviors[i].weight * static_cast<double>(n);
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += quota[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return frac[x] > frac[y]; });
  for (std::size_t i = 0; assigned < n; i = (i + 1) % k, ++assigned) ++quota[order[i]];
  for (std::size_t i = 0; i < k; ++i) out.insert(out.end(), quota[i], i);
  out.resize(n);
  return out;
}

Dataset collect_impl(const MdpModel& mdp, const CollectionSpec& spec, const std::set<std::size_t>& stop,
                     std::size_t horizon) {
  spec.validate();
  const std::vector<std::size_t> assignment = assign_behaviors(spec);
  std::vector<Trajectory> trajectories;
  trajectories.reserve(spec.n_episodes);
  for (std::size_t i = 0; i < spec.n_episodes; ++i) {
    Rng rng = Rng::substream(spec.seed, "collect", i);
    trajectories.push_back(rollout_impl(mdp, spec.behaviors[assignment[i]].policy, stop, spec.rule.timeout_at, rng, i));
  }
  return Dataset(mdp.n_states(), mdp.n_actions(), horizon, std::move(trajectories), spec.digest());
}

std::set<std::size_t> with_terminals(const FiniteMdp& mdp, const TerminationRule& rule) {
  std::set<std::size_t> stop = rule.stop_on_states;
  stop.insert(mdp.terminal_states().begin(), mdp.terminal_states().end());
  return stop;
}

}  // namespace

Trajectory rollout(const MdpModel& mdp, const Policy& policy, const TerminationRule& rule, Rng& rng,
                   std::size_t episode) {
  return rollout_impl(mdp, policy, rule.stop_on_states, rule.timeout_at, rng, episode);
}

Trajectory rollout(const FiniteMdp& mdp, const Policy& policy, const TerminationRule& rule, Rng& rng,
                   std::size_t episode) {
  return rollout_impl(mdp, policy, with_terminals(mdp, rule), rule.timeout_at, rng, episode);
}

Dataset collect(const TabularMdp& mdp, const CollectionSpec& spec) {
  return collect_impl(mdp, spec, spec.rule.stop_on_states, std::max<std::size_t>(spec.rule.timeout_at, 1));
}

Dataset collect(const FiniteMdp& mdp, const CollectionSpec& spec) {
  if (spec.rule.timeout_at > mdp.horizon()) throw ValidationError("timeout_at exceeds the MDP horizon");
  return collect_impl(mdp, spec, with_terminals(mdp, spec.rule), mdp.horizon());
}

Dataset corrupt(const Dataset& dataset, const CorruptionSpec& spec) {
  if (!(spec.lo <= spec.hi)) throw ValidationError("corruption range needs lo <= hi");
  std::vector<Trajectory> trajectories = dataset.trajectories();
  Rng rng = Rng::substream(spec.seed, "corrupt");
  for (Trajectory& traj : trajectories) {
    for (Transition& tr : traj) {
      switch (spec.kind) {
        case RewardKind::original: break;
        case RewardKind::zero: tr.r = 0.0; break;
        case RewardKind::negative: tr.r = -tr.r; break;
        case RewardKind::random: tr.r = rng.uniform(spec.lo, spec.hi); break;
      }
    }
  }
  std::string provenance = dataset.provenance() + "+" + to_string(spec.kind);
  if (spec.kind == RewardKind::random) provenance += "(" + std::to_string(spec.seed) + ")";
  return Dataset(dataset.n_states(), dataset.n_actions(), dataset.horizon(), std::move(trajectories), provenance);
}

Dataset strip_terminal_transitions(const Dataset& dataset) {
  std::vector<Trajectory> trajectories;
  for (const Trajectory& traj : dataset.trajectories()) {
    Trajectory kept;
    std::copy_if(traj.begin(), traj.end(), std::back_inserter(kept), [](const Transition& tr) { return !tr.terminal; });
    if (!kept.empty()) trajectories.push_back(std::move(kept));
  }
  return Dataset(dataset.n_states(), dataset.n_actions(), dataset.horizon(), std::move(trajectories),
                 dataset.provenance() + "+strip");
}

std::vector<Dataset> split_folds(const Dataset& dataset, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds == 0) throw ValidationError("k_folds must be at least 1");
  const std::vector<Transition> all = dataset.transitions();
  if (k_folds > all.size()) {
    throw ValidationError("cannot split " + std::to_string(all.size()) + " transitions into " +
                          std::to_string(k_folds) + " folds");
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::substream(seed, "folds");
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::vector<std::size_t>> members(k_folds);
  for (std::size_t i = 0; i < order.size(); ++i) members[i % k_folds].push_back(order[i]);

  std::vector<Dataset> folds;
  folds.reserve(k_folds);
  for (std::size_t f = 0; f < k_folds; ++f) {
    std::sort(members[f].begin(), members[f].end());
    std::vector<Trajectory> trajectories;
    for (std::size_t idx : members[f]) {
      const Transition& tr = all[idx];
      if (trajectories.empty() || trajectories.back().back().episode != tr.episode) trajectories.emplace_back();
      trajectories.back().push_back(tr);
    }
    folds.emplace_back(dataset.n_states(), dataset.n_actions(), dataset.horizon(), std::move(trajectories),
                       dataset.provenance() + "+fold" + std::to_string(f));
  }
  return folds;
}

Dataset extend_goal_absorption(const Dataset& dataset, const FiniteMdp& mdp, std::size_t goal_state) {
  if (dataset.n_states() != mdp.n_states() || dataset.n_actions() != mdp.n_actions()) {
    throw ShapeError("dataset does not match the MDP");
  }
  const std::size_t horizon = dataset.horizon();
  std::vector<Trajectory> trajectories = dataset.trajectories();
  for (Trajectory& traj : trajectories) {
    if (traj.empty()) continue;
    Transition& last = traj.back();
    if (!last.terminal || last.s_next != goal_state || last.t + 1 >= horizon) continue;
    last.terminal = false;
    const std::size_t episode = last.episode;
    for (std::size_t t = last.t + 1; t < horizon; ++t) {
      traj.push_back({episode, t, goal_state, 0, mdp.reward(goal_state, 0), goal_state, t + 1 == horizon, false});
    }
  }
  return Dataset(dataset.n_states(), dataset.n_actions(), horizon, std::move(trajectories),
                 dataset.provenance() + "+absorb");
}

StateActionTable data_reward(const Dataset& dataset) {
  StateActionTable sum(dataset.n_states(), dataset.n_actions());
  for (const Trajectory& traj : dataset.trajectories()) {
    for (const Transition& tr : traj) sum(tr.s, tr.a) += tr.r;
  }
  for (std::size_t s = 0; s < dataset.n_states(); ++s) {
    for (std::size_t a = 0; a < dataset.n_actions(); ++a) {
      const std::size_t n = dataset.count(s, a);
      sum(s, a) = n == 0 ? 0.0 : sum(s, a) / static_cast<double>(n);
    }
  }
  return sum;
}

std::vector<double> empirical_transition(const Dataset& dataset) {
  const std::size_t S = dataset.n_states(), A = dataset.n_actions();
  std::vector<double> p(S * A * S, 0.0);
  for (const Trajectory& traj : dataset.trajectories()) {
    for (const Transition& tr : traj) p[(tr.s * A + tr.a) * S + tr.s_next] += 1.0;
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t n = dataset.count(s, a);
      if (n == 0) continue;
      for (std::size_t t = 0; t < S; ++t) p[(s * A + a) * S + t] /= static_cast<double>(n);
    }
  }
  return p;
}

std::string write_dataset(const Dataset& dataset) {
  std::ostringstream out;
  out << "# n_states=" << dataset.n_states() << '\n'
      << "# n_actions=" << dataset.n_actions() << '\n'
      << "# horizon=" << dataset.horizon() << '\n'
      << "# provenance=" << dataset.provenance() << '\n'
      << "episode,t,s,a,r,s_next,terminal,timeout\n";
  for (const Trajectory& traj : dataset.trajectories()) {
    for (const Transition& tr : traj) {
      out << tr.episode << ',' << tr.t << ',' << tr.s << ',' << tr.a << ',' << format_double(tr.r) << ','
          << tr.s_next << ',' << (tr.terminal ? 1 : 0) << ',' << (tr.timeout ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::size_t n_states = 0, n_actions = 0, horizon = 0;
  std::string provenance;
  bool saw_columns = false;
  std::vector<Trajectory> trajectories;
  static const char* const kColumns[] = {"episode", "t", "s", "a", "r", "s_next", "terminal", "timeout"};
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      line = trim(line.substr(1));
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "n_states") n_states = parse_uint(value, line_no, "n_states");
      else if (key == "n_actions") n_actions = parse_uint(value, line_no, "n_actions");
      else if (key == "horizon") horizon = parse_uint(value, line_no, "horizon");
      else if (key == "provenance") provenance = std::string(value);
      continue;
    }
    if (!saw_columns) {
      if (line != "episode,t,s,a,r,s_next,terminal,timeout") throw ParseError("unexpected column header", line_no, "header");
      saw_columns = true;
      continue;
    }
    auto fields = split_tokens(line, ",");
    if (fields.size() != 8) throw ParseError("expected 8 comma-separated fields", line_no, "");
    Transition tr;
    tr.episode = parse_uint(fields[0], line_no, kColumns[0]);
    tr.t = parse_uint(fields[1], line_no, kColumns[1]);
    tr.s = parse_uint(fields[2], line_no, kColumns[2]);
    tr.a = parse_uint(fields[3], line_no, kColumns[3]);
    tr.r = parse_double(fields[4], line_no, kColumns[4]);
    tr.s_next = parse_uint(fields[5], line_no, kColumns[5]);
    const auto flag = [&](std::size_t i) {
      const std::uint64_t v = parse_uint(fields[i], line_no, kColumns[i]);
      if (v > 1) throw ParseError("flag must be 0 or 1", line_no, kColumns[i]);
      return v == 1;
    };
    tr.terminal = flag(6);
    tr.timeout = flag(7);
    if (trajectories.empty() || trajectories.back().back().episode != tr.episode || tr.t <= trajectories.back().back().t) {
      trajectories.emplace_back();
    }
    trajectories.back().push_back(tr);
  }
  if (n_states == 0 || n_actions == 0 || horizon == 0) throw ParseError("dataset header is incomplete", 0, "header");
  try {
    return Dataset(n_states, n_actions, horizon, std::move(trajectories), provenance);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0, "");
  }
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

}  // namespace survival
