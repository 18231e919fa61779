#pragma once

// Tabular offline learners (BC, PEVI, VI-LCB, PQI, PPI) and evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "survival/dataset.hpp"
#include "survival/mdp.hpp"
#include "survival/mdp_io.hpp"

namespace survival {

/// Most frequent logged action per state (lowest index on ties); uniform at
/// unseen states.
Policy bc_train(const Dataset& dataset);

// ---------------------------------------------------------------- PEVI

/// Value bounds indexed by t = h - 1 for h = 1..H.
struct PeviBounds {
  std::vector<double> v_min;
  std::vector<double> v_max;
};

/// V_min,h = Vt_min,h - beta (H - h + 1) - 1 and V_max,h = Vt_max,h where
///   original: Vt_min = -(H-h+1), Vt_max = 1
///   negative: Vt_min = -1,       Vt_max = H-h+1
///   random:   Vt_min = 0,        Vt_max = H-h+1
///   zero:     Vt_min = 0,        Vt_max = 0
PeviBounds pevi_default_bounds(RewardKind kind, double beta, std::size_t horizon);

struct PeviConfig {
  double beta = 1.0;
  PeviBounds bounds;

  static PeviConfig defaults(RewardKind kind, double beta, std::size_t horizon);
  void validate(std::size_t horizon) const;
};

struct PeviResult {
  Policy policy;
  /// Q-hat per t.
  std::vector<StateActionTable> q;
  ValueTable v;
};

PeviResult pevi_train(const Dataset& dataset, std::size_t horizon, const PeviConfig& config);

// -------------------------------------------------------------- VI-LCB

struct ViLcbConfig {
  double gamma = 0.9;
  double v_max = 10.0;
  double delta_conf = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// J = ceil(log N / (1 - gamma)).
std::size_t vi_lcb_iterations(std::size_t n_transitions, double gamma);
/// L = 2000 log(2 (J+1) |S| |A| / delta).
double vi_lcb_log_term(std::size_t iterations, std::size_t n_states, std::size_t n_actions, double delta);
/// b = 2 V_max sqrt(L / max(m, 1)).
double vi_lcb_penalty(double v_max, double log_term, std::size_t count);

struct ViLcbResult {
  Policy policy;
  /// V_0 .. V_J.
  std::vector<std::vector<double>> value_trace;
  std::size_t iterations = 0;
  double log_term = 0.0;
};

ViLcbResult vi_lcb_train(const Dataset& dataset, const ViLcbConfig& config);

// ------------------------------------------------------------- PQI/PPI

struct FilterConfig {
  /// Threshold on the empirical frequency n(s,a)/N.
  double b = 0.01;
  std::size_t n_iters = 200;
  double gamma = 0.9;
  double v_max = 10.0;

  void validate() const;
};

struct FilterResult {
  Policy policy;
  StateActionTable q;
  /// Pairs that pass the filter.
  Support filter;
  std::vector<std::string> warnings;
};

/// Filter zeta(s,a) = 1[n(s,a)/N >= b].
Support frequency_filter(const Dataset& dataset, double b);

FilterResult pqi_train(const Dataset& dataset, const FilterConfig& config);
FilterResult ppi_train(const Dataset& dataset, const FilterConfig& config, std::size_t n_eval_iters);

// ---------------------------------------------------------- evaluation

/// Return at d0 under the model's own reward.
double evaluate_exact(const TabularMdp& mdp, const Policy& policy);
double evaluate_exact(const FiniteMdp& mdp, const Policy& policy);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_episodes = 0;
};

/// Episode i uses substream (seed, "evaluate", i). Finite models run all H
/// steps; discounted returns are truncated once gamma^t < 1e-10. When every
/// episode return is identical the standard error is exactly 0.
McEstimate evaluate_mc(const FiniteMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed);
McEstimate evaluate_mc(const TabularMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed);

// ------------------------------------------------------------ dispatch

enum class LearnerKind { bc, pevi, vi_lcb, pqi, ppi };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner(std::string_view name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::pevi;
  /// PEVI pessimism; bounds come from pevi_default_bounds for the reward kind.
  double beta = 1.0;
  ViLcbConfig vi_lcb;
  FilterConfig filter;
  std::size_t ppi_eval_iters = 20;
};

/// Trains the selected learner. PEVI needs a finite model (for H); VI-LCB
/// takes `seed` as its learner seed.
Policy train_learner(const LearnerSpec& spec, const Dataset& dataset, const AnyMdp& mdp, RewardKind kind,
                     std::uint64_t seed);

double evaluate_exact(const AnyMdp& mdp, const Policy& policy);
McEstimate evaluate_mc(const AnyMdp& mdp, const Policy& policy, std::size_t n_episodes, std::uint64_t seed);

}  // namespace survival
