#pragma once

// Data-bias diagnostics: the empirical positive-bias estimate, episode
// length against return, and the sufficient-condition epsilons.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "survival/dataset.hpp"
#include "survival/learners.hpp"
#include "survival/mdp_io.hpp"

namespace survival {

struct BiasEstimate {
  double value = 0.0;
  bool infinite = false;
};

/// J*/max{J* - min(J_zero, J_rand, J_neg), 0}. The estimate is infinite when
/// that denominator is <= tie_tol (0 means an exact comparison).
BiasEstimate estimate_positive_bias(double j_star, double j_zero, double j_rand, double j_neg, double tie_tol = 0.0);

struct LengthReturnRow {
  std::size_t length = 0;
  double ret = 0.0;
};

struct LengthReturnTable {
  std::vector<LengthReturnRow> rows;
  /// Pearson correlation of length and return; 0 when degenerate.
  double correlation = 0.0;
  /// Fewer than two rows or zero variance in either column.
  bool degenerate = true;

  std::string to_csv() const;
};

/// One row per trajectory with its undiscounted return under true_reward.
LengthReturnTable length_return_table(const Dataset& dataset, const StateActionTable& true_reward);

/// max over the support of (R_max - r(s,a)), R_max the largest entry of true_reward.
double check_rmax_condition(const Dataset& dataset, const StateActionTable& true_reward);

/// max over the support of V*(s) - Q*(s,a) on the true model. Finite models
/// use the per-timestep support.
double check_gap_condition(const TabularMdp& mdp, const Dataset& dataset);
double check_gap_condition(const FiniteMdp& mdp, const Dataset& dataset);
double check_gap_condition(const AnyMdp& mdp, const Dataset& dataset);

/// Over trajectories of length H: max of (V*(d0) - return) / H. Empty when
/// no trajectory has full length.
std::optional<double> check_full_length_condition(const Dataset& dataset, const FiniteMdp& mdp, std::size_t horizon);

struct BiasReport {
  std::string learner;
  std::uint64_t seed = 0;
  double j_star = 0.0;
  double j_zero = 0.0;
  double j_rand = 0.0;
  double j_neg = 0.0;
  BiasEstimate estimate;
  LengthReturnTable length_return;
  double eps_rmax = 0.0;
  double eps_gap = 0.0;
  std::optional<double> eps_full_length;

  nlohmann::ordered_json to_json() const;
};

struct BiasPipelineSpec {
  LearnerSpec learner;
  std::uint64_t seed = 0;
  /// Range of the random relabeling.
  double lo = 0.0;
  double hi = 1.0;
  double tie_tol = 1e-9;
};

/// J* by exact dynamic programming on the true model; each J by training
/// the learner on the zero/random/negated relabeling of `dataset` and
/// evaluating exactly under the true reward.
BiasReport bias_report(const AnyMdp& mdp, const Dataset& dataset, const BiasPipelineSpec& spec);

}  // namespace survival
