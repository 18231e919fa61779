#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "survival/bias.hpp"
#include "survival/cmdp.hpp"
#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/gridworld.hpp"
#include "survival/learners.hpp"
#include "survival/rng.hpp"
#include "survival/runner.hpp"

using namespace survival;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void grid_reproduction() {
  const auto start = Clock::now();
  const ReproReport r = repro_gridworld();
  const double secs = seconds_since(start);
  double worst = 0.0;
  bool cells_ok = r.cells.size() == 8;
  for (const ReproCell& c : r.cells) {
    cells_ok = cells_ok && c.pass && c.error.empty();
    worst = std::max(worst, std::abs(c.delta));
  }
  std::size_t eval_episodes = ExperimentConfig::gridworld_table(0).eval_episodes;
  const bool pass = r.pass && cells_ok && worst <= 0.005 && secs < 60.0 && eval_episodes == 1000;
  report(1, pass, "grid reproduction",
         "8 cells, max |delta| " + fmt("%.3g", worst) + ", " + std::to_string(eval_episodes) + " eval episodes, " +
             fmt("%.2f", secs) + " s" + (pass ? "" : " " + r.failure_summary()));
}

void cmdp_equivalence() {
  const auto start = Clock::now();
  double worst_gap = 0.0, worst_excess = -1.0;
  int agree = 0;
  std::string first_error;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    try {
      const Cmdp c = oracle::random_cmdp(seed);
      const CmdpSolution lag = solve_lagrangian(c);
      const CmdpSolution brute = brute_force_oracle(c);
      const double gap = std::abs(lag.value - brute.value);
      const double excess = lag.violation - c.budget;
      worst_gap = std::max(worst_gap, gap);
      worst_excess = std::max(worst_excess, excess);
      if (gap <= 1e-6 && excess <= 1e-6) ++agree;
    } catch (const Error& e) {
      if (first_error.empty()) first_error = "seed " + std::to_string(seed) + ": " + e.what();
    }
  }
  const double secs = seconds_since(start);
  report(2, agree == 100 && secs < 30.0, "cmdp oracle equivalence",
         std::to_string(agree) + "/100 agree, max gap " + fmt("%.3g", worst_gap) + ", max violation - budget " +
             fmt("%.3g", worst_excess) + ", " + fmt("%.2f", secs) + " s" + first_error);
}

void duality() {
  int passed = 0, total = 0;
  double worst_dual = 1e300, worst_sens = 1e300;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Cmdp c = oracle::random_cmdp(seed);
    for (double delta : {0.01, 0.1}) {
      ++total;
      const DualBoundCheck check = dual_bound_check(c, delta, 1e-6);
      worst_dual = std::min(worst_dual, check.dual_margin);
      worst_sens = std::min(worst_sens, check.sensitivity_margin);
      const bool ok = check.lambda_delta <= check.kappa / delta + 1e-6 && check.kappa <= check.lambda_0 * delta + 1e-6;
      if (ok && check.pass) ++passed;
    }
  }
  report(3, passed == total, "duality inequalities",
         std::to_string(passed) + "/" + std::to_string(total) + " pass, min dual margin " + fmt("%.3g", worst_dual) +
             ", min sensitivity margin " + fmt("%.3g", worst_sens));
}

void survival_on_grid() {
  const MatrixResult m = compute_matrix(ExperimentConfig::gridworld_table(0));
  bool pass = true;
  int pevi_checked = 0, bc_checked = 0;
  double pevi_worst = 0.0, bc_least = 1.0;
  for (const ResultRow& row : m.rows) {
    if (!row.ok()) {
      pass = false;
      continue;
    }
    if (row.learner == "pevi" && row.reward_kind != "original") {
      ++pevi_checked;
      pevi_worst = std::max({pevi_worst, row.escape_probability, row.support_violation});
      pass = pass && row.escape_probability == 0.0 && row.support_violation == 0.0;
    } else if (row.learner == "bc") {
      ++bc_checked;
      bc_least = std::min(bc_least, row.escape_probability);
      pass = pass && row.escape_probability > 0.0;
    }
  }
  pass = pass && pevi_checked == 3 && bc_checked == 4;
  report(4, pass, "survival instinct on the grid",
         "pevi wrong rewards max escape/violation " + fmt("%.3g", pevi_worst) + " over " +
             std::to_string(pevi_checked) + " kinds, bc min escape " + fmt("%.3g", bc_least));
}

void performance_difference() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t s = 2 + seed % 5;
    const std::size_t a = 2 + seed % 3;
    const TabularMdp mdp = oracle::random_mdp(seed, s, a, 0.5 + 0.0045 * static_cast<double>(seed));
    const Policy pi = oracle::random_policy(seed + 1000, s, a);
    const std::vector<double> h = oracle::random_vector(seed + 2000, s, -5.0, 5.0);
    worst = std::max(worst, pd_lemma_residual(mdp, pi, h));
  }
  report(5, worst <= 1e-8, "performance difference lemma", "max residual " + fmt("%.3g", worst) + " over 100 triples");
}

void positive_bias() {
  const BiasEstimate example = estimate_positive_bias(100, 80, 90, 60);
  bool pass = !example.infinite && std::abs(example.value - 2.5) <= 1e-12;
  int pevi_inf = 0, vi_lcb_inf = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteMdp finite = oracle::random_finite_mdp(seed, 4, 2, 5);
    BiasPipelineSpec pevi;
    pevi.learner.kind = LearnerKind::pevi;
    pevi.seed = seed;
    if (bias_report(finite, oracle::expert_dataset(finite, 2000, seed), pevi).estimate.infinite) ++pevi_inf;

    const TabularMdp discounted = oracle::random_mdp(seed, 4, 2, 0.9);
    BiasPipelineSpec vi_lcb;
    vi_lcb.learner.kind = LearnerKind::vi_lcb;
    vi_lcb.learner.vi_lcb.gamma = 0.9;
    vi_lcb.learner.vi_lcb.seed = seed;
    vi_lcb.seed = seed;
    if (bias_report(discounted, oracle::expert_dataset(discounted, 200, 100, seed), vi_lcb).estimate.infinite) {
      ++vi_lcb_inf;
    }
  }
  pass = pass && pevi_inf == 10 && vi_lcb_inf == 10;
  report(6, pass, "positive bias estimator",
         "example " + fmt("%.6g", example.value) + ", infinite flag pevi " + std::to_string(pevi_inf) + "/10, vi-lcb " +
             std::to_string(vi_lcb_inf) + "/10");
}

// i.i.d. transitions: states uniform, actions from pi.
Dataset iid_transitions(const TabularMdp& mdp, const Policy& pi, std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "acceptance");
  Trajectory traj;
  traj.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = rng.below(mdp.n_states());
    const std::size_t a = rng.categorical(pi.probs(0, s));
    traj.push_back({0, i, s, a, mdp.reward(s, a), rng.categorical(mdp.next(s, a)), false, false});
  }
  return Dataset(mdp.n_states(), mdp.n_actions(), n, {traj});
}

void vi_lcb_sanity() {
  const double gamma = 0.9;
  const TabularMdp mdp = oracle::random_mdp(7, 5, 2, gamma);
  const Policy opt = exact_optimal_policy(mdp, mdp.rewards());
  const double v_star = evaluate_exact(mdp, opt);
  // Epsilon-greedy around the optimal policy with epsilon 0.5 covers every pair.
  std::vector<double> probs;
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t a = 0; a < 2; ++a) probs.push_back(a == opt.mode(0, s) ? 0.75 : 0.25);
  }
  const Policy behavior = Policy::stationary(5, 2, probs);
  ViLcbConfig config;
  config.gamma = gamma;

  bool monotone = true, q0 = true;
  std::vector<double> medians;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    std::vector<double> regrets;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      config.seed = seed;
      const ViLcbResult r = vi_lcb_train(iid_transitions(mdp, behavior, n, seed), config);
      for (double v : r.value_trace.front()) q0 = q0 && v == -config.v_max;
      for (std::size_t j = 1; j < r.value_trace.size(); ++j) {
        for (std::size_t s = 0; s < 5; ++s) monotone = monotone && r.value_trace[j][s] >= r.value_trace[j - 1][s];
      }
      regrets.push_back(v_star - evaluate_exact(mdp, r.policy));
    }
    std::sort(regrets.begin(), regrets.end());
    medians.push_back(0.5 * (regrets[4] + regrets[5]));
  }
  const bool decay = medians[1] <= medians[0] + 1e-12 && medians[2] <= medians[1] + 1e-12;
  const double log_term = vi_lcb_log_term(10, 5, 2, 0.1);
  const bool penalty = vi_lcb_penalty(10.0, log_term, 0) == vi_lcb_penalty(10.0, log_term, 1) &&
                       std::abs(vi_lcb_penalty(10.0, log_term, 4) - 20.0 * std::sqrt(log_term / 4.0)) <= 1e-9;
  report(7, monotone && q0 && decay && penalty, "vi-lcb sanity",
         std::string("monotone ") + (monotone ? "yes" : "no") + ", Q0 = -Vmax " + (q0 ? "yes" : "no") +
             ", max(m,1) " + (penalty ? "yes" : "no") + ", median regret " + fmt("%.4g", medians[0]) + " / " +
             fmt("%.4g", medians[1]) + " / " + fmt("%.4g", medians[2]));
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "survival_acceptance";
  fs::remove_all(root);
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"a", "b"}) {
    ExperimentConfig config = ExperimentConfig::gridworld_table(0);
    config.output_dir = (root / name).string();
    run_matrix(config);
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root / name)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), root / name).string();
      if (rel != "timings.csv") files[rel] = slurp(entry.path());
    }
    files["repro.json"] = repro_gridworld().to_json().dump(2);
    runs.push_back(std::move(files));
  }
  std::size_t datasets = 0, policies = 0, reports = 0;
  for (const auto& [rel, text] : runs[0]) {
    if (rel.starts_with("datasets/")) ++datasets;
    else if (rel.starts_with("policies/")) ++policies;
    else ++reports;
  }
  fs::remove_all(root);
  const bool pass = runs[0] == runs[1] && datasets > 0 && policies > 0 && reports > 0;
  report(8, pass, "determinism",
         std::to_string(runs[0].size()) + " files byte-identical across reruns (" + std::to_string(datasets) +
             " datasets, " + std::to_string(policies) + " policies, " + std::to_string(reports) + " reports)");
}

}  // namespace

int main() {
  grid_reproduction();
  cmdp_equivalence();
  duality();
  survival_on_grid();
  performance_difference();
  positive_bias();
  vi_lcb_sanity();
  determinism();
  return failures == 0 ? 0 : 1;
}
