#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "survival/bias.hpp"
#include "survival/cmdp.hpp"
#include "survival/dataset.hpp"
#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/gridworld.hpp"
#include "survival/learners.hpp"
#include "survival/mdp_io.hpp"
#include "survival/runner.hpp"
#include "survival/text_io.hpp"

using namespace survival;

namespace {

constexpr int kConfigError = 2;
constexpr int kReproFailure = 3;
constexpr int kInfeasible = 4;

struct ModelOptions {
  std::string mdp_path;
  std::string layout_path;
  std::size_t horizon = 20;

  void add(CLI::App* app) {
    app->add_option("--mdp", mdp_path, "MDP file (the built-in gridworld when absent)");
    app->add_option("--layout", layout_path, "Gridworld layout file");
    app->add_option("--horizon", horizon, "Gridworld horizon");
  }

  std::optional<grid::GridWorld> world() const {
    if (!mdp_path.empty()) return std::nullopt;
    const grid::GridLayout layout =
        layout_path.empty() ? grid::GridLayout::default_layout() : grid::GridLayout::load(layout_path);
    return grid::build_gridworld(layout, {}, horizon);
  }

  AnyMdp load(const std::optional<grid::GridWorld>& w) const {
    if (w) return w->mdp();
    return load_mdp(mdp_path);
  }
};

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular offline RL laboratory"};
  app.require_subcommand(1);

  // mdp build-gridworld
  auto* mdp_cmd = app.add_subcommand("mdp", "Model utilities")->require_subcommand(1);
  auto* build_cmd = mdp_cmd->add_subcommand("build-gridworld", "Write the gridworld as an MDP file");
  std::string layout_in, mdp_out;
  std::size_t grid_horizon = 20;
  bool render = false;
  build_cmd->add_option("--layout", layout_in, "Layout file");
  build_cmd->add_option("--horizon", grid_horizon, "Horizon");
  build_cmd->add_option("--out", mdp_out, "Output MDP file (stdout when absent)");
  build_cmd->add_flag("--render", render, "Print the layout with the optimal route to stderr");

  // data collect / corrupt
  auto* data_cmd = app.add_subcommand("data", "Dataset utilities")->require_subcommand(1);
  auto* collect_cmd = data_cmd->add_subcommand("collect", "Roll out behavior policies");
  ModelOptions collect_model;
  collect_model.add(collect_cmd);
  std::vector<std::string> behavior_items{"optimal:0.2", "lava:0.8"};
  std::size_t n_episodes = 500;
  std::uint64_t collect_seed = 0;
  std::optional<std::size_t> timeout;
  std::string mixing = "stratified", data_out;
  bool no_absorption = false;
  collect_cmd->add_option("--behavior", behavior_items, "name:weight, names optimal|uniform|lava|policy:<file>");
  collect_cmd->add_option("--episodes", n_episodes, "Episode count");
  collect_cmd->add_option("--seed", collect_seed, "Collection seed");
  collect_cmd->add_option("--timeout", timeout, "Steps per episode (H-1 by default)");
  collect_cmd->add_option("--mixing", mixing, "stratified | sampled");
  collect_cmd->add_flag("--no-goal-absorption", no_absorption, "Do not pad goal-reaching gridworld episodes");
  collect_cmd->add_option("--out", data_out, "Output CSV (stdout when absent)");

  auto* corrupt_cmd = data_cmd->add_subcommand("corrupt", "Relabel rewards");
  std::string data_in, kind_name = "original";
  double lo = 0.0, hi = 1.0;
  std::uint64_t corrupt_seed = 0;
  corrupt_cmd->add_option("--data", data_in, "Input dataset")->required();
  corrupt_cmd->add_option("--kind", kind_name, "original | zero | random | negative")->required();
  corrupt_cmd->add_option("--lo", lo, "Random reward lower end");
  corrupt_cmd->add_option("--hi", hi, "Random reward upper end");
  corrupt_cmd->add_option("--seed", corrupt_seed, "Corruption seed");
  corrupt_cmd->add_option("--out", data_out, "Output CSV (stdout when absent)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a learner on a dataset");
  ModelOptions train_model;
  train_model.add(train_cmd);
  std::string learner_name = "pevi", policy_out;
  LearnerSpec learner_spec;
  std::uint64_t learner_seed = 0;
  train_cmd->add_option("--data", data_in, "Dataset")->required();
  train_cmd->add_option("--learner", learner_name, "bc | pevi | vi_lcb | pqi | ppi");
  train_cmd->add_option("--kind", kind_name, "Reward kind the data carries (PEVI bounds)");
  train_cmd->add_option("--beta", learner_spec.beta, "PEVI pessimism");
  train_cmd->add_option("--gamma", learner_spec.vi_lcb.gamma, "Discount of VI-LCB and PQI/PPI");
  train_cmd->add_option("--v-max", learner_spec.vi_lcb.v_max, "V_max of VI-LCB and PQI/PPI");
  train_cmd->add_option("--b", learner_spec.filter.b, "PQI/PPI frequency threshold");
  train_cmd->add_option("--seed", learner_seed, "Learner seed");
  train_cmd->add_option("--out", policy_out, "Output policy (stdout when absent)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy on the true model");
  ModelOptions eval_model;
  eval_model.add(eval_cmd);
  std::string policy_in, protocol = "exact";
  std::size_t eval_episodes = 1000;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--policy", policy_in, "Policy file")->required();
  eval_cmd->add_option("--protocol", protocol, "exact | mc");
  eval_cmd->add_option("--episodes", eval_episodes, "Monte Carlo episodes");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--data", data_in, "Dataset whose support is used for the escape probability");

  // cmdp solve / survival
  auto* cmdp_cmd = app.add_subcommand("cmdp", "Implicit constrained MDP")->require_subcommand(1);
  auto* solve_cmd = cmdp_cmd->add_subcommand("solve", "Solve the implicit CMDP of a dataset");
  ModelOptions solve_model;
  solve_model.add(solve_cmd);
  double budget = 0.0;
  bool with_oracle = false;
  solve_cmd->add_option("--data", data_in, "Dataset")->required();
  solve_cmd->add_option("--budget", budget, "Budget on the support-violation cost");
  solve_cmd->add_flag("--oracle", with_oracle, "Also run the brute-force oracle");

  auto* survival_cmd = cmdp_cmd->add_subcommand("survival", "Measure a learned policy against the implicit CMDP");
  ModelOptions survival_model;
  survival_model.add(survival_cmd);
  survival_cmd->add_option("--data", data_in, "Dataset")->required();
  survival_cmd->add_option("--policy", policy_in, "Learned policy")->required();

  // bias report
  auto* bias_cmd = app.add_subcommand("bias", "Data-bias diagnostics")->require_subcommand(1);
  auto* bias_report_cmd = bias_cmd->add_subcommand("report", "Positive-bias estimate and sufficient conditions");
  ModelOptions bias_model;
  bias_model.add(bias_report_cmd);
  std::string report_out, length_out;
  bias_report_cmd->add_option("--data", data_in, "Dataset with the true reward")->required();
  bias_report_cmd->add_option("--learner", learner_name, "bc | pevi | vi_lcb | pqi | ppi");
  bias_report_cmd->add_option("--seed", learner_seed, "Corruption and learner seed");
  bias_report_cmd->add_option("--lo", lo, "Random reward lower end");
  bias_report_cmd->add_option("--hi", hi, "Random reward upper end");
  bias_report_cmd->add_option("--out", report_out, "Report JSON (stdout when absent)");
  bias_report_cmd->add_option("--length-csv", length_out, "Length/return table CSV");

  // repro gridworld
  auto* repro_cmd = app.add_subcommand("repro", "Reproduction runs")->require_subcommand(1);
  auto* repro_grid_cmd = repro_cmd->add_subcommand("gridworld", "Gridworld table: BC and PEVI under four rewards");
  ReproOptions repro;
  std::string repro_layout, repro_out;
  bool perturbed = false, no_ablation = false;
  repro_grid_cmd->add_option("--seed", repro.seed, "Seed");
  repro_grid_cmd->add_option("--layout", repro_layout, "Layout file");
  repro_grid_cmd->add_flag("--perturbed", perturbed, "Use the default layout with an extra wall");
  repro_grid_cmd->add_option("--beta", repro.beta, "PEVI pessimism");
  repro_grid_cmd->add_flag("--no-ablation", no_ablation, "Skip the beta = 0 run");
  repro_grid_cmd->add_option("--out", repro_out, "Directory for repro.json and repro.md");

  // run matrix
  auto* run_cmd = app.add_subcommand("run", "Experiment runs")->require_subcommand(1);
  auto* matrix_cmd = run_cmd->add_subcommand("matrix", "Reward kinds x learners x seeds");
  std::string config_path, json_config_path, out_dir;
  auto* config_opt = matrix_cmd->add_option("--config", config_path, "key = value config");
  auto* json_opt = matrix_cmd->add_option("--json-config", json_config_path, "JSON config");
  config_opt->excludes(json_opt);
  matrix_cmd->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (build_cmd->parsed()) {
      const grid::GridLayout layout =
          layout_in.empty() ? grid::GridLayout::default_layout() : grid::GridLayout::load(layout_in);
      const grid::GridWorld world = grid::build_gridworld(layout, {}, grid_horizon);
      emit(mdp_out, write_mdp(world.mdp()));
      if (render) {
        const OptimalSolution opt = value_iteration(world.mdp(), world.mdp().rewards());
        std::cerr << grid::render_ascii(layout, &opt.policy) << "V* = " << format_double(opt.values.at_initial(world.mdp().d0()))
                  << "\n";
      }
    } else if (collect_cmd->parsed()) {
      ExperimentConfig config;
      config.source = collect_model.mdp_path.empty() ? MdpSource::gridworld : MdpSource::file;
      config.mdp_path = collect_model.mdp_path;
      if (!collect_model.layout_path.empty()) config.layout = grid::GridLayout::load(collect_model.layout_path);
      config.horizon = collect_model.horizon;
      config.behaviors.clear();
      for (const std::string& item : behavior_items) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos || (item.starts_with("policy:") && colon == item.find(':'))) {
          config.behaviors.push_back({item, 1.0});
        } else {
          config.behaviors.push_back({item.substr(0, colon), parse_double(item.substr(colon + 1), 0, "--behavior")});
        }
      }
      config.n_episodes = n_episodes;
      config.timeout = timeout;
      if (mixing != "stratified" && mixing != "sampled") throw ParseError("mixing must be stratified or sampled", 0, "--mixing");
      config.mixing = mixing == "stratified" ? Mixing::stratified : Mixing::sampled;
      config.goal_absorption = !no_absorption;
      std::optional<grid::GridWorld> world;
      const AnyMdp mdp = load_model(config, world);
      emit(data_out, write_dataset(collect_dataset(config, mdp, world ? &*world : nullptr, collect_seed)));
    } else if (corrupt_cmd->parsed()) {
      const Dataset data = load_dataset(data_in);
      emit(data_out, write_dataset(corrupt(data, {parse_reward_kind(kind_name), lo, hi, corrupt_seed})));
    } else if (train_cmd->parsed()) {
      const auto world = train_model.world();
      const AnyMdp mdp = train_model.load(world);
      learner_spec.kind = parse_learner(learner_name);
      learner_spec.filter.gamma = learner_spec.vi_lcb.gamma;
      learner_spec.filter.v_max = learner_spec.vi_lcb.v_max;
      const Dataset data = load_dataset(data_in);
      emit(policy_out, write_policy(train_learner(learner_spec, data, mdp, parse_reward_kind(kind_name), learner_seed)));
    } else if (eval_cmd->parsed()) {
      const auto world = eval_model.world();
      const AnyMdp mdp = eval_model.load(world);
      const Policy policy = parse_policy(read_file(policy_in));
      nlohmann::ordered_json j;
      if (protocol == "exact") {
        j["protocol"] = "exact";
        j["mean_return"] = evaluate_exact(mdp, policy);
        j["stderr"] = 0.0;
      } else if (protocol == "mc") {
        const McEstimate mc = evaluate_mc(mdp, policy, eval_episodes, eval_seed);
        j["protocol"] = "mc";
        j["episodes"] = mc.n_episodes;
        j["mean_return"] = mc.mean;
        j["stderr"] = mc.std_error;
      } else {
        throw ParseError("protocol must be exact or mc", 0, "--protocol");
      }
      if (!data_in.empty()) {
        const EscapeResult escape = escape_probability(mdp, policy, load_dataset(data_in).support());
        j["escape_probability"] = escape.probability;
        j["discounted_escape"] = escape.discounted;
      }
      std::cout << json_text(j);
    } else if (solve_cmd->parsed()) {
      const auto world = solve_model.world();
      const AnyMdp mdp = solve_model.load(world);
      const Dataset data = load_dataset(data_in);
      const Cmdp cmdp = build_implicit_cmdp(mdp, data_reward(data), data.support()).with_budget(budget);
      nlohmann::ordered_json j;
      j["lagrangian"] = solve_lagrangian(cmdp).to_json();
      if (with_oracle) j["brute_force"] = brute_force_oracle(cmdp).to_json();
      std::cout << json_text(j);
    } else if (survival_cmd->parsed()) {
      const auto world = survival_model.world();
      const AnyMdp mdp = survival_model.load(world);
      const Dataset data = load_dataset(data_in);
      const Policy policy = parse_policy(read_file(policy_in));
      std::cout << json_text(verify_survival(mdp, data, data_reward(data), policy).to_json());
    } else if (bias_report_cmd->parsed()) {
      const auto world = bias_model.world();
      const AnyMdp mdp = bias_model.load(world);
      const Dataset data = load_dataset(data_in);
      BiasPipelineSpec spec;
      spec.learner.kind = parse_learner(learner_name);
      spec.seed = learner_seed;
      spec.lo = lo;
      spec.hi = hi;
      const BiasReport report = bias_report(mdp, data, spec);
      emit(report_out, json_text(report.to_json()));
      if (!length_out.empty()) write_file(length_out, report.length_return.to_csv());
    } else if (repro_grid_cmd->parsed()) {
      if (perturbed && !repro_layout.empty()) throw ParseError("--perturbed and --layout are exclusive", 0, "--perturbed");
      if (perturbed) repro.layout = perturbed_layout();
      if (!repro_layout.empty()) repro.layout = grid::GridLayout::load(repro_layout);
      repro.ablation = !no_ablation;
      const ReproReport report = repro_gridworld(repro);
      std::cout << report.to_markdown();
      std::printf("\n%s in %.0f ms\n", report.pass ? "PASS" : "FAIL", report.runtime_ms);
      if (!report.pass) std::cerr << report.failure_summary();
      if (!repro_out.empty()) {
        std::filesystem::create_directories(repro_out);
        write_file((std::filesystem::path(repro_out) / "repro.json").string(), json_text(report.to_json()));
        write_file((std::filesystem::path(repro_out) / "repro.md").string(), report.to_markdown());
      }
      return report.pass ? 0 : kReproFailure;
    } else if (matrix_cmd->parsed()) {
      if (config_path.empty() && json_config_path.empty()) throw ParseError("--config or --json-config is required", 0, "--config");
      ExperimentConfig config = config_path.empty() ? load_experiment_config(json_config_path) : load_experiment_config(config_path);
      if (!json_config_path.empty() && !json_config_path.ends_with(".json")) {
        config = parse_experiment_config_json(read_file(json_config_path),
                                              std::filesystem::path(json_config_path).parent_path().string());
      }
      if (!out_dir.empty()) config.output_dir = out_dir;
      const MatrixResult result = run_matrix(config);
      std::size_t failed = 0;
      for (const ResultRow& row : result.rows) failed += row.ok() ? 0 : 1;
      std::cout << emit_report(result.rows, ReportFormat::markdown);
      std::printf("%zu cells, %zu failed, written to %s\n", result.rows.size(), failed, config.output_dir.c_str());
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UnsupportedError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
