#pragma once

// Experiment configs, the reward-kind x learner x seed matrix, the grid-world
// reproduction run and report emission.
//
// Config text is `key = value` lines under `[section]` headers; '#' or ';'
// start a comment. The JSON form is an object of section objects whose
// values are scalars or arrays of scalars.
//
//   [mdp]         source = gridworld | file, path, layout, horizon
//   [collection]  episodes, behaviors = name:weight, ..., timeout, mixing,
//                 goal_absorption, strip_terminals
//   [corruption]  kinds, lo, hi
//   [learners]    list
//   [pevi]        beta
//   [vi_lcb]      gamma, v_max, delta
//   [pqi] [ppi]   b, n_iters, gamma, v_max (ppi also eval_iters)
//   [seeds]       list
//   [evaluation]  protocol = exact | mc, episodes
//   [output]      dir
//
// Behavior names: optimal, uniform, lava (grid only), policy:<path>.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "survival/dataset.hpp"
#include "survival/gridworld.hpp"
#include "survival/learners.hpp"
#include "survival/mdp_io.hpp"

namespace survival {

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

/// Parsed but not yet interpreted config text.
struct ConfigDocument {
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(std::string_view section, std::string_view key) const;
};

/// Throws ParseError with the line and `section.key` of the offending entry.
ConfigDocument parse_ini(const std::string& text);
/// JSON syntax errors report the line of the failing byte.
ConfigDocument parse_json_config(const std::string& text);

enum class MdpSource { gridworld, file };
enum class EvalProtocol { exact, mc };

struct BehaviorEntry {
  std::string name;
  double weight = 1.0;
};

struct LearnerEntry {
  LearnerSpec spec;
  /// VI-LCB and PQI/PPI take gamma from a discounted model unless it is set.
  bool gamma_set = false;
};

struct ExperimentConfig {
  MdpSource source = MdpSource::gridworld;
  std::string mdp_path;
  /// Grid layout; the default layout when empty.
  std::optional<grid::GridLayout> layout;
  std::size_t horizon = 20;

  std::vector<BehaviorEntry> behaviors{{"optimal", 0.2}, {"lava", 0.8}};
  std::size_t n_episodes = 500;
  /// Defaults to H-1 on finite models; required for discounted ones.
  std::optional<std::size_t> timeout;
  Mixing mixing = Mixing::stratified;
  bool goal_absorption = true;
  bool strip_terminals = false;

  std::vector<RewardKind> kinds{std::begin(kAllRewardKinds), std::end(kAllRewardKinds)};
  double corrupt_lo = 0.0;
  double corrupt_hi = 1.0;

  std::vector<LearnerEntry> learners;
  std::vector<std::uint64_t> seeds;

  EvalProtocol protocol = EvalProtocol::mc;
  std::size_t eval_episodes = 1000;

  std::string output_dir;

  /// Throws ValidationError.
  void validate() const;
  /// Normalized config text (includes the layout); the digest is taken over it.
  std::string canonical() const;
  std::string digest() const;

  /// The grid table recipe: BC and PEVI, all four kinds, 500 episodes,
  /// 1000 evaluation episodes.
  static ExperimentConfig gridworld_table(std::uint64_t seed = 0);
  /// Relative paths (layout, mdp, policy behaviors) resolve against base_dir.
  static ExperimentConfig from_document(const ConfigDocument& doc, const std::string& base_dir = ".");
};

ExperimentConfig parse_experiment_config(const std::string& ini_text, const std::string& base_dir = ".");
ExperimentConfig parse_experiment_config_json(const std::string& json_text, const std::string& base_dir = ".");
/// JSON when the file name ends in .json, otherwise the ini form.
ExperimentConfig load_experiment_config(const std::string& path);

struct ResultRow {
  std::string learner;
  std::string reward_kind;
  std::uint64_t seed = 0;
  /// NaN when the cell failed.
  double mean_return = 0.0;
  double std_error = 0.0;
  double escape_probability = 0.0;
  double support_violation = 0.0;
  double runtime_ms = 0.0;
  /// Empty on success.
  std::string error;

  bool ok() const { return error.empty(); }
};

struct MatrixResult {
  std::string config_digest;
  /// Ordered by learner, then reward kind, then seed, as listed in the config.
  std::vector<ResultRow> rows;
  /// (relative path, contents) of every dataset and policy file.
  std::vector<std::pair<std::string, std::string>> artifacts;
};

/// The model a config names; `world` is filled for the gridworld source.
AnyMdp load_model(const ExperimentConfig& config, std::optional<grid::GridWorld>& world);
/// The seed's dataset as the matrix builds it, before corruption.
Dataset collect_dataset(const ExperimentConfig& config, const AnyMdp& mdp, const grid::GridWorld* world,
                        std::uint64_t seed);

/// Worker count: hardware threads, capped by SURVIVAL_LAB_THREADS and by `jobs`.
std::size_t worker_count(std::size_t jobs);

/// Runs every cell in memory. A failing cell records its error in its row.
MatrixResult compute_matrix(const ExperimentConfig& config);
/// compute_matrix, then writes results.{csv,json,md}, timings.csv and the
/// artifacts under config.output_dir.
MatrixResult run_matrix(const ExperimentConfig& config);

enum class ReportFormat { csv, json, markdown };

ReportFormat parse_report_format(std::string_view name);
std::string to_string(ReportFormat format);

struct ReportOptions {
  /// Written as a header line when non-empty.
  std::string config_digest;
  /// runtime_ms column; off for the byte-deterministic result files.
  bool runtime = true;
};

/// csv: `learner,reward_kind,seed,mean_return,stderr,escape_probability,
/// support_violation[,runtime_ms],error`. markdown: reward kinds as rows,
/// learners as columns, each cell "mean ± stderr" (the stderr across seeds
/// when there are several).
std::string emit_report(const std::vector<ResultRow>& rows, ReportFormat format, const ReportOptions& options = {});

struct ParsedReport {
  std::string config_digest;
  std::vector<ResultRow> rows;
};

/// csv and json only.
ParsedReport read_report(const std::string& text, ReportFormat format);

std::string learner_display_name(std::string_view learner);
std::string reward_display_name(std::string_view kind);

// ------------------------------------------------------ grid reproduction

struct ReproOptions {
  grid::GridLayout layout = grid::GridLayout::default_layout();
  std::uint64_t seed = 0;
  double beta = 1.0;
  double expected_bc = -1.19;
  double expected_pevi = 0.92;
  double tolerance = 0.005;
  /// Also run PEVI with beta = 0.
  bool ablation = true;
};

struct ReproCell {
  std::string learner;
  std::string reward_kind;
  double expected = 0.0;
  double observed = 0.0;
  double std_error = 0.0;
  double delta = 0.0;
  bool pass = false;
  std::string error;
};

struct AblationRow {
  std::string reward_kind;
  double beta = 0.0;
  double observed = 0.0;
  double std_error = 0.0;
};

struct ReproReport {
  bool pass = false;
  std::string config_digest;
  double tolerance = 0.0;
  std::vector<ReproCell> cells;
  std::vector<AblationRow> ablation;
  std::vector<ResultRow> rows;
  double runtime_ms = 0.0;

  /// One line per failing cell with its observed value; empty on PASS.
  std::string failure_summary() const;
  /// Runtime is left out so the file is byte-deterministic.
  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

ReproReport repro_gridworld(const ReproOptions& options = {});

/// The default layout with an extra wall at (4,3), which blocks the short
/// route along the right column.
grid::GridLayout perturbed_layout();

}  // namespace survival
