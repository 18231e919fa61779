#include "survival/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "survival/cmdp.hpp"
#include "survival/dp.hpp"
#include "survival/errors.hpp"
#include "survival/text_io.hpp"

namespace survival {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (std::string_view token : split_tokens(value, ",")) {
    token = trim(token);
    if (!token.empty()) out.emplace_back(token);
  }
  return out;
}

bool parse_bool(std::string_view value, int line, const std::string& field) {
  if (value == "true" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "no" || value == "0") return false;
  throw ParseError("expected true or false, got '" + std::string(value) + "'", line, field);
}

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  std::string out = buf;
  // No "-0.00".
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

LearnerEntry make_entry(LearnerKind kind, double beta = 1.0) {
  LearnerEntry e;
  e.spec.kind = kind;
  e.spec.beta = beta;
  return e;
}

}  // namespace

// ---------------------------------------------------------------- parsing

const ConfigEntry* ConfigDocument::find(std::string_view section, std::string_view key) const {
  for (const ConfigEntry& e : entries) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

ConfigDocument parse_ini(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no, std::string(line));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ParseError("empty section name", line_no, "");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, section);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("missing key", line_no, section);
    if (section.empty()) throw ParseError("key outside of any section", line_no, key);
    if (doc.find(section, key) != nullptr) throw ParseError("duplicate key", line_no, section + "." + key);
    doc.entries.push_back({section, key, value, line_no});
  }
  return doc;
}

ConfigDocument parse_json_config(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ParseError(std::string("invalid JSON: ") + e.what(), line, "");
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1, "");
  const auto scalar = [](const nlohmann::ordered_json& v, const std::string& field) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return format_double(v.get<double>());
    throw ParseError("expected a string, number or boolean", 0, field);
  };
  ConfigDocument doc;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ParseError("section must be an object", 0, section);
    for (const auto& [key, value] : body.items()) {
      const std::string field = section + "." + key;
      std::string text_value;
      if (value.is_array()) {
        std::vector<std::string> items;
        for (const auto& item : value) items.push_back(scalar(item, field));
        text_value = join(items);
      } else {
        text_value = scalar(value, field);
      }
      doc.entries.push_back({section, key, text_value, 0});
    }
  }
  return doc;
}

// ----------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (learners.empty()) throw ValidationError("at least one learner is required");
  if (kinds.empty()) throw ValidationError("at least one corruption kind is required");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (behaviors.empty()) throw ValidationError("at least one behavior is required");
  if (n_episodes == 0) throw ValidationError("collection.episodes must be positive");
  if (horizon == 0) throw ValidationError("mdp.horizon must be positive");
  if (protocol == EvalProtocol::mc && eval_episodes == 0) throw ValidationError("evaluation.episodes must be positive");
  if (!(corrupt_lo <= corrupt_hi)) throw ValidationError("corruption.lo must not exceed corruption.hi");
  if (source == MdpSource::file && mdp_path.empty()) throw ValidationError("mdp.path is required for file models");
  if (source == MdpSource::file && layout) throw ValidationError("mdp.layout only applies to the gridworld source");
  for (const BehaviorEntry& b : behaviors) {
    if (!(b.weight > 0.0) || !std::isfinite(b.weight)) throw ValidationError("behavior weights must be positive");
    if (b.name == "lava" && source != MdpSource::gridworld) throw ValidationError("the lava behavior needs the gridworld");
    if (b.name != "optimal" && b.name != "uniform" && b.name != "lava" && !b.name.starts_with("policy:")) {
      throw ValidationError("unknown behavior '" + b.name + "'");
    }
  }
  for (const LearnerEntry& e : learners) {
    if (e.spec.kind == LearnerKind::vi_lcb) e.spec.vi_lcb.validate();
    if (e.spec.kind == LearnerKind::pqi || e.spec.kind == LearnerKind::ppi) e.spec.filter.validate();
    if (!std::isfinite(e.spec.beta) || e.spec.beta < 0.0) throw ValidationError("pevi.beta must be non-negative");
  }
  if (layout) layout->validate();
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "[mdp]\nsource = " << (source == MdpSource::gridworld ? "gridworld" : "file") << '\n';
  if (source == MdpSource::file) out << "path = " << mdp_path << '\n';
  if (source == MdpSource::gridworld) {
    out << "layout_digest = " << digest_hex((layout ? *layout : grid::GridLayout::default_layout()).to_text()) << '\n';
  }
  out << "horizon = " << horizon << '\n';
  std::vector<std::string> bs;
  for (const BehaviorEntry& b : behaviors) bs.push_back(b.name + ":" + format_double(b.weight));
  out << "[collection]\nepisodes = " << n_episodes << "\nbehaviors = " << join(bs)
      << "\ntimeout = " << (timeout ? std::to_string(*timeout) : "default")
      << "\nmixing = " << (mixing == Mixing::stratified ? "stratified" : "sampled")
      << "\ngoal_absorption = " << (goal_absorption ? "true" : "false")
      << "\nstrip_terminals = " << (strip_terminals ? "true" : "false") << '\n';
  std::vector<std::string> ks;
  for (RewardKind k : kinds) ks.push_back(to_string(k));
  out << "[corruption]\nkinds = " << join(ks) << "\nlo = " << format_double(corrupt_lo)
      << "\nhi = " << format_double(corrupt_hi) << '\n';
  std::vector<std::string> ls;
  for (const LearnerEntry& e : learners) ls.push_back(to_string(e.spec.kind));
  out << "[learners]\nlist = " << join(ls) << '\n';
  for (const LearnerEntry& e : learners) {
    const LearnerSpec& s = e.spec;
    out << '[' << to_string(s.kind) << "]\n";
    switch (s.kind) {
      case LearnerKind::bc: break;
      case LearnerKind::pevi: out << "beta = " << format_double(s.beta) << '\n'; break;
      case LearnerKind::vi_lcb:
        out << "gamma = " << (e.gamma_set ? format_double(s.vi_lcb.gamma) : "model") << "\nv_max = "
            << format_double(s.vi_lcb.v_max) << "\ndelta = " << format_double(s.vi_lcb.delta_conf) << '\n';
        break;
      case LearnerKind::pqi:
      case LearnerKind::ppi:
        out << "b = " << format_double(s.filter.b) << "\nn_iters = " << s.filter.n_iters
            << "\ngamma = " << (e.gamma_set ? format_double(s.filter.gamma) : "model")
            << "\nv_max = " << format_double(s.filter.v_max) << '\n';
        if (s.kind == LearnerKind::ppi) out << "eval_iters = " << s.ppi_eval_iters << '\n';
        break;
    }
  }
  std::vector<std::string> ss;
  for (std::uint64_t s : seeds) ss.push_back(std::to_string(s));
  out << "[seeds]\nlist = " << join(ss) << '\n';
  out << "[evaluation]\nprotocol = " << (protocol == EvalProtocol::mc ? "mc" : "exact") << '\n';
  if (protocol == EvalProtocol::mc) out << "episodes = " << eval_episodes << '\n';
  return out.str();
}

std::string ExperimentConfig::digest() const { return digest_hex(canonical()); }

ExperimentConfig ExperimentConfig::gridworld_table(std::uint64_t seed) {
  ExperimentConfig config;
  config.learners = {make_entry(LearnerKind::bc), make_entry(LearnerKind::pevi)};
  config.seeds = {seed};
  return config;
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& doc, const std::string& base_dir) {
  ExperimentConfig config;
  std::map<LearnerKind, LearnerEntry> templates;
  for (LearnerKind k : {LearnerKind::bc, LearnerKind::pevi, LearnerKind::vi_lcb, LearnerKind::pqi, LearnerKind::ppi}) {
    templates[k].spec.kind = k;
  }
  const ConfigEntry* learner_list = nullptr;

  for (const ConfigEntry& e : doc.entries) {
    const std::string field = e.section + "." + e.key;
    const auto number = [&] { return parse_double(e.value, e.line, field); };
    const auto count = [&] { return static_cast<std::size_t>(parse_uint(e.value, e.line, field)); };
    const auto unknown = [&] { throw ParseError("unknown key", e.line, field); };

    if (e.section == "mdp") {
      if (e.key == "source") {
        if (e.value == "gridworld") config.source = MdpSource::gridworld;
        else if (e.value == "file") config.source = MdpSource::file;
        else throw ParseError("source must be gridworld or file", e.line, field);
      } else if (e.key == "path") {
        config.mdp_path = resolve_path(base_dir, e.value);
      } else if (e.key == "layout") {
        try {
          config.layout = grid::GridLayout::load(resolve_path(base_dir, e.value));
        } catch (const Error& err) {
          throw ParseError(std::string("cannot load layout: ") + err.what(), e.line, field);
        }
      } else if (e.key == "horizon") {
        config.horizon = count();
      } else {
        unknown();
      }
    } else if (e.section == "collection") {
      if (e.key == "episodes") {
        config.n_episodes = count();
      } else if (e.key == "behaviors") {
        config.behaviors.clear();
        for (const std::string& item : split_list(e.value)) {
          // Weight after the last ':'; a bare policy:<path> keeps its colon.
          const auto colon = item.rfind(':');
          BehaviorEntry b;
          if (colon == std::string::npos || (item.starts_with("policy:") && colon == item.find(':'))) {
            b.name = item;
          } else {
            b.name = std::string(trim(std::string_view(item).substr(0, colon)));
            b.weight = parse_double(std::string_view(item).substr(colon + 1), e.line, field);
          }
          if (b.name.starts_with("policy:")) b.name = "policy:" + resolve_path(base_dir, b.name.substr(7));
          config.behaviors.push_back(b);
        }
      } else if (e.key == "timeout") {
        config.timeout = count();
      } else if (e.key == "mixing") {
        if (e.value == "stratified") config.mixing = Mixing::stratified;
        else if (e.value == "sampled") config.mixing = Mixing::sampled;
        else throw ParseError("mixing must be stratified or sampled", e.line, field);
      } else if (e.key == "goal_absorption") {
        config.goal_absorption = parse_bool(e.value, e.line, field);
      } else if (e.key == "strip_terminals") {
        config.strip_terminals = parse_bool(e.value, e.line, field);
      } else {
        unknown();
      }
    } else if (e.section == "corruption") {
      if (e.key == "kinds") {
        config.kinds.clear();
        for (const std::string& item : split_list(e.value)) {
          RewardKind k;
          try {
            k = parse_reward_kind(item);
          } catch (const Error&) {
            throw ParseError("unknown reward kind '" + item + "'", e.line, field);
          }
          if (std::find(config.kinds.begin(), config.kinds.end(), k) != config.kinds.end()) {
            throw ParseError("duplicate reward kind '" + item + "'", e.line, field);
          }
          config.kinds.push_back(k);
        }
      } else if (e.key == "lo") {
        config.corrupt_lo = number();
      } else if (e.key == "hi") {
        config.corrupt_hi = number();
      } else {
        unknown();
      }
    } else if (e.section == "learners") {
      if (e.key == "list") learner_list = &e;
      else unknown();
    } else if (e.section == "pevi") {
      if (e.key == "beta") templates[LearnerKind::pevi].spec.beta = number();
      else unknown();
    } else if (e.section == "vi_lcb") {
      LearnerEntry& t = templates[LearnerKind::vi_lcb];
      if (e.key == "gamma") {
        t.spec.vi_lcb.gamma = number();
        t.gamma_set = true;
      } else if (e.key == "v_max") {
        t.spec.vi_lcb.v_max = number();
      } else if (e.key == "delta") {
        t.spec.vi_lcb.delta_conf = number();
      } else {
        unknown();
      }
    } else if (e.section == "pqi" || e.section == "ppi") {
      LearnerEntry& t = templates[e.section == "pqi" ? LearnerKind::pqi : LearnerKind::ppi];
      if (e.key == "b") {
        t.spec.filter.b = number();
      } else if (e.key == "n_iters") {
        t.spec.filter.n_iters = count();
      } else if (e.key == "gamma") {
        t.spec.filter.gamma = number();
        t.gamma_set = true;
      } else if (e.key == "v_max") {
        t.spec.filter.v_max = number();
      } else if (e.key == "eval_iters" && e.section == "ppi") {
        t.spec.ppi_eval_iters = count();
      } else {
        unknown();
      }
    } else if (e.section == "seeds") {
      if (e.key != "list") unknown();
      config.seeds.clear();
      for (const std::string& item : split_list(e.value)) {
        const std::uint64_t s = parse_uint(item, e.line, field);
        if (std::find(config.seeds.begin(), config.seeds.end(), s) != config.seeds.end()) {
          throw ParseError("duplicate seed " + item, e.line, field);
        }
        config.seeds.push_back(s);
      }
    } else if (e.section == "evaluation") {
      if (e.key == "protocol") {
        if (e.value == "mc") config.protocol = EvalProtocol::mc;
        else if (e.value == "exact") config.protocol = EvalProtocol::exact;
        else throw ParseError("protocol must be exact or mc", e.line, field);
      } else if (e.key == "episodes") {
        config.eval_episodes = count();
      } else {
        unknown();
      }
    } else if (e.section == "output") {
      if (e.key == "dir") config.output_dir = resolve_path(base_dir, e.value);
      else unknown();
    } else {
      throw ParseError("unknown section", e.line, e.section);
    }
  }

  if (learner_list != nullptr) {
    const std::string field = "learners.list";
    for (const std::string& item : split_list(learner_list->value)) {
      LearnerKind k;
      try {
        k = parse_learner(item);
      } catch (const Error&) {
        throw ParseError("unknown learner '" + item + "'", learner_list->line, field);
      }
      for (const LearnerEntry& existing : config.learners) {
        if (existing.spec.kind == k) throw ParseError("duplicate learner '" + item + "'", learner_list->line, field);
      }
      config.learners.push_back(templates[k]);
    }
  }
  config.validate();
  return config;
}

ExperimentConfig parse_experiment_config(const std::string& ini_text, const std::string& base_dir) {
  return ExperimentConfig::from_document(parse_ini(ini_text), base_dir);
}

ExperimentConfig parse_experiment_config_json(const std::string& json_text, const std::string& base_dir) {
  return ExperimentConfig::from_document(parse_json_config(json_text), base_dir);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const std::string text = read_file(path);
  const std::string base = fs::path(path).parent_path().string();
  if (path.ends_with(".json")) return parse_experiment_config_json(text, base);
  return parse_experiment_config(text, base);
}

// ----------------------------------------------------------------- matrix

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SURVIVAL_LAB_THREADS"); env != nullptr && *env != '\0') {
    std::uint64_t cap = 0;
    try {
      cap = parse_uint(env);
    } catch (const Error&) {
      throw ValidationError("SURVIVAL_LAB_THREADS must be a positive integer");
    }
    if (cap == 0) throw ValidationError("SURVIVAL_LAB_THREADS must be a positive integer");
    n = std::min<std::size_t>(n, cap);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

namespace {

struct Prepared {
  std::optional<Dataset> dataset;
  std::string error;
};

std::vector<Behavior> build_behaviors(const ExperimentConfig& config, const AnyMdp& mdp,
                                      const grid::GridWorld* world) {
  const MdpModel& model = std::visit([](const auto& m) -> const MdpModel& { return m; }, mdp);
  std::vector<Behavior> out;
  for (const BehaviorEntry& b : config.behaviors) {
    Policy policy;
    if (b.name == "optimal") {
      if (const auto* finite = std::get_if<FiniteMdp>(&mdp)) {
        policy = value_iteration(*finite, finite->rewards()).policy;
      } else {
        const auto& discounted = std::get<TabularMdp>(mdp);
        policy = exact_optimal_policy(discounted, discounted.rewards());
      }
    } else if (b.name == "uniform") {
      policy = Policy::uniform(model.n_states(), model.n_actions());
    } else if (b.name == "lava") {
      if (world == nullptr) throw ValidationError("the lava behavior needs the gridworld");
      policy = grid::lava_seeking_policy(*world, grid::topmost_lava(world->layout()));
    } else if (b.name.starts_with("policy:")) {
      policy = parse_policy(read_file(b.name.substr(7)));
    } else {
      throw ValidationError("unknown behavior '" + b.name + "'");
    }
    out.push_back({std::move(policy), b.weight, b.name});
  }
  return out;
}

std::string digest_line(const std::string& digest) { return "# config_digest=" + digest + "\n"; }

}  // namespace

AnyMdp load_model(const ExperimentConfig& config, std::optional<grid::GridWorld>& world) {
  if (config.source == MdpSource::gridworld) {
    world.emplace(grid::build_gridworld(config.layout ? *config.layout : grid::GridLayout::default_layout(), {},
                                        config.horizon));
    return world->mdp();
  }
  world.reset();
  return load_mdp(config.mdp_path);
}

Dataset collect_dataset(const ExperimentConfig& config, const AnyMdp& mdp, const grid::GridWorld* world,
                        std::uint64_t seed) {
  CollectionSpec collection;
  collection.behaviors = build_behaviors(config, mdp, world);
  collection.n_episodes = config.n_episodes;
  collection.mixing = config.mixing;
  collection.seed = seed;
  if (config.timeout) {
    collection.rule.timeout_at = *config.timeout;
  } else if (const auto* finite = std::get_if<FiniteMdp>(&mdp)) {
    collection.rule.timeout_at = finite->horizon() - 1;
  } else {
    throw ValidationError("collection.timeout is required for discounted models");
  }
  collection.validate();
  Dataset d = std::visit([&](const auto& m) { return collect(m, collection); }, mdp);
  if (world != nullptr && config.goal_absorption) d = extend_goal_absorption(d, world->mdp(), world->goal_state());
  if (config.strip_terminals) d = strip_terminal_transitions(d);
  return d;
}

MatrixResult compute_matrix(const ExperimentConfig& config) {
  config.validate();
  MatrixResult result;
  result.config_digest = config.digest();
  const std::string header = digest_line(result.config_digest);

  std::optional<grid::GridWorld> world;
  const AnyMdp mdp = load_model(config, world);
  if (std::holds_alternative<TabularMdp>(mdp) && !config.timeout) {
    throw ValidationError("collection.timeout is required for discounted models");
  }

  // Datasets per (seed, kind), built serially; cells only read them.
  const std::size_t n_kinds = config.kinds.size(), n_seeds = config.seeds.size();
  std::vector<Prepared> prepared(n_seeds * n_kinds);
  for (std::size_t si = 0; si < n_seeds; ++si) {
    const std::uint64_t seed = config.seeds[si];
    std::optional<Dataset> base;
    std::string base_error;
    try {
      base.emplace(collect_dataset(config, mdp, world ? &*world : nullptr, seed));
    } catch (const std::exception& e) {
      base_error = std::string("collection failed: ") + e.what();
    }
    for (std::size_t ki = 0; ki < n_kinds; ++ki) {
      Prepared& p = prepared[si * n_kinds + ki];
      if (!base) {
        p.error = base_error;
        continue;
      }
      try {
        p.dataset.emplace(corrupt(*base, {config.kinds[ki], config.corrupt_lo, config.corrupt_hi, seed}));
        result.artifacts.emplace_back("datasets/seed" + std::to_string(seed) + "_" + to_string(config.kinds[ki]) + ".csv",
                                      header + write_dataset(*p.dataset));
      } catch (const std::exception& e) {
        p.error = std::string("corruption failed: ") + e.what();
      }
    }
  }

  const std::size_t n_cells = config.learners.size() * n_kinds * n_seeds;
  result.rows.resize(n_cells);
  std::vector<std::string> policy_texts(n_cells);

  const auto run_cell = [&](std::size_t index) {
    const std::size_t li = index / (n_kinds * n_seeds);
    const std::size_t ki = index / n_seeds % n_kinds;
    const std::size_t si = index % n_seeds;
    const LearnerEntry& entry = config.learners[li];
    const RewardKind kind = config.kinds[ki];
    const std::uint64_t seed = config.seeds[si];
    ResultRow& row = result.rows[index];
    row.learner = to_string(entry.spec.kind);
    row.reward_kind = to_string(kind);
    row.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Prepared& p = prepared[si * n_kinds + ki];
      if (!p.dataset) throw Error(p.error);
      const Dataset& data = *p.dataset;
      LearnerSpec spec = entry.spec;
      if (const auto* discounted = std::get_if<TabularMdp>(&mdp); discounted != nullptr && !entry.gamma_set) {
        spec.vi_lcb.gamma = discounted->gamma();
        spec.filter.gamma = discounted->gamma();
      }
      const Policy policy = train_learner(spec, data, mdp, kind, seed);
      if (config.protocol == EvalProtocol::exact) {
        row.mean_return = evaluate_exact(mdp, policy);
        row.std_error = 0.0;
      } else {
        const McEstimate mc = evaluate_mc(mdp, policy, config.eval_episodes, seed);
        row.mean_return = mc.mean;
        row.std_error = mc.std_error;
      }
      const Support support = data.support();
      row.escape_probability = escape_probability(mdp, policy, support).probability;
      StateActionTable off_support(data.n_states(), data.n_actions(), 1.0);
      for (auto [s, a] : support.pairs()) off_support(s, a) = 0.0;
      row.support_violation = policy_value(mdp, policy, off_support);
      policy_texts[index] = header + write_policy(policy);
    } catch (const std::exception& e) {
      row.error = e.what();
    } catch (...) {
      row.error = "unknown failure";
    }
    if (!row.error.empty()) {
      row.mean_return = row.std_error = row.escape_probability = row.support_violation = kNaN;
      policy_texts[index].clear();
    }
    row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    const std::size_t n_workers = worker_count(n_cells);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n_cells; i = next++) run_cell(i);
      });
    }
  }

  for (std::size_t i = 0; i < n_cells; ++i) {
    if (policy_texts[i].empty()) continue;
    const ResultRow& row = result.rows[i];
    result.artifacts.emplace_back("policies/" + row.learner + "_" + row.reward_kind + "_seed" + std::to_string(row.seed) + ".txt",
                                  std::move(policy_texts[i]));
  }
  return result;
}

MatrixResult run_matrix(const ExperimentConfig& config) {
  if (config.output_dir.empty()) throw ValidationError("output.dir is required");
  const fs::path out(config.output_dir);
  std::error_code ec;
  fs::create_directories(out / "datasets", ec);
  if (!ec) fs::create_directories(out / "policies", ec);
  if (ec) throw ValidationError("output directory is not writable: " + config.output_dir);

  MatrixResult result = compute_matrix(config);
  ReportOptions options{result.config_digest, false};
  write_file((out / "results.csv").string(), emit_report(result.rows, ReportFormat::csv, options));
  write_file((out / "results.json").string(), emit_report(result.rows, ReportFormat::json, options));
  write_file((out / "results.md").string(), emit_report(result.rows, ReportFormat::markdown, options));
  std::string timings = digest_line(result.config_digest) + "learner,reward_kind,seed,runtime_ms\n";
  for (const ResultRow& row : result.rows) {
    timings += row.learner + "," + row.reward_kind + "," + std::to_string(row.seed) + "," + fixed(row.runtime_ms, 3) + "\n";
  }
  write_file((out / "timings.csv").string(), timings);
  for (const auto& [path, contents] : result.artifacts) write_file((out / path).string(), contents);
  return result;
}

// ---------------------------------------------------------------- reports

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "markdown-table" || name == "md") return ReportFormat::markdown;
  throw ValidationError("unknown report format '" + std::string(name) + "'");
}

std::string to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::markdown: return "markdown";
  }
  return "?";
}

std::string learner_display_name(std::string_view learner) {
  if (learner == "bc") return "Behavior Cloning";
  if (learner == "pevi") return "PEVI";
  if (learner == "vi_lcb") return "VI-LCB";
  if (learner == "pqi") return "PQI";
  if (learner == "ppi") return "PPI";
  return std::string(learner);
}

std::string reward_display_name(std::string_view kind) {
  if (kind == "original") return "Original Reward";
  if (kind == "zero") return "Zero Reward";
  if (kind == "random") return "Random Reward";
  if (kind == "negative") return "Negative Reward";
  return std::string(kind);
}

namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line, int line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no, "");
  return fields;
}

nlohmann::ordered_json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::string markdown_table(const std::vector<ResultRow>& rows) {
  std::vector<std::string> learners, kinds;
  for (const ResultRow& r : rows) {
    if (std::find(learners.begin(), learners.end(), r.learner) == learners.end()) learners.push_back(r.learner);
    if (std::find(kinds.begin(), kinds.end(), r.reward_kind) == kinds.end()) kinds.push_back(r.reward_kind);
  }
  std::string out = "| Reward Type |";
  for (const std::string& l : learners) out += " " + learner_display_name(l) + " |";
  out += "\n|:---|";
  for (std::size_t i = 0; i < learners.size(); ++i) out += ":---:|";
  out += '\n';
  for (const std::string& k : kinds) {
    out += "| " + reward_display_name(k) + " |";
    for (const std::string& l : learners) {
      std::vector<const ResultRow*> cell;
      bool any = false;
      for (const ResultRow& r : rows) {
        if (r.learner != l || r.reward_kind != k) continue;
        any = true;
        if (r.ok()) cell.push_back(&r);
      }
      if (!any) {
        out += " n/a |";
        continue;
      }
      if (cell.empty()) {
        out += " error |";
        continue;
      }
      double mean = 0.0, se = 0.0;
      for (const ResultRow* r : cell) mean += r->mean_return;
      mean /= static_cast<double>(cell.size());
      if (cell.size() == 1) {
        se = cell.front()->std_error;
      } else {
        double ss = 0.0;
        for (const ResultRow* r : cell) ss += (r->mean_return - mean) * (r->mean_return - mean);
        const double n = static_cast<double>(cell.size());
        se = std::sqrt(ss / (n - 1.0) / n);
      }
      out += " " + fixed(mean, 2) + " ± " + fixed(se, 2) + " |";
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string emit_report(const std::vector<ResultRow>& rows, ReportFormat format, const ReportOptions& options) {
  switch (format) {
    case ReportFormat::csv: {
      std::string out;
      if (!options.config_digest.empty()) out += digest_line(options.config_digest);
      out += "learner,reward_kind,seed,mean_return,stderr,escape_probability,support_violation,";
      out += options.runtime ? "runtime_ms,error\n" : "error\n";
      for (const ResultRow& r : rows) {
        out += csv_field(r.learner) + "," + csv_field(r.reward_kind) + "," + std::to_string(r.seed) + "," +
               format_double(r.mean_return) + "," + format_double(r.std_error) + "," +
               format_double(r.escape_probability) + "," + format_double(r.support_violation) + ",";
        if (options.runtime) out += format_double(r.runtime_ms) + ",";
        out += csv_field(r.error) + "\n";
      }
      return out;
    }
    case ReportFormat::json: {
      nlohmann::ordered_json j;
      if (!options.config_digest.empty()) j["config_digest"] = options.config_digest;
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const ResultRow& r : rows) {
        nlohmann::ordered_json row;
        row["learner"] = r.learner;
        row["reward_kind"] = r.reward_kind;
        row["seed"] = r.seed;
        row["mean_return"] = number_or_null(r.mean_return);
        row["stderr"] = number_or_null(r.std_error);
        row["escape_probability"] = number_or_null(r.escape_probability);
        row["support_violation"] = number_or_null(r.support_violation);
        if (options.runtime) row["runtime_ms"] = number_or_null(r.runtime_ms);
        row["error"] = r.error;
        list.push_back(std::move(row));
      }
      j["rows"] = std::move(list);
      return j.dump(2) + "\n";
    }
    case ReportFormat::markdown: {
      std::string out;
      if (!options.config_digest.empty()) out += "<!-- config_digest=" + options.config_digest + " -->\n";
      return out + markdown_table(rows);
    }
  }
  throw ValidationError("unknown report format");
}

ParsedReport read_report(const std::string& text, ReportFormat format) {
  ParsedReport report;
  if (format == ReportFormat::markdown) throw UnsupportedError("markdown reports are write-only");
  if (format == ReportFormat::json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
      if (j.contains("config_digest")) report.config_digest = j.at("config_digest").get<std::string>();
      const auto num = [](const nlohmann::json& row, const char* key) {
        if (!row.contains(key) || row.at(key).is_null()) return kNaN;
        return row.at(key).get<double>();
      };
      for (const auto& row : j.at("rows")) {
        ResultRow r;
        r.learner = row.at("learner").get<std::string>();
        r.reward_kind = row.at("reward_kind").get<std::string>();
        r.seed = row.at("seed").get<std::uint64_t>();
        r.mean_return = num(row, "mean_return");
        r.std_error = num(row, "stderr");
        r.escape_probability = num(row, "escape_probability");
        r.support_violation = num(row, "support_violation");
        r.runtime_ms = row.contains("runtime_ms") ? num(row, "runtime_ms") : 0.0;
        r.error = row.value("error", "");
        report.rows.push_back(std::move(r));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON report: ") + e.what(), 0, "");
    }
    return report;
  }

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::vector<std::string> columns;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    if (raw.front() == '#') {
      const std::string_view line = trim(std::string_view(raw).substr(1));
      if (line.starts_with("config_digest=")) report.config_digest = std::string(line.substr(14));
      continue;
    }
    const int first_line = line_no;
    std::string next;
    while (std::count(raw.begin(), raw.end(), '"') % 2 == 1 && std::getline(in, next)) {
      ++line_no;
      if (!next.empty() && next.back() == '\r') next.pop_back();
      raw += '\n' + next;
    }
    std::vector<std::string> fields = split_csv_line(raw, first_line);
    if (columns.empty()) {
      columns = std::move(fields);
      for (const char* required : {"learner", "reward_kind", "seed", "mean_return", "stderr", "escape_probability",
                                   "support_violation", "error"}) {
        if (std::find(columns.begin(), columns.end(), required) == columns.end()) {
          throw ParseError("missing column", line_no, required);
        }
      }
      continue;
    }
    if (fields.size() != columns.size()) throw ParseError("wrong number of fields", line_no, "");
    ResultRow r;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& name = columns[c];
      const std::string& v = fields[c];
      if (name == "learner") r.learner = v;
      else if (name == "reward_kind") r.reward_kind = v;
      else if (name == "seed") r.seed = parse_uint(v, line_no, name);
      else if (name == "mean_return") r.mean_return = parse_double(v, line_no, name);
      else if (name == "stderr") r.std_error = parse_double(v, line_no, name);
      else if (name == "escape_probability") r.escape_probability = parse_double(v, line_no, name);
      else if (name == "support_violation") r.support_violation = parse_double(v, line_no, name);
      else if (name == "runtime_ms") r.runtime_ms = parse_double(v, line_no, name);
      else if (name == "error") r.error = v;
      else throw ParseError("unknown column", line_no, name);
    }
    report.rows.push_back(std::move(r));
  }
  if (columns.empty()) throw ParseError("missing column header", line_no, "");
  return report;
}

// ------------------------------------------------------- grid reproduction

grid::GridLayout perturbed_layout() {
  grid::GridLayout layout = grid::GridLayout::default_layout();
  layout.walls.insert({4, 3});
  return layout;
}

std::string ReproReport::failure_summary() const {
  std::string out;
  for (const ReproCell& c : cells) {
    if (c.pass) continue;
    out += "cell " + c.learner + "/" + c.reward_kind + ": ";
    if (!c.error.empty()) {
      out += "error: " + c.error + "\n";
    } else {
      out += "observed " + fixed(c.observed, 4) + ", expected " + fixed(c.expected, 2) + ", delta " +
             fixed(c.delta, 4) + "\n";
    }
  }
  return out;
}

nlohmann::ordered_json ReproReport::to_json() const {
  nlohmann::ordered_json j;
  j["result"] = pass ? "PASS" : "FAIL";
  j["config_digest"] = config_digest;
  j["tolerance"] = tolerance;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const ReproCell& c : cells) {
    nlohmann::ordered_json row;
    row["learner"] = c.learner;
    row["reward_kind"] = c.reward_kind;
    row["expected"] = c.expected;
    row["observed"] = number_or_null(c.observed);
    row["stderr"] = number_or_null(c.std_error);
    row["delta"] = number_or_null(c.delta);
    row["pass"] = c.pass;
    row["error"] = c.error;
    list.push_back(std::move(row));
  }
  j["cells"] = std::move(list);
  nlohmann::ordered_json abl = nlohmann::ordered_json::array();
  for (const AblationRow& a : ablation) {
    abl.push_back({{"learner", "pevi"}, {"reward_kind", a.reward_kind}, {"beta", a.beta},
                   {"observed", number_or_null(a.observed)}, {"stderr", number_or_null(a.std_error)}});
  }
  j["ablation"] = std::move(abl);
  return j;
}

std::string ReproReport::to_markdown() const {
  std::string out = "<!-- config_digest=" + config_digest + " -->\n";
  out += markdown_table(rows);
  out += "\n| Cell | Expected | Observed | Delta | Result |\n|:---|---:|---:|---:|:---:|\n";
  for (const ReproCell& c : cells) {
    out += "| " + learner_display_name(c.learner) + " / " + reward_display_name(c.reward_kind) + " | " +
           fixed(c.expected, 2) + " | " + (c.error.empty() ? fixed(c.observed, 3) : "error") + " | " +
           (c.error.empty() ? fixed(c.delta, 3) : "n/a") + " | " + (c.pass ? "PASS" : "FAIL") + " |\n";
  }
  if (!ablation.empty()) {
    out += "\n| Reward Type | PEVI (beta = " + format_double(ablation.front().beta) + ") |\n|:---|:---:|\n";
    for (const AblationRow& a : ablation) {
      out += "| " + reward_display_name(a.reward_kind) + " | " +
             (std::isnan(a.observed) ? std::string("error") : fixed(a.observed, 2) + " ± " + fixed(a.std_error, 2)) +
             " |\n";
    }
  }
  return out;
}

ReproReport repro_gridworld(const ReproOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config = ExperimentConfig::gridworld_table(options.seed);
  config.layout = options.layout;
  config.learners[1].spec.beta = options.beta;

  ReproReport report;
  report.tolerance = options.tolerance;
  const MatrixResult main = compute_matrix(config);
  report.config_digest = main.config_digest;
  report.rows = main.rows;
  report.pass = true;
  for (const ResultRow& row : main.rows) {
    ReproCell cell;
    cell.learner = row.learner;
    cell.reward_kind = row.reward_kind;
    cell.expected = row.learner == "bc" ? options.expected_bc : options.expected_pevi;
    cell.observed = row.mean_return;
    cell.std_error = row.std_error;
    cell.delta = row.mean_return - cell.expected;
    cell.error = row.error;
    cell.pass = row.ok() && std::abs(cell.delta) <= options.tolerance;
    report.pass = report.pass && cell.pass;
    report.cells.push_back(std::move(cell));
  }

  if (options.ablation) {
    ExperimentConfig ablation = config;
    ablation.learners = {make_entry(LearnerKind::pevi, 0.0)};
    for (const ResultRow& row : compute_matrix(ablation).rows) {
      report.ablation.push_back({row.reward_kind, 0.0, row.mean_return, row.std_error});
    }
  }
  report.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace survival
