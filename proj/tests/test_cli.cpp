#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "survival/text_io.hpp"

using survival::read_file;
using survival::write_file;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI inside `dir` with stdout captured to a file.
Run cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const std::string command =
      "cd '" + dir.string() + "' && '" SURVIVAL_CLI "' " + args + " > '" + out.string() + "' 2> /dev/null";
  const int status = std::system(command.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fs::exists(out) ? read_file(out.string()) : "";
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("survival_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("collect, corrupt, train and evaluate on the grid") {
  const fs::path dir = scratch("pipeline");
  REQUIRE(cli(dir, "mdp build-gridworld --out grid.mdp").code == 0);
  CHECK(fs::file_size(dir / "grid.mdp") > 0);
  REQUIRE(cli(dir, "data collect --behavior optimal:0.2 lava:0.8 --episodes 500 --seed 0 --out d.csv").code == 0);
  REQUIRE(cli(dir, "data corrupt --data d.csv --kind negative --out n.csv").code == 0);
  REQUIRE(cli(dir, "train --data n.csv --learner pevi --kind negative --out pevi.txt").code == 0);
  REQUIRE(cli(dir, "train --data n.csv --learner bc --out bc.txt").code == 0);

  const Run pevi = cli(dir, "eval --policy pevi.txt --data d.csv");
  REQUIRE(pevi.code == 0);
  const auto p = nlohmann::json::parse(pevi.out);
  CHECK(p["mean_return"].get<double>() == doctest::Approx(0.92));
  CHECK(p["escape_probability"].get<double>() == 0.0);

  const Run bc = cli(dir, "eval --policy bc.txt --protocol mc --episodes 1000 --data d.csv");
  REQUIRE(bc.code == 0);
  const auto b = nlohmann::json::parse(bc.out);
  CHECK(b["mean_return"].get<double>() == doctest::Approx(-1.19));
  CHECK(b["stderr"].get<double>() == 0.0);
  CHECK(b["escape_probability"].get<double>() == 1.0);

  const Run survival = cli(dir, "cmdp survival --data d.csv --policy pevi.txt");
  REQUIRE(survival.code == 0);
  CHECK(nlohmann::json::parse(survival.out)["support_violation"].get<double>() == 0.0);

  const Run bias = cli(dir, "bias report --data d.csv --learner pevi");
  REQUIRE(bias.code == 0);
  CHECK(nlohmann::json::parse(bias.out)["estimate"] == "inf");

  // Same seeds, same bytes.
  REQUIRE(cli(dir, "data collect --behavior optimal:0.2 lava:0.8 --episodes 500 --seed 0 --out d2.csv").code == 0);
  CHECK(read_file((dir / "d.csv").string()) == read_file((dir / "d2.csv").string()));
  REQUIRE(cli(dir, "train --data n.csv --learner pevi --kind negative --out pevi2.txt").code == 0);
  CHECK(read_file((dir / "pevi.txt").string()) == read_file((dir / "pevi2.txt").string()));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(cli(dir, "repro gridworld --out r").code == 0);
  CHECK(fs::exists(dir / "r" / "repro.json"));
  CHECK(cli(dir, "repro gridworld --perturbed --no-ablation").code == 3);

  write_file((dir / "bad.ini").string(), "[learners]\nlist =\n");
  CHECK(cli(dir, "run matrix --config bad.ini").code == 2);

  REQUIRE(cli(dir, "data collect --behavior lava:1 --episodes 10 --out lava.csv").code == 0);
  CHECK(cli(dir, "cmdp solve --data lava.csv").code == 4);
  CHECK(cli(dir, "cmdp solve --data lava.csv --budget -1").code == 2);
  CHECK(cli(dir, "train --data missing.csv").code != 0);
}

TEST_CASE("run matrix writes the grid table") {
  const fs::path dir = scratch("matrix");
  const Run run = cli(dir, "run matrix --config '" SURVIVAL_SOURCE_DIR "/configs/gridworld.ini' --out m");
  REQUIRE(run.code == 0);
  const std::string md = read_file((dir / "m" / "results.md").string());
  CHECK(md.find("| Original Reward | -1.19 ± 0.00 | 0.92 ± 0.00 |") != std::string::npos);
  CHECK(md.find("| Negative Reward | -1.19 ± 0.00 | 0.92 ± 0.00 |") != std::string::npos);

  const Run json = cli(dir, "run matrix --json-config '" SURVIVAL_SOURCE_DIR "/configs/gridworld.json' --out j");
  REQUIRE(json.code == 0);
  CHECK(read_file((dir / "m" / "results.csv").string()) == read_file((dir / "j" / "results.csv").string()));
}
