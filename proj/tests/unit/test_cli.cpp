#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "neuralmodes/checkpoint.hpp"
#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/oracle.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "nmodes_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(NMODES_CLI_PATH) + " " + args + " > " + (kDir / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream in(kDir / "last.log");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string cfg() { return "--config " + (kDir / "tiny.json").string() + " --output-dir " + kDir.string(); }
std::string at(const std::string& f) { return (kDir / f).string(); }

}  // namespace

TEST_CASE("pipeline end to end on a tiny sheet") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  std::ofstream(kDir / "tiny.json") << R"({
    "name": "tiny",
    "mesh": {"type": "sheet", "nx": 3, "ny": 3},
    "modes": 2,
    "train": {"epochs": 5, "hidden": [8], "grid_resolution": 3, "eval_every": 2},
    "datasets": {"train_resolution": 3, "validation_resolution": 2, "test_resolution": 3},
    "dynamics": {"steps": 4}
  })";

  REQUIRE(run("modes " + cfg()) == 0);
  CHECK(last_log().find("mode 1 eigenvalue") != std::string::npos);
  const std::string first = last_log();
  REQUIRE(run("modes " + cfg()) == 0);
  CHECK(last_log() == first);
  CHECK(run("modes " + cfg() + " --modes 100") == 1);

  REQUIRE(run("oracle " + cfg() + " --checkpoint " + at("tiny.linear.json")) == 0);
  CHECK(fs::exists(kDir / "datasets.manifest.json"));
  CHECK(nmodes::load_dataset(at("dataset_test.json")).size() == 9);
  CHECK(run("oracle " + cfg() + " --spec ''") == 1);

  const std::string data = " --train-data " + at("dataset_train.json") + " --validation " +
                           at("dataset_validation.json") + " --test " + at("dataset_test.json");
  REQUIRE(run("train " + cfg() + " --checkpoint " + at("tiny.linear.json") + " --mode self --quiet" + data) == 0);
  CHECK(fs::exists(kDir / "tiny.self_supervised.best_l2.json"));
  CHECK(fs::exists(kDir / "tiny.self_supervised.best_energy.json"));
  REQUIRE(run("train " + cfg() + " --checkpoint " + at("tiny.self_supervised.json") +
              " --mode self --resume --quiet --epochs 3 --out " + at("resumed.json")) == 0);
  CHECK(nmodes::load_checkpoint(at("resumed.json")).history.epochs.size() == 8);
  CHECK(run("train " + cfg() + " --checkpoint " + at("tiny.linear.json") + " --mode l2") == 1);
  REQUIRE(run("train " + cfg() + " --checkpoint " + at("tiny.linear.json") + " --mode l2 --quiet" + data) == 0);
  CHECK(run("train " + cfg() + " --mode sideways") == 1);

  REQUIRE(run("eval --checkpoint " + at("tiny.self_supervised.json") + " --dataset " + at("dataset_test.json") +
              " --subintervals --structure") == 0);
  const auto rep = nlohmann::json::parse(std::ifstream(kDir / "tiny.self_supervised.metrics.json"));
  CHECK(rep.at("splits").size() == 1);
  CHECK(rep.at("subintervals").size() == 5);
  REQUIRE(run("eval --oracle --name sanity --checkpoint " + at("tiny.linear.json") + " --dataset " +
              at("dataset_test.json")) == 0);
  const auto sanity = nlohmann::json::parse(std::ifstream(kDir / "sanity.json"));
  CHECK(sanity.at("splits")[0].at("l2") == 0.0);

  std::ofstream(kDir / "other.json") << R"({"name": "other", "mesh": {"nx": 3, "ny": 3}, "modes": 2,
    "material": {"young_modulus": 2e9}, "train": {"hidden": [8]}})";
  REQUIRE(run("modes --config " + at("other.json") + " --output-dir " + kDir.string()) == 0);
  CHECK(run("eval --checkpoint " + at("other.linear.json") + " --dataset " + at("dataset_test.json")) == 1);

  REQUIRE(run("simulate " + cfg() + " --checkpoint " + at("tiny.self_supervised.json") + " --z0 0.1 0") == 0);
  CHECK(nmodes::read_frames(at("tiny.dynamics.frames")).positions.size() == 5);
  REQUIRE(run("simulate " + cfg() + " --checkpoint " + at("tiny.self_supervised.json") + " --linear-baseline") == 0);
  CHECK(fs::exists(kDir / "tiny.linear_dynamics.frames"));

  std::ofstream(kDir / "keys.json") << R"([{"t": 0, "z": [0, 0]}, {"t": 1, "z": [0.2, -0.1]}])";
  REQUIRE(run("keyframe --output-dir " + kDir.string() + " --checkpoint " + at("tiny.self_supervised.json") +
              " --keys " + at("keys.json") + " --fps 10") == 0);
  CHECK(nmodes::read_frames(at("keys.keyframes.frames")).positions.size() == 11);
  std::ofstream(kDir / "bad_keys.json") << R"([{"t": 1, "z": [0, 0]}, {"t": 0, "z": [0.2, -0.1]}])";
  CHECK(run("keyframe --checkpoint " + at("tiny.self_supervised.json") + " --keys " + at("bad_keys.json")) == 1);

  CHECK(run("") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("serve --checkpoint " + at("missing.json")) == 1);
  fs::remove_all(kDir);
}

TEST_CASE("output directory comes from the environment") {
  fs::remove_all(kDir);
  fs::create_directories(kDir / "env");
  const std::string cmd = "NMODES_OUTPUT_DIR=" + (kDir / "env").string() + " " + NMODES_CLI_PATH +
                          " modes --modes 2 > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(kDir / "env" / "sheet.linear.json"));
  fs::remove_all(kDir);
}
