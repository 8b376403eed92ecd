#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "doctest.h"
#include "pushgrasp/commands.hpp"
#include "pushgrasp/plots.hpp"
#include "pushgrasp/run_store.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pushgrasp_rs_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json episode(const std::string& stage, int ep, bool ok) {
  return {{"type", "episode"}, {"stage", stage}, {"episode", ep}, {"goal_grasped", ok}};
}

}  // namespace

TEST_CASE("jsonl round trip and parse errors name the line") {
  const fs::path dir = fresh_dir("jsonl");
  const fs::path log = dir / "a.jsonl";
  {
    JsonlWriter w(log);
    w.write({{"a", 1}});
    w.write({{"b", "x"}});
    CHECK(w.size() == fs::file_size(log));
  }
  auto records = read_jsonl(log);
  REQUIRE(records.size() == 2);
  CHECK(records[1]["b"] == "x");
  const auto good_size = fs::file_size(log);
  {
    std::ofstream out(log, std::ios::app);
    out << "{\"c\": tru";
  }
  try {
    read_jsonl(log);
    FAIL("expected a parse error");
  } catch (const CliError& e) {
    CHECK(e.category() == "parse");
    CHECK(std::string(e.what()).find("a.jsonl:3") != std::string::npos);
  }
  truncate_file(log, good_size);
  CHECK(read_jsonl(log).size() == 2);
}

TEST_CASE("run lock refuses a live owner and takes over a stale one") {
  const fs::path dir = fresh_dir("lock");
  {
    // The parent process is alive and is not us.
    std::ofstream(dir / "lock") << ::getppid();
    CHECK_THROWS_AS(RunLock{dir}, CliError);
  }
  {
    std::ofstream(dir / "lock", std::ios::trunc) << 999999999;
    RunLock lock(dir);
    CHECK(fs::exists(dir / "lock"));
  }
  CHECK_FALSE(fs::exists(dir / "lock"));
}

TEST_CASE("run directory refuses a different config") {
  const fs::path dir = fresh_dir("rundir");
  RunConfig cfg;
  const RunDirectory a = RunDirectory::open(dir, cfg);
  CHECK(fs::exists(a.checkpoints()));
  CHECK(RunDirectory::open(dir, cfg).run_id() == a.run_id());
  RunConfig other;
  other.set("learn.discount", "0.7");
  try {
    RunDirectory::open(dir, other);
    FAIL("expected config_mismatch");
  } catch (const CliError& e) {
    CHECK(e.category() == "config_mismatch");
    CHECK(std::string(e.what()).find("learn.discount") != std::string::npos);
  }
  CHECK(a.checkpoint_path(Stage::push_training, 7).filename() == "push_training_ep00007.ckpt");
  CHECK_FALSE(a.latest_checkpoint(Stage::push_training).has_value());
  CHECK_THROWS_AS(RunDirectory::existing(fresh_dir("empty")), CliError);
}

TEST_CASE("curves group episodes by stage and report omissions") {
  std::vector<nlohmann::json> log = {episode("grasp_agnostic", 1, true),
                                     episode("grasp_agnostic", 0, false),
                                     {{"type", "action"}},
                                     {{"type", "episode"}, {"stage", "grasp_explore"}},
                                     episode("grasp_explore", 0, true)};
  const CurveData c = curves_from_log(log);
  REQUIRE(c.stages.size() == 2);
  CHECK(c.stages[0].stage == "grasp_agnostic");
  CHECK(c.stages[0].episode == std::vector<double>{0, 1});
  CHECK(c.stages[0].success == std::vector<double>{0, 1});
  CHECK(c.stages[0].smoothed[1] == doctest::Approx(0.1));
  CHECK(c.stages[1].success.size() == 1);
  CHECK(c.omissions == std::vector<std::string>{"episode", "goal_grasped"});
}

TEST_CASE("heatmap overlay only recolors masked pixels") {
  std::mt19937_64 rng(3);
  const Scene scene = pgtest::any_scene(rng);
  const Observation obs = render(scene, 32, 0.08);
  ImageF q(32, 32);
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) q(v, u) = static_cast<float>(u + v);
  }
  const RgbImage base = to_rgb(obs.color);
  const RgbImage over = heatmap_overlay(obs.color, q, obs.goal_mask, 1);
  int changed = 0;
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      const bool same = std::equal(base.at(u, v), base.at(u, v) + 3, over.at(u, v));
      if (obs.goal_mask(v, u) == 0) CHECK(same);
      changed += same ? 0 : 1;
    }
  }
  CHECK(changed > 0);
  const RgbImage big = heatmap_overlay(obs.color, q, obs.goal_mask, 4);
  CHECK(big.width == 128);
  CHECK(big.height == 128);
}
