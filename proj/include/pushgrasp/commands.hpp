#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pushgrasp/evaluation.hpp"
#include "pushgrasp/plots.hpp"
#include "pushgrasp/run_config.hpp"
#include "pushgrasp/run_store.hpp"

namespace pushgrasp {

// Subcommand implementations behind the CLI. Each returns the process exit
// code on success paths and throws CliError on refusals.

struct TrainOptions {
  fs::path run_dir;
  std::string stage;  // a stage name or "all"
  bool resume = false;
  std::optional<fs::path> init;  // checkpoint to start the stage from
  int stop_after = 0;            // stop after this many episodes (0: run to the end)
  RunConfig config;
};

int cmd_train(const TrainOptions& opts, std::ostream& out);

struct EvalOptions {
  std::optional<fs::path> checkpoint;  // required for the trained agent
  std::string agent = "trained";       // trained | random | random-grasp
  Scenario scenario = Scenario::packed;
  std::vector<int> n_objects = {5};
  int n_scenes = 100;
  std::uint64_t seed = 0;
  std::optional<double> threshold;  // overrides the checkpoint's threshold
  double grasp_probability = 0.5;   // random agent
  fs::path out;
  RunConfig config;
};

// Writes records_<scenario>_<n>.jsonl, summary.json, eval.json and
// config.txt into `out` and prints one table row per object count.
int cmd_eval(const EvalOptions& opts, std::ostream& out);

struct GenScenesOptions {
  Scenario scenario = Scenario::packed;
  int n_objects = 5;
  int count = 100;
  std::uint64_t seed = 0;
  bool png = false;
  fs::path out;
  RunConfig config;
};

int cmd_gen_scenes(const GenScenesOptions& opts, std::ostream& out);

enum class PlotKind { curves, heatmap, episode_strip };
PlotKind plot_kind_from_string(const std::string& s);

struct PlotOptions {
  fs::path run_dir;
  PlotKind kind = PlotKind::curves;
  // heatmap: checkpoint (default: newest in run_dir) and scene.
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> scene;
  Scenario scenario = Scenario::packed;
  int n_objects = 5;
  std::uint64_t seed = 0;
  // episode_strip: eval records file and record index.
  std::optional<fs::path> records;
  int index = 0;
  std::vector<std::string> overrides;
};

int cmd_plot(const PlotOptions& opts, std::ostream& out, std::ostream& err);

struct ReplayOptions {
  fs::path records;
  int index = 0;
  std::vector<std::string> overrides;  // applied on top of the eval config
};

// 0 when the recorded actions reproduce, 3 on divergence.
int cmd_replay(const ReplayOptions& opts, std::ostream& out);

struct CompareOptions {
  std::vector<fs::path> summaries;
  std::optional<fs::path> reference;
};

int cmd_compare(const CompareOptions& opts, std::ostream& out);

// Per-episode goal-grasp outcome curves from a training log.
struct StageCurve {
  std::string stage;
  std::vector<double> episode;
  std::vector<double> success;
  std::vector<double> smoothed;  // exponential, factor 0.9
  std::vector<double> rolling50;
  std::vector<double> rolling7;
};

struct CurveData {
  std::vector<StageCurve> stages;
  std::vector<std::string> omissions;  // fields missing from some records
};

CurveData curves_from_log(const std::vector<nlohmann::json>& records);

// Heatmap of one network's masked Q values on the best rotation.
struct HeatmapResult {
  RgbImage base;     // color heightmap of the rotated view, upscaled
  RgbImage overlay;  // same with the Q overlay
  Mask mask;
  int k = 0;
  int scale = 4;
};

HeatmapResult heatmap_for(const QNet& net, NetId id, const Scene& scene, int resolution,
                          double max_object_height);

// Agent described by an eval directory's eval.json.
struct EvalSetup {
  RunConfig config;
  std::string agent;
  std::optional<fs::path> checkpoint;
  double threshold = 0.0;
  double grasp_probability = 0.5;
  std::uint64_t seed = 0;
};

EvalSetup load_eval_setup(const fs::path& eval_dir, const std::vector<std::string>& overrides);

}  // namespace pushgrasp
