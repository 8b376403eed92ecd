#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pushgrasp/commands.hpp"
#include "pushgrasp/scene.hpp"

namespace pg = pushgrasp;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;

  void add(CLI::App* cmd, bool with_out) {
    cmd->add_option("--config", config_file, "key=value config file");
    cmd->add_option("--set", overrides, "override one key (key=value), repeatable");
    cmd->add_option("--seed", seed, "seed (sets run.seed for train, the scene seed otherwise)");
    if (with_out) cmd->add_option("--out", out, "output directory")->required();
  }

  pg::RunConfig resolve(bool seed_is_run_seed) const {
    std::vector<std::string> all = overrides;
    if (seed && seed_is_run_seed) all.push_back("run.seed=" + std::to_string(*seed));
    return pg::RunConfig::resolve(config_file, all);
  }
};

pg::Scenario parse_scenario(const std::string& s) {
  try {
    return pg::scenario_from_string(s);
  } catch (const std::exception&) {
    throw pg::CliError("usage", "unknown scenario '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned push/grasp agent: training, evaluation and run tooling"};
  app.require_subcommand(1);

  Common train_common;
  pg::TrainOptions train;
  std::string init;
  auto* train_cmd = app.add_subcommand("train", "run one curriculum stage (or all of them)");
  train_common.add(train_cmd, true);
  train_cmd->add_option("--stage", train.stage,
                        "grasp_agnostic | grasp_explore | push_training | alternating | all")
      ->required();
  train_cmd->add_flag("--resume", train.resume, "continue from the stage's newest checkpoint");
  train_cmd->add_option("--init", init, "start the stage from this checkpoint");
  train_cmd->add_option("--stop-after-episodes", train.stop_after,
                        "stop (with a checkpoint) after this many episodes");

  Common eval_common;
  pg::EvalOptions eval;
  std::string eval_ckpt;
  std::string eval_scenario = "packed";
  std::optional<double> eval_threshold;
  auto* eval_cmd = app.add_subcommand("eval", "benchmark an agent on generated scenes");
  eval_common.add(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint of the trained agent");
  eval_cmd->add_option("--agent", eval.agent, "trained | random | random-grasp");
  eval_cmd->add_option("--scenario", eval_scenario, "packed | pile | sparse");
  eval_cmd->add_option("--n-objects", eval.n_objects, "object counts (one summary row each)");
  eval_cmd->add_option("--n-scenes", eval.n_scenes, "scenes per object count");
  eval_cmd->add_option("--threshold", eval_threshold, "grasp threshold override");
  eval_cmd->add_option("--grasp-probability", eval.grasp_probability, "random agent grasp rate");

  Common gen_common;
  pg::GenScenesOptions gen;
  std::string gen_scenario = "packed";
  auto* gen_cmd = app.add_subcommand("gen-scenes", "write a seeded scene corpus");
  gen_common.add(gen_cmd, true);
  gen_cmd->add_option("--scenario", gen_scenario, "packed | pile | sparse");
  gen_cmd->add_option("--n-objects", gen.n_objects, "objects per scene");
  gen_cmd->add_option("--count", gen.count, "number of scenes");
  gen_cmd->add_flag("--png", gen.png, "also write color, depth and goal-mask images");

  pg::PlotOptions plot;
  std::string plot_kind;
  std::string plot_run;
  std::string plot_ckpt;
  std::string plot_scene;
  std::string plot_records;
  std::string plot_scenario = "packed";
  std::optional<std::uint64_t> plot_seed;
  auto* plot_cmd = app.add_subcommand("plot", "curves, Q heatmaps or episode strips");
  plot_cmd->add_option("run_dir", plot_run, "run directory (output directory for episode_strip)")
      ->required();
  plot_cmd->add_option("--kind", plot_kind, "curves | heatmap | episode_strip")->required();
  plot_cmd->add_option("--checkpoint", plot_ckpt, "heatmap: checkpoint (default: newest)");
  plot_cmd->add_option("--scene", plot_scene, "heatmap: scene file");
  plot_cmd->add_option("--scenario", plot_scenario, "heatmap: generated scene scenario");
  plot_cmd->add_option("--n-objects", plot.n_objects, "heatmap: generated scene size");
  plot_cmd->add_option("--seed", plot_seed, "heatmap: generated scene seed");
  plot_cmd->add_option("--records", plot_records, "episode_strip: eval records file");
  plot_cmd->add_option("--index", plot.index, "episode_strip: record index");
  plot_cmd->add_option("--set", plot.overrides, "config override, repeatable");

  pg::ReplayOptions replay;
  std::string replay_records;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a recorded episode and diff actions");
  replay_cmd->add_option("records", replay_records, "eval records file")->required();
  replay_cmd->add_option("--index", replay.index, "record index (0-based)");
  replay_cmd->add_option("--set", replay.overrides, "config override, repeatable");

  pg::CompareOptions compare;
  std::vector<std::string> compare_files;
  std::string compare_ref;
  auto* compare_cmd = app.add_subcommand("compare", "summary table with reference rows");
  compare_cmd->add_option("summaries", compare_files, "summary.json files");
  compare_cmd->add_option("--reference", compare_ref, "reference rows file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      train.run_dir = train_common.out;
      train.config = train_common.resolve(true);
      if (!init.empty()) train.init = init;
      return pg::cmd_train(train, std::cout);
    }
    if (eval_cmd->parsed()) {
      eval.out = eval_common.out;
      eval.config = eval_common.resolve(false);
      eval.seed = eval_common.seed.value_or(eval.config.bundle().seed);
      eval.scenario = parse_scenario(eval_scenario);
      if (!eval_ckpt.empty()) eval.checkpoint = eval_ckpt;
      eval.threshold = eval_threshold;
      return pg::cmd_eval(eval, std::cout);
    }
    if (gen_cmd->parsed()) {
      gen.out = gen_common.out;
      gen.config = gen_common.resolve(false);
      gen.seed = gen_common.seed.value_or(gen.config.bundle().seed);
      gen.scenario = parse_scenario(gen_scenario);
      return pg::cmd_gen_scenes(gen, std::cout);
    }
    if (plot_cmd->parsed()) {
      plot.run_dir = plot_run;
      plot.kind = pg::plot_kind_from_string(plot_kind);
      if (!plot_ckpt.empty()) plot.checkpoint = plot_ckpt;
      if (!plot_scene.empty()) plot.scene = plot_scene;
      if (!plot_records.empty()) plot.records = plot_records;
      plot.scenario = parse_scenario(plot_scenario);
      plot.seed = plot_seed.value_or(0);
      return pg::cmd_plot(plot, std::cout, std::cerr);
    }
    if (replay_cmd->parsed()) {
      replay.records = replay_records;
      return pg::cmd_replay(replay, std::cout);
    }
    if (compare_cmd->parsed()) {
      for (const auto& f : compare_files) compare.summaries.emplace_back(f);
      if (!compare_ref.empty()) compare.reference = compare_ref;
      return pg::cmd_compare(compare, std::cout);
    }
  } catch (const pg::CliError& e) {
    std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
    return e.exit_code();
  } catch (const pg::ConfigError& e) {
    std::cerr << "error[config]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
