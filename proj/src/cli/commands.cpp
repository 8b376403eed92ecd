#include "pushgrasp/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "pushgrasp/checkpoint.hpp"
#include "pushgrasp/learning.hpp"
#include "pushgrasp/png_io.hpp"
#include "pushgrasp/scene_io.hpp"

#ifndef PUSHGRASP_SOURCE_DIR
#define PUSHGRASP_SOURCE_DIR "."
#endif

namespace pushgrasp {

namespace {

constexpr std::array<Stage, 4> kStages = {Stage::grasp_agnostic, Stage::grasp_explore,
                                          Stage::push_training, Stage::alternating};

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_real(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw CliError("parse", "bad " + what + " '" + s + "'");
  }
  return v;
}

fs::path committed_log_marker(const RunDirectory& dir) { return dir.logs() / "train.committed"; }

std::uintmax_t committed_log_bytes(const RunDirectory& dir) {
  const fs::path marker = committed_log_marker(dir);
  if (!fs::exists(marker)) return 0;
  return static_cast<std::uintmax_t>(std::stoull(read_text(marker)));
}

std::string meta_value(const CheckpointMeta& meta, const std::string& key) {
  const auto it = meta.extra.find(key);
  return it == meta.extra.end() ? std::string() : it->second;
}

CheckpointMeta load_checked(const fs::path& path, NetworkPair& nets) {
  try {
    return load_weights(path.string(), nets);
  } catch (const CheckpointError& e) {
    throw CliError("checkpoint", path.string() + ": " + e.what());
  }
}

std::string stage_list() {
  std::string s;
  for (Stage st : kStages) s += std::string(s.empty() ? "" : ", ") + to_string(st);
  return s;
}

Stage parse_stage(const std::string& name) {
  try {
    return stage_from_string(name);
  } catch (const std::exception&) {
    throw CliError("usage", "unknown stage '" + name + "' (expected one of " + stage_list() +
                                ", all)");
  }
}

struct StageStart {
  int first_episode = 0;
  long long actions = 0;
  std::optional<double> threshold;
  bool fresh = true;
};

class Trainer {
 public:
  Trainer(const TrainOptions& opts, RunDirectory& dir, std::ostream& out)
      : opts_(opts), dir_(dir), out_(out), cfg_(dir.config().bundle()),
        nets_(cfg_.net, cfg_.learn.adam, cfg_.seed) {}

  // Returns false when the run stopped early.
  bool run(Stage stage, bool part_of_all) {
    if (dir_.completed_checkpoint(stage)) {
      if (part_of_all || opts_.resume) {
        out_ << "stage " << to_string(stage) << " already complete\n";
        loaded_ = false;
        return true;
      }
      throw CliError("stage_done", "stage " + std::string(to_string(stage)) +
                                       " is already complete in " + dir_.root().string());
    }
    const StageStart start = prepare(stage);
    truncate_file(dir_.train_log(), committed_log_bytes(dir_));

    TrainingContext ctx(cfg_.sim, cfg_.net, cfg_.learn, nets_, cfg_.seed);
    ctx.actions = start.actions;
    ctx.run_id = dir_.run_id();
    ctx.grasp_threshold = start.threshold.value_or(cfg_.net.grasp_threshold);
    if (start.fresh && stage == Stage::push_training && cfg_.threshold_calibration == "auto") {
      ctx.grasp_threshold = calibrate(ctx.grasp_threshold);
    }
    JsonlWriter log(dir_.train_log());
    ctx.log = [&log](const nlohmann::json& rec) { log.write(rec); };
    ctx.checkpoint = [&](const StageProgress& p) {
      CheckpointMeta meta;
      meta.stage = to_string(p.stage);
      meta.step = p.actions;
      meta.episode = p.episodes_done;
      meta.config_hash = dir_.config_hash();
      meta.extra["run_id"] = dir_.run_id();
      meta.extra["stage_complete"] = p.stage_end ? "1" : "0";
      meta.extra["grasp_threshold"] = shortest(ctx.grasp_threshold);
      meta.extra["log_bytes"] = std::to_string(log.size());
      save_weights(dir_.checkpoint_path(p.stage, p.episodes_done).string(), nets_, meta);
      write_text_atomic(committed_log_marker(dir_), std::to_string(log.size()) + "\n");
    };
    if (pending_calibration_) {
      log.write(*pending_calibration_);
      pending_calibration_.reset();
    }

    const StagePlan plan = cfg_.learn.plan(stage);
    out_ << "stage " << to_string(stage) << ": episodes " << start.first_episode << ".."
         << plan.episode_budget - 1 << (start.fresh ? "" : " (resumed)") << "\n";
    const StageReport report = run_stage(plan, ctx, start.first_episode, opts_.stop_after);
    int successes = 0;
    for (int s : report.episode_success) successes += s;
    out_ << "stage " << to_string(stage) << ": " << report.episodes << " episodes, goal grasped "
         << successes << "/" << report.episodes << ", grasp attempts " << report.grasp_attempts
         << ", pushes " << report.pushes << (report.stopped_early ? ", stopped early" : "")
         << "\n";
    loaded_ = true;
    last_actions_ = ctx.actions;
    last_threshold_ = ctx.grasp_threshold;
    return !report.stopped_early;
  }

 private:
  StageStart prepare(Stage stage) {
    StageStart start;
    const auto existing = dir_.latest_checkpoint(stage);
    if (existing) {
      if (!opts_.resume) {
        throw CliError("already_started",
                       "stage " + std::string(to_string(stage)) + " already has checkpoint " +
                           existing->string() + "; pass --resume to continue it");
      }
      const CheckpointMeta meta = load_checked(*existing, nets_);
      check_hash(meta, *existing);
      start.fresh = false;
      start.first_episode = static_cast<int>(meta.episode);
      start.actions = meta.step;
      const std::string t = meta_value(meta, "grasp_threshold");
      if (!t.empty()) start.threshold = parse_real(t, "threshold in " + existing->string());
      return start;
    }
    const int index = stage_index(stage);
    if (opts_.init && !loaded_) {
      const CheckpointMeta meta = load_checked(*opts_.init, nets_);
      start.actions = meta.step;
      const std::string t = meta_value(meta, "grasp_threshold");
      if (!t.empty()) start.threshold = parse_real(t, "threshold in " + opts_.init->string());
      return start;
    }
    if (index == 0) return start;
    const Stage previous = kStages[static_cast<std::size_t>(index - 1)];
    if (loaded_) {  // continuing in memory from the previous stage
      start.actions = last_actions_;
      start.threshold = last_threshold_;
      return start;
    }
    const auto prereq = dir_.completed_checkpoint(previous);
    if (!prereq) {
      throw CliError("prerequisite",
                     "stage " + std::string(to_string(stage)) + " needs a completed " +
                         to_string(previous) + " checkpoint in " + dir_.checkpoints().string() +
                         " (or --init <checkpoint>)");
    }
    const CheckpointMeta meta = load_checked(*prereq, nets_);
    check_hash(meta, *prereq);
    start.actions = meta.step;
    const std::string t = meta_value(meta, "grasp_threshold");
    if (!t.empty()) start.threshold = parse_real(t, "threshold in " + prereq->string());
    return start;
  }

  void check_hash(const CheckpointMeta& meta, const fs::path& path) const {
    if (!meta.config_hash.empty() && meta.config_hash != dir_.config_hash()) {
      throw CliError("config_mismatch", path.string() + " was written under config " +
                                            meta.config_hash + ", the run uses " +
                                            dir_.config_hash());
    }
  }

  double calibrate(double fallback) {
    const CalibrationResult c = calibrate_grasp_threshold(
        nets_.grasp, nullptr, cfg_.sim, cfg_.learn.calibration_scenes, derive_seed(cfg_.seed, 0xCA1B),
        cfg_.learn.calibration_precision, fallback);
    out_ << "grasp threshold calibrated to " << shortest(c.threshold) << " (precision "
         << std::setprecision(3) << c.precision << ", " << c.above << "/" << c.samples
         << " grasps above" << (c.fallback ? ", fallback" : "") << ")\n";
    pending_calibration_ = nlohmann::json{{"type", "calibration"},
                                          {"run_id", dir_.run_id()},
                                          {"threshold", c.threshold},
                                          {"precision", c.precision},
                                          {"samples", c.samples},
                                          {"above", c.above},
                                          {"fallback", c.fallback}};
    return c.threshold;
  }

  const TrainOptions& opts_;
  RunDirectory& dir_;
  std::ostream& out_;
  const ConfigBundle& cfg_;
  NetworkPair nets_;
  bool loaded_ = false;
  long long last_actions_ = 0;
  double last_threshold_ = 0.0;
  std::optional<nlohmann::json> pending_calibration_;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

std::string pct(const Stat& s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << 100.0 * s.mean;
  if (s.stderr_mean) o << " +- " << 100.0 * *s.stderr_mean;
  return o.str();
}

std::string plain(const std::optional<Stat>& s) {
  if (!s) return "n/a";
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << s->mean;
  if (s->stderr_mean) o << " +- " << *s->stderr_mean;
  return o.str();
}

void print_header(std::ostream& out) {
  out << std::left << std::setw(30) << "approach" << std::setw(9) << "scenario" << std::setw(5)
      << "n" << std::setw(18) << "C%" << std::setw(18) << "GS%" << "MN\n";
}

void print_row(std::ostream& out, const std::string& approach, const std::string& scenario,
               int n, const std::string& c, const std::string& gs, const std::string& mn) {
  out << std::left << std::setw(30) << approach << std::setw(9) << scenario << std::setw(5) << n
      << std::setw(18) << c << std::setw(18) << gs << mn << "\n";
}

std::string summary_cell(const nlohmann::json& stat, bool percent) {
  if (stat.is_null()) return "n/a";
  const double scale = percent ? 100.0 : 1.0;
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << scale * stat.at("mean").get<double>();
  if (!stat.at("stderr").is_null()) o << " +- " << scale * stat.at("stderr").get<double>();
  return o.str();
}

std::unique_ptr<Agent> make_agent(const std::string& kind, const NetworkPair* nets,
                                  double threshold, double grasp_probability,
                                  std::uint64_t seed) {
  if (kind == "trained") return std::make_unique<GreedyAgent>(*nets, threshold);
  if (kind == "random") return std::make_unique<RandomAgent>(grasp_probability, seed);
  if (kind == "random-grasp") return std::make_unique<RandomAgent>(1.0, seed);
  throw CliError("usage", "unknown agent '" + kind + "' (expected trained, random, random-grasp)");
}

Scene scene_for_plot(const PlotOptions& opts, const SimConfig& sim) {
  if (opts.scene) return load_scene(*opts.scene);
  return spawn_scene(opts.scenario, opts.n_objects, benchmark_scene_seed(opts.seed, 0), sim);
}

std::optional<fs::path> newest_checkpoint(const RunDirectory& dir) {
  for (auto it = kStages.rbegin(); it != kStages.rend(); ++it) {
    if (auto p = dir.latest_checkpoint(*it)) return p;
  }
  return std::nullopt;
}

}  // namespace

int cmd_train(const TrainOptions& opts, std::ostream& out) {
  const bool all = opts.stage == "all";
  const Stage first = all ? Stage::grasp_agnostic : parse_stage(opts.stage);
  if (opts.init && !fs::exists(*opts.init)) {
    throw CliError("io", "init checkpoint " + opts.init->string() + " does not exist");
  }
  // Refuse before creating anything, so a fresh directory stays reusable.
  if (!all && first != Stage::grasp_agnostic && !opts.init &&
      !fs::exists(opts.run_dir / "config.txt")) {
    throw CliError("prerequisite", "stage " + std::string(to_string(first)) + " needs a completed " +
                                       to_string(static_cast<Stage>(stage_index(first) - 1)) +
                                       " checkpoint in " + (opts.run_dir / "checkpoints").string() +
                                       " (or --init <checkpoint>)");
  }
  RunDirectory dir = RunDirectory::open(opts.run_dir, opts.config);
  RunLock lock(dir.root());
  Trainer trainer(opts, dir, out);
  if (!all) {
    trainer.run(first, false);
    return 0;
  }
  for (Stage s : kStages) {
    if (!trainer.run(s, true)) break;
  }
  return 0;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out) {
  if (opts.n_scenes < 1) throw CliError("usage", "--n-scenes must be at least 1");
  const ConfigBundle& cfg = opts.config.bundle();
  NetworkPair nets(cfg.net, cfg.learn.adam, cfg.seed);
  double threshold = cfg.net.grasp_threshold;
  if (opts.agent == "trained") {
    if (!opts.checkpoint) throw CliError("usage", "the trained agent needs --checkpoint");
    const CheckpointMeta meta = load_checked(*opts.checkpoint, nets);
    const std::string t = meta_value(meta, "grasp_threshold");
    if (!t.empty()) threshold = parse_real(t, "threshold in checkpoint metadata");
  }
  if (opts.threshold) threshold = *opts.threshold;
  fs::create_directories(opts.out);
  write_text_atomic(opts.out / "config.txt", opts.config.serialize());
  nlohmann::json setup = {{"agent", opts.agent},
                          {"threshold", threshold},
                          {"grasp_probability", opts.grasp_probability},
                          {"seed", opts.seed},
                          {"config_hash", opts.config.hash()}};
  setup["checkpoint"] = opts.checkpoint ? nlohmann::json(fs::absolute(*opts.checkpoint).string())
                                        : nlohmann::json(nullptr);
  write_json(opts.out / "eval.json", setup);

  const EvalEnv env = opts.config.eval_env();
  nlohmann::json rows = nlohmann::json::array();
  print_header(out);
  for (int n : opts.n_objects) {
    auto agent = make_agent(opts.agent, &nets, threshold, opts.grasp_probability, opts.seed);
    const BenchmarkResult result =
        run_benchmark(*agent, opts.scenario, n, opts.n_scenes, opts.seed, env);
    const fs::path records = opts.out / ("records_" + std::string(to_string(opts.scenario)) +
                                         "_" + std::to_string(n) + ".jsonl");
    {
      std::string text;
      for (const auto& r : result.records) text += to_json(r).dump() + "\n";
      write_text_atomic(records, text);
    }
    rows.push_back(summary_json(result.report, opts.agent, opts.scenario, n));
    print_row(out, opts.agent, to_string(opts.scenario), n, pct(result.report.completion),
              pct(result.report.grasp_success), plain(result.report.motion_number));
  }
  write_json(opts.out / "summary.json", rows);
  return 0;
}

int cmd_gen_scenes(const GenScenesOptions& opts, std::ostream& out) {
  if (opts.count < 0) throw CliError("usage", "--count must be non-negative");
  fs::create_directories(opts.out);
  const ConfigBundle& cfg = opts.config.bundle();
  int certified = 0;
  for (int i = 0; i < opts.count; ++i) {
    const Scene scene =
        spawn_scene(opts.scenario, opts.n_objects, benchmark_scene_seed(opts.seed, i), cfg.sim);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    save_scene(scene, opts.out / (std::string(name) + ".json"));
    if (scene.ungraspable_certificate) ++certified;
    if (opts.png) {
      const Observation obs = render(scene, cfg.net.resolution, cfg.sim.max_object_height);
      write_png((opts.out / (std::string(name) + "_color.png")).string(), to_rgb(obs.color));
      write_depth_png((opts.out / (std::string(name) + "_depth.png")).string(), obs.depth);
      write_mask_png((opts.out / (std::string(name) + "_goal.png")).string(), obs.goal_mask);
    }
  }
  out << "wrote " << opts.count << " " << to_string(opts.scenario) << " scenes to "
      << opts.out.string();
  if (opts.scenario == Scenario::packed) out << " (" << certified << " certified)";
  out << "\n";
  return 0;
}

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "curves") return PlotKind::curves;
  if (s == "heatmap") return PlotKind::heatmap;
  if (s == "episode_strip" || s == "episode-strip") return PlotKind::episode_strip;
  throw CliError("usage", "unknown plot kind '" + s + "' (expected curves, heatmap, episode_strip)");
}

CurveData curves_from_log(const std::vector<nlohmann::json>& records) {
  CurveData data;
  std::set<std::string> missing;
  std::vector<std::string> order;
  std::map<std::string, std::map<int, double>> by_stage;
  for (const auto& r : records) {
    if (!r.is_object() || r.value("type", "") != "episode") continue;
    bool ok = true;
    for (const char* field : {"stage", "episode", "goal_grasped"}) {
      if (!r.contains(field) || r.at(field).is_null()) {
        missing.insert(field);
        ok = false;
      }
    }
    if (!ok) continue;
    const std::string stage = r.at("stage").get<std::string>();
    if (!by_stage.count(stage)) order.push_back(stage);
    by_stage[stage][r.at("episode").get<int>()] = r.at("goal_grasped").get<bool>() ? 1.0 : 0.0;
  }
  for (const auto& stage : order) {
    StageCurve c;
    c.stage = stage;
    for (const auto& [ep, s] : by_stage[stage]) {
      c.episode.push_back(ep);
      c.success.push_back(s);
    }
    c.smoothed = exponential_smooth(c.success, 0.9);
    c.rolling50 = rolling_mean(c.success, 50);
    c.rolling7 = rolling_mean(c.success, 7);
    data.stages.push_back(std::move(c));
  }
  data.omissions.assign(missing.begin(), missing.end());
  return data;
}

HeatmapResult heatmap_for(const QNet& net, NetId id, const Scene& scene, int resolution,
                          double max_object_height) {
  const Observation obs = render(scene, resolution, max_object_height);
  const RotatedStack stack = build_rotated_stack(obs);
  const QMapStack q = forward(net, id, stack);
  const MaskKind kind = id == NetId::grasp ? MaskKind::goal : MaskKind::objects;
  ArgMax best = masked_argmax(q, stack, kind);
  HeatmapResult h;
  h.k = best.found() ? best.k : 0;
  const RotatedView& view = stack.views[static_cast<std::size_t>(h.k)];
  h.mask = kind == MaskKind::goal ? view.goal_mask : view.all_mask;
  h.base = upscale(to_rgb(view.color), h.scale);
  h.overlay = heatmap_overlay(view.color, q.values[static_cast<std::size_t>(h.k)], h.mask, h.scale);
  return h;
}

EvalSetup load_eval_setup(const fs::path& eval_dir, const std::vector<std::string>& overrides) {
  const fs::path setup_path = eval_dir / "eval.json";
  if (!fs::exists(setup_path)) {
    throw CliError("missing_run", eval_dir.string() + " has no eval.json");
  }
  EvalSetup s;
  s.config = RunConfig::parse(read_text(eval_dir / "config.txt"));
  for (const auto& o : overrides) s.config.apply_override(o);
  s.config.validate();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(setup_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw CliError("parse", setup_path.string() + ": " + e.what());
  }
  s.agent = j.at("agent").get<std::string>();
  s.threshold = j.at("threshold").get<double>();
  s.grasp_probability = j.at("grasp_probability").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("checkpoint").is_null()) s.checkpoint = j.at("checkpoint").get<std::string>();
  return s;
}

int cmd_plot(const PlotOptions& opts, std::ostream& out, std::ostream& err) {
  switch (opts.kind) {
    case PlotKind::curves: {
      const RunDirectory dir = RunDirectory::existing(opts.run_dir);
      const CurveData data = curves_from_log(read_jsonl(dir.train_log()));
      if (!data.omissions.empty()) {
        std::string list;
        for (const auto& f : data.omissions) list += (list.empty() ? "" : ", ") + f;
        err << "warning: some episode records lack fields (" << list
            << "); those records are left out of the plot\n";
      }
      if (data.stages.empty()) err << "warning: no episode records in " << dir.train_log() << "\n";
      for (const auto& c : data.stages) {
        const std::vector<Series> series = {
            {c.episode, c.success, {190, 190, 190}, true},
            {c.episode, c.smoothed, {40, 90, 200}, false},
            {c.episode, c.rolling50, {220, 60, 40}, false},
        };
        const fs::path png = dir.plots() / ("curves_" + c.stage + ".png");
        write_png(png.string(), line_chart(series, ChartSpec{}));
        std::string csv = "episode,goal_grasped,exp_0.9,rolling_50,rolling_7\n";
        for (std::size_t i = 0; i < c.episode.size(); ++i) {
          csv += shortest(c.episode[i]) + "," + shortest(c.success[i]) + "," +
                 shortest(c.smoothed[i]) + "," + shortest(c.rolling50[i]) + "," +
                 shortest(c.rolling7[i]) + "\n";
        }
        write_text_atomic(dir.plots() / ("curves_" + c.stage + ".csv"), csv);
        out << "wrote " << png.string() << "\n";
      }
      return 0;
    }
    case PlotKind::heatmap: {
      const RunDirectory dir = RunDirectory::existing(opts.run_dir);
      RunConfig config = dir.config();
      for (const auto& o : opts.overrides) config.apply_override(o);
      const ConfigBundle& cfg = config.bundle();
      const auto ckpt = opts.checkpoint ? opts.checkpoint : newest_checkpoint(dir);
      if (!ckpt) throw CliError("missing_checkpoint", "no checkpoint in " + dir.root().string());
      NetworkPair nets(cfg.net, cfg.learn.adam, cfg.seed);
      load_checked(*ckpt, nets);
      const Scene scene = scene_for_plot(opts, cfg.sim);
      for (NetId id : {NetId::grasp, NetId::push}) {
        const HeatmapResult h =
            heatmap_for(nets.net(id), id, scene, cfg.net.resolution, cfg.sim.max_object_height);
        const fs::path png = dir.plots() / ("heatmap_" + std::string(to_string(id)) + ".png");
        write_png(png.string(), strip({h.base, h.overlay}, 1));
        out << "wrote " << png.string() << " (rotation " << h.k << ")\n";
      }
      return 0;
    }
    case PlotKind::episode_strip: {
      if (!opts.records) throw CliError("usage", "episode_strip needs --records");
      const std::vector<nlohmann::json> records = read_jsonl(*opts.records);
      if (opts.index < 0 || opts.index >= static_cast<int>(records.size())) {
        throw CliError("usage", "record index " + std::to_string(opts.index) + " out of range");
      }
      const EpisodeRecord rec = record_from_json(records[static_cast<std::size_t>(opts.index)]);
      const EvalSetup setup = load_eval_setup(opts.records->parent_path(), opts.overrides);
      const ConfigBundle& cfg = setup.config.bundle();
      NetworkPair nets(cfg.net, cfg.learn.adam, cfg.seed);
      if (setup.checkpoint) load_checked(*setup.checkpoint, nets);
      auto agent =
          make_agent(setup.agent, &nets, setup.threshold, setup.grasp_probability, setup.seed);
      const Scene scene = spawn_scene(rec.scenario, rec.n_objects, rec.seed, cfg.sim);
      std::vector<RgbImage> frames;
      run_episode(scene, *agent, setup.config.eval_env(), [&](const Scene& s) {
        frames.push_back(to_rgb(render(s, cfg.net.resolution, cfg.sim.max_object_height).color));
      });
      fs::create_directories(opts.run_dir);
      const fs::path png = opts.run_dir / ("episode_" + std::to_string(opts.index) + ".png");
      write_png(png.string(), strip(frames, 4));
      out << "wrote " << png.string() << " (" << frames.size() << " frames)\n";
      return 0;
    }
  }
  return 0;
}

int cmd_replay(const ReplayOptions& opts, std::ostream& out) {
  const std::vector<nlohmann::json> records = read_jsonl(opts.records);
  if (opts.index < 0 || opts.index >= static_cast<int>(records.size())) {
    throw CliError("usage", "record index " + std::to_string(opts.index) + " out of range (" +
                                std::to_string(records.size()) + " records)");
  }
  EpisodeRecord rec;
  try {
    rec = record_from_json(records[static_cast<std::size_t>(opts.index)]);
  } catch (const std::exception& e) {
    throw CliError("parse", opts.records.string() + ":" + std::to_string(opts.index + 1) + ": " +
                                e.what());
  }
  const EvalSetup setup = load_eval_setup(opts.records.parent_path(), opts.overrides);
  const ConfigBundle& cfg = setup.config.bundle();
  NetworkPair nets(cfg.net, cfg.learn.adam, cfg.seed);
  if (setup.checkpoint) load_checked(*setup.checkpoint, nets);
  auto agent = make_agent(setup.agent, &nets, setup.threshold, setup.grasp_probability, setup.seed);
  const Scene scene = spawn_scene(rec.scenario, rec.n_objects, rec.seed, cfg.sim);
  const EpisodeRecord again = run_episode(scene, *agent, setup.config.eval_env());

  const std::size_t n = std::max(rec.actions.size(), again.actions.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool have_a = i < rec.actions.size();
    const bool have_b = i < again.actions.size();
    auto describe = [](const ActionSpec& a) {
      std::ostringstream o;
      o << to_string(a.primitive) << " k=" << a.k << " u=" << a.u << " v=" << a.v
        << " q=" << shortest(a.q_value);
      return o.str();
    };
    const bool same = have_a && have_b && rec.actions[i].primitive == again.actions[i].primitive &&
                      rec.actions[i].k == again.actions[i].k &&
                      rec.actions[i].u == again.actions[i].u &&
                      rec.actions[i].v == again.actions[i].v &&
                      rec.actions[i].q_value == again.actions[i].q_value;
    if (!same) {
      out << "divergence at step " << i << ": recorded "
          << (have_a ? describe(rec.actions[i]) : std::string("(end)")) << ", replayed "
          << (have_b ? describe(again.actions[i]) : std::string("(end)")) << "\n";
      return 3;
    }
  }
  if (again.termination != rec.termination || again.completed != rec.completed) {
    out << "divergence at step " << n << ": recorded termination " << to_string(rec.termination)
        << ", replayed " << to_string(again.termination) << "\n";
    return 3;
  }
  out << "replay ok: " << n << " actions identical, termination " << to_string(rec.termination)
      << "\n";
  return 0;
}

int cmd_compare(const CompareOptions& opts, std::ostream& out) {
  print_header(out);
  for (const auto& path : opts.summaries) {
    nlohmann::json rows;
    try {
      rows = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw CliError("parse", path.string() + ": " + e.what());
    }
    if (!rows.is_array()) rows = nlohmann::json::array({rows});
    for (const auto& r : rows) {
      print_row(out, r.at("approach").get<std::string>(), r.at("scenario").get<std::string>(),
                r.at("n_objects").get<int>(), summary_cell(r.at("C"), true),
                summary_cell(r.at("GS"), true), summary_cell(r.at("MN"), false));
    }
  }
  const fs::path ref =
      opts.reference ? *opts.reference : fs::path(PUSHGRASP_SOURCE_DIR) / "docs/reference_rows.json";
  if (!fs::exists(ref)) {
    if (opts.reference) throw CliError("io", "reference file " + ref.string() + " not found");
    return 0;
  }
  const nlohmann::json doc = nlohmann::json::parse(read_text(ref));
  for (const auto& r : doc.at("rows")) {
    auto cell = [&](const char* key) {
      std::ostringstream o;
      o << std::fixed << std::setprecision(2) << r.at(key).get<double>() << " +- "
        << r.at(std::string(key) + "_err").get<double>();
      return o.str();
    };
    print_row(out, r.at("approach").get<std::string>(), r.at("scenario").get<std::string>(),
              r.at("n_objects").get<int>(), cell("C"), cell("GS"), cell("MN"));
  }
  return 0;
}

}  // namespace pushgrasp
