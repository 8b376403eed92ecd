#include "pushgrasp/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pushgrasp {

// ---- rewards and targets -------------------------------------------------

const char* to_string(PushRewardSemantics s) {
  return s == PushRewardSemantics::corrected ? "corrected" : "literal";
}

PushRewardSemantics push_semantics_from_string(const std::string& s) {
  if (s == "corrected") return PushRewardSemantics::corrected;
  if (s == "literal") return PushRewardSemantics::literal;
  throw ConfigError("push reward semantics must be 'corrected' or 'literal', got '" + s + "'");
}

GraspReward RewardComputer::grasp_reward(const GraspCheck& result, int goal_id,
                                         bool relabeling) const {
  if (!result.success()) return {0.0, goal_id};
  if (relabeling) return {1.0, *result.object_id};
  return {*result.object_id == goal_id ? 1.0 : 0.0, goal_id};
}

double RewardComputer::push_reward(double improvement, const SceneChangeReport& change) const {
  const bool improved = improvement > q_improvement_threshold;
  if (semantics == PushRewardSemantics::corrected) {
    if (improved && change.changed) return push_reward_positive;
    if (!change.changed) return push_reward_negative;
    return 0.0;
  }
  if (improved && !change.changed) return push_reward_positive;
  if (!change.changed) return push_reward_negative;
  return 0.0;
}

double q_improved(double q_pre, double q_post) { return q_post - q_pre; }

double reward_grasp_q(const QMapStack& grasp_q, const RotatedStack& stack) {
  const double q = goal_grasp_max(grasp_q, stack);
  return std::isfinite(q) ? q : 0.0;
}

double recompute_reward(const Transition& t, const RewardComputer& rewards) {
  if (t.action.primitive == Primitive::grasp) {
    if (t.relabeled) return rewards.grasp_reward(t.grasp, t.original_goal_id, true).reward;
    return rewards.grasp_reward(t.grasp, t.original_goal_id, false).reward;
  }
  RewardComputer r = rewards;
  r.semantics = t.semantics;
  return r.push_reward(q_improved(t.q_pre, t.q_post), t.change);
}

double td_target(const Transition& t, double next_grasp_q_max, const TDConfig& cfg) {
  if (t.terminal) return t.reward;
  return t.reward + cfg.discount * next_grasp_q_max;
}

RotatedView transition_view(const Transition& t, int resolution, double max_object_height) {
  const Scene* scene = &t.scene;
  Scene relabeled;
  if (t.scene.goal_id() != std::optional<int>(t.goal_id) && t.scene.find(t.goal_id) != nullptr) {
    relabeled = relabel_goal(t.scene, t.goal_id);
    scene = &relabeled;
  }
  return rotate_view(as_view(render(*scene, resolution, max_object_height)), t.action.k);
}

// ---- replay ---------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<std::size_t> out;
  if (items_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pick(rng));
  return out;
}

void ReplayBuffer::erase(std::size_t i) { items_.erase(items_.begin() + static_cast<long>(i)); }

// ---- optimization ---------------------------------------------------------

TrainResult train_step(QNet& net, nn::Adam<float>& opt, const std::vector<TrainItem>& batch,
                       double huber_delta) {
  TrainResult result;
  if (batch.empty()) return result;
  std::vector<const RotatedView*> views;
  std::vector<nn::ExecutedPixel> pixels;
  std::vector<float> targets;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    views.push_back(batch[i].view);
    pixels.push_back({static_cast<int>(i), batch[i].u, batch[i].v});
    targets.push_back(static_cast<float>(batch[i].target));
  }
  QNet::Tape tape;
  const auto low = net.forward_features(nn::make_inputs<float>(views), nn::Mode::train, &tape);
  nn::FeatureMap<float> dlow;
  std::vector<float> predictions;
  const float loss = nn::executed_pixel_loss(net, low, pixels, targets,
                                             static_cast<float>(huber_delta), dlow, &predictions);
  result.loss = loss;
  result.predictions.assign(predictions.begin(), predictions.end());
  if (!std::isfinite(loss)) {
    result.rejected = true;
    return result;
  }
  net.zero_grad();
  net.backward(dlow, tape);
  const auto params = net.parameters();
  for (const auto& p : params) {
    if (!p.grads().allFinite()) {
      result.rejected = true;
      net.zero_grad();
      return result;
    }
  }
  opt.step(params);
  net.commit_running_stats(tape);
  return result;
}

// ---- curriculum ------------------------------------------------------------

const char* to_string(Stage s) {
  switch (s) {
    case Stage::grasp_agnostic: return "grasp_agnostic";
    case Stage::grasp_explore: return "grasp_explore";
    case Stage::push_training: return "push_training";
    case Stage::alternating: return "alternating";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : {Stage::grasp_agnostic, Stage::grasp_explore, Stage::push_training,
                   Stage::alternating}) {
    if (s == to_string(st)) return st;
  }
  throw ConfigError("unknown stage '" + s +
                    "' (expected grasp_agnostic, grasp_explore, push_training or alternating)");
}

int stage_index(Stage s) { return static_cast<int>(s); }

void StagePlan::validate() const {
  if (relabeling && stage != Stage::grasp_agnostic) {
    throw ConfigError("goal relabeling is only allowed in grasp_agnostic");
  }
  if (grasp_net_frozen && stage != Stage::push_training) {
    throw ConfigError("the grasp network is frozen only in push_training");
  }
  if (n_objects < 1) throw ConfigError("a stage needs at least one object");
  if (episode_budget < 0) throw ConfigError("episode budget must be non-negative");
  if (max_pushes_per_episode < 0) throw ConfigError("max pushes must be non-negative");
  if (max_actions_per_episode < 1) throw ConfigError("max actions must be positive");
}

StagePlan default_plan(Stage stage) {
  StagePlan p;
  p.stage = stage;
  switch (stage) {
    case Stage::grasp_agnostic:
      p.scenario = Scenario::sparse;
      p.n_objects = 5;
      p.episode_budget = 400;
      p.relabeling = true;
      break;
    case Stage::grasp_explore:
      p.scenario = Scenario::sparse;
      p.n_objects = 5;
      p.episode_budget = 400;
      p.relabeling = false;
      break;
    case Stage::push_training:
      p.scenario = Scenario::packed;
      p.n_objects = 5;
      p.episode_budget = 200;
      p.relabeling = false;
      p.grasp_net_frozen = true;
      break;
    case Stage::alternating:
      p.scenario = Scenario::pile;
      p.n_objects = 10;
      p.episode_budget = 200;
      p.relabeling = false;
      break;
  }
  return p;
}

StagePlan LearnConfig::plan(Stage stage) const {
  StagePlan p = default_plan(stage);
  p.episode_budget = budgets[static_cast<std::size_t>(stage_index(stage))];
  p.max_pushes_per_episode = max_pushes_per_episode;
  p.max_actions_per_episode = alternating_max_actions;
  return p;
}

TrainingContext::TrainingContext(const SimConfig& sim_cfg, const NetworkConfig& net_cfg,
                                 const LearnConfig& learn_cfg, NetworkPair& networks,
                                 std::uint64_t seed)
    : sim(sim_cfg), net(net_cfg), learn(learn_cfg), nets(&networks),
      grasp_buffer(static_cast<std::size_t>(learn_cfg.replay_capacity)),
      push_buffer(static_cast<std::size_t>(learn_cfg.replay_capacity)),
      rng(derive_seed(seed, 0xA11CE)), base_seed(seed), grasp_threshold(net_cfg.grasp_threshold) {}

std::uint64_t episode_seed(std::uint64_t base_seed, Stage stage, int episode) {
  return derive_seed(base_seed, (static_cast<std::uint64_t>(stage_index(stage) + 1) << 32) |
                                    static_cast<std::uint32_t>(episode));
}

namespace {

struct Perceived {
  Observation obs;
  RotatedStack stack;
};

Perceived perceive(const Scene& scene, const TrainingContext& ctx) {
  Perceived p;
  p.obs = render(scene, ctx.net.resolution, ctx.sim.max_object_height);
  p.stack = build_rotated_stack(p.obs);
  return p;
}

class StageRunner {
 public:
  StageRunner(const StagePlan& plan, TrainingContext& ctx) : plan_(plan), ctx_(ctx) {}

  void episode(int index, StageReport& report) {
    episode_ = index;
    step_ = 0;
    seed_ = episode_seed(ctx_.base_seed, plan_.stage, index);
    // Per-episode exploration stream, so a resumed run explores like an
    // uninterrupted one.
    ctx_.rng.seed(derive_seed(seed_, 0xE4B1));
    Scene scene = spawn_scene(plan_.scenario, plan_.n_objects, seed_, ctx_.sim);
    bool success = false;
    switch (plan_.stage) {
      case Stage::grasp_agnostic:
      case Stage::grasp_explore:
        success = grasp_episode(scene, report);
        break;
      case Stage::push_training:
      case Stage::alternating:
        success = mixed_episode(scene, report);
        break;
    }
    report.episode_success.push_back(success ? 1 : 0);
    ++report.episodes;
    if (ctx_.log) {
      ctx_.log({{"type", "episode"},
                {"run_id", ctx_.run_id},
                {"stage", to_string(plan_.stage)},
                {"episode", index},
                {"scene_seed", seed_},
                {"steps", step_},
                {"goal_grasped", success}});
    }
  }

 private:
  double epsilon() const { return ctx_.learn.exploration.epsilon(ctx_.actions); }

  // Stage 1: exactly one grasp per episode.
  bool grasp_episode(const Scene& scene, StageReport& report) {
    const Perceived p = perceive(scene, ctx_);
    const QMapStack gq = forward(ctx_.nets->grasp, NetId::grasp, p.stack);
    const double eps = epsilon();
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const MaskKind support =
        plan_.stage == Stage::grasp_agnostic ? MaskKind::objects : MaskKind::goal;
    ArgMax pick;
    bool explored = false;
    if (coin(ctx_.rng) < eps) {
      pick = random_in_mask(gq, p.stack, support, ctx_.rng);
      explored = pick.found();
    }
    if (!pick.found()) pick = masked_argmax(gq, p.stack, MaskKind::none);
    ActionSpec action = make_action(Primitive::grasp, pick.k, pick.u, pick.v, gq);
    action.explored = explored;
    const bool goal_grasped = execute_grasp(scene, action, eps, report, true).goal_grasped;
    train(NetId::grasp, report);
    return goal_grasped;
  }

  struct GraspStep {
    Scene next;
    bool goal_grasped = false;
  };

  GraspStep execute_grasp(const Scene& scene, const ActionSpec& action, double eps,
                          StageReport& report, bool store) {
    const int goal = scene.goal_id().value_or(-1);
    const GraspOutcome out =
        step_grasp(scene, grasp_command_at(action.k, action.u, action.v, ctx_.net.resolution,
                                           ctx_.sim.gripper),
                   ctx_.sim);
    const RewardComputer& rewards = ctx_.learn.rewards;
    const GraspReward plain = rewards.grasp_reward(out.result, goal, false);
    GraspStep step;
    step.next = out.scene;
    step.goal_grasped = plain.reward > 0.0;
    ++report.grasp_attempts;
    if (step.goal_grasped) ++report.grasp_successes;
    if (store) {
      Transition t;
      t.scene = scene;
      t.next_scene = out.scene;
      t.goal_id = goal;
      t.original_goal_id = goal;
      t.action = action;
      t.reward = plain.reward;
      t.terminal = ctx_.learn.td.grasp_terminal;
      t.stage_tag = to_string(plan_.stage);
      t.grasp = out.result;
      ctx_.grasp_buffer.push(t);
      if (plan_.relabeling && out.result.success() && *out.result.object_id != goal) {
        const GraspReward hind = rewards.grasp_reward(out.result, goal, true);
        t.goal_id = hind.effective_goal_id;
        t.reward = hind.reward;
        t.relabeled = true;
        ctx_.grasp_buffer.push(std::move(t));
      }
    }
    log_action(action, plain.reward, eps, out.result.success() ? (step.goal_grasped ? 1 : 2) : 0);
    return step;
  }

  // Push training and alternating stages.
  bool mixed_episode(Scene scene, StageReport& report) {
    const bool train_grasp = !plan_.grasp_net_frozen;
    const bool alternating = plan_.stage == Stage::alternating;
    int pushes = 0;
    int consecutive_failures = 0;
    std::optional<QMapStack> cached_grasp_q;
    while (true) {
      if (scene.goal() == nullptr) return false;
      if (alternating && step_ >= plan_.max_actions_per_episode) return false;
      const Perceived p = perceive(scene, ctx_);
      const QMapStack gq =
          cached_grasp_q ? *cached_grasp_q : forward(ctx_.nets->grasp, NetId::grasp, p.stack);
      cached_grasp_q.reset();
      const double eps = epsilon();
      ActionSpec action;
      if (!alternating && pushes >= plan_.max_pushes_per_episode) {
        const ArgMax best = masked_argmax(gq, p.stack, MaskKind::goal);
        if (!best.found()) return false;
        action = make_action(Primitive::grasp, best.k, best.u, best.v, gq);
      } else {
        const QMapStack pq = forward(ctx_.nets->push, NetId::push, p.stack);
        const Selection sel = select_action(gq, pq, p.stack, PolicyMode::train,
                                            ctx_.grasp_threshold, eps, ctx_.rng);
        if (!sel.action) return false;
        action = *sel.action;
      }

      if (action.primitive == Primitive::grasp) {
        const GraspStep g = execute_grasp(scene, action, eps, report, train_grasp);
        if (alternating) {
          train(NetId::grasp, report);
          train(NetId::push, report);
        }
        if (g.goal_grasped) return true;
        if (!alternating) return false;
        if (++consecutive_failures >= 5) return false;
        scene = g.next;
        continue;
      }

      // Push.
      const PushOutcome out =
          step_push(scene, PushCommand{Vec2(action.x, action.y), action.k, ctx_.sim.push_distance},
                    ctx_.sim);
      ++pushes;
      ++report.pushes;
      const double q_pre = reward_grasp_q(gq, p.stack);
      double q_post = 0.0;
      const bool goal_present = out.scene.goal() != nullptr;
      if (goal_present) {
        const Perceived next = perceive(out.scene, ctx_);
        QMapStack next_q = forward(ctx_.nets->grasp, NetId::grasp, next.stack);
        q_post = reward_grasp_q(next_q, next.stack);
        if (!train_grasp) cached_grasp_q = std::move(next_q);
      }
      Transition t;
      t.scene = scene;
      t.next_scene = out.scene;
      t.goal_id = scene.goal_id().value_or(-1);
      t.original_goal_id = t.goal_id;
      t.action = action;
      t.stage_tag = to_string(plan_.stage);
      t.q_pre = q_pre;
      t.q_post = q_post;
      t.change = out.report;
      t.semantics = ctx_.learn.rewards.semantics;
      t.reward = ctx_.learn.rewards.push_reward(q_improved(q_pre, q_post), out.report);
      t.terminal = !goal_present;
      t.next_grasp_q_max = goal_present ? q_post : 0.0;
      log_action(action, t.reward, eps, -1);
      ctx_.push_buffer.push(std::move(t));
      if (alternating) train(NetId::grasp, report);
      train(NetId::push, report);
      scene = out.scene;
    }
  }

  void train(NetId id, StageReport& report) {
    ReplayBuffer& buffer = id == NetId::grasp ? ctx_.grasp_buffer : ctx_.push_buffer;
    if (buffer.empty()) return;
    if (id == NetId::grasp && plan_.grasp_net_frozen) return;
    std::vector<std::size_t> indices =
        buffer.sample(static_cast<std::size_t>(ctx_.learn.batch_size), ctx_.rng);
    indices.push_back(buffer.newest_index());
    std::vector<RotatedView> views;
    views.reserve(indices.size());
    std::vector<TrainItem> batch;
    for (std::size_t i : indices) {
      const Transition& t = buffer.at(i);
      views.push_back(transition_view(t, ctx_.net.resolution, ctx_.sim.max_object_height));
    }
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const Transition& t = buffer.at(indices[j]);
      batch.push_back({&views[j], t.action.u, t.action.v,
                       td_target(t, t.next_grasp_q_max, ctx_.learn.td)});
    }
    const TrainResult r =
        train_step(ctx_.nets->net(id), ctx_.nets->optimizer(id), batch, ctx_.learn.td.huber_delta);
    nlohmann::json rec = {{"type", "update"},       {"run_id", ctx_.run_id},
                          {"stage", to_string(plan_.stage)}, {"episode", episode_},
                          {"step", step_},          {"net", to_string(id)},
                          {"loss", r.loss},         {"rejected", r.rejected}};
    if (r.rejected) {
      // Quarantine the newest transition: it is the only one not already
      // part of an accepted update.
      buffer.erase(buffer.newest_index());
      ++report.quarantined;
      rec["quarantined"] = true;
      rec["loss"] = nullptr;
    }
    if (ctx_.log) ctx_.log(rec);
  }

  // grasp_result: -1 for pushes, 0 failed, 1 goal grasped, 2 other object.
  void log_action(const ActionSpec& a, double reward, double eps, int grasp_result) {
    if (ctx_.log) {
      nlohmann::json rec = {{"type", "action"},
                            {"run_id", ctx_.run_id},
                            {"stage", to_string(plan_.stage)},
                            {"episode", episode_},
                            {"step", step_},
                            {"primitive", to_string(a.primitive)},
                            {"k", a.k},
                            {"u", a.u},
                            {"v", a.v},
                            {"q_value", a.q_value},
                            {"reward", reward},
                            {"epsilon", eps},
                            {"explored", a.explored},
                            {"scene_seed", seed_}};
      if (grasp_result < 0) {
        rec["grasp_success"] = nullptr;
      } else {
        rec["grasp_success"] = grasp_result == 1;
        rec["object_grasped"] = grasp_result > 0;
      }
      ctx_.log(rec);
    }
    ++ctx_.actions;
    ++step_;
  }

  const StagePlan& plan_;
  TrainingContext& ctx_;
  int episode_ = 0;
  int step_ = 0;
  std::uint64_t seed_ = 0;
};

}  // namespace

StageReport run_stage(const StagePlan& plan, TrainingContext& ctx, int first_episode,
                      int stop_after) {
  plan.validate();
  if (ctx.nets == nullptr) throw ConfigError("training context has no networks");
  StageReport report;
  report.stage = plan.stage;
  report.grasp_hash_before = ctx.nets->grasp.weight_hash();
  StageRunner runner(plan, ctx);
  int done_here = 0;
  for (int e = first_episode; e < plan.episode_budget; ++e) {
    runner.episode(e, report);
    ++done_here;
    const bool last = e + 1 == plan.episode_budget;
    const bool stop = stop_after > 0 && done_here >= stop_after && !last;
    if (ctx.checkpoint &&
        (last || stop ||
         (ctx.learn.checkpoint_every > 0 && (e + 1) % ctx.learn.checkpoint_every == 0))) {
      ctx.checkpoint({plan.stage, e + 1, ctx.actions, last});
    }
    if (stop) {
      report.stopped_early = true;
      break;
    }
  }
  report.grasp_hash_after = ctx.nets->grasp.weight_hash();
  return report;
}

CalibrationResult choose_threshold(std::vector<CalibrationSample> samples,
                                   double target_precision, double fallback) {
  CalibrationResult result;
  result.samples = static_cast<int>(samples.size());
  if (samples.empty()) {
    result.threshold = fallback;
    result.fallback = true;
    return result;
  }
  std::sort(samples.begin(), samples.end(),
            [](const CalibrationSample& a, const CalibrationSample& b) { return a.q > b.q; });
  constexpr int kMinAbove = 3;
  int successes = 0;
  int best_m = 0;
  double best_precision = 0.0;
  for (std::size_t m = 1; m <= samples.size(); ++m) {
    successes += samples[m - 1].success ? 1 : 0;
    // Only cut between distinct values.
    if (m < samples.size() && samples[m].q == samples[m - 1].q) continue;
    const double precision = static_cast<double>(successes) / static_cast<double>(m);
    if (static_cast<int>(m) >= kMinAbove && precision >= target_precision) {
      best_m = static_cast<int>(m);
      best_precision = precision;
    }
  }
  if (best_m == 0) {
    result.threshold = samples.front().q;
    result.fallback = true;
    return result;
  }
  result.above = best_m;
  result.precision = best_precision;
  const auto m = static_cast<std::size_t>(best_m);
  result.threshold = m < samples.size() ? 0.5 * (samples[m - 1].q + samples[m].q)
                                        : samples.back().q - 1e-3;
  return result;
}

std::vector<CalibrationSample> calibration_samples(const QNet& grasp_net, const QNet* push_net,
                                                   const SimConfig& sim, int n_scenes,
                                                   std::uint64_t seed) {
  std::vector<CalibrationSample> samples;
  const int res = grasp_net.config().resolution;
  std::mt19937_64 rng(derive_seed(seed, 0xCA1));
  for (int i = 0; i < n_scenes; ++i) {
    const Scenario scenario = i % 2 == 0 ? Scenario::sparse : Scenario::packed;
    Scene scene = spawn_scene(scenario, 5, derive_seed(seed, static_cast<std::uint64_t>(i)), sim);
    // Packed scenes also contribute states after pushes, which is where the
    // threshold decides between pushing on and grasping.
    const int variants = scenario == Scenario::sparse ? 1 : (push_net != nullptr ? 6 : 3);
    for (int j = 0; j < variants; ++j) {
      const Observation obs = render(scene, res, sim.max_object_height);
      const RotatedStack stack = build_rotated_stack(obs);
      const QMapStack q = forward(grasp_net, NetId::grasp, stack);
      const ArgMax best = masked_argmax(q, stack, MaskKind::goal);
      if (best.found()) {
        const GraspCheck check = evaluate_grasp(
            scene, grasp_command_at(best.k, best.u, best.v, res, sim.gripper));
        samples.push_back({best.value, check.success() && check.object_id == scene.goal_id()});
      }
      ArgMax push;
      if (push_net != nullptr) {
        push = masked_argmax(forward(*push_net, NetId::push, stack), stack, MaskKind::objects);
      } else {
        push = random_in_mask(q, stack, MaskKind::objects, rng);
      }
      if (!push.found()) break;
      const DecodedAction d = decode_action(push.k, push.u, push.v, res);
      scene = step_push(scene, {d.position, push.k, sim.push_distance}, sim).scene;
      if (scene.goal() == nullptr) break;
    }
  }
  return samples;
}

CalibrationResult calibrate_grasp_threshold(const QNet& grasp_net, const QNet* push_net,
                                            const SimConfig& sim, int n_scenes,
                                            std::uint64_t seed, double target_precision,
                                            double fallback) {
  return choose_threshold(calibration_samples(grasp_net, push_net, sim, n_scenes, seed),
                          target_precision, fallback);
}

}  // namespace pushgrasp
