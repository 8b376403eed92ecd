#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "pushgrasp/learning.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;

namespace {

SceneChangeReport changed(bool c) {
  SceneChangeReport r;
  r.changed = c;
  return r;
}

GraspCheck grasped(int id) {
  GraspCheck g;
  g.object_id = id;
  return g;
}

GraspCheck failed() {
  GraspCheck g;
  g.failure = GraspFailure::collision;
  return g;
}

LearnConfig small_learning() {
  LearnConfig l;
  l.batch_size = 2;
  l.checkpoint_every = 0;
  return l;
}

Transition numbered(int i) {
  Transition t;
  t.goal_id = i;
  t.reward = i;
  return t;
}

}  // namespace

TEST_CASE("grasp reward") {
  const RewardComputer r;
  CHECK(r.grasp_reward(grasped(3), 3, false).reward == 1.0);
  CHECK(r.grasp_reward(grasped(3), 3, false).effective_goal_id == 3);
  CHECK(r.grasp_reward(grasped(2), 3, false).reward == 0.0);
  CHECK(r.grasp_reward(grasped(2), 3, true).reward == 1.0);
  CHECK(r.grasp_reward(grasped(2), 3, true).effective_goal_id == 2);
  CHECK(r.grasp_reward(failed(), 3, true).reward == 0.0);
  CHECK(r.grasp_reward(failed(), 3, true).effective_goal_id == 3);
}

TEST_CASE("push reward table, corrected semantics") {
  const RewardComputer r;
  CHECK(r.push_reward(0.3, changed(true)) == 0.5);
  CHECK(r.push_reward(0.3, changed(false)) == -0.5);
  CHECK(r.push_reward(0.05, changed(true)) == 0.0);
  CHECK(r.push_reward(0.05, changed(false)) == -0.5);
  CHECK(r.push_reward(0.0, changed(false)) == -0.5);
  CHECK(r.push_reward(0.1, changed(true)) == 0.0);  // strictly greater than 0.1
}

TEST_CASE("push reward table, literal semantics") {
  RewardComputer r;
  r.semantics = PushRewardSemantics::literal;
  CHECK(r.push_reward(0.3, changed(false)) == 0.5);
  CHECK(r.push_reward(0.3, changed(true)) == 0.0);
  CHECK(r.push_reward(0.05, changed(false)) == -0.5);
  CHECK(r.push_reward(0.05, changed(true)) == 0.0);
  CHECK(push_semantics_from_string("literal") == PushRewardSemantics::literal);
  CHECK_THROWS(push_semantics_from_string("other"));
}

TEST_CASE("q improvement and td targets") {
  CHECK(q_improved(1.2, 1.5) == doctest::Approx(0.3));
  CHECK(q_improved(0.7, 0.7) == 0.0);
  TDConfig td;
  Transition push;
  push.action.primitive = Primitive::push;
  push.reward = 0.5;
  push.terminal = false;
  CHECK(td_target(push, 1.0, td) == 1.0);
  push.reward = -0.5;
  CHECK(td_target(push, 0.0, td) == -0.5);
  Transition grasp;
  grasp.action.primitive = Primitive::grasp;
  grasp.reward = 1.0;
  grasp.terminal = true;
  for (double rho : {0.0, 0.25, 0.5, 0.9, 0.999}) {
    td.discount = rho;
    CHECK(td_target(grasp, 123.0, td) == 1.0);
  }
}

TEST_CASE("replay buffer evicts strictly FIFO") {
  for (int capacity : {1, 3, 50}) {
    for (int extra : {0, 1, 7}) {
      ReplayBuffer b(static_cast<std::size_t>(capacity));
      for (int i = 0; i < capacity + extra; ++i) b.push(numbered(i));
      REQUIRE(b.size() == static_cast<std::size_t>(capacity));
      for (int i = 0; i < capacity; ++i) CHECK(b.at(static_cast<std::size_t>(i)).goal_id == extra + i);
      CHECK(b.newest().goal_id == capacity + extra - 1);
    }
  }
  ReplayBuffer b(10);
  for (int i = 0; i < 5; ++i) b.push(numbered(i));
  std::mt19937_64 rng(1);
  for (std::size_t idx : b.sample(100, rng)) CHECK(idx < 5);
  b.erase(b.newest_index());
  CHECK(b.size() == 4);
  CHECK(b.newest().goal_id == 3);
}

TEST_CASE("stage plans enforce the curriculum invariants") {
  const LearnConfig l;
  for (Stage s : {Stage::grasp_agnostic, Stage::grasp_explore, Stage::push_training,
                  Stage::alternating}) {
    const StagePlan p = l.plan(s);
    CHECK_NOTHROW(p.validate());
    CHECK(p.relabeling == (s == Stage::grasp_agnostic));
    CHECK(p.grasp_net_frozen == (s == Stage::push_training));
    CHECK(stage_from_string(to_string(s)) == s);
  }
  StagePlan bad = l.plan(Stage::grasp_explore);
  bad.relabeling = true;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = l.plan(Stage::alternating);
  bad.grasp_net_frozen = true;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(l.plan(Stage::alternating).n_objects == 10);
  CHECK(l.plan(Stage::grasp_agnostic).episode_budget == 400);
}

TEST_CASE("train_step at the current prediction leaves parameters unchanged without weight decay") {
  nn::AdamConfig cfg;
  cfg.weight_decay = 0.0;
  const RotatedStack st = build_rotated_stack(render(spawn_sparse_scene(5, 1, SimConfig{}), 16, 0.08));
  // The first run only reads off the train-mode prediction.
  QNet probe_net(pgtest::tiny_net(16), 4);
  nn::Adam<float> probe_opt(cfg);
  const TrainResult probe = train_step(probe_net, probe_opt, {{&st.views[0], 5, 6, 0.0}}, 1.0);

  QNet net(pgtest::tiny_net(16), 4);
  nn::Adam<float> opt(cfg);
  const TrainResult r = train_step(net, opt, {{&st.views[0], 5, 6, probe.predictions[0]}}, 1.0);
  CHECK(r.loss == 0.0);
  CHECK_FALSE(r.rejected);
  QNet untouched(pgtest::tiny_net(16), 4);
  const auto a = net.parameters();
  const auto b = untouched.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values() == b[i].values());
}

TEST_CASE("non-finite targets are rejected without touching the weights") {
  QNet net(pgtest::tiny_net(16), 4);
  nn::Adam<float> opt(nn::AdamConfig{});
  const RotatedStack st = build_rotated_stack(render(spawn_sparse_scene(5, 1, SimConfig{}), 16, 0.08));
  const std::uint64_t before = net.weight_hash();
  const TrainResult r = train_step(net, opt, {{&st.views[0], 5, 6, std::nan("")}}, 1.0);
  CHECK(r.rejected);
  CHECK(net.weight_hash() == before);
  CHECK(opt.steps() == 0);
}

TEST_CASE("grasp_agnostic episodes store sound, recomputable transitions") {
  const SimConfig sim;
  const NetworkConfig nc = pgtest::tiny_net(32);
  LearnConfig lc = small_learning();
  lc.exploration.epsilon_initial = 1.0;  // explore so grasps hit objects
  lc.exploration.floor = 1.0;
  NetworkPair nets(nc, lc.adam, 3);
  TrainingContext ctx(sim, nc, lc, nets, 8);
  StagePlan plan = lc.plan(Stage::grasp_agnostic);
  plan.episode_budget = 30;
  const StageReport report = run_stage(plan, ctx);
  CHECK(report.episodes == 30);
  int relabeled = 0;
  int successes = 0;
  for (std::size_t i = 0; i < ctx.grasp_buffer.size(); ++i) {
    const Transition& t = ctx.grasp_buffer.at(i);
    CHECK(recompute_reward(t, lc.rewards) == t.reward);
    CHECK(t.terminal);
    if (t.grasp.success()) {
      if (t.relabeled || *t.grasp.object_id == t.original_goal_id) {
        CHECK(t.reward == 1.0);
        ++successes;
      }
    }
    if (t.relabeled) {
      ++relabeled;
      CHECK(t.reward == 1.0);
      CHECK(t.goal_id == *t.grasp.object_id);
    }
  }
  CHECK(successes > 0);
  // Every successful grasp of a non-goal object has a reward-1 duplicate.
  int other_object_grasps = 0;
  for (std::size_t i = 0; i < ctx.grasp_buffer.size(); ++i) {
    const Transition& t = ctx.grasp_buffer.at(i);
    if (!t.relabeled && t.grasp.success() && *t.grasp.object_id != t.original_goal_id) {
      ++other_object_grasps;
    }
  }
  CHECK(relabeled == other_object_grasps);
}

TEST_CASE("push_training keeps the grasp network frozen") {
  const SimConfig sim;
  const NetworkConfig nc = pgtest::tiny_net(32);
  LearnConfig lc = small_learning();
  NetworkPair nets(nc, lc.adam, 3);
  TrainingContext ctx(sim, nc, lc, nets, 9);
  ctx.grasp_threshold = 10.0;  // push the full five times
  StagePlan plan = lc.plan(Stage::push_training);
  plan.episode_budget = 2;
  const std::uint64_t grasp_before = nets.grasp.weight_hash();
  const std::uint64_t push_before = nets.push.weight_hash();
  const StageReport report = run_stage(plan, ctx);
  CHECK(report.grasp_hash_before == grasp_before);
  CHECK(report.grasp_hash_after == grasp_before);
  CHECK(nets.grasp.weight_hash() == grasp_before);
  CHECK(nets.push.weight_hash() != push_before);
  CHECK(report.pushes == 10);
  CHECK(ctx.push_buffer.size() == 10);
  for (std::size_t i = 0; i < ctx.push_buffer.size(); ++i) {
    const Transition& t = ctx.push_buffer.at(i);
    CHECK(recompute_reward(t, lc.rewards) == t.reward);
    CHECK_FALSE(t.terminal);
  }
}

TEST_CASE("alternating stage interleaves grasp and push updates") {
  const SimConfig sim;
  const NetworkConfig nc = pgtest::tiny_net(32);
  LearnConfig lc = small_learning();
  lc.alternating_max_actions = 4;
  NetworkPair nets(nc, lc.adam, 3);
  TrainingContext ctx(sim, nc, lc, nets, 10);
  // Seed the grasp buffer, then push only so every step updates both nets.
  StagePlan warmup = lc.plan(Stage::grasp_explore);
  warmup.episode_budget = 2;
  run_stage(warmup, ctx);
  REQUIRE_FALSE(ctx.grasp_buffer.empty());
  ctx.grasp_threshold = 10.0;
  std::vector<nlohmann::json> log;
  ctx.log = [&](const nlohmann::json& r) { log.push_back(r); };
  StagePlan plan = lc.plan(Stage::alternating);
  plan.episode_budget = 3;
  run_stage(plan, ctx);
  std::vector<std::string> nets_seen;
  for (const auto& r : log) {
    if (r["type"] == "update") nets_seen.push_back(r["net"].get<std::string>());
  }
  REQUIRE(nets_seen.size() >= 4);
  std::set<std::string> kinds(nets_seen.begin(), nets_seen.end());
  CHECK(kinds.count("grasp") == 1);
  CHECK(kinds.count("push") == 1);
  // Strict alternation, grasp first.
  for (std::size_t i = 0; i < nets_seen.size(); ++i) {
    CHECK(nets_seen[i] == (i % 2 == 0 ? "grasp" : "push"));
  }
}

TEST_CASE("action log records carry the documented fields") {
  const SimConfig sim;
  const NetworkConfig nc = pgtest::tiny_net(32);
  LearnConfig lc = small_learning();
  NetworkPair nets(nc, lc.adam, 3);
  TrainingContext ctx(sim, nc, lc, nets, 11);
  std::vector<nlohmann::json> log;
  ctx.log = [&](const nlohmann::json& r) { log.push_back(r); };
  StagePlan plan = lc.plan(Stage::grasp_explore);
  plan.episode_budget = 3;
  run_stage(plan, ctx);
  int actions = 0;
  int episodes = 0;
  for (const auto& r : log) {
    if (r["type"] == "action") {
      ++actions;
      for (const char* key : {"run_id", "stage", "episode", "step", "primitive", "k", "u", "v",
                              "q_value", "reward", "epsilon", "grasp_success", "scene_seed"}) {
        CHECK_MESSAGE(r.contains(key), key);
      }
    } else if (r["type"] == "episode") {
      CHECK(r["episode"].get<int>() == episodes);
      ++episodes;
    }
  }
  CHECK(actions == 3);
  CHECK(episodes == 3);
}

TEST_CASE("threshold choice from calibration samples") {
  std::vector<CalibrationSample> s = {{0.9, true}, {0.8, true}, {0.7, true}, {0.6, false},
                                      {0.5, true}, {0.4, false}, {0.3, false}};
  CalibrationResult r = choose_threshold(s, 0.8, 9.0);
  // Cutting below 0.5 keeps 4 of 5 correct.
  CHECK(r.above == 5);
  CHECK(r.precision == doctest::Approx(0.8));
  CHECK(r.threshold == doctest::Approx(0.45));
  r = choose_threshold(s, 1.0, 9.0);
  CHECK(r.above == 3);
  CHECK(r.threshold == doctest::Approx(0.65));
  r = choose_threshold({{0.5, false}, {0.4, false}}, 0.8, 9.0);
  CHECK(r.fallback);
  CHECK(r.threshold == 0.5);
  r = choose_threshold({}, 0.8, 9.0);
  CHECK(r.fallback);
  CHECK(r.threshold == 9.0);
}
