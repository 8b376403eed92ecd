#include "pushgrasp/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace pushgrasp {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::goal_grasped: return "goal_grasped";
    case Termination::five_failures: return "five_failures";
    case Termination::action_cap: return "action_cap";
    case Termination::goal_lost: return "goal_lost";
  }
  return "?";
}

Termination termination_from_string(const std::string& s) {
  for (Termination t : {Termination::goal_grasped, Termination::five_failures,
                        Termination::action_cap, Termination::goal_lost}) {
    if (s == to_string(t)) return t;
  }
  throw std::invalid_argument("unknown termination reason '" + s + "'");
}

GreedyAgent::GreedyAgent(const NetworkPair& nets, double grasp_threshold)
    : nets_(nets), threshold_(grasp_threshold) {}

std::optional<ActionSpec> GreedyAgent::act(const Observation&, const RotatedStack& stack) {
  const QMapStack gq = forward(nets_.grasp, NetId::grasp, stack);
  const QMapStack pq = forward(nets_.push, NetId::push, stack);
  return select_action(gq, pq, stack, PolicyMode::test, threshold_, 0.0, rng_).action;
}

RandomAgent::RandomAgent(double grasp_probability, std::uint64_t seed)
    : grasp_probability_(grasp_probability), seed_(seed), rng_(seed) {}

void RandomAgent::reset(std::uint64_t episode_seed) {
  rng_.seed(derive_seed(seed_, episode_seed));
}

std::optional<ActionSpec> RandomAgent::act(const Observation& obs, const RotatedStack& stack) {
  QMapStack zero;
  zero.values.fill(ImageF::Zero(obs.resolution, obs.resolution));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool grasp = coin(rng_) < grasp_probability_;
  const ArgMax pick =
      random_in_mask(zero, stack, grasp ? MaskKind::goal : MaskKind::objects, rng_);
  if (!pick.found()) return std::nullopt;
  return make_action(grasp ? Primitive::grasp : Primitive::push, pick.k, pick.u, pick.v, zero);
}

EpisodeRecord run_episode(const Scene& initial, Agent& agent, const EvalEnv& env,
                          const SceneObserver& observe) {
  EpisodeRecord rec;
  rec.scenario = initial.scenario;
  rec.n_objects = static_cast<int>(initial.objects.size());
  rec.seed = initial.rng_seed;
  agent.reset(initial.rng_seed);
  Scene scene = initial;
  int failures = 0;
  int steps = 0;
  while (true) {
    if (observe) observe(scene);
    const ObjectBody* goal = scene.goal();
    if (goal == nullptr || !scene.contains_point(goal->pose.position())) {
      rec.termination = Termination::goal_lost;
      return rec;
    }
    if (steps >= env.protocol.action_cap) {
      rec.termination = Termination::action_cap;
      return rec;
    }
    ++steps;
    const Observation obs = render(scene, env.resolution, env.sim.max_object_height);
    const RotatedStack stack = build_rotated_stack(obs);
    const std::optional<ActionSpec> action = agent.act(obs, stack);
    bool failed_grasp = false;
    if (!action) {
      ++rec.goal_grasp_attempts;
      failed_grasp = true;
    } else if (action->primitive == Primitive::grasp) {
      rec.actions.push_back(*action);
      ++rec.goal_grasp_attempts;
      const int goal_id = goal->id;
      const GraspOutcome out = step_grasp(
          scene,
          grasp_command_at(action->k, action->u, action->v, env.resolution, env.sim.gripper),
          env.sim);
      if (out.result.success() && *out.result.object_id == goal_id) {
        ++rec.goal_grasp_successes;
        rec.completed = true;
        rec.termination = Termination::goal_grasped;
        if (observe) observe(out.scene);
        return rec;
      }
      failed_grasp = true;
      scene = out.scene;
    } else {
      rec.actions.push_back(*action);
      ++rec.push_count;
      scene = step_push(scene, PushCommand{Vec2(action->x, action->y), action->k,
                                           env.sim.push_distance},
                        env.sim)
                  .scene;
    }
    if (failed_grasp && ++failures >= env.protocol.max_consecutive_failures) {
      rec.termination = Termination::five_failures;
      return rec;
    }
  }
}

Stat mean_stderr(const std::vector<double>& values) {
  Stat s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.stderr_mean = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

Stat completion(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("completion of an empty record set");
  std::vector<double> xs;
  for (const auto& r : records) xs.push_back(r.completed ? 1.0 : 0.0);
  return mean_stderr(xs);
}

Stat grasp_success(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("grasp success of an empty record set");
  std::vector<double> outcomes;
  for (const auto& r : records) {
    for (int i = 0; i < r.goal_grasp_attempts; ++i) {
      outcomes.push_back(i < r.goal_grasp_successes ? 1.0 : 0.0);
    }
  }
  return mean_stderr(outcomes);
}

std::optional<Stat> motion_number(const std::vector<EpisodeRecord>& records) {
  std::vector<double> pushes;
  for (const auto& r : records) {
    if (r.completed) pushes.push_back(r.push_count);
  }
  if (pushes.empty()) return std::nullopt;
  return mean_stderr(pushes);
}

MetricsReport summarize(const std::vector<EpisodeRecord>& records) {
  MetricsReport m;
  m.n_runs = static_cast<int>(records.size());
  m.completion = completion(records);
  m.grasp_success = grasp_success(records);
  m.motion_number = motion_number(records);
  return m;
}

std::uint64_t benchmark_scene_seed(std::uint64_t base_seed, int index) {
  return derive_seed(base_seed, 0xE7A1000000ULL + static_cast<std::uint64_t>(index));
}

BenchmarkResult run_benchmark(Agent& agent, Scenario scenario, int n_objects, int n_scenes,
                              std::uint64_t base_seed, const EvalEnv& env) {
  if (n_scenes < 1) throw ConfigError("a benchmark needs at least one scene");
  BenchmarkResult result;
  for (int i = 0; i < n_scenes; ++i) {
    const std::uint64_t seed = benchmark_scene_seed(base_seed, i);
    const Scene scene = spawn_scene(scenario, n_objects, seed, env.sim);
    result.records.push_back(run_episode(scene, agent, env));
  }
  result.report = summarize(result.records);
  return result;
}

std::vector<double> exponential_smooth(const std::vector<double>& xs, double factor) {
  std::vector<double> ys;
  ys.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    ys.push_back(t == 0 ? xs[0] : factor * ys[t - 1] + (1.0 - factor) * xs[t]);
  }
  return ys;
}

std::vector<double> rolling_mean(const std::vector<double>& xs, int window) {
  if (window < 1) throw std::invalid_argument("rolling window must be positive");
  const int left = (window - 1) / 2;
  const int right = window - 1 - left;
  const int n = static_cast<int>(xs.size());
  std::vector<double> ys(xs.size());
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - left);
    const int hi = std::min(n - 1, t + right);
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) sum += xs[static_cast<std::size_t>(i)];
    ys[static_cast<std::size_t>(t)] = sum / (hi - lo + 1);
  }
  return ys;
}

nlohmann::json to_json(const ActionSpec& a) {
  return {{"primitive", to_string(a.primitive)},
          {"k", a.k},
          {"u", a.u},
          {"v", a.v},
          {"q_value", a.q_value},
          {"x", a.x},
          {"y", a.y},
          {"angle", a.angle}};
}

ActionSpec action_from_json(const nlohmann::json& j) {
  ActionSpec a;
  a.primitive = primitive_from_string(j.at("primitive").get<std::string>());
  a.k = j.at("k").get<int>();
  a.u = j.at("u").get<int>();
  a.v = j.at("v").get<int>();
  a.q_value = j.at("q_value").get<double>();
  a.x = j.at("x").get<double>();
  a.y = j.at("y").get<double>();
  a.angle = j.at("angle").get<double>();
  return a;
}

nlohmann::json to_json(const EpisodeRecord& r) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : r.actions) actions.push_back(to_json(a));
  return {{"scenario", to_string(r.scenario)},
          {"n_objects", r.n_objects},
          {"seed", r.seed},
          {"actions", actions},
          {"goal_grasp_attempts", r.goal_grasp_attempts},
          {"goal_grasp_successes", r.goal_grasp_successes},
          {"push_count", r.push_count},
          {"completed", r.completed},
          {"termination", to_string(r.termination)}};
}

EpisodeRecord record_from_json(const nlohmann::json& j) {
  EpisodeRecord r;
  r.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  r.n_objects = j.at("n_objects").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& a : j.at("actions")) r.actions.push_back(action_from_json(a));
  r.goal_grasp_attempts = j.at("goal_grasp_attempts").get<int>();
  r.goal_grasp_successes = j.at("goal_grasp_successes").get<int>();
  r.push_count = j.at("push_count").get<int>();
  r.completed = j.at("completed").get<bool>();
  r.termination = termination_from_string(j.at("termination").get<std::string>());
  return r;
}

nlohmann::json to_json(const Stat& s) {
  nlohmann::json j = {{"mean", s.mean}, {"n", s.n}};
  j["stderr"] = s.stderr_mean ? nlohmann::json(*s.stderr_mean) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json summary_json(const MetricsReport& m, const std::string& approach,
                            Scenario scenario, int n_objects) {
  return {{"approach", approach},
          {"scenario", to_string(scenario)},
          {"n_objects", n_objects},
          {"n_runs", m.n_runs},
          {"C", to_json(m.completion)},
          {"GS", to_json(m.grasp_success)},
          {"MN", m.motion_number ? to_json(*m.motion_number) : nlohmann::json(nullptr)}};
}

}  // namespace pushgrasp
