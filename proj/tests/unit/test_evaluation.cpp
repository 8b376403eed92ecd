#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pushgrasp/evaluation.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;

namespace {

EpisodeRecord record(bool completed, int attempts, int successes, int pushes) {
  EpisodeRecord r;
  r.completed = completed;
  r.goal_grasp_attempts = attempts;
  r.goal_grasp_successes = successes;
  r.push_count = pushes;
  r.termination = completed ? Termination::goal_grasped : Termination::five_failures;
  return r;
}

// Independent sample statistics.
double sample_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

class NoAction : public Agent {
 public:
  std::optional<ActionSpec> act(const Observation&, const RotatedStack&) override {
    return std::nullopt;
  }
};

// Pushes at a fixed empty corner forever.
class CornerPusher : public Agent {
 public:
  std::optional<ActionSpec> act(const Observation&, const RotatedStack&) override {
    ActionSpec a;
    a.primitive = Primitive::push;
    a.x = 0.01;
    a.y = 0.01;
    return a;
  }
};

// Grasps the first goal pixel whose grasp is known to succeed.
class OracleGrasper : public Agent {
 public:
  explicit OracleGrasper(const Scene& scene) : scene_(scene) {}
  std::optional<ActionSpec> act(const Observation&, const RotatedStack& stack) override {
    const int goal = scene_.goal()->id;
    for (int k = 0; k < kRotations; ++k) {
      const Mask& m = stack.views[static_cast<std::size_t>(k)].goal_mask;
      for (int v = 0; v < m.rows(); ++v) {
        for (int u = 0; u < m.cols(); ++u) {
          if (m(v, u) == 0) continue;
          const GraspCheck g = evaluate_grasp(
              scene_, grasp_command_at(k, u, v, stack.resolution, SimConfig{}.gripper));
          if (g.success() && *g.object_id == goal) {
            ActionSpec a;
            a.primitive = Primitive::grasp;
            a.k = k;
            a.u = u;
            a.v = v;
            return a;
          }
        }
      }
    }
    return std::nullopt;
  }

 private:
  const Scene& scene_;
};

}  // namespace

TEST_CASE("metric fixtures") {
  const std::vector<EpisodeRecord> rs = {record(true, 1, 1, 2), record(true, 2, 1, 0),
                                         record(false, 5, 0, 3), record(true, 1, 1, 4)};
  const MetricsReport m = summarize(rs);
  CHECK(m.n_runs == 4);
  CHECK(m.completion.mean == doctest::Approx(0.75));
  CHECK(*m.completion.stderr_mean == doctest::Approx(sample_stderr({1, 1, 0, 1})));
  // 3 successes over 9 attempts, pooled.
  CHECK(m.grasp_success.mean == doctest::Approx(3.0 / 9.0));
  CHECK(m.grasp_success.n == 9);
  CHECK(*m.grasp_success.stderr_mean ==
        doctest::Approx(sample_stderr({1, 1, 0, 0, 0, 0, 0, 0, 1})));
  // The failed run's 3 pushes are excluded.
  REQUIRE(m.motion_number.has_value());
  CHECK(m.motion_number->mean == doctest::Approx(2.0));
  CHECK(m.motion_number->n == 3);
}

TEST_CASE("motion number is absent without completed runs") {
  CHECK_FALSE(motion_number({record(false, 5, 0, 1), record(false, 5, 0, 0)}).has_value());
  CHECK_FALSE(mean_stderr({0.4}).stderr_mean.has_value());
}

TEST_CASE("metrics are invariant under record order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EpisodeRecord> rs;
    const int n = pgtest::uniform_int(rng, 2, 30);
    for (int i = 0; i < n; ++i) {
      const bool done = pgtest::uniform(rng, 0, 1) < 0.6;
      const int attempts = pgtest::uniform_int(rng, 1, 5);
      rs.push_back(record(done, attempts, done ? 1 : 0, pgtest::uniform_int(rng, 0, 8)));
    }
    const MetricsReport a = summarize(rs);
    std::shuffle(rs.begin(), rs.end(), rng);
    const MetricsReport b = summarize(rs);
    CHECK(a.completion.mean == doctest::Approx(b.completion.mean).epsilon(1e-12));
    CHECK(a.grasp_success.mean == doctest::Approx(b.grasp_success.mean).epsilon(1e-12));
    CHECK(a.motion_number.has_value() == b.motion_number.has_value());
    if (a.motion_number) {
      CHECK(a.motion_number->mean == doctest::Approx(b.motion_number->mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("an agent without actions fails after five attempts") {
  const Scene scene = spawn_packed_scene(5, 3, SimConfig{});
  NoAction agent;
  const EpisodeRecord r = run_episode(scene, agent, EvalEnv{});
  CHECK(r.termination == Termination::five_failures);
  CHECK(r.goal_grasp_attempts == 5);
  CHECK_FALSE(r.completed);
}

TEST_CASE("pushes never count as failures") {
  const Scene scene = spawn_sparse_scene(3, 4, SimConfig{});
  CornerPusher agent;
  const EpisodeRecord r = run_episode(scene, agent, EvalEnv{});
  CHECK(r.termination == Termination::action_cap);
  CHECK(r.push_count == 30);
  CHECK(r.goal_grasp_attempts == 0);
}

TEST_CASE("a successful goal grasp completes the episode on its first attempt") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scene scene = spawn_sparse_scene(3, seed, SimConfig{});
    OracleGrasper agent(scene);
    int observed = 0;
    const EpisodeRecord r = run_episode(scene, agent, EvalEnv{}, [&](const Scene&) { ++observed; });
    CHECK(r.completed);
    CHECK(r.goal_grasp_attempts == 1);
    CHECK(r.goal_grasp_successes == 1);
    CHECK(observed == 2);
  }
}

TEST_CASE("random benchmark is deterministic") {
  EvalEnv env;
  RandomAgent a(0.5, 9);
  RandomAgent b(0.5, 9);
  const BenchmarkResult x = run_benchmark(a, Scenario::pile, 10, 4, 21, env);
  const BenchmarkResult y = run_benchmark(b, Scenario::pile, 10, 4, 21, env);
  REQUIRE(x.records.size() == 4);
  for (std::size_t i = 0; i < x.records.size(); ++i) {
    CHECK(to_json(x.records[i]) == to_json(y.records[i]));
    CHECK(record_from_json(to_json(x.records[i])).actions.size() == x.records[i].actions.size());
  }
  CHECK(benchmark_scene_seed(21, 0) != benchmark_scene_seed(21, 1));
}

TEST_CASE("smoothing closed forms") {
  // Step input: y_t = 1 - 0.9^t for x = (0, 1, 1, ...).
  std::vector<double> xs(30, 1.0);
  xs[0] = 0.0;
  const auto ys = exponential_smooth(xs, 0.9);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    CHECK(ys[t] == doctest::Approx(1.0 - std::pow(0.9, static_cast<double>(t))));
  }
  // Linear input: a centered window reproduces the line away from the edges.
  std::vector<double> line(20);
  for (std::size_t i = 0; i < line.size(); ++i) line[i] = 2.0 * static_cast<double>(i);
  const auto r7 = rolling_mean(line, 7);
  for (std::size_t i = 3; i + 3 < line.size(); ++i) CHECK(r7[i] == doctest::Approx(line[i]));
  CHECK(r7[0] == doctest::Approx((0 + 2 + 4 + 6) / 4.0));
  // Even window: one more sample on the right.
  const auto r4 = rolling_mean({1, 2, 3, 4, 5}, 4);
  CHECK(r4[1] == doctest::Approx((1 + 2 + 3 + 4) / 4.0));
  CHECK(rolling_mean({1.5}, 50)[0] == 1.5);
  CHECK_THROWS(rolling_mean({1.0}, 0));
}
