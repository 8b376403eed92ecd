#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pushgrasp/checkpoint.hpp"
#include "pushgrasp/policy.hpp"
#include "pushgrasp/sim.hpp"

namespace pushgrasp {

enum class Termination { goal_grasped, five_failures, action_cap, goal_lost };
const char* to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct EpisodeRecord {
  Scenario scenario = Scenario::packed;
  int n_objects = 0;
  std::uint64_t seed = 0;
  std::vector<ActionSpec> actions;
  int goal_grasp_attempts = 0;
  int goal_grasp_successes = 0;
  int push_count = 0;
  bool completed = false;
  Termination termination = Termination::action_cap;
};

struct ProtocolConfig {
  int max_consecutive_failures = 5;
  int action_cap = 30;
};

// Decides one action per observation. Returning no action counts as a
// failed goal grasp attempt.
class Agent {
 public:
  virtual ~Agent() = default;
  // Called at the start of every episode with that episode's scene seed.
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  virtual std::optional<ActionSpec> act(const Observation& obs, const RotatedStack& stack) = 0;
};

// Test-mode policy: output masking on, no exploration.
class GreedyAgent : public Agent {
 public:
  GreedyAgent(const NetworkPair& nets, double grasp_threshold);
  std::optional<ActionSpec> act(const Observation& obs, const RotatedStack& stack) override;

 private:
  const NetworkPair& nets_;
  double threshold_;
  std::mt19937_64 rng_;
};

// Uniformly random valid pixel: with probability `grasp_probability` a grasp
// drawn from the goal mask, otherwise a push drawn from the objects mask.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(double grasp_probability, std::uint64_t seed = 0);
  void reset(std::uint64_t episode_seed) override;
  std::optional<ActionSpec> act(const Observation& obs, const RotatedStack& stack) override;

 private:
  double grasp_probability_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

struct EvalEnv {
  SimConfig sim;
  int resolution = 64;
  ProtocolConfig protocol;
};

// Called with the scene before every decision and with the final scene.
using SceneObserver = std::function<void(const Scene&)>;

EpisodeRecord run_episode(const Scene& scene, Agent& agent, const EvalEnv& env,
                          const SceneObserver& observe = {});

struct Stat {
  double mean = 0.0;
  std::optional<double> stderr_mean;  // absent for a single sample
  int n = 0;
};

// mean and sample standard deviation / sqrt(n).
Stat mean_stderr(const std::vector<double>& values);

struct MetricsReport {
  Stat completion;
  Stat grasp_success;
  std::optional<Stat> motion_number;  // absent without completed runs
  int n_runs = 0;
};

Stat completion(const std::vector<EpisodeRecord>& records);
// Pooled over attempts: total successes / total attempts. The error is the
// standard error of the per-attempt outcomes.
Stat grasp_success(const std::vector<EpisodeRecord>& records);
// Pushes per completed run; failed runs are excluded.
std::optional<Stat> motion_number(const std::vector<EpisodeRecord>& records);
MetricsReport summarize(const std::vector<EpisodeRecord>& records);

struct BenchmarkResult {
  std::vector<EpisodeRecord> records;
  MetricsReport report;
};

std::uint64_t benchmark_scene_seed(std::uint64_t base_seed, int index);

BenchmarkResult run_benchmark(Agent& agent, Scenario scenario, int n_objects, int n_scenes,
                              std::uint64_t base_seed, const EvalEnv& env);

// ---- smoothing -------------------------------------------------------------

// y0 = x0, yt = factor * y(t-1) + (1 - factor) * xt.
std::vector<double> exponential_smooth(const std::vector<double>& xs, double factor = 0.9);
// Centered window (left (w-1)/2, right w-1-(w-1)/2), truncated at the edges.
std::vector<double> rolling_mean(const std::vector<double>& xs, int window);

// ---- serialization ---------------------------------------------------------

nlohmann::json to_json(const ActionSpec& a);
ActionSpec action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EpisodeRecord& r);
EpisodeRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Stat& s);
// Summary row {approach, scenario, n_objects, n_runs, C, GS, MN}.
nlohmann::json summary_json(const MetricsReport& m, const std::string& approach,
                            Scenario scenario, int n_objects);

}  // namespace pushgrasp
