#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pushgrasp/checkpoint.hpp"
#include "pushgrasp/nn/adam.hpp"
#include "pushgrasp/policy.hpp"
#include "pushgrasp/sim.hpp"

namespace pushgrasp {

// ---- rewards and targets -------------------------------------------------

enum class PushRewardSemantics { corrected, literal };
const char* to_string(PushRewardSemantics s);
PushRewardSemantics push_semantics_from_string(const std::string& s);

struct GraspReward {
  double reward = 0.0;
  int effective_goal_id = -1;
};

struct RewardComputer {
  double q_improvement_threshold = 0.1;
  double push_reward_positive = 0.5;
  double push_reward_negative = -0.5;
  PushRewardSemantics semantics = PushRewardSemantics::corrected;

  // With relabeling any successful grasp earns 1 and becomes the goal.
  GraspReward grasp_reward(const GraspCheck& result, int goal_id, bool relabeling) const;

  // corrected: +pos iff improvement > threshold and the scene changed,
  //            neg iff the scene did not change, 0 otherwise.
  // literal:   first matching row of (improvement > threshold and no change
  //            -> pos), (no change -> neg), (otherwise -> 0).
  double push_reward(double q_improved, const SceneChangeReport& change) const;
};

double q_improved(double q_pre, double q_post);

// Goal-masked grasp maximum used inside rewards and targets: 0 when the goal
// has no visible pixels.
double reward_grasp_q(const QMapStack& grasp_q, const RotatedStack& stack);

struct TDConfig {
  double discount = 0.5;
  bool grasp_terminal = true;
  double huber_delta = 1.0;
};

// ---- transitions and replay ----------------------------------------------

struct Transition {
  Scene scene;       // state the action was taken in (goal flag as stored)
  Scene next_scene;
  int goal_id = -1;  // effective goal; observations are rendered for it
  ActionSpec action;
  double reward = 0.0;
  bool terminal = false;
  std::string stage_tag;

  // Fields the reward is recomputed from.
  int original_goal_id = -1;
  bool relabeled = false;
  GraspCheck grasp;
  double q_pre = 0.0;
  double q_post = 0.0;
  SceneChangeReport change;
  PushRewardSemantics semantics = PushRewardSemantics::corrected;

  // Goal-masked grasp maximum of the next observation (0 when terminal or
  // the goal is not visible), recorded when the transition was collected.
  double next_grasp_q_max = 0.0;
};

double recompute_reward(const Transition& t, const RewardComputer& rewards);

double td_target(const Transition& t, double next_grasp_q_max, const TDConfig& cfg);

// Rotated view k of the transition's state, rendered for its effective goal.
RotatedView transition_view(const Transition& t, int resolution, double max_object_height);

// FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  // Oldest first.
  const Transition& at(std::size_t i) const { return items_[i]; }
  const Transition& newest() const { return items_.back(); }
  std::size_t newest_index() const { return items_.size() - 1; }
  // Indices drawn uniformly with replacement.
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;
  void erase(std::size_t i);

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

// ---- optimization ----------------------------------------------------------

struct TrainItem {
  const RotatedView* view = nullptr;  // rotation matching pixel's k
  int u = 0;
  int v = 0;
  double target = 0.0;
};

struct TrainResult {
  double loss = 0.0;
  bool rejected = false;  // non-finite loss or gradient; weights untouched
  std::vector<double> predictions;
};

// Executed-pixel Huber loss averaged over the batch, then one Adam update.
TrainResult train_step(QNet& net, nn::Adam<float>& opt, const std::vector<TrainItem>& batch,
                       double huber_delta);

// ---- curriculum -----------------------------------------------------------

enum class Stage { grasp_agnostic, grasp_explore, push_training, alternating };
const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);
int stage_index(Stage s);

struct StagePlan {
  Stage stage = Stage::grasp_agnostic;
  Scenario scenario = Scenario::sparse;
  int n_objects = 5;
  int episode_budget = 400;
  bool relabeling = true;
  bool grasp_net_frozen = false;
  int max_pushes_per_episode = 5;
  // Alternating stage: episodes end after this many actions.
  int max_actions_per_episode = 20;

  void validate() const;
};

StagePlan default_plan(Stage stage);

struct LearnConfig {
  RewardComputer rewards;
  TDConfig td;
  nn::AdamConfig adam;
  ExplorationSchedule exploration;
  int batch_size = 4;
  int replay_capacity = 5000;
  int checkpoint_every = 50;
  std::array<int, 4> budgets = {400, 400, 200, 200};
  int max_pushes_per_episode = 5;
  int alternating_max_actions = 20;
  // Grasp threshold calibration ("auto" mode).
  int calibration_scenes = 60;
  double calibration_precision = 0.8;

  StagePlan plan(Stage stage) const;
};

// One JSON object per log record.
using LogSink = std::function<void(const nlohmann::json&)>;

struct StageProgress {
  Stage stage = Stage::grasp_agnostic;
  int episodes_done = 0;  // episodes [0, episodes_done) are complete
  long long actions = 0;  // global action counter driving epsilon
  bool stage_end = false;
};

struct TrainingContext {
  SimConfig sim;
  NetworkConfig net;
  LearnConfig learn;
  NetworkPair* nets = nullptr;
  ReplayBuffer grasp_buffer;
  ReplayBuffer push_buffer;
  std::mt19937_64 rng;
  std::uint64_t base_seed = 0;
  long long actions = 0;
  double grasp_threshold = 1.8;
  std::string run_id = "run";
  LogSink log;
  std::function<void(const StageProgress&)> checkpoint;

  TrainingContext(const SimConfig& sim_cfg, const NetworkConfig& net_cfg,
                  const LearnConfig& learn_cfg, NetworkPair& networks, std::uint64_t seed);
};

struct StageReport {
  Stage stage = Stage::grasp_agnostic;
  int episodes = 0;
  int grasp_attempts = 0;
  int grasp_successes = 0;   // goal grasped
  int pushes = 0;
  int quarantined = 0;
  std::vector<int> episode_success;  // per episode: goal grasped
  std::uint64_t grasp_hash_before = 0;
  std::uint64_t grasp_hash_after = 0;
  bool stopped_early = false;
};

std::uint64_t episode_seed(std::uint64_t base_seed, Stage stage, int episode);

// Runs episodes [first_episode, plan.episode_budget). `stop_after` > 0 stops
// after that many episodes of this call (for interruption tests).
StageReport run_stage(const StagePlan& plan, TrainingContext& ctx, int first_episode = 0,
                      int stop_after = 0);

struct CalibrationResult {
  double threshold = 0.0;
  double precision = 0.0;
  int samples = 0;
  int above = 0;
  bool fallback = false;  // no threshold reached the target precision
};

struct CalibrationSample {
  double q = 0.0;     // goal-masked grasp-Q maximum
  bool success = false;  // the greedy goal grasp at that maximum would succeed
};

// Lowest threshold whose samples above it reach `target_precision` (with at
// least three samples above). Falls back to the largest q, or to `fallback`
// without samples.
CalibrationResult choose_threshold(std::vector<CalibrationSample> samples,
                                   double target_precision, double fallback);

// Sparse and packed scenes; packed scenes add the states reached by pushing:
// random pushes when `push_net` is null, otherwise up to five greedy pushes.
std::vector<CalibrationSample> calibration_samples(const QNet& grasp_net, const QNet* push_net,
                                                   const SimConfig& sim, int n_scenes,
                                                   std::uint64_t seed);

CalibrationResult calibrate_grasp_threshold(const QNet& grasp_net, const QNet* push_net,
                                            const SimConfig& sim, int n_scenes,
                                            std::uint64_t seed, double target_precision,
                                            double fallback);

}  // namespace pushgrasp
