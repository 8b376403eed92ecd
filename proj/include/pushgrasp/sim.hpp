#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pushgrasp/perception.hpp"
#include "pushgrasp/scene.hpp"

namespace pushgrasp {

struct PushCommand {
  Vec2 start = Vec2::Zero();
  int direction_index = 0;
  double distance = 0.03;
};

struct GraspCommand {
  Vec2 center = Vec2::Zero();
  int rotation_index = 0;
  GripperGeometry gripper;
};

// Half-open pixel rectangle [u0, u1) x [v0, v1).
struct PixelRect {
  int u0 = 0;
  int v0 = 0;
  int u1 = 0;
  int v1 = 0;
};

struct SceneChangeReport {
  bool changed = false;
  int changed_pixel_count = 0;
  PixelRect window;
};

struct PushOutcome {
  Scene scene;
  SceneChangeReport report;
  bool rejected = false;
  // Fraction of the commanded distance the pusher travelled before the push
  // jammed (1 when unobstructed).
  double travelled = 0.0;
};

enum class GraspFailure { none, out_of_bounds, empty, collision, too_wide };
const char* to_string(GraspFailure f);

struct GraspCheck {
  std::optional<int> object_id;  // set on success
  GraspFailure failure = GraspFailure::none;
  bool success() const { return object_id.has_value(); }
};

struct GraspOutcome {
  Scene scene;
  GraspCheck result;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Scene spawn_sparse_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg);
Scene spawn_packed_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg);
Scene spawn_pile_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg);
Scene spawn_scene(Scenario scenario, int n_objects, std::uint64_t seed,
                  const SimConfig& cfg);

PushOutcome step_push(const Scene& scene, const PushCommand& cmd, const SimConfig& cfg);

// Pure feasibility oracle: what step_grasp would do, without changing state.
GraspCheck evaluate_grasp(const Scene& scene, const GraspCommand& cmd);
// Removes the grasped object on success. With `cfg.failed_grasp_disturbance`
// a collision failure shoves the objects under the fingers aside.
GraspOutcome step_grasp(const Scene& scene, const GraspCommand& cmd, const SimConfig& cfg);

SceneChangeReport scene_change(const ImageF& depth_before, const ImageF& depth_after,
                               const Pixel& goal_centroid_px, const SimConfig& cfg);

// Grasp command for pixel (u, v) of rotation k.
GraspCommand grasp_command_at(int k, int u, int v, int resolution,
                              const GripperGeometry& gripper);

// Exhaustive sweep over every (k, u, v) grasp at `resolution`. Counts the
// actions that would grasp `target_id`.
struct GraspSweep {
  int feasible = 0;
  std::vector<int> feasible_per_rotation = std::vector<int>(kRotations, 0);
};
GraspSweep sweep_grasps(const Scene& scene, int target_id, int resolution,
                        const GripperGeometry& gripper);

}  // namespace pushgrasp
