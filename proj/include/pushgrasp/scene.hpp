#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushgrasp/geometry.hpp"

namespace pushgrasp {

inline constexpr int kRotations = 16;
inline constexpr int kPaletteSize = 8;
// Palette entry reserved for the goal object (green). Never assigned to any
// other object, which makes color segmentation of the goal exact.
inline constexpr int kGoalColor = 0;

using Rgb = std::array<float, 3>;
const std::array<Rgb, kPaletteSize>& palette();

// Rotation k covers k * 22.5 degrees. The rotated observation for index k is
// the workspace image rotated clockwise (on screen) by that angle; the action
// axis is the rotated frame's +u axis, which maps back to this world
// direction: (cos a, -sin a), i.e. counterclockwise on screen by a.
double rotation_angle(int k);
Vec2 action_direction(int k);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GripperGeometry {
  double jaw_open_width = 0.10;
  double finger_thickness = 0.012;
  double finger_length = 0.05;
};

struct SizeRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SimConfig {
  double push_distance = 0.03;
  double pusher_radius = 0.01;
  double push_substep = 0.002;
  double contact_tolerance = 1e-6;
  int max_resolve_iterations = 50;
  GripperGeometry gripper;

  // Heights are normalized by this when rendering depth.
  double max_object_height = 0.08;
  SizeRange object_height{0.03, 0.07};
  SizeRange square_half{0.034, 0.040};
  SizeRange rect_short_half{0.028, 0.033};
  SizeRange rect_long_half{0.062, 0.075};
  SizeRange disc_radius{0.039, 0.044};

  // Sparse scenes (stage-1 training): uniform placement with a minimum gap.
  double sparse_region_lo = 0.2;
  double sparse_region_hi = 0.8;
  double sparse_min_gap = 0.04;

  // Packed scenes: jittered grid of identical bricks.
  double packed_short_half = 0.03;
  double packed_long_half = 0.075;
  double packed_gap = 0.003;
  double packed_jitter = 0.001;
  double packed_angle_jitter = 0.01;
  int packed_max_attempts = 100;

  // Failed grasps that land a finger on an object move that object.
  bool failed_grasp_disturbance = true;

  // Pile scenes: sequential drops near the center with radial settling.
  double pile_drop_noise = 0.05;
  double pile_settle_step = 0.005;

  // Raster resolution used for scene-change detection and grasp sweeps.
  int resolution = 64;
  int change_window = 24;
  double change_depth_threshold = 0.05;
  int change_pixel_threshold = 8;
};

struct ObjectBody {
  int id = 0;
  ShapeKind shape = ShapeKind::square;
  Vec2 half_extents = Vec2::Constant(0.04);
  double height = 0.05;
  Pose2 pose;
  int color_id = 1;
  bool is_goal = false;

  Footprint footprint() const;
  bool operator==(const ObjectBody&) const = default;
};

enum class Scenario { sparse, packed, pile, custom };

struct Scene {
  std::vector<ObjectBody> objects;
  Aabb workspace{Vec2(0.0, 0.0), Vec2(1.0, 1.0)};
  std::uint64_t rng_seed = 0;
  Scenario scenario = Scenario::custom;
  // Set by the packed generator once the exhaustive grasp sweep found no
  // feasible goal grasp.
  bool ungraspable_certificate = false;

  const ObjectBody* find(int id) const;
  const ObjectBody* goal() const;
  std::optional<int> goal_id() const;
  bool contains_point(const Vec2& p) const;
  bool operator==(const Scene& other) const;
};

const char* to_string(ShapeKind kind);
ShapeKind shape_from_string(const std::string& s);
const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

// Largest pairwise interpenetration depth (<= 0 when nothing overlaps).
double max_pairwise_penetration(const Scene& scene);

// Returns a copy where `new_goal_id` carries the goal flag and goal color.
// The former goal takes over the new goal's previous color.
Scene relabel_goal(const Scene& scene, int new_goal_id);

}  // namespace pushgrasp
