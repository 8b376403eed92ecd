#include "pushgrasp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace pushgrasp {

namespace {

constexpr double kResolveEpsilon = 1e-10;
constexpr int kSparsePlacementTries = 4000;
constexpr int kPileSettleIterations = 20000;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, const SizeRange& r) { return uniform(rng, r.lo, r.hi); }

int non_goal_color(std::mt19937_64& rng) {
  return std::uniform_int_distribution<int>(1, kPaletteSize - 1)(rng);
}

double bounding_radius(const Footprint& f) {
  return f.is_disc() ? f.radius() : f.half_extents.norm();
}

bool inside_workspace(const Scene& scene, const Footprint& f) {
  const Aabb b = bounds(f);
  return b.lo.x() >= scene.workspace.lo.x() && b.lo.y() >= scene.workspace.lo.y() &&
         b.hi.x() <= scene.workspace.hi.x() && b.hi.y() <= scene.workspace.hi.y();
}

ObjectBody random_body(std::mt19937_64& rng, const SimConfig& cfg, int id) {
  ObjectBody body;
  body.id = id;
  const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
  switch (kind) {
    case 0: {
      body.shape = ShapeKind::square;
      body.half_extents = Vec2::Constant(uniform(rng, cfg.square_half));
      break;
    }
    case 1: {
      body.shape = ShapeKind::rectangle;
      const double s = uniform(rng, cfg.rect_short_half);
      const double l = uniform(rng, cfg.rect_long_half);
      body.half_extents = Vec2(s, l);
      break;
    }
    default: {
      body.shape = ShapeKind::disc;
      body.half_extents = Vec2::Constant(uniform(rng, cfg.disc_radius));
      break;
    }
  }
  body.height = uniform(rng, cfg.object_height);
  body.pose.theta = uniform(rng, 0.0, std::numbers::pi);
  body.color_id = non_goal_color(rng);
  return body;
}

void assign_goal(Scene& scene, int index) {
  auto& goal = scene.objects[static_cast<std::size_t>(index)];
  goal.is_goal = true;
  goal.color_id = kGoalColor;
}

// Moves every object overlapping the pusher forward along `dir`, then
// resolves object-object overlaps by sequential projection in ascending id
// order. Returns false when the configuration cannot be made valid (jam
// against the workspace boundary or unresolved overlap).
bool advance_pusher(Scene& scene, const Footprint& pusher, const Vec2& dir,
                    const SimConfig& cfg) {
  auto& objs = scene.objects;
  std::vector<char> active(objs.size(), 0);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const Footprint f = objs[i].footprint();
    if (penetration(pusher, f) <= kResolveEpsilon) continue;
    const double t = separation_along(pusher, f, dir);
    objs[i].pose.x += t * dir.x();
    objs[i].pose.y += t * dir.y();
    active[i] = 1;
  }
  bool clean = false;
  for (int iter = 0; iter < cfg.max_resolve_iterations && !clean; ++iter) {
    clean = true;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        const Footprint fi = objs[i].footprint();
        const Footprint fj = objs[j].footprint();
        if ((fi.center - fj.center).norm() > bounding_radius(fi) + bounding_radius(fj)) {
          continue;
        }
        if (penetration(fi, fj) <= kResolveEpsilon) continue;
        std::size_t mover = j;
        if (active[i] != active[j]) {
          mover = active[i] ? j : i;
        } else {
          const double pi = fi.center.dot(dir);
          const double pj = fj.center.dot(dir);
          mover = pi > pj ? i : j;
        }
        const std::size_t other = mover == i ? j : i;
        const double t = separation_along(objs[other].footprint(), objs[mover].footprint(), dir);
        objs[mover].pose.x += t * dir.x();
        objs[mover].pose.y += t * dir.y();
        active[mover] = 1;
        clean = false;
      }
    }
  }
  for (const auto& o : objs) {
    if (!inside_workspace(scene, o.footprint())) return false;
  }
  return max_pairwise_penetration(scene) <= cfg.contact_tolerance;
}

}  // namespace

const char* to_string(GraspFailure f) {
  switch (f) {
    case GraspFailure::none: return "none";
    case GraspFailure::out_of_bounds: return "out_of_bounds";
    case GraspFailure::empty: return "empty";
    case GraspFailure::collision: return "collision";
    case GraspFailure::too_wide: return "too_wide";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Scene spawn_sparse_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg) {
  if (n_objects < 1) throw ConfigError("sparse scene needs at least one object");
  std::mt19937_64 rng(derive_seed(seed, 0x5a));
  Scene scene;
  scene.rng_seed = seed;
  scene.scenario = Scenario::sparse;
  for (int i = 0; i < n_objects; ++i) {
    ObjectBody body = random_body(rng, cfg, i);
    bool placed = false;
    for (int attempt = 0; attempt < kSparsePlacementTries && !placed; ++attempt) {
      body.pose.x = uniform(rng, cfg.sparse_region_lo, cfg.sparse_region_hi);
      body.pose.y = uniform(rng, cfg.sparse_region_lo, cfg.sparse_region_hi);
      const Footprint f = body.footprint();
      if (!inside_workspace(scene, f)) continue;
      placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const ObjectBody& o) {
        return penetration(o.footprint(), f) <= -cfg.sparse_min_gap;
      });
    }
    if (!placed) {
      throw ConfigError("could not place " + std::to_string(n_objects) +
                        " objects in the sparse region with the configured gap");
    }
    scene.objects.push_back(body);
  }
  assign_goal(scene, std::uniform_int_distribution<int>(0, n_objects - 1)(rng));
  return scene;
}

Scene spawn_packed_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg) {
  if (n_objects < 2) throw ConfigError("packed scene needs at least two objects");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_objects))));
  const int rows = (n_objects + cols - 1) / cols;
  struct Cell {
    int c;
    int r;
    double d2;
  };
  std::vector<Cell> cells;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double dc = c - (cols - 1) * 0.5;
      const double dr = r - (rows - 1) * 0.5;
      cells.push_back({c, r, dc * dc + dr * dr});
    }
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.d2 < b.d2; });
  cells.resize(static_cast<std::size_t>(n_objects));
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  auto occupied = [&](int c, int r) {
    return std::any_of(cells.begin(), cells.end(),
                       [&](const Cell& x) { return x.c == c && x.r == r; });
  };
  // The goal is the cell most enclosed along the bricks' short axis (the only
  // axis a parallel jaw can close on).
  int goal_index = 0;
  int best_score = -1;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    const int horizontal = occupied(cell.c - 1, cell.r) + occupied(cell.c + 1, cell.r);
    const int vertical = occupied(cell.c, cell.r - 1) + occupied(cell.c, cell.r + 1);
    const int score = horizontal * 10 + vertical;
    if (score > best_score) {
      best_score = score;
      goal_index = static_cast<int>(i);
    }
  }

  const double pitch_x = 2.0 * cfg.packed_short_half + cfg.packed_gap;
  const double pitch_y = 2.0 * cfg.packed_long_half + cfg.packed_gap;
  for (int attempt = 0; attempt < cfg.packed_max_attempts; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, 0x100 + static_cast<std::uint64_t>(attempt)));
    Scene scene;
    scene.rng_seed = seed;
    scene.scenario = Scenario::packed;
    const double layout_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec2 origin(0.5 + uniform(rng, -0.05, 0.05), 0.5 + uniform(rng, -0.05, 0.05));
    const Eigen::Matrix2d r = rotation(layout_angle);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      ObjectBody body;
      body.id = static_cast<int>(i);
      body.shape = ShapeKind::rectangle;
      body.half_extents = Vec2(cfg.packed_short_half, cfg.packed_long_half);
      body.height = uniform(rng, cfg.object_height);
      const Vec2 local((cells[i].c - (cols - 1) * 0.5) * pitch_x +
                           uniform(rng, -cfg.packed_jitter, cfg.packed_jitter),
                       (cells[i].r - (rows - 1) * 0.5) * pitch_y +
                           uniform(rng, -cfg.packed_jitter, cfg.packed_jitter));
      const Vec2 world = origin + r * local;
      body.pose = {world.x(), world.y(),
                   layout_angle + uniform(rng, -cfg.packed_angle_jitter, cfg.packed_angle_jitter)};
      body.color_id = non_goal_color(rng);
      scene.objects.push_back(body);
    }
    assign_goal(scene, goal_index);
    const bool in_bounds = std::all_of(scene.objects.begin(), scene.objects.end(),
                                       [&](const ObjectBody& o) {
                                         return inside_workspace(scene, o.footprint());
                                       });
    if (!in_bounds || max_pairwise_penetration(scene) > 0.0) continue;
    const GraspSweep sweep =
        sweep_grasps(scene, scene.objects[static_cast<std::size_t>(goal_index)].id,
                     cfg.resolution, cfg.gripper);
    if (sweep.feasible == 0) {
      scene.ungraspable_certificate = true;
      return scene;
    }
  }
  throw ConfigError("packed scene with " + std::to_string(n_objects) +
                    " objects: no ungraspable-goal layout after " +
                    std::to_string(cfg.packed_max_attempts) +
                    " attempts (object size vs count inconsistent)");
}

Scene spawn_pile_scene(int n_objects, std::uint64_t seed, const SimConfig& cfg) {
  if (n_objects < 1) throw ConfigError("pile scene needs at least one object");
  std::mt19937_64 rng(derive_seed(seed, 0x9e));
  Scene scene;
  scene.rng_seed = seed;
  scene.scenario = Scenario::pile;
  const Vec2 center = 0.5 * (scene.workspace.lo + scene.workspace.hi);
  for (int i = 0; i < n_objects; ++i) {
    ObjectBody body = random_body(rng, cfg, i);
    // Uniform drop point inside a disc of radius pile_drop_noise.
    const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double rad = cfg.pile_drop_noise * std::sqrt(uniform(rng, 0.0, 1.0));
    Vec2 pos = center + rad * Vec2(std::cos(a), std::sin(a));
    Vec2 out_dir = pos - center;
    if (out_dir.norm() < 1e-9) {
      const double b = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      out_dir = Vec2(std::cos(b), std::sin(b));
    }
    out_dir.normalize();
    for (int it = 0; it < kPileSettleIterations; ++it) {
      body.pose.x = pos.x();
      body.pose.y = pos.y();
      const Footprint f = body.footprint();
      const bool overlapping =
          std::any_of(scene.objects.begin(), scene.objects.end(), [&](const ObjectBody& o) {
            return penetration(o.footprint(), f) > 0.0;
          });
      if (!overlapping) break;
      pos += cfg.pile_settle_step * out_dir;
    }
    scene.objects.push_back(body);
  }
  assign_goal(scene, std::uniform_int_distribution<int>(0, n_objects - 1)(rng));
  return scene;
}

Scene spawn_scene(Scenario scenario, int n_objects, std::uint64_t seed,
                  const SimConfig& cfg) {
  switch (scenario) {
    case Scenario::sparse: return spawn_sparse_scene(n_objects, seed, cfg);
    case Scenario::packed: return spawn_packed_scene(n_objects, seed, cfg);
    case Scenario::pile: return spawn_pile_scene(n_objects, seed, cfg);
    case Scenario::custom: break;
  }
  throw ConfigError("cannot generate a 'custom' scenario");
}

PushOutcome step_push(const Scene& scene, const PushCommand& cmd, const SimConfig& cfg) {
  PushOutcome out;
  out.scene = scene;
  if (!scene.contains_point(cmd.start) || cmd.direction_index < 0 ||
      cmd.direction_index >= kRotations || cmd.distance < 0.0) {
    out.rejected = true;
    return out;
  }
  const Vec2 dir = action_direction(cmd.direction_index);
  const int substeps =
      std::max(1, static_cast<int>(std::ceil(cmd.distance / cfg.push_substep - 1e-9)));
  Scene current = scene;
  int done = 0;
  for (int s = 1; s <= substeps; ++s) {
    const Vec2 p = cmd.start + dir * (cmd.distance * s / substeps);
    Scene trial = current;
    if (!advance_pusher(trial, disc(p, cfg.pusher_radius), dir, cfg)) break;
    current = std::move(trial);
    done = s;
  }
  out.travelled = static_cast<double>(done) / substeps;
  Pixel goal_px = world_to_pixel(Vec2(0.5, 0.5), cfg.resolution);
  if (const auto* g = scene.goal()) goal_px = world_to_pixel(g->pose.position(), cfg.resolution);
  out.report = scene_change(render_depth(scene, cfg.resolution, cfg.max_object_height),
                            render_depth(current, cfg.resolution, cfg.max_object_height),
                            goal_px, cfg);
  out.scene = std::move(current);
  return out;
}

namespace {

struct GripperLayout {
  Vec2 axis;
  Footprint closing;
  Footprint finger_a;  // on the +axis side
  Footprint finger_b;
  double reach = 0.0;
};

GripperLayout gripper_layout(const GraspCommand& cmd) {
  const GripperGeometry& g = cmd.gripper;
  GripperLayout l;
  l.axis = action_direction(cmd.rotation_index);
  const double angle = std::atan2(l.axis.y(), l.axis.x());
  l.closing = oriented_box(cmd.center, angle, Vec2(0.5 * g.jaw_open_width, 0.5 * g.finger_length));
  const double finger_offset = 0.5 * (g.jaw_open_width + g.finger_thickness);
  const Vec2 finger_half(0.5 * g.finger_thickness, 0.5 * g.finger_length);
  l.finger_a = oriented_box(cmd.center + finger_offset * l.axis, angle, finger_half);
  l.finger_b = oriented_box(cmd.center - finger_offset * l.axis, angle, finger_half);
  l.reach = Vec2(finger_offset + 0.5 * g.finger_thickness, 0.5 * g.finger_length).norm();
  return l;
}

}  // namespace

GraspCheck evaluate_grasp(const Scene& scene, const GraspCommand& cmd) {
  GraspCheck check;
  if (!scene.contains_point(cmd.center) || cmd.rotation_index < 0 ||
      cmd.rotation_index >= kRotations) {
    check.failure = GraspFailure::out_of_bounds;
    return check;
  }
  const GripperGeometry& g = cmd.gripper;
  const GripperLayout l = gripper_layout(cmd);
  const Vec2& axis = l.axis;
  const Footprint& closing = l.closing;
  const Footprint& finger_a = l.finger_a;
  const Footprint& finger_b = l.finger_b;
  const double reach = l.reach;

  const ObjectBody* best = nullptr;
  double best_area = 0.0;
  bool collision = false;
  for (const auto& o : scene.objects) {
    const Footprint f = o.footprint();
    if ((f.center - cmd.center).norm() > reach + bounding_radius(f)) continue;
    if (penetration(finger_a, f) > kResolveEpsilon || penetration(finger_b, f) > kResolveEpsilon) {
      collision = true;
    }
    if (penetration(closing, f) > kResolveEpsilon) {
      const double area = intersection_area(closing, f);
      if (area > best_area) {
        best_area = area;
        best = &o;
      }
    }
  }
  if (best == nullptr) {
    check.failure = GraspFailure::empty;
  } else if (collision) {
    check.failure = GraspFailure::collision;
  } else if (extent_along(best->footprint(), axis) > g.jaw_open_width) {
    check.failure = GraspFailure::too_wide;
  } else {
    check.object_id = best->id;
  }
  return check;
}

GraspOutcome step_grasp(const Scene& scene, const GraspCommand& cmd, const SimConfig& cfg) {
  GraspOutcome out{scene, evaluate_grasp(scene, cmd)};
  if (out.result.success()) {
    const int id = *out.result.object_id;
    std::erase_if(out.scene.objects, [&](const ObjectBody& o) { return o.id == id; });
  } else if (out.result.failure == GraspFailure::collision && cfg.failed_grasp_disturbance) {
    // A finger that comes down on an object wedges it outwards until the
    // finger clears it. A side that would jam is left as it was.
    const GripperLayout l = gripper_layout(cmd);
    for (const auto& [finger, dir] : {std::pair{l.finger_a, l.axis}, std::pair{l.finger_b, Vec2(-l.axis)}}) {
      Scene trial = out.scene;
      if (advance_pusher(trial, finger, dir, cfg)) out.scene = std::move(trial);
    }
  }
  return out;
}

SceneChangeReport scene_change(const ImageF& depth_before, const ImageF& depth_after,
                               const Pixel& goal_centroid_px, const SimConfig& cfg) {
  if (depth_before.rows() != depth_after.rows() || depth_before.cols() != depth_after.cols()) {
    throw std::invalid_argument("scene_change: depth grids differ in shape");
  }
  const int h = static_cast<int>(depth_before.rows());
  const int w = static_cast<int>(depth_before.cols());
  SceneChangeReport report;
  const int half = cfg.change_window / 2;
  report.window.u0 = std::clamp(goal_centroid_px.u - half, 0, w);
  report.window.v0 = std::clamp(goal_centroid_px.v - half, 0, h);
  report.window.u1 = std::clamp(goal_centroid_px.u - half + cfg.change_window, 0, w);
  report.window.v1 = std::clamp(goal_centroid_px.v - half + cfg.change_window, 0, h);
  const auto& win = report.window;
  if (win.u1 > win.u0 && win.v1 > win.v0) {
    const auto diff = (depth_after.block(win.v0, win.u0, win.v1 - win.v0, win.u1 - win.u0) -
                       depth_before.block(win.v0, win.u0, win.v1 - win.v0, win.u1 - win.u0))
                          .abs();
    report.changed_pixel_count =
        static_cast<int>((diff > static_cast<float>(cfg.change_depth_threshold)).count());
  }
  report.changed = report.changed_pixel_count >= cfg.change_pixel_threshold;
  return report;
}

GraspCommand grasp_command_at(int k, int u, int v, int resolution,
                              const GripperGeometry& gripper) {
  const DecodedAction a = decode_action(k, u, v, resolution);
  return {a.position, k, gripper};
}

GraspSweep sweep_grasps(const Scene& scene, int target_id, int resolution,
                        const GripperGeometry& gripper) {
  GraspSweep sweep;
  const ObjectBody* target = scene.find(target_id);
  if (target == nullptr) return sweep;
  const Footprint tf = target->footprint();
  const double reach =
      bounding_radius(tf) +
      Vec2(0.5 * gripper.jaw_open_width + gripper.finger_thickness, 0.5 * gripper.finger_length)
          .norm();
  for (int k = 0; k < kRotations; ++k) {
    for (int v = 0; v < resolution; ++v) {
      for (int u = 0; u < resolution; ++u) {
        const GraspCommand cmd = grasp_command_at(k, u, v, resolution, gripper);
        if ((cmd.center - tf.center).norm() > reach) continue;
        const GraspCheck check = evaluate_grasp(scene, cmd);
        if (check.success() && *check.object_id == target_id) {
          ++sweep.feasible;
          ++sweep.feasible_per_rotation[static_cast<std::size_t>(k)];
        }
      }
    }
  }
  return sweep;
}

}  // namespace pushgrasp
