#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pushgrasp/sim.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;
using pgtest::box;
using pgtest::scene_of;

namespace {

struct Rect {
  double x0, x1, y0, y1;
};

double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

bool open_overlap(const Rect& a, const Rect& b) {
  return overlap_1d(a.x0, a.x1, b.x0, b.x1) > 1e-9 && overlap_1d(a.y0, a.y1, b.y0, b.y1) > 1e-9;
}

// Independent grasp oracle for axis-aligned boxes and a horizontal jaw axis
// (rotation 0 or 8): closing region, finger pads and width test written out
// as intervals.
GraspCheck axis_aligned_grasp(const Scene& scene, const Vec2& c, const GripperGeometry& g) {
  GraspCheck out;
  if (!scene.contains_point(c)) {
    out.failure = GraspFailure::out_of_bounds;
    return out;
  }
  const double hw = 0.5 * g.jaw_open_width;
  const double hl = 0.5 * g.finger_length;
  const Rect closing{c.x() - hw, c.x() + hw, c.y() - hl, c.y() + hl};
  const Rect left{c.x() - hw - g.finger_thickness, c.x() - hw, c.y() - hl, c.y() + hl};
  const Rect right{c.x() + hw, c.x() + hw + g.finger_thickness, c.y() - hl, c.y() + hl};
  const ObjectBody* best = nullptr;
  double best_area = 0.0;
  bool collision = false;
  for (const auto& o : scene.objects) {
    const Rect r{o.pose.x - o.half_extents.x(), o.pose.x + o.half_extents.x(),
                 o.pose.y - o.half_extents.y(), o.pose.y + o.half_extents.y()};
    if (open_overlap(r, left) || open_overlap(r, right)) collision = true;
    const double area = overlap_1d(r.x0, r.x1, closing.x0, closing.x1) *
                        overlap_1d(r.y0, r.y1, closing.y0, closing.y1);
    if (open_overlap(r, closing) && area > best_area) {
      best_area = area;
      best = &o;
    }
  }
  if (best == nullptr) {
    out.failure = GraspFailure::empty;
  } else if (collision) {
    out.failure = GraspFailure::collision;
  } else if (2.0 * best->half_extents.x() > g.jaw_open_width) {
    out.failure = GraspFailure::too_wide;
  } else {
    out.object_id = best->id;
  }
  return out;
}

}  // namespace

TEST_CASE("scene generation is deterministic per seed") {
  const SimConfig sim;
  for (Scenario s : {Scenario::sparse, Scenario::packed, Scenario::pile}) {
    const Scene a = spawn_scene(s, s == Scenario::pile ? 10 : 5, 1234, sim);
    const Scene b = spawn_scene(s, s == Scenario::pile ? 10 : 5, 1234, sim);
    const Scene c = spawn_scene(s, s == Scenario::pile ? 10 : 5, 1235, sim);
    CHECK(a == b);
    CHECK_FALSE(a == c);
  }
}

TEST_CASE("generated scenes: one goal, inside the workspace, no interpenetration") {
  const SimConfig sim;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 30; ++i) {
    const Scene s = pgtest::any_scene(rng, sim);
    int goals = 0;
    for (const auto& o : s.objects) {
      if (o.is_goal) {
        ++goals;
        CHECK(o.color_id == kGoalColor);
      } else {
        CHECK(o.color_id != kGoalColor);
      }
      const Aabb b = bounds(o.footprint());
      CHECK(b.lo.x() >= -1e-9);
      CHECK(b.lo.y() >= -1e-9);
      CHECK(b.hi.x() <= 1 + 1e-9);
      CHECK(b.hi.y() <= 1 + 1e-9);
    }
    CHECK(goals == 1);
    CHECK(max_pairwise_penetration(s) <= 1e-6);
  }
}

TEST_CASE("requested object counts are honored") {
  const SimConfig sim;
  for (int n : {10, 15, 20}) CHECK(spawn_pile_scene(n, 3, sim).objects.size() == std::size_t(n));
  CHECK(spawn_sparse_scene(5, 3, sim).objects.size() == 5);
  CHECK(spawn_packed_scene(5, 3, sim).objects.size() == 5);
  CHECK_THROWS_AS(spawn_pile_scene(0, 3, sim), ConfigError);
}

TEST_CASE("grasp oracle agrees with an interval oracle on axis-aligned boxes") {
  const GripperGeometry g;
  std::mt19937_64 rng(99);
  int successes = 0;
  int collisions = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<ObjectBody> objs;
    const int n = pgtest::uniform_int(rng, 1, 3);
    for (int i = 0; i < n; ++i) {
      const double hx = pgtest::uniform(rng, 0.02, 0.07);
      const double hy = pgtest::uniform(rng, 0.02, 0.07);
      objs.push_back(box(i, pgtest::uniform(rng, 0.3, 0.7), pgtest::uniform(rng, 0.3, 0.7), 0.0,
                         hx, hy, i == 0));
    }
    const Scene s = scene_of(objs);
    // Half the trials aim near an object so successes are common.
    Vec2 c(pgtest::uniform(rng, 0.3, 0.7), pgtest::uniform(rng, 0.3, 0.7));
    if (trial % 2 == 0) {
      const auto& o = objs[static_cast<std::size_t>(pgtest::uniform_int(rng, 0, n - 1))];
      c = Vec2(o.pose.x + pgtest::uniform(rng, -0.01, 0.01), o.pose.y + pgtest::uniform(rng, -0.01, 0.01));
    }
    const GraspCheck expected = axis_aligned_grasp(s, c, g);
    for (int k : {0, 8}) {
      const GraspCheck got = evaluate_grasp(s, GraspCommand{c, k, g});
      CHECK(got.object_id == expected.object_id);
      CHECK(got.failure == expected.failure);
    }
    successes += expected.success();
    collisions += expected.failure == GraspFailure::collision;
  }
  // The generator must exercise both outcomes.
  CHECK(successes > 20);
  CHECK(collisions > 20);
}

TEST_CASE("grasp outcomes on hand-built scenes") {
  const GripperGeometry g;
  const Scene lone = scene_of({box(0, 0.5, 0.5, 0.0, 0.035, 0.035, true)});
  CHECK(step_grasp(lone, GraspCommand{Vec2(0.5, 0.5), 0, g}, SimConfig{}).result.object_id == 0);
  CHECK(step_grasp(lone, GraspCommand{Vec2(0.5, 0.5), 0, g}, SimConfig{}).scene.objects.empty());
  CHECK(evaluate_grasp(lone, GraspCommand{Vec2(0.2, 0.2), 0, g}).failure == GraspFailure::empty);
  CHECK(evaluate_grasp(lone, GraspCommand{Vec2(1.2, 0.5), 0, g}).failure ==
        GraspFailure::out_of_bounds);

  // Long rectangle: closing across the long side puts a finger on it, across
  // the short side fits.
  const Scene brick = scene_of({box(0, 0.5, 0.5, 0.0, 0.07, 0.03, true)});
  CHECK(evaluate_grasp(brick, GraspCommand{Vec2(0.5, 0.5), 0, g}).failure ==
        GraspFailure::collision);
  // A diamond whose corners pass beside the fingers is wider than the jaw.
  const Scene diamond =
      scene_of({box(0, 0.5, 0.55, std::numbers::pi / 4.0, 0.04, 0.04, true)});
  CHECK(evaluate_grasp(diamond, GraspCommand{Vec2(0.5, 0.5), 0, g}).failure ==
        GraspFailure::too_wide);
  CHECK(evaluate_grasp(brick, GraspCommand{Vec2(0.5, 0.5), 4, g}).object_id == 0);

  // A neighbor where the finger lands blocks the grasp.
  const Scene blocked = scene_of({box(0, 0.5, 0.5, 0.0, 0.035, 0.035, true),
                                  box(1, 0.5 + 0.035 + 0.025 + 0.03, 0.5, 0.0, 0.03, 0.03)});
  CHECK(evaluate_grasp(blocked, GraspCommand{Vec2(0.5, 0.5), 0, g}).failure ==
        GraspFailure::collision);
  CHECK(evaluate_grasp(blocked, GraspCommand{Vec2(0.5, 0.5), 4, g}).object_id == 0);
  SimConfig still;
  still.failed_grasp_disturbance = false;
  CHECK(step_grasp(blocked, GraspCommand{Vec2(0.5, 0.5), 0, g}, still).scene == blocked);
}

TEST_CASE("a finger landing on a neighbor wedges it just clear of the finger") {
  const GripperGeometry g;
  const SimConfig sim;
  const double x1 = 0.5 + 0.035 + 0.025 + 0.03;
  const Scene blocked = scene_of({box(0, 0.5, 0.5, 0.0, 0.035, 0.035, true),
                                  box(1, x1, 0.5, 0.0, 0.03, 0.03)});
  const GraspCommand cmd{Vec2(0.5, 0.5), 0, g};
  const GraspOutcome out = step_grasp(blocked, cmd, sim);
  REQUIRE(out.result.failure == GraspFailure::collision);
  REQUIRE(out.scene.objects.size() == 2);
  // The finger's outer face is at 0.5 + 0.05 + 0.012.
  const double finger_outer = 0.5 + 0.5 * g.jaw_open_width + g.finger_thickness;
  CHECK(out.scene.objects[1].pose.x - 0.03 == doctest::Approx(finger_outer).epsilon(1e-9));
  CHECK(out.scene.objects[1].pose.y == 0.5);
  CHECK(out.scene.objects[0].pose == blocked.objects[0].pose);
  // Retrying the same grasp now succeeds.
  CHECK(evaluate_grasp(out.scene, cmd).object_id == 0);
  // Non-collision failures never move anything.
  const GraspOutcome empty = step_grasp(blocked, GraspCommand{Vec2(0.2, 0.2), 0, g}, sim);
  CHECK(empty.scene == blocked);
}

TEST_CASE("grasp commands decode the pixel center") {
  const GripperGeometry g;
  const GraspCommand c = grasp_command_at(0, 10, 20, 64, g);
  CHECK(c.center.x() == doctest::Approx(10.5 / 64));
  CHECK(c.center.y() == doctest::Approx(20.5 / 64));
  CHECK(c.rotation_index == 0);
}

TEST_CASE("a push moves the contacted object along the push direction") {
  SimConfig sim;
  const Scene s = scene_of({box(0, 0.5, 0.5, 0.0, 0.03, 0.03, true),
                            box(1, 0.2, 0.8, 0.0, 0.03, 0.03)});
  // Start left of the goal, push right (k = 0).
  const PushOutcome out = step_push(s, PushCommand{Vec2(0.44, 0.5), 0, 0.03}, sim);
  const ObjectBody* goal = out.scene.find(0);
  REQUIRE(goal != nullptr);
  CHECK(goal->pose.x > 0.5);
  CHECK(goal->pose.x <= 0.5 + 0.03 + 1e-9);
  CHECK(goal->pose.y == doctest::Approx(0.5));
  // Far object untouched.
  CHECK(*out.scene.find(1) == *s.find(1));
  CHECK(out.report.changed);
}

TEST_CASE("push direction follows the rotation index") {
  SimConfig sim;
  const Scene s = scene_of({box(0, 0.5, 0.5, 0.0, 0.03, 0.03, true)});
  // k = 4: action axis (0, -1), i.e. upward on screen.
  const PushOutcome out = step_push(s, PushCommand{Vec2(0.5, 0.56), 4, 0.03}, sim);
  CHECK(out.scene.find(0)->pose.y < 0.5);
  CHECK(out.scene.find(0)->pose.x == doctest::Approx(0.5));
}

TEST_CASE("pushing empty space changes nothing") {
  SimConfig sim;
  const Scene s = scene_of({box(0, 0.5, 0.5, 0.0, 0.03, 0.03, true)});
  const PushOutcome out = step_push(s, PushCommand{Vec2(0.1, 0.1), 0, 0.03}, sim);
  CHECK(out.scene == s);
  CHECK_FALSE(out.report.changed);
}

TEST_CASE("push chains keep objects apart and inside the workspace") {
  SimConfig sim;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    Scene s = spawn_pile_scene(10, rng(), sim);
    for (int j = 0; j < 3; ++j) {
      const Vec2 start(pgtest::uniform(rng, 0.2, 0.8), pgtest::uniform(rng, 0.2, 0.8));
      s = step_push(s, PushCommand{start, pgtest::uniform_int(rng, 0, 15), 0.1}, sim).scene;
      CHECK(max_pairwise_penetration(s) <= 1e-5);
      for (const auto& o : s.objects) {
        const Aabb b = bounds(o.footprint());
        CHECK(b.lo.x() >= -1e-6);
        CHECK(b.lo.y() >= -1e-6);
        CHECK(b.hi.x() <= 1 + 1e-6);
        CHECK(b.hi.y() <= 1 + 1e-6);
      }
    }
  }
}

TEST_CASE("a push into the wall stops at the boundary") {
  SimConfig sim;
  const Scene s = scene_of({box(0, 0.95, 0.5, 0.0, 0.03, 0.03, true)});
  const PushOutcome out = step_push(s, PushCommand{Vec2(0.9, 0.5), 0, 0.2}, sim);
  CHECK(out.scene.find(0)->pose.x + 0.03 <= 1.0 + 1e-9);
  CHECK(out.travelled < 1.0);
}

TEST_CASE("scene change window") {
  SimConfig sim;
  ImageF before = ImageF::Zero(64, 64);
  ImageF after = before;
  CHECK_FALSE(scene_change(before, after, Pixel{32, 32}, sim).changed);
  // 8 changed pixels inside the window is enough, 7 is not.
  for (int i = 0; i < 7; ++i) after(30, 28 + i) = 0.5f;
  CHECK_FALSE(scene_change(before, after, Pixel{32, 32}, sim).changed);
  after(31, 30) = 0.5f;
  const SceneChangeReport r = scene_change(before, after, Pixel{32, 32}, sim);
  CHECK(r.changed);
  CHECK(r.changed_pixel_count == 8);
  // Changes far outside the window do not count.
  ImageF far = before;
  for (int i = 0; i < 20; ++i) far(0, i) = 1.0f;
  CHECK_FALSE(scene_change(before, far, Pixel{60, 60}, sim).changed);
}

TEST_CASE("relabel_goal swaps goal flag and color") {
  const Scene s = scene_of({box(0, 0.3, 0.3, 0, 0.03, 0.03, true), box(1, 0.7, 0.7, 0, 0.03, 0.03)});
  const int old_color = s.find(1)->color_id;
  const Scene r = relabel_goal(s, 1);
  CHECK(r.goal_id() == 1);
  CHECK(r.find(1)->color_id == kGoalColor);
  CHECK(r.find(0)->color_id == old_color);
  CHECK_FALSE(r.find(0)->is_goal);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
