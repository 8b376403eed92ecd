#include "pushgrasp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pushgrasp {

const std::array<Rgb, kPaletteSize>& palette() {
  static const std::array<Rgb, kPaletteSize> colors = {{
      {0.15f, 0.75f, 0.20f},  // goal
      {0.85f, 0.20f, 0.20f},
      {0.20f, 0.35f, 0.85f},
      {0.90f, 0.80f, 0.15f},
      {0.95f, 0.55f, 0.10f},
      {0.60f, 0.25f, 0.70f},
      {0.20f, 0.80f, 0.85f},
      {0.55f, 0.55f, 0.55f},
  }};
  return colors;
}

double rotation_angle(int k) {
  return static_cast<double>(k) * 2.0 * std::numbers::pi / kRotations;
}

Vec2 action_direction(int k) {
  const double a = rotation_angle(k);
  if (k % 4 == 0) {
    static constexpr double kAxis[4][2] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    const int q = ((k / 4) % 4 + 4) % 4;
    return {kAxis[q][0], kAxis[q][1]};
  }
  return {std::cos(a), -std::sin(a)};
}

Footprint ObjectBody::footprint() const {
  Footprint f;
  f.kind = shape;
  f.center = pose.position();
  f.theta = pose.theta;
  f.half_extents = half_extents;
  return f;
}

const ObjectBody* Scene::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const ObjectBody* Scene::goal() const {
  for (const auto& o : objects) {
    if (o.is_goal) return &o;
  }
  return nullptr;
}

std::optional<int> Scene::goal_id() const {
  if (const auto* g = goal()) return g->id;
  return std::nullopt;
}

bool Scene::contains_point(const Vec2& p) const {
  return p.x() >= workspace.lo.x() && p.x() <= workspace.hi.x() &&
         p.y() >= workspace.lo.y() && p.y() <= workspace.hi.y();
}

bool Scene::operator==(const Scene& other) const {
  return objects == other.objects && workspace.lo == other.workspace.lo &&
         workspace.hi == other.workspace.hi && rng_seed == other.rng_seed &&
         scenario == other.scenario &&
         ungraspable_certificate == other.ungraspable_certificate;
}

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::square: return "square";
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::disc: return "disc";
  }
  return "?";
}

ShapeKind shape_from_string(const std::string& s) {
  if (s == "square") return ShapeKind::square;
  if (s == "rectangle") return ShapeKind::rectangle;
  if (s == "disc") return ShapeKind::disc;
  throw std::invalid_argument("unknown shape '" + s + "'");
}

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::sparse: return "sparse";
    case Scenario::packed: return "packed";
    case Scenario::pile: return "pile";
    case Scenario::custom: return "custom";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "sparse") return Scenario::sparse;
  if (s == "packed") return Scenario::packed;
  if (s == "pile") return Scenario::pile;
  if (s == "custom") return Scenario::custom;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

double max_pairwise_penetration(const Scene& scene) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
      worst = std::max(worst, penetration(scene.objects[i].footprint(),
                                          scene.objects[j].footprint()));
    }
  }
  return worst;
}

Scene relabel_goal(const Scene& scene, int new_goal_id) {
  Scene out = scene;
  auto target = std::find_if(out.objects.begin(), out.objects.end(),
                             [&](const ObjectBody& o) { return o.id == new_goal_id; });
  if (target == out.objects.end()) {
    throw std::invalid_argument("relabel target " + std::to_string(new_goal_id) +
                                " not in scene");
  }
  if (target->is_goal) return out;
  const int freed_color = target->color_id;
  for (auto& o : out.objects) {
    if (o.is_goal) {
      o.is_goal = false;
      o.color_id = freed_color;
    }
  }
  target->is_goal = true;
  target->color_id = kGoalColor;
  return out;
}

}  // namespace pushgrasp
