#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace pushgrasp {

using Vec2 = Eigen::Vector2d;

// Workspace frame: x grows to the right, y grows downward (same orientation
// as image columns/rows). Rotations use the standard matrix
// [[cos, -sin], [sin, cos]], which appears clockwise on screen.
inline Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  r << c, -s, s, c;
  return r;
}

enum class ShapeKind { square, rectangle, disc };

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

struct Aabb {
  Vec2 lo;
  Vec2 hi;
};

// Convex planar footprint: an oriented box (square/rectangle) or a disc.
// For discs only half_extents.x() (the radius) is meaningful.
struct Footprint {
  ShapeKind kind = ShapeKind::square;
  Vec2 center = Vec2::Zero();
  double theta = 0.0;
  Vec2 half_extents = Vec2::Constant(0.01);

  bool is_disc() const { return kind == ShapeKind::disc; }
  double radius() const { return half_extents.x(); }
  std::array<Vec2, 4> corners() const;
  Footprint translated(const Vec2& delta) const {
    Footprint f = *this;
    f.center += delta;
    return f;
  }
};

Footprint oriented_box(const Vec2& center, double theta, const Vec2& half);
Footprint disc(const Vec2& center, double radius);

// max over the footprint of dot(p, dir)
double support(const Footprint& f, const Vec2& dir);

// Width of the footprint measured along a unit direction.
double extent_along(const Footprint& f, const Vec2& dir);

Aabb bounds(const Footprint& f);

bool contains(const Footprint& f, const Vec2& p);

// Separating-axis overlap: the smallest overlap over all candidate axes.
// Positive means the shapes interpenetrate by that depth; zero or negative
// means they are separated (touching counts as separated).
double penetration(const Footprint& a, const Footprint& b);

// Smallest t >= 0 such that `moving` translated by t * dir no longer
// penetrates `fixed` (dir must be a unit vector). Returns 0 when already
// separated.
double separation_along(const Footprint& fixed, const Footprint& moving,
                        const Vec2& dir);

// Area of the intersection of two footprints. Discs are approximated by a
// 64-gon, which is accurate enough for ranking overlaps.
double intersection_area(const Footprint& a, const Footprint& b);

std::vector<Vec2> polygon(const Footprint& f);

}  // namespace pushgrasp
