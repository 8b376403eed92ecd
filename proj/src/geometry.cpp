#include "pushgrasp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pushgrasp {

namespace {

constexpr int kDiscPolygonSides = 64;

double cross(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Projection interval of a footprint onto a unit axis.
std::pair<double, double> project(const Footprint& f, const Vec2& axis) {
  return {-support(f, -axis), support(f, axis)};
}

double axis_overlap(const Footprint& a, const Footprint& b, const Vec2& axis) {
  const auto [a0, a1] = project(a, axis);
  const auto [b0, b1] = project(b, axis);
  return std::min(a1, b1) - std::max(a0, b0);
}

std::array<Vec2, 2> box_axes(const Footprint& f) {
  const Eigen::Matrix2d r = rotation(f.theta);
  return {r.col(0), r.col(1)};
}

double box_disc_penetration(const Footprint& box, const Footprint& d) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : box_axes(box)) {
    best = std::min(best, axis_overlap(box, d, axis));
  }
  // Axis towards the closest box vertex completes the separating-axis test
  // for a disc.
  const auto corners = box.corners();
  Vec2 nearest = corners[0];
  for (const Vec2& c : corners) {
    if ((c - d.center).squaredNorm() < (nearest - d.center).squaredNorm()) {
      nearest = c;
    }
  }
  Vec2 axis = nearest - d.center;
  if (axis.norm() > 1e-15) {
    axis.normalize();
    best = std::min(best, axis_overlap(box, d, axis));
  }
  return best;
}

// Sutherland-Hodgman clip of `subject` against the convex CCW/CW polygon
// `clip` (orientation detected from its signed area).
std::vector<Vec2> clip_polygon(std::vector<Vec2> subject,
                               const std::vector<Vec2>& clip) {
  double signed_area = 0.0;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    signed_area += cross(clip[i], clip[(i + 1) % clip.size()]);
  }
  const double orient = signed_area >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    auto inside = [&](const Vec2& p) { return orient * cross(b - a, p - a) >= 0.0; };
    std::vector<Vec2> out;
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Vec2& p = subject[j];
      const Vec2& q = subject[(j + 1) % subject.size()];
      const bool pin = inside(p);
      const bool qin = inside(q);
      if (pin) out.push_back(p);
      if (pin != qin) {
        const double denom = cross(b - a, q - p);
        if (std::abs(denom) > 1e-18) {
          const double t = cross(b - a, a - p) / denom;
          out.push_back(p + t * (q - p));
        }
      }
    }
    subject = std::move(out);
  }
  return subject;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return std::abs(area) * 0.5;
}

}  // namespace

std::array<Vec2, 4> Footprint::corners() const {
  const Eigen::Matrix2d r = rotation(theta);
  const double hx = half_extents.x();
  const double hy = half_extents.y();
  return {center + r * Vec2(-hx, -hy), center + r * Vec2(hx, -hy),
          center + r * Vec2(hx, hy), center + r * Vec2(-hx, hy)};
}

Footprint oriented_box(const Vec2& center, double theta, const Vec2& half) {
  Footprint f;
  f.kind = std::abs(half.x() - half.y()) < 1e-15 ? ShapeKind::square
                                                 : ShapeKind::rectangle;
  f.center = center;
  f.theta = theta;
  f.half_extents = half;
  return f;
}

Footprint disc(const Vec2& center, double radius) {
  Footprint f;
  f.kind = ShapeKind::disc;
  f.center = center;
  f.half_extents = Vec2::Constant(radius);
  return f;
}

double support(const Footprint& f, const Vec2& dir) {
  if (f.is_disc()) return f.center.dot(dir) + f.radius() * dir.norm();
  const auto [ax, ay] = box_axes(f);
  return f.center.dot(dir) + f.half_extents.x() * std::abs(ax.dot(dir)) +
         f.half_extents.y() * std::abs(ay.dot(dir));
}

double extent_along(const Footprint& f, const Vec2& dir) {
  return support(f, dir) + support(f, -dir);
}

Aabb bounds(const Footprint& f) {
  const double hx = support(f, Vec2::UnitX()) - f.center.x();
  const double hy = support(f, Vec2::UnitY()) - f.center.y();
  return {f.center - Vec2(hx, hy), f.center + Vec2(hx, hy)};
}

bool contains(const Footprint& f, const Vec2& p) {
  const Vec2 d = p - f.center;
  if (f.is_disc()) return d.squaredNorm() <= f.radius() * f.radius();
  const Vec2 local = rotation(f.theta).transpose() * d;
  return std::abs(local.x()) <= f.half_extents.x() &&
         std::abs(local.y()) <= f.half_extents.y();
}

double penetration(const Footprint& a, const Footprint& b) {
  if (a.is_disc() && b.is_disc()) {
    return a.radius() + b.radius() - (a.center - b.center).norm();
  }
  if (a.is_disc()) return box_disc_penetration(b, a);
  if (b.is_disc()) return box_disc_penetration(a, b);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : box_axes(a)) best = std::min(best, axis_overlap(a, b, axis));
  for (const Vec2& axis : box_axes(b)) best = std::min(best, axis_overlap(a, b, axis));
  return best;
}

double separation_along(const Footprint& fixed, const Footprint& moving,
                        const Vec2& dir) {
  if (penetration(fixed, moving) <= 0.0) return 0.0;
  const double reach = extent_along(fixed, dir) + extent_along(moving, dir);
  double lo = 0.0;
  double hi = reach + 1e-9;
  while (penetration(fixed, moving.translated(hi * dir)) > 0.0) hi *= 2.0;
  for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (penetration(fixed, moving.translated(mid * dir)) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

std::vector<Vec2> polygon(const Footprint& f) {
  if (!f.is_disc()) {
    const auto c = f.corners();
    return {c.begin(), c.end()};
  }
  std::vector<Vec2> poly;
  poly.reserve(kDiscPolygonSides);
  for (int i = 0; i < kDiscPolygonSides; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kDiscPolygonSides;
    poly.emplace_back(f.center + f.radius() * Vec2(std::cos(a), std::sin(a)));
  }
  return poly;
}

double intersection_area(const Footprint& a, const Footprint& b) {
  if (penetration(a, b) <= 0.0) return 0.0;
  return polygon_area(clip_polygon(polygon(a), polygon(b)));
}

}  // namespace pushgrasp
