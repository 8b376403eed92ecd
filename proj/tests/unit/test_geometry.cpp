#include <cmath>
#include <random>

#include "doctest.h"
#include "pushgrasp/geometry.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;

TEST_CASE("penetration of axis-aligned boxes matches the interval overlap") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Vec2 ca(pgtest::uniform(rng, 0, 1), pgtest::uniform(rng, 0, 1));
    const Vec2 cb(pgtest::uniform(rng, 0, 1), pgtest::uniform(rng, 0, 1));
    const Vec2 ha(pgtest::uniform(rng, 0.01, 0.2), pgtest::uniform(rng, 0.01, 0.2));
    const Vec2 hb(pgtest::uniform(rng, 0.01, 0.2), pgtest::uniform(rng, 0.01, 0.2));
    // Length of the intersection of the projected intervals.
    const double ox = std::min(ca.x() + ha.x(), cb.x() + hb.x()) - std::max(ca.x() - ha.x(), cb.x() - hb.x());
    const double oy = std::min(ca.y() + ha.y(), cb.y() + hb.y()) - std::max(ca.y() - ha.y(), cb.y() - hb.y());
    const double expected = std::min(ox, oy);
    const double got = penetration(oriented_box(ca, 0.0, ha), oriented_box(cb, 0.0, hb));
    if (expected > 0) {
      CHECK(got == doctest::Approx(expected).epsilon(1e-9));
    } else {
      CHECK(got <= 1e-12);
    }
  }
}

TEST_CASE("disc penetration is the radius sum minus the distance") {
  const double d = 0.07;
  const Footprint a = disc(Vec2(0.5, 0.5), 0.04);
  const Footprint b = disc(Vec2(0.5 + d, 0.5), 0.05);
  CHECK(penetration(a, b) == doctest::Approx(0.09 - d).epsilon(1e-6));
  CHECK(penetration(a, disc(Vec2(0.7, 0.5), 0.05)) <= 0.0);
}

TEST_CASE("separation_along moves a box just out of contact") {
  const Footprint fixed = oriented_box(Vec2(0.5, 0.5), 0.0, Vec2(0.05, 0.05));
  const Footprint moving = oriented_box(Vec2(0.56, 0.5), 0.0, Vec2(0.02, 0.02));
  const double t = separation_along(fixed, moving, Vec2(1, 0));
  // Right face of fixed at 0.55, left face of moving at 0.54.
  CHECK(t == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(penetration(fixed, moving.translated(Vec2(t, 0))) <= 1e-6);
  CHECK(separation_along(fixed, oriented_box(Vec2(0.9, 0.9), 0, Vec2(0.01, 0.01)), Vec2(1, 0)) ==
        0.0);
}

TEST_CASE("extent and support of a rotated rectangle") {
  const Footprint r = oriented_box(Vec2(0, 0), M_PI / 2, Vec2(0.06, 0.02));
  CHECK(extent_along(r, Vec2(1, 0)) == doctest::Approx(0.04));
  CHECK(extent_along(r, Vec2(0, 1)) == doctest::Approx(0.12));
  CHECK(support(disc(Vec2(1, 2), 0.5), Vec2(0, 1)) == doctest::Approx(2.5));
}

TEST_CASE("intersection area of overlapping squares") {
  const Footprint a = oriented_box(Vec2(0, 0), 0.0, Vec2(0.1, 0.1));
  const Footprint b = oriented_box(Vec2(0.1, 0.05), 0.0, Vec2(0.1, 0.1));
  CHECK(intersection_area(a, b) == doctest::Approx(0.1 * 0.15).epsilon(1e-9));
  CHECK(intersection_area(a, oriented_box(Vec2(1, 1), 0, Vec2(0.1, 0.1))) == 0.0);
}

TEST_CASE("contains and bounds agree on a rotated box") {
  const Footprint f = oriented_box(Vec2(0.5, 0.5), M_PI / 4, Vec2(0.1, 0.1));
  const Aabb b = bounds(f);
  CHECK(b.hi.x() - b.lo.x() == doctest::Approx(0.2 * std::sqrt(2.0)));
  CHECK(contains(f, Vec2(0.5, 0.5)));
  CHECK(contains(f, Vec2(0.5, 0.5 + 0.13)));
  CHECK_FALSE(contains(f, Vec2(0.5 + 0.09, 0.5 + 0.09)));
}
