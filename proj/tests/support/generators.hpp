#pragma once

// Hand-rolled generators for property tests. Everything is driven by an
// explicit seed so a failing case can be replayed.

#include <cstdint>
#include <random>
#include <vector>

#include "pushgrasp/learning.hpp"
#include "pushgrasp/policy.hpp"
#include "pushgrasp/sim.hpp"

namespace pgtest {

using namespace pushgrasp;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Scenario any_scenario(std::mt19937_64& rng) {
  switch (uniform_int(rng, 0, 2)) {
    case 0: return Scenario::sparse;
    case 1: return Scenario::packed;
    default: return Scenario::pile;
  }
}

inline Scene any_scene(std::mt19937_64& rng, const SimConfig& sim = {}) {
  const Scenario s = any_scenario(rng);
  const int n = s == Scenario::pile ? uniform_int(rng, 5, 12) : 5;
  return spawn_scene(s, n, rng(), sim);
}

// Q maps with values in [lo, hi]; a fraction of pixels share the max value
// so ties get exercised.
inline QMapStack any_qmaps(std::mt19937_64& rng, NetId id, int resolution, double lo = -1.0,
                           double hi = 2.5) {
  QMapStack q;
  q.network_id = id;
  for (auto& m : q.values) {
    m.resize(resolution, resolution);
    for (int v = 0; v < resolution; ++v) {
      for (int u = 0; u < resolution; ++u) {
        m(v, u) = static_cast<float>(uniform(rng, lo, hi));
      }
    }
  }
  if (uniform_int(rng, 0, 3) == 0) {
    const float top = static_cast<float>(hi);
    for (int i = 0; i < 20; ++i) {
      q.values[static_cast<std::size_t>(uniform_int(rng, 0, kRotations - 1))](
          uniform_int(rng, 0, resolution - 1), uniform_int(rng, 0, resolution - 1)) = top;
    }
  }
  return q;
}

inline QMapStack constant_qmaps(NetId id, int resolution, float value) {
  QMapStack q;
  q.network_id = id;
  for (auto& m : q.values) m = ImageF::Constant(resolution, resolution, value);
  return q;
}

inline ObjectBody box(int id, double x, double y, double theta, double hx, double hy,
                      bool goal = false, double height = 0.05) {
  ObjectBody b;
  b.id = id;
  b.shape = hx == hy ? ShapeKind::square : ShapeKind::rectangle;
  b.half_extents = Vec2(hx, hy);
  b.pose = {x, y, theta};
  b.height = height;
  b.is_goal = goal;
  b.color_id = goal ? kGoalColor : 1 + id % (kPaletteSize - 1);
  return b;
}

inline ObjectBody round(int id, double x, double y, double r, bool goal = false,
                        double height = 0.05) {
  ObjectBody b = box(id, x, y, 0.0, r, r, goal, height);
  b.shape = ShapeKind::disc;
  return b;
}

inline Scene scene_of(std::vector<ObjectBody> objects) {
  Scene s;
  s.objects = std::move(objects);
  return s;
}

// Network small enough for unit tests.
inline NetworkConfig tiny_net(int resolution = 16) {
  NetworkConfig c;
  c.resolution = resolution;
  c.tower_depth = 1;
  c.tower_width = {4, 4};
  c.head_channels = 4;
  return c;
}

}  // namespace pgtest
