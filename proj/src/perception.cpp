#include "pushgrasp/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pushgrasp {

namespace {

constexpr float kGoalColorTolerance = 0.02f;

// Rotation matrix with exact entries at multiples of 90 degrees so that the
// quarter-turn resamplings are exact pixel permutations.
Eigen::Matrix2d snapped_rotation(double theta, int k) {
  if (k % 4 != 0) return rotation(theta);
  static constexpr double kCos[4] = {1, 0, -1, 0};
  static constexpr double kSin[4] = {0, 1, 0, -1};
  const int q = ((k / 4) % 4 + 4) % 4;
  Eigen::Matrix2d r;
  r << kCos[q], -kSin[q], kSin[q], kCos[q];
  return r;
}

// Objects ordered for the painter's algorithm: lower first, ties by id.
std::vector<const ObjectBody*> paint_order(const Scene& scene) {
  std::vector<const ObjectBody*> order;
  for (const auto& o : scene.objects) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->height != b->height) return a->height < b->height;
    return a->id < b->id;
  });
  return order;
}

template <typename Fn>
void rasterize(const ObjectBody& body, int resolution, Fn&& paint) {
  const Footprint f = body.footprint();
  const Aabb box = bounds(f);
  const int u0 = std::max(0, static_cast<int>(std::floor(box.lo.x() * resolution)));
  const int v0 = std::max(0, static_cast<int>(std::floor(box.lo.y() * resolution)));
  const int u1 = std::min(resolution - 1, static_cast<int>(std::floor(box.hi.x() * resolution)));
  const int v1 = std::min(resolution - 1, static_cast<int>(std::floor(box.hi.y() * resolution)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Vec2 center((u + 0.5) / resolution, (v + 0.5) / resolution);
      if (contains(f, center)) paint(u, v);
    }
  }
}

template <typename Scalar>
Grid<Scalar> rotate_bilinear(const Grid<Scalar>& src, const Eigen::Matrix2d& inv) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const Vec2 c(w * 0.5, h * 0.5);
  Grid<Scalar> out = Grid<Scalar>::Zero(h, w);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Vec2 p = inv * (Vec2(u + 0.5, v + 0.5) - c) + c;
      const double x = p.x() - 0.5;
      const double y = p.y() - 0.5;
      const int x0 = static_cast<int>(std::floor(x));
      const int y0 = static_cast<int>(std::floor(y));
      const double fx = x - x0;
      const double fy = y - y0;
      double acc = 0.0;
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          const int sx = x0 + dx;
          const int sy = y0 + dy;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
          if (wgt != 0.0) acc += wgt * static_cast<double>(src(sy, sx));
        }
      }
      out(v, u) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

Mask rotate_nearest(const Mask& src, const Eigen::Matrix2d& inv) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const Vec2 c(w * 0.5, h * 0.5);
  Mask out = Mask::Zero(h, w);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Vec2 p = inv * (Vec2(u + 0.5, v + 0.5) - c) + c;
      const int sx = static_cast<int>(std::floor(p.x()));
      const int sy = static_cast<int>(std::floor(p.y()));
      if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
      out(v, u) = src(sy, sx);
    }
  }
  return out;
}

}  // namespace

Observation render(const Scene& scene, int resolution, double max_object_height) {
  if (resolution < 1) throw std::invalid_argument("resolution must be positive");
  Observation obs;
  obs.resolution = resolution;
  for (auto& ch : obs.color) ch = ImageF::Zero(resolution, resolution);
  obs.depth = ImageF::Zero(resolution, resolution);
  for (const auto* body : paint_order(scene)) {
    const Rgb& rgb = palette()[static_cast<std::size_t>(body->color_id)];
    const float depth =
        static_cast<float>(std::clamp(body->height / max_object_height, 0.0, 1.0));
    rasterize(*body, resolution, [&](int u, int v) {
      for (int c = 0; c < 3; ++c) obs.color[c](v, u) = rgb[c];
      obs.depth(v, u) = depth;
    });
  }
  obs.all_mask = (obs.depth > 0.0f).cast<std::uint8_t>();
  obs.goal_mask = goal_mask_from_color(obs.color);
  return obs;
}

Grid<int> render_ids(const Scene& scene, int resolution) {
  Grid<int> ids = Grid<int>::Constant(resolution, resolution, -1);
  for (const auto* body : paint_order(scene)) {
    rasterize(*body, resolution, [&](int u, int v) { ids(v, u) = body->id; });
  }
  return ids;
}

ImageF render_depth(const Scene& scene, int resolution, double max_object_height) {
  ImageF depth = ImageF::Zero(resolution, resolution);
  for (const auto* body : paint_order(scene)) {
    const float d =
        static_cast<float>(std::clamp(body->height / max_object_height, 0.0, 1.0));
    rasterize(*body, resolution, [&](int u, int v) { depth(v, u) = d; });
  }
  return depth;
}

Mask goal_mask_from_color(const ColorImage& color) {
  const Rgb& goal = palette()[kGoalColor];
  Mask mask = Mask::Ones(color[0].rows(), color[0].cols());
  for (int c = 0; c < 3; ++c) {
    mask *= ((color[c] - goal[c]).abs() < kGoalColorTolerance).cast<std::uint8_t>();
  }
  return mask;
}

RotatedView as_view(const Observation& obs) {
  return {obs.color, obs.depth, obs.goal_mask, obs.all_mask};
}

RotatedView rotate_view(const RotatedView& view, int k) {
  if (k == 0) return view;
  const Eigen::Matrix2d inv = snapped_rotation(-rotation_angle(k), -k);
  RotatedView out;
  for (int c = 0; c < 3; ++c) out.color[c] = rotate_bilinear(view.color[c], inv);
  out.depth = rotate_bilinear(view.depth, inv);
  out.goal_mask = rotate_nearest(view.goal_mask, inv);
  out.all_mask = rotate_nearest(view.all_mask, inv);
  return out;
}

RotatedStack build_rotated_stack(const Observation& obs) {
  RotatedStack stack;
  stack.resolution = obs.resolution;
  const RotatedView base = as_view(obs);
  for (int k = 0; k < kRotations; ++k) stack.views[k] = rotate_view(base, k);
  return stack;
}

DecodedAction decode_action(int k, int u, int v, int resolution) {
  if (k < 0 || k >= kRotations) {
    throw std::out_of_range("rotation index " + std::to_string(k) + " outside [0,16)");
  }
  if (u < 0 || v < 0 || u >= resolution || v >= resolution) {
    throw std::out_of_range("pixel (" + std::to_string(u) + "," + std::to_string(v) +
                            ") outside the " + std::to_string(resolution) + " grid");
  }
  const Vec2 c(resolution * 0.5, resolution * 0.5);
  const Eigen::Matrix2d inv = snapped_rotation(-rotation_angle(k), -k);
  const Vec2 p = inv * (Vec2(u + 0.5, v + 0.5) - c) + c;
  return {p / resolution, rotation_angle(k), action_direction(k)};
}

Vec2 encode_continuous(int k, const Vec2& world, int resolution) {
  const Vec2 c(resolution * 0.5, resolution * 0.5);
  const Eigen::Matrix2d fwd = snapped_rotation(rotation_angle(k), k);
  return fwd * (world * resolution - c) + c;
}

Pixel encode_pixel(int k, const Vec2& world, int resolution) {
  const Vec2 p = encode_continuous(k, world, resolution);
  return {static_cast<int>(std::floor(p.x())), static_cast<int>(std::floor(p.y()))};
}

Pixel world_to_pixel(const Vec2& world, int resolution) {
  return {static_cast<int>(std::floor(world.x() * resolution)),
          static_cast<int>(std::floor(world.y() * resolution))};
}

}  // namespace pushgrasp
