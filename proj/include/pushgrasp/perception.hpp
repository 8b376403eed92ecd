#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "pushgrasp/scene.hpp"

namespace pushgrasp {

// Row-major H x W grid indexed (v, u) = (row, column).
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageF = Grid<float>;
using Mask = Grid<std::uint8_t>;
using ColorImage = std::array<ImageF, 3>;

struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel&) const = default;
};

struct Observation {
  int resolution = 0;
  ColorImage color;
  ImageF depth;      // top-surface height / max object height, in [0, 1]
  Mask goal_mask;    // color-segmented goal pixels
  Mask all_mask;     // depth > 0
};

struct RotatedView {
  ColorImage color;
  ImageF depth;
  Mask goal_mask;
  Mask all_mask;
};

struct RotatedStack {
  int resolution = 0;
  std::array<RotatedView, kRotations> views;
};

// Top-down orthographic render: each pixel shows the tallest object covering
// its center. The goal mask is produced by color segmentation of the render.
Observation render(const Scene& scene, int resolution, double max_object_height);

// Id of the tallest object per pixel (-1 for background). Test oracle for the
// color-segmented masks.
Grid<int> render_ids(const Scene& scene, int resolution);

ImageF render_depth(const Scene& scene, int resolution, double max_object_height);

Mask goal_mask_from_color(const ColorImage& color);

// Clockwise rotation of an observation by k * 22.5 degrees about the image
// center. Color/depth are resampled bilinearly, masks with nearest neighbor;
// samples falling outside the frame are background.
RotatedView rotate_view(const RotatedView& view, int k);
RotatedStack build_rotated_stack(const Observation& obs);
RotatedView as_view(const Observation& obs);

struct DecodedAction {
  Vec2 position;   // workspace coordinates
  double angle = 0.0;
  Vec2 direction;  // unit action axis in the workspace frame
};

// Pixel (u, v) of rotation k back to the workspace. Throws std::out_of_range
// for pixels outside the grid or k outside [0, 16).
DecodedAction decode_action(int k, int u, int v, int resolution);

// Continuous pixel coordinates (pixel centers at i + 0.5) of a workspace
// point in the frame of rotation k.
Vec2 encode_continuous(int k, const Vec2& world, int resolution);
Pixel encode_pixel(int k, const Vec2& world, int resolution);

Pixel world_to_pixel(const Vec2& world, int resolution);

}  // namespace pushgrasp
