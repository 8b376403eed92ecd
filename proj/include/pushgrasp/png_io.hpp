#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pushgrasp/perception.hpp"

namespace pushgrasp {

// Interleaved 8-bit RGB raster, row-major, top row first.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

void write_png(const std::string& path, const RgbImage& image);
RgbImage read_png_rgb(const std::string& path);
// 16-bit grayscale: depth in [0, 1] scaled to the full range.
void write_depth_png(const std::string& path, const ImageF& depth);
// 1-bit grayscale.
void write_mask_png(const std::string& path, const Mask& mask);

RgbImage to_rgb(const ColorImage& color);

}  // namespace pushgrasp
