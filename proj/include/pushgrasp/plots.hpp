#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pushgrasp/perception.hpp"
#include "pushgrasp/png_io.hpp"

namespace pushgrasp {

using Rgb8 = std::array<std::uint8_t, 3>;

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  Rgb8 color = {0, 0, 0};
  bool points = false;  // scatter dots instead of a polyline
};

struct ChartSpec {
  int width = 640;
  int height = 400;
  double y_min = 0.0;
  double y_max = 1.0;
};

// Line chart with axes and numeric tick labels. The x range spans the data.
RgbImage line_chart(const std::vector<Series>& series, const ChartSpec& spec);

// Maps t in [0, 1] to a blue-to-red ramp.
Rgb8 heat_color(double t);

// Q values blended over the color heightmap on `mask` pixels only; pixels
// outside the mask keep the heightmap color. Values are normalized over the
// masked pixels. The image is upscaled by `scale`.
RgbImage heatmap_overlay(const ColorImage& color, const ImageF& q, const Mask& mask,
                         int scale = 4, double alpha = 0.6);

// Frames placed left to right with a white separator, each upscaled.
RgbImage strip(const std::vector<RgbImage>& frames, int scale = 4, int gap = 4);

RgbImage upscale(const RgbImage& image, int scale);

void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, Rgb8 c);
void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, Rgb8 c);
// 3x5 glyphs for digits, '.', '-', 'e' and '+'; other characters are skipped.
void draw_text(RgbImage& img, int x, int y, const std::string& text, Rgb8 c, int scale = 2);

}  // namespace pushgrasp
