#include "pushgrasp/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace pushgrasp {

namespace {

// Rows of 3 bits, top to bottom.
const std::array<std::uint8_t, 5>* glyph(char ch) {
  static const std::array<std::array<std::uint8_t, 5>, 14> kGlyphs = {{
      {7, 5, 5, 5, 7},  // 0
      {2, 6, 2, 2, 7},  // 1
      {7, 1, 7, 4, 7},  // 2
      {7, 1, 7, 1, 7},  // 3
      {5, 5, 7, 1, 1},  // 4
      {7, 4, 7, 1, 7},  // 5
      {7, 4, 7, 5, 7},  // 6
      {7, 1, 1, 1, 1},  // 7
      {7, 5, 7, 5, 7},  // 8
      {7, 5, 7, 1, 7},  // 9
      {0, 0, 0, 0, 2},  // .
      {0, 0, 7, 0, 0},  // -
      {7, 4, 7, 4, 7},  // e
      {0, 2, 7, 2, 0},  // +
  }};
  if (ch >= '0' && ch <= '9') return &kGlyphs[static_cast<std::size_t>(ch - '0')];
  switch (ch) {
    case '.': return &kGlyphs[10];
    case '-': return &kGlyphs[11];
    case 'e': return &kGlyphs[12];
    case '+': return &kGlyphs[13];
    default: return nullptr;
  }
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
double nice_step(double span, int target) {
  const double raw = span / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, Rgb8 c) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img.set(x0, y0, c[0], c[1], c[2]);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, Rgb8 c) {
  for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y) {
    for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) {
      img.set(x, y, c[0], c[1], c[2]);
    }
  }
}

void draw_text(RgbImage& img, int x, int y, const std::string& text, Rgb8 c, int scale) {
  for (char ch : text) {
    if (const auto* g = glyph(ch)) {
      for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 3; ++col) {
          if (((*g)[static_cast<std::size_t>(row)] >> (2 - col)) & 1) {
            fill_rect(img, x + col * scale, y + row * scale, x + (col + 1) * scale - 1,
                      y + (row + 1) * scale - 1, c);
          }
        }
      }
    }
    x += 4 * scale;
  }
}

RgbImage line_chart(const std::vector<Series>& series, const ChartSpec& spec) {
  RgbImage img(spec.width, spec.height);
  const int left = 60;
  const int right = spec.width - 20;
  const int top = 20;
  const int bottom = spec.height - 40;
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  for (const auto& s : series) {
    for (double x : s.x) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0.0;
    x_max = 1.0;
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  const double y_span = spec.y_max > spec.y_min ? spec.y_max - spec.y_min : 1.0;
  auto px = [&](double x) {
    return left + static_cast<int>(std::lround((x - x_min) / (x_max - x_min) * (right - left)));
  };
  auto py = [&](double y) {
    const double t = std::clamp((y - spec.y_min) / y_span, 0.0, 1.0);
    return bottom - static_cast<int>(std::lround(t * (bottom - top)));
  };

  const Rgb8 grid = {225, 225, 225};
  const Rgb8 axis = {60, 60, 60};
  const double ystep = nice_step(y_span, 5);
  for (double y = std::ceil(spec.y_min / ystep) * ystep; y <= spec.y_max + 1e-9; y += ystep) {
    draw_line(img, left, py(y), right, py(y), grid);
    draw_text(img, 4, py(y) - 5, tick_label(y), axis);
  }
  const double xstep = nice_step(x_max - x_min, 6);
  for (double x = std::ceil(x_min / xstep) * xstep; x <= x_max + 1e-9; x += xstep) {
    draw_line(img, px(x), top, px(x), bottom, grid);
    draw_text(img, px(x) - 8, bottom + 8, tick_label(x), axis);
  }
  draw_line(img, left, top, left, bottom, axis);
  draw_line(img, left, bottom, right, bottom, axis);

  for (const auto& s : series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (s.points) {
        fill_rect(img, px(s.x[i]) - 1, py(s.y[i]) - 1, px(s.x[i]) + 1, py(s.y[i]) + 1, s.color);
      } else if (i > 0 && std::isfinite(s.y[i - 1])) {
        draw_line(img, px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color);
      }
    }
  }
  return img;
}

Rgb8 heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
  const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
  const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
  return {static_cast<std::uint8_t>(std::lround(r * 255)),
          static_cast<std::uint8_t>(std::lround(g * 255)),
          static_cast<std::uint8_t>(std::lround(b * 255))};
}

RgbImage upscale(const RgbImage& image, int scale) {
  RgbImage out(image.width * scale, image.height * scale);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const std::uint8_t* p = image.at(x / scale, y / scale);
      out.set(x, y, p[0], p[1], p[2]);
    }
  }
  return out;
}

RgbImage heatmap_overlay(const ColorImage& color, const ImageF& q, const Mask& mask, int scale,
                         double alpha) {
  RgbImage base = to_rgb(color);
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (int v = 0; v < q.rows(); ++v) {
    for (int u = 0; u < q.cols(); ++u) {
      if (mask(v, u) != 0) {
        lo = std::min(lo, q(v, u));
        hi = std::max(hi, q(v, u));
      }
    }
  }
  const float span = hi > lo ? hi - lo : 1.0f;
  for (int v = 0; v < q.rows(); ++v) {
    for (int u = 0; u < q.cols(); ++u) {
      if (mask(v, u) == 0) continue;
      const Rgb8 h = heat_color((q(v, u) - lo) / span);
      std::uint8_t* p = base.at(u, v);
      for (int c = 0; c < 3; ++c) {
        p[c] = static_cast<std::uint8_t>(
            std::lround((1.0 - alpha) * p[c] + alpha * h[static_cast<std::size_t>(c)]));
      }
    }
  }
  return upscale(base, scale);
}

RgbImage strip(const std::vector<RgbImage>& frames, int scale, int gap) {
  int width = 0;
  int height = 0;
  for (const auto& f : frames) {
    width += f.width * scale;
    height = std::max(height, f.height * scale);
  }
  if (!frames.empty()) width += gap * static_cast<int>(frames.size() - 1);
  RgbImage out(std::max(width, 1), std::max(height, 1));
  int x0 = 0;
  for (const auto& f : frames) {
    const RgbImage big = upscale(f, scale);
    for (int y = 0; y < big.height; ++y) {
      for (int x = 0; x < big.width; ++x) {
        const std::uint8_t* p = big.at(x, y);
        out.set(x0 + x, y, p[0], p[1], p[2]);
      }
    }
    x0 += big.width + gap;
  }
  return out;
}

}  // namespace pushgrasp
