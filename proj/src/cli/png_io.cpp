#include "pushgrasp/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace pushgrasp {

namespace {

struct File {
  std::FILE* f;
  ~File() {
    if (f != nullptr) std::fclose(f);
  }
};

void write_rows(const std::string& path, int width, int height, int bit_depth, int color_type,
                const std::vector<std::vector<std::uint8_t>>& rows) {
  File file{std::fopen(path.c_str(), "wb")};
  if (file.f == nullptr) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing " + path);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  std::uint8_t* p = at(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void write_png(const std::string& path, const RgbImage& image) {
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    const auto* begin = image.at(0, y);
    rows[static_cast<std::size_t>(y)].assign(begin, begin + image.width * 3);
  }
  write_rows(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RgbImage read_png_rgb(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&img, path.c_str()) == 0) {
    throw std::runtime_error("cannot read PNG " + path);
  }
  img.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG " + path);
  }
  return out;
}

void write_depth_png(const std::string& path, const ImageF& depth) {
  const int h = static_cast<int>(depth.rows());
  const int w = static_cast<int>(depth.cols());
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(h),
                                              std::vector<std::uint8_t>(static_cast<std::size_t>(w) * 2));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint16_t>(
          std::lround(std::clamp(static_cast<double>(depth(y, x)), 0.0, 1.0) * 65535.0));
      rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2] = static_cast<std::uint8_t>(v >> 8);
      rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2 + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  write_rows(path, w, h, 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_mask_png(const std::string& path, const Mask& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(h),
                                              std::vector<std::uint8_t>(static_cast<std::size_t>((w + 7) / 8), 0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x) != 0) {
        rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x / 8)] |=
            static_cast<std::uint8_t>(0x80 >> (x % 8));
      }
    }
  }
  write_rows(path, w, h, 1, PNG_COLOR_TYPE_GRAY, rows);
}

RgbImage to_rgb(const ColorImage& color) {
  const int h = static_cast<int>(color[0].rows());
  const int w = static_cast<int>(color[0].cols());
  RgbImage img(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t* p = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        p[c] = static_cast<std::uint8_t>(
            std::lround(std::clamp(static_cast<double>(color[c](y, x)), 0.0, 1.0) * 255.0));
      }
    }
  }
  return img;
}

}  // namespace pushgrasp
