#pragma once

// PNG input/output for GrayImage. Color input is reduced to luminance.

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tfq/error.hpp"
#include "tfq/raycast.hpp"

namespace tfq {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

struct PngInfo {
  int width = 0;
  int height = 0;
};

/// Reads only the PNG header; nullopt if the file is not a readable PNG.
inline std::optional<PngInfo> probe_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) return std::nullopt;
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) return std::nullopt;
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                           detail::png_warning_fn);
  if (!png) return std::nullopt;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return std::nullopt;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return std::nullopt;
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  PngInfo result{static_cast<int>(png_get_image_width(png, info)),
                 static_cast<int>(png_get_image_height(png, info))};
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

/// Loads an 8/16-bit gray, gray+alpha, palette, RGB or RGBA PNG as luminance in [0,1].
/// Alpha is ignored.
inline GrayImage load_image(const std::filesystem::path& path) {
  const std::string where = path.string();
  detail::FilePtr fp(std::fopen(where.c_str(), "rb"));
  if (!fp) throw IoError(where + ": cannot open image");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(where + ": not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                           detail::png_warning_fn);
  if (!png) throw IoError(where + ": libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(where + ": libpng initialisation failed");
  }
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  int width = 0, height = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(where + ": malformed PNG: " + err);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.resize(stride * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<float> pixels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = rows[y];
    for (int x = 0; x < width; ++x) {
      const unsigned char* p = row + static_cast<std::size_t>(x) * channels;
      double lum;
      if (channels >= 3) {
        lum = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
      } else {
        lum = p[0] / 255.0;
      }
      pixels[static_cast<std::size_t>(y) * width + x] = static_cast<float>(std::clamp(lum, 0.0, 1.0));
    }
  }
  return GrayImage(width, height, std::move(pixels));
}

/// Writes an 8-bit grayscale PNG, quantizing with round-half-up.
inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  const std::string where = path.string();
  detail::FilePtr fp(std::fopen(where.c_str(), "wb"));
  if (!fp) throw IoError(where + ": cannot open for writing");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                            detail::png_warning_fn);
  if (!png) throw IoError(where + ": libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError(where + ": libpng initialisation failed");
  }
  std::vector<unsigned char> row(img.width());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(where + ": PNG write failed: " + err);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = std::floor(static_cast<double>(img.at(x, y)) * 255.0 + 0.5);
      row[x] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError(where + ": flush failed");
}

}  // namespace tfq
