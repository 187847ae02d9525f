#pragma once

#include "forge/geometry.hpp"

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

namespace forge {

/// Interleaved 8- or 16-bit image; samples are stored widened to 16 bits.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 gray, 3 rgb
  int bit_depth = 8;
  std::vector<std::uint16_t> data;

  std::uint16_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint16_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline Image make_image(int width, int height, int channels, int bit_depth) {
  Image img{width, height, channels, bit_depth, {}};
  img.data.assign(static_cast<std::size_t>(width) * height * channels, 0);
  return img;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

[[noreturn]] inline void png_fail(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
inline void png_warn(png_structp, png_const_charp) {}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16) throw Error("png: bit depth must be 8 or 16");
  std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_fail, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  const std::size_t bytes = img.bit_depth / 8;
  const std::size_t row_size = static_cast<std::size_t>(img.width) * img.channels * bytes;
  std::vector<png_byte> rows(row_size * img.height);
  for (std::size_t s = 0; s < img.data.size(); ++s) {
    if (bytes == 1) {
      rows[s] = static_cast<png_byte>(img.data[s]);
    } else {
      rows[2 * s] = static_cast<png_byte>(img.data[s] >> 8);
      rows[2 * s + 1] = static_cast<png_byte>(img.data[s] & 0xff);
    }
  }
  std::vector<png_bytep> row_ptrs(img.height);
  for (int y = 0; y < img.height; ++y) row_ptrs[y] = rows.data() + y * row_size;

  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
}

inline Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw Error("cannot open for reading: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_fail, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);

  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) throw Error("png: unsupported color type");
  Image img = make_image(static_cast<int>(png_get_image_width(png, info)),
                         static_cast<int>(png_get_image_height(png, info)), color == PNG_COLOR_TYPE_RGB ? 3 : 1,
                         png_get_bit_depth(png, info));
  if (img.bit_depth != 8 && img.bit_depth != 16) throw Error("png: unsupported bit depth");
  png_bytepp rows = png_get_rows(png, info);
  const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    for (std::size_t s = 0; s < per_row; ++s)
      img.data[y * per_row + s] =
          img.bit_depth == 8 ? rows[y][s] : static_cast<std::uint16_t>((rows[y][2 * s] << 8) | rows[y][2 * s + 1]);
  return img;
}

}  // namespace forge
