#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

namespace posefuse {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> pixels;
};

GrayImage read_gray_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorKind::kFormat, path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::kIo, "libpng initialization failed");
  }
  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  volatile bool bad_format = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::kFormat, path.string() + ": corrupt PNG");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (img.bit_depth != 8 && img.bit_depth != 16)) {
    bad_format = true;
  } else {
    const size_t bpp = img.bit_depth / 8;
    const size_t stride = bpp * img.width;
    buffer.resize(stride * img.height);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1])
                               : buffer[i];
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_format) {
    throw Error(ErrorKind::kFormat,
                path.string() + ": expected a single-channel 8- or 16-bit PNG");
  }
  return img;
}

void write_gray_png(const fs::path& path, int width, int height, int bit_depth,
                    const std::vector<std::uint16_t>& pixels) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIo, "libpng initialization failed");
  }
  const size_t bpp = bit_depth / 8;
  const size_t stride = bpp * width;
  std::vector<png_byte> buffer(stride * height);
  for (size_t i = 0; i < pixels.size(); ++i) {
    if (bpp == 2) {
      buffer[2 * i] = static_cast<png_byte>(pixels[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(pixels[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(pixels[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + stride * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIo, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed settings keep the encoded bytes deterministic.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

DepthImage read_depth_png(const fs::path& path) {
  const GrayImage img = read_gray_png(path);
  if (img.bit_depth != 16) {
    throw Error(ErrorKind::kFormat, path.string() + ": depth maps must be 16-bit");
  }
  DepthImage d(img.width, img.height);
  for (size_t i = 0; i < img.pixels.size(); ++i) d.meters[i] = img.pixels[i] / 1000.0;
  return d;
}

void write_depth_png(const fs::path& path, const DepthImage& depth) {
  std::vector<std::uint16_t> px(depth.meters.size());
  for (size_t i = 0; i < px.size(); ++i) {
    const double mm = std::round(depth.meters[i] * 1000.0);
    px[i] = (mm > 0.0 && mm <= 65535.0) ? static_cast<std::uint16_t>(mm) : 0;
  }
  write_gray_png(path, depth.width, depth.height, 16, px);
}

Mask read_mask_png(const fs::path& path) {
  const GrayImage img = read_gray_png(path);
  if (img.bit_depth != 8) throw Error(ErrorKind::kFormat, path.string() + ": masks must be 8-bit");
  Mask m(img.width, img.height);
  for (size_t i = 0; i < img.pixels.size(); ++i) m.data[i] = img.pixels[i] ? 255 : 0;
  return m;
}

void write_mask_png(const fs::path& path, const Mask& mask) {
  std::vector<std::uint16_t> px(mask.data.begin(), mask.data.end());
  for (auto& p : px) p = p ? 255 : 0;
  write_gray_png(path, mask.width, mask.height, 8, px);
}

}  // namespace posefuse
