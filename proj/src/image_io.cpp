#include "embridge/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <vector>

namespace embridge {

namespace {

struct PngReader {
  std::FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngReader(const std::filesystem::path& path) {
    file = std::fopen(path.string().c_str(), "rb");
    if (!file) throw IoError("cannot open " + path.string());
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) {
      cleanup();
      throw IoError("libpng initialization failed for " + path.string());
    }
  }

  void cleanup() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (file) std::fclose(file);
    png = nullptr;
    info = nullptr;
    file = nullptr;
  }

  ~PngReader() { cleanup(); }
};

struct PngWriter {
  std::FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngWriter(const std::filesystem::path& path) {
    file = std::fopen(path.string().c_str(), "wb");
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) {
      cleanup();
      throw IoError("libpng initialization failed for " + path.string());
    }
  }

  void cleanup() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
    png = nullptr;
    info = nullptr;
    file = nullptr;
  }

  ~PngWriter() { cleanup(); }
};

void read_header(PngReader& r, const std::filesystem::path& path,
                 int expect_bit_depth, int expect_color_type,
                 png_uint_32& width, png_uint_32& height) {
  if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path.string());
  png_init_io(r.png, r.file);
  png_read_info(r.png, r.info);

  width = png_get_image_width(r.png, r.info);
  height = png_get_image_height(r.png, r.info);
  const int bit_depth = png_get_bit_depth(r.png, r.info);
  const int color_type = png_get_color_type(r.png, r.info);
  if (bit_depth != expect_bit_depth || color_type != expect_color_type) {
    throw IoError(path.string() + ": expected bit depth " + std::to_string(expect_bit_depth) +
                  ", grayscale/rgb layout; got depth " + std::to_string(bit_depth) +
                  ", color type " + std::to_string(color_type));
  }
}

} // namespace

DepthImage read_png16(const std::filesystem::path& path) {
  PngReader r(path);
  png_uint_32 width = 0, height = 0;
  read_header(r, path, 16, PNG_COLOR_TYPE_GRAY, width, height);

  DepthImage image(static_cast<int>(width), static_cast<int>(height));
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(y) * width]);
  }
  if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path.string());
  png_set_swap(r.png); // file is big-endian, host is little-endian
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return image;
}

void write_png16(const std::filesystem::path& path, const DepthImage& image) {
  PngWriter w(path);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(&image.pixels[static_cast<std::size_t>(y) * image.width]));
  }
  if (setjmp(png_jmpbuf(w.png))) throw IoError("failed to encode " + path.string());
  png_init_io(w.png, w.file);
  png_set_IHDR(w.png, w.info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_set_swap(w.png);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

GrayImage read_png8(const std::filesystem::path& path) {
  PngReader r(path);
  png_uint_32 width = 0, height = 0;
  read_header(r, path, 8, PNG_COLOR_TYPE_GRAY, width, height);

  GrayImage image(static_cast<int>(width), static_cast<int>(height));
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = &image.pixels[static_cast<std::size_t>(y) * width];
  }
  if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path.string());
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return image;
}

void write_png8(const std::filesystem::path& path, const GrayImage& image) {
  PngWriter w(path);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(y) * image.width]);
  }
  if (setjmp(png_jmpbuf(w.png))) throw IoError("failed to encode " + path.string());
  png_init_io(w.png, w.file);
  png_set_IHDR(w.png, w.info, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  PngReader r(path);
  png_uint_32 width = 0, height = 0;
  read_header(r, path, 8, PNG_COLOR_TYPE_RGB, width, height);

  RgbImage image(static_cast<int>(width), static_cast<int>(height));
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = &image.pixels[static_cast<std::size_t>(y) * width * 3];
  }
  if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path.string());
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return image;
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  PngWriter w(path);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(y) * image.width * 3]);
  }
  if (setjmp(png_jmpbuf(w.png))) throw IoError("failed to encode " + path.string());
  png_init_io(w.png, w.file);
  png_set_IHDR(w.png, w.info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

} // namespace embridge
