#include "gldb/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gldb::image_io {
namespace {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void require_rgb(const Tensor<float>& image, const char* op) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(op) + ": expected [3,H,W], got " + to_string(image.shape()));
  }
}

}  // namespace

Tensor<float> read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ImageError("cannot read PNG '" + path + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageError("cannot decode PNG '" + path + "': " + img.message);
  }
  const std::size_t h = img.height, w = img.width;
  Tensor<float> out({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out[(c * h + y) * w + x] = buf[(y * w + x) * 3 + c] / 255.0f;
  return out;
}

void write_png(const std::string& path, const Tensor<float>& image) {
  require_rgb(image, "write_png");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> buf(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) buf[(y * w + x) * 3 + c] = to_byte(image[(c * h + y) * w + x]);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG '" + path + "': " + img.message);
  }
}

Tensor<float> quantize(const Tensor<float>& image) {
  Tensor<float> out(image.shape());
  for (std::size_t i = 0; i < image.numel(); ++i) out[i] = to_byte(image[i]) / 255.0f;
  return out;
}

}  // namespace gldb::image_io
