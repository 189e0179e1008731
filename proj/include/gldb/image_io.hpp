#pragma once

#include <stdexcept>
#include <string>

#include "gldb/tensor.hpp"

namespace gldb::image_io {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Any PNG, converted to 8-bit RGB, as a [3,H,W] tensor in [0,1] (value / 255).
Tensor<float> read_png(const std::string& path);

/// [3,H,W] tensor clamped to [0,1] and rounded to 8-bit RGB.
void write_png(const std::string& path, const Tensor<float>& image);

/// Round trip through the 8-bit representation without touching disk.
Tensor<float> quantize(const Tensor<float>& image);

}  // namespace gldb::image_io
