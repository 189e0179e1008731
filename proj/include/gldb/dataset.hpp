#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gldb/blur.hpp"
#include "gldb/tensor.hpp"

namespace gldb::dataset {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sharp image and, when the data came with one, its recorded blurred
/// counterpart. Without one, blur is synthesized per draw.
struct Sample {
  std::string name;
  Tensor<float> sharp;                  // [3,H,W] in [0,1]
  std::optional<Tensor<float>> blurred;  // same shape
};

/// Blurred input and its sharp target, both [3,H,W].
struct Pair {
  Tensor<float> blurred;
  Tensor<float> sharp;
};

/// Procedural sharp image: smooth background, overlapping flat-coloured
/// rectangles, discs, bars and stripe patches. Deterministic in `seed`.
Tensor<float> synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed);

std::vector<Sample> synthetic_samples(std::size_t count, std::size_t height, std::size_t width, std::uint64_t seed);

/// Reads `<name>_sharp.png` files (with `<name>_blur.png` when present),
/// sorted by name. Throws DatasetError when the directory is missing or has
/// no sharp images, or when a pair's extents differ.
std::vector<Sample> load_directory(const std::string& dir);

/// Writes samples as `<name>_sharp.png` (and `<name>_blur.png` for samples
/// that carry one).
void write_directory(const std::string& dir, const std::vector<Sample>& samples);

struct BlurRange {
  int min_length = 3;
  int max_length = 11;
  friend bool operator==(const BlurRange&, const BlurRange&) = default;
};

/// A `crop` x `crop` window at a seeded position. Recorded blur is cropped at
/// the same window; otherwise a seeded motion kernel from `range` blurs the
/// sharp crop.
Pair draw_pair(const Sample& sample, std::size_t crop, const BlurRange& range, std::uint64_t seed);

/// Fixed blurred/sharp pairs for evaluation: one seeded `crop` window per
/// sample (the whole image when it is exactly crop x crop).
std::vector<Pair> evaluation_pairs(const std::vector<Sample>& samples, std::size_t crop, const BlurRange& range,
                                   std::uint64_t seed);

}  // namespace gldb::dataset
