#include "gldb/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "gldb/image_io.hpp"

namespace gldb::dataset {
namespace fs = std::filesystem;

namespace {

using Colour = std::array<float, 3>;

Colour random_colour(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  return {u(rng), u(rng), u(rng)};
}

void paint(Tensor<float>& img, std::size_t y, std::size_t x, const Colour& c) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  for (std::size_t ch = 0; ch < 3; ++ch) img[(ch * h + y) * w + x] = c[ch];
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{seed, salt, std::uint64_t{0x9e3779b97f4a7c15}};
  std::array<std::uint64_t, 1> out{};
  seq.generate(out.begin(), out.end());
  return out[0];
}

}  // namespace

Tensor<float> synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<float> img({3, height, width});
  const double hf = static_cast<double>(height), wf = static_cast<double>(width);

  // Linear colour ramp as the background.
  const Colour c0 = random_colour(rng), c1 = random_colour(rng);
  const double ga = u(rng) * 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * (std::cos(ga) * (x / wf - 0.5) + std::sin(ga) * (y / hf - 0.5));
      Colour c;
      for (std::size_t ch = 0; ch < 3; ++ch) c[ch] = static_cast<float>((1.0 - t) * c0[ch] + t * c1[ch]);
      paint(img, y, x, c);
    }

  const int shapes = 6 + static_cast<int>(rng() % 7);
  for (int s = 0; s < shapes; ++s) {
    const Colour c = random_colour(rng);
    const double cy = u(rng) * hf, cx = u(rng) * wf;
    const double sy = (0.08 + 0.3 * u(rng)) * hf, sx = (0.08 + 0.3 * u(rng)) * wf;
    const int kind = static_cast<int>(rng() % 4);
    const double angle = u(rng) * std::numbers::pi;
    const double period = 2.0 + 4.0 * u(rng);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        bool inside = false;
        switch (kind) {
          case 0:  // axis-aligned rectangle
            inside = std::abs(dy) < sy / 2 && std::abs(dx) < sx / 2;
            break;
          case 1:  // disc
            inside = (dy * dy) / (sy * sy / 4) + (dx * dx) / (sy * sy / 4) < 1.0;
            break;
          case 2: {  // rotated bar
            const double along = dx * std::cos(angle) + dy * std::sin(angle);
            const double across = -dx * std::sin(angle) + dy * std::cos(angle);
            inside = std::abs(along) < sx / 2 && std::abs(across) < 1.0 + 0.1 * sy;
            break;
          }
          default: {  // stripe patch
            const double along = dx * std::cos(angle) + dy * std::sin(angle);
            inside = std::abs(dy) < sy / 2 && std::abs(dx) < sx / 2 && std::fmod(std::abs(along), period) < period / 2;
            break;
          }
        }
        if (inside) paint(img, y, x, c);
      }
  }
  return img;
}

std::vector<Sample> synthetic_samples(std::size_t count, std::size_t height, std::size_t width, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "synth" << std::setw(5) << std::setfill('0') << i;
    out.push_back({name.str(), synthetic_image(height, width, mix(seed, i)), std::nullopt});
  }
  return out;
}

std::vector<Sample> load_directory(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory '" + dir + "' does not exist");
  const std::string suffix = "_sharp.png";
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (entry.is_regular_file() && file.size() > suffix.size() && file.ends_with(suffix)) {
      names.push_back(file.substr(0, file.size() - suffix.size()));
    }
  }
  if (names.empty()) throw DatasetError("no '*" + suffix + "' images in '" + dir + "'");
  std::sort(names.begin(), names.end());

  std::vector<Sample> out;
  for (const auto& name : names) {
    Sample s{name, image_io::read_png((fs::path(dir) / (name + suffix)).string()), std::nullopt};
    const auto blur_path = fs::path(dir) / (name + "_blur.png");
    if (fs::exists(blur_path)) {
      s.blurred = image_io::read_png(blur_path.string());
      if (s.blurred->shape() != s.sharp.shape()) {
        throw DatasetError("'" + name + "': blurred " + to_string(s.blurred->shape()) + " and sharp " +
                           to_string(s.sharp.shape()) + " extents differ");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_directory(const std::string& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    image_io::write_png((fs::path(dir) / (s.name + "_sharp.png")).string(), s.sharp);
    if (s.blurred) image_io::write_png((fs::path(dir) / (s.name + "_blur.png")).string(), *s.blurred);
  }
}

Pair draw_pair(const Sample& sample, std::size_t crop, const BlurRange& range, std::uint64_t seed) {
  const std::size_t h = sample.sharp.dim(1), w = sample.sharp.dim(2);
  if (crop > h || crop > w) {
    throw DatasetError("'" + sample.name + "' (" + std::to_string(h) + "x" + std::to_string(w) +
                       ") is smaller than the " + std::to_string(crop) + " crop");
  }
  std::mt19937_64 rng(seed);
  const std::size_t y0 = rng() % (h - crop + 1), x0 = rng() % (w - crop + 1);
  const auto cut = [&](const Tensor<float>& img) {
    Tensor<float> out({3, crop, crop});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < crop; ++y)
        for (std::size_t x = 0; x < crop; ++x) out[(c * crop + y) * crop + x] = img[(c * h + y0 + y) * w + x0 + x];
    return out;
  };
  Pair p;
  p.sharp = cut(sample.sharp);
  p.blurred = sample.blurred ? cut(*sample.blurred)
                             : blur::synth_blur(p.sharp, blur::random_motion_kernel(range.min_length, range.max_length, rng()));
  return p;
}

std::vector<Pair> evaluation_pairs(const std::vector<Sample>& samples, std::size_t crop, const BlurRange& range,
                                   std::uint64_t seed) {
  std::vector<Pair> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back(draw_pair(samples[i], crop, range, mix(seed, i)));
  return out;
}

}  // namespace gldb::dataset
