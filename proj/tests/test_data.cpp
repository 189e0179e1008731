#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "gldb/blur.hpp"
#include "gldb/dataset.hpp"
#include "gldb/image_io.hpp"
#include "gldb/metrics.hpp"
#include "test_util.hpp"

namespace gldb {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gldb_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double kernel_sum(const blur::BlurKernel& k) {
  double s = 0.0;
  for (auto v : k.weights.data()) s += v;
  return s;
}

// SSIM computed window by window with a full 2-D Gaussian, population
// statistics and no separable filtering.
double direct_ssim(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  std::array<std::array<double, 11>, 11> g{};
  double gs = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      gs += g[i][j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y + 11 <= h; ++y)
      for (std::size_t x = 0; x + 11 <= w; ++x) {
        double mx = 0, my = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            mx += g[i][j] / gs * a.at({ch, y + i, x + j});
            my += g[i][j] / gs * b.at({ch, y + i, x + j});
          }
        double vx = 0, vy = 0, cov = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double dx = a.at({ch, y + i, x + j}) - mx, dy = b.at({ch, y + i, x + j}) - my;
            vx += g[i][j] / gs * dx * dx;
            vy += g[i][j] / gs * dy * dy;
            cov += g[i][j] / gs * dx * dy;
          }
        total += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++n;
      }
  return total / static_cast<double>(n);
}

TEST(MotionKernel, LengthOneIsDelta) {
  const auto k = blur::motion_kernel(1, 0.7);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_DOUBLE_EQ(k.weights[0], 1.0);
}

TEST(MotionKernel, NonnegativeOddAndNormalized) {
  for (int len = 1; len <= blur::kMaxMotionLength; len += 3) {
    for (double angle : {0.0, 0.3, std::numbers::pi / 4, 1.2, 2.9}) {
      const auto k = blur::motion_kernel(len, angle);
      EXPECT_EQ(k.size() % 2, 1u);
      EXPECT_GE(static_cast<int>(k.size()), len);
      EXPECT_NEAR(kernel_sum(k), 1.0, 1e-12);
      for (auto v : k.weights.data()) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(MotionKernel, HorizontalLineOccupiesCentreRow) {
  const auto k = blur::motion_kernel(7, 0.0);
  ASSERT_EQ(k.size(), 7u);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 7; ++x) {
      if (y == 3) {
        EXPECT_GT(k.weights.at({y, x}), 0.05);
      } else {
        EXPECT_EQ(k.weights.at({y, x}), 0.0);
      }
    }
}

TEST(MotionKernel, RandomIsSeededAndInRange) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = blur::random_motion_kernel(3, 11, s), b = blur::random_motion_kernel(3, 11, s);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_GE(a.size(), 3u);
    EXPECT_LE(a.size(), 11u);
  }
  EXPECT_THROW(blur::motion_kernel(0, 0.0), std::invalid_argument);
  EXPECT_THROW(blur::motion_kernel(32, 0.0), std::invalid_argument);
  EXPECT_THROW(blur::random_motion_kernel(5, 3, 1), std::invalid_argument);
}

TEST(SynthBlur, DeltaKernelIsIdentity) {
  const auto img = random_tensor<float>({3, 9, 12}, 4, 0.0, 1.0);
  EXPECT_EQ(blur::synth_blur(img, blur::motion_kernel(1, 0.0)), img);
}

TEST(SynthBlur, ConstantImageStaysConstant) {
  const Tensor<float> img({3, 20, 20}, 0.37f);
  const auto out = blur::synth_blur(img, blur::motion_kernel(9, 0.8));
  for (auto v : out.data()) EXPECT_NEAR(v, 0.37f, 1e-6);
}

TEST(SynthBlur, InteriorMatchesDirectConvolution) {
  const auto img = random_tensor<float>({1, 16, 16}, 5, 0.0, 1.0);
  const auto k = blur::motion_kernel(5, 0.6);
  const auto out = blur::synth_blur(img, k);
  const long r = 2;
  for (long y = r; y < 16 - r; ++y)
    for (long x = r; x < 16 - r; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i)
        for (long j = -r; j <= r; ++j)
          s += k.weights.at({std::size_t(i + r), std::size_t(j + r)}) * img.at({0, std::size_t(y - i), std::size_t(x - j)});
      EXPECT_NEAR(out.at({0, std::size_t(y), std::size_t(x)}), s, 1e-6);
    }
}

TEST(SynthBlur, BlurAlongInvariantDirectionIsIdentity) {
  // Stripes constant along the motion direction are left untouched.
  Tensor<float> img({1, 24, 24});
  for (std::size_t y = 0; y < 24; ++y)
    for (std::size_t x = 0; x < 24; ++x) img.at({0, y, x}) = (x % 2) ? 0.8f : 0.2f;
  const auto out = blur::synth_blur(img, blur::motion_kernel(5, std::numbers::pi / 2));
  for (std::size_t y = 0; y < 24; ++y)
    for (std::size_t x = 0; x < 24; ++x) EXPECT_NEAR(out.at({0, y, x}), img.at({0, y, x}), 1e-6);
}

TEST(SynthBlur, KernelLargerThanImageThrows) {
  const Tensor<float> img({3, 8, 8}, 0.5f);
  EXPECT_THROW(blur::synth_blur(img, blur::motion_kernel(11, 0.0)), ShapeError);
}

TEST(Psnr, KnownValues) {
  Tensor<double> a({3, 8, 8}, 0.5), b({3, 8, 8}, 0.6);
  EXPECT_NEAR(metrics::psnr(a, b), 20.0, 1e-9);
  Tensor<double> c({3, 8, 8}, 0.5 + 1.0 / 255.0);
  EXPECT_NEAR(metrics::psnr(a, c), 48.1308, 1e-4);
  EXPECT_EQ(metrics::psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(metrics::psnr(a, b, 255.0), 20.0 + 20.0 * std::log10(255.0), 1e-9);
  EXPECT_THROW(metrics::psnr(a, Tensor<double>({3, 8, 9})), ShapeError);
}

TEST(Psnr, MatchesMseFormula) {
  const auto a = random_tensor({3, 10, 10}, 1, 0, 1), b = random_tensor({3, 10, 10}, 2, 0, 1);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(metrics::psnr(a, b), -10.0 * std::log10(sq / 300.0), 1e-9);
}

TEST(Ssim, IdentityConstantsAndSymmetry) {
  const auto a = random_tensor({3, 20, 24}, 3, 0, 1), b = random_tensor({3, 20, 24}, 4, 0, 1);
  EXPECT_NEAR(metrics::ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(metrics::ssim(a, b), metrics::ssim(b, a), 1e-12);
  Tensor<double> k1({16, 16}, 0.3), k2({16, 16}, 0.3);
  EXPECT_NEAR(metrics::ssim(k1, k2), 1.0, 1e-12);
  // Two constants: the structure term is 1 and only luminance differs.
  Tensor<double> k3({16, 16}, 0.6);
  EXPECT_NEAR(metrics::ssim(k1, k3), (2 * 0.18 + 1e-4) / (0.09 + 0.36 + 1e-4), 1e-12);
}

TEST(Ssim, MatchesDirectOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto a = random_tensor({2, 15, 18}, 10 + s, 0, 1);
    auto b = a;
    const auto noise = random_tensor({2, 15, 18}, 20 + s, -0.2, 0.2);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] += noise[i];
    const double got = metrics::ssim(a, b);
    EXPECT_NEAR(got, direct_ssim(a, b), 1e-6);
    EXPECT_GT(got, 0.0);
    EXPECT_LT(got, 1.0);
  }
}

TEST(Ssim, RejectsSmallImages) {
  Tensor<double> a({3, 10, 30});
  EXPECT_THROW(metrics::ssim(a, a), ShapeError);
  EXPECT_THROW(metrics::ssim(Tensor<double>({2, 3, 12, 12}), Tensor<double>({2, 3, 12, 12})), ShapeError);
}

TEST(ImageIo, RoundTripIsQuantized) {
  const auto dir = scratch_dir("png");
  const auto img = random_tensor<float>({3, 7, 13}, 6, -0.2, 1.2);
  const auto path = (dir / "a.png").string();
  image_io::write_png(path, img);
  const auto back = image_io::read_png(path);
  EXPECT_EQ(back, image_io::quantize(img));
  for (std::size_t i = 0; i < img.numel(); ++i) {
    EXPECT_NEAR(back[i], std::clamp(img[i], 0.0f, 1.0f), 0.5f / 255.0f + 1e-6f);
  }
  EXPECT_THROW(image_io::read_png((dir / "missing.png").string()), image_io::ImageError);
}

TEST(Dataset, SyntheticImagesAreDeterministicAndVaried) {
  const auto a = dataset::synthetic_image(32, 40, 9);
  EXPECT_EQ(a.shape(), (Shape{3, 32, 40}));
  EXPECT_EQ(a, dataset::synthetic_image(32, 40, 9));
  EXPECT_NE(a, dataset::synthetic_image(32, 40, 10));
  for (auto v : a.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const auto samples = dataset::synthetic_samples(3, 16, 16, 1);
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(samples[0].name, "synth00000");
  EXPECT_FALSE(samples[0].blurred.has_value());
}

TEST(Dataset, DirectoryRoundTrip) {
  const auto dir = scratch_dir("dir");
  auto samples = dataset::synthetic_samples(3, 20, 24, 2);
  samples[1].blurred = blur::synth_blur(samples[1].sharp, blur::motion_kernel(5, 0.4));
  dataset::write_directory(dir.string(), samples);
  const auto back = dataset::load_directory(dir.string());
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].name, samples[i].name);
    EXPECT_EQ(back[i].sharp, image_io::quantize(samples[i].sharp));
    EXPECT_EQ(back[i].blurred.has_value(), i == 1);
  }
  EXPECT_EQ(*back[1].blurred, image_io::quantize(*samples[1].blurred));
}

TEST(Dataset, DirectoryErrors) {
  EXPECT_THROW(dataset::load_directory("/nonexistent/gldb"), dataset::DatasetError);
  const auto empty = scratch_dir("empty");
  EXPECT_THROW(dataset::load_directory(empty.string()), dataset::DatasetError);
  const auto bad = scratch_dir("mismatch");
  image_io::write_png((bad / "x_sharp.png").string(), Tensor<float>({3, 8, 8}));
  image_io::write_png((bad / "x_blur.png").string(), Tensor<float>({3, 8, 9}));
  EXPECT_THROW(dataset::load_directory(bad.string()), dataset::DatasetError);
}

TEST(Dataset, DrawPair) {
  dataset::Sample s{"s", dataset::synthetic_image(40, 48, 3), std::nullopt};
  const auto p = dataset::draw_pair(s, 32, {}, 5);
  EXPECT_EQ(p.sharp.shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(p.blurred.shape(), p.sharp.shape());
  EXPECT_NE(p.blurred, p.sharp);
  const auto q = dataset::draw_pair(s, 32, {}, 5);
  EXPECT_EQ(p.sharp, q.sharp);
  EXPECT_EQ(p.blurred, q.blurred);
  EXPECT_THROW(dataset::draw_pair(s, 41, {}, 5), dataset::DatasetError);

  // Recorded blur is cropped at the same window as the sharp image.
  dataset::Sample r{"r", s.sharp, s.sharp};
  const auto pr = dataset::draw_pair(r, 16, {}, 8);
  EXPECT_EQ(pr.blurred, pr.sharp);

  // A sample exactly the crop size is used whole.
  dataset::Sample whole{"w", dataset::synthetic_image(16, 16, 4), std::nullopt};
  EXPECT_EQ(dataset::evaluation_pairs({whole}, 16, {}, 1)[0].sharp, whole.sharp);
}

}  // namespace
}  // namespace gldb
