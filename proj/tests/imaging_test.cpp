#include <gtest/gtest.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "support.hpp"
#include "wdn/imaging.hpp"
#include "wdn/ops.hpp"

namespace wdn {
namespace {

using test::random_plane;

TEST(Color, Bt601StudioSwingEndpoints) {
  const auto black = rgb_to_ycbcr(ColorImage::from_gray(ImagePlane(1, 1, 0.0)));
  const auto white = rgb_to_ycbcr(ColorImage::from_gray(ImagePlane(1, 1, 1.0)));
  EXPECT_NEAR(black.y(0, 0), 16.0 / 255.0, 1e-7);
  EXPECT_NEAR(white.y(0, 0), 235.0 / 255.0, 1e-7);
  EXPECT_NEAR(black.cb(0, 0), 128.0 / 255.0, 1e-7);
  EXPECT_NEAR(white.cr(0, 0), 128.0 / 255.0, 1e-7);
}

TEST(Color, RoundTripWithinTolerance) {
  const auto img = test::color_scene(21, 17, 23);
  const auto back = ycbcr_to_rgb(rgb_to_ycbcr(img));
  double worst = 0.0;
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    worst = std::max({worst, std::abs(back.r.values[i] - img.r.values[i]), std::abs(back.g.values[i] - img.g.values[i]),
                      std::abs(back.b.values[i] - img.b.values[i])});
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Bicubic, ConstantPlaneStaysConstant) {
  const auto plane = test::constant_plane(9, 13, 0.37);
  for (auto [h, w] : {std::pair{36, 52}, {3, 4}, {9, 13}, {20, 7}}) {
    const auto out = bicubic_resize(plane, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    for (double v : out.values) EXPECT_NEAR(v, plane.values[0], 1e-7);
  }
}

TEST(Bicubic, SameSizeIsIdentity) {
  Rng rng(22);
  const auto plane = random_plane(11, 14, rng);
  const auto out = bicubic_resize(plane, 11, 14);
  for (std::size_t i = 0; i < plane.size(); ++i) EXPECT_NEAR(out.values[i], plane.values[i], 1e-6);
}

TEST(Bicubic, ReproducesLinearRampInInterior) {
  ImagePlane ramp(4, 16);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 16; ++c) ramp(r, c) = to_working_precision(0.1 + 0.05 * static_cast<double>(c));
  const auto out = bicubic_resize(ramp, 8, 32);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 6; c < 26; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / 2.0 - 0.5;
      EXPECT_NEAR(out(r, c), 0.1 + 0.05 * u, 1e-6) << "column " << c;
    }
}

TEST(Bicubic, BitIdenticalToScalarLoopReference) {
  Rng rng(23);
  const auto plane = random_plane(8, 8, rng);
  EXPECT_EQ(bicubic_resize(plane, 32, 32), test::naive_bicubic(plane, 32, 32));
}

TEST(Bicubic, MatchesReferenceOnRandomResizes) {
  Rng rng(24);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t h = 4 + rng.below(20), w = 4 + rng.below(20);
    const std::size_t oh = 2 + rng.below(40), ow = 2 + rng.below(40);
    const auto plane = random_plane(h, w, rng);
    const auto got = bicubic_resize(plane, oh, ow);
    const auto want = test::naive_bicubic(plane, oh, ow);
    for (std::size_t i = 0; i < got.size(); ++i)
      ASSERT_NEAR(got.values[i], want.values[i], 1e-7) << h << "x" << w << " -> " << oh << "x" << ow;
  }
}

TEST(Bicubic, ClampsToUnitInterval) {
  ImagePlane step(8, 8, 0.0);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 4; c < 8; ++c) step(r, c) = 1.0;
  for (double v : bicubic_resize(step, 32, 32).values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Sobel, KernelsAsPrinted) {
  const std::array<std::array<double, 3>, 3> m{{{1, 0, -1}, {2, 0, -2}, {1, 0, -1}}};
  const std::array<std::array<double, 3>, 3> n{{{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}}};
  EXPECT_EQ(sobel::kHorizontal, m);
  EXPECT_EQ(sobel::kVertical, n);
}

TEST(Sobel, ConstantPlaneHasNoHighFrequency) {
  const auto plane = test::constant_plane(6, 7, 0.6);
  const auto pair = sobel_separate(plane);
  for (double v : pair.hf.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(pair.lf, plane);
}

TEST(Sobel, StepEdgeExample) {
  ImagePlane plane(4, 4, 0.0);
  for (std::size_t r = 0; r < 4; ++r) plane(r, 2) = plane(r, 3) = 1.0;
  const auto mag = sobel_magnitude(plane);
  const auto pair = sobel_separate(plane);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(mag(r, 1), 4.0);
    EXPECT_EQ(pair.hf(r, 0), 0.0);
    EXPECT_EQ(pair.hf(r, 1), 1.0);
    EXPECT_EQ(pair.hf(r, 2), 1.0);
    EXPECT_EQ(pair.hf(r, 3), 0.0);
  }
}

TEST(Sobel, MagnitudeMatchesLoopOracle) {
  Rng rng(25);
  const auto plane = random_plane(9, 12, rng);
  const auto mag = sobel_magnitude(plane);
  const long h = 9, w = 12;
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double dm = 0, dn = 0;
      for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j) {
          const double v = plane(static_cast<std::size_t>(test::mirror(r + i - 1, h)),
                                 static_cast<std::size_t>(test::mirror(c + j - 1, w)));
          dm += sobel::kHorizontal[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * v;
          dn += sobel::kVertical[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * v;
        }
      EXPECT_NEAR(mag(static_cast<std::size_t>(r), static_cast<std::size_t>(c)), std::hypot(dm, dn), 1e-12);
    }
}

TEST(Sobel, ExactReconstructionOnRandomPlanes) {
  Rng rng(26);
  for (int i = 0; i < 100; ++i) {
    const auto plane = random_plane(64, 64, rng);
    const auto pair = sobel_separate(plane);
    for (std::size_t k = 0; k < plane.size(); ++k) {
      ASSERT_EQ(pair.hf.values[k] + pair.lf.values[k], plane.values[k]);
      ASSERT_GE(pair.hf.values[k], 0.0);
      ASSERT_LE(pair.hf.values[k], 1.0);
    }
  }
}

TEST(SpaceToDepth, DeclaredChannelOrder) {
  const Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto y = space_to_depth(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 1, 1}));
  EXPECT_EQ(test::to_vector(y), (std::vector<double>{1, 2, 3, 4}));
}

TEST(SpaceToDepth, RoundTripIsBitwise) {
  Rng rng(27);
  for (std::size_t b : {2u, 4u}) {
    const auto x = test::random_tensor({2, 3, 8, 12}, rng);
    const auto y = space_to_depth(x, b);
    EXPECT_EQ(y.shape(), (Shape{2, 3 * b * b, 8 / b, 12 / b}));
    EXPECT_EQ(depth_to_space(y, b), x);
    auto sorted_x = test::to_vector(x), sorted_y = test::to_vector(y);
    std::sort(sorted_x.begin(), sorted_x.end());
    std::sort(sorted_y.begin(), sorted_y.end());
    EXPECT_EQ(sorted_x, sorted_y);
  }
}

TEST(SpaceToDepth, NestedBlocksComposeToBlockFour) {
  Tensor<double> x({1, 1, 8, 8});
  for (std::size_t i = 0; i < 64; ++i) x[i] = static_cast<double>(i);
  const auto twice = space_to_depth(space_to_depth(x, 2), 2);
  const auto once = space_to_depth(x, 4);
  for (std::size_t r1 = 0; r1 < 2; ++r1)
    for (std::size_t s1 = 0; s1 < 2; ++s1)
      for (std::size_t r2 = 0; r2 < 2; ++r2)
        for (std::size_t s2 = 0; s2 < 2; ++s2)
          for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t q = 0; q < 2; ++q)
              EXPECT_EQ(twice.at(0, (r1 * 2 + s1) * 4 + r2 * 2 + s2, p, q),
                        once.at(0, (2 * r2 + r1) * 4 + (2 * s2 + s1), p, q));
}

TEST(SpaceToDepth, GraphVersionRoutesGradients) {
  Rng rng(28);
  auto x = variable(test::random_tensor({1, 2, 4, 4}, rng));
  auto y = space_to_depth(x, 2);
  EXPECT_EQ(y->value, space_to_depth(x->value, 2));
  auto w = test::random_tensor(y->value.shape(), rng);
  backward(mean(mul(y, constant(w))));
  EXPECT_EQ(x->grad.shape(), x->value.shape());
  const auto expected = depth_to_space(w, 2);
  for (std::size_t i = 0; i < x->grad.size(); ++i) EXPECT_NEAR(x->grad[i], expected[i] / 32.0, 1e-15);
}

TEST(SpaceToDepth, IndivisibleDimsThrow) {
  EXPECT_THROW(space_to_depth(Tensor<double>({1, 1, 6, 5}), 2), ContractError);
  EXPECT_THROW(depth_to_space(Tensor<double>({1, 3, 2, 2}), 2), ContractError);
}

TEST(Gaussian, KernelSampledAndNormalised) {
  const auto k = gaussian_kernel();
  ASSERT_EQ(k.size(), 13u * 13u);
  double sum = 0.0, raw_sum = 0.0;
  for (double v : k) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j) raw_sum += std::exp(-(i * i + j * j) / (2 * 0.7 * 0.7));
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j)
      EXPECT_NEAR(k[static_cast<std::size_t>((i + 6) * 13 + j + 6)], std::exp(-(i * i + j * j) / (2 * 0.7 * 0.7)) / raw_sum,
                  1e-15);
  EXPECT_EQ(kSuppressorSize, 13);
  EXPECT_EQ(kSuppressorSigma, 0.7);
}

TEST(Gaussian, ConstantUnchangedAndImpulseGivesKernel) {
  for (double v : gaussian_blur(test::constant_plane(10, 10, 0.42)).values) EXPECT_NEAR(v, 0.42, 1e-6);
  ImagePlane delta(15, 15, 0.0);
  delta(7, 7) = 1.0;
  const auto out = gaussian_blur(delta);
  const auto k = gaussian_kernel();
  for (std::size_t r = 0; r < 15; ++r)
    for (std::size_t c = 0; c < 15; ++c) {
      const bool inside = r >= 1 && r <= 13 && c >= 1 && c <= 13;
      EXPECT_NEAR(out(r, c), inside ? k[(r - 1) * 13 + (c - 1)] : 0.0, 1e-7);
    }
}

TEST(Gaussian, NeverWidensRange) {
  Rng rng(29);
  for (int i = 0; i < 10; ++i) {
    const auto plane = random_plane(20, 17, rng);
    const auto out = gaussian_blur(plane);
    const auto [lo, hi] = std::minmax_element(plane.values.begin(), plane.values.end());
    for (double v : out.values) {
      EXPECT_GE(v, *lo - 1e-6);
      EXPECT_LE(v, *hi + 1e-6);
    }
  }
}

TEST(Gaussian, GraphOpMatchesPlaneVersion) {
  Rng rng(30);
  const auto plane = random_plane(16, 14, rng);
  const auto graph = gaussian_blur(constant(plane_to_tensor<double>(plane)));
  const auto direct = gaussian_blur(plane);
  const auto via_graph = tensor_to_plane(graph->value);
  for (std::size_t i = 0; i < plane.size(); ++i) EXPECT_NEAR(via_graph.values[i], direct.values[i], 1e-7);
}

TEST(Planes, TensorConversionsRoundTrip) {
  Rng rng(31);
  std::vector<ImagePlane> planes{random_plane(5, 6, rng), random_plane(5, 6, rng)};
  const auto t = planes_to_tensor<double>(planes);
  EXPECT_EQ(t.shape(), (Shape{2, 1, 5, 6}));
  EXPECT_EQ(tensor_to_plane(t, 1), planes[1]);
  const auto stacked = Tensor<double>({1, 2, 5, 6}, test::to_vector(t));
  EXPECT_EQ(tensor_to_planes(stacked), planes);
}

class PngTest : public ::testing::Test {
 protected:
  test::TempDir dir{"png"};
};

TEST_F(PngTest, WriteReadWithinQuantisationStep) {
  const auto img = test::color_scene(32, 13, 19);
  write_png(img, dir / "a.png");
  const auto back = read_png(dir / "a.png");
  ASSERT_EQ(back.height(), 13u);
  ASSERT_EQ(back.width(), 19u);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    EXPECT_LE(std::abs(back.r.values[i] - img.r.values[i]), 1.0 / 510.0 + 1e-12);
    EXPECT_LE(std::abs(back.g.values[i] - img.g.values[i]), 1.0 / 510.0 + 1e-12);
    EXPECT_LE(std::abs(back.b.values[i] - img.b.values[i]), 1.0 / 510.0 + 1e-12);
  }
}

TEST_F(PngTest, PureRedPixel) {
  ColorImage red{ImagePlane(1, 1, 1.0), ImagePlane(1, 1, 0.0), ImagePlane(1, 1, 0.0)};
  write_png(red, dir / "red.png");
  const auto back = read_png(dir / "red.png");
  EXPECT_EQ(back.r(0, 0), 1.0);
  EXPECT_EQ(back.g(0, 0), 0.0);
  EXPECT_EQ(back.b(0, 0), 0.0);
}

TEST_F(PngTest, GrayscaleFileReadsAsEqualChannels) {
  Rng rng(33);
  const auto gray = random_plane(6, 5, rng);
  write_png(gray, dir / "g.png");
  const auto back = read_png(dir / "g.png");
  EXPECT_EQ(back.r, back.g);
  EXPECT_EQ(back.r, back.b);
  for (std::size_t i = 0; i < gray.size(); ++i) EXPECT_LE(std::abs(back.r.values[i] - gray.values[i]), 1.0 / 510.0 + 1e-12);
}

TEST_F(PngTest, SixteenBitIsRejected) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 3;
  image.height = 2;
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> pixels(6, 40000);
  const auto path = (dir / "deep.png").string();
  ASSERT_TRUE(png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr));
  EXPECT_THROW(read_png(path), UnsupportedFormatError);
}

TEST_F(PngTest, MissingAndGarbageFilesThrow) {
  EXPECT_THROW(read_png(dir / "absent.png"), IoError);
  {
    std::FILE* f = std::fopen((dir / "junk.png").c_str(), "wb");
    std::fputs("not a png", f);
    std::fclose(f);
  }
  EXPECT_THROW(read_png(dir / "junk.png"), IoError);
}

}  // namespace
}  // namespace wdn
