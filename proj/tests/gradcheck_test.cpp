#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "wdn/gradcheck.hpp"
#include "wdn/ops.hpp"

namespace wdn {
namespace {

TEST(RelativeError, NormWise) {
  EXPECT_EQ(relative_error({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(relative_error({0, 0}, {0, 0}), 0.0);
  EXPECT_NEAR(relative_error({3, 0}, {0, 4}), 5.0 / 4.0, 1e-15);
  EXPECT_NEAR(relative_error({1.0, 1.0}, {1.01, 1.0}), 0.01 / std::sqrt(1.01 * 1.01 + 1.0), 1e-15);
}

TEST(NumericGradient, QuadraticIsExactForCentralDifferences) {
  Rng rng(31);
  auto x = variable(test::random_tensor<double>({3, 4}, rng, -2, 2));
  const std::function<Var<double>()> build = [&] { return mean(mul(x, x)); };
  std::vector<Coordinate> all;
  for (std::size_t i = 0; i < 12; ++i) all.push_back({0, i});
  const auto numeric = numeric_gradient<double>(build, {x}, all, 1e-3);
  const auto analytic = analytic_gradient<double>(build, {x}, all);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(numeric[i], x->value[i] / 6.0, 1e-10);
    EXPECT_NEAR(analytic[i], x->value[i] / 6.0, 1e-15);
  }
  GradCheckOptions options;
  EXPECT_LT(gradient_error<double>(build, {x}, all, options), 1e-9);
  options.perturb = 0.01;
  EXPECT_NEAR(gradient_error<double>(build, {x}, all, options), 0.01 / 1.01, 1e-6);
}

TEST(KinkProbe, FlagsOnlyStraddlingCoordinates) {
  Tensor<double> v({1, 4});
  v[0] = 1e-7;  // within the probe step of the relu kink
  v[1] = 0.5;
  v[2] = -0.5;
  v[3] = -3e-6;
  auto x = variable(v);
  const std::function<Var<double>()> build = [&] { return mean(mul(relu(x), x)); };
  const std::vector<Coordinate> all{{0, 0}, {0, 1}, {0, 2}, {0, 3}};
  const auto probe = kink_aware_gradient<double>(build, {x}, all, 1e-5, 2e-6);
  ASSERT_EQ(probe.kink.size(), 4u);
  EXPECT_TRUE(probe.kink[0]);
  EXPECT_FALSE(probe.kink[1]);
  EXPECT_FALSE(probe.kink[2]);
  EXPECT_TRUE(probe.kink[3]);
  EXPECT_EQ(probe.kinks(), 2u);
  EXPECT_NEAR(probe.gradient[1], 0.25, 1e-9);  // d/dx (x^2 / 4) at 0.5

  const auto cmp = compare_excluding_kinks(analytic_gradient<double>(build, {x}, all), probe);
  EXPECT_EQ(cmp.probed, 4u);
  EXPECT_EQ(cmp.excluded, 2u);
  EXPECT_LT(cmp.error, 1e-8);
}

TEST(Sampling, DistinctInBoundsAndSeeded) {
  Rng rng(32);
  std::vector<Var<double>> leaves{variable(Tensor<double>({5})), variable(Tensor<double>({200})),
                                  variable(Tensor<double>({3, 30}))};
  const auto coords = sample_coordinates(leaves, 24, rng);
  EXPECT_EQ(coords.size(), 5u + 24u + 24u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& c : coords) {
    EXPECT_LT(c.index, leaves[c.leaf]->value.size());
    EXPECT_TRUE(seen.insert({c.leaf, c.index}).second);
  }
  Rng a(4), b(4);
  const auto g1 = sample_coordinates_global(leaves, 50, a), g2 = sample_coordinates_global(leaves, 50, b);
  ASSERT_EQ(g1.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(g1[i].leaf, g2[i].leaf);
    EXPECT_EQ(g1[i].index, g2[i].index);
  }
}

TEST(GradCheckResult, InconclusiveWhenKinksDominate) {
  GradCheckResult r{"x", "f64", 1e-9, 1e-5, 0.0, 8, 2};
  EXPECT_TRUE(r.passed());
  r.excluded = 3;
  EXPECT_FALSE(r.passed());
  r.excluded = 0;
  r.error = 2e-5;
  EXPECT_FALSE(r.passed());
}

// Both suite runs in one test so the expensive forward passes are paid once per variant.
TEST(Suite, PassesAndDetectsPerturbedGradients) {
  const auto clean = run_gradcheck_suite(GradCheckOptions{});
  std::set<std::string> names;
  bool has_f32_model = false;
  for (const auto& r : clean) {
    EXPECT_TRUE(r.passed()) << r.name << " " << r.precision << " error " << r.error << " excluded " << r.excluded
                            << "/" << r.probed;
    names.insert(r.name);
    if (r.name == "wdn_forward" && r.precision == "f32") {
      has_f32_model = true;
      EXPECT_EQ(r.threshold, 1e-3);
    } else {
      EXPECT_EQ(r.threshold, 1e-5) << r.name;
    }
  }
  EXPECT_TRUE(has_f32_model);
  for (const char* required : {"conv2d", "relu", "sigmoid", "softmax_across", "space_to_depth", "depth_to_space",
                               "batch_norm", "pixel_calibrate", "ssim", "upsampling_module", "output_module",
                               "wdn_forward"})
    EXPECT_TRUE(names.count(required)) << required;

  GradCheckOptions perturbed;
  perturbed.perturb = 1e-2;
  std::size_t failed = 0;
  for (const auto& r : run_gradcheck_suite(perturbed)) failed += r.passed() ? 0 : 1;
  EXPECT_EQ(failed, clean.size());
}

}  // namespace
}  // namespace wdn
