#include "wdn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "wdn/imaging.hpp"
#include "wdn/metrics.hpp"
#include "wdn/model.hpp"
#include "wdn/ops.hpp"
#include "wdn/training.hpp"

namespace wdn {

template <typename T>
std::vector<double> analytic_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                      const std::vector<Coordinate>& coordinates) {
  for (const auto& leaf : leaves) leaf->grad_buffer().fill(T(0));
  backward(build());
  std::vector<double> out;
  for (const Coordinate& c : coordinates) out.push_back(static_cast<double>(leaves.at(c.leaf)->grad[c.index]));
  return out;
}

template <typename T>
std::vector<double> numeric_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                     const std::vector<Coordinate>& coordinates, double step) {
  std::vector<double> out;
  for (const Coordinate& c : coordinates) {
    Node<T>& leaf = *leaves.at(c.leaf);
    const T original = leaf.value[c.index];
    leaf.value[c.index] = static_cast<T>(original + step);
    const double up_step = static_cast<double>(leaf.value[c.index]) - static_cast<double>(original);
    const double up = static_cast<double>(build()->value[0]);
    leaf.value[c.index] = static_cast<T>(original - step);
    const double down_step = static_cast<double>(original) - static_cast<double>(leaf.value[c.index]);
    const double down = static_cast<double>(build()->value[0]);
    leaf.value[c.index] = original;
    out.push_back((up - down) / (up_step + down_step));
  }
  return out;
}

std::size_t KinkAwareProbe::kinks() const { return static_cast<std::size_t>(std::count(kink.begin(), kink.end(), true)); }

template <typename T>
KinkAwareProbe kink_aware_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                   const std::vector<Coordinate>& coordinates, double step, double tolerance) {
  struct Sample {
    double wide, narrow, curvature_drift;
  };
  std::vector<Sample> samples;
  const double f0 = static_cast<double>(build()->value[0]);
  for (const Coordinate& c : coordinates) {
    Node<T>& leaf = *leaves.at(c.leaf);
    const T original = leaf.value[c.index];
    // Returns f at the perturbed value and the offset T could represent.
    auto at = [&](double offset) {
      leaf.value[c.index] = static_cast<T>(original + offset);
      const double actual = static_cast<double>(leaf.value[c.index]) - static_cast<double>(original);
      const double f = static_cast<double>(build()->value[0]);
      leaf.value[c.index] = original;
      return std::pair{f, actual};
    };
    const auto [up, hu] = at(step);
    const auto [down, hd] = at(-step);
    const auto [up2, hu2] = at(step / 2);
    const auto [down2, hd2] = at(-step / 2);
    const double wide = (up - down) / (hu - hd);
    const double narrow = (up2 - down2) / (hu2 - hd2);
    // One-sided quotient gap: linear in h when smooth, a jump at a kink.
    const double gap_wide = (up - f0) / hu - (f0 - down) / -hd;
    const double gap_narrow = (up2 - f0) / hu2 - (f0 - down2) / -hd2;
    samples.push_back({wide, narrow, gap_wide - 2.0 * gap_narrow});
  }
  double norm = 0.0;
  for (const Sample& s : samples) norm += s.wide * s.wide;
  norm = std::sqrt(norm);
  // Evaluation roundoff of f shows up in both tests at a few ulps of f over h.
  const double floor = 16.0 * std::numeric_limits<T>::epsilon() * std::abs(f0) / step;
  KinkAwareProbe out;
  for (const Sample& s : samples) {
    out.gradient.push_back(s.wide);
    const double drift = std::max(std::abs(s.wide - s.narrow), std::abs(s.curvature_drift));
    out.kink.push_back(drift > tolerance * norm + floor);
  }
  return out;
}

GradientComparison compare_excluding_kinks(const std::vector<double>& analytic, const KinkAwareProbe& numeric) {
  if (analytic.size() != numeric.gradient.size()) throw ContractError("compare_excluding_kinks: size mismatch");
  std::vector<double> a, n;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (numeric.kink[i]) continue;
    a.push_back(analytic[i]);
    n.push_back(numeric.gradient[i]);
  }
  return {relative_error(a, n), analytic.size(), analytic.size() - a.size()};
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw ContractError("relative_error: size mismatch");
  double diff = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    a2 += analytic[i] * analytic[i];
    n2 += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(a2, n2));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

template <typename T>
double gradient_error(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                      const std::vector<Coordinate>& coordinates, const GradCheckOptions& options) {
  std::vector<double> analytic = analytic_gradient(build, leaves, coordinates);
  for (double& g : analytic) g *= 1.0 + options.perturb;
  return relative_error(analytic, numeric_gradient(build, leaves, coordinates, options.step));
}

template <typename T>
std::vector<Coordinate> sample_coordinates(const std::vector<Var<T>>& leaves, std::size_t per_leaf, Rng& rng) {
  std::vector<Coordinate> out;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const std::size_t n = leaves[l]->value.size();
    if (n <= per_leaf) {
      for (std::size_t i = 0; i < n; ++i) out.push_back({l, i});
      continue;
    }
    std::set<std::size_t> picked;
    while (picked.size() < per_leaf) picked.insert(rng.below(n));
    for (std::size_t i : picked) out.push_back({l, i});
  }
  return out;
}

template <typename T>
std::vector<Coordinate> sample_coordinates_global(const std::vector<Var<T>>& leaves, std::size_t count, Rng& rng) {
  std::vector<std::size_t> offsets{0};
  for (const auto& leaf : leaves) offsets.push_back(offsets.back() + leaf->value.size());
  std::set<std::size_t> picked;
  while (picked.size() < std::min(count, offsets.back())) picked.insert(rng.below(offsets.back()));
  std::vector<Coordinate> out;
  for (std::size_t flat : picked) {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    const auto leaf = static_cast<std::size_t>(it - offsets.begin());
    out.push_back({leaf, flat - *it});
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Magnitudes in [0.1, 1] with random sign, so that a 1e-3 probe never crosses a relu kink.
template <typename T>
Tensor<T> kink_free_tensor(const Shape& shape, Rng& rng) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>((rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0));
  return t;
}

/// Scalar probe mean(out * R) with a fixed random R, so every output element matters.
template <typename T>
Var<T> project(const Var<T>& out, std::uint64_t seed) {
  Rng rng(seed);
  return mean(mul(out, constant(random_tensor<T>(out->value.shape(), rng))));
}

template <typename T>
std::vector<Var<T>> trainable_leaves(ParameterStore<T>& store) {
  std::vector<Var<T>> out;
  for (auto& [name, p] : store.entries())
    if (p.trainable) out.push_back(p.node);
  return out;
}

enum class Probe { Single, Composite };

class Suite {
 public:
  explicit Suite(const GradCheckOptions& options) : options_(options), rng_(options.seed) {}

  template <typename T>
  void check(const std::string& name, const std::vector<Var<T>>& leaves, const std::function<Var<T>()>& build,
             Probe probe = Probe::Single, std::size_t global = 0) {
    const auto start = std::chrono::steady_clock::now();
    const auto coords = coordinates(leaves, global);
    if (probe == Probe::Single) {
      record(name, "f64", {gradient_error(build, leaves, coords, options_), coords.size(), 0}, 1e-5, start);
      return;
    }
    std::vector<double> analytic = analytic_gradient(build, leaves, coords);
    for (double& g : analytic) g *= 1.0 + options_.perturb;
    const auto numeric = kink_aware_gradient(build, leaves, coords, options_.composite_step, options_.kink_tolerance);
    record(name, "f64", compare_excluding_kinks(analytic, numeric), 1e-5, start);
  }

  template <typename T>
  std::vector<Coordinate> coordinates(const std::vector<Var<T>>& leaves, std::size_t global) {
    Rng pick = rng_.stream(results_.size() + 1);
    return global > 0 ? sample_coordinates_global(leaves, global, pick)
                      : sample_coordinates(leaves, options_.coordinates_per_leaf, pick);
  }

  void record(const std::string& name, const std::string& precision, const GradientComparison& comparison,
              double threshold, std::chrono::steady_clock::time_point start) {
    GradCheckResult r;
    r.name = name;
    r.precision = precision;
    r.error = comparison.error;
    r.probed = comparison.probed;
    r.excluded = comparison.excluded;
    r.threshold = threshold;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results_.push_back(r);
  }

  const GradCheckOptions& options() const { return options_; }
  Rng& rng() { return rng_; }
  std::vector<GradCheckResult> results() const { return results_; }

 private:
  GradCheckOptions options_;
  Rng rng_;
  std::vector<GradCheckResult> results_;
};

using D = double;

void primitive_checks(Suite& s) {
  Rng& rng = s.rng();
  {
    auto x = variable(random_tensor<D>({1, 2, 6, 6}, rng));
    auto k = variable(random_tensor<D>({3, 2, 3, 3}, rng));
    auto b = variable(random_tensor<D>({3}, rng));
    s.check<D>("conv2d", {x, k, b}, [=] { return project(conv2d(x, k, b), 11); });
    s.check<D>("conv2d.stride2", {x, k, b}, [=] { return project(conv2d(x, k, b, 2), 12); });
    s.check<D>("conv2d.valid", {x, k, b}, [=] { return project(conv2d(x, k, b, 1, Padding::Valid), 13); });
    auto k5 = variable(random_tensor<D>({2, 2, 5, 5}, rng));
    s.check<D>("conv2d.5x5", {x, k5}, [=] { return project(conv2d(x, k5, Var<D>{}), 14); });
  }
  {
    auto a = variable(random_tensor<D>({1, 2, 6, 6}, rng));
    auto b = variable(random_tensor<D>({1, 2, 6, 6}, rng));
    s.check<D>("elementwise", {a, b}, [=] {
      auto num = add(mul(a, b), scale(sub(a, b), 0.5));
      return project(div(num, shift(mul(b, b), 1.0)), 21);
    });
    auto k = variable(kink_free_tensor<D>({1, 2, 6, 6}, rng));
    s.check<D>("relu", {k}, [=] { return project(relu(k), 22); });
    s.check<D>("sigmoid", {a}, [=] { return project(sigmoid(scale(a, 3.0)), 23); });
  }
  {
    std::vector<Var<D>> branches;
    for (int i = 0; i < 4; ++i) branches.push_back(variable(random_tensor<D>({1, 1, 6, 6}, rng, -2, 2)));
    s.check<D>("softmax_across", branches, [=] {
      const auto w = softmax_across(branches);
      Var<D> total = project(w[0], 31);
      for (std::size_t i = 1; i < w.size(); ++i) total = add(total, project(w[i], 31 + i));
      return total;
    });
  }
  {
    auto a = variable(random_tensor<D>({1, 2, 6, 6}, rng));
    auto b = variable(random_tensor<D>({1, 2, 6, 6}, rng));
    s.check<D>("mean", {a}, [=] { return mean(mul(a, a)); });
    s.check<D>("mse", {a, b}, [=] { return mse(a, b); });
    s.check<D>("concat_slice_reshape", {a, b}, [=] {
      auto joined = concat_channels(std::vector<Var<D>>{a, b});
      auto part = slice_channels(joined, 1, 2);
      return project(reshape(part, {1, 1, 12, 6}), 41);
    });
    auto x = variable(random_tensor<D>({1, 2, 8, 8}, rng));
    s.check<D>("space_to_depth", {x}, [=] { return project(space_to_depth(x, 2), 42); });
    auto deep = variable(random_tensor<D>({1, 8, 3, 3}, rng));
    s.check<D>("depth_to_space", {deep}, [=] { return project(depth_to_space(deep, 2), 43); });
  }
  {
    auto x = variable(random_tensor<D>({2, 3, 4, 4}, rng));
    auto gamma = variable(random_tensor<D>({3}, rng, 0.5, 1.5));
    auto beta = variable(random_tensor<D>({3}, rng));
    auto rm = constant(Tensor<D>({3}));
    auto rv = constant(Tensor<D>({3}, 1.0));
    s.check<D>("batch_norm", {x, gamma, beta}, [=] { return project(batch_norm(x, gamma, beta, rm, rv, {}), 51); });
  }
}

void composite_checks(Suite& s) {
  Rng& rng = s.rng();
  {
    auto y = variable(kink_free_tensor<D>({1, 2, 6, 6}, rng));
    auto k = variable(random_tensor<D>({2, 2, 3, 3}, rng));
    auto b = variable(random_tensor<D>({2}, rng));
    s.check<D>("pixel_calibrate", {y, k, b}, [=] { return project(pixel_calibrate(y, k, b), 61); });
  }
  {
    auto x = variable(random_tensor<D>({1, 2, 15, 15}, rng));
    s.check<D>("gaussian_blur", {x}, [=] { return project(gaussian_blur(x), 62); });
  }
  {
    auto a = variable(random_tensor<D>({2, 1, 16, 16}, rng, 0.0, 1.0));
    auto b = variable(random_tensor<D>({2, 1, 16, 16}, rng, 0.0, 1.0));
    s.check<D>("ssim", {a, b}, [=] { return ssim(a, b); });
    s.check<D>("loss_output", {a, b}, [=] { return loss_output(a, b); });
  }

  const WdnConfig desk = WdnConfig::desk();
  for (CalibrationVariant variant : {CalibrationVariant::PixelCalibration, CalibrationVariant::Relu,
                                     CalibrationVariant::ReluBatchNorm, CalibrationVariant::Highway}) {
    WdnConfig config = desk;
    config.activation = variant;
    ParameterStore<D> store;
    Block<D> block(store, "b", "g", 1, 1, config, 7);
    auto x = variable(random_tensor<D>({2, 1, 8, 8}, rng));
    auto leaves = trainable_leaves(store);
    leaves.push_back(x);
    s.check<D>("processing_block." + to_string(variant), leaves, [&block, x] { return project(block.forward(x, true), 71); }, Probe::Composite);
  }
  {
    ParameterStore<D> store;
    UpsamplingModule<D> module(store, "m", "g", desk, 8);
    std::vector<Var<D>> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(variable(random_tensor<D>({1, 1, 6, 6}, rng)));
    auto leaves = trainable_leaves(store);
    leaves.insert(leaves.end(), inputs.begin(), inputs.end());
    s.check<D>("upsampling_module", leaves, [&module, inputs] { return project(module.forward(inputs, true).output, 81); },
               Probe::Composite);
  }
  {
    ParameterStore<D> store;
    OutputModule<D> module(store, "o", "g", desk, 9);
    auto hf = variable(random_tensor<D>({1, 1, 12, 12}, rng, 0.0, 1.0));
    auto lf = variable(random_tensor<D>({1, 1, 12, 12}, rng, 0.0, 1.0));
    auto leaves = trainable_leaves(store);
    leaves.push_back(hf);
    leaves.push_back(lf);
    s.check<D>("output_module", leaves, [&module, hf, lf] { return project(module.forward(hf, lf, true).output, 82); },
               Probe::Composite);
  }
}

SubProblemSet smooth_sample(Rng& rng, const WdnConfig& config) {
  ImagePlane hr(48, 48);
  for (auto& v : hr.values) v = rng.uniform();
  return build_subproblems(gaussian_blur(hr), config.scale, config);
}

// Desk model on a 12x12 LR input, final loss, 20 parameters sampled across all stages.
void full_model_check(Suite& s) {
  const WdnConfig config = WdnConfig::desk();
  const SubProblemSet set = smooth_sample(s.rng(), config);
  ParameterStore<D> store;
  WdnModel<D> model(config, store, 10);
  const Batch<D> batch = make_batch<D>(std::span<const SubProblemSet>(&set, 1));
  s.check<D>("wdn_forward", trainable_leaves(store),
             [&model, batch] { return loss_output(model.forward(batch.inputs, true).output, batch.set3); },
             Probe::Composite, 20);
}

// The 32-bit analytic gradient against central differences of the same
// weights evaluated in 64-bit: 32-bit evaluation noise of the loss would
// swamp the difference quotient of the small stage-1 gradients.
void full_model_check_f32(Suite& s) {
  const auto start = std::chrono::steady_clock::now();
  const WdnConfig config = WdnConfig::desk();
  const SubProblemSet set = smooth_sample(s.rng(), config);
  ParameterStore<float> store32;
  WdnModel<float> model32(config, store32, 10);
  ParameterStore<D> store64;
  WdnModel<D> model64(config, store64, 10);
  for (auto& [name, p] : store64.entries()) p.node->value = store32.at(name).node->value.cast<D>();

  const Batch<float> batch32 = make_batch<float>(std::span<const SubProblemSet>(&set, 1));
  const Batch<D> batch64 = make_batch<D>(std::span<const SubProblemSet>(&set, 1));
  const auto leaves32 = trainable_leaves(store32);
  const auto leaves64 = trainable_leaves(store64);
  const auto coords = s.coordinates(leaves64, 20);
  std::vector<double> analytic = analytic_gradient<float>(
      [&] { return loss_output(model32.forward(batch32.inputs, true).output, batch32.set3); }, leaves32, coords);
  for (double& g : analytic) g *= 1.0 + s.options().perturb;
  const auto numeric = kink_aware_gradient<D>(
      [&] { return loss_output(model64.forward(batch64.inputs, true).output, batch64.set3); }, leaves64, coords,
      s.options().composite_step, s.options().kink_tolerance);
  s.record("wdn_forward", "f32", compare_excluding_kinks(analytic, numeric), 1e-3, start);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options) {
  Suite suite(options);
  primitive_checks(suite);
  composite_checks(suite);
  full_model_check(suite);
  full_model_check_f32(suite);
  return suite.results();
}

#define WDN_INSTANTIATE_GRADCHECK(T)                                                                           \
  template double gradient_error<T>(const std::function<Var<T>()>&, const std::vector<Var<T>>&,                \
                                    const std::vector<Coordinate>&, const GradCheckOptions&);                  \
  template std::vector<double> analytic_gradient<T>(const std::function<Var<T>()>&, const std::vector<Var<T>>&, \
                                                    const std::vector<Coordinate>&);                           \
  template std::vector<double> numeric_gradient<T>(const std::function<Var<T>()>&, const std::vector<Var<T>>&,  \
                                                   const std::vector<Coordinate>&, double);                    \
  template KinkAwareProbe kink_aware_gradient<T>(const std::function<Var<T>()>&, const std::vector<Var<T>>&,     \
                                                 const std::vector<Coordinate>&, double, double);             \
  template std::vector<Coordinate> sample_coordinates<T>(const std::vector<Var<T>>&, std::size_t, Rng&);      \
  template std::vector<Coordinate> sample_coordinates_global<T>(const std::vector<Var<T>>&, std::size_t, Rng&);

WDN_INSTANTIATE_GRADCHECK(float)
WDN_INSTANTIATE_GRADCHECK(double)

}  // namespace wdn
