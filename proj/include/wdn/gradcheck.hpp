#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wdn/autodiff.hpp"
#include "wdn/rng.hpp"

namespace wdn {

struct GradCheckOptions {
  /// Probe step for single operations.
  double step = 1e-3;
  /// Probe step for blocks, modules and the full model, whose relu kinks a
  /// 1e-3 probe would straddle.
  double composite_step = 1e-5;
  /// Composite probes flag a coordinate as straddling a kink when its
  /// difference quotients disagree by more than this times the numeric norm.
  double kink_tolerance = 2e-6;
  /// Test hook: analytic gradients are scaled by (1 + perturb) before comparison.
  double perturb = 0.0;
  std::uint64_t seed = 1;
  /// Coordinates probed per leaf (all when the leaf is smaller).
  std::size_t coordinates_per_leaf = 24;
};

struct Coordinate {
  std::size_t leaf;
  std::size_t index;
};

/// Norm-wise relative error ||a - n|| / max(||a||, ||n||) between analytic
/// gradients `a` and central differences `n` over the given coordinates.
/// `build` must rebuild the scalar loss from the current leaf values.
template <typename T>
double gradient_error(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                      const std::vector<Coordinate>& coordinates, const GradCheckOptions& options);

template <typename T>
std::vector<double> analytic_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                      const std::vector<Coordinate>& coordinates);
/// Central differences (f(x+h) - f(x-h)) / 2h, using the step actually representable in T.
template <typename T>
std::vector<double> numeric_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                     const std::vector<Coordinate>& coordinates, double step);
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// Central differences plus a per-coordinate flag for probes that straddle a
/// nondifferentiable point. Uses f(x), f(x +- h) and f(x +- h/2); a smooth
/// function makes the two central quotients agree to O(h^2) and the
/// second-difference quotient scale linearly in h. Neither test reads the
/// analytic gradient.
struct KinkAwareProbe {
  std::vector<double> gradient;
  std::vector<bool> kink;
  std::size_t kinks() const;
};

template <typename T>
KinkAwareProbe kink_aware_gradient(const std::function<Var<T>()>& build, const std::vector<Var<T>>& leaves,
                                   const std::vector<Coordinate>& coordinates, double step, double tolerance);

struct GradientComparison {
  double error = 0.0;
  std::size_t probed = 0;
  std::size_t excluded = 0;  ///< coordinates dropped as kink straddles
};

/// Norm-wise error over the coordinates that do not straddle a kink.
GradientComparison compare_excluding_kinks(const std::vector<double>& analytic, const KinkAwareProbe& numeric);

/// Up to `per_leaf` distinct random coordinates of each leaf.
template <typename T>
std::vector<Coordinate> sample_coordinates(const std::vector<Var<T>>& leaves, std::size_t per_leaf, Rng& rng);

/// `count` coordinates drawn across all leaves, uniformly by element.
template <typename T>
std::vector<Coordinate> sample_coordinates_global(const std::vector<Var<T>>& leaves, std::size_t count, Rng& rng);

struct GradCheckResult {
  std::string name;
  std::string precision;
  double error = 0.0;
  double threshold = 0.0;
  double seconds = 0.0;
  std::size_t probed = 0;
  std::size_t excluded = 0;
  /// More than a quarter of the probes on kinks makes a check inconclusive, which counts as failure.
  bool passed() const { return error <= threshold && excluded * 4 <= probed; }
};

/// Every differentiable operation, composite block and a full desk-size
/// forward pass: 64-bit against 1e-5, plus the 32-bit full model against 1e-3.
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace wdn
