#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "wdn/autodiff.hpp"
#include "wdn/tensor.hpp"

namespace wdn {

/// Single-channel image, row-major, nominal range [0,1].
///
/// Values are stored as double but every producer in this library rounds them
/// to multiples of 2^-24. Within [-1,1] that grid is exactly representable in
/// 32-bit floats and closed under subtraction, so `lf = plane - hf` is exact
/// in either precision and hf + lf reconstructs the plane bit for bit.
struct ImagePlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ImagePlane() = default;
  ImagePlane(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  std::size_t size() const { return values.size(); }
  bool same_dims(const ImagePlane& other) const { return height == other.height && width == other.width; }
  bool operator==(const ImagePlane&) const = default;
};

struct ColorImage {
  ImagePlane r, g, b;

  std::size_t height() const { return r.height; }
  std::size_t width() const { return r.width; }
  static ColorImage from_gray(const ImagePlane& gray) { return {gray, gray, gray}; }
};

struct YCbCr {
  ImagePlane y, cb, cr;
};

struct FrequencyPair {
  ImagePlane hf;
  ImagePlane lf;
};

/// Sobel derivative kernels, applied as cross-correlation.
namespace sobel {
inline constexpr std::array<std::array<double, 3>, 3> kHorizontal{{{+1, 0, -1}, {+2, 0, -2}, {+1, 0, -1}}};
inline constexpr std::array<std::array<double, 3>, 3> kVertical{{{+1, +2, +1}, {0, 0, 0}, {-1, -2, -1}}};
}  // namespace sobel

inline constexpr int kSuppressorSize = 13;
inline constexpr double kSuppressorSigma = 0.7;

/// Rounds to the nearest multiple of 2^-24 (ties to even).
double to_working_precision(double v);
void to_working_precision(ImagePlane& plane);

// BT.601 studio swing, every channel divided by 255 (Y in [16/255, 235/255]).
YCbCr rgb_to_ycbcr(const ColorImage& image);
ColorImage ycbcr_to_rgb(const YCbCr& image);
ImagePlane luminance(const ColorImage& image);

/// Separable cubic convolution (a = -0.5) with half-pixel centres. When
/// shrinking, the kernel is stretched by 1/scale (antialiasing). Borders use
/// symmetric (edge-repeating) extension. Output clamped to [0,1].
ImagePlane bicubic_resize(const ImagePlane& plane, std::size_t out_h, std::size_t out_w);
ColorImage bicubic_resize(const ColorImage& image, std::size_t out_h, std::size_t out_w);

/// hf = |Sobel gradient| / max (zero plane when max is 0); lf = plane - hf.
FrequencyPair sobel_separate(const ImagePlane& plane);
/// Gradient magnitude before max-normalisation (reflect-101 borders).
ImagePlane sobel_magnitude(const ImagePlane& plane);

/// size x size Gaussian sampled at integer offsets, normalised to unit sum, row-major.
std::vector<double> gaussian_kernel(int size = kSuppressorSize, double sigma = kSuppressorSigma);
ImagePlane gaussian_blur(const ImagePlane& plane, int size = kSuppressorSize, double sigma = kSuppressorSigma);
/// Graph version with fixed (non-trainable) weights, applied per channel.
template <typename T>
Var<T> gaussian_blur(const Var<T>& x, int size = kSuppressorSize, double sigma = kSuppressorSigma);

/// [N,C,H,W] -> [N,C*b*b,H/b,W/b]; output channel c*b*b + r*b + s holds the
/// pixel at in-block offset (r, s).
template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, std::size_t block);
template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, std::size_t block);
template <typename T>
Var<T> space_to_depth(const Var<T>& x, std::size_t block);
template <typename T>
Var<T> depth_to_space(const Var<T>& x, std::size_t block);

/// Stacks equally sized planes as a [N,1,H,W] tensor.
template <typename T>
Tensor<T> planes_to_tensor(std::span<const ImagePlane> planes);
template <typename T>
Tensor<T> plane_to_tensor(const ImagePlane& plane);
template <typename T>
ImagePlane tensor_to_plane(const Tensor<T>& x, std::size_t n = 0, std::size_t c = 0);
/// Splits a [N,C,H,W] tensor into C planes of sample n.
template <typename T>
std::vector<ImagePlane> tensor_to_planes(const Tensor<T>& x, std::size_t n = 0);

ImagePlane clamp01(ImagePlane plane);

ColorImage read_png(const std::filesystem::path& path);
void write_png(const ColorImage& image, const std::filesystem::path& path);
void write_png(const ImagePlane& gray, const std::filesystem::path& path);

}  // namespace wdn
