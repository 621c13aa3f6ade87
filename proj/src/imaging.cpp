#include <algorithm>
#include <cmath>
#include <string>

#include "wdn/imaging.hpp"
#include "wdn/ops.hpp"

namespace wdn {
namespace {

// rows: Y, Cb, Cr offsets and RGB coefficients on the 0..255 scale
constexpr double kOffset[3] = {16.0, 128.0, 128.0};
constexpr double kForward[3][3] = {
    {65.481, 128.553, 24.966},
    {-37.797, -74.203, 112.0},
    {112.0, -93.786, -18.214},
};

struct Inverse3 {
  double m[3][3];
};

Inverse3 invert_forward() {
  const auto& a = kForward;
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  Inverse3 inv{};
  inv.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  inv.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  inv.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  inv.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  inv.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  inv.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  inv.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  inv.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  inv.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return inv;
}

void require_same_dims(const ColorImage& image) {
  if (!image.r.same_dims(image.g) || !image.r.same_dims(image.b))
    throw ContractError("color image planes differ in size");
}

double cubic(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

long symmetric_index(long i, long n) {
  const long period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

struct Contributions {
  std::size_t taps = 0;
  std::vector<long> index;    // out_len * taps
  std::vector<double> weight;  // out_len * taps
};

Contributions contributions(std::size_t in_len, std::size_t out_len) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const bool shrink = scale < 1.0;
  const double kernel_width = shrink ? 4.0 / scale : 4.0;
  Contributions c;
  c.taps = static_cast<std::size_t>(std::ceil(kernel_width)) + 2;
  c.index.resize(out_len * c.taps);
  c.weight.resize(out_len * c.taps);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const long left = static_cast<long>(std::floor(u - kernel_width / 2.0));
    double total = 0.0;
    for (std::size_t t = 0; t < c.taps; ++t) {
      const long j = left + static_cast<long>(t);
      const double x = u - static_cast<double>(j);
      const double w = shrink ? scale * cubic(scale * x) : cubic(x);
      c.weight[i * c.taps + t] = w;
      c.index[i * c.taps + t] = symmetric_index(j, static_cast<long>(in_len));
      total += w;
    }
    for (std::size_t t = 0; t < c.taps; ++t) c.weight[i * c.taps + t] /= total;
  }
  return c;
}

}  // namespace

double to_working_precision(double v) { return std::nearbyint(v * 0x1.0p24) * 0x1.0p-24; }

void to_working_precision(ImagePlane& plane) {
  for (double& v : plane.values) v = to_working_precision(v);
}

YCbCr rgb_to_ycbcr(const ColorImage& image) {
  require_same_dims(image);
  YCbCr out{ImagePlane(image.height(), image.width()), ImagePlane(image.height(), image.width()),
            ImagePlane(image.height(), image.width())};
  ImagePlane* dst[3] = {&out.y, &out.cb, &out.cr};
  for (std::size_t i = 0; i < image.r.size(); ++i) {
    const double rgb[3] = {image.r.values[i], image.g.values[i], image.b.values[i]};
    for (int k = 0; k < 3; ++k) {
      const double v = kOffset[k] + kForward[k][0] * rgb[0] + kForward[k][1] * rgb[1] + kForward[k][2] * rgb[2];
      dst[k]->values[i] = to_working_precision(v / 255.0);
    }
  }
  return out;
}

ColorImage ycbcr_to_rgb(const YCbCr& image) {
  static const Inverse3 inv = invert_forward();
  const std::size_t h = image.y.height, w = image.y.width;
  if (!image.y.same_dims(image.cb) || !image.y.same_dims(image.cr))
    throw ContractError("ycbcr planes differ in size");
  ColorImage out{ImagePlane(h, w), ImagePlane(h, w), ImagePlane(h, w)};
  ImagePlane* dst[3] = {&out.r, &out.g, &out.b};
  for (std::size_t i = 0; i < image.y.size(); ++i) {
    const double centered[3] = {image.y.values[i] * 255.0 - kOffset[0], image.cb.values[i] * 255.0 - kOffset[1],
                                image.cr.values[i] * 255.0 - kOffset[2]};
    for (int k = 0; k < 3; ++k)
      dst[k]->values[i] = inv.m[k][0] * centered[0] + inv.m[k][1] * centered[1] + inv.m[k][2] * centered[2];
  }
  return out;
}

ImagePlane luminance(const ColorImage& image) { return rgb_to_ycbcr(image).y; }

ImagePlane bicubic_resize(const ImagePlane& plane, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ContractError("bicubic_resize: output dims must be >= 1");
  if (plane.height == 0 || plane.width == 0) throw ContractError("bicubic_resize: empty input");
  const Contributions cols = contributions(plane.width, out_w);
  const Contributions rows = contributions(plane.height, out_h);

  // horizontal pass
  std::vector<double> tmp(plane.height * out_w);
  for (std::size_t r = 0; r < plane.height; ++r)
    for (std::size_t c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < cols.taps; ++t)
        acc += cols.weight[c * cols.taps + t] *
               plane.values[r * plane.width + static_cast<std::size_t>(cols.index[c * cols.taps + t])];
      tmp[r * out_w + c] = acc;
    }

  ImagePlane out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r)
    for (std::size_t c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < rows.taps; ++t)
        acc += rows.weight[r * rows.taps + t] * tmp[static_cast<std::size_t>(rows.index[r * rows.taps + t]) * out_w + c];
      out(r, c) = to_working_precision(std::clamp(acc, 0.0, 1.0));
    }
  return out;
}

ColorImage bicubic_resize(const ColorImage& image, std::size_t out_h, std::size_t out_w) {
  return {bicubic_resize(image.r, out_h, out_w), bicubic_resize(image.g, out_h, out_w),
          bicubic_resize(image.b, out_h, out_w)};
}

ImagePlane sobel_magnitude(const ImagePlane& plane) {
  const long h = static_cast<long>(plane.height), w = static_cast<long>(plane.width);
  if (h == 0 || w == 0) throw ContractError("sobel: empty plane");
  ImagePlane mag(plane.height, plane.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double dm = 0.0, dn = 0.0;
      for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j) {
          const double v = plane(static_cast<std::size_t>(reflect101(r + i - 1, h)),
                                 static_cast<std::size_t>(reflect101(c + j - 1, w)));
          dm += sobel::kHorizontal[i][j] * v;
          dn += sobel::kVertical[i][j] * v;
        }
      mag(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = std::sqrt(dm * dm + dn * dn);
    }
  return mag;
}

FrequencyPair sobel_separate(const ImagePlane& plane) {
  FrequencyPair pair{sobel_magnitude(plane), ImagePlane(plane.height, plane.width)};
  const double peak = *std::max_element(pair.hf.values.begin(), pair.hf.values.end());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double hf = peak > 0.0 ? to_working_precision(pair.hf.values[i] / peak) : 0.0;
    pair.hf.values[i] = hf;
    pair.lf.values[i] = plane.values[i] - hf;
  }
  return pair;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ContractError("gaussian kernel size must be odd, got " + std::to_string(size));
  if (sigma <= 0.0) throw ContractError("gaussian sigma must be positive");
  const int radius = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size * size));
  double total = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double y = i - radius, x = j - radius;
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(i * size + j)] = v;
      total += v;
    }
  for (double& v : k) v /= total;
  return k;
}

ImagePlane gaussian_blur(const ImagePlane& plane, int size, double sigma) {
  const std::vector<double> k = gaussian_kernel(size, sigma);
  const long h = static_cast<long>(plane.height), w = static_cast<long>(plane.width);
  const long radius = size / 2;
  if ((h < 2 || w < 2) && radius > 0) throw InputTooSmallError("gaussian_blur: input-too-small for reflective padding");
  ImagePlane out(plane.height, plane.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long i = 0; i < size; ++i)
        for (long j = 0; j < size; ++j)
          acc += k[static_cast<std::size_t>(i * size + j)] *
                 plane(static_cast<std::size_t>(reflect101(r + i - radius, h)),
                       static_cast<std::size_t>(reflect101(c + j - radius, w)));
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = to_working_precision(acc);
    }
  return out;
}

template <typename T>
Var<T> gaussian_blur(const Var<T>& x, int size, double sigma) {
  const Shape s = x->value.shape();
  require_rank4(s, "gaussian_blur");
  const std::vector<double> k = gaussian_kernel(size, sigma);
  Tensor<T> kernel({1, 1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  for (std::size_t i = 0; i < k.size(); ++i) kernel[i] = static_cast<T>(k[i]);
  auto flat = s[1] == 1 ? x : reshape(x, {s[0] * s[1], 1, s[2], s[3]});
  auto blurred = conv2d(flat, constant(std::move(kernel)), Var<T>{}, 1, Padding::Reflect);
  return s[1] == 1 ? blurred : reshape(blurred, s);
}

ImagePlane clamp01(ImagePlane plane) {
  for (double& v : plane.values) v = std::clamp(v, 0.0, 1.0);
  return plane;
}

template Var<float> gaussian_blur<float>(const Var<float>&, int, double);
template Var<double> gaussian_blur<double>(const Var<double>&, int, double);

}  // namespace wdn
