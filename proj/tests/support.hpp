#pragma once

#include <unistd.h>

// Shared fixtures and brute-force reference implementations for the tests.
// The references deliberately avoid the library's helpers (reflect tables,
// separable passes, Gaussian builders) so they fail independently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wdn/imaging.hpp"
#include "wdn/model.hpp"
#include "wdn/rng.hpp"
#include "wdn/tensor.hpp"

namespace wdn::test {

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
std::vector<T> to_vector(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

inline ImagePlane random_plane(std::size_t h, std::size_t w, Rng& rng) {
  ImagePlane p(h, w);
  for (auto& v : p.values) v = to_working_precision(rng.uniform());
  return p;
}

inline ImagePlane constant_plane(std::size_t h, std::size_t w, double value) {
  return ImagePlane(h, w, to_working_precision(value));
}

/// Deterministic synthetic photo: a tilted gradient with flat disks and
/// rectangles of random shade, clamped to [0,1].
inline ImagePlane scene(std::uint64_t seed, std::size_t h, std::size_t w, int shapes = 6) {
  Rng rng(seed);
  ImagePlane p(h, w);
  const double gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3), base = rng.uniform(0.3, 0.7);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      p(r, c) = base + gx * (static_cast<double>(c) / static_cast<double>(w) - 0.5) +
                gy * (static_cast<double>(r) / static_cast<double>(h) - 0.5);
  const double extent = static_cast<double>(std::min(h, w));
  for (int s = 0; s < shapes; ++s) {
    const double cx = rng.uniform(0, static_cast<double>(w)), cy = rng.uniform(0, static_cast<double>(h));
    const double rad = rng.uniform(0.06, 0.23) * extent, shade = rng.uniform();
    const bool disk = rng.coin();
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
        const bool inside = disk ? dx * dx + dy * dy < rad * rad : std::abs(dx) < rad && std::abs(dy) < 0.6 * rad;
        if (inside) p(r, c) = shade;
      }
  }
  for (auto& v : p.values) v = to_working_precision(std::clamp(v, 0.0, 1.0));
  return p;
}

inline ColorImage color_scene(std::uint64_t seed, std::size_t h, std::size_t w) {
  return {scene(seed, h, w), scene(seed + 1000, h, w), scene(seed + 2000, h, w)};
}

/// Mirror about the edge sample without repeating it, by walking the index back.
inline long mirror(long i, long n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

/// Five nested loops over n, co, y, x and the taps (ci, i, j); reflect-101 borders, stride 1.
inline Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& k, const std::vector<double>& bias) {
  const long n = static_cast<long>(x.dim(0)), ci_n = static_cast<long>(x.dim(1)), h = static_cast<long>(x.dim(2)),
             w = static_cast<long>(x.dim(3));
  const long co_n = static_cast<long>(k.dim(0)), kh = static_cast<long>(k.dim(2)), kw = static_cast<long>(k.dim(3));
  Tensor<double> out({x.dim(0), k.dim(0), x.dim(2), x.dim(3)});
  for (long b = 0; b < n; ++b)
    for (long co = 0; co < co_n; ++co)
      for (long y = 0; y < h; ++y)
        for (long xx = 0; xx < w; ++xx) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
          for (long ci = 0; ci < ci_n; ++ci)
            for (long i = 0; i < kh; ++i)
              for (long j = 0; j < kw; ++j) {
                const long sy = mirror(y + i - kh / 2, h), sx = mirror(xx + j - kw / 2, w);
                acc += k.at(static_cast<std::size_t>(co), static_cast<std::size_t>(ci), static_cast<std::size_t>(i),
                            static_cast<std::size_t>(j)) *
                       x.at(static_cast<std::size_t>(b), static_cast<std::size_t>(ci), static_cast<std::size_t>(sy),
                            static_cast<std::size_t>(sx));
              }
          out.at(static_cast<std::size_t>(b), static_cast<std::size_t>(co), static_cast<std::size_t>(y),
                 static_cast<std::size_t>(xx)) = acc;
        }
  return out;
}

/// Keys' cubic convolution kernel with a = -0.5.
inline double keys_cubic(double x) {
  const double a = -0.5, t = std::abs(x);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<long> index;
  std::vector<double> weight;
};

/// Source taps of output sample `o` when resampling `in_len` to `out_len`:
/// half-pixel centres, kernel stretched when shrinking, edge-repeating borders.
inline Taps resample_taps(std::size_t o, std::size_t in_len, std::size_t out_len) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const double stretch = scale < 1.0 ? 1.0 / scale : 1.0;
  const double centre = (static_cast<double>(o) + 0.5) / scale - 0.5;
  const long first = static_cast<long>(std::floor(centre - 2.0 * stretch));
  const long count = static_cast<long>(std::ceil(4.0 * stretch)) + 1;
  Taps taps;
  double total = 0.0;
  for (long t = 0; t < count; ++t) {
    const long src = first + t;
    const double wgt = keys_cubic((centre - static_cast<double>(src)) / stretch) / stretch;
    long idx = src;
    const long n = static_cast<long>(in_len);
    while (idx < 0 || idx >= n) idx = idx < 0 ? -idx - 1 : 2 * n - 1 - idx;
    taps.index.push_back(idx);
    taps.weight.push_back(wgt);
    total += wgt;
  }
  for (double& wgt : taps.weight) wgt /= total;
  return taps;
}

/// Per output pixel: each row tap is filtered horizontally, then the rows are combined.
inline ImagePlane naive_bicubic(const ImagePlane& in, std::size_t out_h, std::size_t out_w) {
  ImagePlane out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const Taps rows = resample_taps(r, in.height, out_h);
    for (std::size_t c = 0; c < out_w; ++c) {
      const Taps cols = resample_taps(c, in.width, out_w);
      double acc = 0.0;
      for (std::size_t i = 0; i < rows.index.size(); ++i) {
        double horizontal = 0.0;
        for (std::size_t j = 0; j < cols.index.size(); ++j)
          horizontal += cols.weight[j] *
                        in(static_cast<std::size_t>(rows.index[i]), static_cast<std::size_t>(cols.index[j]));
        acc += rows.weight[i] * horizontal;
      }
      out(r, c) = to_working_precision(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

inline double naive_psnr(const ImagePlane& a, const ImagePlane& b) {
  long double sum = 0.0L;
  for (std::size_t r = 0; r < a.height; ++r)
    for (std::size_t c = 0; c < a.width; ++c) {
      const long double d = static_cast<long double>(a(r, c)) - static_cast<long double>(b(r, c));
      sum += d * d;
    }
  const long double mse = sum / static_cast<long double>(a.height * a.width);
  return static_cast<double>(10.0L * std::log10(1.0L / mse));
}

/// Windowed SSIM in the two-pass (mean first, then centred moments) form.
inline double naive_ssim(const ImagePlane& a, const ImagePlane& b) {
  const int win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> g(static_cast<std::size_t>(win * win));
  double norm = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double d2 = (i - win / 2) * (i - win / 2) + (j - win / 2) * (j - win / 2);
      g[static_cast<std::size_t>(i * win + j)] = std::exp(-d2 / (2.0 * sigma * sigma));
      norm += g[static_cast<std::size_t>(i * win + j)];
    }
  for (double& v : g) v /= norm;
  double total = 0.0;
  std::size_t positions = 0;
  for (std::size_t r = 0; r + win <= a.height; ++r)
    for (std::size_t c = 0; c + win <= a.width; ++c) {
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double wgt = g[static_cast<std::size_t>(i * win + j)];
          mx += wgt * a(r + static_cast<std::size_t>(i), c + static_cast<std::size_t>(j));
          my += wgt * b(r + static_cast<std::size_t>(i), c + static_cast<std::size_t>(j));
        }
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double wgt = g[static_cast<std::size_t>(i * win + j)];
          const double dx = a(r + static_cast<std::size_t>(i), c + static_cast<std::size_t>(j)) - mx;
          const double dy = b(r + static_cast<std::size_t>(i), c + static_cast<std::size_t>(j)) - my;
          vx += wgt * dx * dx;
          vy += wgt * dy * dy;
          cov += wgt * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++positions;
    }
  return total / static_cast<double>(positions);
}

/// Scratch directory removed on destruction.
/// Network inputs of a low-resolution plane: bicubic upsampling, then the model's channel layout.
template <typename T>
std::vector<Var<T>> network_inputs(const ImagePlane& lr, const WdnConfig& config) {
  const auto up = bicubic_resize(lr, lr.height * static_cast<std::size_t>(config.scale),
                                 lr.width * static_cast<std::size_t>(config.scale));
  std::vector<Var<T>> out;
  for (const auto& p : network_input_planes(up, config)) out.push_back(constant(plane_to_tensor<T>(p)));
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("wdn-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace wdn::test
