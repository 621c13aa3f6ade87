#pragma once

#include <vector>

#include "wdn/autodiff.hpp"

namespace wdn {

enum class Padding {
  Reflect,  ///< reflect-101 ("same" output for stride 1)
  Valid,    ///< no padding
};

/// Index of `i` folded into [0, n) by mirroring about the edge samples
/// without repeating them (… 2 1 | 0 1 2 … n-2 n-1 | n-2 …).
inline long reflect101(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Pointwise arithmetic. Tensor-tensor forms require identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, double s);
template <typename T> Var<T> shift(const Var<T>& a, double s);

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);

/// Cross-correlation of x[N,Cin,H,W] with kernel[Cout,Cin,kh,kw]; `bias` may be null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, int stride = 1,
              Padding padding = Padding::Reflect);

/// Per-position softmax over k same-shaped branches (max-subtracted).
template <typename T> std::vector<Var<T>> softmax_across(const std::vector<Var<T>>& branches);

/// Arithmetic mean of every element, as a 1-element tensor.
template <typename T> Var<T> mean(const Var<T>& x);
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

/// Same value, no gradient path back to `x`.
template <typename T> Var<T> detach(const Var<T>& x);

struct BatchNormOptions {
  double momentum = 0.9;
  double eps = 1e-5;
  bool training = true;
};

/// Per-channel batch normalisation with affine `gamma`/`beta` [C]. In training
/// mode batch statistics are used and the running buffers (plain leaves) are
/// updated in place as running = momentum*running + (1-momentum)*batch.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Var<T>& running_mean,
                  const Var<T>& running_var, const BatchNormOptions& options);

}  // namespace wdn
