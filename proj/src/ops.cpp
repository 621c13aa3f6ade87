#include "wdn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace wdn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a->value.shape() != b->value.shape())
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a->value.shape()) + " vs " +
                        shape_str(b->value.shape()));
}

template <typename T, typename F>
Tensor<T> map_values(const Tensor<T>& a, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename T, typename F>
Tensor<T> zip_values(const Tensor<T>& a, const Tensor<T>& b, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

struct ConvGeometry {
  long n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  long k_rows() const { return cin * kh * kw; }
  long cols() const { return ho * wo; }
};

// Maps output row/column plus kernel tap to a source coordinate.
std::vector<long> tap_index(long out_len, long k, long stride, long pad, long in_len, bool reflect) {
  std::vector<long> idx(static_cast<std::size_t>(out_len * k));
  for (long o = 0; o < out_len; ++o)
    for (long t = 0; t < k; ++t) {
      long src = o * stride + t - pad;
      idx[static_cast<std::size_t>(o * k + t)] = reflect ? reflect101(src, in_len) : src;
    }
  return idx;
}

// For tap j, the output columns [lo, hi) read source column ow + j - pad
// directly, so those spans are plain copies; only the edges need the table.
struct TapSpan {
  long lo, hi, offset;
};

std::vector<TapSpan> tap_spans(const ConvGeometry& g, const std::vector<long>& cols) {
  std::vector<TapSpan> spans;
  for (long j = 0; j < g.kw; ++j) {
    TapSpan span{0, 0, 0};
    if (g.stride == 1) {
      span.offset = j - (g.wo == g.w ? g.kw / 2 : 0);
      span.lo = std::min(g.wo, std::max(0L, -span.offset));
      span.hi = std::max(span.lo, std::min(g.wo, g.w - span.offset));
      for (long ow = span.lo; ow < span.hi; ++ow)
        if (cols[static_cast<std::size_t>(ow * g.kw + j)] != ow + span.offset) {
          span.lo = span.hi = 0;
          break;
        }
    }
    spans.push_back(span);
  }
  return spans;
}

template <typename T>
void im2col(const T* image, const ConvGeometry& g, const std::vector<long>& rows, const std::vector<long>& cols,
            const std::vector<TapSpan>& spans, T* col) {
  for (long c = 0; c < g.cin; ++c)
    for (long i = 0; i < g.kh; ++i)
      for (long j = 0; j < g.kw; ++j) {
        T* dst = col + ((c * g.kh + i) * g.kw + j) * g.cols();
        const T* plane = image + c * g.h * g.w;
        const TapSpan& span = spans[static_cast<std::size_t>(j)];
        for (long oh = 0; oh < g.ho; ++oh, dst += g.wo) {
          const T* src_row = plane + rows[static_cast<std::size_t>(oh * g.kh + i)] * g.w;
          for (long ow = 0; ow < span.lo; ++ow) dst[ow] = src_row[cols[static_cast<std::size_t>(ow * g.kw + j)]];
          std::copy(src_row + span.lo + span.offset, src_row + span.hi + span.offset, dst + span.lo);
          for (long ow = std::max(span.hi, span.lo); ow < g.wo; ++ow)
            dst[ow] = src_row[cols[static_cast<std::size_t>(ow * g.kw + j)]];
        }
      }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, const std::vector<long>& rows, const std::vector<long>& cols,
                const std::vector<TapSpan>& spans, T* image) {
  for (long c = 0; c < g.cin; ++c)
    for (long i = 0; i < g.kh; ++i)
      for (long j = 0; j < g.kw; ++j) {
        const T* src = col + ((c * g.kh + i) * g.kw + j) * g.cols();
        T* plane = image + c * g.h * g.w;
        const TapSpan& span = spans[static_cast<std::size_t>(j)];
        for (long oh = 0; oh < g.ho; ++oh, src += g.wo) {
          T* dst_row = plane + rows[static_cast<std::size_t>(oh * g.kh + i)] * g.w;
          for (long ow = 0; ow < span.lo; ++ow) dst_row[cols[static_cast<std::size_t>(ow * g.kw + j)]] += src[ow];
          T* shifted = dst_row + span.offset;
          for (long ow = span.lo; ow < span.hi; ++ow) shifted[ow] += src[ow];
          for (long ow = std::max(span.hi, span.lo); ow < g.wo; ++ow)
            dst_row[cols[static_cast<std::size_t>(ow * g.kw + j)]] += src[ow];
        }
      }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  return make_node<T>(zip_values(a->value, b->value, [](T x, T y) { return x + y; }), {a, b}, "add",
                      [](Node<T>& self) {
                        for (auto& p : self.parents)
                          if (p->requires_grad)
                            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
                      });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  return make_node<T>(zip_values(a->value, b->value, [](T x, T y) { return x - y; }), {a, b}, "sub",
                      [](Node<T>& self) {
                        auto& pa = self.parents[0];
                        auto& pb = self.parents[1];
                        if (pa->requires_grad)
                          for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
                        if (pb->requires_grad)
                          for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
                      });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  return make_node<T>(zip_values(a->value, b->value, [](T x, T y) { return x * y; }), {a, b}, "mul",
                      [](Node<T>& self) {
                        auto& pa = self.parents[0];
                        auto& pb = self.parents[1];
                        if (pa->requires_grad)
                          for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->value[i];
                        if (pb->requires_grad)
                          for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->value[i];
                      });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "div");
  return make_node<T>(zip_values(a->value, b->value, [](T x, T y) { return x / y; }), {a, b}, "div",
                      [](Node<T>& self) {
                        auto& pa = self.parents[0];
                        auto& pb = self.parents[1];
                        for (std::size_t i = 0; i < self.grad.size(); ++i) {
                          const T inv = T{1} / pb->value[i];
                          if (pa->requires_grad) pa->grad[i] += self.grad[i] * inv;
                          if (pb->requires_grad) pb->grad[i] -= self.grad[i] * self.value[i] * inv;
                        }
                      });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  const T k = static_cast<T>(s);
  return make_node<T>(map_values(a->value, [k](T x) { return k * x; }), {a}, "scale", [k](Node<T>& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += k * self.grad[i];
  });
}

template <typename T>
Var<T> shift(const Var<T>& a, double s) {
  const T k = static_cast<T>(s);
  return make_node<T>(map_values(a->value, [k](T x) { return x + k; }), {a}, "shift", [](Node<T>& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return make_node<T>(map_values(x->value, [](T v) { return v > T{0} ? v : T{0}; }), {x}, "relu",
                      [](Node<T>& self) {
                        auto& p = self.parents[0];
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                          if (p->value[i] > T{0}) p->grad[i] += self.grad[i];
                      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  auto f = [](T v) {
    // split by sign so exp never overflows
    if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
    const T e = std::exp(v);
    return e / (T{1} + e);
  };
  return make_node<T>(map_values(x->value, f), {x}, "sigmoid", [](Node<T>& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T s = self.value[i];
      p->grad[i] += self.grad[i] * s * (T{1} - s);
    }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, int stride, Padding padding) {
  const Shape& xs = x->value.shape();
  const Shape& ks = kernel->value.shape();
  require_rank4(xs, "conv2d input");
  require_rank4(ks, "conv2d kernel");
  if (ks[1] != xs[1])
    throw ContractError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, input has " +
                        std::to_string(xs[1]));
  if (ks[2] % 2 == 0 || ks[3] % 2 == 0) throw ContractError("conv2d: kernel extents must be odd, got " + shape_str(ks));
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (bias && bias->value.size() != ks[0])
    throw ContractError("conv2d: bias has " + std::to_string(bias->value.size()) + " entries, expected " +
                        std::to_string(ks[0]));

  ConvGeometry g{};
  g.n = static_cast<long>(xs[0]);
  g.cin = static_cast<long>(xs[1]);
  g.h = static_cast<long>(xs[2]);
  g.w = static_cast<long>(xs[3]);
  g.cout = static_cast<long>(ks[0]);
  g.kh = static_cast<long>(ks[2]);
  g.kw = static_cast<long>(ks[3]);
  g.stride = stride;
  const bool reflect = padding == Padding::Reflect;
  const long pad_h = reflect ? g.kh / 2 : 0;
  const long pad_w = reflect ? g.kw / 2 : 0;
  if (reflect && ((pad_h > 0 && g.h < 2) || (pad_w > 0 && g.w < 2)))
    throw InputTooSmallError("conv2d: input-too-small for reflective padding: " + shape_str(xs));
  if (!reflect && (g.h < g.kh || g.w < g.kw))
    throw InputTooSmallError("conv2d: input-too-small for valid window: " + shape_str(xs) + " vs " + shape_str(ks));
  g.pad = pad_h;
  g.ho = (g.h + 2 * pad_h - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad_w - g.kw) / stride + 1;

  auto rows = std::make_shared<std::vector<long>>(tap_index(g.ho, g.kh, stride, pad_h, g.h, reflect));
  auto cols = std::make_shared<std::vector<long>>(tap_index(g.wo, g.kw, stride, pad_w, g.w, reflect));
  auto spans = std::make_shared<std::vector<TapSpan>>(tap_spans(g, *cols));

  Tensor<T> out({xs[0], ks[0], static_cast<std::size_t>(g.ho), static_cast<std::size_t>(g.wo)});
  std::vector<T> col(static_cast<std::size_t>(g.k_rows() * g.cols()));
  ConstMatMap<T> weights(kernel->value.raw(), g.cout, g.k_rows());
  for (long n = 0; n < g.n; ++n) {
    im2col(x->value.raw() + n * g.cin * g.h * g.w, g, *rows, *cols, *spans, col.data());
    MatMap<T> o(out.raw() + n * g.cout * g.cols(), g.cout, g.cols());
    o.noalias() = weights * ConstMatMap<T>(col.data(), g.k_rows(), g.cols());
    if (bias)
      for (long c = 0; c < g.cout; ++c) o.row(c).array() += bias->value[static_cast<std::size_t>(c)];
  }

  std::vector<Var<T>> parents{x, kernel};
  if (bias) parents.push_back(bias);
  return make_node<T>(std::move(out), std::move(parents), "conv2d", [g, rows, cols, spans](Node<T>& self) {
    auto& px = self.parents[0];
    auto& pk = self.parents[1];
    Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    std::vector<T> col(static_cast<std::size_t>(g.k_rows() * g.cols()));
    ConstMatMap<T> weights(pk->value.raw(), g.cout, g.k_rows());
    for (long n = 0; n < g.n; ++n) {
      ConstMatMap<T> go(self.grad.raw() + n * g.cout * g.cols(), g.cout, g.cols());
      if (pb && pb->requires_grad)
        for (long c = 0; c < g.cout; ++c) pb->grad[static_cast<std::size_t>(c)] += go.row(c).sum();
      if (pk->requires_grad) {
        im2col(px->value.raw() + n * g.cin * g.h * g.w, g, *rows, *cols, *spans, col.data());
        MatMap<T>(pk->grad.raw(), g.cout, g.k_rows()).noalias() +=
            go * ConstMatMap<T>(col.data(), g.k_rows(), g.cols()).transpose();
      }
      if (px->requires_grad) {
        MatMap<T>(col.data(), g.k_rows(), g.cols()).noalias() = weights.transpose() * go;
        col2im_add(col.data(), g, *rows, *cols, *spans, px->grad.raw() + n * g.cin * g.h * g.w);
      }
    }
  });
}

template <typename T>
std::vector<Var<T>> softmax_across(const std::vector<Var<T>>& branches) {
  if (branches.size() < 2) throw ContractError("softmax_across: need at least two branches");
  for (const auto& b : branches) require_same_shape(branches.front(), b, "softmax_across");
  const std::size_t k = branches.size();
  const std::size_t n = branches.front()->value.size();

  Shape stacked_shape{k};
  for (auto d : branches.front()->value.shape()) stacked_shape.push_back(d);
  Tensor<T> probs(stacked_shape);
  for (std::size_t i = 0; i < n; ++i) {
    T peak = branches[0]->value[i];
    for (std::size_t b = 1; b < k; ++b) peak = std::max(peak, branches[b]->value[i]);
    T total{0};
    for (std::size_t b = 0; b < k; ++b) {
      const T e = std::exp(branches[b]->value[i] - peak);
      probs[b * n + i] = e;
      total += e;
    }
    for (std::size_t b = 0; b < k; ++b) probs[b * n + i] /= total;
  }

  auto joint = make_node<T>(std::move(probs), branches, "softmax_across", [k, n](Node<T>& self) {
    for (std::size_t i = 0; i < n; ++i) {
      T dot{0};
      for (std::size_t b = 0; b < k; ++b) dot += self.grad[b * n + i] * self.value[b * n + i];
      for (std::size_t b = 0; b < k; ++b)
        if (self.parents[b]->requires_grad)
          self.parents[b]->grad[i] += self.value[b * n + i] * (self.grad[b * n + i] - dot);
    }
  });

  std::vector<Var<T>> outputs;
  outputs.reserve(k);
  const Shape& shape = branches.front()->value.shape();
  for (std::size_t b = 0; b < k; ++b) {
    std::vector<T> slice(joint->value.raw() + b * n, joint->value.raw() + (b + 1) * n);
    outputs.push_back(make_node<T>(Tensor<T>(shape, std::move(slice)), {joint}, "softmax_take",
                                   [b, n](Node<T>& self) {
                                     auto& p = self.parents[0];
                                     for (std::size_t i = 0; i < n; ++i) p->grad[b * n + i] += self.grad[i];
                                   }));
  }
  return outputs;
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x->value.size();
  if (n == 0) throw ContractError("mean: empty tensor");
  long double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x->value[i];
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<long double>(n)));
  return make_node<T>(std::move(out), {x}, "mean", [n](Node<T>& self) {
    auto& p = self.parents[0];
    const T g = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) p->grad[i] += g;
  });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  auto d = sub(a, b);
  return mean(mul(d, d));
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const Shape& s0 = parts.front()->value.shape();
  require_rank4(s0, "concat_channels");
  std::size_t channels = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const Shape& s = p->value.shape();
    require_rank4(s, "concat_channels");
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw ContractError("concat_channels: incompatible shapes " + shape_str(s0) + " and " + shape_str(s));
    offsets.push_back(channels);
    channels += s[1];
  }
  const std::size_t plane = s0[2] * s0[3];
  Tensor<T> out({s0[0], channels, s0[2], s0[3]});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t c = parts[k]->value.dim(1);
    for (std::size_t n = 0; n < s0[0]; ++n)
      std::copy_n(parts[k]->value.raw() + n * c * plane, c * plane, out.raw() + (n * channels + offsets[k]) * plane);
  }
  return make_node<T>(std::move(out), parts, "concat_channels", [offsets, channels, plane](Node<T>& self) {
    const std::size_t batch = self.value.dim(0);
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      const std::size_t c = p->value.dim(1);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* src = self.grad.raw() + (n * channels + offsets[k]) * plane;
        T* dst = p->grad.raw() + n * c * plane;
        for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count) {
  const Shape& s = x->value.shape();
  require_rank4(s, "slice_channels");
  if (begin + count > s[1] || count == 0)
    throw ContractError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                        ") outside " + shape_str(s));
  const std::size_t plane = s[2] * s[3];
  const std::size_t channels = s[1];
  Tensor<T> out({s[0], count, s[2], s[3]});
  for (std::size_t n = 0; n < s[0]; ++n)
    std::copy_n(x->value.raw() + (n * channels + begin) * plane, count * plane, out.raw() + n * count * plane);
  return make_node<T>(std::move(out), {x}, "slice_channels", [begin, count, channels, plane](Node<T>& self) {
    auto& p = self.parents[0];
    for (std::size_t n = 0; n < self.value.dim(0); ++n) {
      const T* src = self.grad.raw() + n * count * plane;
      T* dst = p->grad.raw() + (n * channels + begin) * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  return make_node<T>(x->value.reshaped(std::move(shape)), {x}, "reshape", [](Node<T>& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  return constant(x->value);
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Var<T>& running_mean,
                  const Var<T>& running_var, const BatchNormOptions& options) {
  const Shape& s = x->value.shape();
  require_rank4(s, "batch_norm");
  const std::size_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  for (const auto* v : {&gamma, &beta, &running_mean, &running_var})
    if ((*v)->value.size() != channels) throw ContractError("batch_norm: per-channel tensor size mismatch");

  const std::size_t count = batch * plane;
  std::vector<T> mu(channels), inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    if (options.training) {
      double sum = 0, sq = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* src = x->value.raw() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += src[i];
      }
      const double m = sum / static_cast<double>(count);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* src = x->value.raw() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (src[i] - m) * (src[i] - m);
      }
      const double var = sq / static_cast<double>(count);
      mu[c] = static_cast<T>(m);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean->value[c] =
          static_cast<T>(options.momentum * running_mean->value[c] + (1.0 - options.momentum) * m);
      running_var->value[c] =
          static_cast<T>(options.momentum * running_var->value[c] + (1.0 - options.momentum) * unbiased);
    } else {
      mu[c] = running_mean->value[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var->value[c]) + options.eps));
    }
  }

  Tensor<T> xhat(s), out(s);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (x->value[base + i] - mu[c]) * inv_std[c];
        out[base + i] = gamma->value[c] * xhat[base + i] + beta->value[c];
      }
    }

  const bool training = options.training;
  return make_node<T>(
      std::move(out), {x, gamma, beta}, "batch_norm",
      [xhat = std::move(xhat), inv_std, batch, channels, plane, count, training](Node<T>& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        for (std::size_t c = 0; c < channels; ++c) {
          T sum_g{0}, sum_gx{0};
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += self.grad[base + i];
              sum_gx += self.grad[base + i] * xhat[base + i];
            }
          }
          if (pg->requires_grad) pg->grad[c] += sum_gx;
          if (pb->requires_grad) pb->grad[c] += sum_g;
          if (!px->requires_grad) continue;
          const T gamma = pg->value[c];
          const T m = static_cast<T>(count);
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T g = self.grad[base + i];
              if (training)
                px->grad[base + i] += gamma * inv_std[c] / m * (m * g - sum_g - xhat[base + i] * sum_gx);
              else
                px->grad[base + i] += gamma * inv_std[c] * g;
            }
          }
        }
      });
}

#define WDN_INSTANTIATE_OPS(T)                                                                                 \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> div<T>(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> scale<T>(const Var<T>&, double);                                                             \
  template Var<T> shift<T>(const Var<T>&, double);                                                             \
  template Var<T> relu<T>(const Var<T>&);                                                                      \
  template Var<T> sigmoid<T>(const Var<T>&);                                                                   \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, Padding);                        \
  template std::vector<Var<T>> softmax_across<T>(const std::vector<Var<T>>&);                                  \
  template Var<T> mean<T>(const Var<T>&);                                                                      \
  template Var<T> mse<T>(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);                                              \
  template Var<T> slice_channels<T>(const Var<T>&, std::size_t, std::size_t);                                  \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                                            \
  template Var<T> detach<T>(const Var<T>&);                                                                    \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,     \
                                const BatchNormOptions&);

WDN_INSTANTIATE_OPS(float)
WDN_INSTANTIATE_OPS(double)

}  // namespace wdn
