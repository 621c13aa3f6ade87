#include <string>

#include "wdn/imaging.hpp"

namespace wdn {
namespace {

// Walks every (n, c, y, x) of the spatial tensor and the matching element of
// its depth arrangement; `visit(spatial_index, depth_index)`.
template <typename F>
void for_each_block_pair(const Shape& spatial, std::size_t b, F visit) {
  const std::size_t n = spatial[0], c = spatial[1], h = spatial[2], w = spatial[3];
  const std::size_t ho = h / b, wo = w / b, depth = c * b * b;
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t ic = 0; ic < c; ++ic)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t r = y % b, s = x % b;
          const std::size_t oc = ic * b * b + r * b + s;
          const std::size_t spatial_index = ((in * c + ic) * h + y) * w + x;
          const std::size_t depth_index = ((in * depth + oc) * ho + y / b) * wo + x / b;
          visit(spatial_index, depth_index);
        }
}

void check_s2d(const Shape& s, std::size_t b) {
  require_rank4(s, "space_to_depth");
  if (b == 0 || s[2] % b != 0 || s[3] % b != 0)
    throw ContractError("space_to_depth: " + shape_str(s) + " not divisible by block " + std::to_string(b));
}

Shape check_d2s(const Shape& s, std::size_t b) {
  require_rank4(s, "depth_to_space");
  if (b == 0 || s[1] % (b * b) != 0)
    throw ContractError("depth_to_space: channels of " + shape_str(s) + " not divisible by " + std::to_string(b * b));
  return {s[0], s[1] / (b * b), s[2] * b, s[3] * b};
}

}  // namespace

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, std::size_t block) {
  const Shape& s = x.shape();
  check_s2d(s, block);
  Tensor<T> out({s[0], s[1] * block * block, s[2] / block, s[3] / block});
  for_each_block_pair(s, block, [&](std::size_t si, std::size_t di) { out[di] = x[si]; });
  return out;
}

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, std::size_t block) {
  const Shape spatial = check_d2s(x.shape(), block);
  Tensor<T> out(spatial);
  for_each_block_pair(spatial, block, [&](std::size_t si, std::size_t di) { out[si] = x[di]; });
  return out;
}

template <typename T>
Var<T> space_to_depth(const Var<T>& x, std::size_t block) {
  return make_node<T>(space_to_depth(x->value, block), {x}, "space_to_depth", [block](Node<T>& self) {
    auto& p = self.parents[0];
    for_each_block_pair(p->value.shape(), block, [&](std::size_t si, std::size_t di) { p->grad[si] += self.grad[di]; });
  });
}

template <typename T>
Var<T> depth_to_space(const Var<T>& x, std::size_t block) {
  return make_node<T>(depth_to_space(x->value, block), {x}, "depth_to_space", [block](Node<T>& self) {
    auto& p = self.parents[0];
    for_each_block_pair(self.value.shape(), block,
                        [&](std::size_t si, std::size_t di) { p->grad[di] += self.grad[si]; });
  });
}

template <typename T>
Tensor<T> planes_to_tensor(std::span<const ImagePlane> planes) {
  if (planes.empty()) throw ContractError("planes_to_tensor: no planes");
  const ImagePlane& first = planes.front();
  Tensor<T> out({planes.size(), 1, first.height, first.width});
  for (std::size_t n = 0; n < planes.size(); ++n) {
    if (!planes[n].same_dims(first)) throw ContractError("planes_to_tensor: planes differ in size");
    for (std::size_t i = 0; i < first.size(); ++i) out[n * first.size() + i] = static_cast<T>(planes[n].values[i]);
  }
  return out;
}

template <typename T>
Tensor<T> plane_to_tensor(const ImagePlane& plane) {
  return planes_to_tensor<T>(std::span<const ImagePlane>(&plane, 1));
}

template <typename T>
ImagePlane tensor_to_plane(const Tensor<T>& x, std::size_t n, std::size_t c) {
  const Shape& s = x.shape();
  require_rank4(s, "tensor_to_plane");
  if (n >= s[0] || c >= s[1]) throw ContractError("tensor_to_plane: index outside " + shape_str(s));
  ImagePlane out(s[2], s[3]);
  const std::size_t base = (n * s[1] + c) * s[2] * s[3];
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = static_cast<double>(x[base + i]);
  return out;
}

template <typename T>
std::vector<ImagePlane> tensor_to_planes(const Tensor<T>& x, std::size_t n) {
  std::vector<ImagePlane> out;
  for (std::size_t c = 0; c < x.dim(1); ++c) out.push_back(tensor_to_plane(x, n, c));
  return out;
}

#define WDN_INSTANTIATE_REARRANGE(T)                                                        \
  template Tensor<T> space_to_depth<T>(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> depth_to_space<T>(const Tensor<T>&, std::size_t);                      \
  template Var<T> space_to_depth<T>(const Var<T>&, std::size_t);                            \
  template Var<T> depth_to_space<T>(const Var<T>&, std::size_t);                            \
  template Tensor<T> planes_to_tensor<T>(std::span<const ImagePlane>);                      \
  template Tensor<T> plane_to_tensor<T>(const ImagePlane&);                                 \
  template ImagePlane tensor_to_plane<T>(const Tensor<T>&, std::size_t, std::size_t);       \
  template std::vector<ImagePlane> tensor_to_planes<T>(const Tensor<T>&, std::size_t);

WDN_INSTANTIATE_REARRANGE(float)
WDN_INSTANTIATE_REARRANGE(double)

}  // namespace wdn
