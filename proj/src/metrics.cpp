#include "wdn/metrics.hpp"

#include <cmath>
#include <numeric>

#include "wdn/ops.hpp"

namespace wdn {
namespace {

void require_same(const ImagePlane& a, const ImagePlane& b, const char* what) {
  if (!a.same_dims(b))
    throw ContractError(std::string(what) + ": dimension mismatch " + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
}

nlohmann::json psnr_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

double mean_squared_error(const ImagePlane& a, const ImagePlane& b) {
  require_same(a, b, "mse");
  if (a.size() == 0) throw ContractError("mse: empty planes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const ImagePlane& a, const ImagePlane& b) {
  const double err = mean_squared_error(a, b);
  if (err == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / err);
}

double ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& params) {
  require_same(a, b, "ssim");
  const std::size_t win = static_cast<std::size_t>(params.window);
  if (a.height < win || a.width < win)
    throw ContractError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                        " smaller than the " + std::to_string(win) + "x" + std::to_string(win) + " window");
  const std::vector<double> g = gaussian_kernel(params.window, params.sigma);
  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  const std::size_t oh = a.height - win + 1, ow = a.width - win + 1;
  double total = 0.0;
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double w = g[i * win + j];
          const double x = a(r + i, c + j), y = b(r + i, c + j);
          mx += w * x;
          my += w * y;
          xx += w * x * x;
          yy += w * y * y;
          xy += w * x * y;
        }
      const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
      total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sx + sy + c2));
    }
  return total / static_cast<double>(oh * ow);
}

template <typename T>
Var<T> ssim(const Var<T>& a, const Var<T>& b, const SsimParams& params) {
  const Shape& s = a->value.shape();
  require_rank4(s, "ssim");
  if (s != b->value.shape()) throw ContractError("ssim: shape mismatch " + shape_str(s) + " vs " + shape_str(b->value.shape()));
  if (s[1] != 1) throw ContractError("ssim: expects single-channel tensors");
  const std::size_t win = static_cast<std::size_t>(params.window);
  if (s[2] < win || s[3] < win)
    throw ContractError("ssim: " + shape_str(s) + " smaller than the " + std::to_string(win) + "x" +
                        std::to_string(win) + " window");

  const std::vector<double> g = gaussian_kernel(params.window, params.sigma);
  Tensor<T> kernel({1, 1, win, win});
  for (std::size_t i = 0; i < g.size(); ++i) kernel[i] = static_cast<T>(g[i]);
  auto window = constant(std::move(kernel));
  auto local = [&](const Var<T>& x) { return conv2d(x, window, Var<T>{}, 1, Padding::Valid); };

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  auto mx = local(a), my = local(b);
  auto mx2 = mul(mx, mx), my2 = mul(my, my), mxy = mul(mx, my);
  auto sx = sub(local(mul(a, a)), mx2);
  auto sy = sub(local(mul(b, b)), my2);
  auto sxy = sub(local(mul(a, b)), mxy);
  auto num = mul(shift(scale(mxy, 2.0), c1), shift(scale(sxy, 2.0), c2));
  auto den = mul(shift(add(mx2, my2), c1), shift(add(sx, sy), c2));
  return mean(div(num, den));
}

ImagePlane shave(const ImagePlane& plane, std::size_t border) {
  if (plane.height <= 2 * border || plane.width <= 2 * border)
    throw ContractError("shave: border " + std::to_string(border) + " leaves no pixels");
  ImagePlane out(plane.height - 2 * border, plane.width - 2 * border);
  for (std::size_t r = 0; r < out.height; ++r)
    for (std::size_t c = 0; c < out.width; ++c) out(r, c) = plane(r + border, c + border);
  return out;
}

EvalEntry eval_protocol(const ImagePlane& pred_y, const ImagePlane& gt_y, int scale, std::string name) {
  if (scale < 2 || scale > 4) throw ContractError("eval: scale must be 2, 3 or 4");
  require_same(pred_y, gt_y, "eval");
  const std::size_t minimum = 2 * static_cast<std::size_t>(scale) + 11;
  if (pred_y.height < minimum || pred_y.width < minimum)
    throw ContractError("eval: images must be at least " + std::to_string(minimum) + " pixels per side at scale " +
                        std::to_string(scale));
  const ImagePlane p = shave(pred_y, static_cast<std::size_t>(scale));
  const ImagePlane g = shave(gt_y, static_cast<std::size_t>(scale));
  return {std::move(name), psnr(p, g), ssim(p, g)};
}

EvalEntry eval_protocol(const ColorImage& pred, const ColorImage& gt, int scale, std::string name) {
  return eval_protocol(luminance(pred), luminance(gt), scale, std::move(name));
}

double EvalReport::mean_psnr() const {
  if (entries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : entries) total += e.psnr;
  return total / static_cast<double>(entries.size());
}

double EvalReport::mean_ssim() const {
  if (entries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : entries) total += e.ssim;
  return total / static_cast<double>(entries.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) rows.push_back({{"name", e.name}, {"psnr", psnr_json(e.psnr)}, {"ssim", e.ssim}});
  return {{"scale", scale},
          {"images", rows},
          {"mean", {{"psnr", psnr_json(mean_psnr())}, {"ssim", mean_ssim()}, {"count", entries.size()}}},
          {"skipped", skipped}};
}

template Var<float> ssim<float>(const Var<float>&, const Var<float>&, const SsimParams&);
template Var<double> ssim<double>(const Var<double>&, const Var<double>&, const SsimParams&);

}  // namespace wdn
