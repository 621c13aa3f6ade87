#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "wdn/autodiff.hpp"
#include "wdn/imaging.hpp"

namespace wdn {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

double mean_squared_error(const ImagePlane& a, const ImagePlane& b);
/// 10*log10(1/MSE); identical planes give kInfinitePsnr.
double psnr(const ImagePlane& a, const ImagePlane& b);
/// Mean of the local SSIM map over the valid (unpadded) window positions.
double ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& params = {});

/// Differentiable SSIM of [N,1,H,W] tensors, averaged over the batch.
template <typename T>
Var<T> ssim(const Var<T>& a, const Var<T>& b, const SsimParams& params = {});

/// Drops `border` pixels on every side.
ImagePlane shave(const ImagePlane& plane, std::size_t border);

struct EvalEntry {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Y channel, `scale`-pixel border shave, then PSNR and SSIM.
EvalEntry eval_protocol(const ColorImage& pred, const ColorImage& gt, int scale, std::string name = {});
EvalEntry eval_protocol(const ImagePlane& pred_y, const ImagePlane& gt_y, int scale, std::string name = {});

struct EvalReport {
  int scale = 4;
  std::vector<EvalEntry> entries;
  std::vector<std::string> skipped;

  double mean_psnr() const;
  double mean_ssim() const;
  nlohmann::json to_json() const;
};

}  // namespace wdn
