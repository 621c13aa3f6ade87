#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "wdn/imaging.hpp"
#include "wdn/parameters.hpp"

namespace wdn {

/// What follows each convolution inside a block (the calibration ablation).
enum class CalibrationVariant {
  PixelCalibration,  ///< relu(y)*V + y*(1-V), V = sigmoid(conv(y))
  Relu,
  ReluBatchNorm,     ///< relu(batch_norm(y))
  Highway,           ///< relu(conv_t(y))*V + y*(1-V)
};

enum class TrainingProcedure {
  Stagewise,              ///< stages trained one after another, earlier ones frozen
  JointNoInterstageGrad,  ///< all twelve loss terms at once, gradients stopped between stages
  InterstageGrad,         ///< all twelve loss terms at once, gradients flow across stages
  EndToEnd,               ///< only the final loss, full gradient flow
};

std::string to_string(CalibrationVariant v);
std::string to_string(TrainingProcedure p);
CalibrationVariant parse_calibration(const std::string& s);
TrainingProcedure parse_procedure(const std::string& s);

struct WdnConfig {
  int scale = 4;
  int channels = 64;
  int block_depth = 8;
  CalibrationVariant activation = CalibrationVariant::PixelCalibration;
  bool frequency_division = true;
  bool scale_division = true;
  bool attention = true;
  /// Gaussian suppressor after each depth-to-space; off only in plumbing tests.
  bool noise_suppressor = true;
  TrainingProcedure procedure = TrainingProcedure::Stagewise;

  static WdnConfig full() { return {}; }
  static WdnConfig desk() {
    WdnConfig c;
    c.channels = 16;
    c.block_depth = 2;
    return c;
  }

  void validate() const;
  /// Block size of the input space-to-depth (4, or 2 without scale division).
  std::size_t input_block() const { return scale_division ? 4 : 2; }
  std::size_t input_count() const { return 2 * input_block() * input_block(); }
  std::size_t stage1_module_count() const { return scale_division ? 8 : 0; }

  nlohmann::json to_json() const;
  static WdnConfig from_json(const nlohmann::json& j);
  bool operator==(const WdnConfig&) const = default;
};

/// Pixel calibration: relu(y)*V + y*(1-V) with V = sigmoid(conv2d(y)).
template <typename T>
Var<T> pixel_calibrate(const Var<T>& y, const Var<T>& kernel, const Var<T>& bias);

template <typename T>
struct ConvLayer {
  Var<T> weight;
  Var<T> bias;
  Var<T> operator()(const Var<T>& x) const;
};

template <typename T>
class Calibration {
 public:
  Calibration(ParameterStore<T>& store, const std::string& prefix, const std::string& group, std::size_t channels,
              CalibrationVariant variant, std::uint64_t seed);
  Var<T> forward(const Var<T>& y, bool training) const;

  CalibrationVariant variant() const { return variant_; }
  const ConvLayer<T>& relevance() const { return relevance_; }

 private:
  CalibrationVariant variant_;
  ConvLayer<T> relevance_;  // PixelCalibration, Highway
  ConvLayer<T> transform_;  // Highway
  Var<T> gamma_, beta_, running_mean_, running_var_;  // ReluBatchNorm
};

/// head conv (in -> C) + calibration, (K-1) x [conv C -> C + calibration],
/// tail conv (C -> out). All convolutions 3x3, stride 1, reflective padding.
template <typename T>
class Block {
 public:
  Block(ParameterStore<T>& store, const std::string& prefix, const std::string& group, std::size_t in,
        std::size_t out, const WdnConfig& config, std::uint64_t seed);
  Var<T> forward(const Var<T>& x, bool training) const;

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  const std::string& prefix() const { return prefix_; }
  const ConvLayer<T>& head() const { return head_; }
  const ConvLayer<T>& tail() const { return tail_; }
  const std::vector<ConvLayer<T>>& body() const { return body_; }
  const std::vector<Calibration<T>>& calibrations() const { return calibrations_; }

 private:
  std::string prefix_;
  std::size_t in_, out_;
  ConvLayer<T> head_;
  std::vector<ConvLayer<T>> body_;
  std::vector<Calibration<T>> calibrations_;
  ConvLayer<T> tail_;
};

template <typename T>
struct ModuleOutput {
  Var<T> output;
  Var<T> pre_blur;
  std::vector<Var<T>> attention;  // empty when attention is ablated
};

/// Four processing blocks, one shared attention block applied to all four
/// paths, softmax across paths, depth-to-space (2) and the noise suppressor.
template <typename T>
class UpsamplingModule {
 public:
  UpsamplingModule(ParameterStore<T>& store, const std::string& prefix, const std::string& group,
                   const WdnConfig& config, std::uint64_t seed);
  ModuleOutput<T> forward(const std::vector<Var<T>>& inputs, bool training) const;

  const std::string& prefix() const { return prefix_; }
  const Block<T>& processing(std::size_t i) const { return processing_[i]; }
  const std::optional<Block<T>>& attention() const { return attention_; }

 private:
  std::string prefix_;
  std::vector<Block<T>> processing_;
  std::optional<Block<T>> attention_;
  bool suppress_noise_;
};

template <typename T>
struct FusionOutput {
  Var<T> output;
  Var<T> fused;
  std::vector<Var<T>> attention;
};

/// Shared attention over the hf/lf pair, softmax, weighted sum, processing block.
template <typename T>
class OutputModule {
 public:
  OutputModule(ParameterStore<T>& store, const std::string& prefix, const std::string& group,
               const WdnConfig& config, std::uint64_t seed);
  FusionOutput<T> forward(const Var<T>& hf, const Var<T>& lf, bool training) const;

  const Block<T>& processing() const { return processing_; }
  const std::optional<Block<T>>& attention() const { return attention_; }

 private:
  std::optional<Block<T>> attention_;
  Block<T> processing_;
};

/// Every intermediate of one full forward pass.
template <typename T>
struct ForwardTrace {
  std::vector<Var<T>> stage1;  // 4 hf then 4 lf, empty without scale division
  std::vector<Var<T>> stage2;  // hf, lf
  Var<T> output;
};

/// Frequency pair fed to the network for one bicubic-upsampled image. Without
/// frequency division both members are the image itself.
FrequencyPair network_channels(const ImagePlane& upsampled, const WdnConfig& config);

/// Space-to-depth of the network channels of one upsampled image:
/// config.input_count() planes, all hf channels first, then all lf channels.
std::vector<ImagePlane> network_input_planes(const ImagePlane& upsampled, const WdnConfig& config);

/// Index into the network inputs of path `path` of stage-1 module `module`.
/// Module g (0-3 hf, 4-7 lf) with in-phase offset (r1, s1) = (g/2, g%2) reads
/// block-4 offset (2*r2 + r1, 2*s2 + s1) for path (r2, s2) = (path/2, path%2).
std::size_t stage1_input_index(std::size_t module, std::size_t path);

template <typename T>
class WdnModel {
 public:
  /// Registers all parameters in `store` (Glorot weights, zero biases) with
  /// groups "stage1", "stage2", "stage3".
  WdnModel(const WdnConfig& config, ParameterStore<T>& store, std::uint64_t seed);

  const WdnConfig& config() const { return config_; }
  ParameterStore<T>& store() const { return *store_; }

  const std::vector<UpsamplingModule<T>>& stage1_modules() const { return stage1_; }
  const std::vector<UpsamplingModule<T>>& stage2_modules() const { return stage2_; }
  const OutputModule<T>& output_module() const { return stage3_; }

  std::vector<Var<T>> stage1_module_inputs(std::size_t module, const std::vector<Var<T>>& inputs) const;
  std::vector<Var<T>> stage1(const std::vector<Var<T>>& inputs, bool training) const;
  /// Consumes the eight stage-1 outputs, or the eight inputs directly without scale division.
  std::vector<Var<T>> stage2(const std::vector<Var<T>>& previous, bool training) const;
  Var<T> stage3(const Var<T>& hf, const Var<T>& lf, bool training) const;

  ForwardTrace<T> forward(const std::vector<Var<T>>& inputs, bool training,
                          bool stop_gradient_between_stages = false) const;

  /// Upsamples a low-resolution Y plane (at least 3x3) by config().scale; output
  /// clamped to [0,1]. Sizes the input rearrangement cannot split are padded internally.
  ImagePlane upsample(const ImagePlane& lr_y) const;

  std::size_t parameter_count() const { return store_->trainable_count(); }

 private:
  WdnConfig config_;
  ParameterStore<T>* store_;
  std::vector<UpsamplingModule<T>> stage1_;
  std::vector<UpsamplingModule<T>> stage2_;
  OutputModule<T> stage3_;
};

/// Closed-form trainable parameter count for `config` (shared attention counted once).
std::size_t parameter_count_formula(const WdnConfig& config);
std::size_t block_parameter_count(const WdnConfig& config, std::size_t in, std::size_t out);

/// Per-parameter initialisation stream: seed mixed with a hash of the name,
/// so initial values do not depend on construction order.
Rng parameter_rng(std::uint64_t seed, const std::string& name);

std::string stage_group(int stage);

}  // namespace wdn
