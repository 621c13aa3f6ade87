#include "wdn/model.hpp"

#include <algorithm>

#include "wdn/ops.hpp"

namespace wdn {

namespace {

constexpr std::size_t kKernel = 3;

template <typename T>
ConvLayer<T> make_conv(ParameterStore<T>& store, const std::string& name, const std::string& group, std::size_t in,
                       std::size_t out, std::uint64_t seed) {
  Rng rng = parameter_rng(seed, name + ".weight");
  ConvLayer<T> layer;
  layer.weight = store.add(name + ".weight", glorot_uniform<T>({out, in, kKernel, kKernel}, rng), group);
  layer.bias = store.add(name + ".bias", Tensor<T>({out}), group);
  return layer;
}

const WdnConfig& validated(const WdnConfig& config) {
  config.validate();
  return config;
}

std::size_t conv_count(std::size_t in, std::size_t out) { return out * in * kKernel * kKernel + out; }

std::size_t calibration_count(const WdnConfig& config) {
  const std::size_t c = static_cast<std::size_t>(config.channels);
  switch (config.activation) {
    case CalibrationVariant::PixelCalibration: return conv_count(c, c);
    case CalibrationVariant::Relu: return 0;
    case CalibrationVariant::ReluBatchNorm: return 2 * c;
    case CalibrationVariant::Highway: return 2 * conv_count(c, c);
  }
  return 0;
}

template <typename T>
void require_same_shapes(const std::vector<Var<T>>& xs, const char* what) {
  for (const auto& x : xs)
    if (x->value.shape() != xs.front()->value.shape())
      throw ContractError(std::string(what) + ": input shapes differ (" + shape_str(xs.front()->value.shape()) +
                          " vs " + shape_str(x->value.shape()) + ")");
}

}  // namespace

std::string to_string(CalibrationVariant v) {
  switch (v) {
    case CalibrationVariant::PixelCalibration: return "pixel_calibration";
    case CalibrationVariant::Relu: return "relu";
    case CalibrationVariant::ReluBatchNorm: return "relu_batchnorm";
    case CalibrationVariant::Highway: return "highway";
  }
  return "?";
}

std::string to_string(TrainingProcedure p) {
  switch (p) {
    case TrainingProcedure::Stagewise: return "stagewise";
    case TrainingProcedure::JointNoInterstageGrad: return "joint_no_interstage_grad";
    case TrainingProcedure::InterstageGrad: return "interstage_grad";
    case TrainingProcedure::EndToEnd: return "end_to_end";
  }
  return "?";
}

CalibrationVariant parse_calibration(const std::string& s) {
  for (auto v : {CalibrationVariant::PixelCalibration, CalibrationVariant::Relu, CalibrationVariant::ReluBatchNorm,
                 CalibrationVariant::Highway})
    if (to_string(v) == s) return v;
  throw ContractError("unknown activation variant '" + s +
                      "' (expected pixel_calibration, relu, relu_batchnorm or highway)");
}

TrainingProcedure parse_procedure(const std::string& s) {
  for (auto p : {TrainingProcedure::Stagewise, TrainingProcedure::JointNoInterstageGrad,
                 TrainingProcedure::InterstageGrad, TrainingProcedure::EndToEnd})
    if (to_string(p) == s) return p;
  throw ContractError("unknown training procedure '" + s +
                      "' (expected stagewise, joint_no_interstage_grad, interstage_grad or end_to_end)");
}

void WdnConfig::validate() const {
  if (scale < 2 || scale > 4) throw ContractError("scale must be 2, 3 or 4, got " + std::to_string(scale));
  if (channels < 1) throw ContractError("channels must be positive");
  if (block_depth < 1) throw ContractError("block_depth must be at least 1");
}

nlohmann::json WdnConfig::to_json() const {
  return {{"scale", scale},
          {"channels", channels},
          {"block_depth", block_depth},
          {"activation", to_string(activation)},
          {"frequency_division", frequency_division},
          {"scale_division", scale_division},
          {"attention", attention},
          {"noise_suppressor", noise_suppressor},
          {"training_procedure", to_string(procedure)}};
}

WdnConfig WdnConfig::from_json(const nlohmann::json& j) {
  WdnConfig c;
  c.scale = j.at("scale").get<int>();
  c.channels = j.at("channels").get<int>();
  c.block_depth = j.at("block_depth").get<int>();
  c.activation = parse_calibration(j.at("activation").get<std::string>());
  c.frequency_division = j.at("frequency_division").get<bool>();
  c.scale_division = j.at("scale_division").get<bool>();
  c.attention = j.at("attention").get<bool>();
  c.noise_suppressor = j.value("noise_suppressor", true);
  c.procedure = parse_procedure(j.at("training_procedure").get<std::string>());
  c.validate();
  return c;
}

Rng parameter_rng(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return Rng(seed).stream(h);
}

std::string stage_group(int stage) { return "stage" + std::to_string(stage); }

// ---------------------------------------------------------------- layers

template <typename T>
Var<T> pixel_calibrate(const Var<T>& y, const Var<T>& kernel, const Var<T>& bias) {
  const Var<T> v = sigmoid(conv2d(y, kernel, bias));
  return add(mul(relu(y), v), mul(y, shift(scale(v, -1.0), 1.0)));
}

template <typename T>
Var<T> ConvLayer<T>::operator()(const Var<T>& x) const {
  return conv2d(x, weight, bias);
}

template <typename T>
Calibration<T>::Calibration(ParameterStore<T>& store, const std::string& prefix, const std::string& group,
                            std::size_t channels, CalibrationVariant variant, std::uint64_t seed)
    : variant_(variant) {
  switch (variant) {
    case CalibrationVariant::PixelCalibration:
      relevance_ = make_conv(store, prefix + ".relevance", group, channels, channels, seed);
      break;
    case CalibrationVariant::Relu: break;
    case CalibrationVariant::ReluBatchNorm:
      gamma_ = store.add(prefix + ".bn.gamma", Tensor<T>({channels}, T(1)), group);
      beta_ = store.add(prefix + ".bn.beta", Tensor<T>({channels}), group);
      running_mean_ = store.add(prefix + ".bn.running_mean", Tensor<T>({channels}), group, false);
      running_var_ = store.add(prefix + ".bn.running_var", Tensor<T>({channels}, T(1)), group, false);
      break;
    case CalibrationVariant::Highway:
      relevance_ = make_conv(store, prefix + ".relevance", group, channels, channels, seed);
      transform_ = make_conv(store, prefix + ".transform", group, channels, channels, seed);
      break;
  }
}

template <typename T>
Var<T> Calibration<T>::forward(const Var<T>& y, bool training) const {
  switch (variant_) {
    case CalibrationVariant::PixelCalibration: return pixel_calibrate(y, relevance_.weight, relevance_.bias);
    case CalibrationVariant::Relu: return relu(y);
    case CalibrationVariant::ReluBatchNorm: {
      BatchNormOptions options;
      options.training = training;
      return relu(batch_norm(y, gamma_, beta_, running_mean_, running_var_, options));
    }
    case CalibrationVariant::Highway: {
      const Var<T> v = sigmoid(relevance_(y));
      return add(mul(relu(transform_(y)), v), mul(y, shift(scale(v, -1.0), 1.0)));
    }
  }
  throw ContractError("calibration: unknown variant");
}

template <typename T>
Block<T>::Block(ParameterStore<T>& store, const std::string& prefix, const std::string& group, std::size_t in,
                std::size_t out, const WdnConfig& config, std::uint64_t seed)
    : prefix_(prefix), in_(in), out_(out) {
  const std::size_t c = static_cast<std::size_t>(config.channels);
  const std::size_t depth = static_cast<std::size_t>(config.block_depth);
  head_ = make_conv(store, prefix + ".head", group, in, c, seed);
  calibrations_.emplace_back(store, prefix + ".cal0", group, c, config.activation, seed);
  for (std::size_t k = 1; k < depth; ++k) {
    body_.push_back(make_conv(store, prefix + ".conv" + std::to_string(k), group, c, c, seed));
    calibrations_.emplace_back(store, prefix + ".cal" + std::to_string(k), group, c, config.activation, seed);
  }
  tail_ = make_conv(store, prefix + ".tail", group, c, out, seed);
}

template <typename T>
Var<T> Block<T>::forward(const Var<T>& x, bool training) const {
  require_rank4(x->value.shape(), "block");
  if (x->value.dim(1) != in_)
    throw ContractError("block " + prefix_ + ": expected " + std::to_string(in_) + " input channels, got " +
                        std::to_string(x->value.dim(1)));
  Var<T> h = calibrations_[0].forward(head_(x), training);
  for (std::size_t k = 0; k < body_.size(); ++k) h = calibrations_[k + 1].forward(body_[k](h), training);
  return tail_(h);
}

template <typename T>
UpsamplingModule<T>::UpsamplingModule(ParameterStore<T>& store, const std::string& prefix, const std::string& group,
                                      const WdnConfig& config, std::uint64_t seed)
    : prefix_(prefix), suppress_noise_(config.noise_suppressor) {
  for (std::size_t i = 0; i < 4; ++i)
    processing_.emplace_back(store, prefix + ".proc" + std::to_string(i), group, 1, 1, config, seed);
  if (config.attention) attention_.emplace(store, prefix + ".attn", group, 1, 1, config, seed);
}

template <typename T>
ModuleOutput<T> UpsamplingModule<T>::forward(const std::vector<Var<T>>& inputs, bool training) const {
  if (inputs.size() != 4)
    throw ContractError("upsampling module " + prefix_ + ": expects 4 inputs, got " + std::to_string(inputs.size()));
  require_same_shapes(inputs, "upsampling module");
  ModuleOutput<T> out;
  std::vector<Var<T>> paths;
  for (std::size_t i = 0; i < 4; ++i) paths.push_back(processing_[i].forward(inputs[i], training));
  if (attention_) {
    std::vector<Var<T>> logits;
    for (const auto& x : inputs) logits.push_back(attention_->forward(x, training));
    out.attention = softmax_across(logits);
    for (std::size_t i = 0; i < 4; ++i) paths[i] = mul(paths[i], out.attention[i]);
  }
  out.pre_blur = depth_to_space(concat_channels(paths), 2);
  out.output = suppress_noise_ ? gaussian_blur(out.pre_blur) : out.pre_blur;
  return out;
}

template <typename T>
OutputModule<T>::OutputModule(ParameterStore<T>& store, const std::string& prefix, const std::string& group,
                              const WdnConfig& config, std::uint64_t seed)
    : processing_(store, prefix + ".proc", group, 1, 1, config, seed) {
  if (config.attention) attention_.emplace(store, prefix + ".attn", group, 1, 1, config, seed);
}

template <typename T>
FusionOutput<T> OutputModule<T>::forward(const Var<T>& hf, const Var<T>& lf, bool training) const {
  require_same_shapes(std::vector<Var<T>>{hf, lf}, "output module");
  FusionOutput<T> out;
  if (attention_) {
    out.attention = softmax_across(std::vector<Var<T>>{attention_->forward(hf, training), attention_->forward(lf, training)});
    out.fused = add(mul(hf, out.attention[0]), mul(lf, out.attention[1]));
  } else {
    out.fused = add(hf, lf);
  }
  out.output = processing_.forward(out.fused, training);
  return out;
}

// ---------------------------------------------------------------- wiring

FrequencyPair network_channels(const ImagePlane& upsampled, const WdnConfig& config) {
  if (config.frequency_division) return sobel_separate(upsampled);
  return {upsampled, upsampled};
}

std::vector<ImagePlane> network_input_planes(const ImagePlane& upsampled, const WdnConfig& config) {
  const FrequencyPair pair = network_channels(upsampled, config);
  std::vector<ImagePlane> out;
  for (const ImagePlane* stream : {&pair.hf, &pair.lf})
    for (auto& p : tensor_to_planes(space_to_depth(plane_to_tensor<double>(*stream), config.input_block())))
      out.push_back(std::move(p));
  return out;
}

std::size_t stage1_input_index(std::size_t module, std::size_t path) {
  if (module >= 8 || path >= 4) throw ContractError("stage1_input_index: module or path out of range");
  const std::size_t stream = module / 4, g = module % 4;
  const std::size_t r = 2 * (path / 2) + g / 2, s = 2 * (path % 2) + g % 2;
  return stream * 16 + r * 4 + s;
}

template <typename T>
WdnModel<T>::WdnModel(const WdnConfig& config, ParameterStore<T>& store, std::uint64_t seed)
    : config_(validated(config)), store_(&store), stage3_(store, "s3", stage_group(3), config, seed) {
  for (std::size_t m = 0; m < config.stage1_module_count(); ++m)
    stage1_.emplace_back(store, "s1.m" + std::to_string(m), stage_group(1), config, seed);
  for (std::size_t m = 0; m < 2; ++m)
    stage2_.emplace_back(store, "s2.m" + std::to_string(m), stage_group(2), config, seed);
}

template <typename T>
std::vector<Var<T>> WdnModel<T>::stage1_module_inputs(std::size_t module, const std::vector<Var<T>>& inputs) const {
  if (inputs.size() != 32) throw ContractError("stage 1 expects 32 inputs, got " + std::to_string(inputs.size()));
  std::vector<Var<T>> group;
  for (std::size_t p = 0; p < 4; ++p) group.push_back(inputs[stage1_input_index(module, p)]);
  return group;
}

template <typename T>
std::vector<Var<T>> WdnModel<T>::stage1(const std::vector<Var<T>>& inputs, bool training) const {
  if (!config_.scale_division) throw ContractError("stage 1 is absent without scale division");
  std::vector<Var<T>> out;
  for (std::size_t m = 0; m < stage1_.size(); ++m)
    out.push_back(stage1_[m].forward(stage1_module_inputs(m, inputs), training).output);
  return out;
}

template <typename T>
std::vector<Var<T>> WdnModel<T>::stage2(const std::vector<Var<T>>& previous, bool training) const {
  if (previous.size() != 8) throw ContractError("stage 2 expects 8 inputs, got " + std::to_string(previous.size()));
  std::vector<Var<T>> out;
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<Var<T>> group(previous.begin() + 4 * m, previous.begin() + 4 * m + 4);
    out.push_back(stage2_[m].forward(group, training).output);
  }
  return out;
}

template <typename T>
Var<T> WdnModel<T>::stage3(const Var<T>& hf, const Var<T>& lf, bool training) const {
  return stage3_.forward(hf, lf, training).output;
}

template <typename T>
ForwardTrace<T> WdnModel<T>::forward(const std::vector<Var<T>>& inputs, bool training,
                                     bool stop_gradient_between_stages) const {
  if (inputs.size() != config_.input_count())
    throw ContractError("model expects " + std::to_string(config_.input_count()) + " inputs, got " +
                        std::to_string(inputs.size()));
  auto boundary = [&](std::vector<Var<T>> xs) {
    if (stop_gradient_between_stages)
      for (auto& x : xs) x = detach(x);
    return xs;
  };
  ForwardTrace<T> trace;
  if (config_.scale_division) {
    trace.stage1 = stage1(inputs, training);
    trace.stage2 = stage2(boundary(trace.stage1), training);
  } else {
    trace.stage2 = stage2(inputs, training);
  }
  const auto fused_in = boundary(trace.stage2);
  trace.output = stage3(fused_in[0], fused_in[1], training);
  return trace;
}

template <typename T>
ImagePlane WdnModel<T>::upsample(const ImagePlane& lr_y) const {
  if (lr_y.height < 3 || lr_y.width < 3)
    throw ContractError("upsample: input must be at least 3x3, got " + std::to_string(lr_y.height) + "x" +
                        std::to_string(lr_y.width));
  const std::size_t s = static_cast<std::size_t>(config_.scale), b = config_.input_block();
  const std::size_t h = lr_y.height * s, w = lr_y.width * s;
  // Sizes that the input rearrangement cannot split are reflect-padded up to
  // the next multiple and cropped back afterwards.
  const std::size_t ph = (h + b - 1) / b * b, pw = (w + b - 1) / b * b;
  const ImagePlane upsampled = bicubic_resize(lr_y, h, w);
  ImagePlane padded(ph, pw);
  for (std::size_t r = 0; r < ph; ++r)
    for (std::size_t c = 0; c < pw; ++c)
      padded(r, c) = upsampled(static_cast<std::size_t>(reflect101(static_cast<long>(r), static_cast<long>(h))),
                               static_cast<std::size_t>(reflect101(static_cast<long>(c), static_cast<long>(w))));
  std::vector<Var<T>> inputs;
  for (const auto& p : network_input_planes(padded, config_)) inputs.push_back(constant(plane_to_tensor<T>(p)));
  const ImagePlane out = clamp01(tensor_to_plane(forward(inputs, false).output->value));
  if (ph == h && pw == w) return out;
  ImagePlane cropped(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) cropped(r, c) = out(r, c);
  return cropped;
}

// ---------------------------------------------------------------- counting

std::size_t block_parameter_count(const WdnConfig& config, std::size_t in, std::size_t out) {
  const std::size_t c = static_cast<std::size_t>(config.channels);
  const std::size_t depth = static_cast<std::size_t>(config.block_depth);
  return conv_count(in, c) + depth * calibration_count(config) + (depth - 1) * conv_count(c, c) + conv_count(c, out);
}

std::size_t parameter_count_formula(const WdnConfig& config) {
  const std::size_t block = block_parameter_count(config, 1, 1);
  const std::size_t attention = config.attention ? block : 0;
  const std::size_t module = 4 * block + attention;
  return (config.stage1_module_count() + 2) * module + attention + block;
}

#define WDN_INSTANTIATE_MODEL(T)                                                                   \
  template Var<T> pixel_calibrate<T>(const Var<T>&, const Var<T>&, const Var<T>&);                 \
  template struct ConvLayer<T>;                                                                    \
  template class Calibration<T>;                                                                   \
  template class Block<T>;                                                                         \
  template class UpsamplingModule<T>;                                                              \
  template class OutputModule<T>;                                                                  \
  template class WdnModel<T>;

WDN_INSTANTIATE_MODEL(float)
WDN_INSTANTIATE_MODEL(double)

}  // namespace wdn
