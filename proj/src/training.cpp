#include "wdn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "wdn/metrics.hpp"
#include "wdn/ops.hpp"
#include "wdn/parallel.hpp"

namespace wdn {

namespace {

std::size_t hr_multiple(int scale) { return std::lcm<std::size_t>(4, static_cast<std::size_t>(scale)); }

std::string job_name(int stage, std::size_t module) {
  if (stage == 3) return "s3";
  return "s" + std::to_string(stage) + ".m" + std::to_string(module);
}

std::size_t job_count(const WdnConfig& config, int stage) {
  if (stage == 1) return config.stage1_module_count();
  if (stage == 2) return 2;
  return 1;
}

// Distinct RNG stream per job, independent of scheduling order.
std::uint64_t job_stream(int stage, std::size_t module) {
  return (static_cast<std::uint64_t>(stage) << 8) | static_cast<std::uint64_t>(module);
}

template <typename T>
std::vector<Var<T>> stack(const std::vector<const std::vector<ImagePlane>*>& columns, std::size_t count) {
  std::vector<Var<T>> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<ImagePlane> planes;
    for (const auto* c : columns) planes.push_back((*c)[i]);
    out.push_back(constant(planes_to_tensor<T>(planes)));
  }
  return out;
}

double mse_to_db(double mse) { return mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : kInfinitePsnr; }

}  // namespace

// ---------------------------------------------------------------- data

ImagePlane crop(const ImagePlane& plane, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > plane.height || left + w > plane.width)
    throw ContractError("crop: window exceeds " + std::to_string(plane.height) + "x" + std::to_string(plane.width));
  ImagePlane out(h, w);
  for (std::size_t r = 0; r < h; ++r)
    std::copy_n(plane.values.begin() + static_cast<long>((top + r) * plane.width + left), w,
                out.values.begin() + static_cast<long>(r * w));
  return out;
}

ImagePlane crop_to_multiple(const ImagePlane& plane, std::size_t m) {
  const std::size_t h = plane.height - plane.height % m, w = plane.width - plane.width % m;
  if (h == 0 || w == 0)
    throw ContractError("image " + std::to_string(plane.height) + "x" + std::to_string(plane.width) +
                        " is smaller than the required multiple " + std::to_string(m));
  return crop(plane, 0, 0, h, w);
}

ColorImage crop_to_multiple(const ColorImage& image, std::size_t m) {
  return {crop_to_multiple(image.r, m), crop_to_multiple(image.g, m), crop_to_multiple(image.b, m)};
}

ImagePlane degrade(const ImagePlane& hr, int scale) {
  if (scale < 1) throw ContractError("degrade: scale must be positive");
  const std::size_t s = static_cast<std::size_t>(scale);
  const ImagePlane cropped = crop_to_multiple(hr, s);
  return bicubic_resize(cropped, cropped.height / s, cropped.width / s);
}

ColorImage degrade(const ColorImage& hr, int scale) { return {degrade(hr.r, scale), degrade(hr.g, scale), degrade(hr.b, scale)}; }

SubProblemSet build_subproblems(const ImagePlane& hr, int scale, const WdnConfig& config) {
  const std::size_t m = hr_multiple(scale);
  if (hr.height % m != 0 || hr.width % m != 0)
    throw ContractError("build_subproblems: HR size " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
                        " must be divisible by " + std::to_string(m) + " at scale " + std::to_string(scale));
  SubProblemSet set;
  set.set3 = hr;
  to_working_precision(set.set3);
  const ImagePlane lr = degrade(set.set3, scale);
  const ImagePlane upsampled = bicubic_resize(lr, hr.height, hr.width);
  set.bicubic_psnr = psnr(upsampled, set.set3);

  const FrequencyPair target = network_channels(set.set3, config);
  set.set2 = {target.hf, target.lf};
  if (config.scale_division)
    for (const auto& plane : set.set2)
      for (auto& phase : tensor_to_planes(space_to_depth(plane_to_tensor<double>(plane), 2)))
        set.set1.push_back(std::move(phase));
  set.inputs = network_input_planes(upsampled, config);
  return set;
}

template <typename T>
Batch<T> make_batch(std::span<const SubProblemSet> samples) {
  if (samples.empty()) throw ContractError("make_batch: no samples");
  std::vector<const std::vector<ImagePlane>*> inputs, set1, set2;
  std::vector<ImagePlane> set3;
  for (const auto& s : samples) {
    inputs.push_back(&s.inputs);
    set1.push_back(&s.set1);
    set2.push_back(&s.set2);
    set3.push_back(s.set3);
  }
  const SubProblemSet& first = samples.front();
  Batch<T> batch;
  batch.inputs = stack<T>(inputs, first.inputs.size());
  batch.set1 = stack<T>(set1, first.set1.size());
  batch.set2 = stack<T>(set2, first.set2.size());
  batch.set3 = constant(planes_to_tensor<T>(set3));
  return batch;
}

template <typename T>
Var<T> loss_upsampling(const Var<T>& pred, const Var<T>& gt) {
  return mse(pred, gt);
}

template <typename T>
Var<T> loss_output(const Var<T>& pred, const Var<T>& gt) {
  return add(mse(pred, gt), shift(scale(ssim(pred, gt), -1.0), 1.0));
}

ImagePlane rotate90(const ImagePlane& plane, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  ImagePlane out = plane;
  for (int t = 0; t < k; ++t) {
    ImagePlane next(out.width, out.height);
    for (std::size_t r = 0; r < next.height; ++r)
      for (std::size_t c = 0; c < next.width; ++c) next(r, c) = out(c, out.width - 1 - r);
    out = std::move(next);
  }
  return out;
}

ImagePlane flip_horizontal(const ImagePlane& plane) {
  ImagePlane out(plane.height, plane.width);
  for (std::size_t r = 0; r < plane.height; ++r)
    for (std::size_t c = 0; c < plane.width; ++c) out(r, c) = plane(r, plane.width - 1 - c);
  return out;
}

AugmentDraw draw_augmentation(std::size_t height, std::size_t width, std::size_t patch, Rng& rng) {
  if (height < patch || width < patch)
    throw ContractError("augment: source " + std::to_string(height) + "x" + std::to_string(width) +
                        " is smaller than the patch " + std::to_string(patch));
  AugmentDraw d;
  d.top = rng.below(height - patch + 1);
  d.left = rng.below(width - patch + 1);
  d.rotation = static_cast<int>(rng.below(4));
  d.flip = rng.coin();
  return d;
}

ImagePlane apply_augmentation(const ImagePlane& hr, std::size_t patch, const AugmentDraw& draw) {
  ImagePlane out = rotate90(crop(hr, draw.top, draw.left, patch, patch), draw.rotation);
  return draw.flip ? flip_horizontal(out) : out;
}

ImagePlane augment(const ImagePlane& hr, std::size_t patch, Rng& rng) {
  return apply_augmentation(hr, patch, draw_augmentation(hr.height, hr.width, patch, rng));
}

bool EarlyStopping::update(double metric) {
  if (!seen_) {
    seen_ = metric;
    best_ = metric;
    improved_ = true;
    return false;
  }
  improved_ = metric >= best_ + min_delta_;
  if (improved_) {
    best_ = metric;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

// ---------------------------------------------------------------- config/state

void TrainConfig::validate(int scale) const {
  const std::size_t m = std::lcm<std::size_t>(8, static_cast<std::size_t>(scale));
  if (batch_size < 1) throw ContractError("train.batch_size must be at least 1");
  if (patch_size % m != 0 || patch_size < 16)
    throw ContractError("train.patch_size " + std::to_string(patch_size) + " must be a multiple of " +
                        std::to_string(m) + " (and at least 16) at scale " + std::to_string(scale));
  if (patience < 1) throw ContractError("train.patience must be at least 1");
  if (max_epochs < 1) throw ContractError("train.max_epochs must be at least 1");
  if (!(adam.lr > 0.0)) throw ContractError("train.lr must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", adam.lr},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"eps", adam.eps},
          {"batch_size", batch_size},
          {"patch_size", patch_size},
          {"patience", patience},
          {"min_improvement_db", min_improvement_db},
          {"max_epochs", max_epochs},
          {"iterations_per_epoch", iterations_per_epoch},
          {"restore_best", restore_best},
          {"seed", seed},
          {"workers", workers}};
}

bool TrainingState::stage_done(int stage) const {
  return std::find(completed_stages.begin(), completed_stages.end(), stage) != completed_stages.end();
}

void TrainingState::mark_done(int stage) {
  if (!stage_done(stage)) completed_stages.push_back(stage);
  std::sort(completed_stages.begin(), completed_stages.end());
}

nlohmann::json TrainingState::to_json() const {
  return {{"completed_stages", completed_stages}, {"steps", steps}, {"epochs", epochs}};
}

TrainingState TrainingState::from_json(const nlohmann::json& j) {
  TrainingState s;
  s.completed_stages = j.at("completed_stages").get<std::vector<int>>();
  s.steps = j.at("steps").get<std::map<std::string, std::int64_t>>();
  s.epochs = j.at("epochs").get<std::map<std::string, int>>();
  return s;
}

std::vector<std::string> job_prefixes(const WdnConfig& config, int stage, std::size_t module) {
  if (stage < 1 || stage > 3) throw ContractError("stage must be 1, 2 or 3");
  if (module >= job_count(config, stage))
    throw ContractError("stage " + std::to_string(stage) + " has no module " + std::to_string(module));
  return {job_name(stage, module) + "."};
}

// ---------------------------------------------------------------- joint losses

template <typename T>
std::vector<std::pair<std::string, Var<T>>> joint_loss_terms(const WdnModel<T>& model, const Batch<T>& batch,
                                                             bool training) {
  const TrainingProcedure procedure = model.config().procedure;
  if (procedure == TrainingProcedure::Stagewise)
    throw ContractError("joint losses need a joint training procedure, not stagewise");
  const bool stop = procedure == TrainingProcedure::JointNoInterstageGrad;
  const ForwardTrace<T> trace = model.forward(batch.inputs, training, stop);

  std::vector<std::pair<std::string, Var<T>>> terms;
  if (procedure != TrainingProcedure::EndToEnd) {
    for (std::size_t m = 0; m < trace.stage1.size(); ++m)
      terms.emplace_back("s1.m" + std::to_string(m), loss_upsampling(trace.stage1[m], batch.set1[m]));
    for (std::size_t m = 0; m < trace.stage2.size(); ++m)
      terms.emplace_back("s2.m" + std::to_string(m), loss_upsampling(trace.stage2[m], batch.set2[m]));
  }
  terms.emplace_back("s3.mse", mse(trace.output, batch.set3));
  terms.emplace_back("s3.dssim", shift(scale(ssim(trace.output, batch.set3), -1.0), 1.0));
  return terms;
}

template <typename T>
Var<T> joint_loss(const WdnModel<T>& model, const Batch<T>& batch, bool training) {
  Var<T> total;
  for (auto& [name, term] : joint_loss_terms(model, batch, training)) total = total ? add(total, term) : term;
  return total;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(const WdnModel<float>& model, TrainConfig config, const Dataset& data, TrainingState& state,
                 LogSink sink)
    : model_(model), config_(std::move(config)), data_(data), state_(state), sink_(std::move(sink)) {
  const int scale = model_.config().scale;
  config_.validate(scale);
  if (data_.train.empty()) throw ContractError("training set is empty");
  for (const auto& img : data_.train)
    if (img.height < config_.patch_size || img.width < config_.patch_size)
      throw ContractError("training image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                          " is smaller than the patch size " + std::to_string(config_.patch_size));
  const auto& source = data_.validation.empty() ? data_.train : data_.validation;
  for (const auto& img : source)
    validation_.push_back(build_subproblems(crop_to_multiple(img, hr_multiple(scale)), scale, model_.config()));
}

std::size_t Trainer::iterations() const {
  if (config_.iterations_per_epoch > 0) return config_.iterations_per_epoch;
  return (data_.train.size() + config_.batch_size - 1) / config_.batch_size;
}

std::vector<std::string> Trainer::stage_jobs(int stage) const {
  std::vector<std::string> out;
  for (std::size_t m = 0; m < job_count(model_.config(), stage); ++m) out.push_back(job_name(stage, m));
  return out;
}

// Cached draws repeat whenever crops cannot vary (patch equal to image size).
constexpr std::size_t kMaxCachedDraws = 512;

Trainer::Samples Trainer::draw_samples(Rng& rng, std::size_t count, int stage, std::size_t module,
                                       DrawCache& cache) const {
  Samples out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t index = rng.below(data_.train.size());
    const ImagePlane& source = data_.train[index];
    const AugmentDraw draw = draw_augmentation(source.height, source.width, config_.patch_size, rng);
    const DrawKey key{index, draw.top, draw.left, draw.rotation, draw.flip};
    if (auto it = cache.find(key); it != cache.end()) {
      out.push_back(it->second);
      continue;
    }
    auto prepared = std::make_shared<Prepared>();
    prepared->set = build_subproblems(apply_augmentation(source, config_.patch_size, draw), model_.config().scale,
                                      model_.config());
    prepared->frozen = frozen_features(stage, module, prepared->set);
    if (cache.size() < kMaxCachedDraws) cache.emplace(key, prepared);
    out.push_back(std::move(prepared));
  }
  return out;
}

// Outputs of the frozen stages feeding a stage-2 or stage-3 job, computed per
// sample with training=false (the same values a batched pass would produce).
std::vector<ImagePlane> Trainer::frozen_features(int stage, std::size_t module, const SubProblemSet& set) const {
  const auto& cfg = model_.config();
  if (stage == 1) return {};
  const Batch<float> batch = make_batch<float>(std::span<const SubProblemSet>(&set, 1));
  std::vector<ImagePlane> out;
  if (stage == 2) {
    for (std::size_t p = 0; p < 4; ++p) {
      const std::size_t source = 4 * module + p;
      if (!cfg.scale_division) {
        out.push_back(set.inputs[source]);
        continue;
      }
      const auto& mod = model_.stage1_modules()[source];
      out.push_back(tensor_to_plane(mod.forward(model_.stage1_module_inputs(source, batch.inputs), false).output->value));
    }
    return out;
  }
  const std::vector<Var<float>> previous = cfg.scale_division ? model_.stage1(batch.inputs, false) : batch.inputs;
  for (const auto& v : model_.stage2(previous, false)) out.push_back(tensor_to_plane(v->value));
  return out;
}

std::vector<Parameter<float>*> Trainer::all_parameters(const std::vector<std::string>& prefixes, bool buffers) const {
  std::vector<Parameter<float>*> out;
  for (auto& [name, p] : model_.store().entries()) {
    if (!buffers && !p.trainable) continue;
    for (const auto& prefix : prefixes)
      if (name.rfind(prefix, 0) == 0) {
        out.push_back(&p);
        break;
      }
  }
  return out;
}

std::vector<Parameter<float>*> Trainer::job_parameters(int stage, std::size_t module) const {
  return all_parameters(job_prefixes(model_.config(), stage, module), false);
}

Var<float> Trainer::job_output(int stage, std::size_t module, const Samples& samples,
                              bool training) const {
  std::vector<SubProblemSet> sets;
  for (const auto& p : samples) sets.push_back(p->set);
  auto frozen = [&](std::size_t k) {
    std::vector<ImagePlane> planes;
    for (const auto& p : samples) planes.push_back(p->frozen.at(k));
    return constant(planes_to_tensor<float>(planes));
  };
  if (stage == 1) {
    const Batch<float> batch = make_batch<float>(sets);
    return model_.stage1_modules()[module].forward(model_.stage1_module_inputs(module, batch.inputs), training).output;
  }
  if (stage == 2) {
    std::vector<Var<float>> previous;
    for (std::size_t p = 0; p < 4; ++p) previous.push_back(frozen(p));
    return model_.stage2_modules()[module].forward(previous, training).output;
  }
  return model_.stage3(frozen(0), frozen(1), training);
}

Var<float> Trainer::job_loss(int stage, std::size_t module, const Samples& samples,
                             bool training) const {
  const Var<float> out = job_output(stage, module, samples, training);
  std::vector<ImagePlane> targets;
  for (const auto& p : samples) {
    if (stage == 1) targets.push_back(p->set.set1[module]);
    if (stage == 2) targets.push_back(p->set.set2[module]);
    if (stage == 3) targets.push_back(p->set.set3);
  }
  const Var<float> gt = constant(planes_to_tensor<float>(targets));
  return stage == 3 ? loss_output(out, gt) : loss_upsampling(out, gt);
}

// Stages 1-2: PSNR of the mean validation MSE of the job's output.
// Stage 3: mean eval-protocol PSNR of the clamped prediction.
double Trainer::job_metric(int stage, std::size_t module, const Samples& validation) const {
  double total = 0.0;
  for (const auto& sample : validation) {
    const Samples one{sample};
    if (stage == 3) {
      const ImagePlane pred = clamp01(tensor_to_plane(job_output(stage, module, one, false)->value));
      total += eval_protocol(pred, sample->set.set3, model_.config().scale).psnr;
    } else {
      total += job_loss(stage, module, one, false)->value[0];
    }
  }
  const double mean = total / static_cast<double>(validation.size());
  return stage == 3 ? mean : mse_to_db(mean);
}

double Trainer::validation_psnr() const {
  double total = 0.0;
  for (const auto& sample : validation_) {
    const Batch<float> batch = make_batch<float>(std::span<const SubProblemSet>(&sample, 1));
    const ImagePlane pred = clamp01(tensor_to_plane(model_.forward(batch.inputs, false).output->value));
    total += eval_protocol(pred, sample.set3, model_.config().scale).psnr;
  }
  return total / static_cast<double>(validation_.size());
}

void Trainer::emit(const nlohmann::json& row) {
  if (sink_) sink_(row);
}

JobResult Trainer::run_job(int stage, std::size_t module) {
  const std::string name = job_name(stage, module);
  Rng rng = Rng(config_.seed).stream(job_stream(stage, module));
  const auto params = job_parameters(stage, module);
  const auto persistent = all_parameters(job_prefixes(model_.config(), stage, module), true);
  std::vector<Tensor<float>> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto* p : persistent) best.push_back(p->node->value);
  };

  Samples validation;
  for (const auto& set : validation_)
    validation.push_back(std::make_shared<const Prepared>(Prepared{set, frozen_features(stage, module, set)}));
  DrawCache cache;

  std::int64_t step = 0;
  int epoch = 0;
  {
    std::lock_guard lock(mutex_);
    step = state_.steps[name];
    epoch = state_.epochs[name];
  }
  EarlyStopping stopper(config_.patience, config_.min_improvement_db);
  JobResult result{name, 0, 0.0, false};
  for (int e = 0; e < config_.max_epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (std::size_t it = 0; it < iterations(); ++it) {
      const auto samples = draw_samples(rng, config_.batch_size, stage, module, cache);
      const Var<float> loss = job_loss(stage, module, samples, true);
      for (auto* p : params) p->node->grad_buffer().fill(0.0f);
      backward(loss);
      adam_step<float>(params, config_.adam);
      loss_sum += loss->value[0];
      ++step;
    }
    ++epoch;
    ++result.epochs;
    const double metric = job_metric(stage, module, validation);
    const bool stop = stopper.update(metric);
    if (stopper.improved() && config_.restore_best) snapshot();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    {
      std::lock_guard lock(mutex_);
      state_.steps[name] = step;
      state_.epochs[name] = epoch;
      emit({{"stage", stage},
            {"job", name},
            {"epoch", epoch},
            {"step", step},
            {"losses", {{name, loss_sum / static_cast<double>(iterations())}}},
            {"validation_psnr", metric},
            {"improved", stopper.improved()},
            {"seconds", seconds}});
    }
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_metric = stopper.best();
  if (config_.restore_best && !best.empty())
    for (std::size_t i = 0; i < persistent.size(); ++i) persistent[i]->node->value = best[i];
  return result;
}

StageResult Trainer::train_stage(int stage) {
  const auto& cfg = model_.config();
  if (stage < 1 || stage > 3) throw ContractError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  if (stage == 1 && !cfg.scale_division) throw ContractError("stage 1 does not exist without scale division");
  for (int s = 1; s < stage; ++s) {
    if (s == 1 && !cfg.scale_division) continue;
    if (!state_.stage_done(s))
      throw MissingStageError("stage " + std::to_string(stage) + " needs a trained stage " + std::to_string(s) +
                              "; train it first or resume from a checkpoint that contains it");
  }
  auto& store = model_.store();
  for (int s = 1; s <= 3; ++s) {
    if (s == stage)
      store.unfreeze_group(stage_group(s));
    else
      store.freeze_group(stage_group(s));
  }

  StageResult result{stage, {}};
  const std::size_t jobs = job_count(cfg, stage);
  result.jobs.resize(jobs);
  parallel_for(jobs, config_.workers, [&](std::size_t m) { result.jobs[m] = run_job(stage, m); });
  store.freeze_group(stage_group(stage));
  state_.mark_done(stage);
  return result;
}

StageResult Trainer::train_joint() {
  const std::string name = "joint";
  auto& store = model_.store();
  for (int s = 1; s <= 3; ++s) store.unfreeze_group(stage_group(s));
  std::vector<Parameter<float>*> params, persistent;
  for (auto& [key, p] : store.entries()) {
    persistent.push_back(&p);
    if (p.trainable) params.push_back(&p);
  }
  std::vector<Tensor<float>> best;
  DrawCache cache;
  Rng rng = Rng(config_.seed).stream(job_stream(4, 0));
  std::int64_t step = state_.steps[name];
  int epoch = state_.epochs[name];
  EarlyStopping stopper(config_.patience, config_.min_improvement_db);
  JobResult job{name, 0, 0.0, false};
  for (int e = 0; e < config_.max_epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    std::map<std::string, double> sums;
    for (std::size_t it = 0; it < iterations(); ++it) {
      std::vector<SubProblemSet> sets;
      for (const auto& p : draw_samples(rng, config_.batch_size, 1, 0, cache)) sets.push_back(p->set);
      const Batch<float> batch = make_batch<float>(sets);
      Var<float> total;
      for (auto& [term_name, term] : joint_loss_terms(model_, batch, true)) {
        sums[term_name] += term->value[0];
        total = total ? add(total, term) : term;
      }
      backward(total, store);
      adam_step<float>(params, config_.adam);
      ++step;
    }
    ++epoch;
    ++job.epochs;
    for (auto& [k, v] : sums) v /= static_cast<double>(iterations());
    const double metric = validation_psnr();
    const bool stop = stopper.update(metric);
    if (stopper.improved() && config_.restore_best) {
      best.clear();
      for (const auto* p : persistent) best.push_back(p->node->value);
    }
    state_.steps[name] = step;
    state_.epochs[name] = epoch;
    emit({{"stage", "joint"},
          {"procedure", to_string(model_.config().procedure)},
          {"job", name},
          {"epoch", epoch},
          {"step", step},
          {"losses", sums},
          {"validation_psnr", metric},
          {"improved", stopper.improved()},
          {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
    if (stop) {
      job.early_stopped = true;
      break;
    }
  }
  job.best_metric = stopper.best();
  if (config_.restore_best && !best.empty())
    for (std::size_t i = 0; i < persistent.size(); ++i) persistent[i]->node->value = best[i];
  for (int s = 1; s <= 3; ++s) {
    store.freeze_group(stage_group(s));
    if (s > 1 || model_.config().scale_division) state_.mark_done(s);
  }
  return {0, {job}};
}

#define WDN_INSTANTIATE_TRAINING(T)                                                                          \
  template Batch<T> make_batch<T>(std::span<const SubProblemSet>);                                           \
  template Var<T> loss_upsampling<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> loss_output<T>(const Var<T>&, const Var<T>&);                                              \
  template std::vector<std::pair<std::string, Var<T>>> joint_loss_terms<T>(const WdnModel<T>&, const Batch<T>&, \
                                                                           bool);                            \
  template Var<T> joint_loss<T>(const WdnModel<T>&, const Batch<T>&, bool);

WDN_INSTANTIATE_TRAINING(float)
WDN_INSTANTIATE_TRAINING(double)

}  // namespace wdn
