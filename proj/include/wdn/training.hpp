#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "wdn/imaging.hpp"
#include "wdn/model.hpp"
#include "wdn/parameters.hpp"

namespace wdn {

/// A stage cannot start because an earlier one has not been trained.
class MissingStageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ground truths and network inputs derived from one HR plane.
struct SubProblemSet {
  std::vector<ImagePlane> set1;    ///< 4 hf then 4 lf at 2h x 2w (empty without scale division)
  std::vector<ImagePlane> set2;    ///< hf, lf at 4h x 4w
  ImagePlane set3;                 ///< the HR plane
  std::vector<ImagePlane> inputs;  ///< 16 hf then 16 lf at h x w (8 planes without scale division)
  double bicubic_psnr = 0.0;       ///< PSNR of the bicubic pre-upsampling against set3 (informational)
};

/// Crops bottom/right rows and columns so both dims are multiples of `m`.
ImagePlane crop_to_multiple(const ImagePlane& plane, std::size_t m);
ColorImage crop_to_multiple(const ColorImage& image, std::size_t m);

/// Antialiased bicubic downsampling by `scale`, after cropping to a multiple of it.
ImagePlane degrade(const ImagePlane& hr, int scale);
ColorImage degrade(const ColorImage& hr, int scale);

/// HR dims must be multiples of 4 and of the scale (degrade, bicubic back up,
/// split and rearrange). Flags in `config` select the ablated layouts.
SubProblemSet build_subproblems(const ImagePlane& hr, int scale, const WdnConfig& config = WdnConfig{});

/// Stacks the samples channel by channel into [N,1,H,W] constants.
template <typename T>
struct Batch {
  std::vector<Var<T>> inputs;
  std::vector<Var<T>> set1;
  std::vector<Var<T>> set2;
  Var<T> set3;
};

template <typename T>
Batch<T> make_batch(std::span<const SubProblemSet> samples);

/// Mean squared error (the 2x module loss).
template <typename T>
Var<T> loss_upsampling(const Var<T>& pred, const Var<T>& gt);
/// MSE + (1 - SSIM) (the output-module loss).
template <typename T>
Var<T> loss_output(const Var<T>& pred, const Var<T>& gt);

ImagePlane rotate90(const ImagePlane& plane, int quarter_turns);  // counter-clockwise
ImagePlane flip_horizontal(const ImagePlane& plane);
ImagePlane crop(const ImagePlane& plane, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

struct AugmentDraw {
  std::size_t top = 0;
  std::size_t left = 0;
  int rotation = 0;  // quarter turns
  bool flip = false;
};

AugmentDraw draw_augmentation(std::size_t height, std::size_t width, std::size_t patch, Rng& rng);
ImagePlane apply_augmentation(const ImagePlane& hr, std::size_t patch, const AugmentDraw& draw);
/// Random patch crop, k*90 degree rotation (k uniform in 0..3), horizontal flip with p = 0.5.
ImagePlane augment(const ImagePlane& hr, std::size_t patch, Rng& rng);

/// Higher-is-better metric with patience: stops once `patience` consecutive
/// epochs fail to beat the best value by at least `min_delta`.
class EarlyStopping {
 public:
  EarlyStopping(int patience = 5, double min_delta = 0.01) : patience_(patience), min_delta_(min_delta) {}

  /// Records one epoch; returns true when training should stop.
  bool update(double metric);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  std::optional<double> seen_;
  double best_ = 0.0;
  int stale_ = 0;
  bool improved_ = false;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t patch_size = 192;
  int patience = 5;
  double min_improvement_db = 0.01;
  int max_epochs = 1000;
  /// Optimizer steps per epoch; 0 means one pass, ceil(images / batch).
  std::size_t iterations_per_epoch = 0;
  /// Keep the parameters of the best validation epoch when a job ends.
  bool restore_best = true;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  static TrainConfig full() { return {}; }
  static TrainConfig desk() {
    TrainConfig c;
    c.batch_size = 4;
    c.patch_size = 96;
    c.max_epochs = 200;
    return c;
  }

  void validate(int scale) const;
  nlohmann::json to_json() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Training data as HR luminance planes. An empty validation list means
/// validating on the training images.
struct Dataset {
  std::vector<ImagePlane> train;
  std::vector<ImagePlane> validation;
};

/// Progress that survives in checkpoints.
struct TrainingState {
  std::vector<int> completed_stages;
  std::map<std::string, std::int64_t> steps;   ///< per training job
  std::map<std::string, int> epochs;           ///< per training job
  bool stage_done(int stage) const;
  void mark_done(int stage);
  nlohmann::json to_json() const;
  static TrainingState from_json(const nlohmann::json& j);
  bool operator==(const TrainingState&) const = default;
};

struct JobResult {
  std::string job;
  int epochs = 0;
  double best_metric = 0.0;
  bool early_stopped = false;
};

struct StageResult {
  int stage = 0;
  std::vector<JobResult> jobs;
};

using LogSink = std::function<void(const nlohmann::json&)>;

/// Runs training jobs against a model whose parameters live in `model.store()`.
class Trainer {
 public:
  Trainer(const WdnModel<float>& model, TrainConfig config, const Dataset& data, TrainingState& state,
          LogSink sink = {});

  /// Stage-wise procedure: trains stage `stage` with earlier stages frozen.
  /// Stage 1 runs one job per module; stage 2 one per stream; stage 3 one job.
  StageResult train_stage(int stage);
  /// Procedures 1-3: all stages at once under the configured procedure.
  StageResult train_joint();

  /// Job names of a stage, e.g. "s1.m0".."s1.m7".
  std::vector<std::string> stage_jobs(int stage) const;
  /// Trains one job of a stage-wise run on the calling thread.
  JobResult run_job(int stage, std::size_t module);

  /// Mean stage-3 PSNR over the validation images (eval protocol on clamped output).
  double validation_psnr() const;

 private:
  /// One augmented draw: its sub-problems plus the outputs of the frozen
  /// stages that feed the job being trained.
  struct Prepared {
    SubProblemSet set;
    std::vector<ImagePlane> frozen;
  };
  using DrawKey = std::tuple<std::size_t, std::size_t, std::size_t, int, bool>;
  using DrawCache = std::map<DrawKey, std::shared_ptr<const Prepared>>;
  using Samples = std::vector<std::shared_ptr<const Prepared>>;

  Samples draw_samples(Rng& rng, std::size_t count, int stage, std::size_t module, DrawCache& cache) const;
  std::vector<ImagePlane> frozen_features(int stage, std::size_t module, const SubProblemSet& set) const;
  std::vector<Parameter<float>*> job_parameters(int stage, std::size_t module) const;
  std::vector<Parameter<float>*> all_parameters(const std::vector<std::string>& prefixes, bool buffers) const;
  Var<float> job_output(int stage, std::size_t module, const Samples& samples, bool training) const;
  Var<float> job_loss(int stage, std::size_t module, const Samples& samples, bool training) const;
  double job_metric(int stage, std::size_t module, const Samples& validation) const;
  std::size_t iterations() const;
  void emit(const nlohmann::json& row);

  const WdnModel<float>& model_;
  TrainConfig config_;
  const Dataset& data_;
  TrainingState& state_;
  LogSink sink_;
  std::vector<SubProblemSet> validation_;
  std::mutex mutex_;
};

/// Minimal trainable-parameter mask for one job: every parameter whose name
/// starts with one of the job's module prefixes.
std::vector<std::string> job_prefixes(const WdnConfig& config, int stage, std::size_t module);

/// Named loss terms of the joint procedures. Procedures 1 and 2 use twelve:
/// eight stage-1 MSEs, two stage-2 MSEs, then the stage-3 MSE and DSSIM.
/// End-to-end training keeps only the two stage-3 terms. Procedure 1 stops
/// gradients at stage boundaries.
template <typename T>
std::vector<std::pair<std::string, Var<T>>> joint_loss_terms(const WdnModel<T>& model, const Batch<T>& batch,
                                                             bool training);
template <typename T>
Var<T> joint_loss(const WdnModel<T>& model, const Batch<T>& batch, bool training);

}  // namespace wdn
