#include "wdn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "wdn/checkpoint.hpp"
#include "wdn/gradcheck.hpp"
#include "wdn/metrics.hpp"

namespace wdn {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- run config

namespace {

template <typename V>
V typed(const std::string& key, const json& value) {
  try {
    return value.get<V>();
  } catch (const json::exception&) {
    throw ConfigError(key, "unexpected value " + value.dump());
  }
}

int positive_int(const std::string& key, const json& value) {
  if (!value.is_number_integer()) throw ConfigError(key, "expected an integer, got " + value.dump());
  const int v = value.get<int>();
  if (v < 1) throw ConfigError(key, "must be at least 1, got " + value.dump());
  return v;
}

std::size_t count(const std::string& key, const json& value, bool allow_zero = false) {
  if (!value.is_number_integer() || value.get<long long>() < (allow_zero ? 0 : 1))
    throw ConfigError(key, std::string("expected a ") + (allow_zero ? "non-negative" : "positive") +
                               " integer, got " + value.dump());
  return value.get<std::size_t>();
}

double number(const std::string& key, const json& value) {
  if (!value.is_number()) throw ConfigError(key, "expected a number, got " + value.dump());
  return value.get<double>();
}

bool boolean(const std::string& key, const json& value) {
  if (!value.is_boolean()) throw ConfigError(key, "expected true or false, got " + value.dump());
  return value.get<bool>();
}

using Setter = std::function<void(RunConfig&, const std::string&, const json&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table{
      {"preset",
       [](RunConfig& c, const std::string& k, const json& v) {
         const auto name = typed<std::string>(k, v);
         if (name == "full") {
           c.model = WdnConfig::full();
           c.train = TrainConfig::full();
         } else if (name == "desk") {
           c.model = WdnConfig::desk();
           c.train = TrainConfig::desk();
         } else {
           throw ConfigError(k, "unknown preset '" + name + "' (expected full or desk)");
         }
         c.preset = name;
       }},
      {"seed",
       [](RunConfig& c, const std::string& k, const json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           throw ConfigError(k, "expected a non-negative integer, got " + v.dump());
         c.train.seed = v.get<std::uint64_t>();
       }},
      {"workers", [](RunConfig& c, const std::string& k, const json& v) { c.train.workers = count(k, v); }},
      {"model.scale",
       [](RunConfig& c, const std::string& k, const json& v) {
         const int s = positive_int(k, v);
         if (s < 2 || s > 4) throw ConfigError(k, "scale must be 2, 3 or 4");
         c.model.scale = s;
       }},
      {"model.channels", [](RunConfig& c, const std::string& k, const json& v) { c.model.channels = positive_int(k, v); }},
      {"model.block_depth",
       [](RunConfig& c, const std::string& k, const json& v) { c.model.block_depth = positive_int(k, v); }},
      {"model.activation",
       [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.model.activation = parse_calibration(typed<std::string>(k, v));
         } catch (const ConfigError&) {
           throw;
         } catch (const ContractError& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"model.frequency_division",
       [](RunConfig& c, const std::string& k, const json& v) { c.model.frequency_division = boolean(k, v); }},
      {"model.scale_division",
       [](RunConfig& c, const std::string& k, const json& v) { c.model.scale_division = boolean(k, v); }},
      {"model.attention", [](RunConfig& c, const std::string& k, const json& v) { c.model.attention = boolean(k, v); }},
      {"model.noise_suppressor",
       [](RunConfig& c, const std::string& k, const json& v) { c.model.noise_suppressor = boolean(k, v); }},
      {"model.training_procedure",
       [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.model.procedure = parse_procedure(typed<std::string>(k, v));
         } catch (const ConfigError&) {
           throw;
         } catch (const ContractError& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"train.lr", [](RunConfig& c, const std::string& k, const json& v) { c.train.adam.lr = number(k, v); }},
      {"train.beta1", [](RunConfig& c, const std::string& k, const json& v) { c.train.adam.beta1 = number(k, v); }},
      {"train.beta2", [](RunConfig& c, const std::string& k, const json& v) { c.train.adam.beta2 = number(k, v); }},
      {"train.eps", [](RunConfig& c, const std::string& k, const json& v) { c.train.adam.eps = number(k, v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& k, const json& v) { c.train.batch_size = count(k, v); }},
      {"train.patch_size", [](RunConfig& c, const std::string& k, const json& v) { c.train.patch_size = count(k, v); }},
      {"train.patience", [](RunConfig& c, const std::string& k, const json& v) { c.train.patience = positive_int(k, v); }},
      {"train.min_improvement_db",
       [](RunConfig& c, const std::string& k, const json& v) { c.train.min_improvement_db = number(k, v); }},
      {"train.max_epochs",
       [](RunConfig& c, const std::string& k, const json& v) { c.train.max_epochs = positive_int(k, v); }},
      {"train.iterations_per_epoch",
       [](RunConfig& c, const std::string& k, const json& v) { c.train.iterations_per_epoch = count(k, v, true); }},
      {"train.restore_best",
       [](RunConfig& c, const std::string& k, const json& v) { c.train.restore_best = boolean(k, v); }},
      {"data.train",
       [](RunConfig& c, const std::string& k, const json& v) { c.train_dir = typed<std::string>(k, v); }},
      {"data.validation",
       [](RunConfig& c, const std::string& k, const json& v) { c.validation_dir = typed<std::string>(k, v); }},
      {"output.dir",
       [](RunConfig& c, const std::string& k, const json& v) { c.output_dir = typed<std::string>(k, v); }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, s] : setters()) out.push_back(k);
    return out;
  }();
  return names;
}

void RunConfig::apply(const std::string& key, const json& value) {
  for (const auto& [name, setter] : setters())
    if (name == key) {
      setter(*this, key, value);
      explicit_keys.insert(key);
      return;
    }
  throw ConfigError(key, "unknown key");
}

void RunConfig::apply(const json& flat) {
  if (!flat.is_object()) throw ConfigError("<root>", "the configuration must be a JSON object of dotted keys");
  if (flat.contains("preset")) apply("preset", flat.at("preset"));
  for (const auto& [key, value] : flat.items())
    if (key != "preset") apply(key, value);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "overrides take the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply(key, value);
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  const json flat = json::parse(in, nullptr, false);
  if (flat.is_discarded()) throw ConfigError("<file>", path.string() + " is not valid JSON");
  RunConfig c;
  c.apply(flat);
  return c;
}

bool RunConfig::model_keys_explicit() const {
  for (const auto& k : explicit_keys)
    if (k == "preset" || k.rfind("model.", 0) == 0) return true;
  return false;
}

json RunConfig::to_json() const {
  return {{"preset", preset},
          {"seed", train.seed},
          {"workers", train.workers},
          {"model.scale", model.scale},
          {"model.channels", model.channels},
          {"model.block_depth", model.block_depth},
          {"model.activation", to_string(model.activation)},
          {"model.frequency_division", model.frequency_division},
          {"model.scale_division", model.scale_division},
          {"model.attention", model.attention},
          {"model.noise_suppressor", model.noise_suppressor},
          {"model.training_procedure", to_string(model.procedure)},
          {"train.lr", train.adam.lr},
          {"train.beta1", train.adam.beta1},
          {"train.beta2", train.adam.beta2},
          {"train.eps", train.adam.eps},
          {"train.batch_size", train.batch_size},
          {"train.patch_size", train.patch_size},
          {"train.patience", train.patience},
          {"train.min_improvement_db", train.min_improvement_db},
          {"train.max_epochs", train.max_epochs},
          {"train.iterations_per_epoch", train.iterations_per_epoch},
          {"train.restore_best", train.restore_best},
          {"data.train", train_dir.string()},
          {"data.validation", validation_dir.string()},
          {"output.dir", output_dir.string()}};
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (entry.is_regular_file() && ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- commands

namespace {

/// Failure carrying its exit code up to run_cli.
struct CommandFailure : std::runtime_error {
  CommandFailure(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

void echo(Context& ctx, const std::string& command, json resolved, const fs::path& dir = {}) {
  resolved["command"] = command;
  ctx.out << "config " << resolved.dump() << '\n';
  if (!dir.empty()) {
    fs::create_directories(dir);
    std::ofstream f(dir / "run_config.json");
    f << resolved.dump(2) << '\n';
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

void require_scale(int scale) {
  if (scale < 2 || scale > 4) throw ConfigError("scale", "scale must be 2, 3 or 4, got " + std::to_string(scale));
}

int cmd_degrade(Context& ctx, const fs::path& in, const fs::path& out, int scale) {
  require_scale(scale);
  echo(ctx, "degrade", {{"in", in.string()}, {"out", out.string()}, {"scale", scale}}, out);
  const auto files = list_pngs(in);
  if (files.empty()) throw CommandFailure(exit_code::kNoInput, "no PNG files in " + in.string());
  std::size_t written = 0;
  for (const auto& f : files) {
    try {
      const ColorImage hr = read_png(f);
      write_png(degrade(hr, scale), out / f.filename());
      ++written;
    } catch (const std::exception& e) {
      ctx.err << "warning: skipping " << f.filename().string() << ": " << e.what() << '\n';
    }
  }
  ctx.out << "degraded " << written << " of " << files.size() << " images\n";
  if (written == 0) throw CommandFailure(exit_code::kNoInput, "every input failed");
  return exit_code::kOk;
}

// lf = plane - hf lies in [-1, 1]; it is stored as (lf + 1) / 2 so nothing clips.
struct Export {
  std::string file;
  const ImagePlane* plane;
  double offset;  // stored = (value + offset) * scale
  double scale;
};

int cmd_decompose(Context& ctx, const fs::path& in, const fs::path& out, const RunConfig& cfg) {
  echo(ctx, "decompose", {{"in", in.string()}, {"out", out.string()}, {"config", cfg.to_json()}}, out);
  const ImagePlane hr = luminance(read_png(in));
  const SubProblemSet set = build_subproblems(hr, cfg.model.scale, cfg.model);

  std::vector<Export> exports;
  auto name = [](const std::string& stem, std::size_t i, std::size_t width) {
    std::ostringstream s;
    s << stem << std::setw(static_cast<int>(width)) << std::setfill('0') << i << ".png";
    return s.str();
  };
  const std::size_t half1 = set.set1.size() / 2, half_in = set.inputs.size() / 2;
  for (std::size_t i = 0; i < set.set1.size(); ++i) {
    const bool hf = i < half1;
    exports.push_back({name(hf ? "set1_hf_" : "set1_lf_", hf ? i : i - half1, 1), &set.set1[i], hf ? 0.0 : 1.0,
                       hf ? 1.0 : 0.5});
  }
  exports.push_back({"set2_hf.png", &set.set2[0], 0.0, 1.0});
  exports.push_back({"set2_lf.png", &set.set2[1], 1.0, 0.5});
  exports.push_back({"set3.png", &set.set3, 0.0, 1.0});
  for (std::size_t i = 0; i < set.inputs.size(); ++i) {
    const bool hf = i < half_in;
    exports.push_back({name(hf ? "input_hf_" : "input_lf_", hf ? i : i - half_in, 2), &set.inputs[i], hf ? 0.0 : 1.0,
                       hf ? 1.0 : 0.5});
  }
  if (!cfg.model.frequency_division)  // both members are the image itself
    for (auto& e : exports) e.offset = 0.0, e.scale = 1.0;

  json manifest = json::array();
  for (const auto& e : exports) {
    ImagePlane stored = *e.plane;
    for (auto& v : stored.values) v = (v + e.offset) * e.scale;
    write_png(stored, out / e.file);
    manifest.push_back({{"file", e.file},
                        {"height", stored.height},
                        {"width", stored.width},
                        {"decode", "value = stored / " + std::to_string(e.scale) + " - " + std::to_string(e.offset)},
                        {"offset", e.offset},
                        {"scale", e.scale}});
  }
  write_json(out / "decompose.json", {{"files", manifest}, {"bicubic_psnr", set.bicubic_psnr}});
  ctx.out << "wrote " << exports.size() << " channels (" << set.set1.size() + set.set2.size() + 1 << " targets, "
          << set.inputs.size() << " inputs)\n";
  return exit_code::kOk;
}

std::vector<ImagePlane> load_luminance_dir(Context& ctx, const fs::path& dir) {
  std::vector<ImagePlane> out;
  for (const auto& f : list_pngs(dir)) {
    try {
      out.push_back(luminance(read_png(f)));
    } catch (const IoError& e) {
      ctx.err << "warning: skipping " << f.filename().string() << ": " << e.what() << '\n';
    }
  }
  return out;
}

std::string describe_difference(const WdnConfig& a, const WdnConfig& b) {
  std::string out;
  const json ja = a.to_json(), jb = b.to_json();
  for (const auto& [k, v] : ja.items())
    if (jb.at(k) != v) out += (out.empty() ? "" : ", ") + k + " " + v.dump() + " vs checkpoint " + jb.at(k).dump();
  return out;
}

int cmd_train(Context& ctx, RunConfig cfg, const std::string& stage, const fs::path& resume) {
  TrainingState state;
  if (!resume.empty()) {
    const CheckpointInfo info = read_checkpoint(resume);
    if (cfg.model_keys_explicit() && !(cfg.model == info.config))
      throw CommandFailure(exit_code::kCheckpointMismatch,
                           "configuration differs from checkpoint: " + describe_difference(cfg.model, info.config));
    cfg.model = info.config;
    state = info.state;
    if (cfg.output_dir.empty()) cfg.output_dir = resume;
  }
  if (cfg.output_dir.empty()) throw ConfigError("output.dir", "an output directory is required (or --out)");
  if (cfg.train_dir.empty()) throw ConfigError("data.train", "a training image directory is required");
  try {
    cfg.model.validate();
    cfg.train.validate(cfg.model.scale);
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractError& e) {
    throw ConfigError("model/train", e.what());
  }
  echo(ctx, "train", {{"config", cfg.to_json()}, {"stage", stage}, {"resume", resume.string()}}, cfg.output_dir);

  Dataset data;
  data.train = load_luminance_dir(ctx, cfg.train_dir);
  if (data.train.empty()) throw CommandFailure(exit_code::kNoInput, "no readable training images in " + cfg.train_dir.string());
  if (!cfg.validation_dir.empty()) data.validation = load_luminance_dir(ctx, cfg.validation_dir);

  ParameterStore<float> store;
  WdnModel<float> model(cfg.model, store, cfg.train.seed);
  if (!resume.empty()) load_checkpoint(resume, store);

  std::ofstream log(cfg.output_dir / "train_log.jsonl", std::ios::app);
  if (!log) throw IoError("cannot open training log in " + cfg.output_dir.string());
  Trainer trainer(model, cfg.train, data, state, [&](const json& row) {
    log << row.dump() << '\n';
    log.flush();
  });

  auto report = [&](const StageResult& r) {
    for (const auto& job : r.jobs)
      ctx.out << "job " << job.job << ": " << job.epochs << " epochs, best validation " << std::fixed
              << std::setprecision(3) << job.best_metric << " dB" << (job.early_stopped ? " (early stop)" : " (epoch cap)")
              << '\n';
    save_checkpoint(cfg.output_dir, cfg.model, store, state);
  };

  if (cfg.model.procedure != TrainingProcedure::Stagewise) {
    if (stage != "all")
      throw ConfigError("stage", "procedure " + to_string(cfg.model.procedure) + " trains all stages together; use --stage all");
    report(trainer.train_joint());
    return exit_code::kOk;
  }
  std::vector<int> stages;
  if (stage == "all") {
    for (int s = cfg.model.scale_division ? 1 : 2; s <= 3; ++s)
      if (!state.stage_done(s)) stages.push_back(s);
  } else if (stage == "1" || stage == "2" || stage == "3") {
    stages.push_back(std::stoi(stage));
  } else {
    throw ConfigError("stage", "expected 1, 2, 3 or all, got '" + stage + "'");
  }
  for (int s : stages) {
    ctx.out << "training stage " << s << '\n';
    report(trainer.train_stage(s));
  }
  ctx.out << "validation PSNR " << std::fixed << std::setprecision(3) << trainer.validation_psnr() << " dB\n";
  return exit_code::kOk;
}

ColorImage upsample_color(const ColorImage& lr, int scale, const std::function<ImagePlane(const ImagePlane&)>& luma) {
  const YCbCr ycc = rgb_to_ycbcr(lr);
  const std::size_t h = lr.height() * static_cast<std::size_t>(scale), w = lr.width() * static_cast<std::size_t>(scale);
  YCbCr up{luma(ycc.y), bicubic_resize(ycc.cb, h, w), bicubic_resize(ycc.cr, h, w)};
  ColorImage rgb = ycbcr_to_rgb(up);
  return {clamp01(rgb.r), clamp01(rgb.g), clamp01(rgb.b)};
}

int cmd_upsample(Context& ctx, const fs::path& in, const fs::path& ckpt, int scale, const fs::path& out,
                 const std::string& method) {
  require_scale(scale);
  echo(ctx, "upsample",
       {{"in", in.string()}, {"ckpt", ckpt.string()}, {"scale", scale}, {"out", out.string()}, {"method", method}});
  const ColorImage lr = read_png(in);
  if (lr.height() < 3 || lr.width() < 3) throw ContractError("input must be at least 3x3");
  const std::size_t h = lr.height() * static_cast<std::size_t>(scale), w = lr.width() * static_cast<std::size_t>(scale);
  ColorImage result;
  if (method == "bicubic") {
    result = upsample_color(lr, scale, [&](const ImagePlane& y) { return bicubic_resize(y, h, w); });
  } else if (method == "wdn") {
    if (ckpt.empty()) throw ConfigError("ckpt", "--ckpt is required for the wdn method");
    const CheckpointInfo info = read_checkpoint(ckpt);
    if (info.config.scale != scale)
      throw CommandFailure(exit_code::kCheckpointMismatch, "checkpoint was trained for scale " +
                                                               std::to_string(info.config.scale) + ", asked for " +
                                                               std::to_string(scale));
    if (!info.state.stage_done(3)) throw CommandFailure(exit_code::kMissingStage, "checkpoint has not completed stage 3");
    ParameterStore<float> store;
    WdnModel<float> model(info.config, store, 0);
    load_checkpoint(ckpt, store);
    result = upsample_color(lr, scale, [&](const ImagePlane& y) { return model.upsample(y); });
  } else {
    throw ConfigError("method", "expected wdn or bicubic, got '" + method + "'");
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(result, out);
  ctx.out << "wrote " << out.string() << " (" << result.height() << "x" << result.width() << ")\n";
  return exit_code::kOk;
}

int cmd_eval(Context& ctx, const fs::path& pred_dir, const fs::path& gt_dir, int scale, const fs::path& report_path) {
  require_scale(scale);
  echo(ctx, "eval",
       {{"pred", pred_dir.string()}, {"gt", gt_dir.string()}, {"scale", scale}, {"report", report_path.string()}});
  EvalReport report;
  report.scale = scale;
  const auto gts = list_pngs(gt_dir);
  if (gts.empty()) throw CommandFailure(exit_code::kNoInput, "no PNG files in " + gt_dir.string());
  for (const auto& gt_path : gts) {
    const std::string name = gt_path.filename().string();
    const fs::path pred_path = pred_dir / name;
    if (!fs::exists(pred_path)) {
      report.skipped.push_back(name + ": no prediction");
      continue;
    }
    try {
      const ColorImage pred = read_png(pred_path);
      ColorImage gt = read_png(gt_path);
      // Predictions of cropped inputs are compared with the same crop of the ground truth.
      if (pred.height() != gt.height() || pred.width() != gt.width()) gt = crop_to_multiple(gt, static_cast<std::size_t>(scale));
      if (pred.height() != gt.height() || pred.width() != gt.width()) {
        report.skipped.push_back(name + ": size mismatch");
        continue;
      }
      report.entries.push_back(eval_protocol(pred, gt, scale, name));
    } catch (const std::exception& e) {
      report.skipped.push_back(name + ": " + e.what());
    }
  }
  write_json(report_path, report.to_json());
  ctx.out << "evaluated " << report.entries.size() << " images";
  if (!report.entries.empty())
    ctx.out << ", mean PSNR " << std::fixed << std::setprecision(3) << report.mean_psnr() << " dB, mean SSIM "
            << std::setprecision(4) << report.mean_ssim();
  ctx.out << '\n';
  for (const auto& s : report.skipped) ctx.err << "skipped " << s << '\n';
  if (report.entries.empty()) throw CommandFailure(exit_code::kNoInput, "no image pairs could be evaluated");
  return report.skipped.empty() ? exit_code::kOk : exit_code::kSkippedFiles;
}

int cmd_gradcheck(Context& ctx, std::uint64_t seed, double perturb) {
  GradCheckOptions options;
  options.seed = seed;
  options.perturb = perturb;
  echo(ctx, "gradcheck",
       {{"seed", seed}, {"step", options.step}, {"composite_step", options.composite_step}, {"perturb", perturb}});
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  double worst64 = 0.0;
  for (const auto& r : run_gradcheck_suite(options)) {
    ok = ok && r.passed();
    if (r.precision == "f64") worst64 = std::max(worst64, r.error);
    ctx.out << std::left << std::setw(36) << r.name << ' ' << r.precision << "  rel.err " << std::scientific
            << std::setprecision(3) << r.error << "  limit " << std::setprecision(0) << r.threshold;
    if (r.excluded > 0) ctx.out << "  (" << r.excluded << "/" << r.probed << " probes on kinks skipped)";
    ctx.out << "  " << (r.passed() ? "ok" : "FAIL") << '\n';
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ctx.out << "max relative error (64-bit) " << std::scientific << std::setprecision(3) << worst64 << ", "
          << std::fixed << std::setprecision(1) << seconds << " s\n";
  return ok ? exit_code::kOk : exit_code::kGradcheckFailed;
}

RunConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg = file.empty() ? RunConfig{} : RunConfig::from_file(file);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"WDN divide-and-conquer super-resolution"};
  app.require_subcommand(1);
  Context ctx{out, err};
  std::function<int()> action;

  std::string in, out_path, config_file, resume, stage = "all", ckpt, method = "wdn", pred, gt, report;
  std::vector<std::string> overrides;
  int scale = 4;
  std::uint64_t seed = 1;
  double perturb = 0.0;
  std::uint64_t train_seed = 0;
  std::size_t workers = 1;

  auto* degrade_cmd = app.add_subcommand("degrade", "Bicubic-downsample every PNG of a directory");
  degrade_cmd->add_option("--in", in, "input directory")->required();
  degrade_cmd->add_option("--out", out_path, "output directory")->required();
  degrade_cmd->add_option("--scale", scale, "downsampling factor");
  degrade_cmd->callback([&] { action = [&] { return cmd_degrade(ctx, in, out_path, scale); }; });

  auto* decompose_cmd = app.add_subcommand("decompose", "Export the sub-problem channels of one HR image");
  decompose_cmd->add_option("--in", in, "HR image")->required();
  decompose_cmd->add_option("--out", out_path, "output directory")->required();
  auto* decompose_scale = decompose_cmd->add_option("--scale", scale, "upscaling factor (overrides model.scale)");
  decompose_cmd->add_option("--config", config_file, "JSON run configuration (ablation flags)");
  decompose_cmd->add_option("--set", overrides, "key=value override")->take_all();
  decompose_cmd->callback([&] {
    action = [&] {
      RunConfig cfg = resolve_config(config_file, overrides);
      if (decompose_scale->count() > 0) cfg.apply("model.scale", scale);
      return cmd_decompose(ctx, in, out_path, cfg);
    };
  });

  auto* train_cmd = app.add_subcommand("train", "Train one stage, all stages, or a joint procedure");
  train_cmd->add_option("--stage", stage, "1, 2, 3 or all");
  train_cmd->add_option("--config", config_file, "JSON run configuration");
  train_cmd->add_option("--resume", resume, "checkpoint directory to continue from");
  train_cmd->add_option("--out", out_path, "output directory (overrides output.dir)");
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "random seed (overrides seed)");
  auto* workers_opt = train_cmd->add_option("--workers", workers, "worker threads (overrides workers)");
  train_cmd->add_option("--set", overrides, "key=value override")->take_all();
  train_cmd->callback([&] {
    action = [&] {
      RunConfig cfg = resolve_config(config_file, overrides);
      if (!out_path.empty()) cfg.apply("output.dir", out_path);
      if (seed_opt->count() > 0) cfg.apply("seed", train_seed);
      if (workers_opt->count() > 0) cfg.apply("workers", workers);
      return cmd_train(ctx, cfg, stage, resume);
    };
  });

  auto* upsample_cmd = app.add_subcommand("upsample", "Super-resolve one image");
  upsample_cmd->add_option("--in", in, "low-resolution image")->required();
  upsample_cmd->add_option("--ckpt", ckpt, "trained checkpoint directory");
  upsample_cmd->add_option("--scale", scale, "upscaling factor");
  upsample_cmd->add_option("--out", out_path, "output image")->required();
  upsample_cmd->add_option("--method", method, "wdn or bicubic");
  upsample_cmd->callback([&] { action = [&] { return cmd_upsample(ctx, in, ckpt, scale, out_path, method); }; });

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  eval_cmd->add_option("--pred", pred, "prediction directory")->required();
  eval_cmd->add_option("--gt", gt, "ground-truth directory")->required();
  eval_cmd->add_option("--scale", scale, "scale (border shave)");
  eval_cmd->add_option("--report", report, "JSON report path")->required();
  eval_cmd->callback([&] { action = [&] { return cmd_eval(ctx, pred, gt, scale, report); }; });

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");
  gradcheck_cmd->add_option("--seed", seed, "seed for inputs and probed coordinates");
  gradcheck_cmd->add_option("--perturb", perturb, "scale analytic gradients by (1 + perturb); detector test hook")
      ->group("");
  gradcheck_cmd->callback([&] { action = [&] { return cmd_gradcheck(ctx, seed, perturb); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }

  try {
    return action();
  } catch (const CommandFailure& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kInvalidConfig;
  } catch (const MissingStageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kMissingStage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return e.failure() == CheckpointFailure::ShapeMismatch ? exit_code::kCheckpointMismatch : exit_code::kIoError;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kIoError;
  }
}

}  // namespace wdn
