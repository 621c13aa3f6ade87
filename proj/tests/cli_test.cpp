#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "support.hpp"
#include "wdn/checkpoint.hpp"
#include "wdn/cli.hpp"

namespace wdn {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wdn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_pngs(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png" ? 1 : 0;
  return n;
}

// Smallest settings that still exercise every stage.
std::vector<std::string> tiny(const test::TempDir& dir) {
  return {"--set", "preset=\"desk\"",        "--set", "model.channels=4",          "--set", "model.block_depth=1",
          "--set", "train.batch_size=2",     "--set", "train.patch_size=32",       "--set", "train.max_epochs=1",
          "--set", "train.iterations_per_epoch=1", "--set", "data.train=\"" + (dir / "hr").string() + "\"",
          "--set", "data.validation=\"" + (dir / "hr").string() + "\""};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::create_directories(dir_ / "hr");
    write_png(test::color_scene(61, 48, 48), dir_ / "hr" / "a.png");
    write_png(test::color_scene(62, 40, 56), dir_ / "hr" / "b.png");
  }
  test::TempDir dir_{"cli"};
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, exit_code::kUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, exit_code::kUsage);
  EXPECT_EQ(cli({"degrade", "--in", "x"}).code, exit_code::kUsage);
  EXPECT_EQ(cli({"--help"}).code, exit_code::kOk);
}

TEST_F(CliTest, DegradeWritesScaledImagesAndIsIdempotent) {
  const auto run = cli({"degrade", "--in", (dir_ / "hr").string(), "--out", (dir_ / "lr").string(), "--scale", "4"});
  ASSERT_EQ(run.code, exit_code::kOk) << run.err;
  EXPECT_NE(run.out.find("config {"), std::string::npos);
  const auto b = read_png(dir_ / "lr" / "b.png");
  EXPECT_EQ(b.height(), 10u);
  EXPECT_EQ(b.width(), 14u);
  ASSERT_EQ(cli({"degrade", "--in", (dir_ / "hr").string(), "--out", (dir_ / "lr2").string(), "--scale", "4"}).code, 0);
  EXPECT_EQ(slurp(dir_ / "lr" / "a.png"), slurp(dir_ / "lr2" / "a.png"));
  EXPECT_TRUE(fs::exists(dir_ / "lr" / "run_config.json"));
}

TEST_F(CliTest, DegradeInputErrors) {
  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(cli({"degrade", "--in", (dir_ / "empty").string(), "--out", (dir_ / "o").string()}).code,
            exit_code::kNoInput);
  EXPECT_EQ(cli({"degrade", "--in", (dir_ / "hr").string(), "--out", (dir_ / "o").string(), "--scale", "5"}).code,
            exit_code::kInvalidConfig);
  std::ofstream(dir_ / "empty" / "broken.png") << "not a png";
  const auto run = cli({"degrade", "--in", (dir_ / "empty").string(), "--out", (dir_ / "o").string()});
  EXPECT_EQ(run.code, exit_code::kNoInput);
  EXPECT_NE(run.err.find("broken.png"), std::string::npos);
}

TEST_F(CliTest, DecomposeExportsEveryChannelLosslessly) {
  const auto out = dir_ / "dec";
  const auto run = cli({"decompose", "--in", (dir_ / "hr" / "a.png").string(), "--out", out.string()});
  ASSERT_EQ(run.code, exit_code::kOk) << run.err;
  EXPECT_EQ(count_pngs(out), 43u);
  std::ifstream f(out / "decompose.json");
  const auto manifest = nlohmann::json::parse(f);
  ASSERT_EQ(manifest["files"].size(), 43u);

  auto decoded = [&](const std::string& file) {
    for (const auto& e : manifest["files"])
      if (e["file"] == file) {
        ImagePlane p = read_png(out / file).r;  // gray files: every channel holds the stored value
        for (double& v : p.values) v = v / e["scale"].get<double>() - e["offset"].get<double>();
        return p;
      }
    ADD_FAILURE() << file;
    return ImagePlane();
  };
  const auto hf = decoded("set2_hf.png"), lf = decoded("set2_lf.png"), whole = decoded("set3.png");
  EXPECT_EQ(decoded("input_lf_15.png").height, 12u);
  EXPECT_EQ(decoded("set1_hf_3.png").width, 24u);
  for (std::size_t i = 0; i < whole.size(); ++i) ASSERT_NEAR(hf.values[i] + lf.values[i], whole.values[i], 2.0 / 255);
  EXPECT_EQ(cli({"decompose", "--in", (dir_ / "hr" / "b.png").string(), "--out", out.string(), "--scale", "3"}).code,
            exit_code::kInvalidInput);  // 40 and 56 are not multiples of 12
}

TEST_F(CliTest, ConfigurationErrors) {
  const auto base = std::vector<std::string>{"train", "--out", (dir_ / "run").string()};
  EXPECT_EQ(cli(concat(base, {"--set", "model.colour=1"})).code, exit_code::kInvalidConfig);
  EXPECT_EQ(cli(concat(base, {"--set", "train.lr=\"fast\""})).code, exit_code::kInvalidConfig);
  EXPECT_EQ(cli(concat(base, {"--set", "model.scale=7"})).code, exit_code::kInvalidConfig);
  EXPECT_EQ(cli(concat(base, {"--stage", "5"})).code, exit_code::kInvalidConfig);
  EXPECT_EQ(cli({"train", "--set", "data.train=\"x\""}).code, exit_code::kInvalidConfig);  // no output directory
  EXPECT_EQ(cli(concat(concat(base, tiny(dir_)), {"--set", "train.patch_size=36"})).code, exit_code::kInvalidConfig);
  std::ofstream(dir_ / "bad.json") << "{\"model.scale\": ";
  EXPECT_EQ(cli(concat(base, {"--config", (dir_ / "bad.json").string()})).code, exit_code::kInvalidConfig);
  std::ofstream(dir_ / "unknown.json") << R"({"preset": "desk", "train.momentum": 0.9})";
  const auto run = cli(concat(base, {"--config", (dir_ / "unknown.json").string()}));
  EXPECT_EQ(run.code, exit_code::kInvalidConfig);
  EXPECT_NE(run.err.find("train.momentum"), std::string::npos);
}

TEST_F(CliTest, ConfigDefaultsToFullPreset) {
  RunConfig c;
  EXPECT_EQ(c.preset, "full");
  EXPECT_EQ(c.model, WdnConfig::full());
  c.apply(nlohmann::json{{"model.channels", 8}, {"preset", "desk"}});  // preset first regardless of order
  EXPECT_EQ(c.model.channels, 8);
  EXPECT_EQ(c.train.patch_size, 96u);
  EXPECT_TRUE(c.model_keys_explicit());
  EXPECT_EQ(RunConfig::keys().front(), "preset");
}

TEST_F(CliTest, StagesMustBeTrainedInOrder) {
  const auto run = cli(concat({"train", "--stage", "2", "--out", (dir_ / "run").string()}, tiny(dir_)));
  EXPECT_EQ(run.code, exit_code::kMissingStage) << run.err;
}

TEST_F(CliTest, TrainResumeUpsampleAndEval) {
  const auto run_dir = dir_ / "run";
  auto first = cli(concat({"train", "--stage", "1", "--out", run_dir.string()}, tiny(dir_)));
  ASSERT_EQ(first.code, exit_code::kOk) << first.err;
  const auto after_one = read_checkpoint(run_dir);
  EXPECT_EQ(after_one.state.completed_stages, std::vector<int>{1});
  const int s1_steps = after_one.state.steps.at("s1.m0");
  EXPECT_EQ(s1_steps, 1);

  // A stage-1 checkpoint cannot upsample yet.
  write_png(test::color_scene(63, 12, 12), dir_ / "lr.png");
  EXPECT_EQ(cli({"upsample", "--in", (dir_ / "lr.png").string(), "--ckpt", run_dir.string(), "--scale", "4", "--out",
                 (dir_ / "x.png").string()})
                .code,
            exit_code::kMissingStage);

  // Resuming with a different architecture is refused.
  EXPECT_EQ(cli({"train", "--resume", run_dir.string(), "--set", "model.channels=8"}).code,
            exit_code::kCheckpointMismatch);

  auto second = cli(concat({"train", "--resume", run_dir.string(), "--stage", "all"}, tiny(dir_)));
  ASSERT_EQ(second.code, exit_code::kOk) << second.err;
  const auto done = read_checkpoint(run_dir);
  EXPECT_EQ(done.state.completed_stages, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(done.state.steps.at("s1.m0"), s1_steps);
  EXPECT_EQ(done.state.steps.at("s3"), 1);
  EXPECT_NE(second.out.find("training stage 2"), std::string::npos);
  EXPECT_EQ(second.out.find("training stage 1"), std::string::npos);

  std::ifstream log(run_dir / "train_log.jsonl");
  std::size_t rows = 0;
  for (std::string line; std::getline(log, line); ++rows) EXPECT_TRUE(nlohmann::json::parse(line).contains("job"));
  EXPECT_EQ(rows, 8u + 2u + 1u);

  // Upsampling is deterministic and handles grayscale input.
  const auto up = [&](const fs::path& in, const std::string& name) {
    return cli({"upsample", "--in", in.string(), "--ckpt", run_dir.string(), "--scale", "4", "--out",
                (dir_ / "sr" / name).string()})
        .code;
  };
  ASSERT_EQ(up(dir_ / "lr.png", "a.png"), exit_code::kOk);
  ASSERT_EQ(up(dir_ / "lr.png", "b.png"), exit_code::kOk);
  EXPECT_EQ(slurp(dir_ / "sr" / "a.png"), slurp(dir_ / "sr" / "b.png"));
  EXPECT_EQ(read_png(dir_ / "sr" / "a.png").height(), 48u);
  write_png(test::scene(64, 11, 13), dir_ / "gray.png");
  ASSERT_EQ(up(dir_ / "gray.png", "gray.png"), exit_code::kOk);
  const auto gray = read_png(dir_ / "sr" / "gray.png");
  EXPECT_EQ(gray.height(), 44u);
  EXPECT_EQ(gray.width(), 52u);
  for (std::size_t i = 0; i < gray.r.size(); ++i) {
    ASSERT_NEAR(gray.r.values[i], gray.g.values[i], 1.0 / 255 + 1e-9);
    ASSERT_NEAR(gray.b.values[i], gray.g.values[i], 1.0 / 255 + 1e-9);
  }
  EXPECT_EQ(cli({"upsample", "--in", (dir_ / "lr.png").string(), "--ckpt", run_dir.string(), "--scale", "2", "--out",
                 (dir_ / "x.png").string()})
                .code,
            exit_code::kCheckpointMismatch);
}

TEST_F(CliTest, EvalReportsAndSkips) {
  ASSERT_EQ(cli({"degrade", "--in", (dir_ / "hr").string(), "--out", (dir_ / "lr").string()}).code, 0);
  fs::create_directories(dir_ / "pred");
  ASSERT_EQ(cli({"upsample", "--in", (dir_ / "lr" / "a.png").string(), "--method", "bicubic", "--scale", "4",
                 "--out", (dir_ / "pred" / "a.png").string()})
                .code,
            0);
  const auto report = dir_ / "report.json";
  const auto run = cli({"eval", "--pred", (dir_ / "pred").string(), "--gt", (dir_ / "hr").string(), "--scale", "4",
                        "--report", report.string()});
  EXPECT_EQ(run.code, exit_code::kSkippedFiles);
  EXPECT_NE(run.err.find("b.png"), std::string::npos);
  std::ifstream f(report);
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j["images"].size(), 1u);
  EXPECT_GT(j["mean"]["psnr"].get<double>(), 15.0);

  fs::copy_file(dir_ / "hr" / "b.png", dir_ / "pred" / "b.png");
  fs::copy_file(dir_ / "hr" / "a.png", dir_ / "pred" / "a.png", fs::copy_options::overwrite_existing);
  EXPECT_EQ(cli({"eval", "--pred", (dir_ / "pred").string(), "--gt", (dir_ / "hr").string(), "--report",
                 report.string()})
                .code,
            exit_code::kOk);
  fs::create_directories(dir_ / "nothing");
  EXPECT_EQ(cli({"eval", "--pred", (dir_ / "nothing").string(), "--gt", (dir_ / "nothing").string(), "--report",
                 report.string()})
                .code,
            exit_code::kNoInput);
}

TEST_F(CliTest, CorruptCheckpointIsAnIoError) {
  fs::create_directories(dir_ / "ck");
  std::ofstream(dir_ / "ck" / kManifestFile) << "{}";
  EXPECT_EQ(cli({"upsample", "--in", (dir_ / "hr" / "a.png").string(), "--ckpt", (dir_ / "ck").string(), "--out",
                 (dir_ / "x.png").string()})
                .code,
            exit_code::kIoError);
}

}  // namespace
}  // namespace wdn
