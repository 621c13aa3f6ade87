#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "wdn/error.hpp"
#include "wdn/model.hpp"
#include "wdn/training.hpp"

namespace wdn {

/// Process exit codes, one per failure class.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kGradcheckFailed = 1;
inline constexpr int kNoInput = 2;           ///< empty input directory, or every input failed
inline constexpr int kMissingStage = 3;      ///< a prerequisite stage has not been trained
inline constexpr int kInvalidConfig = 4;     ///< unknown key or bad value in the run configuration
inline constexpr int kCheckpointMismatch = 5;  ///< scale or architecture differs from the checkpoint
inline constexpr int kSkippedFiles = 6;      ///< eval could not pair some files
inline constexpr int kInvalidInput = 7;      ///< input data violates a precondition (size, divisibility)
inline constexpr int kIoError = 8;           ///< unreadable/unwritable files, corrupt checkpoints
inline constexpr int kUsage = 64;            ///< malformed command line
}  // namespace exit_code

/// An unknown key or an unusable value in a run configuration.
class ConfigError : public ContractError {
 public:
  ConfigError(std::string key, const std::string& message)
      : ContractError("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Everything a command needs, resolved from a flat JSON document with dotted
/// keys ("model.channels", "train.lr", ...) followed by command-line overrides.
struct RunConfig {
  std::string preset = "full";
  WdnConfig model = WdnConfig::full();
  TrainConfig train = TrainConfig::full();
  std::filesystem::path train_dir;
  std::filesystem::path validation_dir;
  std::filesystem::path output_dir;
  /// Keys set explicitly (by file or override), in dotted form.
  std::set<std::string> explicit_keys;

  /// Every accepted key, in documentation order.
  static const std::vector<std::string>& keys();

  /// Sets one key. A "preset" resets model and train sections to that preset.
  void apply(const std::string& key, const nlohmann::json& value);
  /// Applies a flat object; "preset" is applied before every other key.
  void apply(const nlohmann::json& flat);
  /// Parses "key=value"; the value is read as JSON when possible, otherwise as a string.
  void apply_override(const std::string& assignment);

  static RunConfig from_file(const std::filesystem::path& path);

  bool model_keys_explicit() const;
  nlohmann::json to_json() const;
};

/// Entry point of the `wdn` tool. Output and diagnostics go to the given streams.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// PNG files of a directory, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace wdn
