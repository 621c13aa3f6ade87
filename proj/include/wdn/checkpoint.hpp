#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "wdn/error.hpp"
#include "wdn/model.hpp"
#include "wdn/parameters.hpp"
#include "wdn/training.hpp"

namespace wdn {

inline constexpr const char* kCheckpointFormat = "wdn-checkpoint/1";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kBlobFile = "tensors.bin";

enum class CheckpointFailure {
  Missing,        ///< directory or manifest absent
  Malformed,      ///< manifest is not valid JSON or lacks fields
  Version,        ///< unknown format string
  ShapeMismatch,  ///< a tensor is absent or has a different shape
  Truncated,      ///< blob shorter or longer than the manifest says
  HashMismatch,   ///< blob checksum differs
};

std::string to_string(CheckpointFailure failure);

class CheckpointError : public IoError {
 public:
  CheckpointError(CheckpointFailure failure, const std::string& message)
      : IoError("checkpoint " + to_string(failure) + ": " + message), failure_(failure) {}
  CheckpointFailure failure() const { return failure_; }

 private:
  CheckpointFailure failure_;
};

struct CheckpointInfo {
  WdnConfig config;
  TrainingState state;
  nlohmann::json manifest;
};

/// Writes manifest.json and tensors.bin (little-endian f32: every parameter
/// value followed by its Adam moments, in name order). Each file is written
/// to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const WdnConfig& config, const ParameterStore<float>& store,
                     const TrainingState& state);

/// Parses and validates the manifest and blob integrity without touching a model.
CheckpointInfo read_checkpoint(const std::filesystem::path& dir);

/// Restores values, Adam moments and step counters into `store`, whose
/// parameter set and shapes must match the checkpoint exactly.
CheckpointInfo load_checkpoint(const std::filesystem::path& dir, ParameterStore<float>& store);

}  // namespace wdn
