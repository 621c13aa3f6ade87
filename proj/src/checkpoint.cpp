#include "wdn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace wdn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in native little-endian order");

namespace {

namespace fs = std::filesystem;

struct Slot {
  std::string name;
  std::string kind;  // value, adam_m, adam_v
  const Tensor<float>* tensor;
};

std::vector<Slot> slots(const ParameterStore<float>& store) {
  std::vector<Slot> out;
  for (const auto& [name, p] : store.entries()) {
    out.push_back({name, "value", &p.node->value});
    if (p.trainable) {
      out.push_back({name, "adam_m", &p.m});
      out.push_back({name, "adam_v", &p.v});
    }
  }
  return out;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointFailure::Missing, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t checksum(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large blobs
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p), n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Loaded {
  CheckpointInfo info;
  std::string blob;
};

Loaded read_all(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path))
    throw CheckpointError(CheckpointFailure::Missing, "no " + std::string(kManifestFile) + " in '" + dir.string() + "'");
  Loaded out;
  try {
    out.info.manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointFailure::Malformed, manifest_path.string() + ": " + e.what());
  }
  const auto& m = out.info.manifest;
  const std::string format = m.value("format", std::string{});
  if (format != kCheckpointFormat)
    throw CheckpointError(CheckpointFailure::Version,
                          "format '" + format + "' is not supported (expected '" + kCheckpointFormat + "')");
  try {
    out.info.config = WdnConfig::from_json(m.at("config"));
    out.info.state = TrainingState::from_json(m.at("state"));
    out.blob = read_file(dir / m.at("blob").at("file").get<std::string>());
    const auto expected = m.at("blob").at("bytes").get<std::size_t>();
    if (out.blob.size() != expected)
      throw CheckpointError(CheckpointFailure::Truncated, "blob holds " + std::to_string(out.blob.size()) +
                                                              " bytes, manifest records " + std::to_string(expected));
    if (checksum(out.blob) != m.at("blob").at("crc32").get<std::uint32_t>())
      throw CheckpointError(CheckpointFailure::HashMismatch, "blob checksum does not match the manifest");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointFailure::Malformed, e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(CheckpointFailure::Malformed, e.what());
  }
  return out;
}

}  // namespace

std::string to_string(CheckpointFailure failure) {
  switch (failure) {
    case CheckpointFailure::Missing: return "missing";
    case CheckpointFailure::Malformed: return "malformed";
    case CheckpointFailure::Version: return "version-mismatch";
    case CheckpointFailure::ShapeMismatch: return "shape-mismatch";
    case CheckpointFailure::Truncated: return "truncated";
    case CheckpointFailure::HashMismatch: return "hash-mismatch";
  }
  return "unknown";
}

void save_checkpoint(const fs::path& dir, const WdnConfig& config, const ParameterStore<float>& store,
                     const TrainingState& state) {
  fs::create_directories(dir);
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const Slot& s : slots(store)) {
    const Parameter<float>& p = store.at(s.name);
    nlohmann::json entry = {{"name", s.name},      {"kind", s.kind},
                            {"shape", s.tensor->shape()}, {"dtype", "f32"},
                            {"offset", blob.size()}, {"group", p.group}};
    if (s.kind == "value") entry["trainable"] = p.trainable;
    if (s.kind == "adam_m") entry["step"] = p.step;
    tensors.push_back(std::move(entry));
    blob.append(reinterpret_cast<const char*>(s.tensor->raw()), s.tensor->size() * sizeof(float));
  }
  const nlohmann::json manifest = {
      {"format", kCheckpointFormat},
      {"config", config.to_json()},
      {"state", state.to_json()},
      {"stages", state.completed_stages},
      {"blob", {{"file", kBlobFile}, {"bytes", blob.size()}, {"crc32", checksum(blob)}}},
      {"tensors", tensors},
  };
  write_atomically(dir / kBlobFile, blob);
  write_atomically(dir / kManifestFile, manifest.dump(2) + "\n");
}

CheckpointInfo read_checkpoint(const fs::path& dir) { return read_all(dir).info; }

CheckpointInfo load_checkpoint(const fs::path& dir, ParameterStore<float>& store) {
  Loaded loaded = read_all(dir);
  std::map<std::pair<std::string, std::string>, const nlohmann::json*> index;
  for (const auto& t : loaded.info.manifest.at("tensors"))
    index[{t.at("name").get<std::string>(), t.at("kind").get<std::string>()}] = &t;

  // Validate everything before modifying the store.
  const std::vector<Slot> wanted = slots(store);
  for (const Slot& s : wanted) {
    auto it = index.find({s.name, s.kind});
    if (it == index.end())
      throw CheckpointError(CheckpointFailure::ShapeMismatch, "tensor '" + s.name + "' (" + s.kind + ") is absent");
    const Shape shape = it->second->at("shape").get<Shape>();
    if (shape != s.tensor->shape())
      throw CheckpointError(CheckpointFailure::ShapeMismatch, "tensor '" + s.name + "' has shape " + shape_str(shape) +
                                                                  " in the checkpoint but " +
                                                                  shape_str(s.tensor->shape()) + " in the model");
    const auto offset = it->second->at("offset").get<std::size_t>();
    if (offset + shape_size(shape) * sizeof(float) > loaded.blob.size())
      throw CheckpointError(CheckpointFailure::Truncated, "tensor '" + s.name + "' extends past the blob");
  }
  if (wanted.size() != index.size())
    throw CheckpointError(CheckpointFailure::ShapeMismatch,
                          "checkpoint holds " + std::to_string(index.size()) + " tensors, model expects " +
                              std::to_string(wanted.size()));

  for (const Slot& s : wanted) {
    const nlohmann::json& entry = *index.at({s.name, s.kind});
    Parameter<float>& p = store.at(s.name);
    Tensor<float>& target = s.kind == "value" ? p.node->value : (s.kind == "adam_m" ? p.m : p.v);
    std::memcpy(target.raw(), loaded.blob.data() + entry.at("offset").get<std::size_t>(), target.size() * sizeof(float));
    if (s.kind == "adam_m") p.step = entry.at("step").get<std::int64_t>();
  }
  return loaded.info;
}

}  // namespace wdn
