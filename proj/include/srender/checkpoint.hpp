#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "srender/networks.hpp"

namespace srender {

inline constexpr int kOptimizerStateVersion = 1;

/// Single-file archive: 8-byte magic, u64 header length, JSON header, then
/// raw little-endian doubles for every tensor listed in the header.
struct Archive {
  nlohmann::json header;
  std::map<std::string, Tensor> tensors;
};

void write_archive(const std::filesystem::path& path, nlohmann::json header,
                   const std::vector<std::pair<std::string, const Tensor*>>& tensors);
/// Throws ChecksumMismatch on a bad magic, truncated file or payload CRC mismatch.
Archive read_archive(const std::filesystem::path& path);

struct CheckpointInfo {
  nlohmann::json fingerprints;
  int epoch = 0;            // completed epochs
  long step_in_epoch = 0;   // steps already taken in epoch + 1
  long global_step = 0;
};

/// Every ModelBundle parameter plus both optimizers' state.
void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle, long global_step,
                     long step_in_epoch = 0);
/// Restores into a bundle built from the same profile. FingerprintMismatch if
/// the stored architecture differs.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, ModelBundle& bundle);
/// Builds a bundle for the profile recorded in the checkpoint and restores it.
ModelBundle load_bundle(const std::filesystem::path& path);

void save_stroke_classifier(const std::filesystem::path& path, const StrokeClassifier& psi,
                            const nlohmann::json& metrics = nlohmann::json::object());
/// The loaded classifier is frozen.
StrokeClassifier load_stroke_classifier(const std::filesystem::path& path);

}  // namespace srender
