#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "srender/training.hpp"

namespace srender {

/// Flat TOML-style configuration: one `key = value` per line, `#` comments,
/// values written as TOML scalars or arrays. Absent keys keep the TrainConfig
/// defaults; unknown keys raise UnknownKey, malformed lines ParseError.
///
/// Keys: epochs_const, epochs_decay, lr0, beta1, beta2, batch_size,
/// lambda_fm, lambda_rec, lambda_str, perceptual_layers, stroke_layers, seed,
/// profile, checkpoint_every, max_steps, augment.
TrainConfig parse_config(std::string_view text, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const TrainConfig& cfg);
/// Inverse of config_to_json; same key rules as parse_config.
TrainConfig config_from_json(const nlohmann::json& j);
/// Renders a file that parse_config reads back to an equal config.
std::string config_to_text(const TrainConfig& cfg);

/// Provenance of one command invocation.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json data = nlohmann::json::object();  // input name -> content hash
  std::string operator_fingerprint;
  std::uint64_t seed = 0;
  std::string code_version = SRENDER_VERSION;
  std::string started_at;  // UTC, ISO 8601

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  /// Everything except the timestamp.
  bool same_run(const RunManifest& other) const;
};

std::string utc_timestamp();

/// Writes run_manifest_<command>.json in dir (run_manifest_<command>.<n>.json
/// when that name is taken) and marks it read-only. Returns the path.
std::filesystem::path write_run_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
RunManifest read_run_manifest(const std::filesystem::path& path);

/// CRC-32 of a file's bytes, or of every regular file under a directory
/// (relative path and contents, in sorted order).
std::string content_hash(const std::filesystem::path& path);

}  // namespace srender
