#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "srender/image.hpp"

namespace srender {

enum class OperatorKind { dog_default, external };

/// Maps photos or sketches into the shared line-drawing domain.
///
/// The default is a difference-of-Gaussians edge operator: blur at sigma and
/// k*sigma, take D = G_sigma - G_{k sigma}, and darken where D < -threshold with
/// out = 1 + tanh((D + threshold) / threshold). Anything else (for instance a
/// learned style-transfer model) plugs in as an external callable.
class LineDrawingOperator {
 public:
  using Fn = std::function<Image(const Image&)>;

  static LineDrawingOperator dog(double sigma = 1.0, double k = 1.6, double threshold = 0.005);
  static LineDrawingOperator external(std::string name, Fn fn, std::map<std::string, double> params = {});
  /// Builds an operator by CLI name; only "dog" is built in.
  static LineDrawingOperator from_name(const std::string& name, const std::map<std::string, double>& params);

  OperatorKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  const std::map<std::string, double>& params() const noexcept { return params_; }
  double param(const std::string& key) const;

  /// Kind plus a hash of the parameters; recorded in pair manifests so stale
  /// line drawings can be detected.
  std::string fingerprint() const;

  Image operator()(const Image& image) const;

 private:
  OperatorKind kind_ = OperatorKind::dog_default;
  std::string name_;
  std::map<std::string, double> params_;
  Fn fn_;
};

Image line_draw(const LineDrawingOperator& op, const Image& image);

/// Separable Gaussian blur, border replicated, radius ceil(3 sigma).
Tensor gaussian_blur(const Tensor& gray, double sigma);

struct PseudoPair {
  Image z;  // line drawing
  Image y;  // sketch
  std::string source_id;
  std::string operator_fingerprint;
};

std::vector<PseudoPair> build_pseudo_pairs(const LineDrawingOperator& op, std::span<const Image> sketches,
                                           std::span<const std::string> source_ids = {});

/// One line of the JSON-lines pair manifest.
struct PairRecord {
  std::string source_id;
  std::string sketch_path;
  std::string line_path;
  std::string operator_fingerprint;
};

void write_pair_manifest(const std::filesystem::path& path, std::span<const PairRecord> records);
std::vector<PairRecord> read_pair_manifest(const std::filesystem::path& path);

/// Loads every pair of a manifest; relative paths resolve against the manifest
/// directory. When `expected_fingerprint` is non-empty every record must match it.
std::vector<PseudoPair> load_pairs(const std::filesystem::path& manifest, const std::string& expected_fingerprint = {});

/// Hex CRC-32 of a byte string.
std::string crc32_hex(std::string_view bytes);

}  // namespace srender
