#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srender/line_drawing.hpp"
#include "srender/networks.hpp"
#include "srender/training.hpp"

namespace srender {

struct InferResult {
  Image line;    // F(x)
  Image sketch;  // G(F(x))
};

/// x must be image_size x image_size for the bundle's profile. Feeding a real
/// sketch gives its reconstruction G(F(y)).
InferResult infer(ModelBundle& bundle, const LineDrawingOperator& op, const Image& x);

struct PatchSampleConfig {
  int n_patches = 10000;
  int patch_size = 256;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PatchSampleConfig from_json(const nlohmann::json& j);
};

struct PatchLocation {
  int image = 0;
  int row = 0;
  int col = 0;
};

/// Uniform over every (image, offset) pair at which a full patch fits.
std::vector<PatchLocation> sample_patch_locations(std::span<const Image> images, const PatchSampleConfig& cfg);
std::vector<Image> sample_patches(std::span<const Image> images, const PatchSampleConfig& cfg);

enum class EmbedderKind { bundled_fixed, external };

/// Deterministic, frozen map from an image to a feature vector.
///
/// The bundled default is three 3x3 stride-2 convolutions (1 -> 8 -> 16 -> 32
/// channels, ReLU after each) with fixed seeded weights, then global average
/// pooling: 32 features. Values are only comparable between runs that share
/// the embedder fingerprint.
class FeatureEmbedder {
 public:
  using Fn = std::function<std::vector<double>(const Image&)>;

  static FeatureEmbedder bundled();
  static FeatureEmbedder external(std::string name, int output_dim, Fn fn);

  EmbedderKind kind() const noexcept { return kind_; }
  int output_dim() const noexcept { return output_dim_; }
  std::string fingerprint() const;

  std::vector<double> operator()(const Image& image) const;
  std::vector<std::vector<double>> embed_all(std::span<const Image> images) const;

 private:
  EmbedderKind kind_ = EmbedderKind::bundled_fixed;
  std::string name_;
  int output_dim_ = 0;
  Fn fn_;
};

inline constexpr double kFidJitter = 1e-6;

/// Frechet distance between Gaussian fits (unbiased covariance):
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The cross term is
/// Tr sqrt(R S_b R) with R = S_a^(1/2), computed by symmetric
/// eigendecomposition with negative eigenvalues clamped to zero. Both
/// covariances get kFidJitter on the diagonal.
double fid(std::span<const std::vector<double>> feats_a, std::span<const std::vector<double>> feats_b);

struct ScootConfig {
  int grid = 4;
  int orientation_bins = 8;
  double c1 = 1e-4;
  double c2 = 9e-4;
};

/// Simplified structure/texture similarity in [0,1].
///
/// Both images (as grayscale) are cut into a grid x grid block layout. Per
/// block we take the mean tone m, the tone standard deviation s and a
/// gradient-orientation histogram h (unsigned orientation, magnitude weighted,
/// normalized to sum 1; all zeros for a flat block). The block score is
///   (2 m_a m_b + c1) / (m_a^2 + m_b^2 + c1)
/// * (2 s_a s_b + c2) / (s_a^2 + s_b^2 + c2)
/// * (1 - sum|h_a - h_b| / 2)
/// and the result is the mean block score. scoot(a, a) is exactly 1.
double scoot(const Image& a, const Image& b, const ScootConfig& cfg = {});

struct LabeledImage {
  Image image;
  std::string id;
};

/// PCA to n - c dimensions, LDA to c - 1, then 1-nearest-neighbour in the LDA
/// space. Returns the fraction of probes whose nearest gallery image has the
/// same id. With one gallery image per identity LDA is skipped and matching
/// happens in the PCA space.
double fisherface_acc(std::span<const LabeledImage> gallery, std::span<const LabeledImage> probes);

/// Identity part of a sample id: everything before the first '_'.
std::string identity_of(const std::string& sample_id);

struct MetricsReport {
  double fid = 0.0;
  std::optional<double> scoot;
  std::optional<double> acc;
  PatchSampleConfig sample_config;
  std::string embedder_fingerprint;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

/// Throws ParseError describing the first violation.
void validate_metrics_report(const nlohmann::json& j);

/// FID over patches sampled from both sets; scoot as the mean over aligned
/// (real, fake) pairs; acc with the real sketches as gallery and the fakes as
/// probes, ids reduced with identity_of. Metrics whose preconditions fail
/// (unequal counts, fewer than two identities) are left empty.
MetricsReport evaluate(std::span<const LabeledImage> real, std::span<const LabeledImage> fake,
                       const PatchSampleConfig& cfg, const FeatureEmbedder& embedder);

enum class AblationVariant { full, no_stroke };
std::string_view variant_name(AblationVariant v) noexcept;

struct AblationOptions {
  std::vector<AblationVariant> variants{AblationVariant::full, AblationVariant::no_stroke};
  double held_out_fraction = 0.2;
  PatchSampleConfig sample{1000, 32, 0};
  const StrokeClassifier* psi = nullptr;
  std::function<void(AblationVariant, const LossLogRow&)> on_step;
};

struct AblationRow {
  AblationVariant variant = AblationVariant::full;
  nlohmann::json config;
  std::string data_fingerprint;
  MetricsReport metrics;
};

/// Deterministic train/held-out split of the pairs (by seed), one training run
/// per variant with identical settings except lambda_str = 0 for no_stroke,
/// then metrics on the held-out reconstructions G(z) against y (both resized
/// to the profile's image size when needed).
std::vector<AblationRow> run_ablation(std::span<const PseudoPair> pairs, const TrainConfig& cfg,
                                      const AblationOptions& options = {});

nlohmann::json ablation_table(std::span<const AblationRow> rows);

/// CRC over ids and pixel bytes of every pair, in order.
std::string pairs_fingerprint(std::span<const PseudoPair> pairs);

}  // namespace srender
