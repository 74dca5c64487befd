#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srender/line_drawing.hpp"
#include "srender/losses.hpp"

namespace srender {

struct TrainConfig {
  int epochs_const = 100;
  int epochs_decay = 100;
  double lr0 = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  LossWeights weights;
  FeatureLayers layers;
  std::uint64_t seed = 0;
  std::string profile = "toy_64";
  int checkpoint_every = 10;
  /// Stop after this many optimizer steps in total (0 = run the full schedule).
  long max_steps = 0;
  bool augment = true;

  void validate() const;
  int total_epochs() const { return epochs_const + epochs_decay; }
};

/// Constant lr0 for the first epochs_const epochs, then linear decay to zero.
/// Epochs are 1-based.
double lr_at(int epoch, const TrainConfig& cfg);

// ---- stroke patches ------------------------------------------------------

/// Per-pixel face-region ids. Stored in mask PNGs as the gray level 0..7.
enum class Region : std::uint8_t { background, skin, hair, boundary, eye_brow, eye, clips, ear };
inline constexpr int kRegions = 8;

std::optional<StrokeLabel> stroke_label_of(Region region) noexcept;

class SemanticMask {
 public:
  SemanticMask() = default;
  SemanticMask(int rows, int cols, Region fill = Region::background);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  Region at(int r, int c) const { return static_cast<Region>(labels_[index(r, c)]); }
  void set(int r, int c, Region region) { labels_[index(r, c)] = static_cast<std::uint8_t>(region); }

  /// Gray level g (0..255) maps to region g; anything above 7 is InvalidImage.
  static SemanticMask from_gray_levels(const std::vector<std::uint8_t>& levels, int rows, int cols);

 private:
  std::size_t index(int r, int c) const;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> labels_;
};

SemanticMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const SemanticMask& mask, const std::filesystem::path& path);

struct StrokePatch {
  Image patch;
  StrokeLabel label = StrokeLabel::skin;
  int top = 0;
  int left = 0;
  /// Window center (top + size/2, left + size/2).
  double center_row() const { return top + patch.rows() / 2.0; }
  double center_col() const { return left + patch.cols() / 2.0; }
};

struct PatchExtractConfig {
  int patch_size = 64;
  int per_class = 200;
  double purity = 0.7;
};

struct PatchExtraction {
  std::vector<StrokePatch> patches;
  std::vector<StrokeLabel> empty_classes;  // no window met the purity rule
};

/// Up to per_class windows per label whose pixels carry that label at least
/// `purity` of the time, sampled without replacement.
PatchExtraction extract_stroke_patches(const Image& sketch, const SemanticMask& mask, const PatchExtractConfig& cfg,
                                       Rng& rng);

struct StrokePatchDataset {
  std::vector<StrokePatch> train;
  std::vector<StrokePatch> held_out;
};

/// Per-class split so both sides see every label.
StrokePatchDataset split_patches(std::vector<StrokePatch> patches, double held_out_fraction, Rng& rng);

struct StrokeTrainConfig {
  int epochs = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
};

struct StrokeTrainResult {
  StrokeClassifier psi;  // frozen
  double train_accuracy = 0.0;
  double held_out_accuracy = 0.0;
};

StrokeTrainResult train_stroke_classifier(const StrokePatchDataset& ds, const StrokeClassifierSpec& spec,
                                          const StrokeTrainConfig& cfg);
double stroke_accuracy(StrokeClassifier& psi, std::span<const StrokePatch> patches);

// ---- GAN training ----------------------------------------------------------

/// One (condition, target) pair after augmentation, as network tensors.
struct TrainingSample {
  Tensor z;
  Tensor y;
};

TrainingSample to_sample(const PseudoPair& pair);

/// Adversarial discriminator update on D1 and D2 (fake detached). Returns adv_d.
double discriminator_step(ModelBundle& bundle, std::span<const TrainingSample> batch, double lr);
/// Generator update on the weighted objective; D, psi and phi stay fixed.
/// With lambda_str = 0 the stroke term is not evaluated and is reported as 0.
LossBreakdown generator_step(ModelBundle& bundle, std::span<const TrainingSample> batch, const TrainConfig& cfg,
                             double lr);
/// D step then G step at lr_at(bundle.epoch + 1).
LossBreakdown train_step(ModelBundle& bundle, std::span<const PseudoPair> batch, const TrainConfig& cfg);

struct LossLogRow {
  int epoch = 0;
  long step = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

inline constexpr const char* kLossLogHeader = "epoch,step,adv_d,adv_g,fm,rec,stroke,total_g,lr";
std::string format_log_row(const LossLogRow& row);

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints or log file
  bool resume = false;
  /// Trained stroke classifier; required when lambda_str > 0.
  const StrokeClassifier* psi = nullptr;
  std::function<void(const LossLogRow&)> on_step;
};

struct TrainResult {
  ModelBundle bundle;
  std::vector<LossLogRow> log;  // rows produced by this call
  long global_step = 0;
};

/// Epochs over shuffled, augmented pairs. Writes loss_log.csv,
/// epoch_NNNN.ckpt every checkpoint_every epochs, and latest.ckpt after every
/// epoch and when max_steps stops the run.
TrainResult train(std::span<const PseudoPair> pairs, const TrainConfig& cfg, const TrainOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);

}  // namespace srender
