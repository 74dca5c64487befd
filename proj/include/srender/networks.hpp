#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "srender/image.hpp"
#include "srender/layers.hpp"
#include "srender/optim.hpp"

namespace srender {

/// Encoder / residual / decoder generator: one stride-1 entry conv, n_down
/// stride-2 convs, n_resblocks residual blocks, n_down stride-2 transposed
/// convs and a stride-1 transposed output layer. Hidden layers use instance
/// norm + ReLU; the output is tanh remapped to [0,1].
struct GeneratorSpec {
  int in_channels = 1;
  int out_channels = 1;
  int base_channels = 64;
  int n_down = 4;
  int n_resblocks = 9;
  int channel_cap = 512;
  int entry_kernel = 7;
  int down_kernel = 3;
  int out_kernel = 7;

  int conv_layer_count() const { return 1 + n_down; }
  int transposed_layer_count() const { return n_down + 1; }
  /// Input sides must be a multiple of this.
  int size_divisor() const { return 1 << n_down; }
  int channels_at(int depth) const;
  nlohmann::json to_json() const;
};

/// Five-layer conditional patch discriminator over concat(condition, image).
/// Instance norm on layers 2-4, leaky ReLU on layers 1-4, sigmoid output.
struct DiscriminatorSpec {
  static constexpr int kLayers = 5;
  int in_channels = 2;
  int base_channels = 64;
  int channel_cap = 512;
  double slope = 0.2;
  std::array<int, kLayers> kernels{4, 4, 4, 4, 3};
  std::array<int, kLayers> strides{2, 2, 2, 2, 1};
  std::array<int, kLayers> pads{1, 1, 1, 1, 0};

  /// Spatial side after each layer for a square input of side `in`.
  std::array<int, kLayers> output_sides(int in) const;
  nlohmann::json to_json() const;
};

enum class StrokeLabel { skin, hair, boundary, eye_brow, eye, clips, ear };
inline constexpr int kStrokeClasses = 7;
std::string_view stroke_label_name(StrokeLabel label) noexcept;
StrokeLabel stroke_label_from_name(std::string_view name);

/// Input conv, densely connected block, output conv, global average pooling
/// and a 7-way linear head.
struct StrokeClassifierSpec {
  int patch_size = 64;
  int stem_channels = 32;
  int dense_layers = 4;
  int growth = 16;
  int out_channels = 64;
  int kernel = 3;

  int dense_out_channels() const { return stem_channels + dense_layers * growth; }
  nlohmann::json to_json() const;
};

/// Fixed-weight feature extractor used by the reconstruction loss: four
/// conv3x3 + ReLU layers at strides 1, 2, 2, 2. The first layer holds
/// hand-set tone and edge filters; later layers are He-scaled normals drawn
/// from `seed`.
struct PerceptualSpec {
  std::array<int, 4> channels{8, 16, 32, 32};
  std::uint64_t seed = 0x5eedf00d;
  nlohmann::json to_json() const;
};

struct Profile {
  std::string name;
  int image_size = 0;
  AugmentConfig augment;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  StrokeClassifierSpec stroke;
  PerceptualSpec perceptual;
};

Profile paper_512();
Profile toy_64();
/// 8x8 images and networks of at most ~200 parameters, for gradient checks.
Profile micro_8();
Profile profile_by_name(const std::string& name);

std::string spec_fingerprint(const nlohmann::json& spec);

struct ResidualBlock {
  Conv2d first;
  Conv2d second;
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorSpec& spec, Rng& rng, const std::string& name = "G");

  /// z: (in_channels, H, W) with H, W multiples of size_divisor().
  Var forward(Tape& tape, Var z, bool track);
  Tensor forward(const Tensor& z);

  /// One residual block applied to a feature map; exposed for testing.
  Var residual_block(Tape& tape, int index, Var x, bool track);

  const GeneratorSpec& spec() const noexcept { return spec_; }
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;

  std::vector<Conv2d>& encoder() noexcept { return encoder_; }
  std::vector<ResidualBlock>& residual_blocks() noexcept { return blocks_; }
  std::vector<ConvTranspose2d>& decoder() noexcept { return decoder_; }

 private:
  GeneratorSpec spec_;
  std::vector<Conv2d> encoder_;          // entry + downsampling
  std::vector<ResidualBlock> blocks_;
  std::vector<ConvTranspose2d> decoder_;  // upsampling + output
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorSpec& spec, Rng& rng, const std::string& name);

  /// Activations of all five layers on concat(condition, image); the last is
  /// the (0,1) score grid.
  std::vector<Var> forward(Tape& tape, Var condition, Var image, bool track);

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  std::vector<Conv2d>& layers() noexcept { return layers_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<Conv2d> layers_;
};

struct StrokeActivations {
  Var dense_out;   // dense block output
  Var final_conv;  // output conv after ReLU
  Var logits;
};

class StrokeClassifier {
 public:
  StrokeClassifier() = default;
  StrokeClassifier(const StrokeClassifierSpec& spec, Rng& rng, const std::string& name = "psi");

  StrokeActivations forward(Tape& tape, Var patch, bool track);
  /// Class probabilities for one patch_size x patch_size grayscale patch.
  std::array<double, kStrokeClasses> probabilities(const Image& patch);

  const StrokeClassifierSpec& spec() const noexcept { return spec_; }
  std::vector<Parameter*> parameters();

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }
  void unfreeze() noexcept { frozen_ = false; }

 private:
  StrokeClassifierSpec spec_;
  Conv2d stem_;
  std::vector<Conv2d> dense_;
  Conv2d out_;
  Linear head_;
  bool frozen_ = false;
};

class PerceptualNet {
 public:
  PerceptualNet() = default;
  explicit PerceptualNet(const PerceptualSpec& spec);

  /// Activations at strides 1, 2, 4, 8. Parameters are never tracked.
  std::vector<Var> forward(Tape& tape, Var image) const;

  const PerceptualSpec& spec() const noexcept { return spec_; }
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> mutable_parameters();

 private:
  PerceptualSpec spec_;
  std::vector<Conv2d> layers_;
};

/// Everything a training run owns: the four networks and both optimizers.
struct ModelBundle {
  Profile profile;
  Generator g;
  Discriminator d1;
  Discriminator d2;
  StrokeClassifier psi;
  PerceptualNet phi;
  Adam g_opt;
  Adam d_opt;  // D1 and D2 jointly
  int epoch = 0;

  static ModelBundle create(const Profile& profile, std::uint64_t seed, double beta1 = 0.5, double beta2 = 0.999);

  std::vector<Parameter*> discriminator_parameters();
  nlohmann::json fingerprints() const;
};

}  // namespace srender
