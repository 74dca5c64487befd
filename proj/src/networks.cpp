#include "srender/networks.hpp"

#include <cmath>

#include "srender/error.hpp"
#include "srender/line_drawing.hpp"

namespace srender {

namespace {

constexpr double kInitStd = 0.02;

template <typename Layer>
void collect(std::vector<Parameter*>& out, Layer& layer) {
  out.push_back(&layer.weight);
  out.push_back(&layer.bias);
}

std::size_t count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace

int GeneratorSpec::channels_at(int depth) const {
  long c = base_channels;
  for (int i = 0; i < depth; ++i) c = std::min<long>(c * 2, channel_cap);
  return static_cast<int>(c);
}

nlohmann::json GeneratorSpec::to_json() const {
  return {{"in_channels", in_channels},   {"out_channels", out_channels}, {"base_channels", base_channels},
          {"n_down", n_down},             {"n_resblocks", n_resblocks},   {"channel_cap", channel_cap},
          {"entry_kernel", entry_kernel}, {"down_kernel", down_kernel},   {"out_kernel", out_kernel}};
}

std::array<int, DiscriminatorSpec::kLayers> DiscriminatorSpec::output_sides(int in) const {
  std::array<int, kLayers> sides{};
  int s = in;
  for (int i = 0; i < kLayers; ++i) {
    s = conv_output_size(s, kernels[static_cast<std::size_t>(i)], strides[static_cast<std::size_t>(i)],
                         pads[static_cast<std::size_t>(i)]);
    sides[static_cast<std::size_t>(i)] = s;
  }
  return sides;
}

nlohmann::json DiscriminatorSpec::to_json() const {
  return {{"in_channels", in_channels}, {"base_channels", base_channels}, {"channel_cap", channel_cap},
          {"slope", slope},             {"kernels", kernels},            {"strides", strides},
          {"pads", pads}};
}

nlohmann::json StrokeClassifierSpec::to_json() const {
  return {{"patch_size", patch_size}, {"stem_channels", stem_channels}, {"dense_layers", dense_layers},
          {"growth", growth},         {"out_channels", out_channels},   {"kernel", kernel}};
}

nlohmann::json PerceptualSpec::to_json() const { return {{"channels", channels}, {"seed", seed}}; }

std::string_view stroke_label_name(StrokeLabel label) noexcept {
  switch (label) {
    case StrokeLabel::skin: return "skin";
    case StrokeLabel::hair: return "hair";
    case StrokeLabel::boundary: return "boundary";
    case StrokeLabel::eye_brow: return "eye_brow";
    case StrokeLabel::eye: return "eye";
    case StrokeLabel::clips: return "clips";
    case StrokeLabel::ear: return "ear";
  }
  return "unknown";
}

StrokeLabel stroke_label_from_name(std::string_view name) {
  for (int i = 0; i < kStrokeClasses; ++i) {
    const auto label = static_cast<StrokeLabel>(i);
    if (stroke_label_name(label) == name) return label;
  }
  throw Error(Errc::ParseError, "unknown stroke label '" + std::string(name) + "'");
}

Profile paper_512() {
  Profile p;
  p.name = "paper_512";
  p.image_size = 512;
  p.augment = AugmentConfig{542, 512, 0.5, 0};
  return p;
}

Profile toy_64() {
  Profile p;
  p.name = "toy_64";
  p.image_size = 64;
  p.augment = AugmentConfig{68, 64, 0.5, 0};
  p.generator.base_channels = 16;
  p.generator.channel_cap = 128;
  p.discriminator.base_channels = 16;
  p.discriminator.channel_cap = 128;
  p.discriminator.kernels = {4, 4, 4, 4, 4};
  p.discriminator.strides = {2, 2, 2, 1, 1};
  p.discriminator.pads = {1, 1, 1, 1, 1};
  p.stroke = StrokeClassifierSpec{32, 8, 4, 8, 16, 3};
  return p;
}

Profile micro_8() {
  Profile p;
  p.name = "micro_8";
  p.image_size = 8;
  p.augment = AugmentConfig{8, 8, 0.5, 0};
  p.generator = GeneratorSpec{1, 1, 2, 1, 1, 2, 3, 3, 3};
  p.discriminator.base_channels = 2;
  p.discriminator.channel_cap = 2;
  p.discriminator.kernels = {3, 3, 3, 3, 3};
  p.discriminator.strides = {2, 1, 1, 1, 1};
  p.discriminator.pads = {1, 1, 1, 1, 1};
  p.stroke = StrokeClassifierSpec{8, 2, 2, 1, 2, 3};
  p.perceptual.channels = {4, 4, 4, 4};
  return p;
}

Profile profile_by_name(const std::string& name) {
  if (name == "paper_512") return paper_512();
  if (name == "toy_64") return toy_64();
  if (name == "micro_8") return micro_8();
  throw Error(Errc::BadConfig, "unknown profile '" + name + "'");
}

std::string spec_fingerprint(const nlohmann::json& spec) { return crc32_hex(spec.dump()); }

Generator::Generator(const GeneratorSpec& spec, Rng& rng, const std::string& name) : spec_(spec) {
  if (spec.n_down < 0 || spec.n_resblocks < 0 || spec.base_channels <= 0) {
    throw Error(Errc::BadConfig, "invalid generator spec");
  }
  encoder_.emplace_back(name + ".entry", spec.in_channels, spec.channels_at(0), spec.entry_kernel, 1,
                        spec.entry_kernel / 2, rng, kInitStd);
  for (int i = 0; i < spec.n_down; ++i) {
    encoder_.emplace_back(name + ".down" + std::to_string(i), spec.channels_at(i), spec.channels_at(i + 1),
                          spec.down_kernel, 2, spec.down_kernel / 2, rng, kInitStd);
  }
  const int width = spec.channels_at(spec.n_down);
  for (int i = 0; i < spec.n_resblocks; ++i) {
    const std::string prefix = name + ".res" + std::to_string(i);
    blocks_.push_back(ResidualBlock{Conv2d(prefix + ".a", width, width, 3, 1, 1, rng, kInitStd),
                                    Conv2d(prefix + ".b", width, width, 3, 1, 1, rng, kInitStd)});
  }
  for (int i = spec.n_down; i > 0; --i) {
    decoder_.emplace_back(name + ".up" + std::to_string(spec.n_down - i), spec.channels_at(i),
                          spec.channels_at(i - 1), spec.down_kernel, 2, spec.down_kernel / 2, 1, rng, kInitStd);
  }
  decoder_.emplace_back(name + ".out", spec.channels_at(0), spec.out_channels, spec.out_kernel, 1,
                        spec.out_kernel / 2, 0, rng, kInitStd);
}

Var Generator::residual_block(Tape& tape, int index, Var x, bool track) {
  ResidualBlock& b = blocks_.at(static_cast<std::size_t>(index));
  Var h = relu(instance_norm(b.first(tape, x, track)));
  h = instance_norm(b.second(tape, h, track));
  return add(x, h);
}

Var Generator::forward(Tape& tape, Var z, bool track) {
  const Tensor& in = z.value();
  const int div = spec_.size_divisor();
  if (in.rank() != 3 || in.channels() != spec_.in_channels || in.rows() % div || in.cols() % div ||
      in.rows() == 0 || in.cols() == 0) {
    throw Error(Errc::BadShape, "generator input " + in.shape_string() + " must have sides divisible by " +
                                    std::to_string(div));
  }
  Var h = z;
  for (Conv2d& conv : encoder_) h = relu(instance_norm(conv(tape, h, track)));
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) h = residual_block(tape, i, h, track);
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) h = relu(instance_norm(decoder_[i](tape, h, track)));
  h = tanh(decoder_.back()(tape, h, track));
  return affine(h, 0.5, 0.5);
}

Tensor Generator::forward(const Tensor& z) {
  Tape tape;
  return forward(tape, tape.constant_ref(z), false).value();
}

std::vector<Parameter*> Generator::parameters() {
  std::vector<Parameter*> out;
  for (Conv2d& c : encoder_) collect(out, c);
  for (ResidualBlock& b : blocks_) {
    collect(out, b.first);
    collect(out, b.second);
  }
  for (ConvTranspose2d& c : decoder_) collect(out, c);
  return out;
}

std::size_t Generator::parameter_count() const { return count(const_cast<Generator*>(this)->parameters()); }

Discriminator::Discriminator(const DiscriminatorSpec& spec, Rng& rng, const std::string& name) : spec_(spec) {
  int in = spec.in_channels;
  int width = spec.base_channels;
  for (int i = 0; i < DiscriminatorSpec::kLayers; ++i) {
    const bool last = i + 1 == DiscriminatorSpec::kLayers;
    const int out = last ? 1 : width;
    const auto u = static_cast<std::size_t>(i);
    layers_.emplace_back(name + ".conv" + std::to_string(i), in, out, spec.kernels[u], spec.strides[u],
                         spec.pads[u], rng, kInitStd);
    in = out;
    width = std::min(width * 2, spec.channel_cap);
  }
}

std::vector<Var> Discriminator::forward(Tape& tape, Var condition, Var image, bool track) {
  const Tensor& c = condition.value();
  const Tensor& x = image.value();
  if (c.rank() != 3 || x.rank() != 3 || c.rows() != x.rows() || c.cols() != x.cols()) {
    throw Error(Errc::ShapeMismatch, "discriminator condition " + c.shape_string() + " vs image " + x.shape_string());
  }
  if (c.channels() + x.channels() != spec_.in_channels) {
    throw Error(Errc::ShapeMismatch, "discriminator expects " + std::to_string(spec_.in_channels) + " channels");
  }
  std::vector<Var> acts;
  Var h = concat_channels(condition, image);
  for (int i = 0; i < DiscriminatorSpec::kLayers; ++i) {
    h = layers_[static_cast<std::size_t>(i)](tape, h, track);
    if (i + 1 == DiscriminatorSpec::kLayers) {
      h = sigmoid(h);
    } else {
      if (i > 0) h = instance_norm(h);
      h = leaky_relu(h, spec_.slope);
    }
    acts.push_back(h);
  }
  return acts;
}

std::vector<Parameter*> Discriminator::parameters() {
  std::vector<Parameter*> out;
  for (Conv2d& c : layers_) collect(out, c);
  return out;
}

std::size_t Discriminator::parameter_count() const { return count(const_cast<Discriminator*>(this)->parameters()); }

StrokeClassifier::StrokeClassifier(const StrokeClassifierSpec& spec, Rng& rng, const std::string& name)
    : spec_(spec) {
  const int pad = spec.kernel / 2;
  stem_ = Conv2d(name + ".stem", 1, spec.stem_channels, spec.kernel, 1, pad, rng, kInitStd);
  int width = spec.stem_channels;
  for (int i = 0; i < spec.dense_layers; ++i) {
    dense_.emplace_back(name + ".dense" + std::to_string(i), width, spec.growth, spec.kernel, 1, pad, rng, kInitStd);
    width += spec.growth;
  }
  out_ = Conv2d(name + ".out", width, spec.out_channels, 1, 1, 0, rng, kInitStd);
  head_ = Linear(name + ".head", spec.out_channels, kStrokeClasses, rng, kInitStd);
}

StrokeActivations StrokeClassifier::forward(Tape& tape, Var patch, bool track) {
  const Tensor& p = patch.value();
  if (p.rank() != 3 || p.channels() != 1 || p.rows() != spec_.patch_size || p.cols() != spec_.patch_size) {
    throw Error(Errc::BadShape, "stroke classifier expects a 1x" + std::to_string(spec_.patch_size) + "x" +
                                    std::to_string(spec_.patch_size) + " patch, got " + p.shape_string());
  }
  Var features = stem_(tape, patch, track);
  for (Conv2d& layer : dense_) {
    Var grown = layer(tape, relu(instance_norm(features)), track);
    features = concat_channels(features, grown);
  }
  Var final_conv = relu(out_(tape, features, track));
  Var logits = head_(tape, global_avg_pool(final_conv), track);
  return StrokeActivations{features, final_conv, logits};
}

std::array<double, kStrokeClasses> StrokeClassifier::probabilities(const Image& patch) {
  if (patch.channels() != 1) throw Error(Errc::BadShape, "stroke classifier expects a grayscale patch");
  Tape tape;
  const Tensor p = softmax(forward(tape, tape.constant_ref(patch.pixels()), false).logits.value());
  std::array<double, kStrokeClasses> out{};
  for (int i = 0; i < kStrokeClasses; ++i) out[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)];
  return out;
}

std::vector<Parameter*> StrokeClassifier::parameters() {
  std::vector<Parameter*> out;
  collect(out, stem_);
  for (Conv2d& c : dense_) collect(out, c);
  collect(out, out_);
  collect(out, head_);
  return out;
}

PerceptualNet::PerceptualNet(const PerceptualSpec& spec) : spec_(spec) {
  Rng rng(spec.seed);
  static constexpr double kBank[8][9] = {
      {1 / 9., 1 / 9., 1 / 9., 1 / 9., 1 / 9., 1 / 9., 1 / 9., 1 / 9., 1 / 9.},  // tone
      {-1, 0, 1, -2, 0, 2, -1, 0, 1},                                            // sobel x
      {-1, -2, -1, 0, 0, 0, 1, 2, 1},                                            // sobel y
      {1, 0, -1, 2, 0, -2, 1, 0, -1},
      {1, 2, 1, 0, 0, 0, -1, -2, -1},
      {0, -1, 0, -1, 4, -1, 0, -1, 0},  // laplacian
      {0, 1, 2, -1, 0, 1, -2, -1, 0},   // diagonals
      {2, 1, 0, 1, 0, -1, 0, -1, -2},
  };
  int in = 1;
  for (int i = 0; i < 4; ++i) {
    const int out = spec.channels[static_cast<std::size_t>(i)];
    Conv2d layer("phi.conv" + std::to_string(i), in, out, 3, i == 0 ? 1 : 2, 1, rng, std::sqrt(2.0 / (9.0 * in)));
    if (i == 0) {
      for (int o = 0; o < out && o < 8; ++o)
        for (int k = 0; k < 9; ++k) layer.weight.value[static_cast<std::size_t>(o * 9 + k)] = kBank[o][k];
    }
    layers_.push_back(std::move(layer));
    in = out;
  }
}

std::vector<Var> PerceptualNet::forward(Tape& tape, Var image) const {
  const Tensor& x = image.value();
  if (x.rank() != 3 || x.channels() != 1) throw Error(Errc::BadShape, "perceptual net expects grayscale input");
  std::vector<Var> acts;
  Var h = image;
  for (const Conv2d& layer : layers_) {
    h = relu(conv2d(h, tape.constant_ref(layer.weight.value), tape.constant_ref(layer.bias.value), layer.stride,
                    layer.pad));
    acts.push_back(h);
  }
  return acts;
}

std::vector<const Parameter*> PerceptualNet::parameters() const {
  std::vector<const Parameter*> out;
  for (const Conv2d& c : layers_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<Parameter*> PerceptualNet::mutable_parameters() {
  std::vector<Parameter*> out;
  for (Conv2d& c : layers_) collect(out, c);
  return out;
}

ModelBundle ModelBundle::create(const Profile& profile, std::uint64_t seed, double beta1, double beta2) {
  Rng rng(seed, 0x6e657473);
  ModelBundle b;
  b.profile = profile;
  b.g = Generator(profile.generator, rng, "G");
  b.d1 = Discriminator(profile.discriminator, rng, "D1");
  b.d2 = Discriminator(profile.discriminator, rng, "D2");
  b.psi = StrokeClassifier(profile.stroke, rng, "psi");
  b.psi.freeze();
  b.phi = PerceptualNet(profile.perceptual);
  b.g_opt = Adam(beta1, beta2);
  b.d_opt = Adam(beta1, beta2);
  return b;
}

std::vector<Parameter*> ModelBundle::discriminator_parameters() {
  std::vector<Parameter*> out = d1.parameters();
  for (Parameter* p : d2.parameters()) out.push_back(p);
  return out;
}

nlohmann::json ModelBundle::fingerprints() const {
  return {{"profile", profile.name},
          {"generator", spec_fingerprint(profile.generator.to_json())},
          {"discriminator", spec_fingerprint(profile.discriminator.to_json())},
          {"stroke", spec_fingerprint(profile.stroke.to_json())},
          {"perceptual", spec_fingerprint(profile.perceptual.to_json())}};
}

}  // namespace srender
