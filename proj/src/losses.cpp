#include "srender/losses.hpp"

#include "srender/error.hpp"

namespace srender {

namespace {

Var scalar_sum(std::span<const Var> terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

void check_same(Var a, Var b, const char* what) {
  if (!a.value().same_shape(b.value())) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + a.value().shape_string() + " vs " +
                                         b.value().shape_string());
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_fm < 0.0 || lambda_rec < 0.0 || lambda_str < 0.0) {
    throw Error(Errc::NegativeWeight, "loss weights must be nonnegative");
  }
}

void FeatureLayers::validate() const {
  if (perceptual.empty() && stroke.empty()) throw Error(Errc::BadConfig, "no feature layers selected");
  for (int j : perceptual) {
    if (j < 0 || j > 3) throw Error(Errc::BadConfig, "perceptual layer index must be in [0,3]");
  }
  for (const std::string& name : stroke) {
    if (name != "dense_out" && name != "final_conv") throw Error(Errc::BadConfig, "unknown stroke layer " + name);
  }
}

ScaledInput both_scales(Var x) { return ScaledInput{x, avg_pool2(x)}; }

DiscriminatorActivations run_discriminators(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y,
                                            bool track) {
  check_same(z, y, "discriminator pair");
  const ScaledInput zs = both_scales(z);
  const ScaledInput ys = both_scales(y);
  return DiscriminatorActivations{d1.forward(tape, zs.full, ys.full, track), d2.forward(tape, zs.half, ys.half, track)};
}

Var adversarial_d_loss(std::span<const Var> real_scores, std::span<const Var> fake_scores) {
  if (real_scores.empty() || real_scores.size() != fake_scores.size()) {
    throw Error(Errc::ShapeMismatch, "need one real and one fake score grid per scale");
  }
  std::vector<Var> terms;
  for (std::size_t k = 0; k < real_scores.size(); ++k) {
    terms.push_back(log_clamped(mean(real_scores[k]), kLogFloor));
    terms.push_back(log_clamped(affine(mean(fake_scores[k]), -1.0, 1.0), kLogFloor));
  }
  return affine(scalar_sum(terms), -1.0, 0.0);
}

Var adversarial_g_loss(std::span<const Var> fake_scores) {
  if (fake_scores.empty()) throw Error(Errc::ShapeMismatch, "need at least one score grid");
  std::vector<Var> terms;
  for (Var s : fake_scores) terms.push_back(log_clamped(mean(s), kLogFloor));
  return affine(scalar_sum(terms), -1.0, 0.0);
}

Var normalized_distance(Var a, Var b) {
  check_same(a, b, "normalized_distance");
  return affine(l2_distance(a, b), 1.0 / static_cast<double>(a.value().size()), 0.0);
}

Var feature_matching(const DiscriminatorActivations& real, const DiscriminatorActivations& fake) {
  if (real.d1.size() != fake.d1.size() || real.d2.size() != fake.d2.size() || real.d1.empty()) {
    throw Error(Errc::ShapeMismatch, "feature matching needs matching activation lists");
  }
  std::vector<Var> terms;
  for (std::size_t l = 0; l < real.d1.size(); ++l) terms.push_back(normalized_distance(real.d1[l], fake.d1[l]));
  for (std::size_t l = 0; l < real.d2.size(); ++l) terms.push_back(normalized_distance(real.d2[l], fake.d2[l]));
  return scalar_sum(terms);
}

Var adv_loss_d(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_real, Var y_fake) {
  check_same(y_real, y_fake, "adv_loss_d");
  const Var fake = y_fake.requires_grad() ? detach(y_fake) : y_fake;
  const auto real_acts = run_discriminators(tape, d1, d2, z, y_real, true);
  const auto fake_acts = run_discriminators(tape, d1, d2, z, fake, true);
  const Var real_scores[] = {real_acts.score(0), real_acts.score(1)};
  const Var fake_scores[] = {fake_acts.score(0), fake_acts.score(1)};
  return adversarial_d_loss(real_scores, fake_scores);
}

Var adv_loss_g(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_fake) {
  const auto acts = run_discriminators(tape, d1, d2, z, y_fake, false);
  const Var scores[] = {acts.score(0), acts.score(1)};
  return adversarial_g_loss(scores);
}

Var fm_loss(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_real, Var y_fake) {
  check_same(y_real, y_fake, "fm_loss");
  const Var real = y_real.requires_grad() ? detach(y_real) : y_real;
  const auto real_acts = run_discriminators(tape, d1, d2, z, real, false);
  const auto fake_acts = run_discriminators(tape, d1, d2, z, y_fake, false);
  return feature_matching(real_acts, fake_acts);
}

Var rec_loss(Tape& tape, const PerceptualNet& phi, Var y_real, Var y_fake, const FeatureLayers& layers) {
  check_same(y_real, y_fake, "rec_loss");
  layers.validate();
  if (layers.perceptual.empty()) return tape.constant(Tensor({1}));
  const std::vector<Var> real = phi.forward(tape, y_real);
  const std::vector<Var> fake = phi.forward(tape, y_fake);
  std::vector<Var> terms;
  for (int j : layers.perceptual) terms.push_back(normalized_distance(real[j], fake[j]));
  return scalar_sum(terms);
}

std::vector<PatchOrigin> stroke_tiles(int rows, int cols, int patch_size) {
  std::vector<PatchOrigin> tiles;
  for (int r = 0; r + patch_size <= rows; r += patch_size)
    for (int c = 0; c + patch_size <= cols; c += patch_size) tiles.push_back(PatchOrigin{r, c});
  return tiles;
}

Var stroke_loss(Tape& tape, StrokeClassifier& psi, Var y_real, Var y_fake, const FeatureLayers& layers) {
  const Tensor& v = y_real.value();
  return stroke_loss(tape, psi, y_real, y_fake, stroke_tiles(v.rows(), v.cols(), psi.spec().patch_size), layers);
}

Var stroke_loss(Tape& tape, StrokeClassifier& psi, Var y_real, Var y_fake, std::span<const PatchOrigin> tiles,
                const FeatureLayers& layers) {
  if (!psi.frozen()) throw Error(Errc::PsiNotFrozen, "stroke loss requires a frozen stroke classifier");
  check_same(y_real, y_fake, "stroke_loss");
  layers.validate();
  if (tiles.empty()) throw Error(Errc::BadShape, "image smaller than one stroke patch");
  if (layers.stroke.empty()) return tape.constant(Tensor({1}));
  const int p = psi.spec().patch_size;
  std::vector<Var> terms;
  for (const PatchOrigin& t : tiles) {
    const StrokeActivations real = psi.forward(tape, crop(y_real, t.row, t.col, p, p), false);
    const StrokeActivations fake = psi.forward(tape, crop(y_fake, t.row, t.col, p, p), false);
    for (const std::string& name : layers.stroke) {
      terms.push_back(name == "dense_out" ? normalized_distance(real.dense_out, fake.dense_out)
                                          : normalized_distance(real.final_conv, fake.final_conv));
    }
  }
  return scalar_sum(terms);
}

double total_g_loss(const LossComponents& parts, const LossWeights& w) {
  w.validate();
  return parts.adv_g + w.lambda_fm * parts.fm + w.lambda_rec * parts.rec + w.lambda_str * parts.stroke;
}

Var total_g_loss(Var adv_g, Var fm, Var rec, Var stroke, const LossWeights& w) {
  w.validate();
  Var total = add(adv_g, affine(fm, w.lambda_fm, 0.0));
  total = add(total, affine(rec, w.lambda_rec, 0.0));
  return add(total, affine(stroke, w.lambda_str, 0.0));
}

}  // namespace srender
