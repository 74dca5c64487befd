#pragma once

#include <span>
#include <string>
#include <vector>

#include "srender/networks.hpp"

namespace srender {

/// Weights of the feature-matching, reconstruction and stroke terms in the
/// generator objective.
struct LossWeights {
  double lambda_fm = 100.0;
  double lambda_rec = 10.0;
  double lambda_str = 0.002;

  void validate() const;
};

/// Which phi depths feed the reconstruction term and which psi activations
/// ("dense_out", "final_conv") feed the stroke term.
struct FeatureLayers {
  std::vector<int> perceptual{0, 1, 2, 3};
  std::vector<std::string> stroke{"dense_out", "final_conv"};

  void validate() const;
};

struct LossComponents {
  double adv_g = 0.0;
  double fm = 0.0;
  double rec = 0.0;
  double stroke = 0.0;
};

struct LossBreakdown {
  double adv_d = 0.0;
  double adv_g = 0.0;
  double fm = 0.0;
  double rec = 0.0;
  double stroke = 0.0;
  double total_g = 0.0;
};

/// Floor applied inside every log of the adversarial terms.
inline constexpr double kLogFloor = 1e-8;

/// Discriminator inputs at both scales: full resolution and 2x mean-pooled.
struct ScaledInput {
  Var full;
  Var half;
};
ScaledInput both_scales(Var x);

/// Activations of D1 on the full-scale pair and D2 on the half-scale pair.
struct DiscriminatorActivations {
  std::vector<Var> d1;
  std::vector<Var> d2;
  Var score(int k) const { return k == 0 ? d1.back() : d2.back(); }
};
DiscriminatorActivations run_discriminators(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y,
                                            bool track);

// Terms expressed on already-computed activations. Score grids are averaged
// to give D_k's scalar output.

/// -sum_k [ log D_k(real) + log(1 - D_k(fake)) ]
Var adversarial_d_loss(std::span<const Var> real_scores, std::span<const Var> fake_scores);
/// -sum_k log D_k(fake)   (non-saturating generator form)
Var adversarial_g_loss(std::span<const Var> fake_scores);
/// ||a - b||_2 divided by the element count.
Var normalized_distance(Var a, Var b);
/// sum over both discriminators and all their layers of normalized_distance.
Var feature_matching(const DiscriminatorActivations& real, const DiscriminatorActivations& fake);

// Network-level losses for a single sample. Batch averaging is done by the
// caller.

/// Trains D; y_fake is detached before use.
Var adv_loss_d(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_real, Var y_fake);
/// D is held fixed; gradients flow into y_fake.
Var adv_loss_g(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_fake);
/// Real-branch activations carry no gradient.
Var fm_loss(Tape& tape, Discriminator& d1, Discriminator& d2, Var z, Var y_real, Var y_fake);
Var rec_loss(Tape& tape, const PerceptualNet& phi, Var y_real, Var y_fake, const FeatureLayers& layers = {});

struct PatchOrigin {
  int row = 0;
  int col = 0;
};
/// Regular non-overlapping grid of patch_size tiles; remainder rows/cols are dropped.
std::vector<PatchOrigin> stroke_tiles(int rows, int cols, int patch_size);

/// Sum over tiles of the normalized distances between psi's dense-block and
/// output-conv activations. psi must be frozen.
Var stroke_loss(Tape& tape, StrokeClassifier& psi, Var y_real, Var y_fake, const FeatureLayers& layers = {});
Var stroke_loss(Tape& tape, StrokeClassifier& psi, Var y_real, Var y_fake, std::span<const PatchOrigin> tiles,
                const FeatureLayers& layers = {});

double total_g_loss(const LossComponents& parts, const LossWeights& w);
Var total_g_loss(Var adv_g, Var fm, Var rec, Var stroke, const LossWeights& w);

}  // namespace srender
