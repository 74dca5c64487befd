#include <gtest/gtest.h>

#include <algorithm>

#include "reference_ops.hpp"
#include "srender/losses.hpp"
#include "test_support.hpp"

namespace srender {
namespace {

using testing::random_tensor;

Var grid(Tape& tape, double value, int side = 3) { return tape.constant(Tensor::chw(1, side, side, value)); }

double d_loss_for(double real, double fake) {
  Tape tape;
  const Var r[] = {grid(tape, real), grid(tape, real, 2)};
  const Var f[] = {grid(tape, fake), grid(tape, fake, 2)};
  return adversarial_d_loss(r, f).value()[0];
}

double g_loss_for(double d1, double d2) {
  Tape tape;
  const Var f[] = {grid(tape, d1), grid(tape, d2, 2)};
  return adversarial_g_loss(f).value()[0];
}

TEST(AdversarialLoss, DiscriminatorAtChance) { EXPECT_NEAR(d_loss_for(0.5, 0.5), 4.0 * std::log(2.0), 1e-12); }

TEST(AdversarialLoss, DiscriminatorOptimum) {
  EXPECT_NEAR(d_loss_for(1.0, 0.0), -2.0 * std::log(1.0 - kLogFloor), 1e-7);
  // Fully fooled discriminator hits the log floor on both terms at both scales.
  EXPECT_NEAR(d_loss_for(0.0, 1.0), -4.0 * std::log(kLogFloor), 1e-9);
}

TEST(AdversarialLoss, DiscriminatorTermsAreMirrorSymmetric) {
  // Exchanging the real and fake roles while complementing the scores maps
  // each log term onto the other.
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double p = rng.uniform(0.01, 0.99), q = rng.uniform(0.01, 0.99);
    EXPECT_NEAR(d_loss_for(p, q), d_loss_for(1.0 - q, 1.0 - p), 1e-12);
  }
}

TEST(AdversarialLoss, GeneratorValues) {
  EXPECT_NEAR(g_loss_for(0.5, 0.5), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(g_loss_for(1.0, 1.0), 0.0, 1e-15);
  double prev = g_loss_for(0.01, 0.5);
  for (double p = 0.02; p <= 1.0; p += 0.01) {
    const double cur = g_loss_for(p, 0.5);
    EXPECT_LT(cur, prev);
    prev = cur;
    EXPECT_LT(g_loss_for(0.5, p), g_loss_for(0.5, p - 0.01));
  }
}

TEST(AdversarialLoss, GridMeanIsTheScalar) {
  Tape tape;
  const Var f[] = {tape.constant(Tensor({1, 1, 2}, std::vector<double>{0.2, 0.6})), grid(tape, 0.4)};
  EXPECT_NEAR(adversarial_g_loss(f).value()[0], -2.0 * std::log(0.4), 1e-12);
}

TEST(AdversarialLoss, NetworkLossesStayNonnegative) {
  ModelBundle b = ModelBundle::create(micro_8(), 3);
  Rng rng(4);
  for (int i = 0; i < 5; ++i) {
    Tape tape;
    const Var z = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
    const Var yr = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
    const Var yf = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
    EXPECT_GE(adv_loss_d(tape, b.d1, b.d2, z, yr, yf).value()[0], 0.0);
    EXPECT_GE(adv_loss_g(tape, b.d1, b.d2, z, yf).value()[0], 0.0);
  }
  Tape tape;
  EXPECT_SRENDER_ERROR(adv_loss_d(tape, b.d1, b.d2, tape.constant(Tensor::chw(1, 8, 8)),
                                  tape.constant(Tensor::chw(1, 8, 8)), tape.constant(Tensor::chw(1, 4, 4))),
                       Errc::ShapeMismatch);
}

TEST(NormalizedDistance, IsHomogeneous) {
  Rng rng(5);
  const Tensor a = random_tensor({2, 5, 5}, rng);
  const Tensor d = random_tensor({2, 5, 5}, rng);
  Tensor b1 = a, b2 = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    b1[i] += d[i];
    b2[i] += 2.0 * d[i];
  }
  Tape tape;
  const double one = normalized_distance(tape.constant(a), tape.constant(b1)).value()[0];
  const double two = normalized_distance(tape.constant(a), tape.constant(b2)).value()[0];
  EXPECT_NEAR(two, 2.0 * one, 1e-12);
  EXPECT_NEAR(one, reference::gap(a, b1), 1e-14);
}

// Independent re-walk of both discriminators for the feature-matching oracle.
std::vector<Tensor> walk(Discriminator& d, const Tensor& z, const Tensor& y) {
  std::vector<Tensor> acts;
  Tensor h = reference::concat(z, y);
  for (int i = 0; i < 5; ++i) {
    const Conv2d& c = d.layers()[static_cast<std::size_t>(i)];
    h = reference::conv(h, c.weight.value, c.bias.value, c.stride, c.pad);
    h = i == 4 ? reference::sigmoid(h) : reference::leaky(i > 0 ? reference::instance_norm(h) : h, 0.2);
    acts.push_back(h);
  }
  return acts;
}

TEST(FeatureMatching, ZeroOnIdenticalImages) {
  ModelBundle b = ModelBundle::create(micro_8(), 6);
  Rng rng(7);
  Tape tape;
  const Var z = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
  const Tensor y = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  EXPECT_EQ(fm_loss(tape, b.d1, b.d2, z, tape.constant(y), tape.constant(y)).value()[0], 0.0);
}

TEST(FeatureMatching, MatchesLayerWalkOracle) {
  ModelBundle b = ModelBundle::create(toy_64(), 8);
  Rng rng(9);
  const Tensor z = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  const Tensor yr = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  const Tensor yf = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  Tape tape;
  const double got = fm_loss(tape, b.d1, b.d2, tape.constant(z), tape.constant(yr), tape.constant(yf)).value()[0];

  double expected = 0.0;
  const auto r1 = walk(b.d1, z, yr), f1 = walk(b.d1, z, yf);
  const Tensor zh = reference::pool2(z);
  const auto r2 = walk(b.d2, zh, reference::pool2(yr)), f2 = walk(b.d2, zh, reference::pool2(yf));
  for (std::size_t l = 0; l < 5; ++l) expected += reference::gap(r1[l], f1[l]) + reference::gap(r2[l], f2[l]);
  EXPECT_NEAR(got, expected, 1e-12 * expected);
  EXPECT_GT(got, 0.0);
}

std::vector<Tensor> walk(const PerceptualNet& phi, const Tensor& x) {
  std::vector<Tensor> acts;
  Tensor h = x;
  const auto params = phi.parameters();
  for (std::size_t j = 0; j < 4; ++j) {
    h = reference::relu(reference::conv(h, params[2 * j]->value, params[2 * j + 1]->value, j == 0 ? 1 : 2, 1));
    acts.push_back(h);
  }
  return acts;
}

TEST(Reconstruction, IdentitySymmetryAndOracle) {
  const PerceptualNet phi(PerceptualSpec{});
  Rng rng(10);
  const Tensor a = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  const Tensor b = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  Tape tape;
  EXPECT_EQ(rec_loss(tape, phi, tape.constant(a), tape.constant(a)).value()[0], 0.0);
  const double ab = rec_loss(tape, phi, tape.constant(a), tape.constant(b)).value()[0];
  const double ba = rec_loss(tape, phi, tape.constant(b), tape.constant(a)).value()[0];
  EXPECT_NEAR(ab, ba, 1e-14);

  const auto wa = walk(phi, a), wb = walk(phi, b);
  double expected = 0.0;
  for (std::size_t j = 0; j < 4; ++j) expected += reference::gap(wa[j], wb[j]);
  EXPECT_NEAR(ab, expected, 1e-12 * expected);

  FeatureLayers only_first;
  only_first.perceptual = {0};
  EXPECT_NEAR(rec_loss(tape, phi, tape.constant(a), tape.constant(b), only_first).value()[0],
              reference::gap(wa[0], wb[0]), 1e-14);
  EXPECT_SRENDER_ERROR(rec_loss(tape, phi, tape.constant(a), tape.constant(Tensor::chw(1, 32, 32))),
                       Errc::ShapeMismatch);
}

// Per-patch re-computation of the classifier's dense-block and output-conv
// activations.
std::pair<Tensor, Tensor> walk(StrokeClassifier& psi, const Tensor& patch) {
  const auto params = psi.parameters();
  const int dense = psi.spec().dense_layers;
  const int pad = psi.spec().kernel / 2;
  Tensor features = reference::conv(patch, params[0]->value, params[1]->value, 1, pad);
  for (int i = 0; i < dense; ++i) {
    const Tensor grown = reference::conv(reference::relu(reference::instance_norm(features)),
                                         params[2 + 2 * i]->value, params[3 + 2 * i]->value, 1, pad);
    features = reference::concat(features, grown);
  }
  const Tensor out =
      reference::relu(reference::conv(features, params[2 + 2 * dense]->value, params[3 + 2 * dense]->value, 1, 0));
  return {features, out};
}

TEST(StrokeLoss, RequiresFrozenClassifier) {
  Rng rng(11);
  StrokeClassifier psi(toy_64().stroke, rng);
  Tape tape;
  const Var x = tape.constant(Tensor::chw(1, 64, 64, 0.5));
  EXPECT_SRENDER_ERROR(stroke_loss(tape, psi, x, x), Errc::PsiNotFrozen);
  psi.freeze();
  EXPECT_EQ(stroke_loss(tape, psi, x, x).value()[0], 0.0);
}

TEST(StrokeLoss, MatchesPerPatchOracleInAnyOrder) {
  Rng rng(12);
  StrokeClassifier psi(toy_64().stroke, rng);
  psi.freeze();
  const Tensor a = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  const Tensor b = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  std::vector<PatchOrigin> tiles = stroke_tiles(64, 64, 32);
  ASSERT_EQ(tiles.size(), 4u);
  Tape tape;
  const double got = stroke_loss(tape, psi, tape.constant(a), tape.constant(b)).value()[0];

  double expected = 0.0;
  for (const PatchOrigin& t : tiles) {
    const auto [da, fa] = walk(psi, reference::window(a, t.row, t.col, 32));
    const auto [db, fb] = walk(psi, reference::window(b, t.row, t.col, 32));
    expected += reference::gap(da, db) + reference::gap(fa, fb);
  }
  EXPECT_NEAR(got, expected, 1e-12 * expected);

  std::reverse(tiles.begin(), tiles.end());
  std::swap(tiles[0], tiles[2]);
  EXPECT_NEAR(stroke_loss(tape, psi, tape.constant(a), tape.constant(b), tiles).value()[0], got, 1e-13 * got);
}

TEST(StrokeLoss, TilesDropRemainder) {
  const auto tiles = stroke_tiles(70, 100, 32);
  EXPECT_EQ(tiles.size(), 6u);
  EXPECT_EQ(tiles.back().row, 32);
  EXPECT_EQ(tiles.back().col, 64);
}

TEST(TotalLoss, WeightedSum) {
  const LossWeights defaults;
  EXPECT_NEAR(total_g_loss(LossComponents{1, 1, 1, 1}, defaults), 111.002, 1e-12);
  EXPECT_NEAR(total_g_loss(LossComponents{0.5, 0.01, 0.2, 3.0}, defaults), 3.506, 1e-12);
  EXPECT_EQ(total_g_loss(LossComponents{0.7, 5, 6, 7}, LossWeights{0, 0, 0}), 0.7);
}

TEST(TotalLoss, LinearInEachComponent) {
  const LossWeights w{3.0, 5.0, 7.0};
  const LossComponents base{0.4, 0.3, 0.2, 0.1};
  const double t0 = total_g_loss(base, w);
  const double step = 0.25;
  LossComponents p = base;
  p.adv_g += step;
  EXPECT_NEAR(total_g_loss(p, w) - t0, step, 1e-12);
  p = base;
  p.fm += step;
  EXPECT_NEAR(total_g_loss(p, w) - t0, 3.0 * step, 1e-12);
  p = base;
  p.rec += step;
  EXPECT_NEAR(total_g_loss(p, w) - t0, 5.0 * step, 1e-12);
  p = base;
  p.stroke += step;
  EXPECT_NEAR(total_g_loss(p, w) - t0, 7.0 * step, 1e-12);

  Tape tape;
  const double v = total_g_loss(tape.constant(Tensor({1}, 0.4)), tape.constant(Tensor({1}, 0.3)),
                                tape.constant(Tensor({1}, 0.2)), tape.constant(Tensor({1}, 0.1)), w)
                       .value()[0];
  EXPECT_NEAR(v, t0, 1e-14);
}

TEST(TotalLoss, RejectsNegativeWeights) {
  EXPECT_SRENDER_ERROR(total_g_loss(LossComponents{}, LossWeights{-1.0, 10, 0.002}), Errc::NegativeWeight);
  EXPECT_SRENDER_ERROR(total_g_loss(LossComponents{}, LossWeights{100, 10, -0.002}), Errc::NegativeWeight);
}

// Finite-difference check of each generator-side loss on the micro profile.
class MicroGradient : public ::testing::Test {
 protected:
  void check(const std::function<Var(Tape&, Var z, Var y_real, Var y_fake)>& loss) {
    Tape tape;
    const Var z = tape.constant(z_);
    const Var yr = tape.constant(y_);
    Var out = loss(tape, z, yr, bundle_.g.forward(tape, z, true));
    for (Parameter* p : bundle_.g.parameters()) p->grad.fill(0.0);
    tape.backward(out);
    EXPECT_GT(out.value()[0], 0.0);
    // Whole-vector comparison: biases ahead of instance norm have zero gradient.
    std::vector<double> analytic, numeric;
    for (Parameter* p : bundle_.g.parameters()) {
      analytic.insert(analytic.end(), p->grad.values().begin(), p->grad.values().end());
      const auto n = testing::numeric_gradient(p->value, [&] {
        Tape t2;
        const Var z2 = t2.constant(z_);
        return loss(t2, z2, t2.constant(y_), bundle_.g.forward(t2, z2, false)).value()[0];
      });
      numeric.insert(numeric.end(), n.begin(), n.end());
    }
    EXPECT_LT(testing::relative_gap(analytic, numeric), 1e-3);
  }

  ModelBundle bundle_ = ModelBundle::create(micro_8(), 21);
  Rng rng_{22};
  Tensor z_ = random_tensor({1, 8, 8}, rng_, 0.0, 1.0);
  Tensor y_ = random_tensor({1, 8, 8}, rng_, 0.0, 1.0);
};

TEST_F(MicroGradient, FeatureMatching) {
  check([&](Tape& t, Var z, Var yr, Var yf) { return fm_loss(t, bundle_.d1, bundle_.d2, z, yr, yf); });
}

TEST_F(MicroGradient, Reconstruction) {
  check([&](Tape& t, Var, Var yr, Var yf) { return rec_loss(t, bundle_.phi, yr, yf); });
}

TEST_F(MicroGradient, Stroke) {
  check([&](Tape& t, Var, Var yr, Var yf) { return stroke_loss(t, bundle_.psi, yr, yf); });
}

TEST_F(MicroGradient, AdversarialGenerator) {
  check([&](Tape& t, Var z, Var, Var yf) { return adv_loss_g(t, bundle_.d1, bundle_.d2, z, yf); });
}

TEST(GradientFlow, DiscriminatorLossLeavesGeneratorAlone) {
  ModelBundle b = ModelBundle::create(micro_8(), 30);
  Rng rng(31);
  const Tensor zt = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  Tape tape;
  const Var z = tape.constant(zt);
  const Var fake = b.g.forward(tape, z, true);
  for (Parameter* p : b.g.parameters()) p->grad.fill(0.0);
  tape.backward(adv_loss_d(tape, b.d1, b.d2, z, tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0)), fake));
  for (Parameter* p : b.g.parameters())
    for (double g : p->grad.values()) EXPECT_EQ(g, 0.0);
  double d_grad = 0.0;
  for (Parameter* p : b.discriminator_parameters())
    for (double g : p->grad.values()) d_grad += std::abs(g);
  EXPECT_GT(d_grad, 0.0);
}

TEST(GradientFlow, GeneratorLossesLeaveDiscriminatorAlone) {
  ModelBundle b = ModelBundle::create(micro_8(), 32);
  Rng rng(33);
  Tape tape;
  const Var z = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
  const Var yr = tape.constant(random_tensor({1, 8, 8}, rng, 0.0, 1.0));
  const Var fake = b.g.forward(tape, z, true);
  for (Parameter* p : b.discriminator_parameters()) p->grad.fill(0.0);
  tape.backward(add(adv_loss_g(tape, b.d1, b.d2, z, fake), fm_loss(tape, b.d1, b.d2, z, yr, fake)));
  for (Parameter* p : b.discriminator_parameters())
    for (double g : p->grad.values()) EXPECT_EQ(g, 0.0);
}

}  // namespace
}  // namespace srender
