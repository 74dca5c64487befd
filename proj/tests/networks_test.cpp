#include <gtest/gtest.h>

#include <numeric>

#include "reference_ops.hpp"
#include "srender/networks.hpp"
#include "test_support.hpp"

namespace srender {
namespace {

using testing::random_tensor;

int conv_side(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

GeneratorSpec narrow(GeneratorSpec spec) {
  spec.base_channels = 2;
  spec.channel_cap = 8;
  return spec;
}

TEST(Generator, FullProfileLayerCounts) {
  const GeneratorSpec spec = paper_512().generator;
  EXPECT_EQ(spec.conv_layer_count(), 5);
  EXPECT_EQ(spec.transposed_layer_count(), 5);
  EXPECT_EQ(spec.n_resblocks, 9);
  Rng rng(1);
  Generator g(narrow(spec), rng);
  EXPECT_EQ(g.encoder().size(), 5u);
  EXPECT_EQ(g.residual_blocks().size(), 9u);
  EXPECT_EQ(g.decoder().size(), 5u);
}

TEST(Generator, PreservesSpatialSize) {
  Rng rng(2);
  Generator toy(toy_64().generator, rng);
  for (int side : {64, 32}) {
    const Tensor out = toy.forward(random_tensor({1, side, side}, rng, 0.0, 1.0));
    EXPECT_EQ(out.dims(), (std::vector<int>{1, side, side}));
    for (double v : out.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  Generator g(toy_64().generator, rng);
  const Tensor wide = g.forward(random_tensor({1, 48, 80}, rng, 0.0, 1.0));
  EXPECT_EQ(wide.dims(), (std::vector<int>{1, 48, 80}));
}

TEST(Generator, FullResolutionShape) {
  // Full-profile kernels and strides at 512; width only narrowed for speed.
  Rng rng(3);
  Generator g(narrow(paper_512().generator), rng);
  const Tensor out = g.forward(random_tensor({1, 512, 512}, rng, 0.0, 1.0));
  EXPECT_EQ(out.dims(), (std::vector<int>{1, 512, 512}));
}

TEST(Generator, RejectsIndivisibleSides) {
  Rng rng(4);
  Generator g(toy_64().generator, rng);
  EXPECT_SRENDER_ERROR(g.forward(Tensor::chw(1, 40, 64)), Errc::BadShape);
  EXPECT_SRENDER_ERROR(g.forward(Tensor::chw(3, 64, 64)), Errc::BadShape);
}

TEST(Generator, ZeroWeightResidualBlockIsIdentity) {
  Rng rng(5);
  Generator g(toy_64().generator, rng);
  const int width = g.spec().channels_at(g.spec().n_down);
  const Tensor x = random_tensor({width, 4, 4}, rng);
  for (auto& block : g.residual_blocks()) {
    for (Conv2d* c : {&block.first, &block.second}) {
      c->weight.value.fill(0.0);
      c->bias.value.fill(0.0);
    }
  }
  Tape tape;
  Var h = tape.constant(x);
  for (int i = 0; i < 9; ++i) {
    Var out = g.residual_block(tape, i, h, false);
    EXPECT_TRUE(bit_identical(out.value(), x)) << "block " << i;
    h = out;
  }
}

TEST(Generator, ForwardIsDeterministic) {
  Rng rng(6);
  Generator g(micro_8().generator, rng);
  const Tensor z = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  EXPECT_TRUE(bit_identical(g.forward(z), g.forward(z)));
}

TEST(Discriminator, FullProfileScoreGridIs30x30) {
  DiscriminatorSpec spec = paper_512().discriminator;
  int side = 512;
  for (int i = 0; i < 5; ++i) side = conv_side(side, spec.kernels[i], spec.strides[i], spec.pads[i]);
  EXPECT_EQ(side, 30);
  EXPECT_EQ(spec.output_sides(512).back(), 30);
  EXPECT_EQ(std::count(spec.strides.begin(), spec.strides.end(), 2), 4);

  spec.base_channels = 4;
  spec.channel_cap = 16;
  Rng rng(7);
  Discriminator d(spec, rng, "D1");
  Tape tape;
  const auto acts = d.forward(tape, tape.constant(random_tensor({1, 512, 512}, rng, 0.0, 1.0)),
                              tape.constant(random_tensor({1, 512, 512}, rng, 0.0, 1.0)), false);
  ASSERT_EQ(acts.size(), 5u);
  EXPECT_EQ(acts.back().value().dims(), (std::vector<int>{1, 30, 30}));
}

TEST(Discriminator, ToyScoreGrids) {
  const DiscriminatorSpec spec = toy_64().discriminator;
  int side = 64;
  for (int i = 0; i < 5; ++i) side = conv_side(side, spec.kernels[i], spec.strides[i], spec.pads[i]);
  EXPECT_EQ(spec.output_sides(64).back(), side);
  EXPECT_GT(spec.output_sides(32).back(), 0);
}

TEST(Discriminator, ScoresStrictlyInsideUnitInterval) {
  Rng rng(8);
  Discriminator d(toy_64().discriminator, rng, "D1");
  for (Parameter* p : d.parameters()) fill_normal(p->value, rng, 2.0);
  Tape tape;
  const auto acts = d.forward(tape, tape.constant(random_tensor({1, 64, 64}, rng, 0.0, 1.0)),
                              tape.constant(random_tensor({1, 64, 64}, rng, 0.0, 1.0)), false);
  for (double v : acts.back().value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Discriminator, ConditionChangesScores) {
  Rng rng(9);
  Discriminator d(toy_64().discriminator, rng, "D1");
  const Tensor img = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  Tape tape;
  const Tensor a = d.forward(tape, tape.constant(random_tensor({1, 64, 64}, rng, 0.0, 1.0)), tape.constant(img), false)
                       .back()
                       .value();
  const Tensor b = d.forward(tape, tape.constant(random_tensor({1, 64, 64}, rng, 0.0, 1.0)), tape.constant(img), false)
                       .back()
                       .value();
  EXPECT_FALSE(bit_identical(a, b));
}

TEST(Discriminator, MatchesLayerWalkOracle) {
  DiscriminatorSpec spec = micro_8().discriminator;
  Rng rng(10);
  Discriminator d(spec, rng, "D");
  const Tensor z = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const Tensor y = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  Tape tape;
  const auto acts = d.forward(tape, tape.constant(z), tape.constant(y), false);
  Tensor h = reference::concat(z, y);
  for (int i = 0; i < 5; ++i) {
    const Conv2d& c = d.layers()[static_cast<std::size_t>(i)];
    h = reference::conv(h, c.weight.value, c.bias.value, c.stride, c.pad);
    if (i == 4) {
      h = reference::sigmoid(h);
    } else {
      if (i > 0) h = reference::instance_norm(h);
      h = reference::leaky(h, 0.2);
    }
    EXPECT_LT(testing::relative_gap(acts[static_cast<std::size_t>(i)].value().values(), h.values()), 1e-12);
  }
}

TEST(Discriminator, RejectsMismatchedPair) {
  Rng rng(11);
  Discriminator d(micro_8().discriminator, rng, "D");
  Tape tape;
  EXPECT_SRENDER_ERROR(d.forward(tape, tape.constant(Tensor::chw(1, 8, 8)), tape.constant(Tensor::chw(1, 8, 6)), false),
                       Errc::ShapeMismatch);
}

TEST(ModelBundle, BothDiscriminatorsHaveSameSize) {
  for (const Profile& p : {toy_64(), micro_8()}) {
    ModelBundle b = ModelBundle::create(p, 1);
    EXPECT_EQ(b.d1.parameter_count(), b.d2.parameter_count());
    EXPECT_FALSE(bit_identical(b.d1.parameters()[0]->value, b.d2.parameters()[0]->value));
  }
}

TEST(ModelBundle, MicroProfileIsTiny) {
  ModelBundle b = ModelBundle::create(micro_8(), 1);
  EXPECT_LE(b.g.parameter_count(), 200u);
  EXPECT_LE(b.d1.parameter_count(), 200u);
  std::size_t psi = 0;
  for (Parameter* p : b.psi.parameters()) psi += p->value.size();
  EXPECT_LE(psi, 200u);
}

TEST(ModelBundle, SameSeedSameWeights) {
  ModelBundle a = ModelBundle::create(micro_8(), 42);
  ModelBundle b = ModelBundle::create(micro_8(), 42);
  ModelBundle c = ModelBundle::create(micro_8(), 43);
  EXPECT_TRUE(bit_identical(a.g.parameters()[0]->value, b.g.parameters()[0]->value));
  EXPECT_FALSE(bit_identical(a.g.parameters()[0]->value, c.g.parameters()[0]->value));
  EXPECT_EQ(a.fingerprints(), b.fingerprints());
  EXPECT_NE(a.fingerprints(), ModelBundle::create(toy_64(), 42).fingerprints());
}

TEST(StrokeClassifier, SevenProbabilitiesSummingToOne) {
  Rng rng(12);
  StrokeClassifier psi(toy_64().stroke, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = psi.probabilities(Image(random_tensor({1, 32, 32}, rng, 0.0, 1.0), DomainTag::sketch));
    EXPECT_EQ(p.size(), 7u);
    for (double v : p) EXPECT_GE(v, 0.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
  }
  EXPECT_SRENDER_ERROR(psi.probabilities(Image::filled(1, 16, 16, 0.5, DomainTag::sketch)), Errc::BadShape);
}

TEST(StrokeClassifier, DenseBlockWidth) {
  const StrokeClassifierSpec spec;
  EXPECT_EQ(spec.dense_layers, 4);
  EXPECT_EQ(spec.growth, 16);
  EXPECT_EQ(spec.patch_size, 64);
  Rng rng(13);
  StrokeClassifier psi(toy_64().stroke, rng);
  Tape tape;
  const auto acts = psi.forward(tape, tape.constant(Tensor::chw(1, 32, 32, 0.3)), false);
  EXPECT_EQ(acts.dense_out.value().channels(), toy_64().stroke.dense_out_channels());
  EXPECT_EQ(acts.logits.value().size(), 7u);
}

TEST(StrokeLabel, SevenNamedClassesInFixedOrder) {
  const char* names[] = {"skin", "hair", "boundary", "eye_brow", "eye", "clips", "ear"};
  for (int i = 0; i < kStrokeClasses; ++i) {
    EXPECT_EQ(stroke_label_name(static_cast<StrokeLabel>(i)), names[i]);
    EXPECT_EQ(static_cast<int>(stroke_label_from_name(names[i])), i);
  }
  EXPECT_SRENDER_ERROR(stroke_label_from_name("lips"), Errc::ParseError);
}

TEST(PerceptualNet, DeterministicAndHalving) {
  const PerceptualNet phi(PerceptualSpec{});
  const PerceptualNet again(PerceptualSpec{});
  Rng rng(14);
  const Tensor x = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  Tape tape;
  const auto a = phi.forward(tape, tape.constant(x));
  const auto b = again.forward(tape, tape.constant(x));
  ASSERT_EQ(a.size(), 4u);
  int side = 64;
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_TRUE(bit_identical(a[j].value(), b[j].value()));
    EXPECT_EQ(a[j].value().rows(), side);
    EXPECT_EQ(a[j].value().cols(), side);
    side /= 2;
  }
}

TEST(PerceptualNet, ParametersAreNeverTracked) {
  PerceptualNet phi(PerceptualSpec{});
  Rng rng(15);
  Tape tape;
  Var x = tape.variable(random_tensor({1, 16, 16}, rng, 0.0, 1.0));
  const auto acts = phi.forward(tape, x);
  tape.backward(sum(acts.back()));
  for (Parameter* p : phi.mutable_parameters()) {
    for (double g : p->grad.values()) EXPECT_EQ(g, 0.0);
  }
}

}  // namespace
}  // namespace srender
