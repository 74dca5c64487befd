#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "srender/line_drawing.hpp"
#include "test_support.hpp"

namespace srender {
namespace {

// Dense 2-D Gaussian blur with replicated borders, written independently of
// the separable implementation.
Tensor dense_blur(const Tensor& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i)
    for (int j = -radius; j <= radius; ++j) total += std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
  Tensor out(img.dims());
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) {
          const double w = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma)) / total;
          s += w * img.at(0, std::clamp(r + i, 0, img.rows() - 1), std::clamp(c + j, 0, img.cols() - 1));
        }
      out.at(0, r, c) = s;
    }
  return out;
}

Image random_sketch(Rng& rng, int size = 24) {
  return Image(testing::random_tensor({1, size, size}, rng, 0.0, 1.0), DomainTag::sketch);
}

TEST(LineDraw, ConstantInputGivesBlankPage) {
  for (double tone : {0.0, 0.37, 1.0}) {
    const Image out = line_draw(LineDrawingOperator::dog(), Image::filled(1, 20, 30, tone, DomainTag::photo));
    EXPECT_EQ(out, Image::filled(1, 20, 30, 1.0, DomainTag::line_drawing));
  }
}

TEST(LineDraw, ShapeDomainAndRange) {
  Rng rng(1);
  const Image rgb(testing::random_tensor({3, 17, 23}, rng, 0.0, 1.0), DomainTag::photo);
  const Image out = line_draw(LineDrawingOperator::dog(), rgb);
  EXPECT_EQ(out.rows(), 17);
  EXPECT_EQ(out.cols(), 23);
  EXPECT_EQ(out.channels(), 1);
  EXPECT_EQ(out.domain(), DomainTag::line_drawing);
  for (double v : out.pixels().values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(out, line_draw(LineDrawingOperator::dog(), rgb));
}

TEST(LineDraw, StepEdgeMatchesDenseConvolutionOracle) {
  const int size = 32, step = 16;
  const double sigma = 1.0, k = 1.6, threshold = 0.01;
  Tensor px = Tensor::chw(1, size, size, 0.0);
  for (int r = 0; r < size; ++r)
    for (int c = step; c < size; ++c) px.at(0, r, c) = 1.0;
  const Image out = line_draw(LineDrawingOperator::dog(sigma, k, threshold), Image(px, DomainTag::photo));

  const Tensor fine = dense_blur(px, sigma);
  const Tensor coarse = dense_blur(px, k * sigma);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double e = fine.at(0, r, c) - coarse.at(0, r, c) + threshold;
      const double expected = e >= 0.0 ? 1.0 : std::clamp(1.0 + std::tanh(e / threshold), 0.0, 1.0);
      ASSERT_NEAR(out.at(0, r, c), expected, 1e-9) << r << "," << c;
    }

  // A vertical dark band hugging the step; paper-white elsewhere.
  for (int r = 0; r < size; ++r) {
    EXPECT_LT(out.at(0, r, step - 1), 0.1);
    for (int c = 0; c < size; ++c) {
      EXPECT_DOUBLE_EQ(out.at(0, r, c), out.at(0, 0, c));
      if (c < step - 4 || c > step + 3) EXPECT_DOUBLE_EQ(out.at(0, r, c), 1.0) << c;
    }
  }
}

TEST(LineDraw, FingerprintTracksParameters) {
  EXPECT_EQ(LineDrawingOperator::dog().fingerprint(), LineDrawingOperator::dog(1.0, 1.6, 0.005).fingerprint());
  EXPECT_NE(LineDrawingOperator::dog().fingerprint(), LineDrawingOperator::dog(1.2).fingerprint());
  EXPECT_EQ(LineDrawingOperator::from_name("dog", {{"sigma", 1.2}}).fingerprint(),
            LineDrawingOperator::dog(1.2).fingerprint());
  EXPECT_SRENDER_ERROR(LineDrawingOperator::from_name("aisketcher", {}), Errc::UnknownOperator);
  EXPECT_SRENDER_ERROR(LineDrawingOperator::external("learned", nullptr), Errc::UnknownOperator);
}

TEST(LineDraw, ExternalOperatorIsRetaggedAndChecked) {
  const auto invert = LineDrawingOperator::external("invert", [](const Image& img) {
    Tensor t = img.pixels();
    for (double& v : t.values()) v = 1.0 - v;
    return Image(t, img.domain());
  });
  const Image out = line_draw(invert, Image::filled(1, 8, 8, 0.25, DomainTag::photo));
  EXPECT_EQ(out.domain(), DomainTag::line_drawing);
  EXPECT_DOUBLE_EQ(out.at(0, 3, 3), 0.75);
  const auto shrink = LineDrawingOperator::external("shrink", [](const Image& img) { return crop(img, 0, 0, 8, 8); });
  EXPECT_SRENDER_ERROR(line_draw(shrink, Image::filled(1, 9, 9, 0.5, DomainTag::photo)), Errc::ShapeMismatch);
}

TEST(PseudoPairs, OnePairPerSketchInOrder) {
  Rng rng(2);
  std::vector<Image> sketches;
  for (int i = 0; i < 5; ++i) sketches.push_back(random_sketch(rng));
  const auto op = LineDrawingOperator::dog();
  const auto pairs = build_pseudo_pairs(op, sketches);
  ASSERT_EQ(pairs.size(), sketches.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].y, sketches[i]);
    EXPECT_EQ(pairs[i].z, line_draw(op, sketches[i]));
    EXPECT_EQ(pairs[i].operator_fingerprint, op.fingerprint());
  }
}

TEST(PseudoPairs, CommutesWithPermutation) {
  Rng rng(3);
  std::vector<Image> sketches;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    sketches.push_back(random_sketch(rng));
    ids.push_back("s" + std::to_string(i));
  }
  const auto op = LineDrawingOperator::dog();
  const auto forward = build_pseudo_pairs(op, sketches, ids);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<Image> ps;
  std::vector<std::string> pid;
  for (std::size_t i : perm) {
    ps.push_back(sketches[i]);
    pid.push_back(ids[i]);
  }
  const auto permuted = build_pseudo_pairs(op, ps, pid);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_EQ(permuted[i].source_id, forward[perm[i]].source_id);
    EXPECT_EQ(permuted[i].z, forward[perm[i]].z);
  }
}

TEST(PseudoPairs, RejectsNonSketches) {
  const std::vector<Image> photos{Image::filled(1, 8, 8, 0.5, DomainTag::photo)};
  EXPECT_SRENDER_ERROR(build_pseudo_pairs(LineDrawingOperator::dog(), photos), Errc::WrongDomainTag);
}

TEST(PseudoPairs, ManifestRoundTripAndFingerprintCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "srender_pairs_test";
  std::filesystem::create_directories(dir);
  Rng rng(4);
  const Image y = random_sketch(rng, 16);
  const auto op = LineDrawingOperator::dog();
  write_png(y, dir / "y.png");
  write_png(line_draw(op, y), dir / "z.png");
  const std::vector<PairRecord> records{{"a_1", "y.png", "z.png", op.fingerprint()}};
  write_pair_manifest(dir / "pairs.jsonl", records);
  const auto back = read_pair_manifest(dir / "pairs.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].line_path, "z.png");
  const auto pairs = load_pairs(dir / "pairs.jsonl", op.fingerprint());
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].y.domain(), DomainTag::sketch);
  EXPECT_EQ(pairs[0].z.domain(), DomainTag::line_drawing);
  EXPECT_SRENDER_ERROR(load_pairs(dir / "pairs.jsonl", LineDrawingOperator::dog(2.0).fingerprint()),
                       Errc::FingerprintMismatch);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace srender
