#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "srender/rng.hpp"
#include "srender/tensor.hpp"

namespace srender {

enum class DomainTag { photo, sketch, line_drawing };

std::string_view domain_name(DomainTag tag) noexcept;

/// Pixel grid with 1 or 3 channels, intensities in [0,1], at least 8x8.
/// The domain tag is fixed at construction.
class Image {
 public:
  Image(Tensor pixels, DomainTag domain);

  static Image filled(int channels, int rows, int cols, double value, DomainTag domain);

  int channels() const { return pixels_.channels(); }
  int rows() const { return pixels_.rows(); }
  int cols() const { return pixels_.cols(); }
  DomainTag domain() const noexcept { return domain_; }
  const Tensor& pixels() const noexcept { return pixels_; }
  double at(int c, int r, int col) const { return pixels_.at(c, r, col); }

  /// Same domain, new pixels.
  Image with_pixels(Tensor pixels) const { return Image(std::move(pixels), domain_); }

  friend bool operator==(const Image& a, const Image& b) {
    return a.domain_ == b.domain_ && bit_identical(a.pixels_, b.pixels_);
  }

 private:
  Tensor pixels_;
  DomainTag domain_;
};

/// Luma (Rec. 601 weights); single-channel images pass through.
Image to_grayscale(const Image& image);

struct Point {
  double row = 0.0;
  double col = 0.0;
};

struct Landmarks {
  Point left_eye;
  Point right_eye;
};

/// Where the eye centers land after alignment, as fractions of the output side.
struct CanonicalEyes {
  double row = 0.4;
  double left_col = 0.3;
  double right_col = 0.7;
};

/// p -> a*p + t on points written as complex numbers col + i*row.
struct SimilarityTransform {
  double a_re = 1.0, a_im = 0.0;
  double t_re = 0.0, t_im = 0.0;

  Point apply(Point p) const;
  Point invert(Point q) const;
};

SimilarityTransform alignment_transform(const Landmarks& lm, int out_size, const CanonicalEyes& eyes = {});

/// Rotates, scales and translates so the eye centers sit on the canonical
/// positions. Samples that fall outside the source are white.
Image align_face(const Image& image, const Landmarks& lm, int out_size, const CanonicalEyes& eyes = {});

struct AugmentConfig {
  int resize_to = 542;
  int crop_to = 512;
  double hflip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One realisation of the random augmentation, so a pseudo pair's two images
/// can be transformed identically.
struct AugmentDraw {
  int row_offset = 0;
  int col_offset = 0;
  bool flip = false;
};

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng);
Image apply_augment(const Image& image, const AugmentConfig& cfg, const AugmentDraw& draw);
/// Rescale, random crop, random horizontal mirror.
Image augment(const Image& image, const AugmentConfig& cfg, Rng& rng);

/// Bilinear with half-pixel centers; resizing to the same size is the identity.
Image resize_bilinear(const Image& image, int rows, int cols);
Image hflip(const Image& image);
Image crop(const Image& image, int row, int col, int rows, int cols);

/// Mean over 2x2 blocks. Works on any even-sized grid, including ones smaller
/// than a valid Image.
Tensor downsample2x(const Tensor& pixels);
Image downsample2x(const Image& image);

/// 8-bit PNG, gray or RGB; intensities map linearly to [0,1].
Image read_png(const std::filesystem::path& path, DomainTag domain);
void write_png(const Image& image, const std::filesystem::path& path);

/// JSON object {"left_eye": [row, col], "right_eye": [row, col]}.
Landmarks read_landmarks(const std::filesystem::path& path);
void write_landmarks(const Landmarks& lm, const std::filesystem::path& path);

}  // namespace srender
