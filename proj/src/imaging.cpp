#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "srender/error.hpp"
#include "srender/image.hpp"

namespace srender {

namespace {

constexpr int kMinSide = 8;

double sample_bilinear(const Tensor& px, int c, double r, double col) {
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(col));
  const int r1 = std::min(r0 + 1, px.rows() - 1);
  const int c1 = std::min(c0 + 1, px.cols() - 1);
  const double fr = r - r0;
  const double fc = col - c0;
  const double top = px.at(c, r0, c0) + fc * (px.at(c, r0, c1) - px.at(c, r0, c0));
  const double bottom = px.at(c, r1, c0) + fc * (px.at(c, r1, c1) - px.at(c, r1, c0));
  return std::clamp(top + fr * (bottom - top), 0.0, 1.0);
}

void check_landmark(const Point& p, const Image& image, const char* name) {
  if (!(p.row >= 0.0 && p.col >= 0.0 && p.row <= image.rows() - 1 && p.col <= image.cols() - 1)) {
    throw Error(Errc::OutOfBounds, std::string(name) + " lies outside the image");
  }
}

}  // namespace

std::string_view domain_name(DomainTag tag) noexcept {
  switch (tag) {
    case DomainTag::photo: return "photo";
    case DomainTag::sketch: return "sketch";
    case DomainTag::line_drawing: return "line_drawing";
  }
  return "unknown";
}

Image::Image(Tensor pixels, DomainTag domain) : pixels_(std::move(pixels)), domain_(domain) {
  if (pixels_.rank() != 3 || (pixels_.channels() != 1 && pixels_.channels() != 3)) {
    throw Error(Errc::InvalidImage, "expected 1 or 3 channels, got " + pixels_.shape_string());
  }
  if (pixels_.rows() < kMinSide || pixels_.cols() < kMinSide) {
    throw Error(Errc::InvalidImage, "image smaller than 8x8: " + pixels_.shape_string());
  }
  for (double v : pixels_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidImage, "intensity outside [0,1]");
  }
}

Image Image::filled(int channels, int rows, int cols, double value, DomainTag domain) {
  return Image(Tensor::chw(channels, rows, cols, value), domain);
}

Image to_grayscale(const Image& image) {
  if (image.channels() == 1) return image;
  Tensor out = Tensor::chw(1, image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c)
      out.at(0, r, c) = std::clamp(
          0.299 * image.at(0, r, c) + 0.587 * image.at(1, r, c) + 0.114 * image.at(2, r, c), 0.0, 1.0);
  return Image(std::move(out), image.domain());
}

Point SimilarityTransform::apply(Point p) const {
  // (a_re + i a_im)(col + i row) + t
  return Point{a_im * p.col + a_re * p.row + t_im, a_re * p.col - a_im * p.row + t_re};
}

Point SimilarityTransform::invert(Point q) const {
  const double x = q.col - t_re;
  const double y = q.row - t_im;
  const double n = a_re * a_re + a_im * a_im;
  // (x + i y) * conj(a) / |a|^2
  return Point{(y * a_re - x * a_im) / n, (x * a_re + y * a_im) / n};
}

SimilarityTransform alignment_transform(const Landmarks& lm, int out_size, const CanonicalEyes& eyes) {
  const double s = static_cast<double>(out_size);
  const Point d1{eyes.row * s, eyes.left_col * s};
  const Point d2{eyes.row * s, eyes.right_col * s};
  const double sx = lm.right_eye.col - lm.left_eye.col;
  const double sy = lm.right_eye.row - lm.left_eye.row;
  const double dx = d2.col - d1.col;
  const double dy = d2.row - d1.row;
  const double den = sx * sx + sy * sy;
  if (den == 0.0) throw Error(Errc::CoincidentLandmarks, "left and right eye coincide");
  SimilarityTransform t;
  t.a_re = (dx * sx + dy * sy) / den;
  t.a_im = (dy * sx - dx * sy) / den;
  t.t_re = d1.col - (t.a_re * lm.left_eye.col - t.a_im * lm.left_eye.row);
  t.t_im = d1.row - (t.a_im * lm.left_eye.col + t.a_re * lm.left_eye.row);
  return t;
}

Image align_face(const Image& image, const Landmarks& lm, int out_size, const CanonicalEyes& eyes) {
  if (out_size < kMinSide) throw Error(Errc::BadConfig, "out_size must be at least 8");
  if (lm.left_eye.row == lm.right_eye.row && lm.left_eye.col == lm.right_eye.col) {
    throw Error(Errc::CoincidentLandmarks, "left and right eye coincide");
  }
  check_landmark(lm.left_eye, image, "left_eye");
  check_landmark(lm.right_eye, image, "right_eye");
  const SimilarityTransform t = alignment_transform(lm, out_size, eyes);
  const Tensor& src = image.pixels();
  Tensor out = Tensor::chw(image.channels(), out_size, out_size, 1.0);
  const double max_r = image.rows() - 1, max_c = image.cols() - 1;
  for (int r = 0; r < out_size; ++r) {
    for (int c = 0; c < out_size; ++c) {
      const Point p = t.invert(Point{static_cast<double>(r), static_cast<double>(c)});
      if (!(p.row >= 0.0 && p.col >= 0.0 && p.row <= max_r && p.col <= max_c)) continue;
      for (int ch = 0; ch < image.channels(); ++ch) out.at(ch, r, c) = sample_bilinear(src, ch, p.row, p.col);
    }
  }
  return image.with_pixels(std::move(out));
}

void AugmentConfig::validate() const {
  if (resize_to <= 0 || crop_to <= 0) throw Error(Errc::BadConfig, "augment sizes must be positive");
  if (crop_to > resize_to) throw Error(Errc::BadConfig, "crop_to exceeds resize_to");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw Error(Errc::BadConfig, "hflip_prob outside [0,1]");
}

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto span = static_cast<std::uint64_t>(cfg.resize_to - cfg.crop_to + 1);
  AugmentDraw d;
  d.row_offset = static_cast<int>(rng.below(span));
  d.col_offset = static_cast<int>(rng.below(span));
  d.flip = rng.bernoulli(cfg.hflip_prob);
  return d;
}

Image apply_augment(const Image& image, const AugmentConfig& cfg, const AugmentDraw& draw) {
  cfg.validate();
  if (image.rows() != image.cols() || image.rows() < cfg.crop_to) {
    throw Error(Errc::BadShape, "augment expects a square image at least crop_to on a side");
  }
  const Image resized = resize_bilinear(image, cfg.resize_to, cfg.resize_to);
  Image out = crop(resized, draw.row_offset, draw.col_offset, cfg.crop_to, cfg.crop_to);
  return draw.flip ? hflip(out) : out;
}

Image augment(const Image& image, const AugmentConfig& cfg, Rng& rng) {
  return apply_augment(image, cfg, draw_augment(cfg, rng));
}

Image resize_bilinear(const Image& image, int rows, int cols) {
  if (rows == image.rows() && cols == image.cols()) return image;
  Tensor out = Tensor::chw(image.channels(), rows, cols);
  const double sr = static_cast<double>(image.rows()) / rows;
  const double sc = static_cast<double>(image.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sr - 0.5, 0.0, image.rows() - 1.0);
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sc - 0.5, 0.0, image.cols() - 1.0);
      for (int ch = 0; ch < image.channels(); ++ch) out.at(ch, r, c) = sample_bilinear(image.pixels(), ch, y, x);
    }
  }
  return image.with_pixels(std::move(out));
}

Image hflip(const Image& image) {
  Tensor out(image.pixels().dims());
  for (int ch = 0; ch < image.channels(); ++ch)
    for (int r = 0; r < image.rows(); ++r)
      for (int c = 0; c < image.cols(); ++c) out.at(ch, r, c) = image.at(ch, r, image.cols() - 1 - c);
  return image.with_pixels(std::move(out));
}

Image crop(const Image& image, int row, int col, int rows, int cols) {
  if (row < 0 || col < 0 || row + rows > image.rows() || col + cols > image.cols()) {
    throw Error(Errc::OutOfBounds, "crop window outside the image");
  }
  Tensor out = Tensor::chw(image.channels(), rows, cols);
  for (int ch = 0; ch < image.channels(); ++ch)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(ch, r, c) = image.at(ch, row + r, col + c);
  return image.with_pixels(std::move(out));
}

Tensor downsample2x(const Tensor& px) {
  if (px.rank() != 3) throw Error(Errc::BadShape, "downsample2x expects (channels, rows, cols)");
  if (px.rows() % 2 || px.cols() % 2) throw Error(Errc::OddDimensions, "downsample2x of " + px.shape_string());
  Tensor out = Tensor::chw(px.channels(), px.rows() / 2, px.cols() / 2);
  for (int ch = 0; ch < out.channels(); ++ch)
    for (int r = 0; r < out.rows(); ++r)
      for (int c = 0; c < out.cols(); ++c)
        out.at(ch, r, c) = 0.25 * (px.at(ch, 2 * r, 2 * c) + px.at(ch, 2 * r, 2 * c + 1) +
                                   px.at(ch, 2 * r + 1, 2 * c) + px.at(ch, 2 * r + 1, 2 * c + 1));
  return out;
}

Image downsample2x(const Image& image) { return image.with_pixels(downsample2x(image.pixels())); }

Image read_png(const std::filesystem::path& path, DomainTag domain) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(Errc::Io, "cannot read PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(Errc::Io, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int rows = static_cast<int>(img.height), cols = static_cast<int>(img.width);
  Tensor px = Tensor::chw(channels, rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int ch = 0; ch < channels; ++ch)
        px.at(ch, r, c) = buf[(static_cast<std::size_t>(r) * cols + c) * channels + ch] / 255.0;
  return Image(std::move(px), domain);
}

void write_png(const Image& image, const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.cols());
  img.height = static_cast<png_uint_32>(image.rows());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = image.channels();
  std::vector<png_byte> buf(static_cast<std::size_t>(image.rows()) * image.cols() * channels);
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c)
      for (int ch = 0; ch < channels; ++ch)
        buf[(static_cast<std::size_t>(r) * image.cols() + c) * channels + ch] =
            static_cast<png_byte>(std::lround(image.at(ch, r, c) * 255.0));
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error(Errc::Io, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

Landmarks read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open landmarks " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    auto point = [&](const char* key) {
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 2) throw Error(Errc::ParseError, std::string(key) + " must be [row, col]");
      return Point{a[0].get<double>(), a[1].get<double>()};
    };
    return Landmarks{point("left_eye"), point("right_eye")};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_landmarks(const Landmarks& lm, const std::filesystem::path& path) {
  nlohmann::json j;
  j["left_eye"] = {lm.left_eye.row, lm.left_eye.col};
  j["right_eye"] = {lm.right_eye.row, lm.right_eye.col};
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write landmarks " + path.string());
  out << j.dump() << '\n';
}

}  // namespace srender
