#include "srender/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "srender/error.hpp"

namespace srender {

namespace {

constexpr double kPi = 3.14159265358979323846;

double stripe(double coord, double period, double phase, double duty) {
  const double t = std::fmod(coord + phase, period);
  return (t < 0 ? t + period : t) < duty * period ? 1.0 : 0.0;
}

struct FaceParams {
  double cx, cy, half_w, half_h;
  double eye_dx, eye_r, brow_gap, brow_len, brow_thick;
  double hair_line, hair_angle, hair_period;
  double mouth_y, mouth_w, ear_r;
  double skin_tone;
};

FaceParams draw_identity(Rng& rng, int size) {
  const double s = size;
  FaceParams p{};
  p.cx = s * rng.uniform(0.47, 0.53);
  p.cy = s * rng.uniform(0.5, 0.56);
  p.half_w = s * rng.uniform(0.25, 0.33);
  p.half_h = s * rng.uniform(0.34, 0.42);
  p.eye_dx = s * rng.uniform(0.1, 0.16);
  p.eye_r = s * rng.uniform(0.035, 0.055);
  p.brow_gap = s * rng.uniform(0.05, 0.08);
  p.brow_len = s * rng.uniform(0.06, 0.1);
  p.brow_thick = s * rng.uniform(0.015, 0.03);
  p.hair_line = rng.uniform(0.2, 0.45);
  p.hair_angle = rng.uniform(-1.2, 1.2);
  p.hair_period = s * rng.uniform(0.03, 0.06);
  p.mouth_y = s * rng.uniform(0.18, 0.25);
  p.mouth_w = s * rng.uniform(0.08, 0.14);
  p.ear_r = s * rng.uniform(0.04, 0.07);
  p.skin_tone = rng.uniform(0.82, 0.95);
  return p;
}

}  // namespace

Image texture_patch(Texture kind, int size, Rng& rng) {
  const double dark = rng.uniform(0.0, 0.4);
  const double light = rng.uniform(0.65, 1.0);
  const double period = rng.uniform(4.0, 8.0);
  const double phase = rng.uniform(0.0, period);
  const double duty = rng.uniform(0.3, 0.6);
  const bool flip = rng.bernoulli(0.5);
  const double jitter = 0.04;
  Tensor px = Tensor::chw(1, size, size);
  const double flat = rng.uniform(0.1, 0.95);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      double ink = 0.0;
      switch (kind) {
        case Texture::constant: break;
        case Texture::horizontal: ink = stripe(r, period, phase, duty); break;
        case Texture::vertical: ink = stripe(c, period, phase, duty); break;
        case Texture::diagonal: ink = stripe(flip ? r + c : r - c + size, period * 1.4, phase, duty); break;
        case Texture::dots: {
          const double dr = std::fmod(r + phase, period + 2.0) - (period + 2.0) / 2.0;
          const double dc = std::fmod(c + phase, period + 2.0) - (period + 2.0) / 2.0;
          ink = dr * dr + dc * dc <= (period / 4.0) * (period / 4.0) ? 1.0 : 0.0;
          break;
        }
        case Texture::checker: {
          const int cell = static_cast<int>(period / 2.0) + 1;
          ink = ((r + static_cast<int>(phase)) / cell + (c + static_cast<int>(phase)) / cell) % 2 ? 1.0 : 0.0;
          break;
        }
        case Texture::noise: ink = rng.uniform(); break;
      }
      double v = kind == Texture::constant ? flat : light + (dark - light) * ink;
      v += rng.uniform(-jitter, jitter);
      px.at(0, r, c) = std::clamp(v, 0.0, 1.0);
    }
  return Image(std::move(px), DomainTag::sketch);
}

std::vector<StrokePatch> texture_dataset(int per_class, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StrokePatch> out;
  for (int k = 0; k < kTextures; ++k)
    for (int i = 0; i < per_class; ++i)
      out.push_back(StrokePatch{texture_patch(static_cast<Texture>(k), size, rng), static_cast<StrokeLabel>(k), 0, 0});
  return out;
}

std::vector<SyntheticFace> synthetic_faces(int identities, int per_identity, int size, std::uint64_t seed) {
  if (identities < 1 || per_identity < 1 || size < 16) throw Error(Errc::BadConfig, "invalid synthetic face settings");
  std::vector<SyntheticFace> faces;
  for (int id = 0; id < identities; ++id) {
    Rng id_rng(seed, static_cast<std::uint64_t>(id));
    const FaceParams base = draw_identity(id_rng, size);
    char identity[32];
    std::snprintf(identity, sizeof identity, "id%03d", id);
    for (int k = 0; k < per_identity; ++k) {
      Rng rng(seed, 0x10000ull + static_cast<std::uint64_t>(id) * 1000 + static_cast<std::uint64_t>(k));
      FaceParams p = base;
      p.cx += rng.uniform(-1.0, 1.0) * size / 64.0;
      p.cy += rng.uniform(-1.0, 1.0) * size / 64.0;
      const double eye_y = p.cy - 0.2 * p.half_h * 2.0 / 1.6;
      const double left_x = p.cx - p.eye_dx, right_x = p.cx + p.eye_dx;
      const double hair_y = p.cy - p.half_h * (1.0 - p.hair_line);
      const double mouth_y = p.cy + p.mouth_y;
      const double ring = std::max(1.5, size / 64.0 * 1.5);
      const double ca = std::cos(p.hair_angle), sa = std::sin(p.hair_angle);

      SemanticMask mask(size, size);
      Tensor px = Tensor::chw(1, size, size, 1.0);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          const double x = c + 0.5, y = r + 0.5;
          const double u = (x - p.cx) / p.half_w, w = (y - p.cy) / p.half_h;
          const double rho = std::sqrt(u * u + w * w);
          const double edge = (rho - 1.0) * std::min(p.half_w, p.half_h);
          Region reg = Region::background;
          double v = 1.0;
          const auto in_ear = [&](double ex) {
            const double dx = (x - ex) / (p.ear_r * 0.7), dy = (y - eye_y - p.ear_r * 0.5) / p.ear_r;
            return dx * dx + dy * dy <= 1.0;
          };
          if (in_ear(p.cx - p.half_w - p.ear_r * 0.4) || in_ear(p.cx + p.half_w + p.ear_r * 0.4)) {
            reg = Region::ear;
            v = 0.55 + 0.35 * stripe(x + y * 0.3, 3.0, 0.0, 0.5);
          }
          const bool crown = y < hair_y && rho <= 1.15;
          if (std::abs(edge) <= ring && !crown) {
            reg = Region::boundary;
            v = 0.15;
          } else if (crown) {
            reg = Region::hair;
            v = 0.15 + 0.6 * stripe(x * ca + y * sa, p.hair_period, 0.0, 0.45);
          } else if (rho < 1.0) {
            reg = Region::skin;
            v = p.skin_tone;
            for (const double ex : {left_x, right_x}) {
              const double dx = x - ex, dy = y - eye_y;
              const double by = eye_y - p.brow_gap;
              if (dx * dx + dy * dy <= p.eye_r * p.eye_r) {
                reg = Region::eye;
                v = dx * dx + dy * dy <= 0.3 * p.eye_r * p.eye_r ? 0.05 : 0.45;
              } else if (std::abs(y - by) <= p.brow_thick && std::abs(dx) <= p.brow_len) {
                reg = Region::eye_brow;
                v = 0.2 + 0.2 * stripe(x, 2.0, 0.0, 0.5);
              }
            }
            const double my = (y - mouth_y) / (p.mouth_w * 0.35), mx = (x - p.cx) / p.mouth_w;
            if (mx * mx + my * my <= 1.0) {
              reg = Region::clips;
              v = 0.35 + 0.3 * stripe(y, 2.0, 0.0, 0.5);
            }
          }
          v += rng.uniform(-0.03, 0.03);
          px.at(0, r, c) = std::clamp(v, 0.0, 1.0);
          mask.set(r, c, reg);
        }
      char sample[48];
      std::snprintf(sample, sizeof sample, "%s_%02d", identity, k);
      faces.push_back(SyntheticFace{sample, identity, Image(std::move(px), DomainTag::sketch), std::move(mask),
                                    Landmarks{{eye_y, left_x}, {eye_y, right_x}}});
    }
  }
  return faces;
}

}  // namespace srender
