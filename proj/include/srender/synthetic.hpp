#pragma once

#include <string>
#include <vector>

#include "srender/training.hpp"

namespace srender {

/// Seven procedural texture families, one per stroke label index.
enum class Texture { constant, horizontal, vertical, diagonal, dots, checker, noise };
inline constexpr int kTextures = 7;

Image texture_patch(Texture kind, int size, Rng& rng);

/// per_class patches of every texture, labelled by the texture index.
std::vector<StrokePatch> texture_dataset(int per_class, int size, std::uint64_t seed);

struct SyntheticFace {
  std::string id;        // "<identity>_<sample>"
  std::string identity;
  Image sketch;
  SemanticMask mask;
  Landmarks landmarks;
};

/// Procedural pencil-style face sketches: each identity has its own face
/// shape, feature placement and hair texture; samples of one identity differ
/// by small shifts and pencil noise.
std::vector<SyntheticFace> synthetic_faces(int identities, int per_identity, int size, std::uint64_t seed);

}  // namespace srender
