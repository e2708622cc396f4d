#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "memseg/common.hpp"

namespace memseg {

/// Where textural anomaly noise comes from. Directory mode draws crops from
/// a folder of texture images (e.g. a local copy of DTD). Procedural mode
/// synthesizes textures and needs no data; it is a stand-in and is not
/// statistically equivalent to DTD.
struct TextureSource {
  enum class Mode { kDirectory, kProcedural };

  Mode mode = Mode::kProcedural;
  std::filesystem::path directory;
  std::uint64_t seed = 0;

  static TextureSource procedural(std::uint64_t seed) { return {Mode::kProcedural, {}, seed}; }
  static TextureSource from_directory(std::filesystem::path dir, std::uint64_t seed = 0) {
    return {Mode::kDirectory, std::move(dir), seed};
  }
};

/// Draws one size x size texture. Directory mode picks a random file and a
/// random square crop (50-100% of the short side) resized bilinearly;
/// procedural mode calls procedural_texture with a seed drawn from `rng`.
Image sample_texture(const TextureSource& src, std::int64_t size, Rng& rng);

/// Random mixture of sinusoidal gratings, a rotated checker field and
/// smoothed value noise, normalized to [0,1]. Pure function of `seed`.
Image procedural_texture(std::int64_t size, std::uint64_t seed);

/// One image of a stationary synthetic "normal" category: a crop of a large
/// texture fixed by `category_seed`, with a small photometric jitter drawn
/// from `sample_seed`. Used to build hermetic training sets.
Image procedural_category_sample(std::int64_t size, std::uint64_t category_seed,
                                 std::uint64_t sample_seed);

}  // namespace memseg
