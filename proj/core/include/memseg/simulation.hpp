#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memseg/common.hpp"
#include "memseg/perlin.hpp"
#include "memseg/texture.hpp"

namespace memseg {

/// Photometric/geometric jitter applied before the structural tile shuffle.
struct JitterConfig {
  bool enabled = true;
  double mirror_prob = 0.5;
  bool rotate = true;        // multiples of 90 degrees (180 only for non-square)
  double brightness = 0.3;   // multiplicative factor in [1-b, 1+b]
  double saturation = 0.3;   // factor in [1-s, 1+s]
  double hue = 0.1;          // shift in [-h, h] of a full turn
};

struct SimConfig {
  double perlin_threshold = 0.5;
  double delta_min = 0.15;
  double delta_max = 1.0;
  /// When set, overrides the sampled transparency factor.
  std::optional<double> fixed_delta;
  bool foreground_enhancement = false;
  std::int64_t grid_rows = 4;
  std::int64_t grid_cols = 8;
  /// Probability of structural (vs textural) noise for one sample.
  double structural_prob = 0.5;
  std::int64_t morph_kernel = 5;
  /// Perlin lattice frequency is 2^k per axis with k uniform in this range.
  int min_freq_exp = 1;
  int max_freq_exp = 5;
  int max_retries = 10;
  JitterConfig jitter;

  /// Throws memseg::Error on out-of-range values or when the tile grid does
  /// not divide height x width.
  void validate(std::int64_t height, std::int64_t width) const;
};

enum class NoiseKind { kTextural, kStructural };
std::string to_string(NoiseKind kind);

struct SimulatedSample {
  Image image;   // I_A
  BinaryMask mask;
  double delta = 0.0;
  NoiseKind kind = NoiseKind::kTextural;
  Image noise;   // I_n, kept for inspection and invariant checks
  std::int64_t attempts = 1;
};

/// Foreground mask M_I: Otsu binarization of the grayscale image, polarity
/// chosen so that the 1-region touches the border less, then opening and
/// closing with a square kernel. A constant image yields an all-one mask
/// and a warning on stderr.
BinaryMask foreground_mask(const Image& image, const SimConfig& cfg);

/// M = M_P * M_I, or M_P when no foreground mask is given.
BinaryMask combine_masks(const BinaryMask& perlin, const BinaryMask* foreground);

/// Rearranges rows x cols equal tiles: output tile k is input tile perm[k]
/// (tiles numbered row-major).
Image shuffle_tiles(const Image& image, std::int64_t rows, std::int64_t cols,
                    const std::vector<std::int64_t>& perm);

/// Applies `jitter` (mirror, rotation, brightness, saturation, hue) to `image`.
Image jitter_image(const Image& image, const JitterConfig& jitter, Rng& rng);

/// Structural noise I_n: jitter followed by a uniformly random tile permutation.
Image make_structural_noise(const Image& image, std::int64_t rows, std::int64_t cols,
                            const JitterConfig& jitter, Rng& rng);

/// I'_n = delta (M . I_n) + (1 - delta) (M . I).
Image blend_noise_foreground(const Image& image, const Image& noise, const BinaryMask& mask,
                             double delta);

/// I_A = (1 - M) . I + I'_n.
Image compose_anomaly(const Image& image, const Image& noise_foreground, const BinaryMask& mask);

/// Full simulation: choose noise kind, build M from Perlin noise (and the
/// foreground when enabled), sample delta, blend and compose. Empty masks
/// are redrawn up to cfg.max_retries times, then "degenerate mask" is thrown.
SimulatedSample simulate(const Image& image, const SimConfig& cfg, const TextureSource& textures,
                         Rng& rng);

}  // namespace memseg
