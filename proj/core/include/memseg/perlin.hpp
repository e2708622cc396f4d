#pragma once

#include "memseg/common.hpp"

namespace memseg {

/// Two-dimensional gradient noise sampled on an HxW pixel grid.
/// `freq_y` x `freq_x` lattice cells span the image; with unit-length
/// gradients the field is bounded by sqrt(2)/2 in magnitude and vanishes
/// exactly on lattice points.
struct PerlinField {
  torch::Tensor values;  // HxW float32
  std::int64_t freq_y = 1;
  std::int64_t freq_x = 1;
  std::uint64_t seed = 0;
};

/// Classic Perlin noise with random unit gradients and quintic fade, scaled
/// by sqrt(2) so the range is [-1, 1].
/// Deterministic per `seed`. Requires 1 <= freq <= extent on each axis.
PerlinField gen_perlin(std::int64_t height, std::int64_t width, std::int64_t freq_y,
                       std::int64_t freq_x, std::uint64_t seed);

/// Mask M_P: 1 where the field is strictly greater than `threshold`.
BinaryMask binarize_perlin(const PerlinField& field, double threshold);

}  // namespace memseg
