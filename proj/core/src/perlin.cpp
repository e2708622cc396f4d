#include "memseg/perlin.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace memseg {
namespace {

inline double fade(double t) {
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

}  // namespace

PerlinField gen_perlin(std::int64_t height, std::int64_t width, std::int64_t freq_y,
                       std::int64_t freq_x, std::uint64_t seed) {
  if (freq_y < 1 || freq_x < 1 || height < freq_y || width < freq_x) {
    throw Error("gen_perlin: need 1 <= freq <= extent on both axes");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const std::int64_t gw = freq_x + 1;
  std::vector<double> gx((freq_y + 1) * gw);
  std::vector<double> gy(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double a = angle(rng);
    gx[i] = std::cos(a);
    gy[i] = std::sin(a);
  }
  auto dot = [&](std::int64_t cy, std::int64_t cx, double dy, double dx) {
    const std::int64_t k = cy * gw + cx;
    return gx[k] * dx + gy[k] * dy;
  };

  auto values = torch::empty({height, width}, torch::kFloat32);
  auto acc = values.accessor<float, 2>();
  for (std::int64_t r = 0; r < height; ++r) {
    // Exact rational position keeps lattice points exact when the extent
    // is a multiple of the frequency.
    const std::int64_t ny = r * freq_y;
    const std::int64_t cy = ny / height;
    const double ty = static_cast<double>(ny - cy * height) / static_cast<double>(height);
    const double v = fade(ty);
    for (std::int64_t c = 0; c < width; ++c) {
      const std::int64_t nx = c * freq_x;
      const std::int64_t cx = nx / width;
      const double tx = static_cast<double>(nx - cx * width) / static_cast<double>(width);
      const double u = fade(tx);
      const double n00 = dot(cy, cx, ty, tx);
      const double n01 = dot(cy, cx + 1, ty, tx - 1.0);
      const double n10 = dot(cy + 1, cx, ty - 1.0, tx);
      const double n11 = dot(cy + 1, cx + 1, ty - 1.0, tx - 1.0);
      const double top = n00 + u * (n01 - n00);
      const double bottom = n10 + u * (n11 - n10);
      acc[r][c] = static_cast<float>(std::numbers::sqrt2 * (top + v * (bottom - top)));
    }
  }
  return {values, freq_y, freq_x, seed};
}

BinaryMask binarize_perlin(const PerlinField& field, double threshold) {
  return BinaryMask((field.values > threshold).to(torch::kFloat32), MaskRole::kPerlin);
}

}  // namespace memseg
