#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "memseg/common.hpp"
#include "memseg/dataset.hpp"

namespace memseg {

enum class ToyShape { kRectangle, kTriangle, kLightning, kStar, kHeart, kCircle };
inline constexpr std::array<ToyShape, 6> kAllToyShapes{ToyShape::kRectangle, ToyShape::kTriangle,
                                                       ToyShape::kLightning, ToyShape::kStar,
                                                       ToyShape::kHeart,     ToyShape::kCircle};
std::string to_string(ToyShape shape);

/// Randomization ranges for painted toy anomalies. Sizes are fractions of
/// the image side (half-extent of the shape before aspect stretching).
struct ToySpec {
  std::int64_t count = 60;
  std::uint64_t seed = 0;
  std::int64_t image_size = 256;
  double min_size = 0.06;
  double max_size = 0.18;
  double min_aspect = 0.5;
  double max_aspect = 2.0;
  std::string category = "toy";
  std::string defect = "toy";
  /// Also copy every source normal into test/good.
  bool copy_normals = true;
};

struct ToyShapeInfo {
  ToyShape shape = ToyShape::kRectangle;
  std::array<int, 3> color_rgb{};
  double size_px = 0.0;
  double angle_deg = 0.0;
  double aspect = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
  std::int64_t mask_area = 0;
};

struct PaintedImage {
  Image image;
  BinaryMask mask;
  ToyShapeInfo info;
};

/// Paints one filled shape (no anti-aliasing) with a color that differs from
/// every source pixel it covers, so image and source differ exactly on the mask.
/// The source is quantized to 8 bits first.
PaintedImage paint_toy_shape(const Image& source, ToyShape shape, const ToySpec& spec, Rng& rng);

struct ToySample {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::filesystem::path source;
  ToyShapeInfo info;
};

struct ToysetLog {
  std::filesystem::path root;  // <out>/<category>
  std::vector<ToySample> samples;
  std::vector<std::filesystem::path> normals;
};

/// Writes an MVTec-style test split under <out>/<spec.category>:
///   test/<defect>/NNN.png, ground_truth/<defect>/NNN_mask.png, test/good/NNN.png
/// plus generation_log.csv. Shape kinds are drawn uniformly; sources cycle
/// through the normals in order. Deterministic per spec.seed.
ToysetLog gen_toyset(const DatasetIndex& normals, const ToySpec& spec,
                     const std::filesystem::path& out);

}  // namespace memseg
