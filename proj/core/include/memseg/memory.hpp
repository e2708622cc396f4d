#pragma once

#include <string>
#include <vector>

#include "memseg/dataset.hpp"
#include "memseg/encoder.hpp"

namespace memseg {

/// Frozen-stage features of N normal images, stacked as N x C x H x W per
/// scale. Treated as immutable once built.
struct MemoryPool {
  torch::Tensor f1;
  torch::Tensor f2;
  torch::Tensor f3;
  std::vector<std::string> sources;
  std::uint64_t seed = 0;

  std::int64_t size() const { return f1.defined() ? f1.size(0) : 0; }
  bool empty() const { return size() == 0; }
};

/// Per-sample elementwise difference |MI_i - II| at the three scales.
struct DifferencePyramid {
  torch::Tensor d1;
  torch::Tensor d2;
  torch::Tensor d3;
};

/// Best difference information DI* for a batch (B x C x H x W per scale)
/// and the memory index chosen for each image and scale (B x 3, int64).
/// With the default global selection all three columns are equal.
struct DifferenceInfo {
  torch::Tensor d1;
  torch::Tensor d2;
  torch::Tensor d3;
  torch::Tensor index;
};

/// CI_n = [II_n, DI*_n] along channels (input features first).
struct ConcatenatedInfo {
  torch::Tensor c1;
  torch::Tensor c2;
  torch::Tensor c3;
};

/// Spatial attention maps as B x 1 x H x W tensors at scales 1..3.
struct SpatialAttentionMaps {
  torch::Tensor m1;
  torch::Tensor m2;
  torch::Tensor m3;

  static SpatialAttentionMaps ones_like(const DifferenceInfo& di);
};

struct MemoryOptions {
  /// Select the memory sample per scale instead of once across all scales.
  bool per_scale_argmin = false;
};

/// Stacks frozen features of the given images (each 3xHxW).
MemoryPool pool_from_images(Encoder& encoder, const std::vector<Image>& images,
                            std::vector<std::string> sources = {}, std::uint64_t seed = 0);

/// Samples `n` train images uniformly without replacement (seeded shuffle of
/// the sorted index) and stores their frozen pyramids.
MemoryPool build_pool(Encoder& encoder, const DatasetIndex& train, std::int64_t n,
                      std::int64_t image_size, std::uint64_t seed);

/// Indices chosen by build_pool for a train set of `count` items.
std::vector<std::size_t> sample_pool_indices(std::size_t count, std::int64_t n, std::uint64_t seed);

/// One DifferencePyramid per memory sample; each holds |MI_i - II| with the
/// batch shape of `input`.
std::vector<DifferencePyramid> difference_all(const MemoryPool& pool, const FeaturePyramid& input);

/// Picks, per batch element, the candidate with the smallest sum of all
/// elements over the three scales (lowest index on ties).
DifferenceInfo best_difference(const std::vector<DifferencePyramid>& candidates,
                               const MemoryOptions& options = {});

/// Streaming equivalent of best_difference(difference_all(pool, input)) that
/// keeps one candidate in memory at a time.
DifferenceInfo best_difference(const MemoryPool& pool, const FeaturePyramid& input,
                               const MemoryOptions& options = {});

ConcatenatedInfo concat_info(const FeaturePyramid& input, const DifferenceInfo& di);

/// M3 = mean_c(d3); M2 = mean_c(d2) * up(M3); M1 = mean_c(d1) * up(M2), with
/// bilinear x2 upsampling (half-pixel centers).
SpatialAttentionMaps attention_maps(const DifferenceInfo& di);

/// Bilinear resize to (height, width), half-pixel centers, no corner alignment.
torch::Tensor upsample_bilinear(const torch::Tensor& x, std::int64_t height, std::int64_t width);

}  // namespace memseg
