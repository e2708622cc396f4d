#pragma once

#include <array>

#include "memseg/memory.hpp"

namespace memseg {

/// Per-scale features after fusion (or after attention weighting).
struct FusedFeatures {
  torch::Tensor s1;
  torch::Tensor s2;
  torch::Tensor s3;
};

/// Coordinate attention: pools along each spatial axis, mixes the two
/// descriptors through a shared 1x1 bottleneck (batch norm + hard swish) and
/// produces sigmoid gates per row and per column. Output shape equals input.
class CoordAttentionImpl : public torch::nn::Module {
 public:
  CoordAttentionImpl(std::int64_t channels, std::int64_t reduction);

  torch::Tensor forward(const torch::Tensor& x);

  /// Row gates (B x C x H x 1) and column gates (B x C x 1 x W), in (0,1).
  std::pair<torch::Tensor, torch::Tensor> gates(const torch::Tensor& x);

 private:
  torch::nn::Conv2d reduce_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
  torch::nn::Conv2d expand_h_{nullptr};
  torch::nn::Conv2d expand_w_{nullptr};
};
TORCH_MODULE(CoordAttention);

struct FusionOptions {
  /// Channel count of CI at scales 1..3 (twice the encoder's).
  std::array<std::int64_t, 3> channels{128, 256, 512};
  std::int64_t ca_reduction = 16;
  bool coordinate_attention = true;
  bool multi_scale = true;
};

/// Multi-scale feature fusion:
///   h_n = CA(conv3x3(CI_n))
///   g3 = h3,  g2 = h2 + conv1x1(up(g3)),  g1 = h1 + conv1x1(up(g2))
/// Conv biases start at zero. Disabling CA makes it the identity; disabling
/// multi-scale drops the cross-scale terms (g_n = h_n).
class MsffImpl : public torch::nn::Module {
 public:
  explicit MsffImpl(FusionOptions options);

  FusedFeatures forward(const ConcatenatedInfo& ci);

  const FusionOptions& options() const { return options_; }
  void set_switches(bool coordinate_attention, bool multi_scale) {
    options_.coordinate_attention = coordinate_attention;
    options_.multi_scale = multi_scale;
  }

  torch::nn::Conv2d& conv(int scale) { return conv_[scale]; }
  torch::nn::Conv2d& align(int scale) { return align_[scale]; }

  /// Zeroes the cross-scale projections, so the module starts as g_n = h_n.
  void reset_cross_scale();

 private:
  FusionOptions options_;
  std::array<torch::nn::Conv2d, 3> conv_{nullptr, nullptr, nullptr};
  std::array<CoordAttention, 3> ca_{nullptr, nullptr, nullptr};
  // align_[0]: scale 2 -> 1, align_[1]: scale 3 -> 2.
  std::array<torch::nn::Conv2d, 2> align_{nullptr, nullptr};
};
TORCH_MODULE(Msff);

/// w_n = g_n * M_n, maps broadcast across channels.
FusedFeatures apply_spatial_attention(const FusedFeatures& fused, const SpatialAttentionMaps& maps);

}  // namespace memseg
