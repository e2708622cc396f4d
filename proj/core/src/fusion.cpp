#include "memseg/fusion.hpp"

namespace nn = torch::nn;

namespace memseg {

CoordAttentionImpl::CoordAttentionImpl(std::int64_t channels, std::int64_t reduction) {
  if (reduction < 1) {
    throw Error("coordinate attention: reduction must be >= 1");
  }
  const std::int64_t mid = std::max<std::int64_t>(8, channels / reduction);
  reduce_ = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(channels, mid, 1)));
  bn_ = register_module("bn", nn::BatchNorm2d(mid));
  expand_h_ = register_module("expand_h", nn::Conv2d(nn::Conv2dOptions(mid, channels, 1)));
  expand_w_ = register_module("expand_w", nn::Conv2d(nn::Conv2dOptions(mid, channels, 1)));
}

std::pair<torch::Tensor, torch::Tensor> CoordAttentionImpl::gates(const torch::Tensor& x) {
  const auto h = x.size(2);
  const auto w = x.size(3);
  auto pooled_h = x.mean(3, true);                      // B C H 1
  auto pooled_w = x.mean(2, true).permute({0, 1, 3, 2});  // B C W 1
  auto y = torch::cat({pooled_h, pooled_w}, 2);
  y = torch::hardswish(bn_(reduce_(y)));
  auto parts = y.split_with_sizes({h, w}, 2);
  auto gate_h = torch::sigmoid(expand_h_(parts[0]));
  auto gate_w = torch::sigmoid(expand_w_(parts[1].permute({0, 1, 3, 2})));
  return {gate_h, gate_w};
}

torch::Tensor CoordAttentionImpl::forward(const torch::Tensor& x) {
  auto [gate_h, gate_w] = gates(x);
  return x * gate_h * gate_w;
}

MsffImpl::MsffImpl(FusionOptions options) : options_(options) {
  for (int s = 0; s < 3; ++s) {
    const auto c = options_.channels[s];
    conv_[s] = register_module("conv" + std::to_string(s + 1),
                               nn::Conv2d(nn::Conv2dOptions(c, c, 3).padding(1)));
    ca_[s] = register_module("ca" + std::to_string(s + 1),
                             CoordAttention(c, options_.ca_reduction));
  }
  for (int s = 0; s < 2; ++s) {
    align_[s] = register_module(
        "align" + std::to_string(s + 1),
        nn::Conv2d(nn::Conv2dOptions(options_.channels[s + 1], options_.channels[s], 1)));
  }
}

void MsffImpl::reset_cross_scale() {
  torch::NoGradGuard no_grad;
  for (auto& align : align_) {
    align->weight.zero_();
    align->bias.zero_();
  }
}

FusedFeatures MsffImpl::forward(const ConcatenatedInfo& ci) {
  const std::array<const torch::Tensor*, 3> inputs{&ci.c1, &ci.c2, &ci.c3};
  std::array<torch::Tensor, 3> h;
  for (int s = 0; s < 3; ++s) {
    if (inputs[s]->dim() != 4 || inputs[s]->size(1) != options_.channels[s]) {
      throw Error("msff: expected " + std::to_string(options_.channels[s]) +
                  " channels at scale " + std::to_string(s + 1));
    }
    h[s] = conv_[s](*inputs[s]);
    if (options_.coordinate_attention) {
      h[s] = ca_[s](h[s]);
    }
  }
  if (!options_.multi_scale) {
    return {h[0], h[1], h[2]};
  }
  auto g3 = h[2];
  auto g2 = h[1] + align_[1](upsample_bilinear(g3, h[1].size(2), h[1].size(3)));
  auto g1 = h[0] + align_[0](upsample_bilinear(g2, h[0].size(2), h[0].size(3)));
  return {g1, g2, g3};
}

FusedFeatures apply_spatial_attention(const FusedFeatures& fused, const SpatialAttentionMaps& maps) {
  auto weigh = [](const torch::Tensor& g, const torch::Tensor& m, const char* scale) {
    if (m.dim() != 4 || m.size(1) != 1 || m.size(0) != g.size(0) || m.size(2) != g.size(2) ||
        m.size(3) != g.size(3)) {
      throw Error(std::string("spatial attention: map size mismatch at scale ") + scale);
    }
    return g * m;
  };
  return {weigh(fused.s1, maps.m1, "1"), weigh(fused.s2, maps.m2, "2"),
          weigh(fused.s3, maps.m3, "3")};
}

}  // namespace memseg
