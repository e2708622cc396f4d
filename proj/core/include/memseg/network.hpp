#pragma once

#include <string>

#include "memseg/encoder.hpp"
#include "memseg/fusion.hpp"
#include "memseg/memory.hpp"

namespace memseg {

/// Component switches for ablations. Turning one off removes exactly that
/// computation:
///  - memory: CI = [II, II] and unit attention maps; the pool is never read.
///  - multi_scale: no cross-scale terms in the fusion module.
///  - spatial_attention: unit attention maps.
///  - coordinate_attention: CA blocks become the identity.
struct AblationFlags {
  bool memory = true;
  bool multi_scale = true;
  bool spatial_attention = true;
  bool coordinate_attention = true;

  std::string describe() const;
};

struct NetworkConfig {
  EncoderConfig encoder;
  std::int64_t image_size = 256;
  std::int64_t ca_reduction = 16;
  AblationFlags ablation;
  MemoryOptions memory;
  /// Initialization seed for fusion and decoder parameters.
  std::uint64_t seed = 0;
};

/// Per-pixel anomaly probabilities (HxW, in [0,1]).
struct AnomalyMap {
  torch::Tensor probs;
};

/// Every intermediate of one forward pass.
struct ForwardTrace {
  FeaturePyramid pyramid;
  DifferenceInfo difference;
  ConcatenatedInfo concatenated;
  SpatialAttentionMaps maps;
  FusedFeatures fused;
  FusedFeatures weighted;
  torch::Tensor logits;  // B x 2 x H x W
};

/// U-Net segmentation model: encoder -> memory -> fusion -> decoder.
///
/// Decoder schedule (input 256, base width 64): f4 512@8 -> up 256@16 ++ w3
/// -> 256 -> up 128@32 ++ w2 -> 128 -> up 64@64 ++ w1 -> 64 -> up 48@128 ->
/// 48 -> up 48@256 -> 48 -> 2-channel head. Each "up" is bilinear x2 plus a
/// conv/BN/ReLU block; each conv layer is two such blocks, except the last,
/// which is one block followed by the head convolution.
class SegModelImpl : public torch::nn::Module {
 public:
  explicit SegModelImpl(NetworkConfig cfg);
  SegModelImpl(NetworkConfig cfg, Encoder encoder);

  /// Anomaly-class probability per pixel, B x H x W.
  torch::Tensor forward(const torch::Tensor& images);
  torch::Tensor logits(const torch::Tensor& images);
  ForwardTrace trace(const torch::Tensor& images);

  void set_memory_pool(MemoryPool pool);
  const MemoryPool& memory_pool() const { return pool_; }

  Encoder& encoder() { return encoder_; }
  Msff& fusion() { return msff_; }
  const NetworkConfig& config() const { return cfg_; }
  /// Ablation switches can be flipped on a built model (e.g. for evaluation).
  void set_ablation(const AblationFlags& flags);

  /// Stage 4 of the encoder, fusion (incl. CA) and decoder parameters.
  std::vector<torch::Tensor> trainable_parameters();
  /// Names of trainable parameters, as they appear in named_parameters().
  NamedTensors named_trainable_parameters();

  /// All parameters and buffers (frozen encoder included), named.
  NamedTensors state();
  /// Copies a state produced by state(); names and shapes must match.
  void load_state(const NamedTensors& state);

  void to_dtype(torch::ScalarType dtype);

 private:
  void build();
  torch::Tensor run(const torch::Tensor& images, ForwardTrace* trace);

  NetworkConfig cfg_;
  Encoder encoder_{nullptr};
  Msff msff_{nullptr};
  torch::nn::Sequential up1_{nullptr}, up2_{nullptr}, up3_{nullptr}, up4_{nullptr}, up5_{nullptr};
  torch::nn::Sequential conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr}, conv4_{nullptr},
      conv5_{nullptr};
  MemoryPool pool_;
};
TORCH_MODULE(SegModel);

/// Anomaly map for one image without autograd. Uses the model's current
/// train/eval mode; call model->eval() for inference statistics.
AnomalyMap forward(SegModel& model, const Image& image);

}  // namespace memseg
