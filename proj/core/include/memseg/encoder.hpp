#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "memseg/common.hpp"
#include "memseg/hashing.hpp"

namespace memseg {

/// Encoder outputs for a batch. f1..f3 come from the frozen stages, f4 from
/// the trainable bottleneck stage. For a 256x256 input with base width 64:
/// f1 64x64x64, f2 128x32x32, f3 256x16x16, f4 512x8x8 (per image).
struct FeaturePyramid {
  torch::Tensor f1;
  torch::Tensor f2;
  torch::Tensor f3;
  torch::Tensor f4;
};

struct PyramidChannels {
  std::int64_t c1 = 64;
  std::int64_t c2 = 128;
  std::int64_t c3 = 256;
  std::int64_t c4 = 512;

  static PyramidChannels from_base(std::int64_t base) {
    return {base, 2 * base, 4 * base, 8 * base};
  }
};

struct EncoderConfig {
  enum class Kind { kResNet18, kToy };

  Kind kind = Kind::kResNet18;
  /// Channel width of stage 1; ResNet18 requires 64.
  std::int64_t base_width = 64;
  /// Initialization seed (toy frozen stages, and any stage without file weights).
  std::uint64_t seed = 0;
  /// Tensor archive with ResNet18 weights (see scripts/convert_resnet18.py).
  std::filesystem::path weights;
};

std::string to_string(EncoderConfig::Kind kind);
EncoderConfig::Kind parse_encoder_kind(const std::string& text);

/// Stages 1-3 of a backbone. Implementations return (f1, f2, f3).
class FrozenStages : public torch::nn::Module {
 public:
  virtual std::array<torch::Tensor, 3> forward(const torch::Tensor& normalized) = 0;
};

/// Frozen multi-resolution feature extractor plus a trainable stage 4.
///
/// Stages 1-3 never receive gradients and always run with inference-mode
/// normalization statistics, so memory features and input features live in
/// the same space for the whole training run. Input images are in [0,1];
/// ImageNet mean/std normalization is applied internally.
class EncoderImpl : public torch::nn::Module {
 public:
  /// With `load_weights` false a ResNet18 encoder is left randomly
  /// initialized (its state is expected to be restored from a checkpoint).
  explicit EncoderImpl(EncoderConfig cfg, bool load_weights = true);

  FeaturePyramid forward(const torch::Tensor& images);

  /// f1..f3 without autograd tracking.
  std::array<torch::Tensor, 3> frozen_features(const torch::Tensor& images);
  torch::Tensor bottleneck(const torch::Tensor& f3);

  const EncoderConfig& config() const { return cfg_; }
  PyramidChannels channels() const { return channels_; }
  std::string backbone_name() const;

  /// Parameters and buffers of stages 1-3, with stable names.
  NamedTensors frozen_state() const;
  std::string frozen_hash() const;
  /// "<backbone>:<first 16 hex digits of frozen_hash()>".
  std::string tag() const;

  std::vector<torch::Tensor> trainable_parameters() const;

  void train(bool on = true) override;

 private:
  EncoderConfig cfg_;
  PyramidChannels channels_;
  std::shared_ptr<FrozenStages> frozen_;
  torch::nn::Sequential stage4_{nullptr};
  torch::Tensor mean_;
  torch::Tensor std_;
};
TORCH_MODULE(Encoder);

/// Small random convolutional extractor with the same pyramid shape contract
/// as ResNet18, for hermetic tests. Deterministic per seed. Each stage output
/// is rescaled to a per-image RMS of 3.
Encoder make_toy_encoder(std::uint64_t seed, std::int64_t base_width = 64);

/// Encoder built per `cfg`; ResNet18 loads cfg.weights.
Encoder make_encoder(const EncoderConfig& cfg);

/// Single-image pyramid (batch dimension of 1 kept). Throws on a wrong size.
FeaturePyramid extract_pyramid(Encoder& encoder, const Image& image);

/// Deterministic He-normal initialization of every conv/linear weight in
/// `module` (biases zeroed, batch-norm affine set to identity).
void init_parameters(torch::nn::Module& module, std::uint64_t seed);

}  // namespace memseg
