#include "memseg/encoder.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "memseg/image_io.hpp"
#include "memseg/tensor_archive.hpp"

namespace nn = torch::nn;

namespace memseg {
namespace {

nn::Conv2d conv3x3(std::int64_t in, std::int64_t out, std::int64_t stride = 1, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(bias));
}

// torchvision-compatible ResNet basic block.
class BasicBlockImpl : public nn::Module {
 public:
  BasicBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", conv3x3(in, out, stride));
    bn1 = register_module("bn1", nn::BatchNorm2d(out));
    conv2 = register_module("conv2", conv3x3(out, out));
    bn2 = register_module("bn2", nn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      downsample = register_module(
          "downsample",
          nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                         nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = bn2(conv2(y));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
  }

 private:
  nn::Conv2d conv1{nullptr}, conv2{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  nn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

nn::Sequential resnet_layer(std::int64_t in, std::int64_t out, std::int64_t stride) {
  return nn::Sequential(BasicBlock(in, out, stride), BasicBlock(out, out, 1));
}

class ResNetFrozenStages : public FrozenStages {
 public:
  ResNetFrozenStages() {
    conv1 = register_module(
        "conv1", nn::Conv2d(nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)));
    bn1 = register_module("bn1", nn::BatchNorm2d(64));
    layer1 = register_module("layer1", resnet_layer(64, 64, 1));
    layer2 = register_module("layer2", resnet_layer(64, 128, 2));
    layer3 = register_module("layer3", resnet_layer(128, 256, 2));
  }

  std::array<torch::Tensor, 3> forward(const torch::Tensor& x) override {
    auto y = torch::relu(bn1(conv1(x)));
    y = torch::max_pool2d(y, 3, 2, 1);
    auto f1 = layer1->forward(y);
    auto f2 = layer2->forward(f1);
    auto f3 = layer3->forward(f2);
    return {f1, f2, f3};
  }

 private:
  nn::Conv2d conv1{nullptr};
  nn::BatchNorm2d bn1{nullptr};
  nn::Sequential layer1{nullptr}, layer2{nullptr}, layer3{nullptr};
};

// Per-image RMS of every toy stage output.
constexpr double kToyFeatureRms = 3.0;

torch::Tensor rescale(const torch::Tensor& f) {
  return kToyFeatureRms * f / f.square().mean({1, 2, 3}, true).sqrt().clamp_min(1e-6);
}

class ToyFrozenStages : public FrozenStages {
 public:
  explicit ToyFrozenStages(const PyramidChannels& ch) {
    stem = register_module("stem", nn::Sequential(conv3x3(3, ch.c1, 2, true), nn::ReLU()));
    stage1 = register_module("stage1", nn::Sequential(conv3x3(ch.c1, ch.c1, 2, true), nn::ReLU(),
                                                      conv3x3(ch.c1, ch.c1, 1, true), nn::ReLU()));
    stage2 = register_module("stage2", nn::Sequential(conv3x3(ch.c1, ch.c2, 2, true), nn::ReLU(),
                                                      conv3x3(ch.c2, ch.c2, 1, true), nn::ReLU()));
    stage3 = register_module("stage3", nn::Sequential(conv3x3(ch.c2, ch.c3, 2, true), nn::ReLU(),
                                                      conv3x3(ch.c3, ch.c3, 1, true), nn::ReLU()));
  }

  std::array<torch::Tensor, 3> forward(const torch::Tensor& x) override {
    auto f1 = stage1->forward(stem->forward(x));
    auto f2 = stage2->forward(f1);
    auto f3 = stage3->forward(f2);
    return {rescale(f1), rescale(f2), rescale(f3)};
  }

 private:
  nn::Sequential stem{nullptr}, stage1{nullptr}, stage2{nullptr}, stage3{nullptr};
};

nn::Sequential toy_stage4(const PyramidChannels& ch) {
  return nn::Sequential(conv3x3(ch.c3, ch.c4, 2), nn::BatchNorm2d(ch.c4), nn::ReLU(),
                        conv3x3(ch.c4, ch.c4, 1), nn::BatchNorm2d(ch.c4), nn::ReLU());
}

void load_named(nn::Module& module, const std::string& prefix, const TensorArchive& archive) {
  torch::NoGradGuard no_grad;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    const torch::Tensor* src = archive.find(prefix + name);
    if (src == nullptr) {
      throw Error("encoder weights: missing tensor " + prefix + name);
    }
    if (src->sizes() != dst.sizes()) {
      throw Error("encoder weights: shape mismatch for " + prefix + name);
    }
    dst.copy_(src->to(dst.scalar_type()));
  };
  for (auto& item : module.named_parameters()) assign(item.key(), item.value());
  for (auto& item : module.named_buffers()) {
    if (item.key().ends_with("num_batches_tracked") && archive.find(prefix + item.key()) == nullptr) {
      continue;
    }
    assign(item.key(), item.value());
  }
}

}  // namespace

std::string to_string(EncoderConfig::Kind kind) {
  return kind == EncoderConfig::Kind::kToy ? "toy" : "resnet18";
}

EncoderConfig::Kind parse_encoder_kind(const std::string& text) {
  if (text == "toy") return EncoderConfig::Kind::kToy;
  if (text == "resnet18") return EncoderConfig::Kind::kResNet18;
  throw Error("unknown encoder kind: " + text);
}

void init_parameters(nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (auto& child : module.modules(/*include_self=*/true)) {
    if (auto* conv = child->as<nn::Conv2d>()) {
      auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      w.copy_(torch::randn(w.sizes(), gen, w.options()) * std::sqrt(2.0 / fan_in));
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* bn = child->as<nn::BatchNorm2d>()) {
      if (bn->weight.defined()) bn->weight.fill_(1.0);
      if (bn->bias.defined()) bn->bias.zero_();
    }
  }
}

EncoderImpl::EncoderImpl(EncoderConfig cfg, bool load_weights) : cfg_(std::move(cfg)) {
  if (cfg_.kind == EncoderConfig::Kind::kResNet18) {
    if (cfg_.base_width != 64) {
      throw Error("resnet18 encoder has a fixed base width of 64");
    }
    channels_ = PyramidChannels::from_base(64);
    frozen_ = register_module("frozen", std::make_shared<ResNetFrozenStages>());
    stage4_ = register_module("stage4", resnet_layer(256, 512, 2));
  } else {
    if (cfg_.base_width < 1) {
      throw Error("toy encoder base width must be positive");
    }
    channels_ = PyramidChannels::from_base(cfg_.base_width);
    frozen_ = register_module("frozen", std::make_shared<ToyFrozenStages>(channels_));
    stage4_ = register_module("stage4", toy_stage4(channels_));
  }
  init_parameters(*frozen_, derive_seed(cfg_.seed, 11));
  init_parameters(*stage4_, derive_seed(cfg_.seed, 12));

  if (cfg_.kind == EncoderConfig::Kind::kResNet18 && load_weights) {
    if (cfg_.weights.empty()) {
      throw Error("resnet18 encoder needs a weights file (tensor archive); use the toy encoder "
                  "for hermetic runs");
    }
    TensorArchive archive = read_archive(cfg_.weights);
    load_named(*frozen_, "frozen.", archive);
    load_named(*stage4_, "stage4.", archive);
  }

  for (auto& p : frozen_->parameters()) {
    p.set_requires_grad(false);
  }
  mean_ = register_buffer("mean", torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1}));
  train(true);
}

void EncoderImpl::train(bool on) {
  nn::Module::train(on);
  frozen_->eval();
}

std::string EncoderImpl::backbone_name() const {
  if (cfg_.kind == EncoderConfig::Kind::kResNet18) return "resnet18";
  return "toy-w" + std::to_string(cfg_.base_width);
}

std::array<torch::Tensor, 3> EncoderImpl::frozen_features(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw Error("encoder: expected a Bx3xHxW batch");
  }
  if (images.size(2) % 32 != 0 || images.size(3) % 32 != 0 || images.size(2) < 32 ||
      images.size(3) < 32) {
    throw Error("encoder: input size must be a positive multiple of 32, got " +
                std::to_string(images.size(2)) + "x" + std::to_string(images.size(3)));
  }
  torch::NoGradGuard no_grad;
  auto normalized = (images.to(mean_.scalar_type()) - mean_) / std_;
  return frozen_->forward(normalized);
}

torch::Tensor EncoderImpl::bottleneck(const torch::Tensor& f3) {
  return stage4_->forward(f3);
}

FeaturePyramid EncoderImpl::forward(const torch::Tensor& images) {
  auto [f1, f2, f3] = frozen_features(images);
  auto f4 = bottleneck(f3);
  return {f1, f2, f3, f4};
}

NamedTensors EncoderImpl::frozen_state() const {
  NamedTensors out;
  for (const auto& item : frozen_->named_parameters()) out.emplace_back(item.key(), item.value());
  for (const auto& item : frozen_->named_buffers()) out.emplace_back(item.key(), item.value());
  return out;
}

std::string EncoderImpl::frozen_hash() const {
  return sha256_tensors(frozen_state());
}

std::string EncoderImpl::tag() const {
  return backbone_name() + ":" + frozen_hash().substr(0, 16);
}

std::vector<torch::Tensor> EncoderImpl::trainable_parameters() const {
  return stage4_->parameters();
}

Encoder make_toy_encoder(std::uint64_t seed, std::int64_t base_width) {
  EncoderConfig cfg;
  cfg.kind = EncoderConfig::Kind::kToy;
  cfg.base_width = base_width;
  cfg.seed = seed;
  return Encoder(cfg);
}

Encoder make_encoder(const EncoderConfig& cfg) {
  return Encoder(cfg);
}

FeaturePyramid extract_pyramid(Encoder& encoder, const Image& image) {
  return encoder->forward(image.tensor().unsqueeze(0));
}

}  // namespace memseg
