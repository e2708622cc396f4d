#include "memseg/network.hpp"

#include <map>

namespace nn = torch::nn;

namespace memseg {
namespace {

void push_basic_block(nn::Sequential& seq, std::int64_t in, std::int64_t out) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1).bias(false)));
  seq->push_back(nn::BatchNorm2d(out));
  seq->push_back(nn::ReLU());
}

nn::Sequential up_block(std::int64_t in, std::int64_t out) {
  nn::Sequential seq(nn::Upsample(nn::UpsampleOptions()
                                      .scale_factor(std::vector<double>{2.0, 2.0})
                                      .mode(torch::kBilinear)
                                      .align_corners(false)));
  push_basic_block(seq, in, out);
  return seq;
}

nn::Sequential conv_layer(std::int64_t in, std::int64_t out) {
  nn::Sequential seq;
  push_basic_block(seq, in, out);
  push_basic_block(seq, out, out);
  return seq;
}

nn::Sequential head_layer(std::int64_t in) {
  nn::Sequential seq;
  push_basic_block(seq, in, in);
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, 2, 3).padding(1)));
  return seq;
}

}  // namespace

std::string AblationFlags::describe() const {
  std::string s;
  auto add = [&s](bool on, const char* name) {
    if (!s.empty()) s += ",";
    s += std::string(on ? "+" : "-") + name;
  };
  add(memory, "memory");
  add(multi_scale, "multi_scale");
  add(spatial_attention, "spatial_attention");
  add(coordinate_attention, "coordinate_attention");
  return s;
}

SegModelImpl::SegModelImpl(NetworkConfig cfg) : SegModelImpl(cfg, make_encoder(cfg.encoder)) {}

SegModelImpl::SegModelImpl(NetworkConfig cfg, Encoder encoder)
    : cfg_(std::move(cfg)), encoder_(std::move(encoder)) {
  cfg_.encoder = encoder_->config();
  if (cfg_.image_size < 32 || cfg_.image_size % 32 != 0) {
    throw Error("image size must be a positive multiple of 32");
  }
  build();
}

void SegModelImpl::build() {
  encoder_ = register_module("encoder", encoder_);
  const auto ch = encoder_->channels();
  FusionOptions fo;
  fo.channels = {2 * ch.c1, 2 * ch.c2, 2 * ch.c3};
  fo.ca_reduction = cfg_.ca_reduction;
  fo.coordinate_attention = cfg_.ablation.coordinate_attention;
  fo.multi_scale = cfg_.ablation.multi_scale;
  msff_ = register_module("msff", Msff(fo));

  const std::int64_t tail = std::max<std::int64_t>(1, 3 * ch.c1 / 4);
  up1_ = register_module("up1", up_block(ch.c4, ch.c3));
  conv1_ = register_module("conv1", conv_layer(ch.c3 + fo.channels[2], ch.c3));
  up2_ = register_module("up2", up_block(ch.c3, ch.c2));
  conv2_ = register_module("conv2", conv_layer(ch.c2 + fo.channels[1], ch.c2));
  up3_ = register_module("up3", up_block(ch.c2, ch.c1));
  conv3_ = register_module("conv3", conv_layer(ch.c1 + fo.channels[0], ch.c1));
  up4_ = register_module("up4", up_block(ch.c1, tail));
  conv4_ = register_module("conv4", conv_layer(tail, tail));
  up5_ = register_module("up5", up_block(tail, tail));
  conv5_ = register_module("conv5", head_layer(tail));

  init_parameters(*msff_, derive_seed(cfg_.seed, 21));
  msff_->reset_cross_scale();
  std::uint64_t stream = 22;
  for (auto* part : {&up1_, &conv1_, &up2_, &conv2_, &up3_, &conv3_, &up4_, &conv4_, &up5_,
                     &conv5_}) {
    init_parameters(**part, derive_seed(cfg_.seed, stream++));
  }
}

void SegModelImpl::set_ablation(const AblationFlags& flags) {
  cfg_.ablation = flags;
  msff_->set_switches(flags.coordinate_attention, flags.multi_scale);
}

void SegModelImpl::set_memory_pool(MemoryPool pool) {
  if (!pool.empty()) {
    const auto ch = encoder_->channels();
    if (pool.f1.size(1) != ch.c1 || pool.f2.size(1) != ch.c2 || pool.f3.size(1) != ch.c3) {
      throw Error("memory pool channels do not match the encoder");
    }
  }
  pool_ = std::move(pool);
}

torch::Tensor SegModelImpl::run(const torch::Tensor& images, ForwardTrace* trace) {
  auto [f1, f2, f3] = encoder_->frozen_features(images);
  FeaturePyramid pyramid{f1, f2, f3, encoder_->bottleneck(f3)};

  DifferenceInfo di;
  ConcatenatedInfo ci;
  SpatialAttentionMaps maps;
  if (cfg_.ablation.memory) {
    if (pool_.empty()) {
      throw Error("model has no memory pool; build one or disable the memory component");
    }
    di = best_difference(pool_, pyramid, cfg_.memory);
    ci = concat_info(pyramid, di);
    maps = cfg_.ablation.spatial_attention ? attention_maps(di)
                                           : SpatialAttentionMaps::ones_like(di);
  } else {
    DifferenceInfo duplicate{f1, f2, f3, torch::Tensor()};
    ci = concat_info(pyramid, duplicate);
    maps = SpatialAttentionMaps::ones_like(duplicate);
  }

  FusedFeatures fused = msff_->forward(ci);
  FusedFeatures weighted = apply_spatial_attention(fused, maps);

  auto x = conv1_->forward(torch::cat({up1_->forward(pyramid.f4), weighted.s3}, 1));
  x = conv2_->forward(torch::cat({up2_->forward(x), weighted.s2}, 1));
  x = conv3_->forward(torch::cat({up3_->forward(x), weighted.s1}, 1));
  x = conv4_->forward(up4_->forward(x));
  auto logits = conv5_->forward(up5_->forward(x));

  if (trace != nullptr) {
    *trace = {pyramid, di, ci, maps, fused, weighted, logits};
  }
  return logits;
}

torch::Tensor SegModelImpl::logits(const torch::Tensor& images) {
  return run(images, nullptr);
}

ForwardTrace SegModelImpl::trace(const torch::Tensor& images) {
  ForwardTrace t;
  run(images, &t);
  return t;
}

torch::Tensor SegModelImpl::forward(const torch::Tensor& images) {
  return torch::softmax(logits(images), 1).select(1, 1);
}

std::vector<torch::Tensor> SegModelImpl::trainable_parameters() {
  std::vector<torch::Tensor> out;
  for (auto& [name, p] : named_trainable_parameters()) out.push_back(p);
  return out;
}

NamedTensors SegModelImpl::named_trainable_parameters() {
  NamedTensors out;
  for (auto& item : named_parameters()) {
    if (item.key().starts_with("encoder.frozen.")) continue;
    out.emplace_back(item.key(), item.value());
  }
  return out;
}

NamedTensors SegModelImpl::state() {
  NamedTensors out;
  for (auto& item : named_parameters()) out.emplace_back(item.key(), item.value());
  for (auto& item : named_buffers()) out.emplace_back(item.key(), item.value());
  return out;
}

void SegModelImpl::load_state(const NamedTensors& state) {
  torch::NoGradGuard no_grad;
  auto current = this->state();
  std::map<std::string, torch::Tensor> incoming(state.begin(), state.end());
  for (auto& [name, dst] : current) {
    auto it = incoming.find(name);
    if (it == incoming.end()) {
      throw Error("model state is missing tensor " + name);
    }
    if (it->second.sizes() != dst.sizes()) {
      throw Error("model state shape mismatch for " + name);
    }
    dst.copy_(it->second.to(dst.scalar_type()));
  }
}

void SegModelImpl::to_dtype(torch::ScalarType dtype) {
  to(dtype);
  if (!pool_.empty()) {
    pool_.f1 = pool_.f1.to(dtype);
    pool_.f2 = pool_.f2.to(dtype);
    pool_.f3 = pool_.f3.to(dtype);
  }
}

AnomalyMap forward(SegModel& model, const Image& image) {
  torch::NoGradGuard no_grad;
  return {model->forward(image.tensor().unsqueeze(0)).squeeze(0)};
}

}  // namespace memseg
