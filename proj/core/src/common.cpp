#include "memseg/common.hpp"

namespace memseg {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Image::Image(torch::Tensor chw) : data_(std::move(chw)) {
  if (!data_.defined() || data_.dim() != 3 || data_.size(0) != 3) {
    throw Error("Image: expected a 3xHxW tensor");
  }
}

Image Image::zeros(std::int64_t height, std::int64_t width) {
  return Image(torch::zeros({3, height, width}));
}

std::string to_string(MaskRole role) {
  switch (role) {
    case MaskRole::kPerlin: return "perlin";
    case MaskRole::kForeground: return "foreground";
    case MaskRole::kCombined: return "combined";
    case MaskRole::kInverted: return "inverted";
    case MaskRole::kGroundTruth: return "ground_truth";
  }
  return "unknown";
}

BinaryMask::BinaryMask(torch::Tensor hw, MaskRole role) : values_(std::move(hw)), role_(role) {
  if (!values_.defined() || values_.dim() != 2) {
    throw Error("BinaryMask: expected an HxW tensor");
  }
  if (values_.numel() > 0 && !torch::logical_or(values_ == 0, values_ == 1).all().item<bool>()) {
    throw Error("BinaryMask: values must be exactly 0 or 1");
  }
}

BinaryMask BinaryMask::ones(std::int64_t height, std::int64_t width, MaskRole role) {
  return BinaryMask(torch::ones({height, width}), role);
}

BinaryMask BinaryMask::zeros(std::int64_t height, std::int64_t width, MaskRole role) {
  return BinaryMask(torch::zeros({height, width}), role);
}

std::int64_t BinaryMask::area() const {
  return static_cast<std::int64_t>(values_.sum().item<double>());
}

double BinaryMask::area_fraction() const {
  return values_.numel() == 0 ? 0.0 : static_cast<double>(area()) / values_.numel();
}

BinaryMask BinaryMask::inverted() const {
  return BinaryMask(1 - values_, MaskRole::kInverted);
}

}  // namespace memseg
