#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <torch/torch.h>

namespace memseg {

/// Seeded random engine used across the library. Every stochastic operation
/// takes one by reference so that (inputs, seed) fully determine outputs.
using Rng = std::mt19937_64;

/// Derives an independent seed for `stream` from `base` (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Error raised for invalid arguments and broken preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RGB image as a 3xHxW float32 tensor with values in [0,1].
class Image {
 public:
  Image() = default;
  /// Takes ownership of a 3xHxW tensor. Throws if the shape is wrong.
  explicit Image(torch::Tensor chw);

  static Image zeros(std::int64_t height, std::int64_t width);

  const torch::Tensor& tensor() const { return data_; }
  std::int64_t height() const { return data_.size(1); }
  std::int64_t width() const { return data_.size(2); }
  bool empty() const { return !data_.defined(); }
  Image clone() const { return Image(data_.clone()); }

 private:
  torch::Tensor data_;
};

enum class MaskRole { kPerlin, kForeground, kCombined, kInverted, kGroundTruth };

std::string to_string(MaskRole role);

/// HxW float32 tensor whose values are exactly 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  /// Values are checked to be in {0,1}.
  BinaryMask(torch::Tensor hw, MaskRole role);

  static BinaryMask ones(std::int64_t height, std::int64_t width, MaskRole role);
  static BinaryMask zeros(std::int64_t height, std::int64_t width, MaskRole role);

  const torch::Tensor& tensor() const { return values_; }
  MaskRole role() const { return role_; }
  std::int64_t height() const { return values_.size(0); }
  std::int64_t width() const { return values_.size(1); }
  bool empty() const { return !values_.defined(); }

  std::int64_t area() const;
  double area_fraction() const;
  BinaryMask inverted() const;

 private:
  torch::Tensor values_;
  MaskRole role_ = MaskRole::kCombined;
};

}  // namespace memseg
