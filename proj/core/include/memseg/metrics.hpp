#pragma once

#include <cstdint>
#include <span>

#include <torch/torch.h>

namespace memseg {

/// Mean of the k largest values of an anomaly map. Throws if the map has
/// fewer than k elements.
double image_score(const torch::Tensor& map, std::int64_t k = 100);

/// Area under the ROC curve in its Mann-Whitney form: the probability that a
/// random positive scores above a random negative, ties counted as 1/2
/// (midranks). Labels are 0/1. Throws "AUROC undefined" when only one class
/// is present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace memseg
