#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace memseg {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Lowercase hex SHA-256 over names, dtypes, shapes and raw bytes, in order.
std::string sha256_tensors(const NamedTensors& tensors);

}  // namespace memseg
