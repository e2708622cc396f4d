#pragma once

#include "memseg/common.hpp"

namespace memseg {

struct LossConfig {
  double gamma = 4.0;
  double alpha = 1.0;
  double lambda_l1 = 0.6;
  double lambda_focal = 0.4;
  /// Probabilities are clamped to [eps, 1 - eps] inside the focal term.
  double eps = 1e-7;

  void validate() const;
};

struct LossTerms {
  torch::Tensor l1;
  torch::Tensor focal;
  torch::Tensor total;
};

/// Mean |S - S_hat| over all pixels. `target` and `probs` share a shape.
torch::Tensor l1_loss(const torch::Tensor& target, const torch::Tensor& probs);

/// Pixel mean of -alpha (1 - p_t)^gamma log(p_t), with p_t = p where S = 1
/// and 1 - p where S = 0.
torch::Tensor focal_loss(const torch::Tensor& target, const torch::Tensor& probs,
                         const LossConfig& cfg);

/// lambda_l1 * L1 + lambda_focal * focal.
LossTerms total_loss(const torch::Tensor& target, const torch::Tensor& probs,
                     const LossConfig& cfg);

}  // namespace memseg
