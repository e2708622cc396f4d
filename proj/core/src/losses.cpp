#include "memseg/losses.hpp"

namespace memseg {
namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw Error(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

void LossConfig::validate() const {
  if (gamma < 0 || lambda_l1 < 0 || lambda_focal < 0) {
    throw Error("LossConfig: gamma and lambda weights must be non-negative");
  }
  if (!(eps > 0 && eps < 0.5)) {
    throw Error("LossConfig: eps must lie in (0, 0.5)");
  }
}

torch::Tensor l1_loss(const torch::Tensor& target, const torch::Tensor& probs) {
  require_same_shape(target, probs, "l1_loss");
  return (target.to(probs.dtype()) - probs).abs().mean();
}

torch::Tensor focal_loss(const torch::Tensor& target, const torch::Tensor& probs,
                         const LossConfig& cfg) {
  require_same_shape(target, probs, "focal_loss");
  auto p = probs.clamp(cfg.eps, 1.0 - cfg.eps);
  auto s = target.to(probs.dtype());
  auto pt = s * p + (1 - s) * (1 - p);
  return (-cfg.alpha * (1 - pt).pow(cfg.gamma) * torch::log(pt)).mean();
}

LossTerms total_loss(const torch::Tensor& target, const torch::Tensor& probs,
                     const LossConfig& cfg) {
  auto l1 = memseg::l1_loss(target, probs);
  auto focal = focal_loss(target, probs, cfg);
  return {l1, focal, cfg.lambda_l1 * l1 + cfg.lambda_focal * focal};
}

}  // namespace memseg
