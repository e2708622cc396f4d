#include "memseg/memory.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "memseg/image_io.hpp"

namespace memseg {
namespace {

void check_scale(const torch::Tensor& memory, const torch::Tensor& input, const char* scale) {
  if (memory.dim() != 4 || input.dim() != 4 || memory.sizes().slice(1) != input.sizes().slice(1)) {
    throw Error(std::string("memory: feature shape mismatch at scale ") + scale);
  }
}

// Per-batch-element sum over all elements of one scale, accumulated in double.
torch::Tensor per_item_sum(const torch::Tensor& d) {
  return d.to(torch::kFloat64).flatten(1).sum(1);
}

}  // namespace

SpatialAttentionMaps SpatialAttentionMaps::ones_like(const DifferenceInfo& di) {
  auto one = [](const torch::Tensor& d) {
    return torch::ones({d.size(0), 1, d.size(2), d.size(3)}, d.options());
  };
  return {one(di.d1), one(di.d2), one(di.d3)};
}

MemoryPool pool_from_images(Encoder& encoder, const std::vector<Image>& images,
                            std::vector<std::string> sources, std::uint64_t seed) {
  if (images.empty()) {
    throw Error("memory pool needs at least one image");
  }
  std::vector<torch::Tensor> f1, f2, f3;
  for (const auto& image : images) {
    auto feats = encoder->frozen_features(image.tensor().unsqueeze(0));
    f1.push_back(feats[0]);
    f2.push_back(feats[1]);
    f3.push_back(feats[2]);
  }
  MemoryPool pool;
  pool.f1 = torch::cat(f1);
  pool.f2 = torch::cat(f2);
  pool.f3 = torch::cat(f3);
  pool.sources = std::move(sources);
  pool.seed = seed;
  return pool;
}

std::vector<std::size_t> sample_pool_indices(std::size_t count, std::int64_t n, std::uint64_t seed) {
  if (n < 1) {
    throw Error("memory pool size must be >= 1");
  }
  if (static_cast<std::size_t>(n) > count) {
    throw Error("memory pool size " + std::to_string(n) + " exceeds train set size " +
                std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());
  return order;
}

MemoryPool build_pool(Encoder& encoder, const DatasetIndex& train, std::int64_t n,
                      std::int64_t image_size, std::uint64_t seed) {
  const auto picks = sample_pool_indices(train.items.size(), n, seed);
  std::vector<Image> images;
  std::vector<std::string> sources;
  for (auto i : picks) {
    images.push_back(load_image(train.items[i].image, image_size));
    sources.push_back(train.items[i].image.string());
  }
  return pool_from_images(encoder, images, std::move(sources), seed);
}

std::vector<DifferencePyramid> difference_all(const MemoryPool& pool, const FeaturePyramid& input) {
  if (pool.empty()) {
    throw Error("difference_all: empty memory pool");
  }
  check_scale(pool.f1, input.f1, "1");
  check_scale(pool.f2, input.f2, "2");
  check_scale(pool.f3, input.f3, "3");
  std::vector<DifferencePyramid> out;
  out.reserve(static_cast<std::size_t>(pool.size()));
  for (std::int64_t i = 0; i < pool.size(); ++i) {
    out.push_back({(pool.f1[i].unsqueeze(0) - input.f1).abs(),
                   (pool.f2[i].unsqueeze(0) - input.f2).abs(),
                   (pool.f3[i].unsqueeze(0) - input.f3).abs()});
  }
  return out;
}

namespace {

// Running argmin over candidates, per batch element and scale.
class ArgminTracker {
 public:
  explicit ArgminTracker(bool per_scale) : per_scale_(per_scale) {}

  void offer(std::int64_t index, const DifferencePyramid& cand) {
    std::array<torch::Tensor, 3> sums{per_item_sum(cand.d1), per_item_sum(cand.d2),
                                      per_item_sum(cand.d3)};
    if (!per_scale_) {
      auto total = sums[0] + sums[1] + sums[2];
      sums = {total, total, total};
    }
    const std::array<const torch::Tensor*, 3> parts{&cand.d1, &cand.d2, &cand.d3};
    if (!best_[0].defined()) {
      for (int s = 0; s < 3; ++s) {
        best_sum_[s] = sums[s];
        best_[s] = parts[s]->clone();
        index_[s] = torch::full({sums[s].size(0)}, index, torch::kInt64);
      }
      return;
    }
    for (int s = 0; s < 3; ++s) {
      auto better = sums[s] < best_sum_[s];  // strict: lowest index wins ties
      if (!better.any().item<bool>()) continue;
      best_sum_[s] = torch::where(better, sums[s], best_sum_[s]);
      index_[s] = torch::where(better, torch::full_like(index_[s], index), index_[s]);
      auto sel = better.view({-1, 1, 1, 1});
      best_[s] = torch::where(sel, *parts[s], best_[s]);
    }
  }

  DifferenceInfo result() const {
    if (!best_[0].defined()) {
      throw Error("best_difference: no candidates");
    }
    return {best_[0], best_[1], best_[2], torch::stack({index_[0], index_[1], index_[2]}, 1)};
  }

 private:
  bool per_scale_;
  std::array<torch::Tensor, 3> best_;
  std::array<torch::Tensor, 3> best_sum_;
  std::array<torch::Tensor, 3> index_;
};

}  // namespace

DifferenceInfo best_difference(const std::vector<DifferencePyramid>& candidates,
                               const MemoryOptions& options) {
  if (candidates.empty()) {
    throw Error("best_difference: no candidates");
  }
  ArgminTracker tracker(options.per_scale_argmin);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    tracker.offer(static_cast<std::int64_t>(i), candidates[i]);
  }
  return tracker.result();
}

DifferenceInfo best_difference(const MemoryPool& pool, const FeaturePyramid& input,
                               const MemoryOptions& options) {
  if (pool.empty()) {
    throw Error("best_difference: empty memory pool");
  }
  check_scale(pool.f1, input.f1, "1");
  check_scale(pool.f2, input.f2, "2");
  check_scale(pool.f3, input.f3, "3");
  torch::NoGradGuard no_grad;
  ArgminTracker tracker(options.per_scale_argmin);
  for (std::int64_t i = 0; i < pool.size(); ++i) {
    tracker.offer(i, {(pool.f1[i].unsqueeze(0) - input.f1).abs(),
                      (pool.f2[i].unsqueeze(0) - input.f2).abs(),
                      (pool.f3[i].unsqueeze(0) - input.f3).abs()});
  }
  return tracker.result();
}

ConcatenatedInfo concat_info(const FeaturePyramid& input, const DifferenceInfo& di) {
  auto cat = [](const torch::Tensor& a, const torch::Tensor& b, const char* scale) {
    if (a.dim() != 4 || b.dim() != 4 || a.size(0) != b.size(0) || a.size(2) != b.size(2) ||
        a.size(3) != b.size(3)) {
      throw Error(std::string("concat_info: shape mismatch at scale ") + scale);
    }
    return torch::cat({a, b}, 1);
  };
  return {cat(input.f1, di.d1, "1"), cat(input.f2, di.d2, "2"), cat(input.f3, di.d3, "3")};
}

torch::Tensor upsample_bilinear(const torch::Tensor& x, std::int64_t height, std::int64_t width) {
  return torch::nn::functional::interpolate(
      x, torch::nn::functional::InterpolateFuncOptions()
             .size(std::vector<std::int64_t>{height, width})
             .mode(torch::kBilinear)
             .align_corners(false));
}

SpatialAttentionMaps attention_maps(const DifferenceInfo& di) {
  auto m3 = di.d3.mean(1, true);
  auto m2 = di.d2.mean(1, true) * upsample_bilinear(m3, di.d2.size(2), di.d2.size(3));
  auto m1 = di.d1.mean(1, true) * upsample_bilinear(m2, di.d1.size(2), di.d1.size(3));
  return {m1, m2, m3};
}

}  // namespace memseg
