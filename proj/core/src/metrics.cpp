#include "memseg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "memseg/common.hpp"

namespace memseg {

double image_score(const torch::Tensor& map, std::int64_t k) {
  if (k < 1) {
    throw Error("image_score: k must be >= 1");
  }
  auto flat = map.detach().reshape({-1}).to(torch::kFloat64);
  if (flat.numel() < k) {
    throw Error("image_score: map has " + std::to_string(flat.numel()) + " pixels, fewer than k=" +
                std::to_string(k));
  }
  return std::get<0>(flat.topk(k)).mean().item<double>();
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error("auroc: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (auto l : labels) {
    if (l > 1) throw Error("auroc: labels must be 0 or 1");
    positives += l;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw Error("AUROC undefined: need both positive and negative labels");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the sum of 1-based midranks of the positives, kept integral.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    std::uint64_t pos_in_group = 0;
    for (std::size_t k = i; k <= j; ++k) pos_in_group += labels[order[k]];
    twice_rank_sum += static_cast<std::uint64_t>(i + j + 2) * pos_in_group;
    i = j + 1;
  }
  const std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(positives) * (positives + 1);
  const double u = static_cast<double>(twice_u) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace memseg
